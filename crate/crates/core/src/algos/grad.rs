use crate::error::Result;
use crate::nn::{GradientSet, LossEvaluation, Network};
use crate::par;

const CHUNK: usize = 16;

/// Sums per-sample losses and gradients. `f` adds one sample's gradient
/// into the provided set and returns its loss contribution. Chunks are
/// reduced in input order so the result does not depend on scheduling.
pub(crate) fn accumulate<S, F>(net: &Network, samples: &[S], f: F) -> Result<LossEvaluation>
where
    S: Sync,
    F: Fn(&S, &mut GradientSet) -> Result<f64> + Sync + Send,
{
    let parts = par::map_chunks(samples, CHUNK, |chunk| -> Result<(f64, GradientSet)> {
        let mut g = net.zero_grads();
        let mut loss = 0.0;
        for s in chunk {
            loss += f(s, &mut g)?;
        }
        Ok((loss, g))
    });
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grads.add_assign(&g);
    }
    Ok(LossEvaluation { loss, grads })
}
