use crate::error::{Error, Result};

/// One named, shaped array of single-precision weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Ordered network weights bound to a spec hash. Order is layer order and is
/// preserved by checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub spec_hash: u64,
    pub params: Vec<Param>,
}

impl ParameterSet {
    pub fn len(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    pub fn zeros_like(&self) -> GradientSet {
        GradientSet {
            grads: self.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.spec_hash == other.spec_hash
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn check_congruent(&self, grads: &GradientSet) -> Result<()> {
        if self.params.len() != grads.grads.len()
            || self.params.iter().zip(&grads.grads).any(|(p, g)| p.data.len() != g.len())
        {
            return Err(Error::protocol("gradient set does not match parameter layout"));
        }
        Ok(())
    }

    /// Flat copy of every value in layer order.
    pub fn flatten(&self) -> Vec<f32> {
        self.params.iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    /// Mutable view of the value at a flat index.
    pub fn flat_mut(&mut self, mut index: usize) -> &mut f32 {
        for p in &mut self.params {
            if index < p.data.len() {
                return &mut p.data[index];
            }
            index -= p.data.len();
        }
        panic!("flat index out of range");
    }

    /// Bit pattern digest, used to prove parameters stayed frozen.
    pub fn fingerprint(&self) -> Vec<u32> {
        self.params.iter().flat_map(|p| p.data.iter().map(|v| v.to_bits())).collect()
    }
}

/// Gradients in the same layout as a [`ParameterSet`], double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub grads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn global_norm(&self) -> f64 {
        self.grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.grads.iter_mut().flatten().for_each(|g| *g *= k);
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.grads.iter().flatten().copied().collect()
    }

    /// Rescales so the global norm is at most `max_norm`. Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

/// Result of differentiating a scalar loss.
#[derive(Debug, Clone)]
pub struct LossEvaluation {
    pub loss: f64,
    pub grads: GradientSet,
}

/// Default global gradient-norm bound.
pub const GRAD_CLIP_NORM: f64 = 40.0;

/// Validates a loss evaluation and applies global-norm clipping.
pub fn finish_gradients(eval: LossEvaluation, max_norm: f64) -> Result<GradientSet> {
    if !eval.loss.is_finite() {
        return Err(Error::numeric(format!("non-finite loss {}", eval.loss)));
    }
    let mut grads = eval.grads;
    if !grads.all_finite() {
        return Err(Error::numeric(format!(
            "non-finite gradient (loss {}, norm {})",
            eval.loss,
            grads.global_norm()
        )));
    }
    grads.clip_global_norm(max_norm);
    Ok(grads)
}

/// Largest relative error between `analytic` and central finite differences
/// of `loss` over every parameter. Differences use the step actually
/// representable in single precision.
pub fn finite_difference_error(
    params: &ParameterSet,
    analytic: &GradientSet,
    eps: f64,
    mut loss: impl FnMut(&ParameterSet) -> f64,
) -> f64 {
    let flat = analytic.flatten();
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (i, &g) in flat.iter().enumerate() {
        let orig = *probe.flat_mut(i);
        let hi = (orig as f64 + eps) as f32;
        let lo = (orig as f64 - eps) as f32;
        *probe.flat_mut(i) = hi;
        let lh = loss(&probe);
        *probe.flat_mut(i) = lo;
        let ll = loss(&probe);
        *probe.flat_mut(i) = orig;
        let numeric = (lh - ll) / (hi as f64 - lo as f64);
        let denom = g.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max((g - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_rescales_to_bound() {
        let mut g = GradientSet {
            grads: vec![vec![48.0, 0.0], vec![64.0]],
        };
        assert_eq!(g.global_norm(), 80.0);
        let before = g.clip_global_norm(GRAD_CLIP_NORM);
        assert_eq!(before, 80.0);
        assert!((g.global_norm() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn small_gradients_untouched() {
        let mut g = GradientSet {
            grads: vec![vec![3.0, 4.0]],
        };
        g.clip_global_norm(40.0);
        assert_eq!(g.grads[0], vec![3.0, 4.0]);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let eval = LossEvaluation {
            loss: f64::NAN,
            grads: GradientSet { grads: vec![vec![0.0]] },
        };
        assert!(matches!(finish_gradients(eval, 40.0), Err(Error::Numeric(_))));
    }
}
