//! Synchronous (A2C) and asynchronous (A3C) gradient application.

use std::sync::Arc;

use super::policy_gradient::{actor_critic_loss, AcLossConfig, AcSample};
use crate::error::{Error, Result};
use crate::nn::{finish_gradients, Adam, AdamConfig, GradientSet, Network, ParameterSet};

/// Single owner of a global parameter set. Every write bumps the version;
/// readers take an `Arc` snapshot, so they always see a complete version.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    params: Arc<ParameterSet>,
    version: u64,
    opt: Adam,
}

impl ParameterStore {
    pub fn new(params: ParameterSet, adam: AdamConfig) -> Self {
        let opt = Adam::new(adam, &params);
        Self {
            params: Arc::new(params),
            version: 0,
            opt,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> Arc<ParameterSet> {
        self.params.clone()
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    /// Applies one optimizer step and returns the new version.
    pub fn apply(&mut self, grads: &GradientSet) -> Result<u64> {
        let mut next = (*self.params).clone();
        self.opt.step(&mut next, grads)?;
        self.params = Arc::new(next);
        self.version += 1;
        Ok(self.version)
    }
}

/// One worker's rollout, tagged with the parameter version that produced it.
#[derive(Debug, Clone)]
pub struct WorkerBatch {
    pub version: u64,
    pub samples: Vec<AcSample>,
}

/// Averaged, clipped gradient over worker batches.
pub fn a2c_gradient(net: &Network, params: &ParameterSet, batches: &[WorkerBatch], cfg: &AcLossConfig, clip: f64) -> Result<GradientSet> {
    let mut total: Option<GradientSet> = None;
    for b in batches {
        let g = actor_critic_loss(net, params, &b.samples, cfg)?;
        if !g.loss.is_finite() {
            return Err(Error::numeric(format!("non-finite actor-critic loss {}", g.loss)));
        }
        match total.as_mut() {
            Some(t) => t.add_assign(&g.grads),
            None => total = Some(g.grads),
        }
    }
    let mut grads = total.ok_or_else(|| Error::protocol("a2c update without worker batches"))?;
    grads.scale(1.0 / batches.len() as f64);
    finish_gradients(
        crate::nn::LossEvaluation {
            loss: 0.0,
            grads,
        },
        clip,
    )
}

/// Synchronous update: every batch must come from the store's current
/// version. Applies one combined step and returns the new version.
pub fn a2c_update(
    net: &Network,
    store: &mut ParameterStore,
    batches: &[WorkerBatch],
    cfg: &AcLossConfig,
    clip: f64,
) -> Result<u64> {
    if let Some(b) = batches.iter().find(|b| b.version != store.version()) {
        return Err(Error::protocol(format!(
            "stale worker batch: version {} but store is at {}",
            b.version,
            store.version()
        )));
    }
    let grads = a2c_gradient(net, store.params(), batches, cfg, clip)?;
    store.apply(&grads)
}

/// Asynchronous apply: the gradient may come from any earlier version.
pub fn a3c_apply(grads: &GradientSet, store: &mut ParameterStore) -> Result<u64> {
    store.apply(grads)
}

/// Worker-side gradient for A3C, computed against the worker's own snapshot.
pub fn a3c_worker_gradient(net: &Network, snapshot: &ParameterSet, samples: &[AcSample], cfg: &AcLossConfig, clip: f64) -> Result<GradientSet> {
    finish_gradients(actor_critic_loss(net, snapshot, samples, cfg)?, clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, HeadSpec, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Network, ParameterStore, Vec<AcSample>) {
        let net = Network::new(NetworkSpec::flat(3, vec![4], HeadSpec::PolicyValue { actions: 3 }, Activation::Tanh)).unwrap();
        let store = ParameterStore::new(net.init(1), AdamConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples = (0..6)
            .map(|_| AcSample {
                features: Arc::from((0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<_>>()),
                action: rng.random_range(0..3),
                advantage: rng.random_range(-1.0..1.0),
                value_target: rng.random_range(-1.0..1.0),
            })
            .collect();
        (net, store, samples)
    }

    #[test]
    fn one_worker_equals_plain_step() {
        let (net, mut store, samples) = setup();
        let mut plain = store.clone();
        let cfg = AcLossConfig::default();
        a2c_update(&net, &mut store, &[WorkerBatch { version: 0, samples: samples.clone() }], &cfg, 40.0).unwrap();
        let g = finish_gradients(actor_critic_loss(&net, plain.params(), &samples, &cfg).unwrap(), 40.0).unwrap();
        plain.apply(&g).unwrap();
        assert_eq!(store.params(), plain.params());
    }

    #[test]
    fn identical_workers_average_to_single() {
        let (net, store, samples) = setup();
        let cfg = AcLossConfig::default();
        let one = a2c_gradient(&net, store.params(), &[WorkerBatch { version: 0, samples: samples.clone() }], &cfg, 40.0).unwrap();
        let batches = vec![WorkerBatch { version: 0, samples }; 3];
        let three = a2c_gradient(&net, store.params(), &batches, &cfg, 40.0).unwrap();
        for (a, b) in one.flatten().iter().zip(three.flatten()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn stale_batch_is_protocol_error() {
        let (net, mut store, samples) = setup();
        let cfg = AcLossConfig::default();
        a2c_update(&net, &mut store, &[WorkerBatch { version: 0, samples: samples.clone() }], &cfg, 40.0).unwrap();
        let err = a2c_update(&net, &mut store, &[WorkerBatch { version: 0, samples }], &cfg, 40.0).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
        assert_eq!(store.version(), 1);
    }

    #[test]
    fn a3c_tolerates_staleness_and_counts_applies() {
        let (net, mut store, samples) = setup();
        let cfg = AcLossConfig::default();
        let old = store.snapshot();
        for _ in 0..3 {
            let g = a3c_worker_gradient(&net, &store.snapshot(), &samples, &cfg, 40.0).unwrap();
            a3c_apply(&g, &mut store).unwrap();
        }
        // Gradient from version v - 3.
        let stale = a3c_worker_gradient(&net, &old, &samples, &cfg, 40.0).unwrap();
        assert_eq!(a3c_apply(&stale, &mut store).unwrap(), 4);
    }

    #[test]
    fn single_worker_a3c_matches_serial_actor_critic() {
        let (net, mut store, samples) = setup();
        let mut serial = store.clone();
        let cfg = AcLossConfig::default();
        for _ in 0..4 {
            let g = a3c_worker_gradient(&net, &store.snapshot(), &samples, &cfg, 40.0).unwrap();
            a3c_apply(&g, &mut store).unwrap();
            let g2 = finish_gradients(actor_critic_loss(&net, serial.params(), &samples, &cfg).unwrap(), 40.0).unwrap();
            serial.apply(&g2).unwrap();
        }
        assert_eq!(store.params(), serial.params());
    }

    #[test]
    fn interleaved_workers_version_count() {
        let (net, mut store, samples) = setup();
        let cfg = AcLossConfig::default();
        let mut snaps = [store.snapshot(), store.snapshot()];
        for i in 0..10 {
            let w = i % 2;
            let g = a3c_worker_gradient(&net, &snaps[w], &samples, &cfg, 40.0).unwrap();
            a3c_apply(&g, &mut store).unwrap();
            snaps[w] = store.snapshot();
        }
        assert_eq!(store.version(), 10);
    }
}
