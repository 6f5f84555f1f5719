//! Losses for the discrete policy-value learners (PPO, A2C/A3C, IMPALA).
//!
//! The network head is `PolicyValue`: logits for every action followed by a
//! state value.

use super::buffer::Features;
use super::grad::accumulate;
use crate::error::{Error, Result};
use crate::nn::dist::{categorical_kl, entropy, log_softmax};
use crate::nn::{LossEvaluation, Network, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub features: Features,
    pub action: usize,
    pub advantage: f64,
    pub value_target: f64,
    pub old_log_prob: f64,
    pub old_logits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoLossConfig {
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoLossConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            kl_coef: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

/// Per-sample loss terms reported alongside the total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PgStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub kl: f64,
}

fn split_head(out: &[f64]) -> (&[f64], f64) {
    let (logits, v) = out.split_at(out.len() - 1);
    (logits, v[0])
}

/// Gradient of `-coef * H(softmax(z))` with respect to `z`.
fn neg_entropy_grad(logp: &[f64], h: f64, coef: f64, d: &mut [f64]) {
    for (j, lp) in logp.iter().enumerate() {
        d[j] += coef * lp.exp() * (lp + h);
    }
}

/// Clipped-surrogate loss:
/// `-min(r A, clip(r) A) + kl_coef KL(old || new) + value_coef (V - y)^2 - entropy_coef H`,
/// averaged over the batch.
pub fn ppo_loss(net: &Network, params: &ParameterSet, batch: &[PpoSample], cfg: &PpoLossConfig) -> Result<LossEvaluation> {
    Ok(ppo_loss_with_stats(net, params, batch, cfg)?.0)
}

pub fn ppo_loss_with_stats(
    net: &Network,
    params: &ParameterSet,
    batch: &[PpoSample],
    cfg: &PpoLossConfig,
) -> Result<(LossEvaluation, PgStats)> {
    if batch.is_empty() {
        return Err(Error::protocol("empty PPO batch"));
    }
    let inv = 1.0 / batch.len() as f64;
    let eval = accumulate(net, batch, |s, g| {
        let cache = net.forward_cached(params, &s.features, &[])?;
        let (logits, value) = split_head(cache.output());
        let logp = log_softmax(logits);
        let ratio = (logp[s.action] - s.old_log_prob).exp();
        if !ratio.is_finite() {
            return Err(Error::numeric(format!("non-finite PPO ratio (log-prob {})", logp[s.action])));
        }
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let unclipped_obj = ratio * s.advantage;
        let clipped_obj = clipped * s.advantage;
        let h = entropy(logits);
        let kl = categorical_kl(&s.old_logits, logits);
        let verr = value - s.value_target;
        let loss = -unclipped_obj.min(clipped_obj) + cfg.kl_coef * kl + cfg.value_coef * verr * verr - cfg.entropy_coef * h;

        let mut d = vec![0.0; logits.len() + 1];
        // The clipped branch is constant in the parameters.
        if unclipped_obj <= clipped_obj {
            let coef = -s.advantage * ratio;
            for (j, lp) in logp.iter().enumerate() {
                d[j] -= coef * lp.exp();
            }
            d[s.action] += coef;
        }
        let old_p: Vec<f64> = log_softmax(&s.old_logits).into_iter().map(f64::exp).collect();
        for (j, lp) in logp.iter().enumerate() {
            d[j] += cfg.kl_coef * (lp.exp() - old_p[j]);
        }
        neg_entropy_grad(&logp, h, cfg.entropy_coef, &mut d);
        d[logits.len()] = 2.0 * cfg.value_coef * verr;
        d.iter_mut().for_each(|x| *x *= inv);
        net.backward(params, &cache, &d, g);
        Ok(loss * inv)
    })?;
    let stats = pg_stats(net, params, batch.iter().map(|s| (&s.features, s.action, s.value_target, Some(&s.old_logits))))?;
    Ok((eval, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcSample {
    pub features: Features,
    pub action: usize,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcLossConfig {
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for AcLossConfig {
    fn default() -> Self {
        Self {
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

/// Advantage actor-critic loss `-A log pi(a|s) + value_coef (V - y)^2 - entropy_coef H`,
/// averaged over the batch. Shared by A2C, A3C and IMPALA (with V-trace targets).
pub fn actor_critic_loss(net: &Network, params: &ParameterSet, batch: &[AcSample], cfg: &AcLossConfig) -> Result<LossEvaluation> {
    if batch.is_empty() {
        return Err(Error::protocol("empty actor-critic batch"));
    }
    let inv = 1.0 / batch.len() as f64;
    accumulate(net, batch, |s, g| {
        let cache = net.forward_cached(params, &s.features, &[])?;
        let (logits, value) = split_head(cache.output());
        let logp = log_softmax(logits);
        let h = entropy(logits);
        let verr = value - s.value_target;
        let loss = -s.advantage * logp[s.action] + cfg.value_coef * verr * verr - cfg.entropy_coef * h;
        let mut d = vec![0.0; logits.len() + 1];
        for (j, lp) in logp.iter().enumerate() {
            d[j] = s.advantage * lp.exp();
        }
        d[s.action] -= s.advantage;
        neg_entropy_grad(&logp, h, cfg.entropy_coef, &mut d);
        d[logits.len()] = 2.0 * cfg.value_coef * verr;
        d.iter_mut().for_each(|x| *x *= inv);
        net.backward(params, &cache, &d, g);
        Ok(loss * inv)
    })
}

pub fn ac_stats(net: &Network, params: &ParameterSet, batch: &[AcSample]) -> Result<PgStats> {
    pg_stats(net, params, batch.iter().map(|s| (&s.features, s.action, s.value_target, None)))
}

fn pg_stats<'a>(
    net: &Network,
    params: &ParameterSet,
    items: impl Iterator<Item = (&'a Features, usize, f64, Option<&'a Vec<f64>>)>,
) -> Result<PgStats> {
    let mut st = PgStats::default();
    let mut n = 0.0;
    for (f, a, y, old) in items {
        let out = net.forward(params, f, &[])?;
        let (logits, v) = split_head(&out);
        st.policy += -log_softmax(logits)[a];
        st.value += (v - y) * (v - y);
        st.entropy += entropy(logits);
        if let Some(old) = old {
            st.kl += categorical_kl(old, logits);
        }
        n += 1.0;
    }
    st.policy /= n;
    st.value /= n;
    st.entropy /= n;
    st.kl /= n;
    Ok(st)
}

/// Normalizes to zero mean and unit variance; constant inputs map to zero.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = if std > 1e-8 { (*v - mean) / std } else { 0.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference_error, Activation, HeadSpec, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn small_net() -> Network {
        // 3 -> 4 -> (3 logits + value): 16 + 20 = 36 parameters.
        Network::new(NetworkSpec::flat(3, vec![4], HeadSpec::PolicyValue { actions: 3 }, Activation::Tanh)).unwrap()
    }

    fn perturbed(net: &Network, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = net.init(seed);
        for v in p.params.iter_mut().flat_map(|p| p.data.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        p
    }

    fn feats(rng: &mut ChaCha8Rng) -> Features {
        Arc::from((0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<_>>())
    }

    fn ppo_batch(net: &Network, params: &ParameterSet, seed: u64, n: usize) -> Vec<PpoSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f = feats(&mut rng);
                let out = net.forward(params, &f, &[]).unwrap();
                let mut old_logits = out[..3].to_vec();
                for l in &mut old_logits {
                    *l += rng.random_range(-0.3..0.3);
                }
                let a = rng.random_range(0..3);
                PpoSample {
                    old_log_prob: log_softmax(&old_logits)[a],
                    old_logits,
                    features: f,
                    action: a,
                    advantage: rng.random_range(-2.0..2.0),
                    value_target: rng.random_range(-2.0..2.0),
                }
            })
            .collect()
    }

    /// Independent per-sample evaluation with explicit probability loops.
    fn ppo_loss_oracle(net: &Network, params: &ParameterSet, batch: &[PpoSample], cfg: &PpoLossConfig) -> f64 {
        let mut total = 0.0;
        for s in batch {
            let out = net.forward(params, &s.features, &[]).unwrap();
            let k = out.len() - 1;
            let z: f64 = out[..k].iter().map(|l| l.exp()).sum();
            let p: Vec<f64> = out[..k].iter().map(|l| l.exp() / z).collect();
            let zo: f64 = s.old_logits.iter().map(|l| l.exp()).sum();
            let po: Vec<f64> = s.old_logits.iter().map(|l| l.exp() / zo).collect();
            let r = p[s.action] / s.old_log_prob.exp();
            let rc = r.max(1.0 - cfg.clip_eps).min(1.0 + cfg.clip_eps);
            let surr = (r * s.advantage).min(rc * s.advantage);
            let mut kl = 0.0;
            let mut h = 0.0;
            for j in 0..k {
                kl += po[j] * (po[j].ln() - p[j].ln());
                h -= p[j] * p[j].ln();
            }
            let v = out[k] - s.value_target;
            total += -surr + cfg.kl_coef * kl + cfg.value_coef * v * v - cfg.entropy_coef * h;
        }
        total / batch.len() as f64
    }

    #[test]
    fn ppo_loss_matches_loop_oracle() {
        let net = small_net();
        let cfg = PpoLossConfig::default();
        for seed in 0..10 {
            let params = perturbed(&net, seed);
            let batch = ppo_batch(&net, &params, seed + 100, 20);
            let got = ppo_loss(&net, &params, &batch, &cfg).unwrap().loss;
            assert!((got - ppo_loss_oracle(&net, &params, &batch, &cfg)).abs() < 1e-5);
        }
    }

    #[test]
    fn ppo_gradient_matches_finite_differences() {
        let net = small_net();
        assert!(net.param_count() <= 64);
        let cfg = PpoLossConfig::default();
        for seed in 0..5 {
            let params = perturbed(&net, seed);
            let batch = ppo_batch(&net, &params, seed, 8);
            let eval = ppo_loss(&net, &params, &batch, &cfg).unwrap();
            let err = finite_difference_error(&params, &eval.grads, 1e-4, |p| ppo_loss(&net, p, &batch, &cfg).unwrap().loss);
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn identical_policy_has_unit_ratio_and_zero_surrogate() {
        let net = small_net();
        let params = perturbed(&net, 3);
        let mut batch = ppo_batch(&net, &params, 4, 10);
        let mut adv: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
        normalize(&mut adv);
        for (s, a) in batch.iter_mut().zip(adv) {
            let out = net.forward(&params, &s.features, &[]).unwrap();
            s.old_logits = out[..3].to_vec();
            s.old_log_prob = log_softmax(&s.old_logits)[s.action];
            s.advantage = a;
        }
        let cfg = PpoLossConfig {
            kl_coef: 0.0,
            value_coef: 0.0,
            entropy_coef: 0.0,
            ..Default::default()
        };
        let loss = ppo_loss(&net, &params, &batch, &cfg).unwrap().loss;
        assert!(loss.abs() < 1e-12);
    }

    /// Policy-only gradient of one sample whose ratio is set through `old_log_prob`.
    fn policy_grad_norm(ratio: f64, advantage: f64) -> f64 {
        let net = small_net();
        let params = perturbed(&net, 8);
        let f: Features = Arc::from(vec![0.3f32, -0.2, 0.5]);
        let out = net.forward(&params, &f, &[]).unwrap();
        let lp = log_softmax(&out[..3])[1];
        let s = PpoSample {
            features: f,
            action: 1,
            advantage,
            value_target: 0.0,
            old_log_prob: lp - ratio.ln(),
            old_logits: out[..3].to_vec(),
        };
        let cfg = PpoLossConfig {
            clip_eps: 0.2,
            kl_coef: 0.0,
            value_coef: 0.0,
            entropy_coef: 0.0,
        };
        ppo_loss(&net, &params, &[s], &cfg).unwrap().grads.global_norm()
    }

    #[test]
    fn clipped_branch_contributes_zero_gradient() {
        // Clip binds: A > 0 with r > 1 + eps, A < 0 with r < 1 - eps.
        assert_eq!(policy_grad_norm(1.5, 1.0), 0.0);
        assert_eq!(policy_grad_norm(0.5, -1.0), 0.0);
        // The other two quadrants keep the unclipped (active) branch.
        assert!(policy_grad_norm(1.5, -1.0) > 0.0);
        assert!(policy_grad_norm(0.5, 1.0) > 0.0);
    }

    fn ac_batch(seed: u64, n: usize) -> Vec<AcSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| AcSample {
                features: feats(&mut rng),
                action: rng.random_range(0..3),
                advantage: rng.random_range(-2.0..2.0),
                value_target: rng.random_range(-2.0..2.0),
            })
            .collect()
    }

    #[test]
    fn actor_critic_gradient_matches_finite_differences() {
        let net = small_net();
        let cfg = AcLossConfig::default();
        for seed in 0..5 {
            let params = perturbed(&net, seed);
            let batch = ac_batch(seed, 8);
            let eval = actor_critic_loss(&net, &params, &batch, &cfg).unwrap();
            let err = finite_difference_error(&params, &eval.grads, 1e-4, |p| {
                actor_critic_loss(&net, p, &batch, &cfg).unwrap().loss
            });
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }

    #[test]
    fn normalize_gives_zero_mean_unit_variance() {
        let mut v = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut v);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let var: f64 = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        let mut c = vec![2.0; 3];
        normalize(&mut c);
        assert_eq!(c, vec![0.0; 3]);
    }
}
