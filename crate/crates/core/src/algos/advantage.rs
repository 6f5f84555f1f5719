//! Advantage and value-target estimators.
//!
//! `values[t]` is V(s_t) for each step and `bootstrap` is V(s_T) for the
//! state following the last step. A `done` step never bootstraps.

/// Generalized advantage estimation. Returns `(advantages, value_targets)`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTrace {
    pub vs: Vec<f64>,
    pub pg_advantages: Vec<f64>,
}

/// V-trace targets computed by backward recursion.
#[allow(clippy::too_many_arguments)]
pub fn vtrace(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    behavior_log_probs: &[f64],
    target_log_probs: &[f64],
    gamma: f64,
    rho_bar: f64,
    c_bar: f64,
) -> VTrace {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n && behavior_log_probs.len() == n && target_log_probs.len() == n);
    let mut vs = vec![0.0; n];
    let mut pg = vec![0.0; n];
    // Running (v_{s+1} - V(s_{s+1})) and the value after the current step.
    let mut next_corr = 0.0;
    let mut next_vs = bootstrap;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let ratio = (target_log_probs[t] - behavior_log_probs[t]).exp();
        let rho = ratio.min(rho_bar);
        let c = ratio.min(c_bar);
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rho * (rewards[t] + gamma * cont * next_value - values[t]);
        let corr = delta + gamma * cont * c * next_corr;
        vs[t] = values[t] + corr;
        pg[t] = rho * (rewards[t] + gamma * cont * next_vs - values[t]);
        next_corr = corr;
        next_vs = vs[t];
        next_value = values[t];
    }
    VTrace { vs, pg_advantages: pg }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_case(rng: &mut impl Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, f64, Vec<f64>, Vec<f64>) {
        let r = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut d: Vec<bool> = vec![false; n];
        d[n - 1] = rng.random_bool(0.5);
        let b = rng.random_range(-2.0..2.0);
        let blp = (0..n).map(|_| -rng.random_range(0.01..3.0)).collect();
        let tlp = (0..n).map(|_| -rng.random_range(0.01..3.0)).collect();
        (r, v, d, b, blp, tlp)
    }

    /// Direct double-loop GAE: A_t = sum_k (gamma lambda)^k delta_{t+k}.
    fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], b: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let vn = |t: usize| if t + 1 < n { v[t + 1] } else { b };
        let delta: Vec<f64> = (0..n).map(|t| r[t] + g * vn(t) * if d[t] { 0.0 } else { 1.0 } - v[t]).collect();
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                for k in t..n {
                    s += (g * l).powi((k - t) as i32) * delta[k];
                    if d[k] {
                        break;
                    }
                }
                s
            })
            .collect()
    }

    /// Direct expansion of v_s = V(s) + sum_t gamma^{t-s} (prod c_i) delta_t.
    fn vtrace_oracle(r: &[f64], v: &[f64], d: &[bool], b: f64, blp: &[f64], tlp: &[f64], g: f64, rb: f64, cb: f64) -> (Vec<f64>, Vec<f64>) {
        let n = r.len();
        let vn = |t: usize| if t + 1 < n { v[t + 1] } else { b };
        let ratio: Vec<f64> = (0..n).map(|t| (tlp[t] - blp[t]).exp()).collect();
        let rho: Vec<f64> = ratio.iter().map(|x| x.min(rb)).collect();
        let c: Vec<f64> = ratio.iter().map(|x| x.min(cb)).collect();
        let cont = |t: usize| if d[t] { 0.0 } else { 1.0 };
        let delta: Vec<f64> = (0..n).map(|t| rho[t] * (r[t] + g * cont(t) * vn(t) - v[t])).collect();
        let vs: Vec<f64> = (0..n)
            .map(|s| {
                let mut total = v[s];
                for t in s..n {
                    let mut prod = 1.0;
                    let mut alive = 1.0;
                    for i in s..t {
                        prod *= c[i];
                        alive *= cont(i);
                    }
                    total += g.powi((t - s) as i32) * prod * alive * delta[t];
                }
                total
            })
            .collect();
        let pg = (0..n)
            .map(|s| {
                let next = if s + 1 < n { vs[s + 1] } else { b };
                rho[s] * (r[s] + g * cont(s) * next - v[s])
            })
            .collect();
        (vs, pg)
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let (a, _) = gae(&[1.0, 2.0], &[0.5, 0.25], &[false, false], 3.0, 0.9, 0.0);
        assert!((a[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-15);
        assert!((a[1] - (2.0 + 0.9 * 3.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn lambda_one_zero_values_is_return_to_go() {
        let r = [1.0, 2.0, 3.0];
        let (a, t) = gae(&r, &[0.0; 3], &[false, false, true], 0.0, 0.5, 1.0);
        assert!((a[0] - (1.0 + 0.5 * 2.0 + 0.25 * 3.0)).abs() < 1e-15);
        assert_eq!(a, t);
    }

    #[test]
    fn gae_matches_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (r, v, d, b, _, _) = random_case(&mut rng, 5);
            let (a, _) = gae(&r, &v, &d, b, 0.97, 0.9);
            for (x, y) in a.iter().zip(gae_oracle(&r, &v, &d, b, 0.97, 0.9)) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn vtrace_matches_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (r, v, d, b, blp, tlp) = random_case(&mut rng, 5);
            let got = vtrace(&r, &v, &d, b, &blp, &tlp, 0.99, 1.0, 1.0);
            let (vs, pg) = vtrace_oracle(&r, &v, &d, b, &blp, &tlp, 0.99, 1.0, 1.0);
            for i in 0..5 {
                assert!((got.vs[i] - vs[i]).abs() < 1e-6);
                assert!((got.pg_advantages[i] - pg[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn vtrace_single_step() {
        let got = vtrace(&[1.0], &[0.5], &[false], 2.0, &[-1.0], &[-1.2], 0.9, 1.0, 1.0);
        let rho = (-0.2f64).exp();
        assert!((got.vs[0] - (0.5 + rho * (1.0 + 0.9 * 2.0 - 0.5))).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn on_policy_vtrace_equals_lambda_one_gae(
            r in prop::collection::vec(-5.0f64..5.0, 1..12),
            seed in 0u64..1000,
            done in any::<bool>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = r.len();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lp: Vec<f64> = (0..n).map(|_| -rng.random_range(0.0..2.0)).collect();
            let mut d = vec![false; n];
            d[n - 1] = done;
            let b = rng.random_range(-3.0..3.0);
            let vt = vtrace(&r, &v, &d, b, &lp, &lp, 0.95, 1.0, 1.0);
            let (_, targets) = gae(&r, &v, &d, b, 0.95, 1.0);
            for i in 0..n {
                prop_assert!((vt.vs[i] - targets[i]).abs() < 1e-6);
                // With ratios of one the policy-gradient advantage is the one-step target minus V.
                let next = if i + 1 < n { targets[i + 1] } else { b };
                let cont = if d[i] { 0.0 } else { 1.0 };
                prop_assert!((vt.pg_advantages[i] - (r[i] + 0.95 * cont * next - v[i])).abs() < 1e-6);
            }
        }
    }
}
