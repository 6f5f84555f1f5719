use serde::{Deserialize, Serialize};

use super::params::{GradientSet, ParameterSet};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in double precision.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.params.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descends along `grads`.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &GradientSet) -> Result<()> {
        params.check_congruent(grads)?;
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (k, p) in params.params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads.grads[k]);
            for i in 0..p.data.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p.data[i] = (p.data[i] as f64 - c.lr * mh / (vh.sqrt() + c.eps)) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Param;

    fn single(v: f32) -> ParameterSet {
        ParameterSet {
            spec_hash: 0,
            params: vec![Param {
                name: "w".into(),
                shape: vec![1],
                data: vec![v],
            }],
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps).
        for g in [0.3, -2.0, 100.0] {
            let mut p = single(1.0);
            let mut opt = Adam::new(AdamConfig::default(), &p);
            opt.step(&mut p, &GradientSet { grads: vec![vec![g]] }).unwrap();
            let expected = 1.0 - 5e-4 * g / (g.abs() + 1e-8);
            assert!((p.params[0].data[0] as f64 - expected).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(0.25);
        let mut opt = Adam::new(AdamConfig::default(), &p);
        for _ in 0..3 {
            opt.step(&mut p, &GradientSet { grads: vec![vec![0.0]] }).unwrap();
        }
        assert_eq!(p.params[0].data[0], 0.25);
    }

    #[test]
    fn ten_steps_shrink_square() {
        let mut p = single(1.0);
        let mut opt = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, &p);
        // Reference recurrence written out directly.
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let g = 2.0 * p.params[0].data[0] as f64;
            opt.step(&mut p, &GradientSet { grads: vec![vec![g]] }).unwrap();
            let gr = 2.0 * w;
            m = 0.9 * m + 0.1 * gr;
            v = 0.999 * v + 0.001 * gr * gr;
            w -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        assert!((p.params[0].data[0] as f64 - w).abs() < 1e-5);
        assert!(p.params[0].data[0].abs() < 1.0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = single(3.0);
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.05,
                ..Default::default()
            },
            &p,
        );
        for _ in 0..2000 {
            let x = p.params[0].data[0] as f64;
            opt.step(&mut p, &GradientSet { grads: vec![vec![2.0 * (x - 1.0)]] }).unwrap();
        }
        assert!((p.params[0].data[0] - 1.0).abs() < 1e-2);
    }
}
