//! Forward and reverse-mode passes for the supported layer kinds.
//!
//! Parameters are stored in single precision; every pass computes in double
//! precision. Layouts: images and conv outputs are channel-last, conv kernels
//! are `[filters, k, k, in_channels]`, dense weights are `[in, out]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{GradientSet, Param, ParameterSet};
use super::spec::{Activation, HeadSpec, InputSpec, NetworkSpec};
use crate::env::Observation;
use crate::error::{Error, Result};

const OUTPUT_INIT_SCALE: f64 = 0.1;
const LOG_STD_INIT: f32 = -0.5;

#[derive(Debug, Clone)]
struct ConvShape {
    in_w: usize,
    in_c: usize,
    out_h: usize,
    out_w: usize,
    filters: usize,
    kernel: usize,
    stride: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct DenseShape {
    input: usize,
    output: usize,
    w: usize,
    b: usize,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    conv_out: Vec<Vec<f64>>,
    /// Input of each dense layer; entry 0 is the trunk output joined with extra inputs.
    dense_in: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

/// A network layout derived from a [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    hash: u64,
    convs: Vec<ConvShape>,
    dense: Vec<DenseShape>,
    log_std: Option<usize>,
    names: Vec<(String, Vec<usize>)>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut names: Vec<(String, Vec<usize>)> = Vec::new();
        let (mut h, mut w, mut c) = spec.input.feature_shape();
        let mut convs = Vec::new();
        for (i, cs) in spec.convs.iter().enumerate() {
            let out_h = (h - cs.kernel) / cs.stride + 1;
            let out_w = (w - cs.kernel) / cs.stride + 1;
            names.push((format!("conv{i}.w"), vec![cs.filters, cs.kernel, cs.kernel, c]));
            names.push((format!("conv{i}.b"), vec![cs.filters]));
            convs.push(ConvShape {
                in_w: w,
                in_c: c,
                out_h,
                out_w,
                filters: cs.filters,
                kernel: cs.kernel,
                stride: cs.stride,
                w: names.len() - 2,
                b: names.len() - 1,
            });
            h = out_h;
            w = out_w;
            c = cs.filters;
        }
        let mut width = h * w * c;
        let mut dense = Vec::new();
        let outputs: Vec<(String, usize)> = spec
            .hidden
            .iter()
            .enumerate()
            .map(|(i, &n)| (format!("fc{i}"), n))
            .chain(std::iter::once(("out".to_string(), spec.head.dense_len())))
            .collect();
        for (k, (name, n)) in outputs.into_iter().enumerate() {
            if k == spec.extra_layer {
                width += spec.extra_inputs;
            }
            names.push((format!("{name}.w"), vec![width, n]));
            names.push((format!("{name}.b"), vec![n]));
            dense.push(DenseShape {
                input: width,
                output: n,
                w: names.len() - 2,
                b: names.len() - 1,
            });
            width = n;
        }
        let log_std = match spec.head {
            HeadSpec::Gaussian { dims } => {
                names.push(("log_std".into(), vec![dims]));
                Some(names.len() - 1)
            }
            _ => None,
        };
        Ok(Self {
            hash: spec.hash(),
            spec,
            convs,
            dense,
            log_std,
            names,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn spec_hash(&self) -> u64 {
        self.hash
    }

    pub fn output_len(&self) -> usize {
        self.spec.head.output_len()
    }

    pub fn feature_len(&self) -> usize {
        self.spec.input.feature_len()
    }

    pub fn param_count(&self) -> usize {
        self.names.iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    pub fn zero_params(&self) -> ParameterSet {
        ParameterSet {
            spec_hash: self.hash,
            params: self
                .names
                .iter()
                .map(|(name, shape)| Param {
                    name: name.clone(),
                    shape: shape.clone(),
                    data: vec![0.0; shape.iter().product()],
                })
                .collect(),
        }
    }

    /// Fan-in scaled uniform weights, zero biases. Deterministic per seed.
    pub fn init(&self, seed: u64) -> ParameterSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = self.zero_params();
        let last = self.dense.len() - 1;
        for (k, d) in self.dense.iter().enumerate() {
            let mut bound = 1.0 / (d.input as f64).sqrt();
            if k == last {
                bound *= OUTPUT_INIT_SCALE;
            }
            for v in &mut ps.params[d.w].data {
                *v = rng.random_range(-bound..bound) as f32;
            }
        }
        for c in &self.convs {
            let bound = 1.0 / ((c.kernel * c.kernel * c.in_c) as f64).sqrt();
            for v in &mut ps.params[c.w].data {
                *v = rng.random_range(-bound..bound) as f32;
            }
        }
        if let Some(i) = self.log_std {
            ps.params[i].data.fill(LOG_STD_INIT);
        }
        ps
    }

    fn check_params(&self, params: &ParameterSet) -> Result<()> {
        if params.spec_hash != self.hash || params.params.len() != self.names.len() {
            return Err(Error::protocol("parameter set was built for a different network spec"));
        }
        Ok(())
    }

    /// Raw input to network features: average pooling for image inputs.
    pub fn encode_raw(&self, raw: &[f32]) -> Result<Vec<f32>> {
        if raw.len() != self.spec.input.raw_len() {
            return Err(Error::protocol(format!(
                "input length {} does not match spec length {}",
                raw.len(),
                self.spec.input.raw_len()
            )));
        }
        match self.spec.input {
            InputSpec::Flat { .. } => Ok(raw.to_vec()),
            InputSpec::Image { pool: 1, .. } => Ok(raw.to_vec()),
            InputSpec::Image {
                height: _,
                width,
                channels,
                pool,
            } => {
                let (ph, pw, c) = self.spec.input.feature_shape();
                let mut out = vec![0.0f32; ph * pw * c];
                let norm = 1.0 / (pool * pool) as f32;
                for y in 0..ph * pool {
                    for x in 0..pw * pool {
                        let src = (y * width + x) * channels;
                        let dst = ((y / pool) * pw + x / pool) * c;
                        for ch in 0..c {
                            out[dst + ch] += raw[src + ch] * norm;
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn encode(&self, obs: &Observation) -> Result<Vec<f32>> {
        self.encode_raw(obs.as_slice())
    }

    /// All head outputs for one observation.
    pub fn forward_obs(&self, params: &ParameterSet, obs: &Observation) -> Result<Vec<f64>> {
        let features = self.encode(obs)?;
        self.forward(params, &features, &[])
    }

    pub fn forward(&self, params: &ParameterSet, features: &[f32], extra: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(params, features, extra)?.out)
    }

    pub fn forward_cached(&self, params: &ParameterSet, features: &[f32], extra: &[f64]) -> Result<ForwardCache> {
        self.check_params(params)?;
        if features.len() != self.feature_len() || extra.len() != self.spec.extra_inputs {
            return Err(Error::protocol(format!(
                "feature/extra lengths {}/{} do not match spec {}/{}",
                features.len(),
                extra.len(),
                self.feature_len(),
                self.spec.extra_inputs
            )));
        }
        let act = self.spec.activation;
        let input: Vec<f64> = features.iter().map(|&v| v as f64).collect();
        let mut conv_out = Vec::with_capacity(self.convs.len());
        for c in &self.convs {
            let x = conv_out.last().unwrap_or(&input);
            let mut y = conv_forward(c, &params.params[c.w].data, &params.params[c.b].data, x);
            activate(act, &mut y);
            conv_out.push(y);
        }
        let mut first = conv_out.last().unwrap_or(&input).clone();
        if self.spec.extra_layer == 0 {
            first.extend_from_slice(extra);
        }
        let mut dense_in = vec![first];
        let mut raw = Vec::new();
        for (k, d) in self.dense.iter().enumerate() {
            let mut y = dense_forward(d, &params.params[d.w].data, &params.params[d.b].data, &dense_in[k]);
            if k + 1 < self.dense.len() {
                activate(act, &mut y);
                if k + 1 == self.spec.extra_layer {
                    y.extend_from_slice(extra);
                }
                dense_in.push(y);
            } else {
                raw = y;
            }
        }
        let out = match self.spec.head {
            HeadSpec::Gaussian { .. } => {
                let mut o: Vec<f64> = raw.iter().map(|v| v.tanh()).collect();
                o.extend(params.params[self.log_std.unwrap()].data.iter().map(|&v| v as f64));
                o
            }
            HeadSpec::Deterministic { .. } => raw.iter().map(|v| v.tanh()).collect(),
            _ => raw,
        };
        Ok(ForwardCache {
            input,
            conv_out,
            dense_in,
            out,
        })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d outputs`.
    /// Returns `d loss / d extra_inputs`.
    pub fn backward(&self, params: &ParameterSet, cache: &ForwardCache, d_out: &[f64], grads: &mut GradientSet) -> Vec<f64> {
        debug_assert_eq!(d_out.len(), self.output_len());
        let act = self.spec.activation;
        let dense_width = self.spec.head.dense_len();
        let mut d: Vec<f64> = match self.spec.head {
            HeadSpec::Gaussian { .. } | HeadSpec::Deterministic { .. } => (0..dense_width)
                .map(|i| d_out[i] * (1.0 - cache.out[i] * cache.out[i]))
                .collect(),
            _ => d_out.to_vec(),
        };
        if let (Some(li), HeadSpec::Gaussian { dims }) = (self.log_std, self.spec.head) {
            for i in 0..dims {
                grads.grads[li][i] += d_out[dims + i];
            }
        }
        let mut d_extra = Vec::new();
        for k in (0..self.dense.len()).rev() {
            let l = &self.dense[k];
            let x = &cache.dense_in[k];
            let w = &params.params[l.w].data;
            let (gw, gb) = two_mut(&mut grads.grads, l.w, l.b);
            for (o, &g) in d.iter().enumerate() {
                gb[o] += g;
            }
            let mut dx = vec![0.0; l.input];
            for i in 0..l.input {
                let row = &w[i * l.output..(i + 1) * l.output];
                let xi = x[i];
                let grow = &mut gw[i * l.output..(i + 1) * l.output];
                let mut acc = 0.0;
                for o in 0..l.output {
                    grow[o] += xi * d[o];
                    acc += row[o] as f64 * d[o];
                }
                dx[i] = acc;
            }
            if k == self.spec.extra_layer {
                d_extra = dx.split_off(l.input - self.spec.extra_inputs);
            }
            if k > 0 {
                activation_grad(act, &x[..dx.len()], &mut dx);
            }
            d = dx;
        }
        let mut d_trunk = d;
        for k in (0..self.convs.len()).rev() {
            let c = &self.convs[k];
            activation_grad(act, &cache.conv_out[k], &mut d_trunk);
            let x = if k == 0 { &cache.input } else { &cache.conv_out[k - 1] };
            d_trunk = conv_backward(c, &params.params[c.w].data, x, &d_trunk, grads, k > 0);
        }
        d_extra
    }

    pub fn zero_grads(&self) -> GradientSet {
        GradientSet {
            grads: self
                .names
                .iter()
                .map(|(_, s)| vec![0.0; s.iter().product()])
                .collect(),
        }
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

fn activate(act: Activation, v: &mut [f64]) {
    match act {
        Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
    }
}

/// Multiplies `d` by the activation derivative, given post-activation values.
fn activation_grad(act: Activation, post: &[f64], d: &mut [f64]) {
    match act {
        Activation::Relu => d.iter_mut().zip(post).for_each(|(g, &y)| {
            if y <= 0.0 {
                *g = 0.0
            }
        }),
        Activation::Tanh => d.iter_mut().zip(post).for_each(|(g, &y)| *g *= 1.0 - y * y),
    }
}

fn dense_forward(l: &DenseShape, w: &[f32], b: &[f32], x: &[f64]) -> Vec<f64> {
    let mut y: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * l.output..(i + 1) * l.output];
        for (yo, &wo) in y.iter_mut().zip(row) {
            *yo += xi * wo as f64;
        }
    }
    y
}

fn conv_forward(c: &ConvShape, w: &[f32], b: &[f32], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; c.out_h * c.out_w * c.filters];
    let row_len = c.kernel * c.in_c;
    for oy in 0..c.out_h {
        for ox in 0..c.out_w {
            let base = (oy * c.out_w + ox) * c.filters;
            for f in 0..c.filters {
                let mut acc = b[f] as f64;
                for ki in 0..c.kernel {
                    let src = ((oy * c.stride + ki) * c.in_w + ox * c.stride) * c.in_c;
                    let wk = ((f * c.kernel + ki) * c.kernel) * c.in_c;
                    let xs = &x[src..src + row_len];
                    let ws = &w[wk..wk + row_len];
                    for (a, &b) in xs.iter().zip(ws) {
                        acc += a * b as f64;
                    }
                }
                y[base + f] = acc;
            }
        }
    }
    y
}

fn conv_backward(c: &ConvShape, w: &[f32], x: &[f64], dy: &[f64], grads: &mut GradientSet, need_dx: bool) -> Vec<f64> {
    let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
    let row_len = c.kernel * c.in_c;
    let (gw, gb) = two_mut(&mut grads.grads, c.w, c.b);
    for oy in 0..c.out_h {
        for ox in 0..c.out_w {
            let base = (oy * c.out_w + ox) * c.filters;
            for f in 0..c.filters {
                let g = dy[base + f];
                if g == 0.0 {
                    continue;
                }
                gb[f] += g;
                for ki in 0..c.kernel {
                    let src = ((oy * c.stride + ki) * c.in_w + ox * c.stride) * c.in_c;
                    let wk = ((f * c.kernel + ki) * c.kernel) * c.in_c;
                    for j in 0..row_len {
                        gw[wk + j] += g * x[src + j];
                    }
                    if need_dx {
                        for j in 0..row_len {
                            dx[src + j] += g * w[wk + j] as f64;
                        }
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::ConvSpec;

    /// Independent forward pass written against explicit multi-index lookups.
    fn oracle_forward(net: &Network, ps: &ParameterSet, features: &[f32], extra: &[f64]) -> Vec<f64> {
        let spec = net.spec();
        let get = |name: &str| ps.get(name).unwrap();
        let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
        let (mut h, mut w, mut c) = spec.input.feature_shape();
        let mut cur: Vec<f64> = features.iter().map(|&v| v as f64).collect();
        for (li, cs) in spec.convs.iter().enumerate() {
            let kw = get(&format!("conv{li}.w"));
            let kb = get(&format!("conv{li}.b"));
            let oh = (h - cs.kernel) / cs.stride + 1;
            let ow = (w - cs.kernel) / cs.stride + 1;
            let mut next = vec![0.0; oh * ow * cs.filters];
            for oy in 0..oh {
                for ox in 0..ow {
                    for f in 0..cs.filters {
                        let mut s = kb.data[f] as f64;
                        for ki in 0..cs.kernel {
                            for kj in 0..cs.kernel {
                                for ch in 0..c {
                                    let xv = cur[((oy * cs.stride + ki) * w + (ox * cs.stride + kj)) * c + ch];
                                    let wv = kw.data[((f * cs.kernel + ki) * cs.kernel + kj) * c + ch] as f64;
                                    s += xv * wv;
                                }
                            }
                        }
                        next[(oy * ow + ox) * cs.filters + f] = relu(s);
                    }
                }
            }
            cur = next;
            h = oh;
            w = ow;
            c = cs.filters;
        }
        let layers: Vec<String> = (0..spec.hidden.len()).map(|i| format!("fc{i}")).chain(["out".to_string()]).collect();
        for (k, name) in layers.iter().enumerate() {
            if k == spec.extra_layer {
                cur.extend_from_slice(extra);
            }
            let wp = get(&format!("{name}.w"));
            let bp = get(&format!("{name}.b"));
            let (n_in, n_out) = (wp.shape[0], wp.shape[1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = bp.data[o] as f64;
                for i in 0..n_in {
                    s += cur[i] * wp.data[i * n_out + o] as f64;
                }
                next[o] = if k + 1 < layers.len() { relu(s) } else { s };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn dense_layer_arity() {
        let net = Network::new(NetworkSpec::flat(4, vec![], HeadSpec::QValues { actions: 3 }, Activation::Relu)).unwrap();
        let ps = net.init(0);
        assert_eq!(ps.get("out.w").unwrap().data.len(), 12);
        assert_eq!(ps.get("out.b").unwrap().data.len(), 3);
        assert_eq!(ps.len(), 15);
        assert_eq!(net.param_count(), 15);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let net = Network::new(NetworkSpec::tiny(HeadSpec::PolicyValue { actions: 9 }, 7, vec![16])).unwrap();
        assert_eq!(net.init(3), net.init(3));
        assert_ne!(net.init(3), net.init(4));
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let net = Network::new(NetworkSpec::tiny(HeadSpec::Categorical { actions: 9 }, 7, vec![8])).unwrap();
        let ps = net.zero_params();
        let out = net.forward_obs(&ps, &Observation::zeros()).unwrap();
        assert_eq!(out, vec![0.0; 9]);
        let probs = crate::nn::dist::softmax(&out);
        assert!(probs.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn conv_forward_matches_loop_oracle() {
        let spec = NetworkSpec {
            input: InputSpec::Image {
                height: 12,
                width: 12,
                channels: 3,
                pool: 1,
            },
            convs: vec![
                ConvSpec {
                    filters: 4,
                    kernel: 4,
                    stride: 2,
                },
                ConvSpec {
                    filters: 3,
                    kernel: 3,
                    stride: 1,
                },
            ],
            hidden: vec![7],
            extra_inputs: 0,
            extra_layer: 0,
            head: HeadSpec::PolicyValue { actions: 9 },
            activation: Activation::Relu,
        };
        let net = Network::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let ps = net.init(seed);
            let x: Vec<f32> = (0..12 * 12 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
            let fast = net.forward(&ps, &x, &[]).unwrap();
            let slow = oracle_forward(&net, &ps, &x, &[]);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn late_extra_inputs_match_oracle() {
        for layer in 0..3 {
            let mut spec = NetworkSpec::flat(6, vec![5, 4], HeadSpec::StateActionValue, Activation::Relu);
            spec.extra_layer = layer;
            let net = Network::new(spec).unwrap();
            let ps = net.init(layer as u64);
            let x: Vec<f32> = (0..6).map(|i| i as f32 * 0.3 - 0.7).collect();
            let a = [0.4, -0.9];
            let fast = net.forward(&ps, &x, &a).unwrap();
            assert!((fast[0] - oracle_forward(&net, &ps, &x, &a)[0]).abs() < 1e-9);
        }
        let mut spec = NetworkSpec::flat(6, vec![5], HeadSpec::StateActionValue, Activation::Relu);
        spec.extra_layer = 2;
        assert!(Network::new(spec).unwrap_err().is_config());
    }

    #[test]
    fn full_size_network_forward_matches_oracle() {
        let net = Network::new(NetworkSpec::conv(HeadSpec::QValues { actions: 9 })).unwrap();
        let ps = net.init(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<f32> = (0..crate::env::OBS_LEN).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        let obs = Observation::from_vec(raw).unwrap();
        let fast = net.forward_obs(&ps, &obs).unwrap();
        let slow = oracle_forward(&net, &ps, &net.encode(&obs).unwrap(), &[]);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn pooling_averages_blocks() {
        let net = Network::new(NetworkSpec::tiny(HeadSpec::Value, 7, vec![4])).unwrap();
        let mut raw = vec![0.0f32; crate::env::OBS_LEN];
        // Fill the top-left 7x7 block of channel 1.
        for y in 0..7 {
            for x in 0..7 {
                raw[(y * 84 + x) * 3 + 1] = 1.0;
            }
        }
        raw[(7 * 84) * 3] = 0.49;
        let f = net.encode_raw(&raw).unwrap();
        assert_eq!(f.len(), 12 * 12 * 3);
        assert!((f[1] - 1.0).abs() < 1e-6);
        assert!((f[12 * 3] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_protocol_error() {
        let net = Network::new(NetworkSpec::flat(4, vec![3], HeadSpec::Value, Activation::Relu)).unwrap();
        let ps = net.init(0);
        assert!(matches!(net.forward(&ps, &[0.0; 5], &[]), Err(Error::Protocol(_))));
        let other = Network::new(NetworkSpec::flat(4, vec![2], HeadSpec::Value, Activation::Relu)).unwrap();
        assert!(matches!(net.forward(&other.init(0), &[0.0; 4], &[]), Err(Error::Protocol(_))));
    }

    #[test]
    fn squashed_heads_stay_in_range() {
        let net = Network::new(NetworkSpec::flat(3, vec![5], HeadSpec::Gaussian { dims: 2 }, Activation::Tanh)).unwrap();
        let mut ps = net.init(0);
        for p in &mut ps.params {
            p.data.iter_mut().for_each(|v| *v *= 50.0);
        }
        let out = net.forward(&ps, &[1.0, -2.0, 3.0], &[]).unwrap();
        assert!(out[..2].iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    fn fd_case(spec: NetworkSpec, seed: u64) {
        let net = Network::new(spec).unwrap();
        assert!(net.param_count() <= 64, "{}", net.param_count());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = net.init(seed);
        let ps = {
            // Larger weights than the default init so every layer matters.
            let mut p = ps;
            for v in p.params.iter_mut().flat_map(|p| p.data.iter_mut()) {
                *v = rng.random_range(-0.8..0.8);
            }
            p
        };
        let x: Vec<f32> = (0..net.feature_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let extra: Vec<f64> = (0..net.spec().extra_inputs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coef: Vec<f64> = (0..net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |p: &ParameterSet| -> f64 {
            let out = net.forward(p, &x, &extra).unwrap();
            out.iter().zip(&coef).map(|(o, c)| c * o + 0.5 * o * o).sum()
        };
        let cache = net.forward_cached(&ps, &x, &extra).unwrap();
        let d_out: Vec<f64> = cache.output().iter().zip(&coef).map(|(o, c)| c + o).collect();
        let mut g = net.zero_grads();
        let d_extra = net.backward(&ps, &cache, &d_out, &mut g);
        let err = crate::nn::finite_difference_error(&ps, &g, 1e-4, loss);
        assert!(err < 1e-3, "relative error {err}");
        for (k, de) in d_extra.iter().enumerate() {
            let eval = |v: f64| {
                let mut e = extra.clone();
                e[k] = v;
                let out = net.forward(&ps, &x, &e).unwrap();
                out.iter().zip(&coef).map(|(o, c)| c * o + 0.5 * o * o).sum::<f64>()
            };
            let num = (eval(extra[k] + 1e-5) - eval(extra[k] - 1e-5)) / 2e-5;
            assert!((num - de).abs() < 1e-6 * (1.0 + num.abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..4 {
            fd_case(NetworkSpec::flat(3, vec![4], HeadSpec::Gaussian { dims: 2 }, Activation::Tanh), seed);
            fd_case(NetworkSpec::flat(3, vec![4], HeadSpec::StateActionValue, Activation::Tanh), seed);
            let mut late = NetworkSpec::flat(3, vec![4, 3], HeadSpec::StateActionValue, Activation::Tanh);
            late.extra_layer = 1;
            fd_case(late.clone(), seed);
            late.extra_layer = 2;
            fd_case(late, seed);
            fd_case(NetworkSpec::flat(4, vec![5], HeadSpec::Deterministic { dims: 2 }, Activation::Tanh), seed);
            fd_case(NetworkSpec::flat(3, vec![3, 3], HeadSpec::PolicyValue { actions: 3 }, Activation::Relu), seed);
            fd_case(
                NetworkSpec {
                    input: InputSpec::Image {
                        height: 4,
                        width: 4,
                        channels: 1,
                        pool: 1,
                    },
                    convs: vec![ConvSpec {
                        filters: 2,
                        kernel: 2,
                        stride: 2,
                    }],
                    hidden: vec![3],
                    extra_inputs: 0,
                    extra_layer: 0,
                    head: HeadSpec::PolicyValue { actions: 2 },
                    activation: Activation::Tanh,
                },
                seed,
            );
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = Network::new(NetworkSpec::flat(3, vec![4], HeadSpec::Value, Activation::Relu)).unwrap();
        let ps = net.init(0);
        let cache = net.forward_cached(&ps, &[0.1, 0.2, 0.3], &[]).unwrap();
        let mut g = net.zero_grads();
        net.backward(&ps, &cache, &[0.0], &mut g);
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn forward_and_backward_are_bit_deterministic() {
        let net = Network::new(NetworkSpec::tiny(HeadSpec::PolicyValue { actions: 9 }, 7, vec![16])).unwrap();
        let ps = net.init(2);
        let x: Vec<f32> = (0..net.feature_len()).map(|i| (i % 7) as f32 / 7.0).collect();
        let run = || {
            let c = net.forward_cached(&ps, &x, &[]).unwrap();
            let mut g = net.zero_grads();
            net.backward(&ps, &c, &[1.0; 10], &mut g);
            (c.output().to_vec(), g)
        };
        assert_eq!(run(), run());
    }
}
