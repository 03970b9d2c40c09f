//! Small dense regressor: ReLU hidden layers, linear output, Adam.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ApproxError;
use crate::env::FruitGridState;
use crate::targets::{encode, TargetKind, TargetSample, ENCODING_BITS};

pub const HIDDEN: [usize; 2] = [100, 50];
pub const DEFAULT_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    /// Shuffling stream; initialisation takes its own seed.
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self { epochs, batch_size: DEFAULT_BATCH, adam: AdamParams::default(), seed }
    }
}

/// Parameters are stored flat, layer by layer: the weight matrix
/// (`out x in`, row-major) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    active: Vec<usize>,
}

impl Mlp {
    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "need at least input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        let n = params.len();
        Self { sizes: sizes.to_vec(), params, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// `50 -> 100 -> 50 -> k` for a target kind.
    pub fn for_target(kind: TargetKind, seed: u64) -> Self {
        Self::new(&[ENCODING_BITS, HIDDEN[0], HIDDEN[1], kind.output_dim()], seed)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn adam_steps(&self) -> u64 {
        self.t
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let wo = off;
                off += w[0] * w[1];
                let bo = off;
                off += w[1];
                (wo, bo)
            })
            .collect()
    }

    /// Sets the last layer's weights and biases to zero.
    pub fn zero_output_layer(&mut self) {
        let start = *self.layer_offsets().last().map(|(w, _)| w).expect("at least one layer");
        self.params[start..].iter_mut().for_each(|p| *p = 0.0);
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            active: Vec::with_capacity(self.sizes[0]),
        }
    }

    fn forward_ws(&self, x: &[f64], ws: &mut Workspace) {
        assert_eq!(x.len(), self.sizes[0], "input width");
        ws.acts[0].copy_from_slice(x);
        ws.active.clear();
        ws.active.extend((0..x.len()).filter(|&i| x[i] != 0.0));
        let offsets = self.layer_offsets();
        let last = offsets.len() - 1;
        for (l, &(wo, bo)) in offsets.iter().enumerate() {
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            let w = &self.params[wo..wo + nin * nout];
            out.copy_from_slice(&self.params[bo..bo + nout]);
            if l == 0 {
                for (o, z) in out.iter_mut().enumerate() {
                    let row = &w[o * nin..(o + 1) * nin];
                    *z += ws.active.iter().map(|&i| row[i] * input[i]).sum::<f64>();
                }
            } else {
                for (o, z) in out.iter_mut().enumerate() {
                    let row = &w[o * nin..(o + 1) * nin];
                    *z += row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            if l != last {
                out.iter_mut().for_each(|z| *z = z.max(0.0));
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = self.workspace();
        self.forward_ws(x, &mut ws);
        ws.acts.pop().expect("output layer")
    }

    /// Backpropagates `d loss / d output` (already in `ws.deltas[last]`)
    /// and accumulates into `grad`.
    fn backward_ws(&self, ws: &mut Workspace, grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        for l in (0..offsets.len()).rev() {
            let (wo, bo) = offsets[l];
            let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
            let (dhead, dtail) = ws.deltas.split_at_mut(l + 1);
            let delta = &dtail[0];
            let input = &ws.acts[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[bo + o] += d;
                let g = &mut grad[wo + o * nin..wo + (o + 1) * nin];
                if l == 0 {
                    for &i in &ws.active {
                        g[i] += d * input[i];
                    }
                } else {
                    for (gi, &xi) in g.iter_mut().zip(input.iter()) {
                        *gi += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let prev = &mut dhead[l];
            prev.iter_mut().for_each(|p| *p = 0.0);
            let w = &self.params[wo..wo + nin * nout];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &wv) in prev.iter_mut().zip(&w[o * nin..(o + 1) * nin]) {
                    *p += d * wv;
                }
            }
            // ReLU derivative, taken as 0 at the kink
            for (p, &a) in prev.iter_mut().zip(input.iter()) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
    }

    /// Mean squared error over every output of every sample, and its gradient.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut ws = self.workspace();
        let loss = self.accumulate_batch(inputs, targets, &mut ws, &mut grad);
        (loss, grad)
    }

    fn accumulate_batch(&self, inputs: &[&[f64]], targets: &[&[f64]], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        assert_eq!(inputs.len(), targets.len());
        let k = *self.sizes.last().expect("output size");
        let scale = 1.0 / (inputs.len() * k) as f64;
        let mut loss = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            assert_eq!(y.len(), k, "target width");
            self.forward_ws(x, ws);
            let last = self.sizes.len() - 1;
            for o in 0..k {
                let err = ws.acts[last][o] - y[o];
                loss += err * err;
                ws.deltas[last][o] = 2.0 * err * scale;
            }
            self.backward_ws(ws, grad);
        }
        loss * scale
    }

    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> f64 {
        let k = *self.sizes.last().expect("output size");
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, y)| self.forward(x).iter().zip(y.iter()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>())
            .sum();
        total / (inputs.len() * k) as f64
    }

    /// One Adam update with the given gradient.
    pub fn adam_step(&mut self, grad: &[f64], adam: &AdamParams) {
        assert_eq!(grad.len(), self.params.len());
        self.t += 1;
        let c1 = 1.0 - adam.beta1.powi(self.t as i32);
        let c2 = 1.0 - adam.beta2.powi(self.t as i32);
        for i in 0..self.params.len() {
            let g = grad[i];
            self.m[i] = adam.beta1 * self.m[i] + (1.0 - adam.beta1) * g;
            self.v[i] = adam.beta2 * self.v[i] + (1.0 - adam.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            self.params[i] -= adam.lr * mhat / (vhat.sqrt() + adam.eps);
        }
    }

    /// Mini-batch Adam, reshuffling every epoch. Returns the mean batch
    /// loss of each epoch.
    pub fn train(&mut self, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &TrainConfig) -> Result<Vec<f64>, ApproxError> {
        if inputs.is_empty() {
            return Err(ApproxError::EmptyDataset);
        }
        assert_eq!(inputs.len(), targets.len());
        let batch = cfg.batch_size.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut ws = self.workspace();
        let mut grad = vec![0.0; self.params.len()];
        let mut curve = Vec::with_capacity(cfg.epochs);
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let xs: Vec<&[f64]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
                let ys: Vec<&[f64]> = chunk.iter().map(|&i| targets[i].as_slice()).collect();
                grad.iter_mut().for_each(|g| *g = 0.0);
                let loss = self.accumulate_batch(&xs, &ys, &mut ws, &mut grad);
                if !loss.is_finite() {
                    return Err(ApproxError::NonFinite { epoch });
                }
                total += loss * chunk.len() as f64;
                self.adam_step(&grad, &cfg.adam);
            }
            if self.params.iter().any(|p| !p.is_finite()) {
                return Err(ApproxError::NonFinite { epoch });
            }
            curve.push(total / inputs.len() as f64);
        }
        Ok(curve)
    }

    /// Plain-text checkpoint: a `mlp` line with the layer sizes, then one
    /// parameter per line in storage order.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<(), ApproxError> {
        let sizes: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        writeln!(out, "mlp {}", sizes.join(" "))?;
        for p in &self.params {
            writeln!(out, "{p}")?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self, ApproxError> {
        let bad = |m: &str| ApproxError::Checkpoint(m.to_string());
        let mut lines = input.lines();
        let head = lines.next().ok_or_else(|| bad("empty file"))??;
        let mut words = head.split_whitespace();
        if words.next() != Some("mlp") {
            return Err(bad("missing `mlp` header"));
        }
        let sizes: Vec<usize> = words.map(|w| w.parse().map_err(|_| bad("bad layer size"))).collect::<Result<_, _>>()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(bad("bad layer sizes"));
        }
        let mut model = Self::new(&sizes, 0);
        let mut n = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line.trim().parse().map_err(|_| bad("bad parameter"))?;
            if n >= model.params.len() || !v.is_finite() {
                return Err(bad("too many or non-finite parameters"));
            }
            model.params[n] = v;
            n += 1;
        }
        if n != model.params.len() {
            return Err(bad("too few parameters"));
        }
        Ok(model)
    }
}

/// Trains a fresh `50 -> 100 -> 50 -> k` network on one target kind.
/// Initialisation uses `seed`, shuffling `seed + 1`.
pub fn mlp_train(
    dataset: &[TargetSample],
    kind: TargetKind,
    epochs: usize,
    adam: AdamParams,
    seed: u64,
) -> Result<(Mlp, Vec<f64>), ApproxError> {
    if dataset.is_empty() {
        return Err(ApproxError::EmptyDataset);
    }
    let inputs: Vec<Vec<f64>> = dataset.iter().map(|s| s.encoding().to_vec()).collect();
    let targets: Vec<Vec<f64>> = dataset.iter().map(|s| s.target(kind)).collect();
    let mut model = Mlp::for_target(kind, seed);
    let cfg = TrainConfig { epochs, batch_size: DEFAULT_BATCH, adam, seed: seed.wrapping_add(1) };
    let curve = model.train(&inputs, &targets, &cfg)?;
    Ok((model, curve))
}

/// Scalar value of a state: the single output, or the sum of a vector head.
pub fn mlp_value(model: &Mlp, state: &FruitGridState) -> f64 {
    model.forward(&encode(state)).iter().sum()
}

/// Training error of the network's own head, relative to the spread of the
/// target: `sum_i |f(x_i) - y_i|^2 / sum_i |y_i - mean(y)|^2`. For the vector
/// head both sums run over all 25 components, so every kind is scored as a
/// fraction of its own variance.
pub fn normalized_mse(model: &Mlp, dataset: &[TargetSample], kind: TargetKind) -> f64 {
    let n = dataset.len() as f64;
    let ys: Vec<Vec<f64>> = dataset.iter().map(|s| s.target(kind)).collect();
    let k = kind.output_dim();
    let mean: Vec<f64> = (0..k).map(|c| ys.iter().map(|y| y[c]).sum::<f64>() / n).collect();
    let spread: f64 = ys.iter().flat_map(|y| y.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m))).sum();
    let err: f64 = dataset
        .iter()
        .zip(&ys)
        .flat_map(|(s, y)| model.forward(&s.encoding()).into_iter().zip(y).map(|(p, v)| (p - v) * (p - v)).collect::<Vec<_>>())
        .sum();
    err / spread
}

/// `epoch,mse` rows, epochs counted from 1.
pub fn write_curve_csv<W: Write>(curve: &[f64], out: W) -> Result<(), ApproxError> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| ApproxError::Checkpoint(e.to_string());
    w.write_record(["epoch", "mse"]).map_err(map)?;
    for (i, l) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()]).map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fruit_grid_reset_seeded;

    #[test]
    fn shapes() {
        let m = Mlp::for_target(TargetKind::EgoVec, 1);
        assert_eq!(m.param_count(), 50 * 100 + 100 + 100 * 50 + 50 + 50 * 25 + 25);
        assert_eq!(m.forward(&[0.0; 50]).len(), 25);
    }

    #[test]
    fn zero_output_gives_zero_value() {
        let mut m = Mlp::for_target(TargetKind::Tsp, 2);
        m.zero_output_layer();
        assert_eq!(mlp_value(&m, &fruit_grid_reset_seeded(1)), 0.0);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut m = Mlp::new(&[3, 4, 2], 3);
        let before = m.params().to_vec();
        m.adam_step(&vec![0.0; m.param_count()], &AdamParams::default());
        assert_eq!(m.params(), &before[..]);
    }

    #[test]
    fn constant_target_is_learnt() {
        let inputs: Vec<Vec<f64>> = (0..64).map(|i| encode(&fruit_grid_reset_seeded(i)).to_vec()).collect();
        let targets = vec![vec![0.7]; 64];
        let mut m = Mlp::new(&[50, 100, 50, 1], 4);
        let cfg = TrainConfig { adam: AdamParams { lr: 1e-2, ..AdamParams::default() }, ..TrainConfig::new(50, 5) };
        let curve = m.train(&inputs, &targets, &cfg).unwrap();
        assert!(curve[49] < 1e-3, "final loss {}", curve[49]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Mlp::new(&[5, 3, 2], 6);
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf).unwrap();
        let back = Mlp::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.sizes(), m.sizes());
        assert!(Mlp::read_checkpoint(&b"mlp 5 3 2\n1.0\n"[..]).is_err());
    }

    #[test]
    fn nan_is_reported() {
        let mut m = Mlp::new(&[2, 2, 1], 7);
        let cfg = TrainConfig::new(2, 0);
        let err = m.train(&[vec![1.0, 0.0]], &[vec![f64::NAN]], &cfg).unwrap_err();
        assert!(matches!(err, ApproxError::NonFinite { epoch: 1 }));
    }
}
