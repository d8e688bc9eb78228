//! Learned expectation models.
//!
//! [`ExpectationModel`] is a small feedforward network (tanh hidden layers,
//! logistic output) trained by full-batch gradient descent on mean squared
//! error. It maps a feature vector to a value in (0, 1), e.g. the risk of
//! conflict for a dyad. [`adaptive_forecast`] is the naive baseline that only
//! looks at a series' own past.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Outputs are kept this far away from 0 and 1 so the codomain stays open.
const OUTPUT_MARGIN: f64 = 1e-12;

/// Anything that turns a feature vector into a risk in (0, 1).
pub trait Predictor: Sync {
    fn input_width(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<f64>;
}

/// One affine map, stored row-major as `outputs x (inputs + 1)` with the bias
/// in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
}

impl Layer {
    fn cols(&self) -> usize {
        self.inputs + 1
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.weights[r * c..(r + 1) * c]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut z = row[self.inputs];
            for (w, x) in row[..self.inputs].iter().zip(input) {
                z += w * x;
            }
            *o = z;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationModel {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Shape(format!("layer sizes must be positive, got {layer_sizes:?}")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Shape(format!("output width must be 1, got {layer_sizes:?}")));
    }
    Ok(())
}

/// A model whose weights are drawn uniformly from [-0.5, 0.5].
pub fn init_model(layer_sizes: &[usize], seed: u64) -> Result<ExpectationModel> {
    check_layer_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| Layer {
            inputs: w[0],
            outputs: w[1],
            weights: (0..w[1] * (w[0] + 1)).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
        })
        .collect();
    Ok(ExpectationModel { layer_sizes: layer_sizes.to_vec(), layers })
}

impl ExpectationModel {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer { inputs: w[0], outputs: w[1], weights: vec![0.0; w[1] * (w[0] + 1)] })
            .collect();
        Ok(ExpectationModel { layer_sizes: layer_sizes.to_vec(), layers })
    }

    /// Builds a model from explicit per-layer weight matrices
    /// (`outputs x (inputs + 1)`, bias last).
    pub fn from_layers(layer_sizes: &[usize], weights: Vec<Vec<f64>>) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "expected {} weight matrices, got {}",
                layer_sizes.len() - 1,
                weights.len()
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .zip(weights)
            .enumerate()
            .map(|(i, (w, m))| {
                let expected = w[1] * (w[0] + 1);
                if m.len() != expected {
                    return Err(Error::Shape(format!(
                        "layer {i}: expected {expected} weights, got {}",
                        m.len()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Shape(format!("layer {i}: non-finite weight")));
                }
                Ok(Layer { inputs: w[0], outputs: w[1], weights: m })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpectationModel { layer_sizes: layer_sizes.to_vec(), layers })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    /// All weights flattened layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().copied()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        self.forward_into(x, &mut acts);
        Ok(acts.last().unwrap()[0])
    }

    /// Runs the network, leaving every layer's activations in `acts`
    /// (`acts[0]` is the input).
    fn forward_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.outputs];
            layer.affine(&acts[i], &mut out);
            if i == last {
                for v in &mut out {
                    *v = logistic(*v).clamp(OUTPUT_MARGIN, 1.0 - OUTPUT_MARGIN);
                }
            } else {
                for v in &mut out {
                    *v = v.tanh();
                }
            }
            acts.push(out);
        }
    }

    /// Mean squared error over the dataset.
    pub fn loss(&self, data: &LabeledDataset) -> Result<f64> {
        self.check_width(data)?;
        let mut acts = Vec::new();
        let mut total = 0.0;
        for i in 0..data.len() {
            self.forward_into(data.row(i), &mut acts);
            let e = acts.last().unwrap()[0] - data.targets[i];
            total += e * e;
        }
        Ok(total / data.len() as f64)
    }

    /// Mean squared error and its gradient with respect to [`params`](Self::params).
    pub fn loss_and_gradient(&self, data: &LabeledDataset) -> Result<(f64, Vec<f64>)> {
        self.check_width(data)?;
        let n = data.len() as f64;
        let mut grad: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect();
        let mut acts = Vec::new();
        let mut total = 0.0;
        let last = self.layers.len() - 1;
        for i in 0..data.len() {
            self.forward_into(data.row(i), &mut acts);
            let y = acts[last + 1][0];
            let e = y - data.targets[i];
            total += e * e;

            // delta holds dL/dz for the current layer's pre-activations
            let mut delta = vec![2.0 * e / n * y * (1.0 - y)];
            for l in (0..=last).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let cols = layer.cols();
                let g = &mut grad[l];
                for (r, d) in delta.iter().enumerate() {
                    let row = &mut g[r * cols..(r + 1) * cols];
                    for (gw, x) in row[..layer.inputs].iter_mut().zip(input) {
                        *gw += d * x;
                    }
                    row[layer.inputs] += d;
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for (r, d) in delta.iter().enumerate() {
                        for (p, w) in prev.iter_mut().zip(&layer.row(r)[..layer.inputs]) {
                            *p += d * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(input) {
                        *p *= 1.0 - a * a;
                    }
                    delta = prev;
                }
            }
        }
        Ok((total / n, grad.into_iter().flatten().collect()))
    }

    fn check_width(&self, data: &LabeledDataset) -> Result<()> {
        if data.width() != self.input_width() {
            return Err(Error::Shape(format!(
                "dataset has {} features, model expects {}",
                data.width(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Fraction of rows where `forward >= threshold` agrees with `target >= 0.5`.
    pub fn accuracy(&self, data: &LabeledDataset, threshold: f64) -> Result<f64> {
        self.check_width(data)?;
        if data.is_empty() {
            return Ok(f64::NAN);
        }
        let mut hits = 0usize;
        for i in 0..data.len() {
            let predicted = self.forward(data.row(i))? >= threshold;
            if predicted == (data.targets[i] >= 0.5) {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Text format: a `layers: s0 s1 ... sk` header, then one line per weight
    /// matrix row with the bias last. Values carry 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(w, "layers: {}", sizes.join(" "))?;
        for layer in &self.layers {
            for r in 0..layer.outputs {
                let row: Vec<String> = layer.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Load("model file is empty".into()))?
            .map_err(|e| Error::io("<model>", e))?;
        let sizes = header
            .strip_prefix("layers:")
            .ok_or_else(|| Error::Load(format!("bad model header `{header}`")))?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Load(format!("bad layer size `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        check_layer_sizes(&sizes)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut line_no = 1;
        for w in sizes.windows(2) {
            let mut m = Vec::with_capacity(w[1] * (w[0] + 1));
            for _ in 0..w[1] {
                line_no += 1;
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Load(format!("model truncated at line {line_no}")))?
                    .map_err(|e| Error::io("<model>", e))?;
                let row = line
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|_| Error::Load(format!("line {line_no}: bad weight `{s}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if row.len() != w[0] + 1 {
                    return Err(Error::Load(format!(
                        "line {line_no}: expected {} values, got {}",
                        w[0] + 1,
                        row.len()
                    )));
                }
                m.extend(row);
            }
            weights.push(m);
        }
        if let Some(extra) = lines.next() {
            let extra = extra.map_err(|e| Error::io("<model>", e))?;
            if !extra.trim().is_empty() {
                return Err(Error::Load(format!("unexpected trailing line `{extra}`")));
            }
        }
        Self::from_layers(&sizes, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}

impl Predictor for ExpectationModel {
    fn input_width(&self) -> usize {
        ExpectationModel::input_width(self)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    width: usize,
    targets: Vec<f64>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("dataset"));
        }
        let width = feature_names.len();
        if width == 0 {
            return Err(Error::Shape("dataset needs at least one feature".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", rows.len(), targets.len())));
        }
        let mut features = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape(format!("row {i} has {} features, expected {width}", row.len())));
            }
            if row.iter().any(|v| v.is_nan()) {
                return Err(Error::Shape(format!("row {i} contains NaN")));
            }
            features.extend(row);
        }
        if let Some(i) = targets.iter().position(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Shape(format!("target {i} is outside [0, 1]")));
        }
        Ok(LabeledDataset { features, width, targets, feature_names })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.width);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        LabeledDataset {
            features,
            width: self.width,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Seeded train/holdout split; see [`split_indices`].
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Self, Self) {
        let (train, holdout) = split_indices(self.len(), train_fraction, seed);
        (self.subset(&train), self.subset(&holdout))
    }
}

/// Shuffles `0..n` with `seed` and cuts it so that `round(n * fraction)` rows
/// (at least one) land in the first part. A fraction of 1 keeps the original
/// order.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if train_fraction >= 1.0 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64 * train_fraction).round() as usize).clamp(1.min(n), n);
    let holdout = idx.split_off(cut);
    (idx, holdout)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of rows used for fitting, split with [`split_indices`].
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.5, epochs: 2000, seed: 0, train_fraction: 1.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!("train fraction must lie in (0, 1], got {}", self.train_fraction)));
        }
        Ok(())
    }
}

/// Full-batch gradient descent on mean squared error.
///
/// The loss curve holds the training loss at the start of every epoch. The
/// returned weights are the lowest-loss ones visited, so the final training
/// loss never exceeds the initial one.
pub fn train(
    model: &ExpectationModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(ExpectationModel, Vec<f64>)> {
    cfg.validate()?;
    model.check_width(data)?;
    let (fit, _) = data.split(cfg.train_fraction, cfg.seed);
    let mut current = model.clone();
    let mut params = current.params();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = current.loss_and_gradient(&fit)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        curve.push(loss);
        if best.as_ref().map_or(true, |(b, _)| loss < *b) {
            best = Some((loss, params.clone()));
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        current.set_params(&params)?;
    }
    if cfg.epochs > 0 {
        let last = current.loss(&fit)?;
        if !last.is_finite() {
            return Err(Error::Divergence { epoch: cfg.epochs });
        }
        if let Some((b, p)) = best {
            if b < last {
                current.set_params(&p)?;
            }
        }
    }
    Ok((current, curve))
}

/// Largest relative gap between the analytic loss gradient and a central
/// finite difference with step `perturbation`, over every weight.
///
/// Gaps are measured relative to `max(|analytic|, |numeric|, 1e-7)` so
/// gradients that are zero on both sides do not divide by zero.
pub fn grad_check(model: &ExpectationModel, data: &LabeledDataset, perturbation: f64) -> Result<f64> {
    if !(1e-8..=1e-3).contains(&perturbation) {
        return Err(Error::Config(format!("perturbation must lie in [1e-8, 1e-3], got {perturbation}")));
    }
    let (_, analytic) = model.loss_and_gradient(data)?;
    let mut probe = model.clone();
    let base = model.params();
    let mut params = base.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        params[i] = base[i] + perturbation;
        probe.set_params(&params)?;
        let up = probe.loss(data)?;
        params[i] = base[i] - perturbation;
        probe.set_params(&params)?;
        let down = probe.loss(data)?;
        params[i] = base[i];
        let numeric = (up - down) / (2.0 * perturbation);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    Ok(worst)
}

/// Averages the predictions of independently initialised and trained
/// networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<ExpectationModel>,
}

impl Ensemble {
    pub fn new(members: Vec<ExpectationModel>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyInput("ensemble"))?;
        let width = first.input_width();
        if members.iter().any(|m| m.input_width() != width) {
            return Err(Error::Shape("ensemble members disagree on input width".into()));
        }
        Ok(Ensemble { members })
    }

    /// Trains `k` members in parallel; member `i` is initialised and split
    /// with `cfg.seed + i`.
    pub fn train(layer_sizes: &[usize], data: &LabeledDataset, cfg: &TrainConfig, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        let members = (0..k as u64)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i);
                let init = init_model(layer_sizes, seed)?;
                let cfg = TrainConfig { seed, ..*cfg };
                Ok(train(&init, data, &cfg)?.0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(members)
    }

    pub fn members(&self) -> &[ExpectationModel] {
        &self.members
    }
}

impl Predictor for Ensemble {
    fn input_width(&self) -> usize {
        self.members[0].input_width()
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.members {
            sum += m.forward(x)?;
        }
        Ok(sum / self.members.len() as f64)
    }
}

/// Adaptive expectations: the next value is the mean of the last `order`
/// observations. On trending series this lags behind systematically.
pub fn adaptive_forecast(series: &[f64], order: usize) -> Result<f64> {
    if order == 0 {
        return Err(Error::Config("forecast order must be at least 1".into()));
    }
    if series.len() < order {
        return Err(Error::InsufficientHistory { len: series.len(), order });
    }
    let window = &series[series.len() - order..];
    Ok(window.iter().sum::<f64>() / order as f64)
}
