//! Latent-space inversion of a pretrained fully-connected generator (GAN-D).
//!
//! The generator maps a latent vector `ℓ` to a demand vector `T(ℓ)`. An
//! estimate is found by picking the best of `N_i` Gaussian latent draws and
//! then running `N_2` Adam steps on `L(ℓ) = ‖b − A·T(ℓ)‖²`. The gradient is
//! computed by hand through the ReLU chain.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::rng_from_seed;
use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix};
use crate::tm::TrafficVector;

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn tag(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Identity => "identity",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "relu" => Ok(Self::Relu),
            "identity" | "linear" => Ok(Self::Identity),
            other => Err(Error::MalformedWeights(format!("unknown activation `{other}`"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Relu => z.max(0.0),
            Self::Identity => z,
        }
    }

    /// Derivative; the ReLU subgradient at 0 is taken as 0.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Self::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Identity => 1.0,
        }
    }
}

/// Affine layer `z = W h + bias` with `W` stored row-major as `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::MalformedWeights(format!(
                "layer declares {rows}x{cols} but has {} weights",
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(Error::MalformedWeights(format!(
                "layer has {rows} rows but {} biases",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::MalformedWeights("non-finite parameter".into()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    fn affine(&self, h: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(h).map(|(u, v)| u * v).sum::<f64>() + b)
            .collect()
    }

    /// `Wᵀ g`.
    fn backward(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (w, &gi) in self.weights.chunks_exact(self.cols).zip(g) {
            if gi == 0.0 {
                continue;
            }
            for (o, &wij) in out.iter_mut().zip(w) {
                *o += wij * gi;
            }
        }
        out
    }
}

/// Fully-connected generator mapping latents to demands in Mbps.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    latent_dim: usize,
    layers: Vec<DenseLayer>,
    hidden_activation: Activation,
    output_activation: Activation,
    /// Network outputs are multiplied by this to obtain Mbps.
    scale_mbps: f64,
}

impl GeneratorNet {
    pub fn new(
        latent_dim: usize,
        layers: Vec<DenseLayer>,
        hidden_activation: Activation,
        output_activation: Activation,
        scale_mbps: f64,
    ) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::MalformedWeights("latent_dim must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::MalformedWeights("no layers".into()));
        }
        let mut width = latent_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.cols != width {
                return Err(Error::MalformedWeights(format!(
                    "layer {k} expects input width {} but receives {width}",
                    layer.cols
                )));
            }
            width = layer.rows;
        }
        if !(scale_mbps.is_finite() && scale_mbps > 0.0) {
            return Err(Error::MalformedWeights(format!("scale_mbps must be positive, got {scale_mbps}")));
        }
        Ok(Self {
            latent_dim,
            layers,
            hidden_activation,
            output_activation,
            scale_mbps,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").rows
    }

    pub fn scale_mbps(&self) -> f64 {
        self.scale_mbps
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    fn activation(&self, k: usize) -> Activation {
        if k + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_latent(&self, latent: &[f64]) -> Result<()> {
        if latent.len() != self.latent_dim {
            return Err(Error::mismatch("latent vector", self.latent_dim, latent.len()));
        }
        Ok(())
    }

    /// `T(ℓ)` in Mbps.
    pub fn forward(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.check_latent(latent)?;
        let mut h = latent.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activation(k);
            h = layer.affine(&h).into_iter().map(|z| act.apply(z)).collect();
        }
        h.iter_mut().for_each(|v| *v *= self.scale_mbps);
        Ok(h)
    }

    /// Forward pass keeping every pre-activation.
    fn forward_trace(&self, latent: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = latent.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&h);
            let act = self.activation(k);
            h = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
        }
        h.iter_mut().for_each(|v| *v *= self.scale_mbps);
        (pre, h)
    }

    /// Pulls `d loss / d output` back to the latent space.
    fn backprop(&self, pre: &[Vec<f64>], grad_output: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = grad_output.iter().map(|v| v * self.scale_mbps).collect();
        for k in (0..self.layers.len()).rev() {
            let act = self.activation(k);
            for (gi, &z) in g.iter_mut().zip(&pre[k]) {
                *gi *= act.derivative(z);
            }
            g = self.layers[k].backward(&g);
        }
        g
    }
}

/// `T(ℓ)` as a demand vector. Negative outputs (possible only with a linear
/// output layer) are clipped to zero.
pub fn generator_forward(net: &GeneratorNet, latent: &[f64]) -> Result<TrafficVector> {
    Ok(TrafficVector::from_clamped(net.forward(latent)?))
}

fn check_problem(net: &GeneratorNet, a: &CsrMatrix, b: &[f64]) -> Result<()> {
    if net.output_dim() != a.cols() {
        return Err(Error::mismatch("generator output vs routing columns", a.cols(), net.output_dim()));
    }
    if b.len() != a.rows() {
        return Err(Error::mismatch("link loads", a.rows(), b.len()));
    }
    Ok(())
}

fn residual_loss(a: &CsrMatrix, b: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let at = a.mul_vec(t).expect("dimensions checked");
    let r: Vec<f64> = b.iter().zip(&at).map(|(u, v)| u - v).collect();
    (r.iter().map(|v| v * v).sum(), r)
}

/// `‖b − A·T(ℓ)‖²`.
pub fn latent_loss(net: &GeneratorNet, a: &CsrMatrix, b: &[f64], latent: &[f64]) -> Result<f64> {
    check_problem(net, a, b)?;
    let t = net.forward(latent)?;
    Ok(residual_loss(a, b, &t).0)
}

/// Loss `‖b − A·T(ℓ)‖²` and its exact gradient with respect to `ℓ`.
pub fn loss_and_latent_gradient(
    net: &GeneratorNet,
    a: &CsrMatrix,
    b: &[f64],
    latent: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_problem(net, a, b)?;
    net.check_latent(latent)?;
    let (pre, t) = net.forward_trace(latent);
    let (loss, r) = residual_loss(a, b, &t);
    // dL/dT = -2 Aᵀ r
    let grad_t: Vec<f64> = a.tr_mul_vec(&r)?.into_iter().map(|v| -2.0 * v).collect();
    Ok((loss, net.backprop(&pre, &grad_t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One descent step on `params`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GanEstimateConfig {
    /// Gaussian latent candidates drawn before optimization (`N_i`).
    pub inits: usize,
    /// Adam steps (`N_2`).
    pub steps: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for GanEstimateConfig {
    fn default() -> Self {
        Self {
            inits: 100,
            steps: 10_000,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl GanEstimateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inits == 0 {
            return Err(Error::InvalidConfig("need at least one latent candidate".into()));
        }
        if !self.adam.learning_rate.is_finite() || self.adam.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GanDiagnostics {
    pub best_init_index: usize,
    pub best_init_loss: f64,
    /// Loss at the start of every Adam step, then at the final iterate.
    pub loss_trace: Vec<f64>,
    /// Loss of the returned (lowest-loss) iterate.
    pub best_loss: f64,
    /// Adam step at which the returned iterate was reached (0 = initial).
    pub best_step: usize,
    pub final_relative_residual: f64,
    pub latent: Vec<f64>,
}

/// GAN-D estimate of the demands behind loads `b`.
pub fn gan_estimate(
    net: &GeneratorNet,
    a: &CsrMatrix,
    b: &[f64],
    config: &GanEstimateConfig,
) -> Result<(TrafficVector, GanDiagnostics)> {
    config.validate()?;
    check_problem(net, a, b)?;
    let mut rng = rng_from_seed(config.seed);
    let candidates: Vec<Vec<f64>> = (0..config.inits)
        .map(|_| (0..net.latent_dim()).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let losses: Vec<f64> = candidates
        .par_iter()
        .map(|l| residual_loss(a, b, &net.forward(l).expect("latent width matches")).0)
        .collect();
    let (best_init_index, best_init_loss) = losses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, l)| if l < best.1 { (i, l) } else { best });

    let mut latent = candidates[best_init_index].clone();
    let mut adam = Adam::new(latent.len(), config.adam);
    let mut loss_trace = Vec::with_capacity(config.steps + 1);
    let mut best = (best_init_loss, latent.clone(), 0usize);
    for step in 0..config.steps {
        let (loss, grad) = loss_and_latent_gradient(net, a, b, &latent)?;
        loss_trace.push(loss);
        if loss < best.0 {
            best = (loss, latent.clone(), step);
        }
        adam.step(&mut latent, &grad);
    }
    let final_loss = latent_loss(net, a, b, &latent)?;
    loss_trace.push(final_loss);
    if final_loss < best.0 {
        best = (final_loss, latent.clone(), config.steps);
    }

    let (best_loss, best_latent, best_step) = best;
    let estimate = generator_forward(net, &best_latent)?;
    let b_norm = norm2(b);
    let final_relative_residual = if b_norm > 0.0 {
        best_loss.sqrt() / b_norm
    } else {
        best_loss.sqrt()
    };
    Ok((
        estimate,
        GanDiagnostics {
            best_init_index,
            best_init_loss,
            loss_trace,
            best_loss,
            best_step,
            final_relative_residual,
            latent: best_latent,
        },
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightFile {
    format_version: u32,
    latent_dim: usize,
    output_dim: usize,
    scale_mbps: f64,
    hidden_activation: String,
    output_activation: String,
    layers: Vec<LayerFile>,
}

/// Parses and validates a generator from its JSON interchange form.
pub fn parse_generator(json: &str) -> Result<GeneratorNet> {
    let file: WeightFile = serde_json::from_str(json).map_err(|e| Error::MalformedWeights(e.to_string()))?;
    if file.format_version != WEIGHT_FORMAT_VERSION {
        return Err(Error::MalformedWeights(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| DenseLayer::new(l.rows, l.cols, l.weights, l.bias))
        .collect::<Result<Vec<_>>>()?;
    let net = GeneratorNet::new(
        file.latent_dim,
        layers,
        Activation::from_tag(&file.hidden_activation)?,
        Activation::from_tag(&file.output_activation)?,
        file.scale_mbps,
    )?;
    if net.output_dim() != file.output_dim {
        return Err(Error::MalformedWeights(format!(
            "declared output_dim {} but the last layer has {} rows",
            file.output_dim,
            net.output_dim()
        )));
    }
    Ok(net)
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<GeneratorNet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_generator(&text).map_err(|e| match e {
        Error::MalformedWeights(msg) => Error::MalformedWeights(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn generator_to_json(net: &GeneratorNet) -> String {
    let file = WeightFile {
        format_version: WEIGHT_FORMAT_VERSION,
        latent_dim: net.latent_dim,
        output_dim: net.output_dim(),
        scale_mbps: net.scale_mbps,
        hidden_activation: net.hidden_activation.tag().into(),
        output_activation: net.output_activation.tag().into(),
        layers: net
            .layers
            .iter()
            .map(|l| LayerFile {
                rows: l.rows,
                cols: l.cols,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("weight file serializes")
}

pub fn save_generator(net: &GeneratorNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, generator_to_json(net)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Generator with Gaussian-initialized weights (He scaling), for tests and
/// benchmarks.
pub fn random_generator(
    widths: &[usize],
    hidden: Activation,
    output: Activation,
    scale_mbps: f64,
    rng: &mut impl Rng,
) -> Result<GeneratorNet> {
    if widths.len() < 2 {
        return Err(Error::MalformedWeights("need at least input and output widths".into()));
    }
    let layers = widths
        .windows(2)
        .map(|w| {
            let (cols, rows) = (w[0], w[1]);
            let std = (2.0 / cols as f64).sqrt();
            let weights = (0..rows * cols)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let bias = (0..rows).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
            DenseLayer::new(rows, cols, weights, bias)
        })
        .collect::<Result<Vec<_>>>()?;
    GeneratorNet::new(widths[0], layers, hidden, output, scale_mbps)
}
