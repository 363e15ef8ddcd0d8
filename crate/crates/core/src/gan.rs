//! Generator/discriminator pair trained on the real/fake split of the
//! population, with latent vectors drawn from a Gaussian fitted to the real
//! samples.
//!
//! Everything here works in unit-cube coordinates; [`generate_candidates`]
//! maps generator output back into the problem box.

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::common::{clamp, BoxBounds, DecisionVector};
use crate::error::{check_dim, Error, Result};
use crate::nn::{adam_step, disc_loss_and_grad, gen_loss_and_grad, Activation, AdamState, GenLoss, Gradients, MlpParams};
use crate::selection::{Label, LabeledDataset};

/// Diagonal jitter values tried in order when factorizing a covariance.
pub const JITTER_SCHEDULE: [f64; 6] = [0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gen_loss: GenLoss,
    /// Zero both optimizers' moments before each generation's training.
    pub reset_optimizers: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch: 32,
            lr_d: 1e-4,
            lr_g: 4e-4,
            beta1: 0.5,
            beta2: 0.999,
            gen_loss: GenLoss::Saturating,
            reset_optimizers: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        for (name, v) in [("lr_d", self.lr_d), ("lr_g", self.lr_g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Generator `D-D-D-D` and discriminator `D-D-1`, each with its own Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct GanPair {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub g_opt: AdamState,
    pub d_opt: AdamState,
    pub gen_loss: GenLoss,
}

impl GanPair {
    pub fn new<R: Rng + ?Sized>(dim: usize, cfg: &GanConfig, rng: &mut R) -> Result<Self> {
        let generator = MlpParams::init(&[dim, dim, dim, dim], Activation::Relu, rng)?;
        let discriminator = MlpParams::init(&[dim, dim, 1], Activation::Relu, rng)?;
        let g_opt = AdamState::new(&generator, cfg.lr_g, cfg.beta1, cfg.beta2);
        let d_opt = AdamState::new(&discriminator, cfg.lr_d, cfg.beta1, cfg.beta2);
        Ok(Self { generator, discriminator, g_opt, d_opt, gen_loss: cfg.gen_loss })
    }

    pub fn dim(&self) -> usize {
        self.generator.input_dim()
    }

    pub fn reset_optimizers(&mut self) {
        self.g_opt.reset();
        self.d_opt.reset();
    }

    /// Discriminator probabilities for a batch of unit-cube vectors.
    pub fn discriminate(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.discriminator.predict(x)?.column(0).to_vec())
    }

    pub fn generate(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.generator.predict(z)
    }

    /// Discriminator loss on the given groups without updating anything.
    pub fn discriminator_loss(&self, real: ArrayView2<f64>, fake: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
        let generated = self.generator.predict(z)?;
        let probs = |x: ArrayView2<f64>| self.discriminate_opt(x);
        Ok(disc_loss_and_grad(&probs(real)?, &probs(fake)?, &probs(generated.view())?).0)
    }

    fn discriminate_opt(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        self.discriminate(x)
    }

    /// One Adam step on the three-term discriminator loss. Returns the loss
    /// measured before the step.
    pub fn discriminator_step(&mut self, real: ArrayView2<f64>, fake: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
        let generated = self.generator.predict(z)?;
        let groups = [real, fake, generated.view()];
        let mut outputs = Vec::with_capacity(3);
        for x in groups {
            if x.nrows() == 0 {
                outputs.push(None);
            } else {
                outputs.push(Some(self.discriminator.forward(x)?));
            }
        }
        let probs: Vec<Vec<f64>> = outputs
            .iter()
            .map(|o| o.as_ref().map(|(p, _)| p.column(0).to_vec()).unwrap_or_default())
            .collect();
        let (loss, grad) = disc_loss_and_grad(&probs[0], &probs[1], &probs[2]);
        let mut total = Gradients::zeros_like(&self.discriminator);
        for (out, g) in outputs.iter().zip([grad.real, grad.fake, grad.generated]) {
            if let Some((_, cache)) = out {
                let d_out = Array2::from_shape_vec((g.len(), 1), g).expect("one gradient per row");
                let (grads, _) = self.discriminator.backward(cache, d_out.view())?;
                total.add_assign(&grads);
            }
        }
        adam_step(&mut self.discriminator, &mut self.d_opt, &total)?;
        Ok(loss)
    }

    /// One Adam step on the generator loss through a frozen discriminator.
    /// Returns the loss measured before the step.
    pub fn generator_step(&mut self, z: ArrayView2<f64>) -> Result<f64> {
        let (generated, g_cache) = self.generator.forward(z)?;
        let (probs, d_cache) = self.discriminator.forward(generated.view())?;
        let (loss, grad) = gen_loss_and_grad(&probs.column(0).to_vec(), self.gen_loss);
        let d_out = Array2::from_shape_vec((grad.len(), 1), grad).expect("one gradient per row");
        let (_, d_generated) = self.discriminator.backward(&d_cache, d_out.view())?;
        let (grads, _) = self.generator.backward(&g_cache, d_generated.view())?;
        adam_step(&mut self.generator, &mut self.g_opt, &grads)?;
        Ok(loss)
    }
}

/// Mean and unbiased covariance (divisor `n - 1`) of the rows of `samples`.
pub fn real_statistics(samples: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::Precondition(format!("statistics need at least 2 samples, got {n}")));
    }
    let mut mu = samples.mean_axis(Axis(0)).expect("non-empty");
    let mut centered = &samples - &mu;
    // second pass removes the rounding error of the first mean
    let shift = centered.mean_axis(Axis(0)).expect("non-empty");
    centered -= &shift;
    mu += &shift;
    let mut sigma = centered.t().dot(&centered) / (n - 1) as f64;
    // force exact symmetry against rounding in the product
    let d = sigma.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (sigma[[i, j]] + sigma[[j, i]]);
            sigma[[i, j]] = v;
            sigma[[j, i]] = v;
        }
    }
    Ok((mu, sigma))
}

fn try_cholesky(a: &Array2<f64>, jitter: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(jitter);
    let tol = n as f64 * f64::EPSILON * scale;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let row_j = l.slice(s![j, ..j]).to_owned();
        let pivot = a[[j, j]] + jitter - row_j.dot(&row_j);
        if !(pivot > tol) {
            return None;
        }
        let ljj = pivot.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let v = a[[i, j]] - l.slice(s![i, ..j]).dot(&row_j);
            l[[i, j]] = v / ljj;
        }
    }
    Some(l)
}

/// Lower-triangular `L` with `L·Lᵀ = sigma + j·I`, trying each jitter of
/// `schedule` in turn. Returns the factor and the jitter that worked.
pub fn cholesky(sigma: &Array2<f64>, schedule: &[f64]) -> Result<(Array2<f64>, f64)> {
    check_dim(sigma.nrows(), sigma.ncols())?;
    let n = sigma.nrows();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (sigma[[i, j]], sigma[[j, i]]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Precondition("covariance matrix is not symmetric".into()));
            }
        }
    }
    schedule
        .iter()
        .find_map(|&j| try_cholesky(sigma, j).map(|l| (l, j)))
        .ok_or_else(|| Error::Degenerate("covariance is not positive definite at any jitter".into()))
}

/// Gaussian fitted to the real samples, in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub mu: Array1<f64>,
    pub sigma: Array2<f64>,
    pub chol: Array2<f64>,
    pub jitter: f64,
}

impl LatentModel {
    pub fn from_parts(mu: Array1<f64>, sigma: Array2<f64>) -> Result<Self> {
        check_dim(mu.len(), sigma.nrows())?;
        let (chol, jitter) = match cholesky(&sigma, &JITTER_SCHEDULE) {
            Ok(found) => found,
            Err(Error::Degenerate(_)) => {
                let jitter = JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1];
                let diag = sigma.diag().mapv(|v| (v.max(0.0) + jitter).sqrt());
                (Array2::from_diag(&diag), jitter)
            }
            Err(e) => return Err(e),
        };
        Ok(Self { mu, sigma, chol, jitter })
    }

    pub fn fit(samples: ArrayView2<f64>) -> Result<Self> {
        let (mu, sigma) = real_statistics(samples)?;
        Self::from_parts(mu, sigma)
    }

    /// Fits the real samples of a labelled dataset.
    pub fn fit_real(data: &LabeledDataset) -> Result<Self> {
        Self::fit(stack(data.real())?.view())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// `m` rows of `mu + L·u` with `u` standard normal.
pub fn sample_latent<R: Rng + ?Sized>(model: &LatentModel, m: usize, rng: &mut R) -> Array2<f64> {
    let d = model.dim();
    let u = Array2::from_shape_simple_fn((m, d), || rng.sample::<f64, _>(StandardNormal));
    u.dot(&model.chol.t()) + &model.mu
}

fn stack<'a>(rows: impl Iterator<Item = &'a DecisionVector>) -> Result<Array2<f64>> {
    let rows: Vec<&DecisionVector> = rows.collect();
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut out = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        check_dim(d, r.len())?;
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&r[..]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub generation: usize,
    pub epoch: usize,
    pub batch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

/// One row per discriminator/generator update pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub rows: Vec<LossRow>,
}

impl LossTrace {
    pub const CSV_HEADER: &'static str = "generation,epoch,batch,d_loss,g_loss";

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: LossTrace) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:e},{:e}", r.generation, r.epoch, r.batch, r.d_loss, r.g_loss);
        }
        out
    }
}

/// Runs `epochs` passes over the shuffled dataset with `⌊|data|/batch⌋`
/// mini-batches each. Every mini-batch performs one discriminator and one
/// generator update, each with freshly drawn latent vectors.
pub fn train<R: Rng + ?Sized>(
    gan: &mut GanPair,
    data: &LabeledDataset,
    epochs: usize,
    batch: usize,
    generation: usize,
    rng: &mut R,
) -> Result<LossTrace> {
    let mut trace = LossTrace::default();
    if epochs == 0 {
        return Ok(trace);
    }
    if batch == 0 || data.len() < batch {
        return Err(Error::Precondition(format!(
            "dataset of {} samples cannot fill a batch of {batch}",
            data.len()
        )));
    }
    if data.count(Label::Real) < 2 || data.count(Label::Fake) == 0 {
        return Err(Error::Precondition("training needs both real and fake samples".into()));
    }
    let model = LatentModel::fit_real(data)?;
    check_dim(gan.dim(), model.dim())?;
    let all = stack(data.samples.iter().map(|(x, _)| x))?;
    let labels: Vec<Label> = data.samples.iter().map(|(_, l)| *l).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_batches = data.len() / batch;
    for epoch in 0..epochs {
        order.shuffle(rng);
        for b in 0..n_batches {
            let chunk = &order[b * batch..(b + 1) * batch];
            let real: Vec<usize> = chunk.iter().copied().filter(|&i| labels[i] == Label::Real).collect();
            let fake: Vec<usize> = chunk.iter().copied().filter(|&i| labels[i] == Label::Fake).collect();
            let real = all.select(Axis(0), &real);
            let fake = all.select(Axis(0), &fake);
            let z = sample_latent(&model, batch, rng);
            let d_loss = gan.discriminator_step(real.view(), fake.view(), z.view())?;
            let z = sample_latent(&model, batch, rng);
            let g_loss = gan.generator_step(z.view())?;
            trace.rows.push(LossRow { generation, epoch, batch: b, d_loss, g_loss });
        }
    }
    Ok(trace)
}

/// `n` generator samples mapped from the unit cube into `bounds`.
pub fn generate_candidates<R: Rng + ?Sized>(
    gan: &GanPair,
    model: &LatentModel,
    n: usize,
    bounds: &BoxBounds,
    rng: &mut R,
) -> Result<Vec<DecisionVector>> {
    check_dim(bounds.dim(), gan.dim())?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let z = sample_latent(model, n, rng);
    let out = gan.generate(z.view())?;
    Ok(out
        .rows()
        .into_iter()
        .map(|row| {
            let x: Vec<f64> = row
                .iter()
                .zip(bounds.lower().iter().zip(bounds.upper()))
                .map(|(v, (l, u))| v * (u - l) + l)
                .collect();
            clamp(&x, bounds)
        })
        .collect())
}
