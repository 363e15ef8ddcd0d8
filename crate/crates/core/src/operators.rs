//! Real-coded variation (SBX, polynomial mutation), binary tournament mating
//! and the hybrid GAN/genetic reproduction step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::common::{clamp, BoxBounds, DecisionVector, Individual, Population};
use crate::error::{check_dim, Error, Result};
use crate::gan::{generate_candidates, GanPair, LatentModel};
use crate::selection::FitnessTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig {
    pub eta_c: f64,
    pub p_c: f64,
    pub eta_m: f64,
    /// Per-variable mutation probability; `None` means `1/D`.
    pub p_m: Option<f64>,
    /// Probability that an offspring slot is filled by the generator.
    pub gan_share: f64,
    /// Apply polynomial mutation to generator offspring as well.
    pub mutate_gan: bool,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self { eta_c: 20.0, p_c: 1.0, eta_m: 20.0, p_m: None, gan_share: 0.5, mutate_gan: false }
    }
}

impl VariationConfig {
    pub fn mutation_probability(&self, dim: usize) -> f64 {
        self.p_m.unwrap_or(1.0 / dim as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [("p_c", Some(self.p_c)), ("p_m", self.p_m), ("gan_share", Some(self.gan_share))];
        for (name, v) in probs {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
                }
            }
        }
        for (name, v) in [("eta_c", self.eta_c), ("eta_m", self.eta_m)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_spread(u: f64, eta: f64) -> f64 {
    if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (2.0 - 2.0 * u).powf(-1.0 / (eta + 1.0))
    }
}

/// Children `m ± β·(p1 − p2)/2` around the parent midpoint `m`, before any
/// bound handling.
pub fn sbx_unclamped<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    cfg: &VariationConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(p1.len(), p2.len())?;
    let crossover = rng.random::<f64>() < cfg.p_c;
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for (a, b) in p1.iter().zip(p2) {
        let u: f64 = rng.random();
        let mut beta = sbx_spread(u, cfg.eta_c);
        if rng.random::<bool>() {
            beta = -beta;
        }
        if !crossover || rng.random::<f64>() < 0.5 {
            beta = 1.0;
        }
        if beta == 1.0 {
            c1.push(*a);
            c2.push(*b);
            continue;
        }
        let mid = 0.5 * (a + b);
        let half = 0.5 * beta * (a - b);
        c1.push(mid + half);
        c2.push(mid - half);
    }
    Ok((c1, c2))
}

pub fn sbx<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    cfg: &VariationConfig,
    bounds: &BoxBounds,
    rng: &mut R,
) -> Result<(DecisionVector, DecisionVector)> {
    check_dim(bounds.dim(), p1.len())?;
    let (c1, c2) = sbx_unclamped(p1, p2, cfg, rng)?;
    Ok((clamp(&c1, bounds), clamp(&c2, bounds)))
}

/// Bounded polynomial mutation, each variable mutated with probability
/// `cfg.mutation_probability(D)`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &[f64],
    cfg: &VariationConfig,
    bounds: &BoxBounds,
    rng: &mut R,
) -> Result<DecisionVector> {
    check_dim(bounds.dim(), x.len())?;
    if !bounds.contains(x) {
        return Err(Error::Range("mutation input lies outside the box".into()));
    }
    let p_m = cfg.mutation_probability(x.len());
    let e = cfg.eta_m + 1.0;
    let mut out = x.to_vec();
    for (i, v) in out.iter_mut().enumerate() {
        if rng.random::<f64>() >= p_m {
            continue;
        }
        let mu: f64 = rng.random();
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        let span = u - l;
        if mu <= 0.5 {
            let d = (*v - l) / span;
            *v += span * ((2.0 * mu + (1.0 - 2.0 * mu) * (1.0 - d).powf(e)).powf(1.0 / e) - 1.0);
        } else {
            let d = (u - *v) / span;
            *v += span * (1.0 - (2.0 * (1.0 - mu) + 2.0 * (mu - 0.5) * (1.0 - d).powf(e)).powf(1.0 / e));
        }
    }
    Ok(clamp(&out, bounds))
}

/// `k` parent indices, each the lower-`fit` member of two uniform draws
/// (the first draw wins ties).
pub fn binary_tournament<R: Rng + ?Sized>(fit: &FitnessTable, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = fit.len();
    if n < 2 {
        return Err(Error::Precondition(format!("tournament needs at least 2 members, got {n}")));
    }
    Ok((0..k)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if fit.fit[b] < fit.fit[a] {
                b
            } else {
                a
            }
        })
        .collect())
}

fn check_table(pop: &Population, fit: &FitnessTable) -> Result<()> {
    check_dim(pop.len(), fit.len())
}

/// `n` offspring from tournament-selected pairs, keeping both SBX children.
pub fn genetic_reproduce<R: Rng + ?Sized>(
    pop: &Population,
    fit: &FitnessTable,
    n: usize,
    cfg: &VariationConfig,
    bounds: &BoxBounds,
    rng: &mut R,
) -> Result<Population> {
    check_table(pop, fit)?;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let parents = binary_tournament(fit, 2, rng)?;
        let (p1, p2) = (&pop.members()[parents[0]].x, &pop.members()[parents[1]].x);
        let (c1, c2) = sbx(p1, p2, cfg, bounds, rng)?;
        for c in [c1, c2] {
            if out.len() < n {
                out.push(Individual::new(polynomial_mutation(&c, cfg, bounds, rng)?));
            }
        }
    }
    Population::new(out)
}

/// Offspring slot origin recorded by [`hybrid_reproduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Gan,
    Genetic,
}

/// Fills `pop.len()` offspring slots. Each slot independently goes to the
/// generator with probability `cfg.gan_share`, otherwise to tournament
/// mating, SBX (one child kept at random) and polynomial mutation.
///
/// The generator may be omitted only when `gan_share` is zero.
pub fn hybrid_reproduce<R: Rng + ?Sized>(
    pop: &Population,
    fit: &FitnessTable,
    gan: Option<(&GanPair, &LatentModel)>,
    cfg: &VariationConfig,
    bounds: &BoxBounds,
    rng: &mut R,
) -> Result<(Population, Vec<Origin>)> {
    check_table(pop, fit)?;
    let n = pop.len();
    let origins: Vec<Origin> = (0..n)
        .map(|_| if rng.random::<f64>() < cfg.gan_share { Origin::Gan } else { Origin::Genetic })
        .collect();
    let n_gan = origins.iter().filter(|o| **o == Origin::Gan).count();
    let mut generated = match (n_gan, gan) {
        (0, _) => Vec::new(),
        (_, Some((g, model))) => generate_candidates(g, model, n_gan, bounds, rng)?,
        (_, None) => return Err(Error::Precondition("generator offspring requested without a generator".into())),
    }
    .into_iter();
    let mut members = Vec::with_capacity(n);
    for origin in &origins {
        let x = match origin {
            Origin::Gan => {
                let x = generated.next().expect("one candidate per generator slot");
                if cfg.mutate_gan {
                    polynomial_mutation(&x, cfg, bounds, rng)?
                } else {
                    x
                }
            }
            Origin::Genetic => {
                let parents = binary_tournament(fit, 2, rng)?;
                let (p1, p2) = (&pop.members()[parents[0]].x, &pop.members()[parents[1]].x);
                let (c1, c2) = sbx(p1, p2, cfg, bounds, rng)?;
                let child = if rng.random::<bool>() { c1 } else { c2 };
                polynomial_mutation(&child, cfg, bounds, rng)?
            }
        };
        members.push(Individual::new(x));
    }
    Ok((Population::new(members)?, origins))
}
