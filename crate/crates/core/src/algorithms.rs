//! Complete optimizer runs: GMOEA, its two single-operator ablations, and a
//! plain SPEA2 baseline, all behind [`run`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::common::{evaluate_population, FeCounter, Individual, Objectives, Population, RngStream};
use crate::error::{Error, Result};
use crate::gan::{train, GanConfig, GanPair, LatentModel, LossTrace};
use crate::metrics::{igd, median, nondominated_indices, normalized_hv, wilcoxon_rank_sum, Orientation, Symbol};
use crate::operators::{genetic_reproduce, hybrid_reproduce, VariationConfig};
use crate::problems::{make_problem, Problem};
use crate::selection::{classify, environmental_select, spea2_fitness};

/// Reference-set size used for IGD snapshots.
pub const IGD_REFERENCE_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmTag {
    #[serde(rename = "GMOEA")]
    Gmoea,
    #[serde(rename = "SPEA2")]
    Spea2,
    /// Genetic operators only.
    #[serde(rename = "GMOEA*", alias = "GMOEA_star")]
    GmoeaStar,
    /// Generator only.
    #[serde(rename = "GMOEA-", alias = "GMOEA_minus", alias = "GMOEA−")]
    GmoeaMinus,
}

impl AlgorithmTag {
    pub const ALL: [AlgorithmTag; 4] =
        [AlgorithmTag::Gmoea, AlgorithmTag::Spea2, AlgorithmTag::GmoeaStar, AlgorithmTag::GmoeaMinus];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmTag::Gmoea => "GMOEA",
            AlgorithmTag::Spea2 => "SPEA2",
            AlgorithmTag::GmoeaStar => "GMOEA*",
            AlgorithmTag::GmoeaMinus => "GMOEA-",
        }
    }

    /// Filesystem-safe name.
    pub fn dir_name(self) -> &'static str {
        match self {
            AlgorithmTag::Gmoea => "GMOEA",
            AlgorithmTag::Spea2 => "SPEA2",
            AlgorithmTag::GmoeaStar => "GMOEA_star",
            AlgorithmTag::GmoeaMinus => "GMOEA_minus",
        }
    }

    /// Generator share forced by the tag, if any.
    fn forced_gan_share(self) -> Option<f64> {
        match self {
            AlgorithmTag::GmoeaStar => Some(0.0),
            AlgorithmTag::GmoeaMinus => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for AlgorithmTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "GMOEA" => Ok(AlgorithmTag::Gmoea),
            "SPEA2" => Ok(AlgorithmTag::Spea2),
            "GMOEA*" | "GMOEA_STAR" => Ok(AlgorithmTag::GmoeaStar),
            "GMOEA-" | "GMOEA−" | "GMOEA_MINUS" => Ok(AlgorithmTag::GmoeaMinus),
            _ => Err(Error::Lookup { kind: "algorithm", name: s.to_string() }),
        }
    }
}

/// Population size for an `m`-objective preset.
pub fn preset_pop_size(m: usize) -> usize {
    if m >= 3 {
        105
    } else {
        100
    }
}

/// Evaluation budget for a preset decision dimension.
pub fn preset_budget(dim: usize) -> Option<usize> {
    match dim {
        30 => Some(5_000),
        50 => Some(10_000),
        100 => Some(15_000),
        200 => Some(30_000),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmTag,
    pub problem: String,
    pub dim: usize,
    pub pop_size: usize,
    pub budget: usize,
    pub seed: u64,
    pub variation: VariationConfig,
    pub gan: GanConfig,
    /// Evaluations between indicator snapshots; `None` means one per generation.
    pub trace_every: Option<usize>,
}

impl RunConfig {
    /// Standard population size and budget for `problem` at `dim`.
    pub fn preset(algorithm: AlgorithmTag, problem: &str, dim: usize, seed: u64) -> Result<Self> {
        let p = make_problem(problem, dim)?;
        let budget = preset_budget(dim)
            .ok_or_else(|| Error::Config(format!("no preset budget for D={dim}; use 30, 50, 100 or 200")))?;
        Ok(Self {
            algorithm,
            problem: p.name(),
            dim,
            pop_size: preset_pop_size(p.n_obj()),
            budget,
            seed,
            variation: VariationConfig::default(),
            gan: GanConfig::default(),
            trace_every: None,
        })
    }

    pub fn uses_gan(&self) -> bool {
        self.algorithm != AlgorithmTag::Spea2 && self.effective_variation().gan_share > 0.0
    }

    /// Variation settings with the tag's generator share applied.
    pub fn effective_variation(&self) -> VariationConfig {
        let mut v = self.variation.clone();
        if let Some(share) = self.algorithm.forced_gan_share() {
            v.gan_share = share;
        }
        v
    }

    pub fn validate(&self) -> Result<Problem> {
        let problem = make_problem(&self.problem, self.dim)?;
        if self.pop_size < 2 {
            return Err(Error::Config(format!("pop_size must be at least 2, got {}", self.pop_size)));
        }
        if self.budget < self.pop_size {
            return Err(Error::Config(format!(
                "budget {} cannot evaluate the initial population of {}",
                self.budget, self.pop_size
            )));
        }
        if self.trace_every == Some(0) {
            return Err(Error::Config("trace_every must be positive".into()));
        }
        self.variation.validate()?;
        self.gan.validate()?;
        if self.uses_gan() && self.gan.epochs > 0 && self.pop_size < self.gan.batch {
            return Err(Error::Config(format!(
                "pop_size {} is smaller than the training batch {}",
                self.pop_size, self.gan.batch
            )));
        }
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub fe: usize,
    pub igd: f64,
    pub hv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub fe_used: usize,
    /// Wall-clock milliseconds, or 0 when timing was not requested.
    pub wall_ms: u64,
    pub snapshots: Vec<Snapshot>,
    pub final_objectives: Vec<Vec<f64>>,
    pub final_decisions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub losses: LossTrace,
}

impl RunRecord {
    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn final_igd(&self) -> f64 {
        self.final_snapshot().map_or(f64::NAN, |s| s.igd)
    }

    pub fn final_hv(&self) -> f64 {
        self.final_snapshot().map_or(f64::NAN, |s| s.hv)
    }

    pub fn final_population(&self) -> Result<Population> {
        Population::new(
            self.final_decisions
                .iter()
                .zip(&self.final_objectives)
                .map(|(x, f)| Individual::evaluated(x.clone().into(), f.clone().into()))
                .collect(),
        )
    }
}

/// IGD and normalized HV of the non-dominated part of `pop`.
pub struct Assessor {
    reference: Vec<Vec<f64>>,
    ideal: Vec<f64>,
    nadir: Vec<f64>,
}

impl Assessor {
    pub fn new(problem: &Problem) -> Result<Self> {
        let reference = problem.sample_pf(IGD_REFERENCE_SIZE)?.into_iter().map(|v| v.into_inner()).collect();
        let (ideal, nadir) = problem.front_extent();
        Ok(Self { reference, ideal, nadir })
    }

    pub fn front(pop: &Population) -> Result<Vec<Vec<f64>>> {
        let objs: Vec<Vec<f64>> = pop.objectives()?.into_iter().map(<[f64]>::to_vec).collect();
        Ok(nondominated_indices(&objs).into_iter().map(|i| objs[i].clone()).collect())
    }

    pub fn snapshot(&self, pop: &Population, fe: usize) -> Result<Snapshot> {
        let front = Self::front(pop)?;
        Ok(Snapshot {
            fe,
            igd: igd(&self.reference, &front)?,
            hv: normalized_hv(&front, &self.ideal, &self.nadir)?,
        })
    }
}

struct Tracker {
    assessor: Assessor,
    every: usize,
    last: Option<usize>,
    snapshots: Vec<Snapshot>,
}

impl Tracker {
    fn observe(&mut self, pop: &Population, fe: usize, force: bool) -> Result<()> {
        let due = match self.last {
            None => true,
            Some(last) => fe >= last + self.every || (force && fe > last),
        };
        if due {
            self.snapshots.push(self.assessor.snapshot(pop, fe)?);
            self.last = Some(fe);
        }
        Ok(())
    }
}

struct Setup {
    problem: Problem,
    fe: FeCounter,
    rng: RngStream,
    pop: Population,
    tracker: Tracker,
}

fn initialize(cfg: &RunConfig) -> Result<Setup> {
    let problem = cfg.validate()?;
    let mut fe = FeCounter::new(cfg.budget);
    let mut rng = RngStream::new(cfg.seed, 0);
    let bounds = problem.bounds().clone();
    let mut pop = Population::new((0..cfg.pop_size).map(|_| Individual::new(bounds.sample_uniform(&mut rng))).collect())?;
    evaluate_population(&problem, &mut pop, &mut fe)?;
    let mut tracker = Tracker {
        assessor: Assessor::new(&problem)?,
        every: cfg.trace_every.unwrap_or(cfg.pop_size),
        last: None,
        snapshots: Vec::new(),
    };
    tracker.observe(&pop, fe.used(), true)?;
    Ok(Setup { problem, fe, rng, pop, tracker })
}

fn finish(cfg: &RunConfig, mut s: Setup, losses: LossTrace) -> Result<RunRecord> {
    s.tracker.observe(&s.pop, s.fe.used(), true)?;
    let mut final_objectives = Vec::with_capacity(s.pop.len());
    let mut final_decisions = Vec::with_capacity(s.pop.len());
    for m in s.pop.iter() {
        final_objectives.push(m.objectives()?.to_vec());
        final_decisions.push(m.x.to_vec());
    }
    Ok(RunRecord {
        config: cfg.clone(),
        seed: cfg.seed,
        fe_used: s.fe.used(),
        wall_ms: 0,
        snapshots: s.tracker.snapshots,
        final_objectives,
        final_decisions,
        losses,
    })
}

/// GMOEA and its ablations. Each generation labels the population, trains
/// the generator pair (unless the generator is unused), produces `N`
/// offspring by hybrid reproduction and keeps `N` survivors of `P ∪ Q`. A
/// generation only starts if all `N` offspring fit in the remaining budget.
pub fn run_gmoea(cfg: &RunConfig) -> Result<RunRecord> {
    if cfg.algorithm == AlgorithmTag::Spea2 {
        return Err(Error::Config("run_gmoea called with the SPEA2 tag".into()));
    }
    let mut s = initialize(cfg)?;
    let n = cfg.pop_size;
    let variation = cfg.effective_variation();
    let bounds = s.problem.bounds().clone();
    let mut gan = if cfg.uses_gan() { Some(GanPair::new(cfg.dim, &cfg.gan, &mut s.rng)?) } else { None };
    let mut losses = LossTrace::default();
    let mut generation = 0;
    while s.fe.remaining() >= n {
        let fit = spea2_fitness(&s.pop)?;
        let model = match gan.as_mut() {
            Some(g) => {
                let data = classify(&s.pop, &bounds)?;
                if cfg.gan.reset_optimizers {
                    g.reset_optimizers();
                }
                losses.extend(train(g, &data, cfg.gan.epochs, cfg.gan.batch, generation, &mut s.rng)?);
                Some(LatentModel::fit_real(&data)?)
            }
            None => None,
        };
        let pair = gan.as_ref().zip(model.as_ref());
        let (mut offspring, _) = hybrid_reproduce(&s.pop, &fit, pair, &variation, &bounds, &mut s.rng)?;
        evaluate_population(&s.problem, &mut offspring, &mut s.fe)?;
        s.pop = environmental_select(&s.pop.merged(&offspring)?, n)?;
        generation += 1;
        s.tracker.observe(&s.pop, s.fe.used(), false)?;
    }
    finish(cfg, s, losses)
}

/// SPEA2 with tournament mating and SBX + polynomial mutation, keeping both
/// children of every crossover.
pub fn run_spea2(cfg: &RunConfig) -> Result<RunRecord> {
    let mut s = initialize(cfg)?;
    let n = cfg.pop_size;
    let variation = cfg.variation.clone();
    let bounds = s.problem.bounds().clone();
    while s.fe.remaining() >= n {
        let fit = spea2_fitness(&s.pop)?;
        let mut offspring = genetic_reproduce(&s.pop, &fit, n, &variation, &bounds, &mut s.rng)?;
        evaluate_population(&s.problem, &mut offspring, &mut s.fe)?;
        s.pop = environmental_select(&s.pop.merged(&offspring)?, n)?;
        s.tracker.observe(&s.pop, s.fe.used(), false)?;
    }
    finish(cfg, s, LossTrace::default())
}

pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    match cfg.algorithm {
        AlgorithmTag::Spea2 => run_spea2(cfg),
        _ => run_gmoea(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Indicator {
    Igd,
    Hv,
}

impl Indicator {
    pub fn orientation(self) -> Orientation {
        match self {
            Indicator::Igd => Orientation::LowerIsBetter,
            Indicator::Hv => Orientation::HigherIsBetter,
        }
    }

    pub fn final_value(self, r: &RunRecord) -> f64 {
        match self {
            Indicator::Igd => r.final_igd(),
            Indicator::Hv => r.final_hv(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// Outcome for the first record set relative to the second.
    pub symbol: Symbol,
    pub p_value: f64,
    pub median_a: f64,
    pub median_b: f64,
}

/// Rank-sum comparison of final indicator values. Both sides must share
/// problem, dimension and budget.
pub fn compare(a: &[RunRecord], b: &[RunRecord], indicator: Indicator, alpha: f64) -> Result<Comparison> {
    let key = |r: &RunRecord| (r.config.problem.clone(), r.config.dim, r.config.budget);
    let first = a.first().or(b.first()).map(key);
    if a.iter().chain(b).any(|r| Some(key(r)) != first) {
        return Err(Error::Precondition("compared records differ in problem, dimension or budget".into()));
    }
    let va: Vec<f64> = a.iter().map(|r| indicator.final_value(r)).collect();
    let vb: Vec<f64> = b.iter().map(|r| indicator.final_value(r)).collect();
    let test = wilcoxon_rank_sum(&va, &vb, alpha, indicator.orientation())?;
    Ok(Comparison {
        symbol: test.symbol,
        p_value: test.p_value,
        median_a: median(&va).unwrap_or(f64::NAN),
        median_b: median(&vb).unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(algorithm: AlgorithmTag, budget: usize) -> RunConfig {
        RunConfig {
            algorithm,
            problem: "IMF1".into(),
            dim: 5,
            pop_size: 32,
            budget,
            seed: 3,
            variation: VariationConfig::default(),
            gan: GanConfig { epochs: 2, ..Default::default() },
            trace_every: None,
        }
    }

    #[test]
    fn tags_parse_and_print() {
        for t in AlgorithmTag::ALL {
            assert_eq!(t.as_str().parse::<AlgorithmTag>().unwrap(), t);
            assert_eq!(t.dir_name().parse::<AlgorithmTag>().unwrap(), t);
        }
        assert_eq!("gmoea−".parse::<AlgorithmTag>().unwrap(), AlgorithmTag::GmoeaMinus);
        assert!("NSGA2".parse::<AlgorithmTag>().is_err());
    }

    #[test]
    fn presets() {
        let c = RunConfig::preset(AlgorithmTag::Gmoea, "IMF4", 50, 1).unwrap();
        assert_eq!((c.pop_size, c.budget), (105, 10_000));
        let c = RunConfig::preset(AlgorithmTag::Gmoea, "imf1", 200, 1).unwrap();
        assert_eq!((c.problem.as_str(), c.pop_size, c.budget), ("IMF1", 100, 30_000));
        assert!(matches!(RunConfig::preset(AlgorithmTag::Gmoea, "IMF1", 31, 1), Err(Error::Config(_))));
    }

    #[test]
    fn budget_of_one_population_runs_no_generation() {
        for tag in AlgorithmTag::ALL {
            let r = run(&small(tag, 32)).unwrap();
            assert_eq!(r.fe_used, 32);
            assert_eq!(r.snapshots.len(), 1);
            assert_eq!(r.final_objectives.len(), 32);
            assert!(r.losses.is_empty());
        }
        assert!(matches!(run(&small(AlgorithmTag::Gmoea, 31)), Err(Error::Config(_))));
    }

    #[test]
    fn runs_are_deterministic_and_within_budget() {
        for tag in AlgorithmTag::ALL {
            let cfg = small(tag, 150);
            let a = run(&cfg).unwrap();
            let b = run(&cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.fe_used, 128);
            assert_eq!(a.snapshots.iter().map(|s| s.fe).collect::<Vec<_>>(), vec![32, 64, 96, 128]);
            assert_eq!(a.final_decisions.len(), 32);
        }
    }

    #[test]
    fn ablation_without_generator_skips_training() {
        let r = run(&small(AlgorithmTag::GmoeaStar, 96)).unwrap();
        assert!(r.losses.is_empty());
        let r = run(&small(AlgorithmTag::Gmoea, 96)).unwrap();
        assert_eq!(r.losses.len(), 2 * 2);
    }

    #[test]
    fn comparison_of_identical_sets() {
        let recs: Vec<RunRecord> = (0..3)
            .map(|s| run(&RunConfig { seed: s, ..small(AlgorithmTag::Spea2, 64) }).unwrap())
            .collect();
        let c = compare(&recs, &recs, Indicator::Igd, 0.05).unwrap();
        assert_eq!(c.symbol, Symbol::Similar);
        let mut other = recs.clone();
        other[0].config.dim = 6;
        assert!(compare(&recs, &other, Indicator::Hv, 0.05).is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let cfg = small(AlgorithmTag::Gmoea, 64);
        let mut v = serde_json::to_value(&cfg).unwrap();
        let back: RunConfig = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(back, cfg);
        v.as_object_mut().unwrap().insert("epochz".into(), 3.into());
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }
}
