//! Shared vector types, Pareto dominance, box-bound handling and evaluation
//! bookkeeping.

use std::ops::{Deref, DerefMut};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A point in decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(pub Vec<f64>);

/// A point in objective space. All objectives are minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl $name {
            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }
    };
}

vector_newtype!(DecisionVector);
vector_newtype!(ObjectiveVector);

/// Outcome of comparing two objective vectors under minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    ADominatesB,
    BDominatesA,
    NonDominated,
    Equal,
}

/// Pareto comparison of `a` against `b`.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<Dominance> {
    check_dim(a.len(), b.len())?;
    Ok(compare_unchecked(a, b))
}

/// Dominance without the length check; callers guarantee equal lengths.
pub(crate) fn compare_unchecked(a: &[f64], b: &[f64]) -> Dominance {
    let mut a_better = false;
    let mut b_better = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            a_better = true;
        } else if y < x {
            b_better = true;
        }
        if a_better && b_better {
            return Dominance::NonDominated;
        }
    }
    match (a_better, b_better) {
        (true, false) => Dominance::ADominatesB,
        (false, true) => Dominance::BDominatesA,
        (false, false) => Dominance::Equal,
        (true, true) => Dominance::NonDominated,
    }
}

/// `true` iff `a` Pareto-dominates `b` (lengths assumed equal).
pub(crate) fn strictly_dominates(a: &[f64], b: &[f64]) -> bool {
    compare_unchecked(a, b) == Dominance::ADominatesB
}

/// Axis-aligned decision-space box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| !(l < u)) {
            return Err(Error::Range(format!(
                "lower[{i}] = {} is not below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn midpoint(&self) -> DecisionVector {
        DecisionVector(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 0.5 * (l + u))
                .collect(),
        )
    }

    pub fn sample_uniform<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DecisionVector {
        DecisionVector(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| l + rng.random::<f64>() * (u - l))
                .collect(),
        )
    }
}

/// Projects `x` onto the box. Entries already inside are returned unchanged.
pub fn clamp(x: &[f64], bounds: &BoxBounds) -> DecisionVector {
    debug_assert_eq!(x.len(), bounds.dim());
    DecisionVector(
        x.iter()
            .zip(bounds.lower.iter().zip(&bounds.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    /// Problem units to the unit cube.
    ToUnit,
    /// Unit cube to problem units.
    FromUnit,
}

/// Affine map between the box and `[0,1]^D`.
pub fn rescale(x: &[f64], bounds: &BoxBounds, direction: ScaleDirection) -> Result<DecisionVector> {
    check_dim(bounds.dim(), x.len())?;
    let pairs = bounds.lower.iter().zip(&bounds.upper);
    match direction {
        ScaleDirection::ToUnit => {
            if !bounds.contains(x) {
                return Err(Error::Range("vector lies outside the box".into()));
            }
            Ok(DecisionVector(
                x.iter().zip(pairs).map(|(v, (l, u))| (v - l) / (u - l)).collect(),
            ))
        }
        ScaleDirection::FromUnit => {
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Range("vector lies outside the unit cube".into()));
            }
            Ok(DecisionVector(
                x.iter().zip(pairs).map(|(v, (l, u))| v * (u - l) + l).collect(),
            ))
        }
    }
}

/// One candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: DecisionVector,
    pub f: Option<ObjectiveVector>,
    /// Cached SPEA2 fitness; `None` until assigned.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(x: DecisionVector) -> Self {
        Self { x, f: None, fitness: None }
    }

    pub fn evaluated(x: DecisionVector, f: ObjectiveVector) -> Self {
        Self { x, f: Some(f), fitness: None }
    }

    pub fn is_evaluated(&self) -> bool {
        self.f.is_some()
    }

    pub fn objectives(&self) -> Result<&[f64]> {
        self.f
            .as_deref()
            .ok_or_else(|| Error::State("individual has not been evaluated".into()))
    }
}

/// An ordered collection of individuals sharing one D and one M.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Population {
    members: Vec<Individual>,
}

impl Population {
    pub fn new(members: Vec<Individual>) -> Result<Self> {
        if let Some(first) = members.first() {
            let dim = first.x.len();
            let n_obj = first.f.as_ref().map(|f| f.len());
            for m in &members {
                check_dim(dim, m.x.len())?;
                if let (Some(expected), Some(f)) = (n_obj, m.f.as_ref()) {
                    check_dim(expected, f.len())?;
                }
            }
        }
        Ok(Self { members })
    }

    /// Convenience constructor for already-evaluated points.
    pub fn from_objectives(objs: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            objs.iter()
                .map(|f| Individual::evaluated(DecisionVector(vec![0.0]), ObjectiveVector(f.clone())))
                .collect(),
        )
    }

    pub fn members(&self) -> &[Individual] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Individual] {
        &mut self.members
    }

    pub fn into_members(self) -> Vec<Individual> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Individual> {
        self.members.iter()
    }

    /// Objective vectors of every member, failing if any is unevaluated.
    pub fn objectives(&self) -> Result<Vec<&[f64]>> {
        self.members.iter().map(Individual::objectives).collect()
    }

    /// Members at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Population {
        Population {
            members: indices.iter().map(|&i| self.members[i].clone()).collect(),
        }
    }

    /// `self ∪ other`, members of `self` first.
    pub fn merged(&self, other: &Population) -> Result<Population> {
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        Population::new(members)
    }
}

impl<'a> IntoIterator for &'a Population {
    type Item = &'a Individual;
    type IntoIter = std::slice::Iter<'a, Individual>;
    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// Something that can be evaluated: a pure map from decision to objective space.
pub trait Objectives {
    fn dim(&self) -> usize;
    fn n_obj(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector>;
}

/// Function-evaluation budget. Only [`evaluate_population`] spends it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeCounter {
    budget: usize,
    used: usize,
}

impl FeCounter {
    pub fn new(budget: usize) -> Self {
        Self { budget, used: 0 }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    fn spend(&mut self, n: usize) -> Result<()> {
        if n > self.remaining() {
            return Err(Error::Budget { requested: n, remaining: self.remaining() });
        }
        self.used += n;
        Ok(())
    }
}

/// Evaluates every member lacking objectives. The budget is charged exactly
/// once per fresh evaluation and checked before any work is done.
pub fn evaluate_population<P: Objectives + ?Sized>(
    problem: &P,
    pop: &mut Population,
    budget: &mut FeCounter,
) -> Result<()> {
    let pending = pop.members.iter().filter(|m| !m.is_evaluated()).count();
    budget.spend(pending)?;
    for m in pop.members.iter_mut().filter(|m| m.f.is_none()) {
        m.f = Some(problem.evaluate(&m.x)?);
    }
    Ok(())
}

/// Seeded random stream. Equal `(seed, stream)` pairs yield equal sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Euclidean distance.
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
