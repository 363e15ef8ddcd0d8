//! SPEA2 fitness assignment, truncation-based environmental selection, and
//! the real/fake split used to label GAN training data.
//!
//! All distances are Euclidean in objective space.

use std::cmp::Ordering;

use crate::common::{euclid, rescale, strictly_dominates, BoxBounds, DecisionVector, Population, ScaleDirection};
use crate::error::{Error, Result};

/// Per-member SPEA2 quantities, indexed like the input population.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTable {
    pub strength: Vec<usize>,
    pub raw: Vec<f64>,
    pub density: Vec<f64>,
    pub fit: Vec<f64>,
}

impl FitnessTable {
    pub fn len(&self) -> usize {
        self.fit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fit.is_empty()
    }
}

/// Neighbour rank used by the density estimate: `⌊√N⌋`, at least 1.
pub fn density_k(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

fn distance_matrix(objs: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = objs.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclid(objs[i], objs[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

pub(crate) fn fitness_of(objs: &[&[f64]]) -> FitnessTable {
    let n = objs.len();
    let mut dominated_by = vec![Vec::new(); n];
    let mut strength = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && strictly_dominates(objs[i], objs[j]) {
                strength[i] += 1;
                dominated_by[j].push(i);
            }
        }
    }
    let raw: Vec<f64> = dominated_by
        .iter()
        .map(|ds| ds.iter().map(|&i| strength[i] as f64).sum())
        .collect();

    let dist = distance_matrix(objs);
    let k = density_k(n).min(n.saturating_sub(1));
    let density: Vec<f64> = (0..n)
        .map(|i| {
            let sigma = if k == 0 {
                0.0
            } else {
                let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
                let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
                *kth
            };
            1.0 / (sigma + 2.0)
        })
        .collect();
    let fit = raw.iter().zip(&density).map(|(r, d)| r + d).collect();
    FitnessTable { strength, raw, density, fit }
}

/// SPEA2 strength, raw fitness, density and fitness of every member.
pub fn spea2_fitness(pop: &Population) -> Result<FitnessTable> {
    Ok(fitness_of(&pop.objectives()?))
}

/// Indices (ascending) that survive truncating `objs` down to `keep` members.
///
/// Repeatedly drops the member whose sorted list of distances to the other
/// survivors is lexicographically smallest; exact ties go to the lower index.
pub(crate) fn truncate_indices(objs: &[&[f64]], keep: usize) -> Vec<usize> {
    let dist = distance_matrix(objs);
    let mut alive: Vec<usize> = (0..objs.len()).collect();
    while alive.len() > keep {
        let neighbours: Vec<Vec<f64>> = alive
            .iter()
            .map(|&i| {
                let mut row: Vec<f64> = alive.iter().filter(|&&j| j != i).map(|&j| dist[i][j]).collect();
                row.sort_unstable_by(f64::total_cmp);
                row
            })
            .collect();
        let victim = (0..alive.len())
            .min_by(|&a, &b| lexicographic(&neighbours[a], &neighbours[b]).then(a.cmp(&b)))
            .expect("archive is non-empty");
        alive.remove(victim);
    }
    alive
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Shrinks `archive` to `n` members by nearest-neighbour truncation.
pub fn truncate(archive: &Population, n: usize) -> Result<Population> {
    if archive.len() <= n {
        return Err(Error::Precondition(format!(
            "truncation needs more than {n} members, archive has {}",
            archive.len()
        )));
    }
    let objs = archive.objectives()?;
    Ok(archive.subset(&truncate_indices(&objs, n)))
}

/// Indices of the `n` members chosen by SPEA2 environmental selection,
/// together with the fitness table they were chosen by.
pub fn select_indices(pop: &Population, n: usize) -> Result<(Vec<usize>, FitnessTable)> {
    if pop.len() < n {
        return Err(Error::Precondition(format!(
            "cannot select {n} members from a population of {}",
            pop.len()
        )));
    }
    let objs = pop.objectives()?;
    let table = fitness_of(&objs);
    let front: Vec<usize> = (0..pop.len()).filter(|&i| table.fit[i] < 1.0).collect();
    let chosen = match front.len().cmp(&n) {
        Ordering::Less => {
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.sort_by(|&a, &b| table.fit[a].total_cmp(&table.fit[b]));
            order.truncate(n);
            order
        }
        Ordering::Equal => front,
        Ordering::Greater => {
            let front_objs: Vec<&[f64]> = front.iter().map(|&i| objs[i]).collect();
            truncate_indices(&front_objs, n).into_iter().map(|k| front[k]).collect()
        }
    };
    Ok((chosen, table))
}

/// Selects `n` members of `pop`. Survivors carry their fitness within `pop`.
pub fn environmental_select(pop: &Population, n: usize) -> Result<Population> {
    let (chosen, table) = select_indices(pop, n)?;
    let mut out = pop.subset(&chosen);
    for (m, &i) in out.members_mut().iter_mut().zip(&chosen) {
        m.fitness = Some(table.fit[i]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Real,
    Fake,
}

/// Unit-cube decision vectors with real/fake labels, real samples first.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<(DecisionVector, Label)>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn real(&self) -> impl Iterator<Item = &DecisionVector> {
        self.with_label(Label::Real)
    }

    pub fn fake(&self) -> impl Iterator<Item = &DecisionVector> {
        self.with_label(Label::Fake)
    }

    fn with_label(&self, label: Label) -> impl Iterator<Item = &DecisionVector> {
        self.samples.iter().filter(move |(_, l)| *l == label).map(|(x, _)| x)
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|(_, l)| *l == label).count()
    }
}

/// Labels the `⌊N/2⌋` members picked by environmental selection as real and
/// the rest as fake. Odd populations (e.g. 105) get one extra fake sample.
pub fn classify(pop: &Population, bounds: &BoxBounds) -> Result<LabeledDataset> {
    if pop.len() < 2 {
        return Err(Error::Precondition(format!(
            "classification needs at least 2 members, got {}",
            pop.len()
        )));
    }
    let (real, _) = select_indices(pop, pop.len() / 2)?;
    let mut is_real = vec![false; pop.len()];
    for &i in &real {
        is_real[i] = true;
    }
    let to_unit = |i: usize| rescale(&pop.members()[i].x, bounds, ScaleDirection::ToUnit);
    let mut samples = Vec::with_capacity(pop.len());
    for &i in &real {
        samples.push((to_unit(i)?, Label::Real));
    }
    for i in (0..pop.len()).filter(|&i| !is_real[i]) {
        samples.push((to_unit(i)?, Label::Fake));
    }
    Ok(LabeledDataset { samples })
}
