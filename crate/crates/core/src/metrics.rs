//! Quality indicators and the rank-sum significance test.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::common::{compare_unchecked, euclid, Dominance};
use crate::error::{check_dim, Error, Result};

fn common_dim(sets: &[&[Vec<f64>]]) -> Result<usize> {
    let m = sets
        .iter()
        .flat_map(|s| s.first())
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::Precondition("empty point set".into()))?;
    for s in sets {
        for p in s.iter() {
            check_dim(m, p.len())?;
        }
    }
    Ok(m)
}

/// Mean distance from each reference point to its nearest front member.
pub fn igd(reference: &[Vec<f64>], front: &[Vec<f64>]) -> Result<f64> {
    if reference.is_empty() || front.is_empty() {
        return Err(Error::Precondition("IGD needs non-empty reference and front".into()));
    }
    common_dim(&[reference, front])?;
    let total: f64 = reference
        .iter()
        .map(|r| front.iter().map(|f| euclid(r, f)).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(total / reference.len() as f64)
}

/// Points strictly inside the reference box, with dominated and duplicate
/// points removed.
fn nondominated_inside(front: &[Vec<f64>], ref_point: &[f64]) -> Vec<Vec<f64>> {
    let inside: Vec<&Vec<f64>> = front.iter().filter(|p| p.iter().zip(ref_point).all(|(a, r)| a < r)).collect();
    let mut keep: Vec<Vec<f64>> = Vec::new();
    for (i, p) in inside.iter().enumerate() {
        let beaten = inside.iter().enumerate().any(|(j, q)| match compare_unchecked(q, p) {
            Dominance::ADominatesB => true,
            Dominance::Equal => j < i,
            _ => false,
        });
        if !beaten {
            keep.push((*p).clone());
        }
    }
    keep
}

/// Area dominated by a mutually non-dominated 2-D set.
fn hv2(points: &mut [Vec<f64>], r: &[f64]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut area = 0.0;
    let mut ceiling = r[1];
    for p in points.iter() {
        if p[1] < ceiling {
            area += (r[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

fn hv3(points: &mut [Vec<f64>], r: &[f64]) -> f64 {
    points.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut slice: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        slice.push(points[i][..2].to_vec());
        let top = points.get(i + 1).map_or(r[2], |p| p[2]);
        let depth = top - points[i][2];
        if depth > 0.0 {
            volume += hv2(&mut slice, r) * depth;
        }
    }
    volume
}

/// Exact hypervolume dominated by `front` and bounded by `ref_point`.
/// Members not strictly better than the reference point in every objective
/// contribute nothing. Supports two and three objectives.
pub fn hv(front: &[Vec<f64>], ref_point: &[f64]) -> Result<f64> {
    let m = ref_point.len();
    for p in front {
        check_dim(m, p.len())?;
    }
    if !(2..=3).contains(&m) {
        return Err(Error::Unsupported(format!("hypervolume for {m} objectives")));
    }
    let mut points = nondominated_inside(front, ref_point);
    Ok(match m {
        2 => hv2(&mut points, ref_point),
        _ => hv3(&mut points, ref_point),
    })
}

/// Reference coordinate used after normalization.
pub const HV_REFERENCE: f64 = 1.1;

/// Hypervolume after mapping `ideal` to 0 and `nadir` to 1 in every
/// objective, against the reference point `(1.1, …, 1.1)`.
pub fn normalized_hv(front: &[Vec<f64>], ideal: &[f64], nadir: &[f64]) -> Result<f64> {
    check_dim(ideal.len(), nadir.len())?;
    if ideal.iter().zip(nadir).any(|(i, n)| !(n > i)) {
        return Err(Error::Precondition("nadir must exceed ideal in every objective".into()));
    }
    let scaled: Vec<Vec<f64>> = front
        .iter()
        .map(|p| {
            check_dim(ideal.len(), p.len())?;
            Ok(p.iter().zip(ideal.iter().zip(nadir)).map(|(v, (i, n))| (v - i) / (n - i)).collect())
        })
        .collect::<Result<_>>()?;
    hv(&scaled, &vec![HV_REFERENCE; ideal.len()])
}

/// Indices of the members of `points` not dominated by any other member.
/// Duplicates are all kept.
pub fn nondominated_indices(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| compare_unchecked(q, &points[i]) == Dominance::ADominatesB))
        .collect()
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linearly interpolated sample quantile (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let v = sorted(values);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    Some(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// Which direction of an indicator counts as better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    LowerIsBetter,
    HigherIsBetter,
}

/// Outcome of comparing a sample against a reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Significantly better than the reference.
    #[serde(rename = "+")]
    Better,
    /// Significantly worse than the reference.
    #[serde(rename = "−")]
    Worse,
    #[serde(rename = "≈")]
    Similar,
}

impl Symbol {
    pub fn flipped(self) -> Self {
        match self {
            Symbol::Better => Symbol::Worse,
            Symbol::Worse => Symbol::Better,
            Symbol::Similar => Symbol::Similar,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Better => "+",
            Symbol::Worse => "−",
            Symbol::Similar => "≈",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    pub symbol: Symbol,
    pub p_value: f64,
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub exact: bool,
}

/// Mid-ranks (1-based) of the pooled sample, plus the tie group sizes.
fn mid_ranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let rank = 0.5 * ((i + 1) + j) as f64;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided exact p-value of rank sum `w` for a size-`n1` subset of
/// `ranks`, counting subsets by dynamic programming over doubled ranks.
fn exact_p(ranks: &[f64], n1: usize, w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: number of k-subsets with doubled sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = counts[k - 1][s - r];
                if add != 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    let target = (2.0 * w).round() as usize;
    let total: f64 = counts[n1].iter().sum();
    let lower: f64 = counts[n1][..=target].iter().sum();
    let upper: f64 = counts[n1][target..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// Two-sided Wilcoxon rank-sum test of `a` against the reference sample `b`.
///
/// Small samples (smaller side under 10 and fewer than 20 values in total)
/// use the exact null distribution of the mid-rank sum; larger ones use the
/// normal approximation with tie and continuity corrections. When
/// `p < alpha` the symbol compares medians (then mean ranks) under
/// `orientation`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], alpha: f64, orientation: Orientation) -> Result<RankSumResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::Precondition(format!("rank-sum test needs at least 2 values per side, got {n1} and {n2}")));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Precondition("rank-sum test input contains NaN".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let (ranks, ties) = mid_ranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();
    if ties.len() == 1 {
        return Ok(RankSumResult { symbol: Symbol::Similar, p_value: 1.0, statistic: w, exact: false });
    }
    let exact = n1.min(n2) < 10 && n < 20;
    let p_value = if exact {
        exact_p(&ranks, n1, w)
    } else {
        let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
        let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term);
        let centered = w - n1f * (nf + 1.0) / 2.0;
        let z = (centered - 0.5 * centered.signum()) / var.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
    };
    let symbol = if p_value >= alpha {
        Symbol::Similar
    } else {
        let (ma, mb) = (median(a).unwrap(), median(b).unwrap());
        let order = match ma.partial_cmp(&mb) {
            Some(Ordering::Equal) | None => {
                let mean_a = w / n1 as f64;
                let mean_b = ranks[n1..].iter().sum::<f64>() / n2 as f64;
                mean_a.total_cmp(&mean_b)
            }
            Some(o) => o,
        };
        let a_lower = match order {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => return Ok(RankSumResult { symbol: Symbol::Similar, p_value, statistic: w, exact }),
        };
        if a_lower == (orientation == Orientation::LowerIsBetter) {
            Symbol::Better
        } else {
            Symbol::Worse
        }
    };
    Ok(RankSumResult { symbol, p_value, statistic: w, exact })
}
