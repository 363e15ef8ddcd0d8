//! The IMF1–IMF10 benchmark suite.
//!
//! Every instance lives on `[0,1]^D` and has the multiplicative form
//! `f = (1 + g(x)) · shape(x1[, x2])`. The first one (two for the
//! tri-objective instances) variables place a point on the front; the rest
//! are linked to `x1` and only contribute through `g`, which vanishes on the
//! Pareto set.
//!
//! | name  | M | front      | linkage `x_i =`                          | g          |
//! |-------|---|------------|------------------------------------------|------------|
//! | IMF1  | 2 | convex     | `x1`                                     | squares    |
//! | IMF2  | 2 | concave    | `x1`                                     | squares    |
//! | IMF3  | 2 | circular   | `x1`                                     | squares    |
//! | IMF4  | 3 | spherical  | `x1`                                     | squares    |
//! | IMF5  | 2 | convex     | `x1^(0.5(1 + 3(i-s)/(D-s)))`             | squares    |
//! | IMF6  | 2 | concave    | as IMF5                                  | squares    |
//! | IMF7  | 2 | circular   | as IMF5                                  | squares    |
//! | IMF8  | 3 | spherical  | as IMF5                                  | squares    |
//! | IMF9  | 2 | convex     | `0.5(1 + sin(6π x1 + iπ/D))`             | squares    |
//! | IMF10 | 2 | convex     | `x1`                                     | Rastrigin  |

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::common::{BoxBounds, DecisionVector, Objectives, ObjectiveVector};
use crate::error::{check_dim, Error, Result};

/// Decision-space sizes used by the experiment presets.
pub const PRESET_DIMS: [usize; 4] = [30, 50, 100, 200];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImfId {
    #[serde(rename = "IMF1")]
    Imf1,
    #[serde(rename = "IMF2")]
    Imf2,
    #[serde(rename = "IMF3")]
    Imf3,
    #[serde(rename = "IMF4")]
    Imf4,
    #[serde(rename = "IMF5")]
    Imf5,
    #[serde(rename = "IMF6")]
    Imf6,
    #[serde(rename = "IMF7")]
    Imf7,
    #[serde(rename = "IMF8")]
    Imf8,
    #[serde(rename = "IMF9")]
    Imf9,
    #[serde(rename = "IMF10")]
    Imf10,
}

impl ImfId {
    pub const ALL: [ImfId; 10] = [
        ImfId::Imf1,
        ImfId::Imf2,
        ImfId::Imf3,
        ImfId::Imf4,
        ImfId::Imf5,
        ImfId::Imf6,
        ImfId::Imf7,
        ImfId::Imf8,
        ImfId::Imf9,
        ImfId::Imf10,
    ];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn n_obj(self) -> usize {
        match self {
            ImfId::Imf4 | ImfId::Imf8 => 3,
            _ => 2,
        }
    }

    fn shape(self) -> Shape {
        match self {
            ImfId::Imf1 | ImfId::Imf5 | ImfId::Imf9 | ImfId::Imf10 => Shape::Convex,
            ImfId::Imf2 | ImfId::Imf6 => Shape::Concave,
            ImfId::Imf3 | ImfId::Imf7 => Shape::Circle,
            ImfId::Imf4 | ImfId::Imf8 => Shape::Sphere,
        }
    }

    fn linkage(self) -> Linkage {
        match self {
            ImfId::Imf1 | ImfId::Imf2 | ImfId::Imf3 | ImfId::Imf4 | ImfId::Imf10 => Linkage::Linear,
            ImfId::Imf5 | ImfId::Imf6 | ImfId::Imf7 | ImfId::Imf8 => Linkage::Power,
            ImfId::Imf9 => Linkage::Sine,
        }
    }

    fn distance(self) -> Distance {
        match self {
            ImfId::Imf10 => Distance::Rastrigin,
            _ => Distance::Squares,
        }
    }
}

impl fmt::Display for ImfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IMF{}", self.index())
    }
}

impl FromStr for ImfId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ImfId::ALL
            .iter()
            .copied()
            .find(|id| id.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Lookup { kind: "problem", name: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Convex,
    Concave,
    Circle,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Linkage {
    Linear,
    Power,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distance {
    Squares,
    Rastrigin,
}

/// One benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    id: ImfId,
    dim: usize,
    bounds: BoxBounds,
}

/// Builds `name` (e.g. `"IMF3"`) with `dim` decision variables.
pub fn make_problem(name: &str, dim: usize) -> Result<Problem> {
    Problem::new(name.parse()?, dim)
}

impl Problem {
    pub fn new(id: ImfId, dim: usize) -> Result<Self> {
        if dim < id.n_obj() {
            return Err(Error::Precondition(format!(
                "{id} needs at least {} decision variables, got {dim}",
                id.n_obj()
            )));
        }
        Ok(Self { id, dim, bounds: BoxBounds::uniform(dim, 0.0, 1.0)? })
    }

    pub fn id(&self) -> ImfId {
        self.id
    }

    pub fn name(&self) -> String {
        self.id.to_string()
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    /// Number of leading position variables.
    fn n_position(&self) -> usize {
        self.id.n_obj() - 1
    }

    /// Value variable `i` (0-based) takes on the Pareto set given `x1`.
    fn linked_value(&self, i: usize, x1: f64) -> f64 {
        let start = self.n_position();
        match self.id.linkage() {
            Linkage::Linear => x1,
            Linkage::Power => {
                let span = (self.dim - 1).saturating_sub(start).max(1) as f64;
                let exponent = 0.5 * (1.0 + 3.0 * (i - start) as f64 / span);
                x1.powf(exponent)
            }
            Linkage::Sine => {
                0.5 * (1.0 + (6.0 * PI * x1 + (i + 1) as f64 * PI / self.dim as f64).sin())
            }
        }
    }

    fn g(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        let residuals = (self.n_position()..self.dim).map(|i| x[i] - self.linked_value(i, x1));
        match self.id.distance() {
            Distance::Squares => residuals.map(|t| t * t).sum(),
            Distance::Rastrigin => residuals
                .map(|t| t * t + 10.0 * (1.0 - (2.0 * PI * t).cos()))
                .sum(),
        }
    }

    fn shape(&self, position: &[f64]) -> Vec<f64> {
        let p = position[0];
        match self.id.shape() {
            Shape::Convex => vec![p, 1.0 - p.sqrt()],
            Shape::Concave => vec![p, 1.0 - p * p],
            Shape::Circle => vec![(FRAC_PI_2 * p).cos(), (FRAC_PI_2 * p).sin()],
            Shape::Sphere => {
                let (a, b) = (FRAC_PI_2 * p, FRAC_PI_2 * position[1]);
                vec![a.cos() * b.cos(), a.cos() * b.sin(), a.sin()]
            }
        }
    }

    /// A Pareto-optimal decision vector for the given position parameters
    /// (`x1`, plus `x2` for the tri-objective instances), each in `[0,1]`.
    pub fn pareto_set_point(&self, position: &[f64]) -> Result<DecisionVector> {
        check_dim(self.n_position(), position.len())?;
        let mut x = vec![0.0; self.dim];
        x[..position.len()].copy_from_slice(position);
        for i in self.n_position()..self.dim {
            x[i] = self.linked_value(i, position[0]);
        }
        Ok(DecisionVector(x))
    }

    /// Evenly spread Pareto-front points. Bi-objective fronts use a uniform
    /// grid of exactly `target` parameter values; tri-objective fronts use a
    /// simplex lattice projected onto the unit sphere, with the division
    /// count whose cardinality `(H+1)(H+2)/2` lands closest to `target`.
    pub fn sample_pf(&self, target: usize) -> Result<Vec<ObjectiveVector>> {
        let m = self.id.n_obj();
        if target < m {
            return Err(Error::Precondition(format!("target size {target} below M = {m}")));
        }
        if m == 2 {
            let last = (target - 1) as f64;
            return Ok((0..target).map(|i| ObjectiveVector(self.shape(&[i as f64 / last]))).collect());
        }
        let divisions = lattice_divisions(target);
        let h = divisions as f64;
        let mut out = Vec::with_capacity((divisions + 1) * (divisions + 2) / 2);
        for i in 0..=divisions {
            for j in 0..=divisions - i {
                let k = divisions - i - j;
                let w = [i as f64 / h, j as f64 / h, k as f64 / h];
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                out.push(ObjectiveVector(w.iter().map(|v| v / norm).collect()));
            }
        }
        Ok(out)
    }

    /// Ideal and nadir points of the true front.
    pub fn front_extent(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.id.n_obj();
        (vec![0.0; m], vec![1.0; m])
    }
}

/// Number of lattice divisions `H` for a 3-simplex whose point count is
/// closest to `target` (ties go to the smaller lattice).
pub fn lattice_divisions(target: usize) -> usize {
    let count = |h: usize| (h + 1) * (h + 2) / 2;
    let mut h = 0;
    while count(h + 1) <= target {
        h += 1;
    }
    if count(h + 1).abs_diff(target) < count(h).abs_diff(target) {
        h + 1
    } else {
        h
    }
}

impl Objectives for Problem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_obj(&self) -> usize {
        self.id.n_obj()
    }

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        check_dim(self.dim, x.len())?;
        if !self.bounds.contains(x) {
            return Err(Error::Range(format!("{} decision vector outside [0,1]^{}", self.id, self.dim)));
        }
        let scale = 1.0 + self.g(x);
        let shape = self.shape(&x[..self.n_position()]);
        Ok(ObjectiveVector(shape.into_iter().map(|s| scale * s).collect()))
    }
}
