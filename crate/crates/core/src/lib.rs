//! Multiobjective evolutionary optimization driven by a small generative
//! adversarial network.
//!
//! Each generation the population is split into a *real* half (the SPEA2
//! survivors) and a *fake* half, a generator/discriminator pair is trained on
//! that labelled data, and offspring are drawn either from the generator or
//! from SBX + polynomial mutation.
//!
//! Module layout:
//!
//! * [`common`] – decision/objective vectors, dominance, bounds, FE accounting
//! * [`problems`] – the IMF1–IMF10 benchmark suite and Pareto-front samplers
//! * [`selection`] – SPEA2 fitness, truncation and real/fake classification
//! * [`nn`] – a minimal MLP with exact backpropagation and Adam
//! * [`gan`] – latent Gaussian model, adversarial training, offspring sampling
//! * [`operators`] – SBX, polynomial mutation, tournaments, hybrid reproduction
//! * [`metrics`] – IGD, hypervolume and the Wilcoxon rank-sum test
//! * [`algorithms`] – GMOEA, its ablations, and the SPEA2 baseline

pub mod algorithms;
pub mod common;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod operators;
pub mod problems;
pub mod selection;

pub use common::{
    clamp, dominates, evaluate_population, rescale, BoxBounds, DecisionVector, Dominance,
    FeCounter, Individual, ObjectiveVector, Population, RngStream, ScaleDirection,
};
pub use error::{Error, Result};
