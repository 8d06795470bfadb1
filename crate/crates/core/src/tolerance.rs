//! Resolution-aware tolerances and pass/fail bookkeeping.
//!
//! Every numerical check in the crate is of the form
//! `residual / scale <= c · h² · factor`, where `h` is the largest grid
//! spacing, `scale` a magnitude normalization chosen per check, `c` one of
//! the constants below and `factor` a global multiplier (the CLI's
//! `--tol-scale`).

use serde::Serialize;

use crate::numgrid::ChartGrid;

/// Infinitesimal-bending condition.
pub const BEND: f64 = 10.0;
/// Structure equations of the immersion itself.
pub const STRUCTURE: f64 = 20.0;
/// Fundamental system of a pair.
pub const SYSTEM: f64 = 20.0;
/// Tangential identity and compatibility of an extracted pair.
pub const PAIR_IDENTITY: f64 = 10.0;
/// Skewness of the integrated endomorphism field.
pub const SKEW: f64 = 20.0;
/// Triviality verdicts and reconstruction-side checks.
pub const TRIVIAL: f64 = 30.0;
/// Round trips, path independence, tensor recovery.
pub const ROUND_TRIP: f64 = 50.0;
/// Cross-factor components on products.
pub const ADAPTED: f64 = 10.0;

/// Relative threshold for numerical rank decisions.
pub const RANK_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerance {
    pub h: f64,
    pub factor: f64,
}

impl Tolerance {
    pub fn new(h: f64, factor: f64) -> Self {
        Self { h, factor }
    }

    pub fn for_grid(grid: &ChartGrid) -> Self {
        Self::new(grid.max_spacing(), 1.0)
    }

    pub fn with_factor(self, factor: f64) -> Self {
        Self { factor, ..self }
    }

    /// `c · h² · factor`.
    pub fn tol(&self, c: f64) -> f64 {
        c * self.h * self.h * self.factor
    }
}

/// Sup-norm residual with the per-node values kept for field dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub per_node: Vec<f64>,
    pub scale: f64,
}

impl Residual {
    pub fn new(per_node: Vec<f64>, scale: f64) -> Self {
        Self {
            per_node,
            scale: scale.max(1.0),
        }
    }

    pub fn zero(nodes: usize) -> Self {
        Self::new(vec![0.0; nodes], 1.0)
    }

    /// Unnormalized sup over nodes.
    pub fn raw(&self) -> f64 {
        self.per_node.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// `raw / scale`, the quantity compared against tolerances.
    pub fn value(&self) -> f64 {
        self.raw() / self.scale
    }

    pub fn worst_node(&self) -> usize {
        self.per_node
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }
}

/// A named check with its margin. For upper-bound checks the margin is
/// `tol / value`; for lower-bound checks it is `value / tol`. Either way a
/// margin ≥ 1 means the check passed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    pub margin: f64,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        let pass = value <= tol;
        let margin = if value == 0.0 { f64::INFINITY } else { tol / value };
        Self {
            name: name.into(),
            value,
            tol,
            pass,
            margin,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        let pass = value >= tol;
        let margin = if tol == 0.0 { f64::INFINITY } else { value / tol };
        Self {
            name: name.into(),
            value,
            tol,
            pass,
            margin,
        }
    }
}
