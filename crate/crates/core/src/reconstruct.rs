//! Reconstruction of a bending from its pair.
//!
//! The pair prescribes the ambient derivative of an endomorphism field `𝒟`
//! on the frame `[e_1 … e_n ξ_1 … ξ_p]`:
//!
//! ```text
//! (∂_i 𝒟) e_j = Σ_a βᵃ_ij ξ_a
//! (∂_i 𝒟) ξ_a = −Σ_k (B_a)ᵏ_i e_k + Σ_b 𝓔ᵇ_ia ξ_b
//! ```
//!
//! so `∂_i 𝒟 = R_i · Fr⁻¹` with `Fr` the frame matrix. The right-hand side
//! does not involve `𝒟` itself, because the ambient connection is flat.
//! When the fundamental system holds this is integrable, `𝒟` stays skew,
//! and integrating `∂_i 𝓣 = 𝒟 e_i` yields a bending whose pair agrees with
//! the input up to a trivial pair.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bending::{bending_residual, AssociatedPair, BendingField};
use crate::error::{Error, Result};
use crate::fundsys::{verify, SystemReport};
use crate::geometry::FramedGeometry;
use crate::linalg::condition_number;
use crate::numgrid::{loop_residual, periodic_loop, rectangle_loop, sweep, EdgeRhs, GridField};
use crate::tolerance::{Check, Residual, Tolerance, ROUND_TRIP, SKEW, TRIVIAL};

/// Largest admissible condition number of a frame matrix.
pub const FRAME_CONDITION_LIMIT: f64 = 1e6;

/// Per-node ambient endomorphisms, row-major `m × m`, vanishing at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct EndoField {
    pub d: GridField,
    pub base: usize,
}

impl EndoField {
    pub fn at(&self, node: usize) -> DMatrix<f64> {
        let m = self.d.shape()[0];
        DMatrix::from_row_slice(m, m, self.d.at(node))
    }
}

/// Precomputed `∂_i 𝒟` at every node and axis.
pub struct EndoRhs {
    m: usize,
    n: usize,
    /// layout per node `[i][r][c]`
    rates: GridField,
}

impl EndoRhs {
    pub fn new(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<Self> {
        pair.check(geom)?;
        let (n, m, p) = (geom.n(), geom.m(), geom.p());
        let mut rates = GridField::zeros(geom.grid(), &[n, m, m]);
        for node in 0..geom.nodes() {
            let fr = geom.frame_matrix(node);
            let cond = condition_number(&fr);
            if !(cond <= FRAME_CONDITION_LIMIT) {
                return Err(Error::Singular(format!(
                    "frame matrix at node {node} has condition number {cond:.3e}"
                )));
            }
            let inv = fr.try_inverse().ok_or_else(|| Error::Singular(format!("frame matrix at node {node}")))?;
            let out = rates.at_mut(node);
            for i in 0..n {
                let mut r = DMatrix::zeros(m, m);
                for j in 0..n {
                    for a in 0..p {
                        let w = pair.beta(node, i, j, a);
                        for (mu, x) in geom.xi(node, a).iter().enumerate() {
                            r[(mu, j)] += w * x;
                        }
                    }
                }
                for a in 0..p {
                    for k in 0..n {
                        let w = -pair.bop(node, a, k, i);
                        for (mu, x) in geom.e(node, k).iter().enumerate() {
                            r[(mu, n + a)] += w * x;
                        }
                    }
                    for b in 0..p {
                        let w = pair.e(node, i, a, b);
                        for (mu, x) in geom.xi(node, b).iter().enumerate() {
                            r[(mu, n + a)] += w * x;
                        }
                    }
                }
                let di = r * &inv;
                for row in 0..m {
                    for col in 0..m {
                        out[(i * m + row) * m + col] = di[(row, col)];
                    }
                }
            }
        }
        Ok(Self { m, n, rates })
    }
}

impl EdgeRhs for EndoRhs {
    fn eval(&self, node: usize, axis: usize, _value: &[f64]) -> Vec<f64> {
        let mm = self.m * self.m;
        debug_assert!(axis < self.n);
        self.rates.at(node)[axis * mm..(axis + 1) * mm].to_vec()
    }
}

fn endo_scale(pair: &AssociatedPair) -> f64 {
    1f64.max(pair.beta_max()).max(pair.e_max()).max(pair.bop_field().max_abs())
}

/// Change of `𝒟` around each periodic axis through `base`, scaled.
pub fn periodic_holonomy(geom: &FramedGeometry, pair: &AssociatedPair, base: usize) -> Result<Vec<(usize, f64)>> {
    let rhs = EndoRhs::new(geom, pair)?;
    let mm = geom.m() * geom.m();
    let scale = endo_scale(pair);
    (0..geom.n())
        .filter(|&a| geom.grid().is_periodic(a))
        .map(|a| {
            let path = periodic_loop(geom.grid(), base, a)?;
            Ok((a, loop_residual(geom.grid(), &rhs, &vec![0.0; mm], &path)? / scale))
        })
        .collect()
}

/// Integrates `𝒟` along the sweep with axes in `order`, without checking
/// the pair.
pub fn integrate_endo_along(geom: &FramedGeometry, pair: &AssociatedPair, base: usize, order: &[usize]) -> Result<EndoField> {
    let rhs = EndoRhs::new(geom, pair)?;
    let mm = geom.m() * geom.m();
    let values = sweep(geom.grid(), &rhs, base, &vec![0.0; mm], order)?;
    let m = geom.m();
    Ok(EndoField {
        d: GridField::from_values(geom.grid(), &[m, m], values.concat())?,
        base,
    })
}

/// Integrates `𝒟` from `𝒟(base) = 0` over the axis-ordered sweep after
/// checking the fundamental system and the holonomy of periodic axes.
pub fn integrate_endo(geom: &FramedGeometry, pair: &AssociatedPair, base: usize, tol: &Tolerance) -> Result<EndoField> {
    let report = verify(geom, pair, tol)?;
    if !report.pass {
        return Err(Error::SystemViolated(format!(
            "worst residual {:.3e} exceeds {:.3e}",
            report.max(),
            report.tol
        )));
    }
    let limit = tol.tol(TRIVIAL);
    for (axis, holonomy) in periodic_holonomy(geom, pair, base)? {
        if holonomy > limit {
            return Err(Error::PeriodicHolonomy { axis, holonomy, tol: limit });
        }
    }
    let order: Vec<usize> = (0..geom.n()).collect();
    integrate_endo_along(geom, pair, base, &order)
}

/// Sup of `|𝒟 + 𝒟ᵀ|`, scaled by `max(1, ‖𝒟‖∞)`.
pub fn skewness_residual(d: &EndoField) -> Residual {
    let m = d.d.shape()[0];
    let per_node = (0..d.d.grid().node_count())
        .map(|node| {
            let v = d.d.at(node);
            let mut worst: f64 = 0.0;
            for r in 0..m {
                for c in r..m {
                    worst = worst.max((v[r * m + c] + v[c * m + r]).abs());
                }
            }
            worst
        })
        .collect();
    Residual::new(per_node, d.d.max_abs())
}

/// Integrates `∂_i 𝓣 = 𝒟 e_i` from `𝓣(base) = 0`, without the skewness check.
pub fn integrate_bending_unchecked(geom: &FramedGeometry, d: &EndoField, base: usize, order: &[usize]) -> Result<BendingField> {
    let m = geom.m();
    let rhs = |node: usize, axis: usize, _: &[f64]| -> Vec<f64> {
        let dv = d.d.at(node);
        let e = geom.e(node, axis);
        (0..m).map(|r| (0..m).map(|c| dv[r * m + c] * e[c]).sum()).collect()
    };
    let values = sweep(geom.grid(), &rhs, base, &vec![0.0; m], order)?;
    BendingField::new(GridField::from_values(geom.grid(), &[m], values.concat())?, "reconstructed")
}

pub fn integrate_bending(geom: &FramedGeometry, d: &EndoField, base: usize, tol: &Tolerance) -> Result<BendingField> {
    let skew = skewness_residual(d).value();
    let limit = tol.tol(SKEW);
    if skew > limit {
        return Err(Error::NotSkew { residual: skew, tol: limit });
    }
    let order: Vec<usize> = (0..geom.n()).collect();
    integrate_bending_unchecked(geom, d, base, &order)
}

/// Largest loop residual of `𝒟` over all elementary cells and over the
/// whole-chart rectangle of every axis pair, both scaled.
pub fn loop_residuals(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<(f64, f64)> {
    let rhs = EndoRhs::new(geom, pair)?;
    let grid = geom.grid();
    let mm = geom.m() * geom.m();
    let zero = vec![0.0; mm];
    let scale = endo_scale(pair);
    let (mut cells, mut chart): (f64, f64) = (0.0, 0.0);
    for a in 0..grid.dim() {
        for b in a + 1..grid.dim() {
            for node in 0..grid.node_count() {
                if let Ok(path) = rectangle_loop(grid, node, (a, b), (1, 1)) {
                    let idx = grid.multi_index(node);
                    // cells straddling the periodic seam are skipped
                    if idx[a] + 1 >= grid.resolution()[a] || idx[b] + 1 >= grid.resolution()[b] {
                        continue;
                    }
                    cells = cells.max(loop_residual(grid, &rhs, &zero, &path)?);
                }
            }
            let extent = (grid.resolution()[a] - 1, grid.resolution()[b] - 1);
            let path = rectangle_loop(grid, 0, (a, b), extent)?;
            chart = chart.max(loop_residual(grid, &rhs, &zero, &path)?);
        }
    }
    Ok((cells / scale, chart / scale))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub base: usize,
    pub system: SystemReport,
    /// `(axis, scaled holonomy)` for every periodic axis.
    pub holonomy: Vec<(usize, f64)>,
    pub cell_loop: f64,
    pub chart_loop: f64,
    pub skewness: f64,
    pub bending: f64,
    pub path_independence: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Full pipeline: verification, `𝒟`, skewness, `𝓣`, and the loop and
/// transposed-sweep diagnostics.
pub fn reconstruct(
    geom: &FramedGeometry,
    pair: &AssociatedPair,
    base: usize,
    tol: &Tolerance,
) -> Result<(BendingField, ReconstructionReport)> {
    if base >= geom.nodes() {
        return Err(Error::BadParam(format!("base node {base} outside the grid")));
    }
    let system = verify(geom, pair, tol)?;
    let d = integrate_endo(geom, pair, base, tol)?;
    let t = integrate_bending(geom, &d, base, tol)?;
    let holonomy = periodic_holonomy(geom, pair, base)?;
    let (cell_loop, chart_loop) = loop_residuals(geom, pair)?;
    let skewness = skewness_residual(&d).value();
    let bending = bending_residual(geom, &t)?.value();
    let reversed: Vec<usize> = (0..geom.n()).rev().collect();
    let d_rev = integrate_endo_along(geom, pair, base, &reversed)?;
    let path_independence = d.d.max_abs_diff(&d_rev.d) / endo_scale(pair);
    let mut checks = vec![
        Check::at_most("cell_loop", cell_loop, tol.tol(TRIVIAL)),
        Check::at_most("chart_loop", chart_loop, tol.tol(ROUND_TRIP)),
        Check::at_most("skewness", skewness, tol.tol(SKEW)),
        Check::at_most("bending", bending, tol.tol(TRIVIAL)),
        Check::at_most("path_independence", path_independence, tol.tol(ROUND_TRIP)),
    ];
    for &(axis, h) in &holonomy {
        checks.push(Check::at_most(format!("holonomy_axis_{axis}"), h, tol.tol(TRIVIAL)));
    }
    let pass = system.pass && checks.iter().all(|c| c.pass);
    Ok((
        t,
        ReconstructionReport {
            base,
            system,
            holonomy,
            cell_loop,
            chart_loop,
            skewness,
            bending,
            path_independence,
            checks,
            pass,
        },
    ))
}
