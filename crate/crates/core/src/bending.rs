//! Variational fields and their associated pair.
//!
//! A field `𝓣` along the immersion is an infinitesimal bending when
//! `⟨∂_i 𝓣, e_j⟩ + ⟨e_i, ∂_j 𝓣⟩ = 0`. From `L_i = ∂_i 𝓣` and
//! `B_ij = ∂_i L_j − Γᵏ_ij L_k` one reads off, in the frames of a
//! [`FramedGeometry`]:
//!
//! * `βᵃ_ij = ⟨B_ij, ξ_a⟩` and its shape-operator form `(B_a)ᵏ_j`,
//! * `(𝒴_a)ᵏ = −gᵏʲ ⟨ξ_a, L_j⟩`, the tangent part of `L` on normals,
//! * `𝓔ᵇ_ia = Σ_k (𝒴_a)ᵏ αᵇ_ik + Σ_k (A_a)ᵏ_i ⟨L_k, ξ_b⟩`.
//!
//! `(β, 𝓔)` is the associated pair of `𝓣`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::FramedGeometry;
use crate::numgrid::{gradient, GridField};
use crate::tolerance::{Residual, Tolerance, BEND};

#[derive(Clone, Debug, PartialEq)]
pub struct BendingField {
    t: GridField,
    label: String,
}

impl BendingField {
    pub fn new(t: GridField, label: impl Into<String>) -> Result<Self> {
        if t.shape().len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "bending values must be vectors, got shape {:?}",
                t.shape()
            )));
        }
        if !t.is_finite() {
            return Err(Error::Format("bending has non-finite samples".into()));
        }
        Ok(Self { t, label: label.into() })
    }

    pub fn zero(geom: &FramedGeometry) -> Self {
        Self {
            t: GridField::zeros(geom.grid(), &[geom.m()]),
            label: "zero".into(),
        }
    }

    pub fn field(&self) -> &GridField {
        &self.t
    }

    pub fn at(&self, node: usize) -> &[f64] {
        self.t.at(node)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ambient_dim(&self) -> usize {
        self.t.shape()[0]
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &BendingField, b: f64) -> Result<BendingField> {
        Ok(Self {
            t: self.t.combine(a, &other.t, b)?,
            label: format!("{a}*{} + {b}*{}", self.label, other.label),
        })
    }

    fn check(&self, geom: &FramedGeometry) -> Result<()> {
        if self.t.grid() != geom.grid() || self.ambient_dim() != geom.m() {
            return Err(Error::ShapeMismatch(format!(
                "bending `{}` does not live on the grid and ambient space of `{}`",
                self.label,
                geom.scene().label()
            )));
        }
        Ok(())
    }
}

/// `L` with layout `[i][μ]` and `B` with layout `[i][j][μ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedTensors {
    pub l: GridField,
    pub b: GridField,
}

impl DerivedTensors {
    pub fn compute(geom: &FramedGeometry, t: &BendingField) -> Result<Self> {
        t.check(geom)?;
        let (n, m) = (geom.n(), geom.m());
        let dt = gradient(t.field());
        let l = GridField::from_fn(geom.grid(), &[n, m], |node, _, out| {
            for i in 0..n {
                out[i * m..(i + 1) * m].copy_from_slice(dt[i].at(node));
            }
        });
        Self::from_l(geom, l)
    }

    /// Builds `B` from a given `L` (layout `[i][μ]`), which need not be a
    /// gradient.
    pub fn from_l(geom: &FramedGeometry, l: GridField) -> Result<Self> {
        let (n, m) = (geom.n(), geom.m());
        if l.shape() != [n, m] || l.grid() != geom.grid() {
            return Err(Error::ShapeMismatch(format!("L has shape {:?}, expected [{n}, {m}]", l.shape())));
        }
        let dl = gradient(&l);
        let b = GridField::from_fn(geom.grid(), &[n, n, m], |node, _, out| {
            let lv = l.at(node);
            for i in 0..n {
                let di = dl[i].at(node);
                for j in 0..n {
                    for mu in 0..m {
                        let corr: f64 = (0..n).map(|k| geom.gamma(node, k, i, j) * lv[k * m + mu]).sum();
                        out[(i * n + j) * m + mu] = di[j * m + mu] - corr;
                    }
                }
            }
        });
        Ok(Self { l, b })
    }

    pub fn l(&self, node: usize, i: usize) -> &[f64] {
        let m = self.l.shape()[1];
        &self.l.at(node)[i * m..(i + 1) * m]
    }

    pub fn b(&self, node: usize, i: usize, j: usize) -> &[f64] {
        let (n, m) = (self.b.shape()[0], self.b.shape()[2]);
        &self.b.at(node)[(i * n + j) * m..(i * n + j + 1) * m]
    }

    /// Sup of `|B_ij − B_ji|`, unscaled.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.b.shape()[0];
        let nodes = self.b.grid().node_count();
        let mut worst: f64 = 0.0;
        for node in 0..nodes {
            for i in 0..n {
                for j in 0..i {
                    for (x, y) in self.b(node, i, j).iter().zip(self.b(node, j, i)) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Frame coefficients of `(β, 𝓔)` plus the derived `B_a` and, when the
/// pair came from a bending, `𝒴`.
///
/// Layouts: `beta [i][j][a]`, `e [i][a][b]` holding `𝓔ᵇ_ia`,
/// `bop [a][k][j]` holding `(B_a)ᵏ_j`, `ycal [a][k]` holding `(𝒴_a)ᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociatedPair {
    n: usize,
    p: usize,
    beta: GridField,
    e: GridField,
    bop: GridField,
    ycal: Option<GridField>,
}

impl AssociatedPair {
    /// Builds a pair from `β` and `𝓔` coefficient fields, deriving `B_a`
    /// with the metric of `geom`.
    pub fn from_parts(geom: &FramedGeometry, beta: GridField, e: GridField) -> Result<Self> {
        let (n, p) = (geom.n(), geom.p());
        if beta.grid() != geom.grid() || e.grid() != geom.grid() {
            return Err(Error::ShapeMismatch("pair fields live on a different grid".into()));
        }
        if beta.shape() != [n, n, p] {
            return Err(Error::ShapeMismatch(format!(
                "beta has shape {:?}, expected {:?}",
                beta.shape(),
                [n, n, p]
            )));
        }
        if e.shape() != [n, p, p] {
            return Err(Error::ShapeMismatch(format!(
                "E has shape {:?}, expected {:?}",
                e.shape(),
                [n, p, p]
            )));
        }
        let bop = GridField::from_fn(geom.grid(), &[p, n, n], |node, _, out| {
            let bv = beta.at(node);
            for a in 0..p {
                for k in 0..n {
                    for j in 0..n {
                        out[(a * n + k) * n + j] =
                            (0..n).map(|l| geom.g_inv(node, k, l) * bv[(l * n + j) * p + a]).sum();
                    }
                }
            }
        });
        Ok(Self {
            n,
            p,
            beta,
            e,
            bop,
            ycal: None,
        })
    }

    pub fn zero(geom: &FramedGeometry) -> Self {
        let (n, p) = (geom.n(), geom.p());
        Self::from_parts(
            geom,
            GridField::zeros(geom.grid(), &[n, n, p]),
            GridField::zeros(geom.grid(), &[n, p, p]),
        )
        .expect("shapes match by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn beta(&self, node: usize, i: usize, j: usize, a: usize) -> f64 {
        self.beta.at(node)[(i * self.n + j) * self.p + a]
    }
    /// `𝓔ᵇ_ia`.
    pub fn e(&self, node: usize, i: usize, a: usize, b: usize) -> f64 {
        self.e.at(node)[(i * self.p + a) * self.p + b]
    }
    /// `(B_a)ᵏ_j`.
    pub fn bop(&self, node: usize, a: usize, k: usize, j: usize) -> f64 {
        self.bop.at(node)[(a * self.n + k) * self.n + j]
    }
    pub fn beta_field(&self) -> &GridField {
        &self.beta
    }
    pub fn e_field(&self) -> &GridField {
        &self.e
    }
    pub fn bop_field(&self) -> &GridField {
        &self.bop
    }
    pub fn ycal(&self) -> Option<&GridField> {
        self.ycal.as_ref()
    }

    pub fn beta_max(&self) -> f64 {
        self.beta.max_abs()
    }
    pub fn e_max(&self) -> f64 {
        self.e.max_abs()
    }

    /// `a·self + b·other`, re-deriving `B_a` linearly. `𝒴` is kept only when
    /// both operands carry it.
    pub fn combine(&self, a: f64, other: &AssociatedPair, b: f64) -> Result<AssociatedPair> {
        let ycal = match (&self.ycal, &other.ycal) {
            (Some(x), Some(y)) => Some(x.combine(a, y, b)?),
            _ => None,
        };
        Ok(Self {
            n: self.n,
            p: self.p,
            beta: self.beta.combine(a, &other.beta, b)?,
            e: self.e.combine(a, &other.e, b)?,
            bop: self.bop.combine(a, &other.bop, b)?,
            ycal,
        })
    }

    pub fn scaled(&self, a: f64) -> AssociatedPair {
        Self {
            n: self.n,
            p: self.p,
            beta: self.beta.scaled(a),
            e: self.e.scaled(a),
            bop: self.bop.scaled(a),
            ycal: self.ycal.as_ref().map(|y| y.scaled(a)),
        }
    }

    /// Largest coefficient difference in `β` and `𝓔`.
    pub fn max_abs_diff(&self, other: &AssociatedPair) -> f64 {
        self.beta.max_abs_diff(&other.beta).max(self.e.max_abs_diff(&other.e))
    }

    pub(crate) fn check(&self, geom: &FramedGeometry) -> Result<()> {
        if self.n != geom.n() || self.p != geom.p() || self.beta.grid() != geom.grid() {
            return Err(Error::ShapeMismatch(format!(
                "pair with n = {}, p = {} does not match `{}` (n = {}, p = {})",
                self.n,
                self.p,
                geom.scene().label(),
                geom.n(),
                geom.p()
            )));
        }
        Ok(())
    }
}

/// Normalization for bending-side residuals: `max(1, ‖L‖∞, ‖α‖∞)`.
pub fn bending_scale(geom: &FramedGeometry, derived: &DerivedTensors) -> f64 {
    1f64.max(derived.l.max_abs()).max(geom.alpha_max())
}

/// Per node, the sup over `(i, j)` of `|⟨L_i, e_j⟩ + ⟨e_i, L_j⟩|`.
pub fn bending_residual(geom: &FramedGeometry, t: &BendingField) -> Result<Residual> {
    let derived = DerivedTensors::compute(geom, t)?;
    Ok(bending_residual_of(geom, &derived))
}

pub fn bending_residual_of(geom: &FramedGeometry, derived: &DerivedTensors) -> Residual {
    let n = geom.n();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let per_node = (0..geom.nodes())
        .map(|node| {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in i..n {
                    let v = dot(derived.l(node, i), geom.e(node, j)) + dot(geom.e(node, i), derived.l(node, j));
                    worst = worst.max(v.abs());
                }
            }
            worst
        })
        .collect();
    Residual::new(per_node, bending_scale(geom, derived))
}

/// Associated pair of `t`, refusing fields that fail the bending test at
/// `BEND · h² · factor`.
pub fn associated_pair(
    geom: &FramedGeometry,
    t: &BendingField,
    tol: &Tolerance,
) -> Result<(DerivedTensors, AssociatedPair)> {
    let derived = DerivedTensors::compute(geom, t)?;
    let res = bending_residual_of(geom, &derived).value();
    let limit = tol.tol(BEND);
    if res > limit {
        return Err(Error::NotABending { residual: res, tol: limit });
    }
    let pair = pair_from_derived(geom, &derived);
    Ok((derived, pair))
}

/// The pair formulas applied without the bending precondition.
pub fn associated_pair_unchecked(geom: &FramedGeometry, t: &BendingField) -> Result<(DerivedTensors, AssociatedPair)> {
    let derived = DerivedTensors::compute(geom, t)?;
    let pair = pair_from_derived(geom, &derived);
    Ok((derived, pair))
}

pub fn pair_from_derived(geom: &FramedGeometry, derived: &DerivedTensors) -> AssociatedPair {
    let (n, p) = (geom.n(), geom.p());
    let grid = geom.grid();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let beta = GridField::from_fn(grid, &[n, n, p], |node, _, out| {
        for i in 0..n {
            for j in 0..n {
                for a in 0..p {
                    out[(i * n + j) * p + a] = dot(derived.b(node, i, j), geom.xi(node, a));
                }
            }
        }
    });
    // ⟨L_k, ξ_a⟩, layout [k][a]
    let lxi = GridField::from_fn(grid, &[n, p], |node, _, out| {
        for k in 0..n {
            for a in 0..p {
                out[k * p + a] = dot(derived.l(node, k), geom.xi(node, a));
            }
        }
    });
    let ycal = GridField::from_fn(grid, &[p, n], |node, _, out| {
        let lx = lxi.at(node);
        for a in 0..p {
            for k in 0..n {
                out[a * n + k] = -(0..n).map(|j| geom.g_inv(node, k, j) * lx[j * p + a]).sum::<f64>();
            }
        }
    });
    let e = GridField::from_fn(grid, &[n, p, p], |node, _, out| {
        let (lx, y) = (lxi.at(node), ycal.at(node));
        for i in 0..n {
            for a in 0..p {
                for b in 0..p {
                    out[(i * p + a) * p + b] = (0..n)
                        .map(|k| y[a * n + k] * geom.alpha(node, i, k, b) + geom.shape_op(node, a, k, i) * lx[k * p + b])
                        .sum();
                }
            }
        }
    });
    let mut pair = AssociatedPair::from_parts(geom, beta, e).expect("shapes match by construction");
    pair.ycal = Some(ycal);
    pair
}

/// Sup of `|⟨B_ij, e_k⟩ + Σ_a αᵃ_ij ⟨ξ_a, L_k⟩|`, the defect of
/// `(B(X, Y))_TM = 𝒴 α(X, Y)`, scaled like [`bending_residual`].
pub fn tangential_identity_residual(geom: &FramedGeometry, derived: &DerivedTensors) -> Residual {
    let (n, p) = (geom.n(), geom.p());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let per_node = (0..geom.nodes())
        .map(|node| {
            let lxi: Vec<f64> = (0..n)
                .flat_map(|k| (0..p).map(move |a| (k, a)))
                .map(|(k, a)| dot(derived.l(node, k), geom.xi(node, a)))
                .collect();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = dot(derived.b(node, i, j), geom.e(node, k));
                        for a in 0..p {
                            v += geom.alpha(node, i, j, a) * lxi[k * p + a];
                        }
                        worst = worst.max(v.abs());
                    }
                }
            }
            worst
        })
        .collect();
    Residual::new(per_node, bending_scale(geom, derived))
}

/// Sup of `|𝓔ᵇ_ia + 𝓔ᵃ_ib|`, scaled by `max(1, ‖𝓔‖∞)`.
pub fn compatibility_residual(pair: &AssociatedPair) -> Residual {
    let (n, p) = (pair.n(), pair.p());
    let nodes = pair.e_field().grid().node_count();
    let per_node = (0..nodes)
        .map(|node| {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for a in 0..p {
                    for b in a..p {
                        worst = worst.max((pair.e(node, i, a, b) + pair.e(node, i, b, a)).abs());
                    }
                }
            }
            worst
        })
        .collect();
    Residual::new(per_node, pair.e_max())
}

/// Sup of `|βᵃ_ij − βᵃ_ji|`, unscaled.
pub fn beta_symmetry_defect(pair: &AssociatedPair) -> f64 {
    let (n, p) = (pair.n(), pair.p());
    let nodes = pair.beta_field().grid().node_count();
    let mut worst: f64 = 0.0;
    for node in 0..nodes {
        for i in 0..n {
            for j in 0..i {
                for a in 0..p {
                    worst = worst.max((pair.beta(node, i, j, a) - pair.beta(node, j, i, a)).abs());
                }
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairIdentities {
    pub tangential: f64,
    pub compatibility: f64,
    pub b_symmetry: f64,
    pub beta_symmetry: f64,
}

pub fn pair_identities(geom: &FramedGeometry, derived: &DerivedTensors, pair: &AssociatedPair) -> PairIdentities {
    let scale = bending_scale(geom, derived);
    PairIdentities {
        tangential: tangential_identity_residual(geom, derived).value(),
        compatibility: compatibility_residual(pair).value(),
        b_symmetry: derived.symmetry_defect() / scale,
        beta_symmetry: beta_symmetry_defect(pair) / scale,
    }
}
