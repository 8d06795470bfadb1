//! Extrinsic products, adapted pairs, s-nullities and splitting of
//! bendings into factor bendings.
//!
//! The extrinsic product of `f_i: M_i → ℝ^{m_i}` is the immersion
//! `f(x_1, …, x_r) = (f_1(x_1), …, f_r(x_r))` of the product chart. A
//! tensor is adapted when its components mixing axes of different factors
//! vanish.
//!
//! The s-nullity at a node is the largest dimension of the kernel
//! `{X : α_U(X, ·) = 0}` over `s`-dimensional normal subspaces `U`, with
//! `α_U` the projection of `α` onto `U`. It is estimated from below by
//! searching the Grassmannian; every value comes with the subspace that
//! certifies it.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bending::{associated_pair, AssociatedPair, BendingField};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, first_non_full_node, FramedGeometry, ImmersionScene};
use crate::linalg::{numerical_rank, singular_values};
use crate::numgrid::{sweep, ChartGrid, GridField};
use crate::tolerance::{Check, Residual, Tolerance, ADAPTED, BEND, RANK_THRESHOLD};

/// Default seed for every randomized search and test in the crate.
pub const DEFAULT_SEED: u64 = 0x5EED;
/// Grassmannian samples per s-nullity evaluation.
pub const GRASSMANN_SAMPLES: usize = 2000;
/// Coordinate-ascent steps of the local refinement.
pub const REFINE_STEPS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ProductStructure {
    pub factors: Vec<ImmersionScene>,
    /// Chart axes of each factor.
    pub axes: Vec<Range<usize>>,
    /// Ambient coordinates of each factor.
    pub blocks: Vec<Range<usize>>,
}

impl ProductStructure {
    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Factor owning chart axis `axis`.
    pub fn factor_of_axis(&self, axis: usize) -> usize {
        self.axes.iter().position(|r| r.contains(&axis)).expect("axis in range")
    }

    /// Node of factor `i` under the product node `node`.
    pub fn factor_node(&self, grid: &ChartGrid, node: usize, i: usize) -> usize {
        let idx = grid.multi_index(node);
        self.factors[i].grid().node(&idx[self.axes[i].clone()])
    }

    fn check(&self, geom: &FramedGeometry) -> Result<()> {
        let n: usize = self.factors.iter().map(|f| f.dim()).sum();
        let m: usize = self.factors.iter().map(|f| f.ambient_dim()).sum();
        if n != geom.n() || m != geom.m() {
            return Err(Error::ShapeMismatch(format!(
                "product structure has n = {n}, m = {m}; scene has n = {}, m = {}",
                geom.n(),
                geom.m()
            )));
        }
        Ok(())
    }
}

/// Product scene of `factors` on the Cartesian product of their grids.
pub fn extrinsic_product(factors: &[ImmersionScene]) -> Result<(ImmersionScene, ProductStructure)> {
    if factors.is_empty() {
        return Err(Error::BadParam("a product needs at least one factor".into()));
    }
    let mut bounds = Vec::new();
    let mut resolution = Vec::new();
    let mut periodic = Vec::new();
    let (mut axes, mut blocks) = (Vec::new(), Vec::new());
    let (mut n, mut m) = (0, 0);
    for f in factors {
        let g = f.grid();
        bounds.extend_from_slice(g.bounds());
        resolution.extend_from_slice(g.resolution());
        periodic.extend_from_slice(g.periodic());
        axes.push(n..n + f.dim());
        blocks.push(m..m + f.ambient_dim());
        n += f.dim();
        m += f.ambient_dim();
    }
    let grid = ChartGrid::new(bounds, resolution, periodic)?;
    let structure = ProductStructure {
        factors: factors.to_vec(),
        axes,
        blocks,
    };
    let map = GridField::from_fn(&grid, &[m], |node, _, out| {
        for (i, f) in factors.iter().enumerate() {
            let fnode = structure.factor_node(&grid, node, i);
            out[structure.blocks[i].clone()].copy_from_slice(f.map().at(fnode));
        }
    });
    let label = factors.iter().map(|f| f.label()).collect::<Vec<_>>().join(" × ");
    Ok((ImmersionScene::new(map, label)?, structure))
}

/// Sup of the cross-factor components `αᵃ_jk`, scaled by `max(1, ‖α‖∞)`.
pub fn cross_alpha_residual(geom: &FramedGeometry, structure: &ProductStructure) -> Result<Residual> {
    structure.check(geom)?;
    let al = geom.second_fundamental_form();
    Ok(cross_residual(geom, structure, al, geom.alpha_max()))
}

fn cross_residual(geom: &FramedGeometry, structure: &ProductStructure, t: &GridField, scale: f64) -> Residual {
    let (n, p) = (geom.n(), geom.p());
    let per_node = (0..geom.nodes())
        .map(|node| {
            let v = t.at(node);
            let mut worst: f64 = 0.0;
            for j in 0..n {
                for k in 0..n {
                    if structure.factor_of_axis(j) == structure.factor_of_axis(k) {
                        continue;
                    }
                    for a in 0..p {
                        worst = worst.max(v[(j * n + k) * p + a].abs());
                    }
                }
            }
            worst
        })
        .collect();
    Residual::new(per_node, scale)
}

/// Sup of the cross-factor components `βᵃ_jk`, scaled by `max(1, ‖β‖∞)`.
pub fn adaptedness_residual(geom: &FramedGeometry, pair: &AssociatedPair, structure: &ProductStructure) -> Result<Residual> {
    structure.check(geom)?;
    pair.check(geom)?;
    Ok(cross_residual(geom, structure, pair.beta_field(), pair.beta_max()))
}

/// Sup of the cross-factor components of `𝓔`: `𝓔ᵇ_ia` with `ξ_a`, `ξ_b`
/// normal to different factors, or `∂_i` tangent to a factor other than the
/// one both normals belong to. Normals are attributed to the factor whose
/// ambient block carries most of their length.
pub fn e_adaptedness_residual(geom: &FramedGeometry, pair: &AssociatedPair, structure: &ProductStructure) -> Result<Residual> {
    structure.check(geom)?;
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let per_node = (0..geom.nodes())
        .map(|node| {
            let owner: Vec<usize> = (0..p)
                .map(|a| {
                    let xi = geom.xi(node, a);
                    let mass: Vec<f64> = structure.blocks.iter().map(|b| xi[b.clone()].iter().map(|v| v * v).sum()).collect();
                    (0..mass.len()).fold(0, |best, i| if mass[i] > mass[best] { i } else { best })
                })
                .collect();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let fi = structure.factor_of_axis(i);
                for a in 0..p {
                    for b in 0..p {
                        if owner[a] != owner[b] || owner[a] != fi {
                            worst = worst.max(pair.e(node, i, a, b).abs());
                        }
                    }
                }
            }
            worst
        })
        .collect();
    Ok(Residual::new(per_node, pair.e_max()))
}

/// Result of an s-nullity search at one node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SNullity {
    pub node: usize,
    pub s: usize,
    /// Certified lower bound (exact when `exact`).
    pub value: usize,
    /// Orthonormal basis of the certifying subspace, as columns of normal
    /// frame coefficients (`p × s`, row-major).
    pub subspace: Vec<f64>,
    pub exact: bool,
    pub samples: usize,
}

/// `Σ_a U_ac αᵃ` for every column `c`, stacked into an `(s·n) × n` matrix
/// in an orthonormal tangent frame.
fn projected_alpha(geom: &FramedGeometry, node: usize, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (geom.n(), geom.p());
    let g = DMatrix::from_fn(n, n, |i, j| geom.g(node, i, j));
    let eig = g.symmetric_eigen();
    let ginv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let s = u.ncols();
    let mut out = DMatrix::zeros(s * n, n);
    for c in 0..s {
        let mut mc = DMatrix::zeros(n, n);
        for a in 0..p {
            let w = u[(a, c)];
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    mc[(i, j)] += w * geom.alpha(node, i, j, a);
                }
            }
        }
        let mc = &ginv_sqrt * mc * &ginv_sqrt;
        out.view_mut((c * n, 0), (n, n)).copy_from(&mc);
    }
    out
}

fn kernel_dim(geom: &FramedGeometry, node: usize, u: &DMatrix<f64>, scale: f64) -> usize {
    let m = projected_alpha(geom, node, u);
    let rank = if m.amax() <= RANK_THRESHOLD * scale {
        0
    } else {
        numerical_rank(&(m / scale), RANK_THRESHOLD)
    };
    geom.n() - rank
}

/// Smallest singular value that would have to vanish to raise the kernel
/// dimension above `current`.
fn surrogate(geom: &FramedGeometry, node: usize, u: &DMatrix<f64>, current: usize) -> f64 {
    let sv = singular_values(&projected_alpha(geom, node, u));
    let n = geom.n();
    if current >= n {
        return 0.0;
    }
    sv.get(n - current - 1).copied().unwrap_or(0.0)
}

fn haar(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..p {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

fn givens(q: &DMatrix<f64>, a: usize, b: usize, theta: f64) -> DMatrix<f64> {
    let mut out = q.clone();
    let (c, s) = (theta.cos(), theta.sin());
    for r in 0..q.nrows() {
        let (x, y) = (q[(r, a)], q[(r, b)]);
        out[(r, a)] = c * x - s * y;
        out[(r, b)] = s * x + c * y;
    }
    out
}

/// Certified lower bound for the s-nullity at `node`.
pub fn s_nullity(geom: &FramedGeometry, node: usize, s: usize, seed: u64) -> Result<SNullity> {
    s_nullity_with(geom, node, s, seed, GRASSMANN_SAMPLES)
}

pub fn s_nullity_with(geom: &FramedGeometry, node: usize, s: usize, seed: u64, samples: usize) -> Result<SNullity> {
    let p = geom.p();
    if s == 0 || s > p {
        return Err(Error::BadParam(format!("s = {s} outside 1..={p}")));
    }
    if node >= geom.nodes() {
        return Err(Error::BadParam(format!("node {node} outside the grid")));
    }
    let scale = geom.alpha_max().max(1.0);
    let finish = |q: &DMatrix<f64>, value: usize, exact: bool, samples: usize| {
        let u = q.columns(0, s).into_owned();
        SNullity {
            node,
            s,
            value,
            subspace: (0..p).flat_map(|r| (0..s).map(move |c| (r, c))).map(|(r, c)| u[(r, c)]).collect(),
            exact,
            samples,
        }
    };
    if s == p {
        let q = DMatrix::identity(p, p);
        let v = kernel_dim(geom, node, &q, scale);
        return Ok(finish(&q, v, true, 1));
    }
    let mut candidates: Vec<DMatrix<f64>> = Vec::new();
    // coordinate subspaces of the normal frame
    for subset in subsets(p, s) {
        let mut q = DMatrix::zeros(p, p);
        let rest: Vec<usize> = (0..p).filter(|a| !subset.contains(a)).collect();
        for (c, &a) in subset.iter().chain(&rest).enumerate() {
            q[(a, c)] = 1.0;
        }
        candidates.push(q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (node as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ s as u64);
    for _ in 0..samples {
        candidates.push(haar(p, &mut rng));
    }
    let mut scored: Vec<(usize, f64, DMatrix<f64>)> = candidates
        .into_iter()
        .map(|q| {
            let u = q.columns(0, s).into_owned();
            let d = kernel_dim(geom, node, &u, scale);
            let sur = surrogate(geom, node, &u, d);
            (d, sur, q)
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let (mut best_d, _, mut best_q) = scored[0].clone();
    // refine the few most promising samples by coordinate ascent on angles
    for (d0, _, q0) in scored.into_iter().take(4) {
        let mut q = q0;
        let mut d = d0;
        let mut step = 0.25;
        let mut score = surrogate(geom, node, &q.columns(0, s).into_owned(), d);
        for _ in 0..REFINE_STEPS {
            let mut improved = false;
            for a in 0..s {
                for b in s..p {
                    for theta in [step, -step] {
                        let cand = givens(&q, a, b, theta);
                        let u = cand.columns(0, s).into_owned();
                        let sc = surrogate(geom, node, &u, d);
                        if sc < score {
                            q = cand;
                            score = sc;
                            improved = true;
                        }
                    }
                }
            }
            let now = kernel_dim(geom, node, &q.columns(0, s).into_owned(), scale);
            if now > d {
                d = now;
                score = surrogate(geom, node, &q.columns(0, s).into_owned(), d);
            }
            if !improved {
                step *= 0.5;
            }
        }
        if d > best_d {
            best_d = d;
            best_q = q;
        }
    }
    Ok(finish(&best_q, best_d, false, samples + subsets(p, s).len()))
}

fn subsets(p: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, p: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for a in start..p {
            cur.push(a);
            rec(a + 1, p, s, cur, out);
            cur.pop();
        }
    }
    rec(0, p, s, &mut cur, &mut out);
    out
}

/// Default node sample: the 3×3×… lattice of corners, edge midpoints and
/// center for `n ≤ 2`, otherwise the center plus the `2ⁿ` corners of the
/// quarter box, truncated to nine nodes.
pub fn default_nodes(grid: &ChartGrid) -> Vec<usize> {
    let picks = |r: usize| [0, r / 2, r - 1];
    if grid.dim() <= 2 {
        let mut out = Vec::new();
        let r0 = picks(grid.resolution()[0]);
        if grid.dim() == 1 {
            return r0.iter().map(|&i| grid.node(&[i])).collect();
        }
        for &i in &r0 {
            for &j in &picks(grid.resolution()[1]) {
                out.push(grid.node(&[i, j]));
            }
        }
        return out;
    }
    let mut out = vec![grid.center_node()];
    for corner in 0..(1usize << grid.dim()) {
        if out.len() == 9 {
            break;
        }
        let idx: Vec<usize> = (0..grid.dim())
            .map(|a| {
                let r = grid.resolution()[a];
                if corner >> a & 1 == 1 {
                    3 * r / 4
                } else {
                    r / 4
                }
            })
            .collect();
        out.push(grid.node(&idx));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullityBound {
    pub s: usize,
    /// Largest certified `ν_s` over the sampled nodes.
    pub nu: usize,
    pub worst_node: usize,
    pub bound_weak: i64,
    pub pass_weak: bool,
    pub bound_strong: i64,
    pub pass_strong: bool,
    /// A passing verdict whose certified value is within one of a bound.
    pub sampling_limited: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorCodim {
    pub factor: usize,
    pub n: usize,
    pub p: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub nodes: Vec<usize>,
    pub bounds: Vec<NullityBound>,
    /// `ν_s < n − s` for every `s`.
    pub pass_weak: bool,
    /// `ν_s < n − 2s` for every `s`.
    pub pass_strong: bool,
    pub factor_codims: Vec<FactorCodim>,
    /// `p_i < n_i` for every factor.
    pub pass_factor_codims: bool,
    /// `p < n` for the product.
    pub pass_codim: bool,
    /// Every factor has dimension at least 2.
    pub factor_dims_ok: bool,
}

impl HypothesisReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for b in &self.bounds {
            out.push(Check::at_most(format!("nu_{} < n - {}", b.s, b.s), b.nu as f64, (b.bound_weak - 1) as f64));
            out.push(Check::at_most(format!("nu_{} < n - 2*{}", b.s, b.s), b.nu as f64, (b.bound_strong - 1) as f64));
        }
        out
    }
}

/// Evaluates the nullity inequalities and codimension conditions of a
/// product at `nodes` (default sample when `None`).
pub fn product_hypotheses(
    geom: &FramedGeometry,
    structure: &ProductStructure,
    nodes: Option<&[usize]>,
    seed: u64,
) -> Result<HypothesisReport> {
    structure.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let nodes: Vec<usize> = nodes.map(<[usize]>::to_vec).unwrap_or_else(|| default_nodes(geom.grid()));
    let mut bounds = Vec::new();
    for s in 1..=p {
        let mut nu = 0;
        let mut worst_node = nodes.first().copied().unwrap_or(0);
        for &node in &nodes {
            let r = s_nullity(geom, node, s, seed)?;
            if r.value > nu {
                nu = r.value;
                worst_node = node;
            }
        }
        let bound_weak = n as i64 - s as i64;
        let bound_strong = n as i64 - 2 * s as i64;
        let pass_weak = (nu as i64) < bound_weak;
        let pass_strong = (nu as i64) < bound_strong;
        let sampling_limited =
            (pass_weak && nu as i64 + 1 == bound_weak) || (pass_strong && nu as i64 + 1 == bound_strong);
        bounds.push(NullityBound {
            s,
            nu,
            worst_node,
            bound_weak,
            pass_weak,
            bound_strong,
            pass_strong,
            sampling_limited,
        });
    }
    let factor_codims: Vec<FactorCodim> = structure
        .factors
        .iter()
        .enumerate()
        .map(|(i, f)| FactorCodim {
            factor: i,
            n: f.dim(),
            p: f.codim(),
            pass: f.codim() < f.dim(),
        })
        .collect();
    Ok(HypothesisReport {
        nodes,
        pass_weak: bounds.iter().all(|b| b.pass_weak),
        pass_strong: bounds.iter().all(|b| b.pass_strong),
        bounds,
        pass_factor_codims: factor_codims.iter().all(|f| f.pass),
        factor_codims,
        pass_codim: p < n,
        factor_dims_ok: structure.factors.iter().all(|f| f.dim() >= 2),
    })
}

#[derive(Clone, Debug)]
pub struct SplitReport {
    pub factors: Vec<BendingField>,
    pub factor_geometries: Vec<FramedGeometry>,
    pub adaptedness: f64,
    /// How far each factor block of `L` varies along the other factors.
    pub constancy: f64,
    /// Bending residual of each recovered factor field on its factor.
    pub factor_bending: Vec<f64>,
    pub residual: f64,
    pub tol: f64,
}

/// Splits a bending of an extrinsic product with full first normal spaces
/// into bendings of the factors, each vanishing at the base node.
pub fn split_bending(
    geom: &FramedGeometry,
    structure: &ProductStructure,
    t: &BendingField,
    base: usize,
    tol: &Tolerance,
) -> Result<SplitReport> {
    structure.check(geom)?;
    if base >= geom.nodes() {
        return Err(Error::BadParam(format!("base node {base} outside the grid")));
    }
    let (derived, pair) = associated_pair(geom, t, tol)?;
    let adaptedness = adaptedness_residual(geom, &pair, structure)?.value();
    let limit = tol.tol(ADAPTED);
    if adaptedness > limit {
        return Err(Error::Precondition(format!(
            "β is not adapted to the product (cross components {adaptedness:.3e} > {limit:.3e})"
        )));
    }
    if let Some((node, rank)) = first_non_full_node(geom) {
        return Err(Error::FirstNormalNotFull {
            node,
            rank,
            codim: geom.p(),
        });
    }
    let grid = geom.grid();
    let base_idx = grid.multi_index(base);
    let l_scale = derived.l.max_abs().max(1.0);
    let mut constancy: f64 = 0.0;
    let mut factors = Vec::new();
    let mut factor_geometries = Vec::new();
    let mut factor_bending = Vec::new();
    for (i, scene) in structure.factors.iter().enumerate() {
        let fgrid = scene.grid();
        let (axes, block) = (structure.axes[i].clone(), structure.blocks[i].clone());
        let (ni, mi) = (axes.len(), block.len());
        let lift = |fnode: usize| -> usize {
            let mut idx = base_idx.clone();
            idx[axes.clone()].copy_from_slice(&fgrid.multi_index(fnode));
            grid.node(&idx)
        };
        let li = GridField::from_fn(fgrid, &[ni, mi], |fnode, _, out| {
            let pnode = lift(fnode);
            for (a, axis) in axes.clone().enumerate() {
                out[a * mi..(a + 1) * mi].copy_from_slice(&derived.l(pnode, axis)[block.clone()]);
            }
        });
        for node in 0..geom.nodes() {
            let fnode = structure.factor_node(grid, node, i);
            for (a, axis) in axes.clone().enumerate() {
                let here = &derived.l(node, axis)[block.clone()];
                let there = &li.at(fnode)[a * mi..(a + 1) * mi];
                for (x, y) in here.iter().zip(there) {
                    constancy = constancy.max((x - y).abs() / l_scale);
                }
            }
        }
        let rhs = |fnode: usize, axis: usize, _: &[f64]| li.at(fnode)[axis * mi..(axis + 1) * mi].to_vec();
        let fbase = structure.factor_node(grid, base, i);
        let order: Vec<usize> = (0..ni).collect();
        let values = sweep(fgrid, &rhs, fbase, &vec![0.0; mi], &order)?;
        let field = GridField::from_values(fgrid, &[mi], values.concat())?;
        let ti = BendingField::new(field, format!("{} (factor {i})", t.label()))?;
        let fgeom = build_geometry(scene)?;
        factor_bending.push(crate::bending::bending_residual(&fgeom, &ti)?.value());
        factors.push(ti);
        factor_geometries.push(fgeom);
    }
    let residual = factor_bending.iter().fold(constancy, |m, &v| m.max(v));
    let split_limit = tol.tol(BEND).max(limit);
    if constancy > split_limit {
        return Err(Error::Precondition(format!(
            "factor blocks of L vary along the other factors ({constancy:.3e} > {split_limit:.3e}); the factor tensors are not well defined"
        )));
    }
    Ok(SplitReport {
        factors,
        factor_geometries,
        adaptedness,
        constancy,
        factor_bending,
        residual,
        tol: split_limit,
    })
}

/// Direct sum of factor fields as a field on the product.
pub fn reassemble(geom: &FramedGeometry, structure: &ProductStructure, factors: &[BendingField]) -> Result<BendingField> {
    structure.check(geom)?;
    if factors.len() != structure.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} factor fields for {} factors",
            factors.len(),
            structure.len()
        )));
    }
    let grid = geom.grid();
    let t = GridField::from_fn(grid, &[geom.m()], |node, _, out| {
        for (i, f) in factors.iter().enumerate() {
            let fnode = structure.factor_node(grid, node, i);
            out[structure.blocks[i].clone()].copy_from_slice(f.at(fnode));
        }
    });
    BendingField::new(t, "reassembled")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::{scene, Spec};

    fn product(spec: &str, res: usize) -> (FramedGeometry, ProductStructure) {
        let factors: Vec<ImmersionScene> = spec
            .split('*')
            .map(|f| scene(&Spec::parse(f).unwrap(), res, None).unwrap())
            .collect();
        let (s, st) = extrinsic_product(&factors).unwrap();
        (build_geometry(&s).unwrap(), st)
    }

    #[test]
    fn circle_times_circle_is_the_torus() {
        let (geom, st) = product("circle*circle", 16);
        assert_eq!((geom.n(), geom.m()), (2, 4));
        for node in 0..geom.nodes() {
            let x = geom.grid().coords(node);
            let f = geom.f(node);
            assert!((f[0] - x[0].cos()).abs() < 1e-15 && (f[3] - x[1].sin()).abs() < 1e-15);
        }
        assert!(cross_alpha_residual(&geom, &st).unwrap().value() < 1e-12);
    }

    #[test]
    fn line_times_line_is_flat() {
        let (geom, _) = product("line*line", 16);
        assert_eq!(geom.p(), 0);
        assert!(geom.second_fundamental_form().max_abs() < 1e-12);
    }

    #[test]
    fn torus_nullity_is_one() {
        let (geom, _) = product("circle*circle", 16);
        let r = s_nullity(&geom, 5, 1, DEFAULT_SEED).unwrap();
        assert_eq!(r.value, 1);
        assert_eq!(s_nullity(&geom, 5, 2, DEFAULT_SEED).unwrap().value, 0);
        assert!(s_nullity(&geom, 5, 3, DEFAULT_SEED).is_err());
    }

    #[test]
    fn plane_nullity_is_everything() {
        let geom = build_geometry(&scene(&Spec::parse("plane").unwrap(), 16, None).unwrap()).unwrap();
        assert_eq!(s_nullity(&geom, 3, 1, DEFAULT_SEED).unwrap().value, 2);
    }
}
