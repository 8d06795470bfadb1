//! Extrinsic geometry of a sampled immersion `f: Mⁿ → ℝᵐ`.
//!
//! [`build_geometry`] differentiates the sampled map and assembles, at every
//! node, the tangent frame `e_i = ∂_i f`, an orthonormal normal frame `ξ_a`,
//! the metric and its inverse, Christoffel symbols, second fundamental form
//! coefficients `αᵃ_ij = ⟨∂_i e_j, ξ_a⟩`, normal connection coefficients
//! `ωᵢᵃᵇ = ⟨∂_i ξ_a, ξ_b⟩`, shape operators and both curvature tensors.
//!
//! Layouts (per node, row-major): `e [i][μ]`, `xi [a][μ]`, `g [i][j]`,
//! `gamma [k][i][j]` for `Γᵏ_ij`, `alpha [i][j][a]`, `omega [i][a][b]`,
//! `shape [a][k][j]` for `(A_a)ᵏ_j`, `riemann [l][k][i][j]` for `Rˡ_kij`
//! and `normal_curvature [i][j][a][c]`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, gram_schmidt, lowdin, numerical_rank, singular_values};
use crate::numgrid::{gradient, sweep_edges, ChartGrid, GridField};
use crate::tolerance::RANK_THRESHOLD;

/// Pivot subsets scoring below this on some node are not used by
/// [`NormalFrameMethod::Auto`].
pub const PIVOT_MIN_SIGMA: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct ImmersionScene {
    map: GridField,
    label: String,
}

impl ImmersionScene {
    pub fn new(map: GridField, label: impl Into<String>) -> Result<Self> {
        if map.shape().len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "immersion values must be vectors, got shape {:?}",
                map.shape()
            )));
        }
        let (n, m) = (map.grid().dim(), map.shape()[0]);
        if m < n {
            return Err(Error::ShapeMismatch(format!(
                "ambient dimension {m} is below the chart dimension {n}"
            )));
        }
        if !map.is_finite() {
            return Err(Error::Format("immersion has non-finite samples".into()));
        }
        Ok(Self {
            map,
            label: label.into(),
        })
    }

    pub fn from_fn(
        grid: &ChartGrid,
        ambient_dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let map = GridField::from_fn(grid, &[ambient_dim], |_, x, out| f(x, out));
        Self::new(map, label)
    }

    pub fn grid(&self) -> &ChartGrid {
        self.map.grid()
    }

    pub fn map(&self) -> &GridField {
        &self.map
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.shape()[0]
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// How the normal frame is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFrameMethod {
    /// Global pivot when one is valid everywhere, otherwise transport.
    #[default]
    Auto,
    /// Project one fixed subset of ambient basis vectors onto the normal
    /// spaces and orthonormalize them in a fixed order.
    GlobalPivot,
    /// Carry the base frame along the axis sweep by normal projection and
    /// closest-orthonormal correction.
    Transported,
}

#[derive(Clone, Debug)]
pub struct FramedGeometry {
    scene: ImmersionScene,
    n: usize,
    m: usize,
    p: usize,
    method: NormalFrameMethod,
    e: GridField,
    xi: GridField,
    g: GridField,
    g_inv: GridField,
    gamma: GridField,
    alpha: GridField,
    omega: GridField,
    shape: GridField,
    riemann: GridField,
    normal_curvature: GridField,
}

impl FramedGeometry {
    pub fn scene(&self) -> &ImmersionScene {
        &self.scene
    }
    pub fn grid(&self) -> &ChartGrid {
        self.scene.grid()
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn nodes(&self) -> usize {
        self.grid().node_count()
    }
    /// Frame construction actually used (never `Auto`).
    pub fn frame_method(&self) -> NormalFrameMethod {
        self.method
    }

    pub fn e(&self, node: usize, i: usize) -> &[f64] {
        &self.e.at(node)[i * self.m..(i + 1) * self.m]
    }
    pub fn xi(&self, node: usize, a: usize) -> &[f64] {
        &self.xi.at(node)[a * self.m..(a + 1) * self.m]
    }
    pub fn f(&self, node: usize) -> &[f64] {
        self.scene.map().at(node)
    }
    pub fn g(&self, node: usize, i: usize, j: usize) -> f64 {
        self.g.at(node)[i * self.n + j]
    }
    pub fn g_inv(&self, node: usize, i: usize, j: usize) -> f64 {
        self.g_inv.at(node)[i * self.n + j]
    }
    pub fn gamma(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        self.gamma.at(node)[(k * self.n + i) * self.n + j]
    }
    pub fn alpha(&self, node: usize, i: usize, j: usize, a: usize) -> f64 {
        self.alpha.at(node)[(i * self.n + j) * self.p + a]
    }
    pub fn omega(&self, node: usize, i: usize, a: usize, b: usize) -> f64 {
        self.omega.at(node)[(i * self.p + a) * self.p + b]
    }
    pub fn shape_op(&self, node: usize, a: usize, k: usize, j: usize) -> f64 {
        self.shape.at(node)[(a * self.n + k) * self.n + j]
    }
    pub fn riemann(&self, node: usize, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.riemann.at(node)[((l * n + k) * n + i) * n + j]
    }
    pub fn normal_curvature(&self, node: usize, i: usize, j: usize, a: usize, c: usize) -> f64 {
        let (n, p) = (self.n, self.p);
        self.normal_curvature.at(node)[((i * n + j) * p + a) * p + c]
    }

    pub fn tangent_frame(&self) -> &GridField {
        &self.e
    }
    pub fn normal_frame(&self) -> &GridField {
        &self.xi
    }
    pub fn metric(&self) -> &GridField {
        &self.g
    }
    pub fn metric_inverse(&self) -> &GridField {
        &self.g_inv
    }
    pub fn christoffel(&self) -> &GridField {
        &self.gamma
    }
    /// Second fundamental form, layout `[i][j][a]`.
    pub fn second_fundamental_form(&self) -> &GridField {
        &self.alpha
    }
    pub fn normal_connection(&self) -> &GridField {
        &self.omega
    }
    pub fn shape_operators(&self) -> &GridField {
        &self.shape
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha.max_abs()
    }

    /// Ambient components `Σ_a cᵃ ξ_a` of a normal vector with frame
    /// coefficients `c`.
    pub fn normal_vector(&self, node: usize, coeffs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for (a, &c) in coeffs.iter().enumerate() {
            for (vi, xi) in v.iter_mut().zip(self.xi(node, a)) {
                *vi += c * xi;
            }
        }
        v
    }

    /// `m × m` matrix with columns `e_1 … e_n, ξ_1 … ξ_p`.
    pub fn frame_matrix(&self, node: usize) -> DMatrix<f64> {
        let mut fr = DMatrix::zeros(self.m, self.m);
        for i in 0..self.n {
            for (mu, &v) in self.e(node, i).iter().enumerate() {
                fr[(mu, i)] = v;
            }
        }
        for a in 0..self.p {
            for (mu, &v) in self.xi(node, a).iter().enumerate() {
                fr[(mu, self.n + a)] = v;
            }
        }
        fr
    }

    pub fn frame_condition(&self, node: usize) -> f64 {
        condition_number(&self.frame_matrix(node))
    }

    /// Orthogonal projector onto the normal space at `node`.
    pub fn normal_projector(&self, node: usize) -> DMatrix<f64> {
        let mut pn = DMatrix::zeros(self.m, self.m);
        for a in 0..self.p {
            let x = self.xi(node, a);
            for r in 0..self.m {
                for c in 0..self.m {
                    pn[(r, c)] += x[r] * x[c];
                }
            }
        }
        pn
    }
}

fn metric_at(e: &[f64], n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        (0..m).map(|mu| e[i * m + mu] * e[j * m + mu]).sum()
    })
}

fn tangent_projector(e: &[f64], g_inv: &DMatrix<f64>, n: usize, m: usize) -> DMatrix<f64> {
    let em = DMatrix::from_fn(m, n, |mu, i| e[i * m + mu]);
    &em * g_inv * em.transpose()
}

fn subsets(m: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for s in start..m {
            cur.push(s);
            rec(s + 1, m, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, p, &mut Vec::new(), &mut out);
    out
}

fn min_sigma(pn: &DMatrix<f64>, subset: &[usize]) -> f64 {
    let cols = pn.select_columns(subset);
    singular_values(&cols).last().copied().unwrap_or(0.0)
}

/// Best global pivot: `(subset, min over nodes of σ_min, worst node)`.
fn global_pivot(normal_proj: &[DMatrix<f64>], m: usize, p: usize) -> (Vec<usize>, f64, usize) {
    let mut best = (Vec::new(), f64::NEG_INFINITY, 0);
    for subset in subsets(m, p) {
        let mut worst = (f64::INFINITY, 0);
        for (node, pn) in normal_proj.iter().enumerate() {
            let s = min_sigma(pn, &subset);
            if s < worst.0 {
                worst = (s, node);
            }
            if worst.0 <= best.1 {
                break;
            }
        }
        if worst.0 > best.1 {
            best = (subset, worst.0, worst.1);
        }
    }
    best
}

fn pivot_frame(pn: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    gram_schmidt(&pn.select_columns(subset))
}

fn normal_frames(
    grid: &ChartGrid,
    normal_proj: &[DMatrix<f64>],
    m: usize,
    p: usize,
    method: NormalFrameMethod,
) -> Result<(Vec<DMatrix<f64>>, NormalFrameMethod)> {
    let nodes = normal_proj.len();
    if p == 0 {
        return Ok((vec![DMatrix::zeros(m, 0); nodes], NormalFrameMethod::GlobalPivot));
    }
    if method != NormalFrameMethod::Transported {
        let (subset, sigma, worst) = global_pivot(normal_proj, m, p);
        let usable = match method {
            NormalFrameMethod::GlobalPivot => sigma > 1e-8,
            _ => sigma >= PIVOT_MIN_SIGMA,
        };
        if usable {
            let frames = normal_proj.iter().map(|pn| pivot_frame(pn, &subset)).collect();
            return Ok((frames, NormalFrameMethod::GlobalPivot));
        }
        if method == NormalFrameMethod::GlobalPivot {
            return Err(Error::NoPivot {
                worst_node: worst,
                sigma,
            });
        }
    }
    // Base frame from the best pivot at node 0, then carried along the sweep.
    let base = 0;
    let best = subsets(m, p)
        .into_iter()
        .map(|s| {
            let sigma = min_sigma(&normal_proj[base], &s);
            (s, sigma)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |acc, (s, v)| if v > acc.1 { (s, v) } else { acc });
    let mut frames: Vec<Option<DMatrix<f64>>> = vec![None; nodes];
    frames[base] = Some(pivot_frame(&normal_proj[base], &best.0));
    let order: Vec<usize> = (0..grid.dim()).collect();
    for (from, to) in sweep_edges(grid, base, &order)? {
        let prev = frames[from].as_ref().expect("swept in order");
        frames[to] = Some(lowdin(&(&normal_proj[to] * prev)));
    }
    Ok((
        frames.into_iter().map(|f| f.expect("sweep covers grid")).collect(),
        NormalFrameMethod::Transported,
    ))
}

pub fn build_geometry(scene: &ImmersionScene) -> Result<FramedGeometry> {
    build_geometry_with(scene, NormalFrameMethod::Auto)
}

pub fn build_geometry_with(scene: &ImmersionScene, method: NormalFrameMethod) -> Result<FramedGeometry> {
    let grid = scene.grid().clone();
    let (n, m) = (scene.dim(), scene.ambient_dim());
    let p = m - n;
    let nodes = grid.node_count();

    let de = gradient(scene.map());
    let e = GridField::from_fn(&grid, &[n, m], |node, _, out| {
        for i in 0..n {
            out[i * m..(i + 1) * m].copy_from_slice(de[i].at(node));
        }
    });

    let mut g = GridField::zeros(&grid, &[n, n]);
    let mut g_inv = GridField::zeros(&grid, &[n, n]);
    let mut normal_proj = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let gm = metric_at(e.at(node), n, m);
        let lowest = gm.clone().symmetric_eigen().eigenvalues.min();
        if !(lowest > 1e-8) {
            return Err(Error::RankDeficient {
                node,
                dim: n,
                eigenvalue: lowest,
            });
        }
        let gi = gm.clone().try_inverse().ok_or(Error::RankDeficient {
            node,
            dim: n,
            eigenvalue: lowest,
        })?;
        let pt = tangent_projector(e.at(node), &gi, n, m);
        normal_proj.push(DMatrix::identity(m, m) - pt);
        for i in 0..n {
            for j in 0..n {
                g.at_mut(node)[i * n + j] = gm[(i, j)];
                g_inv.at_mut(node)[i * n + j] = 0.5 * (gi[(i, j)] + gi[(j, i)]);
            }
        }
    }

    let (frames, used) = normal_frames(&grid, &normal_proj, m, p, method)?;
    let xi = GridField::from_fn(&grid, &[p, m], |node, _, out| {
        for a in 0..p {
            for mu in 0..m {
                out[a * m + mu] = frames[node][(mu, a)];
            }
        }
    });

    let dg = gradient(&g);
    let gamma = GridField::from_fn(&grid, &[n, n, n], |node, _, out| {
        let dgv = |l: usize, i: usize, j: usize| dg[l].at(node)[i * n + j];
        let gi = g_inv.at(node);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out[(k * n + i) * n + j] = 0.5
                        * (0..n)
                            .map(|l| gi[k * n + l] * (dgv(i, j, l) + dgv(j, i, l) - dgv(l, i, j)))
                            .sum::<f64>();
                }
            }
        }
    });

    // ∂_i e_j, one field per i with layout [j][μ]
    let dde = gradient(&e);
    let alpha = GridField::from_fn(&grid, &[n, n, p], |node, _, out| {
        let xin = xi.at(node);
        for i in 0..n {
            let dij = dde[i].at(node);
            for j in 0..n {
                for a in 0..p {
                    out[(i * n + j) * p + a] = (0..m).map(|mu| dij[j * m + mu] * xin[a * m + mu]).sum();
                }
            }
        }
    });

    let dxi = gradient(&xi);
    let omega = GridField::from_fn(&grid, &[n, p, p], |node, _, out| {
        let xin = xi.at(node);
        for i in 0..n {
            let d = dxi[i].at(node);
            let raw = |a: usize, b: usize| -> f64 { (0..m).map(|mu| d[a * m + mu] * xin[b * m + mu]).sum() };
            for a in 0..p {
                for b in 0..p {
                    out[(i * p + a) * p + b] = 0.5 * (raw(a, b) - raw(b, a));
                }
            }
        }
    });

    let shape = GridField::from_fn(&grid, &[p, n, n], |node, _, out| {
        let gi = g_inv.at(node);
        let al = alpha.at(node);
        for a in 0..p {
            for k in 0..n {
                for j in 0..n {
                    out[(a * n + k) * n + j] = (0..n).map(|l| gi[k * n + l] * al[(l * n + j) * p + a]).sum();
                }
            }
        }
    });

    let dgamma = gradient(&gamma);
    let riemann = GridField::from_fn(&grid, &[n, n, n, n], |node, _, out| {
        let gm = gamma.at(node);
        let gv = |k: usize, i: usize, j: usize| gm[(k * n + i) * n + j];
        let dgv = |d: usize, k: usize, i: usize, j: usize| dgamma[d].at(node)[(k * n + i) * n + j];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = dgv(i, l, j, k) - dgv(j, l, i, k);
                        for q in 0..n {
                            v += gv(l, i, q) * gv(q, j, k) - gv(l, j, q) * gv(q, i, k);
                        }
                        out[((l * n + k) * n + i) * n + j] = v;
                    }
                }
            }
        }
    });

    let domega = gradient(&omega);
    let normal_curvature = GridField::from_fn(&grid, &[n, n, p, p], |node, _, out| {
        let om = omega.at(node);
        let w = |i: usize, a: usize, b: usize| om[(i * p + a) * p + b];
        let dw = |d: usize, i: usize, a: usize, b: usize| domega[d].at(node)[(i * p + a) * p + b];
        for i in 0..n {
            for j in 0..n {
                for a in 0..p {
                    for c in 0..p {
                        let mut v = dw(i, j, a, c) - dw(j, i, a, c);
                        for b in 0..p {
                            v += w(j, a, b) * w(i, b, c) - w(i, a, b) * w(j, b, c);
                        }
                        out[((i * n + j) * p + a) * p + c] = v;
                    }
                }
            }
        }
    });

    Ok(FramedGeometry {
        scene: scene.clone(),
        n,
        m,
        p,
        method: used,
        e,
        xi,
        g,
        g_inv,
        gamma,
        alpha,
        omega,
        shape,
        riemann,
        normal_curvature,
    })
}

/// Covariant derivative of a normal-valued 2-tensor with layout `[j][k][a]`:
/// result layout `[i][j][k][a]` holding
/// `∂_i tᵃ_jk − Γˡ_ij tᵃ_lk − Γˡ_ik tᵃ_jl + tᵇ_jk ωᵢᵇᵃ`.
pub fn normal_covariant_2(geom: &FramedGeometry, t: &GridField) -> GridField {
    let (n, p) = (geom.n(), geom.p());
    let dt = gradient(t);
    GridField::from_fn(geom.grid(), &[n, n, n, p], |node, _, out| {
        let tv = t.at(node);
        let tt = |j: usize, k: usize, a: usize| tv[(j * n + k) * p + a];
        for i in 0..n {
            let di = dt[i].at(node);
            for j in 0..n {
                for k in 0..n {
                    for a in 0..p {
                        let mut v = di[(j * n + k) * p + a];
                        for l in 0..n {
                            v -= geom.gamma(node, l, i, j) * tt(l, k, a) + geom.gamma(node, l, i, k) * tt(j, l, a);
                        }
                        for b in 0..p {
                            v += tt(j, k, b) * geom.omega(node, i, b, a);
                        }
                        out[((i * n + j) * n + k) * p + a] = v;
                    }
                }
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
    /// `max(1, ‖α‖∞)²`; residuals below are already divided by it.
    pub scale: f64,
}

impl StructureReport {
    pub fn max(&self) -> f64 {
        self.gauss.max(self.codazzi).max(self.ricci)
    }
}

/// Gauss, Codazzi and Ricci residuals of the immersion itself, scaled.
pub fn structure_residuals(geom: &FramedGeometry) -> StructureReport {
    let (n, p) = (geom.n(), geom.p());
    let scale = geom.alpha_max().max(1.0).powi(2);
    let mut gauss: f64 = 0.0;
    let mut ricci: f64 = 0.0;
    let mut codazzi: f64 = 0.0;
    let cov = normal_covariant_2(geom, geom.second_fundamental_form());
    for node in 0..geom.nodes() {
        let al = |i: usize, j: usize, a: usize| geom.alpha(node, i, j, a);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for w in 0..n {
                        let lhs: f64 = (0..n).map(|l| geom.riemann(node, l, k, i, j) * geom.g(node, l, w)).sum();
                        let rhs: f64 = (0..p).map(|a| al(i, w, a) * al(j, k, a) - al(i, k, a) * al(j, w, a)).sum();
                        gauss = gauss.max((lhs - rhs).abs());
                    }
                    let c = cov.at(node);
                    for a in 0..p {
                        let v = c[((i * n + j) * n + k) * p + a] - c[((j * n + i) * n + k) * p + a];
                        codazzi = codazzi.max(v.abs());
                    }
                }
                for a in 0..p {
                    for c in 0..p {
                        let rhs: f64 = (0..n)
                            .map(|k| geom.shape_op(node, a, k, j) * al(i, k, c) - geom.shape_op(node, a, k, i) * al(k, j, c))
                            .sum();
                        ricci = ricci.max((geom.normal_curvature(node, i, j, a, c) - rhs).abs());
                    }
                }
            }
        }
    }
    StructureReport {
        gauss: gauss / scale,
        codazzi: codazzi / scale,
        ricci: ricci / scale,
        scale,
    }
}

/// Rank of the span of the second fundamental form at `node`.
pub fn first_normal_rank(geom: &FramedGeometry, node: usize) -> usize {
    let n = geom.n();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mat = DMatrix::from_fn(geom.p(), pairs.len(), |a, c| {
        let (i, j) = pairs[c];
        geom.alpha(node, i, j, a)
    });
    numerical_rank(&mat, RANK_THRESHOLD)
}

/// First node (if any) where the first normal space is not full.
pub fn first_non_full_node(geom: &FramedGeometry) -> Option<(usize, usize)> {
    (0..geom.nodes()).find_map(|node| {
        let r = first_normal_rank(geom, node);
        (r < geom.p()).then_some((node, r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cylinder(nodes: usize) -> ImmersionScene {
        let grid = ChartGrid::new(vec![[0.0, 2.0 * PI], [0.0, 1.0]], vec![nodes, nodes], vec![true, false]).unwrap();
        ImmersionScene::from_fn(&grid, 3, "cylinder", |x, out| {
            out.copy_from_slice(&[x[0].cos(), x[0].sin(), x[1]]);
        })
        .unwrap()
    }

    fn torus(nodes: usize) -> ImmersionScene {
        let grid = ChartGrid::uniform(vec![[0.0, 2.0 * PI], [0.0, 2.0 * PI]], nodes, vec![true, true]).unwrap();
        ImmersionScene::from_fn(&grid, 4, "torus", |x, out| {
            out.copy_from_slice(&[x[0].cos(), x[0].sin(), x[1].cos(), x[1].sin()]);
        })
        .unwrap()
    }

    #[test]
    fn rejects_rank_deficient_maps() {
        let grid = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 1.0]], 8, vec![false, false]).unwrap();
        let scene = ImmersionScene::from_fn(&grid, 3, "degenerate", |x, out| {
            out.copy_from_slice(&[x[0] + x[1], 0.0, 0.0]);
        })
        .unwrap();
        assert!(matches!(build_geometry(&scene), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn cylinder_has_the_closed_form_invariants() {
        let geom = build_geometry(&cylinder(32)).unwrap();
        let h = geom.grid().max_spacing();
        assert_eq!(geom.frame_method(), NormalFrameMethod::Transported);
        for node in 0..geom.nodes() {
            let x = geom.grid().coords(node);
            let xi = geom.xi(node, 0);
            assert!((xi[0] - x[0].cos()).abs() < 1e-12 && (xi[1] - x[0].sin()).abs() < 1e-12);
            assert!((geom.alpha(node, 0, 0, 0) + 1.0).abs() <= 10.0 * h * h);
            assert!(geom.alpha(node, 0, 1, 0).abs() < 1e-10);
            assert!(geom.alpha(node, 1, 1, 0).abs() < 1e-10);
            assert!((geom.g(node, 0, 0) - 1.0).abs() <= 10.0 * h * h);
            assert!(geom.omega(node, 0, 0, 0).abs() == 0.0);
        }
    }

    #[test]
    fn forced_pivot_fails_on_the_cylinder_with_worst_node() {
        let err = build_geometry_with(&cylinder(16), NormalFrameMethod::GlobalPivot);
        assert!(matches!(err, Err(Error::NoPivot { .. })), "{err:?}");
    }

    #[test]
    fn torus_shape_operators_are_coordinate_projections() {
        let geom = build_geometry(&torus(32)).unwrap();
        let h = geom.grid().max_spacing();
        for node in 0..geom.nodes() {
            let a = |a, k, j| geom.shape_op(node, a, k, j);
            assert!((a(0, 0, 0) + 1.0).abs() <= 10.0 * h * h);
            assert!((a(1, 1, 1) + 1.0).abs() <= 10.0 * h * h);
            assert!(a(0, 1, 1).abs() < 1e-12 && a(1, 0, 0).abs() < 1e-12);
            assert!(a(0, 0, 1).abs() < 1e-12);
            assert_eq!(first_normal_rank(&geom, node), 2);
        }
    }

    #[test]
    fn plane_is_flat_and_totally_geodesic() {
        let grid = ChartGrid::uniform(vec![[-1.0, 1.0], [-1.0, 1.0]], 16, vec![false, false]).unwrap();
        let scene = ImmersionScene::from_fn(&grid, 4, "plane", |x, out| {
            out.copy_from_slice(&[x[0], x[1], 0.0, 0.0]);
        })
        .unwrap();
        let geom = build_geometry(&scene).unwrap();
        assert_eq!(geom.frame_method(), NormalFrameMethod::GlobalPivot);
        assert!(geom.second_fundamental_form().max_abs() < 1e-11);
        assert!(geom.christoffel().max_abs() < 1e-11);
        assert!(geom.normal_connection().max_abs() < 1e-11);
        let rep = structure_residuals(&geom);
        assert!(rep.max() < 1e-10);
        assert_eq!(first_normal_rank(&geom, 5), 0);
    }

    #[test]
    fn frames_are_orthonormal_and_complete() {
        let geom = build_geometry(&torus(16)).unwrap();
        for node in 0..geom.nodes() {
            for a in 0..2 {
                for i in 0..2 {
                    let d: f64 = geom.e(node, i).iter().zip(geom.xi(node, a)).map(|(x, y)| x * y).sum();
                    assert!(d.abs() < 1e-10);
                }
                for b in 0..2 {
                    let d: f64 = geom.xi(node, a).iter().zip(geom.xi(node, b)).map(|(x, y)| x * y).sum();
                    assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
                    assert!((geom.omega(node, 0, a, b) + geom.omega(node, 0, b, a)).abs() < 1e-15);
                }
            }
            assert!(geom.frame_condition(node) <= 1e6);
        }
    }
}
