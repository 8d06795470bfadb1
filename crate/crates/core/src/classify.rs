//! Triviality of bendings and pairs, and recovery of `𝓔` from `β`.
//!
//! A bending is trivial when it is the restriction `𝒟f + v` of an ambient
//! Killing field. On the level of pairs this reads `β = Cα` and
//! `𝓔 = −∇⊥C` for a skew field `C` of normal endomorphisms; for a Killing
//! field `C` is the normal part `𝒟ᴺ` of the generator.
//!
//! Normal endomorphism fields use layout `[a][b]` holding `Cᵇ_a = ⟨Cξ_a, ξ_b⟩`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bending::{AssociatedPair, BendingField};
use crate::error::{Error, Result};
use crate::fundsys::codazzi_residual;
use crate::geometry::{first_normal_rank, normal_covariant_2, FramedGeometry};
use crate::linalg::{lstsq, skew_pairs};
use crate::numgrid::{gradient, GridField};
use crate::tolerance::{Check, Tolerance, TRIVIAL};

/// Generator of an ambient Killing field `x ↦ d·x + v`.
#[derive(Clone, Debug, PartialEq)]
pub struct KillingField {
    pub d: DMatrix<f64>,
    pub v: DVector<f64>,
}

impl KillingField {
    pub fn new(d: DMatrix<f64>, v: DVector<f64>) -> Result<Self> {
        let m = v.len();
        if d.nrows() != m || d.ncols() != m {
            return Err(Error::ShapeMismatch(format!(
                "generator is {}x{}, translation has length {m}",
                d.nrows(),
                d.ncols()
            )));
        }
        let skew = (&d + d.transpose()).amax();
        if skew > 1e-12 * d.amax().max(1.0) {
            return Err(Error::BadParam(format!("generator is not skew (|D + Dᵀ| = {skew:.3e})")));
        }
        Ok(Self { d, v })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.d * DVector::from_column_slice(x) + &self.v).iter().copied().collect()
    }

    /// The field restricted to the immersion.
    pub fn restrict(&self, geom: &FramedGeometry, label: impl Into<String>) -> Result<BendingField> {
        let t = GridField::from_fn(geom.grid(), &[geom.m()], |node, _, out| {
            out.copy_from_slice(&self.apply(geom.f(node)));
        });
        BendingField::new(t, label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KillingFit {
    pub field: KillingField,
    /// Sup misfit divided by `max(1, ‖𝓣‖∞)`.
    pub residual: f64,
    pub raw: f64,
}

/// Least-squares fit of `𝓣 ≈ 𝒟̂f + v̂` with `𝒟̂` skew.
pub fn fit_killing(geom: &FramedGeometry, t: &BendingField) -> Result<KillingFit> {
    let m = geom.m();
    if t.ambient_dim() != m || t.field().grid() != geom.grid() {
        return Err(Error::ShapeMismatch("field does not live on the scene".into()));
    }
    let pairs = skew_pairs(m);
    let q = pairs.len() + m;
    let mut ata = DMatrix::<f64>::zeros(q, q);
    let mut atb = DVector::<f64>::zeros(q);
    let mut row = vec![0.0; q];
    for node in 0..geom.nodes() {
        let f = geom.f(node);
        let tv = t.at(node);
        for mu in 0..m {
            row.iter_mut().for_each(|r| *r = 0.0);
            for (c, &(a, b)) in pairs.iter().enumerate() {
                // D[a][b] = w, D[b][a] = −w
                if mu == a {
                    row[c] = f[b];
                } else if mu == b {
                    row[c] = -f[a];
                }
            }
            row[pairs.len() + mu] = 1.0;
            for r in 0..q {
                if row[r] == 0.0 {
                    continue;
                }
                atb[r] += row[r] * tv[mu];
                for c in 0..q {
                    ata[(r, c)] += row[r] * row[c];
                }
            }
        }
    }
    let eig = ata.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::Singular(format!(
            "Killing fit on `{}` is under-determined (normal-equation eigenvalues {lo:.3e} .. {hi:.3e}); the immersion lies in an affine subspace of codimension ≥ 2",
            geom.scene().label()
        )));
    }
    let sol = eig.eigenvectors.clone()
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
        * eig.eigenvectors.transpose()
        * atb;
    let mut d = DMatrix::zeros(m, m);
    for (c, &(a, b)) in pairs.iter().enumerate() {
        d[(a, b)] = sol[c];
        d[(b, a)] = -sol[c];
    }
    let v = DVector::from_iterator(m, (0..m).map(|mu| sol[pairs.len() + mu]));
    let field = KillingField { d, v };
    let mut raw: f64 = 0.0;
    for node in 0..geom.nodes() {
        let fit = field.apply(geom.f(node));
        for (x, y) in fit.iter().zip(t.at(node)) {
            raw = raw.max((x - y).abs());
        }
    }
    Ok(KillingFit {
        residual: raw / t.field().max_abs().max(1.0),
        raw,
        field,
    })
}

/// `Cᵇ_a = ⟨𝒟̂ξ_a, ξ_b⟩`.
pub fn normal_part(geom: &FramedGeometry, d: &DMatrix<f64>) -> GridField {
    let (m, p) = (geom.m(), geom.p());
    GridField::from_fn(geom.grid(), &[p, p], |node, _, out| {
        for a in 0..p {
            let dxi = d * DVector::from_column_slice(geom.xi(node, a));
            for b in 0..p {
                out[a * p + b] = (0..m).map(|mu| dxi[mu] * geom.xi(node, b)[mu]).sum();
            }
        }
    })
}

/// `−(∇⊥_i C)` in the layout of `𝓔`: `−[∂_i Cᵇ_a + Cᶜ_a ωᵢᶜᵇ − ωᵢᵃᶜ Cᵇ_c]`.
pub fn minus_nabla_c(geom: &FramedGeometry, c: &GridField) -> GridField {
    let (n, p) = (geom.n(), geom.p());
    let dc = gradient(c);
    GridField::from_fn(geom.grid(), &[n, p, p], |node, _, out| {
        let cv = c.at(node);
        for i in 0..n {
            let di = dc[i].at(node);
            for a in 0..p {
                for b in 0..p {
                    let mut v = di[a * p + b];
                    for k in 0..p {
                        v += cv[a * p + k] * geom.omega(node, i, k, b) - geom.omega(node, i, a, k) * cv[k * p + b];
                    }
                    out[(i * p + a) * p + b] = -v;
                }
            }
        }
    })
}

/// The trivial pair `(Cα, −∇⊥C)`.
pub fn trivial_pair(geom: &FramedGeometry, c: &GridField) -> Result<AssociatedPair> {
    let (n, p) = (geom.n(), geom.p());
    if c.shape() != [p, p] || c.grid() != geom.grid() {
        return Err(Error::ShapeMismatch(format!("normal endomorphism field has shape {:?}", c.shape())));
    }
    let beta = GridField::from_fn(geom.grid(), &[n, n, p], |node, _, out| {
        let cv = c.at(node);
        for i in 0..n {
            for j in 0..n {
                for b in 0..p {
                    out[(i * n + j) * p + b] = (0..p).map(|a| cv[a * p + b] * geom.alpha(node, i, j, a)).sum();
                }
            }
        }
    });
    AssociatedPair::from_parts(geom, beta, minus_nabla_c(geom, c))
}

/// Closed-form pair `(𝒟ᴺα, −∇⊥𝒟ᴺ)` of the Killing field with generator `d`.
pub fn killing_pair(geom: &FramedGeometry, d: &DMatrix<f64>) -> Result<AssociatedPair> {
    trivial_pair(geom, &normal_part(geom, d))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrivialityReport {
    /// Fitted skew field, layout `[a][b]`.
    #[serde(skip)]
    pub c: GridField,
    pub res_beta: f64,
    pub res_e: f64,
    /// Some node has `α = 0` but `β ≠ 0`.
    pub infinite_misfit: bool,
    pub tol: f64,
    pub trivial: bool,
}

impl TrivialityReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_most("res_beta", self.res_beta, self.tol),
            Check::at_most("res_E", self.res_e, self.tol),
        ]
    }

    /// `max(res_beta, res_E) / tol`: above 1 means nontrivial by that factor.
    pub fn nontrivial_margin(&self) -> f64 {
        self.res_beta.max(self.res_e) / self.tol
    }
}

/// Fits `β ≈ Cα` node by node over skew `C`, then measures `𝓔 + ∇⊥C`.
pub fn pair_triviality(geom: &FramedGeometry, pair: &AssociatedPair, tol: &Tolerance) -> Result<TrivialityReport> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let pairs = skew_pairs(p);
    let sym: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let scale = geom.alpha_max().max(1.0) * pair.beta_max().max(1.0);
    let alpha_floor = 1e-12 * geom.alpha_max().max(1.0);
    let mut infinite_misfit = false;
    let mut c = GridField::zeros(geom.grid(), &[p, p]);
    let mut res_beta: f64 = 0.0;
    for node in 0..geom.nodes() {
        let alpha_here = sym
            .iter()
            .flat_map(|&(i, j)| (0..p).map(move |a| (i, j, a)))
            .fold(0.0f64, |m, (i, j, a)| m.max(geom.alpha(node, i, j, a).abs()));
        let beta_here = sym
            .iter()
            .flat_map(|&(i, j)| (0..p).map(move |a| (i, j, a)))
            .fold(0.0f64, |m, (i, j, a)| m.max(pair.beta(node, i, j, a).abs()));
        if alpha_here <= alpha_floor && beta_here > alpha_floor {
            infinite_misfit = true;
        }
        // rows (i ≤ j, b), columns skew pairs (a < b'): Cᵇ'_a = w, Cᵃ_b' = −w
        let rows = sym.len() * p;
        let mut mat = DMatrix::zeros(rows, pairs.len());
        let mut rhs = DVector::zeros(rows);
        for (s, &(i, j)) in sym.iter().enumerate() {
            for b in 0..p {
                let r = s * p + b;
                rhs[r] = pair.beta(node, i, j, b);
                for (col, &(a0, b0)) in pairs.iter().enumerate() {
                    if b == b0 {
                        mat[(r, col)] += geom.alpha(node, i, j, a0);
                    }
                    if b == a0 {
                        mat[(r, col)] -= geom.alpha(node, i, j, b0);
                    }
                }
            }
        }
        let w = lstsq(&mat, &rhs);
        let cv = c.at_mut(node);
        for (col, &(a0, b0)) in pairs.iter().enumerate() {
            cv[a0 * p + b0] = w[col];
            cv[b0 * p + a0] = -w[col];
        }
        let misfit = (&mat * &w - &rhs).amax();
        res_beta = res_beta.max(misfit);
    }
    let e_fit = minus_nabla_c(geom, &c);
    let res_e = pair.e_field().max_abs_diff(&e_fit);
    let res_beta = if infinite_misfit { f64::INFINITY } else { res_beta / scale };
    let res_e = res_e / scale;
    let limit = tol.tol(TRIVIAL);
    Ok(TrivialityReport {
        c,
        res_beta,
        res_e,
        infinite_misfit,
        tol: limit,
        trivial: res_beta <= limit && res_e <= limit,
    })
}

/// The unique `𝓔` compatible with `β` through the Codazzi equation and
/// skewness, solved node by node in least squares. Needs full first normal
/// spaces.
pub fn solve_e_from_beta(geom: &FramedGeometry, beta: &GridField) -> Result<GridField> {
    let (n, p) = (geom.n(), geom.p());
    if beta.shape() != [n, n, p] || beta.grid() != geom.grid() {
        return Err(Error::ShapeMismatch(format!(
            "beta has shape {:?}, expected {:?}",
            beta.shape(),
            [n, n, p]
        )));
    }
    for node in 0..geom.nodes() {
        let rank = first_normal_rank(geom, node);
        if rank < p {
            return Err(Error::FirstNormalNotFull { node, rank, codim: p });
        }
    }
    let mut e = GridField::zeros(geom.grid(), &[n, p, p]);
    if p < 2 {
        return Ok(e);
    }
    let pairs = skew_pairs(p);
    let unknowns = n * pairs.len();
    let col = |i: usize, a: usize, b: usize| -> Option<(usize, f64)> {
        // 𝓔ᵇ_ia as ± one unknown
        if a == b {
            return None;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let k = pairs.iter().position(|&pp| pp == (lo, hi)).expect("pair listed");
        Some((i * pairs.len() + k, sign))
    };
    let cov = normal_covariant_2(geom, beta);
    for node in 0..geom.nodes() {
        let cv = cov.at(node);
        let nb = |i: usize, j: usize, k: usize, a: usize| cv[((i * n + j) * n + k) * p + a];
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..n {
            for j in 0..i {
                for k in 0..n {
                    for a in 0..p {
                        let mut row = vec![0.0; unknowns];
                        // Σ_b αᵇ_jk 𝓔ᵃ_ib − Σ_b αᵇ_ik 𝓔ᵃ_jb = −(∇β_ijk − ∇β_jik)ᵃ
                        for b in 0..p {
                            if let Some((c0, s)) = col(i, b, a) {
                                row[c0] += s * geom.alpha(node, j, k, b);
                            }
                            if let Some((c0, s)) = col(j, b, a) {
                                row[c0] -= s * geom.alpha(node, i, k, b);
                            }
                        }
                        rows.push((row, -(nb(i, j, k, a) - nb(j, i, k, a))));
                    }
                }
            }
        }
        let mat = DMatrix::from_fn(rows.len(), unknowns, |r, c| rows[r].0[c]);
        let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let sol = lstsq(&mat, &rhs);
        let ev = e.at_mut(node);
        for i in 0..n {
            for a in 0..p {
                for b in 0..p {
                    if let Some((c0, s)) = col(i, a, b) {
                        ev[(i * p + a) * p + b] = s * sol[c0];
                    }
                }
            }
        }
    }
    Ok(e)
}

/// Response of the Codazzi residual to skew perturbations of `𝓔`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessProbe {
    pub sizes: Vec<f64>,
    /// Raw Codazzi residual after each perturbation.
    pub residuals: Vec<f64>,
    /// Raw Codazzi residual of the unperturbed pair.
    pub baseline: f64,
    /// Pearson correlation of `sizes` and `residuals`.
    pub correlation: f64,
}

/// Adds `s·Q` to `𝓔` for `samples` random constant tensors `Q`, skew in the
/// normal slots with unit sup norm, and sizes `s` uniform in `[1e-3, 1e-1]`.
pub fn uniqueness_probe(geom: &FramedGeometry, pair: &AssociatedPair, samples: usize, seed: u64) -> Result<UniquenessProbe> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    if p < 2 {
        return Err(Error::Precondition("skew perturbations of E need codimension at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline = codazzi_residual(geom, pair)?.raw();
    let (mut sizes, mut residuals) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for _ in 0..samples {
        let mut q = vec![0.0; n * p * p];
        for i in 0..n {
            for (a, b) in skew_pairs(p) {
                let w: f64 = StandardNormal.sample(&mut rng);
                q[(i * p + a) * p + b] = w;
                q[(i * p + b) * p + a] = -w;
            }
        }
        let top = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let size = rng.random_range(1e-3..1e-1);
        let e = GridField::from_fn(geom.grid(), &[n, p, p], |node, _, out| {
            for ((o, v), d) in out.iter_mut().zip(pair.e_field().at(node)).zip(&q) {
                *o = v + size * d / top;
            }
        });
        let perturbed = AssociatedPair::from_parts(geom, pair.beta_field().clone(), e)?;
        sizes.push(size);
        residuals.push(codazzi_residual(geom, &perturbed)?.raw());
    }
    let correlation = pearson(&sizes, &residuals);
    Ok(UniquenessProbe { sizes, residuals, baseline, correlation })
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
