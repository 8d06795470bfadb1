//! Residuals of the fundamental system for a pair `(β, 𝓔)`.
//!
//! With `X = ∂_i`, `Y = ∂_j`, `Z = ∂_k` and `η = ξ_a` the four equations
//! are evaluated in coordinates:
//!
//! * Gauss: `A_{β(Y,Z)}X + B_{α(Y,Z)}X − A_{β(X,Z)}Y − B_{α(X,Z)}Y = 0`,
//!   measured in the metric norm;
//! * Codazzi: `(∇⊥_X β)(Y,Z) − (∇⊥_Y β)(X,Z) − 𝓔(Y, α(X,Z)) + 𝓔(X, α(Y,Z)) = 0`;
//! * Codazzi, tangential form:
//!   `(∇_X B_η)Y − (∇_Y B_η)X − B_{∇⊥_X η}Y + B_{∇⊥_Y η}X − A_{𝓔(X,η)}Y + A_{𝓔(Y,η)}X = 0`;
//! * Ricci: `(∇⊥_X 𝓔)(Y,η) − (∇⊥_Y 𝓔)(X,η) − β(X, A_η Y) + β(A_η X, Y) − α(X, B_η Y) + α(B_η X, Y) = 0`.
//!
//! Covariant derivatives use `Γ` on tangent slots and `ω` on normal slots:
//! `(∇⊥_i β)ᵃ_jk = ∂_i βᵃ_jk − Γˡ_ij βᵃ_lk − Γˡ_ik βᵃ_jl + βᵇ_jk ωᵢᵇᵃ`.
//!
//! Each residual is a sup over nodes and indices divided by a magnitude
//! scale, so that the system's linearity survives in [`Residual::raw`].

use serde::Serialize;

use crate::bending::{compatibility_residual, AssociatedPair};
use crate::error::{Error, Result};
use crate::geometry::{normal_covariant_2, FramedGeometry};
use crate::numgrid::{gradient, GridField};
use crate::tolerance::{Check, Residual, Tolerance, STRUCTURE, SYSTEM};

pub fn gauss_residual(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<Residual> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let per_node = (0..geom.nodes())
        .map(|node| {
            let mut worst: f64 = 0.0;
            let mut v = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for (l, vl) in v.iter_mut().enumerate() {
                            *vl = (0..p)
                                .map(|a| {
                                    pair.beta(node, j, k, a) * geom.shape_op(node, a, l, i)
                                        + geom.alpha(node, j, k, a) * pair.bop(node, a, l, i)
                                        - pair.beta(node, i, k, a) * geom.shape_op(node, a, l, j)
                                        - geom.alpha(node, i, k, a) * pair.bop(node, a, l, j)
                                })
                                .sum();
                        }
                        let sq: f64 = (0..n)
                            .flat_map(|l| (0..n).map(move |q| (l, q)))
                            .map(|(l, q)| v[l] * geom.g(node, l, q) * v[q])
                            .sum();
                        worst = worst.max(sq.max(0.0).sqrt());
                    }
                }
            }
            worst
        })
        .collect();
    Ok(Residual::new(per_node, geom.alpha_max() * pair.beta_max()))
}

fn codazzi_scale(geom: &FramedGeometry, pair: &AssociatedPair) -> f64 {
    pair.beta_max().max(geom.alpha_max() * pair.e_max())
}

pub fn codazzi_residual(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<Residual> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let cov = normal_covariant_2(geom, pair.beta_field());
    let per_node = (0..geom.nodes())
        .map(|node| {
            let c = cov.at(node);
            let nb = |i: usize, j: usize, k: usize, a: usize| c[((i * n + j) * n + k) * p + a];
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..i {
                    for k in 0..n {
                        for a in 0..p {
                            let mut v = nb(i, j, k, a) - nb(j, i, k, a);
                            for b in 0..p {
                                v += -geom.alpha(node, i, k, b) * pair.e(node, j, b, a)
                                    + geom.alpha(node, j, k, b) * pair.e(node, i, b, a);
                            }
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
            worst
        })
        .collect();
    Ok(Residual::new(per_node, codazzi_scale(geom, pair)))
}

pub fn codazzi2_residual(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<Residual> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let dbop = gradient(pair.bop_field());
    // (∇_i B_a)ᵏ_j = ∂_i (B_a)ᵏ_j + Γᵏ_il (B_a)ˡ_j − Γˡ_ij (B_a)ᵏ_l
    let nabla_b = |node: usize, i: usize, a: usize, k: usize, j: usize| -> f64 {
        let mut v = dbop[i].at(node)[(a * n + k) * n + j];
        for l in 0..n {
            v += geom.gamma(node, k, i, l) * pair.bop(node, a, l, j) - geom.gamma(node, l, i, j) * pair.bop(node, a, k, l);
        }
        v
    };
    let per_node = (0..geom.nodes())
        .map(|node| {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..i {
                    for a in 0..p {
                        for k in 0..n {
                            let mut v = nabla_b(node, i, a, k, j) - nabla_b(node, j, a, k, i);
                            for b in 0..p {
                                v += -geom.omega(node, i, a, b) * pair.bop(node, b, k, j)
                                    + geom.omega(node, j, a, b) * pair.bop(node, b, k, i)
                                    - pair.e(node, i, a, b) * geom.shape_op(node, b, k, j)
                                    + pair.e(node, j, a, b) * geom.shape_op(node, b, k, i);
                            }
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
            worst
        })
        .collect();
    Ok(Residual::new(per_node, codazzi_scale(geom, pair)))
}

/// `(∇⊥_i 𝓔)ᶜ_ja` with layout `[i][j][a][c]`.
fn nabla_e(geom: &FramedGeometry, pair: &AssociatedPair) -> GridField {
    let (n, p) = (geom.n(), geom.p());
    let de = gradient(pair.e_field());
    GridField::from_fn(geom.grid(), &[n, n, p, p], |node, _, out| {
        for i in 0..n {
            let di = de[i].at(node);
            for j in 0..n {
                for a in 0..p {
                    for c in 0..p {
                        let mut v = di[(j * p + a) * p + c];
                        for b in 0..p {
                            v += pair.e(node, j, a, b) * geom.omega(node, i, b, c)
                                - geom.omega(node, i, a, b) * pair.e(node, j, b, c);
                        }
                        for l in 0..n {
                            v -= geom.gamma(node, l, i, j) * pair.e(node, l, a, c);
                        }
                        out[((i * n + j) * p + a) * p + c] = v;
                    }
                }
            }
        }
    })
}

pub fn ricci_residual(geom: &FramedGeometry, pair: &AssociatedPair) -> Result<Residual> {
    pair.check(geom)?;
    let (n, p) = (geom.n(), geom.p());
    let ne = nabla_e(geom, pair);
    let per_node = (0..geom.nodes())
        .map(|node| {
            let d = ne.at(node);
            let nev = |i: usize, j: usize, a: usize, c: usize| d[((i * n + j) * p + a) * p + c];
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..i {
                    for a in 0..p {
                        for c in 0..p {
                            let mut v = nev(i, j, a, c) - nev(j, i, a, c);
                            for k in 0..n {
                                v += -geom.shape_op(node, a, k, j) * pair.beta(node, i, k, c)
                                    + geom.shape_op(node, a, k, i) * pair.beta(node, k, j, c)
                                    - pair.bop(node, a, k, j) * geom.alpha(node, i, k, c)
                                    + pair.bop(node, a, k, i) * geom.alpha(node, k, j, c);
                            }
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
            worst
        })
        .collect();
    Ok(Residual::new(per_node, pair.e_max().max(geom.alpha_max() * pair.beta_max())))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemReport {
    pub gauss: f64,
    pub codazzi: f64,
    pub codazzi2: f64,
    pub ricci: f64,
    pub anti: f64,
    pub pass: bool,
    pub tol: f64,
}

impl SystemReport {
    pub fn checks(&self) -> Vec<Check> {
        [
            ("gauss", self.gauss),
            ("codazzi", self.codazzi),
            ("codazzi2", self.codazzi2),
            ("ricci", self.ricci),
            ("anti", self.anti),
        ]
        .into_iter()
        .map(|(name, v)| Check::at_most(name, v, self.tol))
        .collect()
    }

    pub fn max(&self) -> f64 {
        [self.gauss, self.codazzi, self.codazzi2, self.ricci, self.anti]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Smallest margin `tol / residual` over the five equations.
    pub fn margin(&self) -> f64 {
        self.checks().iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

/// All five residuals, compared against `SYSTEM · h² · factor`.
pub fn verify(geom: &FramedGeometry, pair: &AssociatedPair, tol: &Tolerance) -> Result<SystemReport> {
    let limit = tol.tol(SYSTEM);
    let gauss = gauss_residual(geom, pair)?.value();
    let codazzi = codazzi_residual(geom, pair)?.value();
    let codazzi2 = codazzi2_residual(geom, pair)?.value();
    let ricci = ricci_residual(geom, pair)?.value();
    let anti = compatibility_residual(pair).value();
    let pass = [gauss, codazzi, codazzi2, ricci, anti].iter().all(|&v| v <= limit);
    Ok(SystemReport {
        gauss,
        codazzi,
        codazzi2,
        ricci,
        anti,
        pass,
        tol: limit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypersurfaceReport {
    pub wedge: f64,
    pub codazzi: f64,
    pub symmetry: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Wedge, Codazzi and symmetry residuals of a candidate tensor on a
/// hypersurface. `bhat` holds `⟨𝓑∂_i, ∂_j⟩` with layout `[i][j]`.
pub fn hypersurface_conditions(geom: &FramedGeometry, bhat: &GridField, tol: &Tolerance) -> Result<HypersurfaceReport> {
    let n = geom.n();
    if geom.p() != 1 {
        return Err(Error::Precondition(format!(
            "hypersurface pairs need codimension 1, scene `{}` has {}",
            geom.scene().label(),
            geom.p()
        )));
    }
    if bhat.grid() != geom.grid() || bhat.shape() != [n, n] {
        return Err(Error::ShapeMismatch(format!(
            "tensor has shape {:?}, expected {:?}",
            bhat.shape(),
            [n, n]
        )));
    }
    let scale = 1f64.max(bhat.max_abs()).max(geom.alpha_max() * bhat.max_abs());
    let mut symmetry: f64 = 0.0;
    let mut wedge: f64 = 0.0;
    for node in 0..geom.nodes() {
        let b = bhat.at(node);
        let bop = |k: usize, j: usize| -> f64 { (0..n).map(|l| geom.g_inv(node, k, l) * b[l * n + j]).sum() };
        let a = |k: usize, j: usize| geom.shape_op(node, 0, k, j);
        for i in 0..n {
            for j in 0..n {
                symmetry = symmetry.max((b[i * n + j] - b[j * n + i]).abs());
                // W = 𝓑∂_i ∧ A∂_j − 𝓑∂_j ∧ A∂_i, components W^{kl}
                let w = |k: usize, l: usize| {
                    bop(k, i) * a(l, j) - bop(l, i) * a(k, j) - bop(k, j) * a(l, i) + bop(l, j) * a(k, i)
                };
                let mut sq = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        for q in 0..n {
                            for r in 0..n {
                                sq += 0.5 * w(k, l) * w(q, r) * geom.g(node, k, q) * geom.g(node, l, r);
                            }
                        }
                    }
                }
                wedge = wedge.max(sq.max(0.0).sqrt());
            }
        }
    }
    let beta = GridField::from_fn(geom.grid(), &[n, n, 1], |node, _, out| out.copy_from_slice(bhat.at(node)));
    let cov = normal_covariant_2(geom, &beta);
    let mut codazzi: f64 = 0.0;
    for node in 0..geom.nodes() {
        let c = cov.at(node);
        for i in 0..n {
            for j in 0..i {
                for k in 0..n {
                    codazzi = codazzi.max((c[(i * n + j) * n + k] - c[(j * n + i) * n + k]).abs());
                }
            }
        }
    }
    let (wedge, codazzi, symmetry) = (wedge / scale, codazzi / scale, symmetry / scale);
    let limit = tol.tol(STRUCTURE);
    Ok(HypersurfaceReport {
        wedge,
        codazzi,
        symmetry,
        tol: limit,
        pass: wedge <= limit && codazzi <= limit && symmetry <= limit,
    })
}

/// The pair `(β, 0)` with `β = ⟨𝓑·, ·⟩ ξ`, refusing tensors that violate
/// the wedge or Codazzi condition.
pub fn hypersurface_pair(
    geom: &FramedGeometry,
    bhat: &GridField,
    tol: &Tolerance,
) -> Result<(AssociatedPair, HypersurfaceReport)> {
    let report = hypersurface_conditions(geom, bhat, tol)?;
    if !report.pass {
        return Err(Error::SystemViolated(format!(
            "wedge {:.3e}, Codazzi {:.3e}, symmetry {:.3e} against tolerance {:.3e}",
            report.wedge, report.codazzi, report.symmetry, report.tol
        )));
    }
    let n = geom.n();
    let beta = GridField::from_fn(geom.grid(), &[n, n, 1], |node, _, out| out.copy_from_slice(bhat.at(node)));
    let e = GridField::zeros(geom.grid(), &[n, 1, 1]);
    Ok((AssociatedPair::from_parts(geom, beta, e)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, ImmersionScene};
    use crate::numgrid::ChartGrid;
    use std::f64::consts::PI;

    fn cylinder() -> FramedGeometry {
        let grid = ChartGrid::new(vec![[0.0, 2.0 * PI], [-1.0, 1.0]], vec![32, 32], vec![true, false]).unwrap();
        let scene = ImmersionScene::from_fn(&grid, 3, "cylinder", |x, out| {
            out.copy_from_slice(&[x[0].cos(), x[0].sin(), x[1]]);
        })
        .unwrap();
        build_geometry(&scene).unwrap()
    }

    #[test]
    fn zero_pair_solves_the_system() {
        let geom = cylinder();
        let rep = verify(&geom, &AssociatedPair::zero(&geom), &Tolerance::for_grid(geom.grid())).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max(), 0.0);
    }

    #[test]
    fn hypersurface_second_fundamental_form_is_accepted() {
        let geom = cylinder();
        let tol = Tolerance::for_grid(geom.grid());
        let alpha = GridField::from_fn(geom.grid(), &[2, 2], |node, _, out| {
            for i in 0..2 {
                for j in 0..2 {
                    out[i * 2 + j] = geom.alpha(node, i, j, 0);
                }
            }
        });
        let (pair, rep) = hypersurface_pair(&geom, &alpha, &tol).unwrap();
        assert!(rep.wedge < 1e-12);
        let sys = verify(&geom, &pair, &tol).unwrap();
        assert!(sys.pass, "{sys:?}");
        assert!(ricci_residual(&geom, &pair).unwrap().raw() <= 1e-12);
    }

    #[test]
    fn metric_is_rejected_by_the_wedge_condition() {
        let geom = cylinder();
        let tol = Tolerance::for_grid(geom.grid());
        let rep = hypersurface_conditions(&geom, geom.metric(), &tol).unwrap();
        assert!(rep.codazzi <= rep.tol);
        assert!(rep.wedge >= 0.5, "{rep:?}");
        assert!(hypersurface_pair(&geom, geom.metric(), &tol).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let geom = cylinder();
        let grid = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 1.0]], 8, vec![false, false]).unwrap();
        let scene = ImmersionScene::from_fn(&grid, 4, "plane", |x, out| out.copy_from_slice(&[x[0], x[1], 0.0, 0.0])).unwrap();
        let other = build_geometry(&scene).unwrap();
        let pair = AssociatedPair::zero(&other);
        assert!(matches!(gauss_residual(&geom, &pair), Err(Error::ShapeMismatch(_))));
    }
}
