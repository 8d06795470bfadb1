//! Catalog of closed-form immersions, bendings and pairs.
//!
//! Entries are addressed by spec strings `id[:arg,key=value,...]`, for
//! example `cylinder`, `sphere:r=2`, `circle_fourier:2,axis=1,offset=2` or
//! `killing:rot`. Bendings may be summed with `+`, and pair specs accept the
//! perturbation suffixes `@beta=ε` and `@E=ε`.
//!
//! ```
//! use infbend::scenes::{bending, scene, Spec};
//! use infbend::geometry::build_geometry;
//! use infbend::bending::bending_residual;
//!
//! let s = scene(&Spec::parse("cylinder")?, 32, None)?;
//! let geom = build_geometry(&s)?;
//! let t = bending(&Spec::parse("circle_fourier:2")?, &geom)?;
//! let h = geom.grid().max_spacing();
//! assert!(bending_residual(&geom, &t)?.value() <= 10.0 * h * h);
//! # Ok::<(), infbend::Error>(())
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::bending::{associated_pair, AssociatedPair, BendingField};
use crate::classify::{killing_pair, KillingField};
use crate::error::{Error, Result};
use crate::fundsys::hypersurface_pair;
use crate::geometry::{FramedGeometry, ImmersionScene};
use crate::numgrid::{ChartGrid, GridField};
use crate::products::extrinsic_product;
use crate::tolerance::Tolerance;

pub const SCENES: &[&str] = &[
    "plane",
    "line",
    "cylinder",
    "cylinder_r4",
    "circle",
    "torus",
    "sphere",
    "graph",
    "complex_graph",
    "product",
];

pub const BENDINGS: &[&str] = &["zero", "killing", "circle_fourier", "normal_field", "radial"];

pub const PAIRS: &[&str] = &["codazzi_hypersurface", "killing_pair"];

/// A parsed catalog reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Spec {
    pub id: String,
    positional: Vec<String>,
    named: Vec<(String, String)>,
}

impl Spec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (id, rest) = match text.split_once(':') {
            Some((id, rest)) => (id, Some(rest)),
            None => (text, None),
        };
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::BadParam(format!("malformed catalog id in `{text}`")));
        }
        let mut positional = Vec::new();
        let mut named = Vec::new();
        for item in rest.into_iter().flat_map(|r| r.split(',')) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            match item.split_once('=') {
                Some((k, v)) => named.push((k.trim().to_string(), v.trim().to_string())),
                None => positional.push(item.to_string()),
            }
        }
        Ok(Self {
            id: id.to_string(),
            positional,
            named,
        })
    }

    pub fn named(id: &str) -> Self {
        Self {
            id: id.into(),
            positional: Vec::new(),
            named: Vec::new(),
        }
    }

    pub fn from_parts(id: &str, positional: Vec<String>, named: Vec<(String, String)>) -> Result<Self> {
        let spec = Self::parse(id)?;
        if spec != Self::named(id) {
            return Err(Error::BadParam(format!("malformed catalog id `{id}`")));
        }
        Ok(Self {
            positional,
            named,
            ..spec
        })
    }

    pub fn positional(&self) -> &[String] {
        &self.positional
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.named
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.named.push((key.into(), value.to_string()));
        self
    }

    fn raw(&self, key: &str, pos: Option<usize>) -> Option<&str> {
        self.named
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .or_else(|| pos.and_then(|p| self.positional.get(p)).map(String::as_str))
    }

    pub fn f64(&self, key: &str, pos: Option<usize>, default: f64) -> Result<f64> {
        match self.raw(key, pos) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::BadParam(format!("`{}`: {key} = `{v}` is not a number", self.id))),
        }
    }

    pub fn usize(&self, key: &str, pos: Option<usize>, default: usize) -> Result<usize> {
        match self.raw(key, pos) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| Error::BadParam(format!("`{}`: {key} = `{v}` is not a count", self.id))),
        }
    }

    pub fn str(&self, key: &str, pos: Option<usize>) -> Option<&str> {
        self.raw(key, pos)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key, None)
            .map(|v| {
                v.split(';')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::BadParam(format!("`{}`: bad list entry `{x}` in {key}", self.id)))
                    })
                    .collect()
            })
            .transpose()
    }

    fn allow(&self, keys: &[&str], max_positional: usize) -> Result<()> {
        if let Some((k, _)) = self.named.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
            return Err(Error::BadParam(format!("`{}` has no parameter `{k}`", self.id)));
        }
        if self.positional.len() > max_positional {
            return Err(Error::BadParam(format!(
                "`{}` takes at most {max_positional} positional arguments",
                self.id
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Spec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.id)?;
        let items: Vec<String> = self
            .positional
            .iter()
            .cloned()
            .chain(self.named.iter().map(|(k, v)| format!("{k}={v}")))
            .collect();
        if !items.is_empty() {
            write!(f, ":{}", items.join(","))?;
        }
        Ok(())
    }
}

fn axis(bounds: [f64; 2], periodic: bool) -> ([f64; 2], bool) {
    (bounds, periodic)
}

const FULL_TURN: [f64; 2] = [0.0, 2.0 * PI];

/// Default chart of a catalog scene.
fn default_chart(spec: &Spec) -> Result<Vec<([f64; 2], bool)>> {
    Ok(match spec.id.as_str() {
        "plane" => vec![axis([-1.0, 1.0], false); spec.usize("n", Some(0), 2)?],
        "line" => vec![axis([-1.0, 1.0], false)],
        "cylinder" | "cylinder_r4" => vec![axis(FULL_TURN, true), axis([-1.0, 1.0], false)],
        "circle" => vec![axis(FULL_TURN, true)],
        "torus" => vec![axis(FULL_TURN, true), axis(FULL_TURN, true)],
        "sphere" => vec![axis([0.5, PI - 0.5], false), axis(FULL_TURN, true)],
        "graph" | "complex_graph" => vec![axis([-1.0, 1.0], false); 2],
        other => return Err(Error::UnknownCatalog(other.into())),
    })
}

/// Grid for a catalog scene. `chart` replaces the default bounds; an axis
/// stays periodic only when its bounds are left at the default.
pub fn grid_for(spec: &Spec, resolution: usize, chart: Option<&[[f64; 2]]>) -> Result<ChartGrid> {
    let default = default_chart(spec)?;
    let bounds: Vec<[f64; 2]> = match chart {
        Some(c) if c.len() != default.len() => {
            return Err(Error::BadParam(format!(
                "chart has {} axes, `{}` has {}",
                c.len(),
                spec.id,
                default.len()
            )))
        }
        Some(c) => c.to_vec(),
        None => default.iter().map(|d| d.0).collect(),
    };
    let periodic = default.iter().zip(&bounds).map(|(d, b)| d.1 && d.0 == *b).collect();
    ChartGrid::uniform(bounds, resolution, periodic)
}

/// Builds a catalog scene on its default chart (or on `chart`).
pub fn scene(spec: &Spec, resolution: usize, chart: Option<&[[f64; 2]]>) -> Result<ImmersionScene> {
    if spec.id == "product" {
        if chart.is_some() {
            return Err(Error::BadParam("products take their charts from the factors".into()));
        }
        let factors = product_factors(spec, resolution)?;
        return Ok(extrinsic_product(&factors)?.0);
    }
    let grid = grid_for(spec, resolution, chart)?;
    scene_on(spec, &grid)
}

/// Factor scenes of a `product:a*b*...` spec.
pub fn product_factors(spec: &Spec, resolution: usize) -> Result<Vec<ImmersionScene>> {
    spec.allow(&[], 1)?;
    let list = spec
        .str("", Some(0))
        .ok_or_else(|| Error::BadParam("`product` needs factors, e.g. product:circle*circle".into()))?;
    list.split('*')
        .map(|f| {
            let f = Spec::parse(f)?;
            if f.id == "product" {
                return Err(Error::BadParam("nested products are not supported".into()));
            }
            scene(&f, resolution, None)
        })
        .collect()
}

/// Builds a catalog scene on an explicit grid.
pub fn scene_on(spec: &Spec, grid: &ChartGrid) -> Result<ImmersionScene> {
    let label = spec.to_string();
    let expect_dim = default_chart(spec)?.len();
    if grid.dim() != expect_dim {
        return Err(Error::ShapeMismatch(format!(
            "`{}` is {expect_dim}-dimensional, grid has {} axes",
            spec.id,
            grid.dim()
        )));
    }
    match spec.id.as_str() {
        "plane" => {
            spec.allow(&["n", "m"], 2)?;
            let n = spec.usize("n", Some(0), 2)?;
            let m = spec.usize("m", Some(1), n + 1)?;
            if m < n {
                return Err(Error::BadParam(format!("plane needs m ≥ n, got n = {n}, m = {m}")));
            }
            ImmersionScene::from_fn(grid, m, label, |x, out| {
                out.fill(0.0);
                out[..n].copy_from_slice(x);
            })
        }
        "line" => {
            spec.allow(&[], 0)?;
            ImmersionScene::from_fn(grid, 1, label, |x, out| out[0] = x[0])
        }
        "cylinder" => {
            spec.allow(&["r", "warp"], 1)?;
            let r = positive(spec, "r", Some(0), 1.0)?;
            let warp = spec.f64("warp", None, 0.0)?;
            ImmersionScene::from_fn(grid, 3, label, |x, out| {
                let rho = r + warp * x[1] * x[1];
                out.copy_from_slice(&[rho * x[0].cos(), rho * x[0].sin(), x[1]]);
            })
        }
        "cylinder_r4" => {
            spec.allow(&["r"], 1)?;
            let r = positive(spec, "r", Some(0), 1.0)?;
            ImmersionScene::from_fn(grid, 4, label, |x, out| {
                out.copy_from_slice(&[r * x[0].cos(), r * x[0].sin(), x[1], 0.0]);
            })
        }
        "circle" => {
            spec.allow(&["r"], 1)?;
            let r = positive(spec, "r", Some(0), 1.0)?;
            ImmersionScene::from_fn(grid, 2, label, |x, out| {
                out.copy_from_slice(&[r * x[0].cos(), r * x[0].sin()]);
            })
        }
        "torus" => {
            spec.allow(&["r1", "r2"], 2)?;
            let r1 = positive(spec, "r1", Some(0), 1.0)?;
            let r2 = positive(spec, "r2", Some(1), 1.0)?;
            ImmersionScene::from_fn(grid, 4, label, |x, out| {
                out.copy_from_slice(&[r1 * x[0].cos(), r1 * x[0].sin(), r2 * x[1].cos(), r2 * x[1].sin()]);
            })
        }
        "sphere" => {
            spec.allow(&["r"], 1)?;
            let r = positive(spec, "r", Some(0), 1.0)?;
            ImmersionScene::from_fn(grid, 3, label, |x, out| {
                let (t, p) = (x[0], x[1]);
                out.copy_from_slice(&[r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()]);
            })
        }
        "graph" => {
            spec.allow(&["a", "shape"], 1)?;
            let a = spec.f64("a", Some(0), 0.5)?;
            let bump = match spec.str("shape", None).unwrap_or("bump") {
                "bump" => true,
                "saddle" => false,
                other => return Err(Error::BadParam(format!("graph shape `{other}` (bump | saddle)"))),
            };
            ImmersionScene::from_fn(grid, 3, label, |x, out| {
                let h = if bump {
                    a * (-(x[0] * x[0] + x[1] * x[1])).exp()
                } else {
                    0.5 * a * (x[0] * x[0] - x[1] * x[1])
                };
                out.copy_from_slice(&[x[0], x[1], h]);
            })
        }
        "complex_graph" => {
            spec.allow(&[], 0)?;
            ImmersionScene::from_fn(grid, 4, label, |x, out| {
                let (u, v) = (x[0], x[1]);
                out.copy_from_slice(&[u, v, u * u - v * v, 2.0 * u * v]);
            })
        }
        other => Err(Error::UnknownCatalog(other.into())),
    }
}

fn positive(spec: &Spec, key: &str, pos: Option<usize>, default: f64) -> Result<f64> {
    let v = spec.f64(key, pos, default)?;
    if v <= 0.0 {
        return Err(Error::BadParam(format!("`{}`: {key} must be positive", spec.id)));
    }
    Ok(v)
}

/// Ambient Killing field described by a `killing` spec.
///
/// `rot` (or `i`, `j`) picks the rotation generator of the `(i, j)` plane,
/// `gen` lists the upper-triangle entries row by row, `v` the translation;
/// lists are `;`-separated.
pub fn killing_field(spec: &Spec, m: usize) -> Result<KillingField> {
    spec.allow(&["i", "j", "s", "gen", "v"], 1)?;
    let mut d = DMatrix::zeros(m, m);
    let gen = spec.list("gen")?;
    let translation = spec.list("v")?;
    let rot = spec.str("", Some(0));
    if let Some(g) = gen {
        let want = m * (m - 1) / 2;
        if g.len() != want {
            return Err(Error::BadParam(format!("gen needs {want} entries for m = {m}, got {}", g.len())));
        }
        let mut it = g.into_iter();
        for a in 0..m {
            for b in a + 1..m {
                let w = it.next().expect("length checked");
                d[(a, b)] = w;
                d[(b, a)] = -w;
            }
        }
    } else if rot.is_some() || spec.raw("i", None).is_some() || translation.is_none() {
        if let Some(r) = rot {
            if r != "rot" {
                return Err(Error::BadParam(format!("killing: unknown argument `{r}`")));
            }
        }
        let (i, j) = (spec.usize("i", None, 0)?, spec.usize("j", None, 1)?);
        if i >= m || j >= m || i == j {
            return Err(Error::BadParam(format!("rotation plane ({i}, {j}) is invalid in ℝ^{m}")));
        }
        let s = spec.f64("s", None, 1.0)?;
        // x_i ↦ −s x_j, x_j ↦ s x_i
        d[(i, j)] = -s;
        d[(j, i)] = s;
    }
    let v = match translation {
        Some(v) if v.len() != m => {
            return Err(Error::BadParam(format!("v needs {m} entries, got {}", v.len())));
        }
        Some(v) => DVector::from_vec(v),
        None => DVector::zeros(m),
    };
    KillingField::new(d, v)
}

/// Closed-form plane-curve bending of the unit circle with
/// `τ′(θ) = cos kθ · (cos θ, sin θ)`.
pub fn fourier_tau(k: f64, theta: f64) -> [f64; 2] {
    let (kp, km) = (k + 1.0, k - 1.0);
    [
        0.5 * ((kp * theta).sin() / kp + (km * theta).sin() / km),
        0.5 * (-(kp * theta).cos() / kp + (km * theta).cos() / km),
    ]
}

/// Builds a catalog bending (or a `+`-separated sum) on `geom`.
pub fn bending(spec: &Spec, geom: &FramedGeometry) -> Result<BendingField> {
    let m = geom.m();
    let label = spec.to_string();
    let grid = geom.grid();
    match spec.id.as_str() {
        "zero" => {
            spec.allow(&[], 0)?;
            Ok(BendingField::zero(geom))
        }
        "radial" => {
            spec.allow(&[], 0)?;
            BendingField::new(geom.scene().map().clone(), label)
        }
        "killing" => killing_field(spec, m)?.restrict(geom, label),
        "circle_fourier" => {
            spec.allow(&["k", "axis", "offset", "amp"], 1)?;
            let k = spec.usize("k", Some(0), 2)?;
            if k < 2 {
                return Err(Error::BadParam("circle_fourier needs k ≥ 2".into()));
            }
            let ax = spec.usize("axis", None, 0)?;
            let off = spec.usize("offset", None, 0)?;
            let amp = spec.f64("amp", None, 1.0)?;
            if ax >= grid.dim() || off + 2 > m {
                return Err(Error::BadParam(format!(
                    "circle_fourier axis {ax} / offset {off} do not fit a {}-dimensional chart in ℝ^{m}",
                    grid.dim()
                )));
            }
            let t = GridField::from_fn(grid, &[m], |_, x, out| {
                out.fill(0.0);
                let tau = fourier_tau(k as f64, x[ax]);
                out[off] = amp * tau[0];
                out[off + 1] = amp * tau[1];
            });
            BendingField::new(t, label)
        }
        "normal_field" => {
            spec.allow(&["w", "profile", "dir"], 1)?;
            let w = spec.f64("w", Some(0), 1.0)?;
            let dir = spec.usize("dir", None, m - 1)?;
            if dir >= m {
                return Err(Error::BadParam(format!("normal_field direction {dir} outside ℝ^{m}")));
            }
            let wave = match spec.str("profile", None).unwrap_or("const") {
                "const" => false,
                "wave" => true,
                other => return Err(Error::BadParam(format!("normal_field profile `{other}` (const | wave)"))),
            };
            let t = GridField::from_fn(grid, &[m], |_, x, out| {
                out.fill(0.0);
                let phi = if wave {
                    1.0 + 0.5 * x.iter().map(|c| c.sin()).product::<f64>() + 0.25 * x[x.len() - 1].powi(2)
                } else {
                    1.0
                };
                out[dir] = w * phi;
            });
            BendingField::new(t, label)
        }
        other => Err(Error::UnknownCatalog(other.into())),
    }
}

/// Sum of the bendings in a `+`-separated list.
pub fn bending_sum(text: &str, geom: &FramedGeometry) -> Result<BendingField> {
    let mut total: Option<BendingField> = None;
    for part in text.split('+') {
        let b = bending(&Spec::parse(part)?, geom)?;
        total = Some(match total {
            None => b,
            Some(t) => t.combine(1.0, &b, 1.0)?,
        });
    }
    let mut t = total.ok_or_else(|| Error::BadParam("empty bending spec".into()))?;
    if text.contains('+') {
        t = BendingField::new(t.field().clone(), text)?;
    }
    Ok(t)
}

/// Smooth perturbation profile used by the `@beta` and `@E` suffixes.
fn bump(x: &[f64]) -> f64 {
    1.0 + 0.5 * x.iter().sum::<f64>().sin()
}

/// Adds `ε·bump` to every `βᵃ_ij` (a symmetric perturbation).
pub fn perturb_beta(geom: &FramedGeometry, pair: &AssociatedPair, eps: f64) -> Result<AssociatedPair> {
    let beta = GridField::from_fn(geom.grid(), pair.beta_field().shape(), |node, x, out| {
        let b = bump(x);
        for (o, v) in out.iter_mut().zip(pair.beta_field().at(node)) {
            *o = v + eps * b;
        }
    });
    AssociatedPair::from_parts(geom, beta, pair.e_field().clone())
}

/// Adds `ε·bump` to every `𝓔ᵇ_ia` (symmetric in `a, b`, so it breaks skewness).
pub fn perturb_e(geom: &FramedGeometry, pair: &AssociatedPair, eps: f64) -> Result<AssociatedPair> {
    let e = GridField::from_fn(geom.grid(), pair.e_field().shape(), |node, x, out| {
        let b = bump(x);
        for (o, v) in out.iter_mut().zip(pair.e_field().at(node)) {
            *o = v + eps * b;
        }
    });
    AssociatedPair::from_parts(geom, pair.beta_field().clone(), e)
}

/// Resolves a pair spec: `codazzi_hypersurface:<A|g|zero|s>`, `killing_pair`
/// with the parameters of `killing`, or any bending sum (whose associated
/// pair is taken), followed by optional `@beta=ε` / `@E=ε` suffixes.
pub fn pair(text: &str, geom: &FramedGeometry, tol: &Tolerance) -> Result<AssociatedPair> {
    let mut parts = text.split('@');
    let head = parts.next().unwrap_or_default();
    let first = Spec::parse(head.split('+').next().unwrap_or_default())?;
    let mut pair = match first.id.as_str() {
        "codazzi_hypersurface" => {
            first.allow(&["s"], 1)?;
            let which = first.str("", Some(0)).unwrap_or("A");
            let s = first.f64("s", None, 1.0)?;
            let n = geom.n();
            if geom.p() != 1 {
                return Err(Error::Precondition(format!(
                    "codazzi_hypersurface needs codimension 1, `{}` has {}",
                    geom.scene().label(),
                    geom.p()
                )));
            }
            let bhat = match which {
                "A" => GridField::from_fn(geom.grid(), &[n, n], |node, _, out| {
                    for i in 0..n {
                        for j in 0..n {
                            out[i * n + j] = s * geom.alpha(node, i, j, 0);
                        }
                    }
                }),
                "g" | "identity" => geom.metric().scaled(s),
                "zero" => GridField::zeros(geom.grid(), &[n, n]),
                other => return Err(Error::BadParam(format!("codazzi_hypersurface tensor `{other}` (A | g | zero)"))),
            };
            hypersurface_pair(geom, &bhat, tol)?.0
        }
        "killing_pair" => killing_pair(geom, &killing_field(&first, geom.m())?.d)?,
        _ => associated_pair(geom, &bending_sum(head, geom)?, tol)?.1,
    };
    for suffix in parts {
        let (key, value) = suffix
            .split_once('=')
            .ok_or_else(|| Error::BadParam(format!("perturbation `@{suffix}` needs a value")))?;
        let eps: f64 = value
            .parse()
            .map_err(|_| Error::BadParam(format!("perturbation size `{value}` is not a number")))?;
        pair = match key {
            "beta" => perturb_beta(geom, &pair, eps)?,
            "E" | "e" => perturb_e(geom, &pair, eps)?,
            other => return Err(Error::BadParam(format!("unknown perturbation `@{other}` (beta | E)"))),
        };
    }
    Ok(pair)
}

/// The variation `f + t·𝓣` sampled as a new scene.
pub fn variation(scene: &ImmersionScene, t: &BendingField, s: f64) -> Result<ImmersionScene> {
    let map = scene.map().combine(1.0, t.field(), s)?;
    ImmersionScene::new(map, format!("{} + {s}·{}", scene.label(), t.label()))
}
