//! Scene files: JSON documents holding a scene, a bending or a pair, either
//! as a catalog reference or as sampled values.
//!
//! ```json
//! {
//!   "kind": "bending",
//!   "grid": {"dim": 1, "bounds": [[0, 6.283185307179586]], "resolution": [8], "periodic": [true]},
//!   "catalog": {"id": "circle_fourier", "params": {"k": 2}}
//! }
//! ```
//!
//! `values` replaces `catalog` for sampled data: `[nodes][m]` for scenes and
//! bendings, `{"beta": [nodes][n][n][p], "E": [nodes][n][p][p]}` for pairs.
//! Written numbers carry 17 significant digits so reading back is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bending::{AssociatedPair, BendingField};
use crate::geometry::{FramedGeometry, ImmersionScene};
use crate::numgrid::{ChartGrid, GridField};
use crate::scenes::{self, Spec};
use crate::tolerance::Tolerance;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scene,
    Bending,
    Pair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub bounds: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn of(grid: &ChartGrid) -> Self {
        Self {
            dim: grid.dim(),
            bounds: grid.bounds().to_vec(),
            resolution: grid.resolution().to_vec(),
            periodic: grid.periodic().to_vec(),
        }
    }

    pub fn build(&self) -> Result<ChartGrid> {
        if self.bounds.len() != self.dim || self.resolution.len() != self.dim || self.periodic.len() != self.dim {
            return Err(Error::Format(format!(
                "grid declares dim {} but lists {} bounds, {} resolutions, {} periodic flags",
                self.dim,
                self.bounds.len(),
                self.resolution.len(),
                self.periodic.len()
            )));
        }
        ChartGrid::new(self.bounds.clone(), self.resolution.clone(), self.periodic.clone())
    }
}

/// Sampled payload, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    Map { shape: Vec<usize>, data: Vec<f64> },
    Pair { beta: (Vec<usize>, Vec<f64>), e: (Vec<usize>, Vec<f64>) },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Catalog(Spec),
    Values(Values),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneFile {
    pub kind: Kind,
    pub grid: GridSpec,
    pub label: Option<String>,
    pub payload: Payload,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    kind: Kind,
    grid: GridSpec,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    catalog: Option<RawCatalog>,
    #[serde(default)]
    values: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    id: String,
    #[serde(default)]
    params: serde_json::Map<String, Value>,
}

fn scalar_text(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(Error::Format(format!("catalog parameter `{key}` must be a string or number"))),
    }
}

fn catalog_spec(raw: RawCatalog) -> Result<Spec> {
    let mut positional = Vec::new();
    let mut named = Vec::new();
    for (k, v) in raw.params {
        if k == "args" {
            let items = v
                .as_array()
                .ok_or_else(|| Error::Format("catalog `args` must be an array".into()))?;
            for item in items {
                positional.push(scalar_text("args", item)?);
            }
        } else {
            let text = scalar_text(&k, &v)?;
            named.push((k, text));
        }
    }
    Spec::from_parts(&raw.id, positional, named)
}

/// Flattens a nested array, returning its rectangular shape.
fn flatten(v: &Value) -> Result<(Vec<usize>, Vec<f64>)> {
    fn walk(v: &Value, depth: usize, shape: &mut Vec<usize>, out: &mut Vec<f64>) -> Result<()> {
        match v {
            Value::Number(n) => {
                if depth != shape.len() {
                    return Err(Error::Format("ragged array".into()));
                }
                out.push(n.as_f64().filter(|x| x.is_finite()).ok_or_else(|| Error::Format("non-finite number".into()))?);
                Ok(())
            }
            Value::Array(items) => {
                if depth == shape.len() {
                    if !out.is_empty() {
                        return Err(Error::Format("ragged array".into()));
                    }
                    shape.push(items.len());
                } else if shape[depth] != items.len() {
                    return Err(Error::Format(format!(
                        "ragged array: length {} where {} expected at depth {depth}",
                        items.len(),
                        shape[depth]
                    )));
                }
                items.iter().try_for_each(|item| walk(item, depth + 1, shape, out))
            }
            _ => Err(Error::Format("values must be nested arrays of numbers".into())),
        }
    }
    let mut shape = Vec::new();
    let mut out = Vec::new();
    walk(v, 0, &mut shape, &mut out)?;
    if shape.iter().product::<usize>() != out.len() {
        return Err(Error::Format("ragged array".into()));
    }
    Ok((shape, out))
}

fn write_nested(out: &mut String, shape: &[usize], data: &[f64]) {
    match shape.split_first() {
        None => {
            let _ = write!(out, "{:.16e}", data[0]);
        }
        Some((&len, rest)) => {
            let stride: usize = rest.iter().product();
            out.push('[');
            for k in 0..len {
                if k > 0 {
                    out.push(',');
                }
                write_nested(out, rest, &data[k * stride..(k + 1) * stride]);
            }
            out.push(']');
        }
    }
}

fn field_parts(f: &GridField) -> (Vec<usize>, Vec<f64>) {
    let mut shape = vec![f.grid().node_count()];
    shape.extend_from_slice(f.shape());
    (shape, f.values().to_vec())
}

fn to_field(grid: &ChartGrid, (shape, data): &(Vec<usize>, Vec<f64>), what: &str, expect: &[usize]) -> Result<GridField> {
    if shape.first() != Some(&grid.node_count()) {
        return Err(Error::Format(format!(
            "{what}: {} node rows, grid has {} nodes",
            shape.first().copied().unwrap_or(0),
            grid.node_count()
        )));
    }
    if &shape[1..] != expect {
        return Err(Error::ShapeMismatch(format!("{what}: per-node shape {:?}, expected {expect:?}", &shape[1..])));
    }
    GridField::from_values(grid, expect, data.clone())
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: Raw = serde_json::from_str(text)?;
        let payload = match (raw.catalog, raw.values) {
            (Some(c), None) => Payload::Catalog(catalog_spec(c)?),
            (None, Some(v)) => Payload::Values(match raw.kind {
                Kind::Pair => {
                    let obj = v
                        .as_object()
                        .ok_or_else(|| Error::Format("pair values must be an object with `beta` and `E`".into()))?;
                    let get = |k: &str| obj.get(k).ok_or_else(|| Error::Format(format!("pair values lack `{k}`")));
                    if obj.len() != 2 {
                        return Err(Error::Format("pair values take exactly `beta` and `E`".into()));
                    }
                    Values::Pair {
                        beta: flatten(get("beta")?)?,
                        e: flatten(get("E")?)?,
                    }
                }
                _ => {
                    let (shape, data) = flatten(&v)?;
                    if shape.len() != 2 {
                        return Err(Error::Format("scene and bending values are [nodes][m]".into()));
                    }
                    Values::Map { shape, data }
                }
            }),
            _ => return Err(Error::Format("exactly one of `catalog` and `values` is required".into())),
        };
        Ok(Self {
            kind: raw.kind,
            grid: raw.grid,
            label: raw.label,
            payload,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let kind = serde_json::to_string(&self.kind).unwrap_or_default();
        let _ = writeln!(out, "  \"kind\": {kind},");
        let _ = write!(out, "  \"grid\": {{\"dim\": {}, \"bounds\": [", self.grid.dim);
        for (k, b) in self.grid.bounds.iter().enumerate() {
            let sep = if k > 0 { ", " } else { "" };
            let _ = write!(out, "{sep}[{:.16e}, {:.16e}]", b[0], b[1]);
        }
        let resolution = serde_json::to_string(&self.grid.resolution).unwrap_or_default();
        let periodic = serde_json::to_string(&self.grid.periodic).unwrap_or_default();
        let _ = writeln!(out, "], \"resolution\": {resolution}, \"periodic\": {periodic}}},");
        if let Some(label) = &self.label {
            let _ = writeln!(out, "  \"label\": {},", Value::String(label.clone()));
        }
        match &self.payload {
            Payload::Catalog(spec) => {
                let mut params = serde_json::Map::new();
                if !spec.positional().is_empty() {
                    params.insert("args".into(), spec.positional().iter().cloned().map(Value::String).collect());
                }
                for (k, v) in spec.params() {
                    params.insert(k.clone(), Value::String(v.clone()));
                }
                let catalog = serde_json::json!({"id": spec.id, "params": params});
                let _ = writeln!(out, "  \"catalog\": {catalog}");
            }
            Payload::Values(Values::Map { shape, data }) => {
                out.push_str("  \"values\": ");
                write_nested(&mut out, shape, data);
                out.push('\n');
            }
            Payload::Values(Values::Pair { beta, e }) => {
                out.push_str("  \"values\": {\"beta\": ");
                write_nested(&mut out, &beta.0, &beta.1);
                out.push_str(", \"E\": ");
                write_nested(&mut out, &e.0, &e.1);
                out.push_str("}\n");
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn catalog(kind: Kind, grid: &ChartGrid, spec: Spec) -> Self {
        Self {
            kind,
            grid: GridSpec::of(grid),
            label: None,
            payload: Payload::Catalog(spec),
        }
    }

    pub fn from_scene(scene: &ImmersionScene) -> Self {
        let (shape, data) = field_parts(scene.map());
        Self {
            kind: Kind::Scene,
            grid: GridSpec::of(scene.grid()),
            label: Some(scene.label().to_string()),
            payload: Payload::Values(Values::Map { shape, data }),
        }
    }

    pub fn from_bending(t: &BendingField) -> Self {
        let (shape, data) = field_parts(t.field());
        Self {
            kind: Kind::Bending,
            grid: GridSpec::of(t.field().grid()),
            label: Some(t.label().to_string()),
            payload: Payload::Values(Values::Map { shape, data }),
        }
    }

    pub fn from_pair(pair: &AssociatedPair) -> Self {
        Self {
            kind: Kind::Pair,
            grid: GridSpec::of(pair.beta_field().grid()),
            label: None,
            payload: Payload::Values(Values::Pair {
                beta: field_parts(pair.beta_field()),
                e: field_parts(pair.e_field()),
            }),
        }
    }

    fn expect(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {kind:?} file, found {:?}", self.kind).to_lowercase()));
        }
        Ok(())
    }

    fn check_grid(&self, grid: &ChartGrid) -> Result<()> {
        if self.grid.build()? != *grid {
            return Err(Error::ShapeMismatch("file grid differs from the scene grid".into()));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<ImmersionScene> {
        self.expect(Kind::Scene)?;
        let grid = self.grid.build()?;
        match &self.payload {
            Payload::Catalog(spec) => scenes::scene_on(spec, &grid),
            Payload::Values(Values::Map { shape, data }) => {
                let map = GridField::from_values(&grid, &shape[1..], data.clone())
                    .map_err(|e| Error::Format(format!("scene values: {e}")))?;
                let label = self.label.clone().unwrap_or_else(|| "file".into());
                ImmersionScene::new(map, label)
            }
            Payload::Values(_) => Err(Error::Format("scene values must be [nodes][m]".into())),
        }
    }

    pub fn bending(&self, geom: &FramedGeometry) -> Result<BendingField> {
        self.expect(Kind::Bending)?;
        self.check_grid(geom.grid())?;
        match &self.payload {
            Payload::Catalog(spec) => scenes::bending(spec, geom),
            Payload::Values(Values::Map { shape, data }) => {
                let t = to_field(geom.grid(), &(shape.clone(), data.clone()), "bending", &[geom.m()])?;
                BendingField::new(t, self.label.clone().unwrap_or_else(|| "file".into()))
            }
            Payload::Values(_) => Err(Error::Format("bending values must be [nodes][m]".into())),
        }
    }

    pub fn pair(&self, geom: &FramedGeometry, tol: &Tolerance) -> Result<AssociatedPair> {
        self.expect(Kind::Pair)?;
        self.check_grid(geom.grid())?;
        let (n, p) = (geom.n(), geom.p());
        match &self.payload {
            Payload::Catalog(spec) => scenes::pair(&spec.to_string(), geom, tol),
            Payload::Values(Values::Pair { beta, e }) => {
                let beta = to_field(geom.grid(), beta, "beta", &[n, n, p])?;
                let e = to_field(geom.grid(), e, "E", &[n, p, p])?;
                AssociatedPair::from_parts(geom, beta, e)
            }
            Payload::Values(_) => Err(Error::Format("pair values must hold `beta` and `E`".into())),
        }
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::BadParam(format!("`{}` is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
