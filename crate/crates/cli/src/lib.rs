//! Command-line front end. [`run`] takes the argument list and returns the
//! exit code together with everything that would be printed, so the binary
//! is a thin wrapper and tests can drive commands in-process.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on unusable input (unknown command, bad flag, malformed scene).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use infbend::bending::{
    associated_pair, associated_pair_unchecked, bending_residual_of, compatibility_residual, pair_identities,
    AssociatedPair, BendingField,
};
use infbend::classify::{fit_killing, pair_triviality, solve_e_from_beta};
use infbend::fundsys::{codazzi2_residual, codazzi_residual, gauss_residual, ricci_residual, verify, SystemReport};
use infbend::geometry::{build_geometry, first_normal_rank, structure_residuals, FramedGeometry, ImmersionScene};
use infbend::io::{write_atomic, Kind, SceneFile};
use infbend::numgrid::ChartGrid;
use infbend::products::{
    adaptedness_residual, cross_alpha_residual, default_nodes, extrinsic_product, product_hypotheses, reassemble,
    s_nullity, split_bending, ProductStructure, DEFAULT_SEED,
};
use infbend::reconstruct::{reconstruct, skewness_residual};
use infbend::scenes::{self, Spec, PAIRS};
use infbend::tolerance::{
    Check, Residual, Tolerance, ADAPTED, BEND, PAIR_IDENTITY, ROUND_TRIP, STRUCTURE, TRIVIAL,
};
use infbend::Error;

#[derive(Parser, Debug)]
#[command(name = "infbend", version, about = "Verify, classify and reconstruct infinitesimal bendings")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Nodes per axis for catalog scenes.
    #[arg(long, global = true, default_value_t = 64)]
    resolution: usize,
    /// Multiplies every default tolerance constant.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Write per-node residual fields as CSV.
    #[arg(long, global = true)]
    fields: Option<PathBuf>,
    /// Emit the report as one JSON object.
    #[arg(long, global = true)]
    json: bool,
    /// Chart bounds for catalog scenes, `a0,b0;a1,b1;...`.
    #[arg(long, global = true)]
    chart: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure equations of the immersion.
    Sanity { scene: String },
    /// Bending condition, pair identities and the fundamental system.
    Verify { scene: String, field: String },
    /// Integrate a pair back to a bending.
    Reconstruct {
        scene: String,
        pair: String,
        /// Base node as a multi-index `i,j,...` (default: grid center).
        #[arg(long)]
        base: Option<String>,
        /// Write the reconstructed bending as a scene file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Killing fit and pair triviality.
    Classify { scene: String, field: String },
    /// s-nullities at sampled nodes.
    Snullity {
        scene: String,
        /// Only this s (default: every 1 ≤ s ≤ p).
        #[arg(long)]
        s: Option<usize>,
        /// Nodes as multi-indices `i,j;k,l;...`.
        #[arg(long)]
        nodes: Option<String>,
        /// Evaluate at every node of the grid.
        #[arg(long, conflicts_with = "nodes")]
        all_nodes: bool,
    },
    /// Extrinsic product, adaptedness, nullity hypotheses and splitting.
    Product {
        /// Factor scenes followed by a bending of the product.
        #[arg(required = true, num_args = 3..)]
        items: Vec<String>,
        #[arg(long)]
        nodes: Option<String>,
        #[arg(long, conflicts_with = "nodes")]
        all_nodes: bool,
        /// Let the nullity and codimension hypotheses decide the exit code.
        #[arg(long)]
        strict: bool,
    },
    /// Recover 𝓔 from β on a scene with full first normal spaces.
    SolveE {
        scene: String,
        beta: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a scene, bending, pair or variation `f + s𝓣` as a scene file.
    Export {
        scene: String,
        field: Option<String>,
        #[arg(long)]
        output: PathBuf,
        /// Export the varied immersion `f + s𝓣` instead of the field.
        #[arg(long)]
        variation: Option<f64>,
    },
}

/// What a finished command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Fail {
    Input(String),
    Check(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::NotABending { .. }
            | Error::SystemViolated(_)
            | Error::NotSkew { .. }
            | Error::PeriodicHolonomy { .. }
            | Error::FirstNormalNotFull { .. }
            | Error::Precondition(_) => Fail::Check(e.to_string()),
            _ => Fail::Input(e.to_string()),
        }
    }
}

type CmdResult<T> = std::result::Result<T, Fail>;

/// Collected results of one command.
struct Report {
    command: &'static str,
    subject: String,
    tol: Tolerance,
    checks: Vec<Check>,
    info: Vec<(String, Value)>,
    fields: Vec<(String, Vec<f64>)>,
    field_grid: Option<ChartGrid>,
    field_nodes: Option<Vec<usize>>,
    failure: Option<String>,
}

impl Report {
    fn new(command: &'static str, subject: String, tol: Tolerance) -> Self {
        Self {
            command,
            subject,
            tol,
            checks: Vec::new(),
            info: Vec::new(),
            fields: Vec::new(),
            field_grid: None,
            field_nodes: None,
            failure: None,
        }
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn info(&mut self, key: &str, v: impl Into<Value>) {
        self.info.push((key.to_string(), v.into()));
    }

    fn field(&mut self, name: &str, r: &Residual) {
        self.fields.push((name.to_string(), r.per_node.iter().map(|v| v / r.scale).collect()));
    }

    fn pass(&self) -> bool {
        self.failure.is_none() && self.checks.iter().all(|c| c.pass)
    }

    fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("command".into(), self.command.into());
        obj.insert("subject".into(), self.subject.clone().into());
        obj.insert("h".into(), self.tol.h.into());
        obj.insert("tol_scale".into(), self.tol.factor.into());
        obj.insert("checks".into(), serde_json::to_value(&self.checks).unwrap_or(Value::Null));
        for (k, v) in &self.info {
            obj.insert(k.clone(), v.clone());
        }
        if let Some(f) = &self.failure {
            obj.insert("failure".into(), f.clone().into());
        }
        obj.insert("pass".into(), self.pass().into());
        Value::Object(obj)
    }

    fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}  (h = {:.4e}, tol scale {})", self.command, self.subject, self.tol.h, self.tol.factor);
        for (k, v) in &self.info {
            let _ = writeln!(out, "  {k}: {v}");
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  {:<28} {:>12.4e}  tol {:>10.3e}  margin {:>9.3e}  {}",
                c.name,
                c.value,
                c.tol,
                c.margin,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(out, "  failed: {f}");
        }
        let _ = writeln!(out, "{}", if self.pass() { "PASS" } else { "FAIL" });
        out
    }

    fn fields_csv(&self) -> String {
        let mut out = String::new();
        let Some(grid) = &self.field_grid else {
            return out;
        };
        let coords = (0..grid.dim()).map(|a| format!("x{a}"));
        let header: Vec<String> = std::iter::once("node_index".to_string())
            .chain(coords)
            .chain(self.fields.iter().map(|(n, _)| n.clone()))
            .collect();
        let _ = writeln!(out, "{}", header.join(","));
        let rows: Vec<usize> = self.field_nodes.clone().unwrap_or_else(|| (0..grid.node_count()).collect());
        for (r, node) in rows.into_iter().enumerate() {
            let mut line = node.to_string();
            for x in grid.coords(node) {
                let _ = write!(line, ",{x:.16e}");
            }
            for (_, vals) in &self.fields {
                let _ = write!(line, ",{:.16e}", vals[r]);
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CmdResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Fail::Input(format!("bad {what} entry `{s}` in `{text}`")))
        })
        .collect()
}

fn parse_chart(text: &str) -> CmdResult<Vec<[f64; 2]>> {
    text.split(';')
        .map(|axis| match parse_list::<f64>(axis, "chart")?.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err(Fail::Input(format!("chart axis `{axis}` needs two bounds"))),
        })
        .collect()
}

fn parse_node(grid: &ChartGrid, text: &str) -> CmdResult<usize> {
    let idx: Vec<usize> = parse_list(text, "node index")?;
    if idx.len() != grid.dim() || idx.iter().zip(grid.resolution()).any(|(i, r)| i >= r) {
        return Err(Fail::Input(format!("node `{text}` is not a multi-index of a {:?} grid", grid.resolution())));
    }
    Ok(grid.node(&idx))
}

fn parse_nodes(grid: &ChartGrid, text: &str) -> CmdResult<Vec<usize>> {
    text.split(';').map(|t| parse_node(grid, t)).collect()
}

fn is_file(arg: &str) -> bool {
    arg.ends_with(".json") || Path::new(arg).is_file()
}

struct Loaded {
    scene: ImmersionScene,
    structure: Option<ProductStructure>,
}

fn load_scene(arg: &str, opts: &Opts) -> CmdResult<Loaded> {
    if is_file(arg) {
        return Ok(Loaded {
            scene: SceneFile::read(arg)?.scene()?,
            structure: None,
        });
    }
    let spec = Spec::parse(arg)?;
    let chart = opts.chart.as_deref().map(parse_chart).transpose()?;
    if spec.id == "product" {
        if chart.is_some() {
            return Err(Fail::Input("products take their charts from the factors".into()));
        }
        let factors = scenes::product_factors(&spec, opts.resolution)?;
        let (scene, structure) = extrinsic_product(&factors)?;
        return Ok(Loaded {
            scene,
            structure: Some(structure),
        });
    }
    Ok(Loaded {
        scene: scenes::scene(&spec, opts.resolution, chart.as_deref())?,
        structure: None,
    })
}

enum Field {
    Bending(BendingField),
    Pair(AssociatedPair),
}

fn load_field(arg: &str, geom: &FramedGeometry, tol: &Tolerance) -> CmdResult<Field> {
    if is_file(arg) {
        let file = SceneFile::read(arg)?;
        return Ok(match file.kind {
            Kind::Bending => Field::Bending(file.bending(geom)?),
            Kind::Pair => Field::Pair(file.pair(geom, tol)?),
            Kind::Scene => return Err(Fail::Input(format!("`{arg}` holds a scene, not a bending or pair"))),
        });
    }
    let head = Spec::parse(arg.split(['@', '+']).next().unwrap_or_default())?;
    if arg.contains('@') || PAIRS.contains(&head.id.as_str()) {
        Ok(Field::Pair(scenes::pair(arg, geom, tol)?))
    } else {
        Ok(Field::Bending(scenes::bending_sum(arg, geom)?))
    }
}

fn pair_of(field: Field, geom: &FramedGeometry, tol: &Tolerance) -> CmdResult<AssociatedPair> {
    match field {
        Field::Pair(p) => Ok(p),
        Field::Bending(t) => Ok(associated_pair(geom, &t, tol)?.1),
    }
}

fn system_checks(report: &mut Report, geom: &FramedGeometry, pair: &AssociatedPair, sys: &SystemReport) -> CmdResult<()> {
    report.checks.extend(sys.checks());
    report.field("gauss", &gauss_residual(geom, pair)?);
    report.field("codazzi", &codazzi_residual(geom, pair)?);
    report.field("codazzi2", &codazzi2_residual(geom, pair)?);
    report.field("ricci", &ricci_residual(geom, pair)?);
    report.field("anti", &compatibility_residual(pair));
    Ok(())
}

fn cmd_sanity(geom: &FramedGeometry, structure: Option<&ProductStructure>, report: &mut Report) -> CmdResult<()> {
    let s = structure_residuals(geom);
    let limit = report.tol.tol(STRUCTURE);
    for (name, v) in [("gauss", s.gauss), ("codazzi", s.codazzi), ("ricci", s.ricci)] {
        report.check(Check::at_most(name, v, limit));
    }
    if let Some(structure) = structure {
        let cross = cross_alpha_residual(geom, structure)?;
        report.check(Check::at_most("cross_alpha", cross.value(), report.tol.tol(ADAPTED)));
        report.field("cross_alpha", &cross);
    }
    let ranks: Vec<f64> = (0..geom.nodes()).map(|n| first_normal_rank(geom, n) as f64).collect();
    let conds: Vec<f64> = (0..geom.nodes()).map(|n| geom.frame_condition(n)).collect();
    report.info("n", geom.n());
    report.info("m", geom.m());
    report.info("frame", format!("{:?}", geom.frame_method()));
    report.info("first_normal_rank_min", ranks.iter().fold(f64::INFINITY, |a, &b| a.min(b)));
    report.info("frame_condition_max", conds.iter().fold(0.0, |a: f64, &b| a.max(b)));
    report.fields.push(("first_normal_rank".into(), ranks));
    report.fields.push(("frame_condition".into(), conds));
    Ok(())
}

fn cmd_verify(geom: &FramedGeometry, field: Field, report: &mut Report) -> CmdResult<()> {
    let tol = report.tol;
    let pair = match field {
        Field::Bending(t) => {
            let (derived, pair) = associated_pair_unchecked(geom, &t)?;
            let bend = bending_residual_of(geom, &derived);
            report.check(Check::at_most("bending", bend.value(), tol.tol(BEND)));
            report.field("bending", &bend);
            let ids = pair_identities(geom, &derived, &pair);
            let limit = tol.tol(PAIR_IDENTITY);
            report.check(Check::at_most("tangential_identity", ids.tangential, limit));
            report.check(Check::at_most("B_symmetry", ids.b_symmetry, limit));
            report.check(Check::at_most("beta_symmetry", ids.beta_symmetry, limit));
            pair
        }
        Field::Pair(p) => p,
    };
    let sys = verify(geom, &pair, &tol)?;
    system_checks(report, geom, &pair, &sys)
}

fn cmd_reconstruct(
    geom: &FramedGeometry,
    field: Field,
    base: Option<&str>,
    output: Option<&Path>,
    report: &mut Report,
) -> CmdResult<()> {
    let tol = report.tol;
    let pair = pair_of(field, geom, &tol)?;
    let base = match base {
        Some(b) => parse_node(geom.grid(), b)?,
        None => geom.grid().center_node(),
    };
    report.info("base", base);
    let (t, rep) = reconstruct(geom, &pair, base, &tol)?;
    report.checks.extend(rep.system.checks());
    report.checks.extend(rep.checks.iter().cloned());
    let d = infbend::reconstruct::integrate_endo(geom, &pair, base, &tol)?;
    report.field("skewness", &skewness_residual(&d));
    report.field("bending", &infbend::bending::bending_residual(geom, &t)?);
    report.info("T_max", t.field().max_abs());
    if let Some(path) = output {
        SceneFile::from_bending(&t).write(path)?;
        report.info("output", path.display().to_string());
    }
    Ok(())
}

fn cmd_classify(geom: &FramedGeometry, field: Field, report: &mut Report) -> CmdResult<()> {
    let tol = report.tol;
    let limit = tol.tol(TRIVIAL);
    let (pair, fit_trivial) = match field {
        Field::Bending(t) => {
            let (derived, pair) = associated_pair_unchecked(geom, &t)?;
            let bend = bending_residual_of(geom, &derived);
            report.check(Check::at_most("bending", bend.value(), tol.tol(BEND)));
            let fit = fit_killing(geom, &t)?;
            let trivial = fit.residual <= limit;
            report.info("killing_fit_residual", fit.residual);
            report.info("killing_fit_tol", limit);
            report.info("killing_fit_margin", if trivial { limit / fit.residual } else { fit.residual / limit });
            report.info("killing_fit_verdict", if trivial { "trivial" } else { "nontrivial" });
            let misfit: Vec<f64> = (0..geom.nodes())
                .map(|n| {
                    fit.field
                        .apply(geom.f(n))
                        .iter()
                        .zip(t.at(n))
                        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
                })
                .collect();
            report.fields.push(("killing_misfit".into(), misfit));
            if !report.pass() {
                return Ok(());
            }
            (pair, Some(trivial))
        }
        Field::Pair(p) => (p, None),
    };
    let tr = pair_triviality(geom, &pair, &tol)?;
    report.info("res_beta", tr.res_beta);
    report.info("res_E", tr.res_e);
    report.info("triviality_tol", tr.tol);
    report.info("infinite_misfit", tr.infinite_misfit);
    let margin = if tr.trivial { tr.tol / tr.res_beta.max(tr.res_e) } else { tr.nontrivial_margin() };
    report.info("margin", margin);
    report.info("verdict", if tr.trivial { "trivial" } else { "nontrivial" });
    if let Some(fit_trivial) = fit_trivial {
        report.check(Check::at_most(
            "verdicts_agree",
            if fit_trivial == tr.trivial { 0.0 } else { 1.0 },
            0.0,
        ));
    }
    Ok(())
}

fn sample_nodes(grid: &ChartGrid, nodes: Option<&str>, all: bool) -> CmdResult<Vec<usize>> {
    Ok(match nodes {
        Some(t) => parse_nodes(grid, t)?,
        None if all => (0..grid.node_count()).collect(),
        None => default_nodes(grid),
    })
}

fn cmd_snullity(
    geom: &FramedGeometry,
    s: Option<usize>,
    nodes: Vec<usize>,
    seed: u64,
    report: &mut Report,
) -> CmdResult<()> {
    let p = geom.p();
    let range: Vec<usize> = match s {
        Some(s) if s == 0 || s > p => return Err(Fail::Input(format!("s = {s} outside 1..={p}"))),
        Some(s) => vec![s],
        None => (1..=p).collect(),
    };
    let mut rows = Vec::new();
    for &s in &range {
        let mut column = Vec::new();
        let mut best = 0;
        for &node in &nodes {
            let r = s_nullity(geom, node, s, seed)?;
            best = best.max(r.value);
            column.push(r.value as f64);
            rows.push(json!({"node": node, "s": s, "nu": r.value, "exact": r.exact, "samples": r.samples, "subspace": r.subspace}));
        }
        report.info(&format!("nu_{s}"), best);
        report.fields.push((format!("nu_{s}"), column));
    }
    report.info("evaluations", rows);
    report.field_nodes = Some(nodes);
    Ok(())
}

fn cmd_product(items: &[String], nodes: Option<&str>, all: bool, strict: bool, opts: &Opts, report: &mut Report) -> CmdResult<()> {
    let tol = report.tol;
    let (factor_args, bending_arg) = items.split_at(items.len() - 1);
    let factors = factor_args
        .iter()
        .map(|a| load_scene(a, opts).map(|l| l.scene))
        .collect::<CmdResult<Vec<_>>>()?;
    let (scene, structure) = extrinsic_product(&factors)?;
    let geom = build_geometry(&scene)?;
    report.tol = Tolerance::for_grid(geom.grid()).with_factor(tol.factor);
    let tol = report.tol;
    report.field_grid = Some(geom.grid().clone());
    let cross = cross_alpha_residual(&geom, &structure)?;
    report.check(Check::at_most("cross_alpha", cross.value(), tol.tol(ADAPTED)));
    report.field("cross_alpha", &cross);

    let nodes = sample_nodes(geom.grid(), nodes, all)?;
    let hyp = product_hypotheses(&geom, &structure, Some(&nodes), opts.seed)?;
    report.info("hypotheses", serde_json::to_value(&hyp).unwrap_or(Value::Null));
    if strict {
        report.checks.extend(hyp.checks());
        report.check(Check::at_most("p < n", geom.p() as f64, geom.n() as f64 - 1.0));
        for f in &hyp.factor_codims {
            report.check(Check::at_most(format!("p_{} < n_{}", f.factor, f.factor), f.p as f64, f.n as f64 - 1.0));
        }
    }

    let t = match load_field(&bending_arg[0], &geom, &tol)? {
        Field::Bending(t) => t,
        Field::Pair(_) => return Err(Fail::Input("product needs a bending, not a pair".into())),
    };
    let (_, pair) = associated_pair(&geom, &t, &tol)?;
    let adapted = adaptedness_residual(&geom, &pair, &structure)?;
    report.check(Check::at_most("cross_beta", adapted.value(), tol.tol(ADAPTED)));
    report.field("cross_beta", &adapted);

    let base = geom.grid().center_node();
    let split = split_bending(&geom, &structure, &t, base, &tol)?;
    report.check(Check::at_most("split_constancy", split.constancy, split.tol));
    for (i, (b, fgeom)) in split.factor_bending.iter().zip(&split.factor_geometries).enumerate() {
        report.check(Check::at_most(
            format!("factor_{i}_bending"),
            *b,
            Tolerance::for_grid(fgeom.grid()).with_factor(tol.factor).tol(BEND),
        ));
    }
    let sum = reassemble(&geom, &structure, &split.factors)?;
    let diff = sum.combine(1.0, &t, -1.0)?;
    let fit = fit_killing(&geom, &diff)?;
    report.check(Check::at_most("reassembly_trivial", fit.residual, tol.tol(ROUND_TRIP)));
    Ok(())
}

fn cmd_solve_e(geom: &FramedGeometry, field: Field, output: Option<&Path>, report: &mut Report) -> CmdResult<()> {
    let tol = report.tol;
    let pair = pair_of(field, geom, &tol)?;
    let e = solve_e_from_beta(geom, pair.beta_field())?;
    let solved = AssociatedPair::from_parts(geom, pair.beta_field().clone(), e.clone())?;
    let scale = pair.e_max().max(1.0);
    let diff = e.max_abs_diff(pair.e_field()) / scale;
    report.info("E_max", e.max_abs());
    report.check(Check::at_most("E_recovery", diff, tol.tol(ROUND_TRIP)));
    let sys = verify(geom, &solved, &tol)?;
    system_checks(report, geom, &solved, &sys)?;
    if let Some(path) = output {
        SceneFile::from_pair(&solved).write(path)?;
        report.info("output", path.display().to_string());
    }
    Ok(())
}

fn cmd_export(
    loaded: &Loaded,
    geom: &FramedGeometry,
    field: Option<&str>,
    variation: Option<f64>,
    output: &Path,
    report: &mut Report,
) -> CmdResult<()> {
    let tol = report.tol;
    let file = match (field.map(|f| load_field(f, geom, &tol)).transpose()?, variation) {
        (None, None) => SceneFile::from_scene(&loaded.scene),
        (None, Some(_)) => return Err(Fail::Input("--variation needs a bending".into())),
        (Some(Field::Bending(t)), Some(s)) => SceneFile::from_scene(&scenes::variation(&loaded.scene, &t, s)?),
        (Some(Field::Bending(t)), None) => SceneFile::from_bending(&t),
        (Some(Field::Pair(p)), None) => SceneFile::from_pair(&p),
        (Some(Field::Pair(_)), Some(_)) => return Err(Fail::Input("--variation needs a bending, not a pair".into())),
    };
    file.write(output)?;
    report.info("kind", format!("{:?}", file.kind).to_lowercase());
    report.info("output", output.display().to_string());
    Ok(())
}

fn execute(cli: Cli, report: &mut Report) -> CmdResult<()> {
    let opts = cli.opts.clone();
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(Fail::Input(format!("--tol-scale must be positive, got {}", opts.tol_scale)));
    }
    if let Command::Product {
        items,
        nodes,
        all_nodes,
        strict,
    } = &cli.command
    {
        return cmd_product(items, nodes.as_deref(), *all_nodes, *strict, &opts, report);
    }
    let scene_arg = match &cli.command {
        Command::Sanity { scene }
        | Command::Verify { scene, .. }
        | Command::Reconstruct { scene, .. }
        | Command::Classify { scene, .. }
        | Command::Snullity { scene, .. }
        | Command::SolveE { scene, .. }
        | Command::Export { scene, .. } => scene,
        Command::Product { .. } => unreachable!(),
    };
    let loaded = load_scene(scene_arg, &opts)?;
    let geom = build_geometry(&loaded.scene)?;
    report.tol = Tolerance::for_grid(geom.grid()).with_factor(opts.tol_scale);
    report.field_grid = Some(geom.grid().clone());
    let tol = report.tol;
    match cli.command {
        Command::Sanity { .. } => cmd_sanity(&geom, loaded.structure.as_ref(), report),
        Command::Verify { field, .. } => {
            let f = load_field(&field, &geom, &tol)?;
            cmd_verify(&geom, f, report)
        }
        Command::Reconstruct { pair, base, output, .. } => {
            let f = load_field(&pair, &geom, &tol)?;
            cmd_reconstruct(&geom, f, base.as_deref(), output.as_deref(), report)
        }
        Command::Classify { field, .. } => {
            let f = load_field(&field, &geom, &tol)?;
            cmd_classify(&geom, f, report)
        }
        Command::Snullity { s, nodes, all_nodes, .. } => {
            let nodes = sample_nodes(geom.grid(), nodes.as_deref(), all_nodes)?;
            cmd_snullity(&geom, s, nodes, opts.seed, report)
        }
        Command::SolveE { beta, output, .. } => {
            let f = load_field(&beta, &geom, &tol)?;
            cmd_solve_e(&geom, f, output.as_deref(), report)
        }
        Command::Export {
            field,
            output,
            variation,
            ..
        } => cmd_export(&loaded, &geom, field.as_deref(), variation, &output, report),
        Command::Product { .. } => unreachable!(),
    }
}

fn subject(command: &Command) -> (&'static str, String) {
    match command {
        Command::Sanity { scene } => ("sanity", scene.clone()),
        Command::Verify { scene, field } => ("verify", format!("{scene} {field}")),
        Command::Reconstruct { scene, pair, .. } => ("reconstruct", format!("{scene} {pair}")),
        Command::Classify { scene, field } => ("classify", format!("{scene} {field}")),
        Command::Snullity { scene, .. } => ("snullity", scene.clone()),
        Command::Product { items, .. } => ("product", items.join(" ")),
        Command::SolveE { scene, beta, .. } => ("solve-e", format!("{scene} {beta}")),
        Command::Export { scene, field, .. } => (
            "export",
            format!("{scene}{}", field.as_deref().map(|f| format!(" {f}")).unwrap_or_default()),
        ),
    }
}

/// Runs one command line (without the program name).
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("infbend")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let opts = cli.opts.clone();
    let (command, subj) = subject(&cli.command);
    let mut report = Report::new(command, subj, Tolerance::new(0.0, opts.tol_scale));
    let mut stderr = String::new();
    let mut code = match execute(cli, &mut report) {
        Ok(()) => i32::from(!report.pass()),
        Err(Fail::Check(msg)) => {
            report.failure = Some(msg);
            1
        }
        Err(Fail::Input(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return Outcome {
                code: 2,
                stdout: String::new(),
                stderr,
            };
        }
    };
    let stdout = if opts.json {
        format!("{}\n", report.to_json())
    } else {
        report.to_text()
    };
    for (path, body) in [(&opts.report, Some(stdout.clone())), (&opts.fields, Some(report.fields_csv()))] {
        if let (Some(path), Some(body)) = (path, body) {
            if let Err(e) = write_atomic(path, body.as_bytes()) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                code = 2;
            }
        }
    }
    Outcome { code, stdout, stderr }
}
