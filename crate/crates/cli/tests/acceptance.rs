//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured values beneath, and exits non-zero if any criterion fails.

mod common;

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use infbend::bending::{associated_pair, bending_residual, pair_identities, BendingField};
use infbend::classify::{fit_killing, killing_pair, normal_part, pair_triviality, solve_e_from_beta, uniqueness_probe};
use infbend::fundsys::{hypersurface_conditions, hypersurface_pair, verify};
use infbend::geometry::{build_geometry, structure_residuals, FramedGeometry};
use infbend::numgrid::GridField;
use infbend::products::*;
use infbend::reconstruct::reconstruct;
use infbend::scenes::{bending_sum, killing_field, perturb_beta, scene, Spec};
use infbend::tolerance::*;

use common::{cli, json, CATALOG, DEGENERATE_NORMAL};

/// Structure residuals of these scenes sit at roundoff on any grid, so their
/// halving ratio is meaningless; the convergence factor is measured on
/// curved variants instead.
const CONVERGENCE_SCENES: &[&str] = &["sphere", "graph", "cylinder:warp=0.3", "complex_graph"];
const CONVERGENCE_RANGE: (f64, f64) = (3.0, 5.0);
/// Negative controls: 10⁻² bump added to β on sub-charts small enough for
/// the bump's variation to dominate the discretization floor.
const PERTURBATION: f64 = 1e-2;
const NEGATIVE_MARGIN: f64 = 10.0;
const NEGATIVE_CONTROLS: &[(&str, &str, [[f64; 2]; 2])] = &[
    ("cylinder", "circle_fourier:2", [[0.3, 0.5], [0.0, 0.2]]),
    ("torus", "circle_fourier:2", [[0.3, 0.5], [0.3, 0.5]]),
    ("sphere", "killing:rot", [[1.0, 1.2], [0.3, 0.5]]),
];
const ROUND_TRIP_CHART: [[f64; 2]; 2] = [[0.3, 1.3], [0.0, 1.0]];
const NONTRIVIAL_MARGIN: f64 = 100.0;
const UNIQUENESS_SAMPLES: usize = 100;
const MIN_CORRELATION: f64 = 0.9;
const WEDGE_REJECTION: f64 = 0.5;
const DRIFT: f64 = 1e-12;
const TORUS_GEN: &str = "killing:gen=1;0.3;0;0.5;-1;0.7";

/// Accumulates named comparisons for one criterion.
#[derive(Default)]
struct Tally {
    pass: bool,
    lines: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    fn record(&mut self, ok: bool, text: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {text}", if ok { "ok  " } else { "BAD " }));
    }

    fn le(&mut self, what: impl AsRef<str>, value: f64, limit: f64) {
        self.record(value <= limit, format!("{}: {value:.3e} <= {limit:.3e}", what.as_ref()));
    }

    fn ge(&mut self, what: impl AsRef<str>, value: f64, limit: f64) {
        self.record(value >= limit, format!("{}: {value:.3e} >= {limit:.3e}", what.as_ref()));
    }

    fn within(&mut self, what: impl AsRef<str>, value: f64, (lo, hi): (f64, f64)) {
        self.record((lo..=hi).contains(&value), format!("{}: {value:.3} in [{lo}, {hi}]", what.as_ref()));
    }

    fn eq<T: PartialEq + std::fmt::Debug>(&mut self, what: impl AsRef<str>, value: T, want: T) {
        self.record(value == want, format!("{}: {value:?} == {want:?}", what.as_ref()));
    }

    fn flag(&mut self, what: impl AsRef<str>, ok: bool) {
        self.record(ok, what.as_ref().to_string());
    }

    fn fail(&mut self, what: impl AsRef<str>, err: impl std::fmt::Display) {
        self.record(false, format!("{}: {err}", what.as_ref()));
    }
}

fn geom(spec: &str, nodes: usize, chart: Option<&[[f64; 2]]>) -> FramedGeometry {
    build_geometry(&scene(&Spec::parse(spec).unwrap(), nodes, chart).unwrap()).unwrap()
}

fn product(list: &str, nodes: usize) -> (FramedGeometry, ProductStructure) {
    let factors: Vec<_> = list.split('*').map(|f| scene(&Spec::parse(f).unwrap(), nodes, None).unwrap()).collect();
    let (s, st) = extrinsic_product(&factors).unwrap();
    (build_geometry(&s).unwrap(), st)
}

fn geometry_sanity(t: &mut Tally) {
    for name in ["plane", "cylinder", "torus", "sphere", "cylinder_r4"] {
        let g = geom(name, 32, None);
        let tol = Tolerance::for_grid(g.grid());
        t.le(format!("{name} structure"), structure_residuals(&g).max(), tol.tol(STRUCTURE));
    }
    for name in CONVERGENCE_SCENES {
        let coarse = structure_residuals(&geom(name, 32, None)).max();
        let fine = structure_residuals(&geom(name, 64, None)).max();
        t.within(format!("{name} convergence 32→64"), coarse / fine, CONVERGENCE_RANGE);
    }
}

fn system_test(t: &mut Tally) {
    let mut worst: f64 = 0.0;
    for (name, bendings) in CATALOG {
        let g = geom(name, 32, None);
        let tol = Tolerance::for_grid(g.grid());
        for b in *bendings {
            match associated_pair(&g, &bending_sum(b, &g).unwrap(), &tol).and_then(|(_, p)| verify(&g, &p, &tol)) {
                Ok(rep) => {
                    worst = worst.max(rep.max() / rep.tol);
                    t.flag(format!("{name} {b}: verify passes"), rep.pass);
                }
                Err(e) => t.fail(format!("{name} {b}"), e),
            }
        }
    }
    t.le("worst catalog residual / tol", worst, 1.0);
    for (name, b, chart) in NEGATIVE_CONTROLS {
        let g = geom(name, 64, Some(chart));
        let tol = Tolerance::for_grid(g.grid());
        let (_, p) = associated_pair(&g, &bending_sum(b, &g).unwrap(), &tol).unwrap();
        let rep = verify(&g, &perturb_beta(&g, &p, PERTURBATION).unwrap(), &tol).unwrap();
        t.ge(format!("{name} {chart:?} perturbed β residual / tol"), rep.max() / rep.tol, NEGATIVE_MARGIN);
    }
}

fn tangential_identity(t: &mut Tally) {
    for (name, bendings) in CATALOG {
        let g = geom(name, 32, None);
        let tol = Tolerance::for_grid(g.grid());
        let limit = tol.tol(PAIR_IDENTITY);
        for b in *bendings {
            let (d, p) = associated_pair(&g, &bending_sum(b, &g).unwrap(), &tol).unwrap();
            let ids = pair_identities(&g, &d, &p);
            t.le(format!("{name} {b} tangential"), ids.tangential, limit);
            t.le(format!("{name} {b} compatibility"), ids.compatibility, limit);
        }
    }
}

fn round_trip(t: &mut Tally) {
    let g = geom("cylinder", 64, Some(&ROUND_TRIP_CHART));
    let tol = Tolerance::for_grid(g.grid());
    let field = bending_sum("circle_fourier:2", &g).unwrap();
    let (_, p) = associated_pair(&g, &field, &tol).unwrap();
    match reconstruct(&g, &p, g.grid().center_node(), &tol) {
        Ok((rec, rep)) => {
            let fit = fit_killing(&g, &rec.combine(1.0, &field, -1.0).unwrap()).unwrap();
            let scale = 1f64.max(field.field().max_abs());
            t.le("fit of reconstructed − original", fit.residual, tol.tol(ROUND_TRIP) * scale);
            t.le("skewness", rep.skewness, tol.tol(SKEW));
            t.le("transposed-sweep path independence", rep.path_independence, tol.tol(ROUND_TRIP));
        }
        Err(e) => t.fail("reconstruct", e),
    }
}

fn triviality(t: &mut Tally) {
    let g = geom("torus", 32, None);
    let tol = Tolerance::for_grid(g.grid());
    let k = killing_field(&Spec::parse(TORUS_GEN).unwrap(), 4).unwrap();
    let (_, p) = associated_pair(&g, &k.restrict(&g, "k").unwrap(), &tol).unwrap();
    let rep = pair_triviality(&g, &p, &tol).unwrap();
    t.flag("torus Killing pair classified trivial", rep.trivial);
    t.le("recovered C − 𝒟ᴺ", rep.c.max_abs_diff(&normal_part(&g, &k.d)), tol.tol(TRIVIAL));
    let g = geom("cylinder", 32, None);
    let tol = Tolerance::for_grid(g.grid());
    let k = killing_field(&Spec::parse("killing:gen=0.3;-1;0.5").unwrap(), 3).unwrap();
    let rep = pair_triviality(&g, &killing_pair(&g, &k.d).unwrap(), &tol).unwrap();
    t.flag("cylinder Killing pair classified trivial", rep.trivial);
    let g = geom("cylinder", 64, Some(&ROUND_TRIP_CHART));
    let tol = Tolerance::for_grid(g.grid());
    for b in ["circle_fourier:2", "circle_fourier:3"] {
        let (_, p) = associated_pair(&g, &bending_sum(b, &g).unwrap(), &tol).unwrap();
        let rep = pair_triviality(&g, &p, &tol).unwrap();
        t.flag(format!("cylinder {b} classified nontrivial"), !rep.trivial);
        t.ge(format!("cylinder {b} nontrivial margin"), rep.nontrivial_margin(), NONTRIVIAL_MARGIN);
    }
}

fn uniqueness(t: &mut Tally) {
    let g = geom("torus", 32, None);
    let tol = Tolerance::for_grid(g.grid());
    for b in [TORUS_GEN, "circle_fourier:2+circle_fourier:3,axis=1,offset=2"] {
        let (_, p) = associated_pair(&g, &bending_sum(b, &g).unwrap(), &tol).unwrap();
        let e = solve_e_from_beta(&g, p.beta_field()).unwrap();
        t.le(format!("{b}: solved 𝓔 − direct 𝓔"), e.max_abs_diff(p.e_field()), tol.tol(ROUND_TRIP) * 1f64.max(p.e_max()));
    }
    let k = killing_field(&Spec::parse(TORUS_GEN).unwrap(), 4).unwrap();
    let probe = uniqueness_probe(&g, &killing_pair(&g, &k.d).unwrap(), UNIQUENESS_SAMPLES, DEFAULT_SEED).unwrap();
    t.eq("perturbations", probe.sizes.len(), UNIQUENESS_SAMPLES);
    let raised = probe.residuals.iter().all(|&r| r > probe.baseline);
    t.flag(format!("every perturbation raises Codazzi above {:.2e}", probe.baseline), raised);
    t.ge("correlation(size, residual)", probe.correlation, MIN_CORRELATION);
}

fn nullities(t: &mut Tally) {
    let (g, st) = product("sphere*sphere", 8);
    let h = product_hypotheses(&g, &st, None, DEFAULT_SEED).unwrap();
    let nu: Vec<usize> = h.bounds.iter().map(|b| b.nu).collect();
    t.eq("sphere×sphere (ν₁, ν₂)", nu, vec![2, 0]);
    t.flag("ν_s < n − s holds", h.pass_weak);
    t.flag("ν_s < n − 2s fails at s = 1", !h.bounds[0].pass_strong);
    let (g, st) = product("circle*circle", 32);
    let h = product_hypotheses(&g, &st, None, DEFAULT_SEED).unwrap();
    t.eq("torus ν₁", h.bounds[0].nu, 1);
    t.flag("torus fails p_i < n_i", !h.pass_factor_codims);
    t.flag("torus fails p < n", !h.pass_codim);
}

fn splitting(t: &mut Tally) {
    let (g, st) = product("circle*circle", 64);
    let tol = Tolerance::for_grid(g.grid());
    let field = bending_sum("circle_fourier:2+circle_fourier:3,axis=1,offset=2", &g).unwrap();
    let (_, p) = associated_pair(&g, &field, &tol).unwrap();
    t.le("cross β", adaptedness_residual(&g, &p, &st).unwrap().value(), tol.tol(ADAPTED));
    let base = g.grid().center_node();
    let rep = match split_bending(&g, &st, &field, base, &tol) {
        Ok(r) => r,
        Err(e) => return t.fail("split", e),
    };
    for (i, (fi, fg)) in rep.factors.iter().zip(&rep.factor_geometries).enumerate() {
        let block = st.blocks[i].clone();
        let slice = GridField::from_fn(fg.grid(), &[block.len()], |fnode, _, out| {
            let mut idx = g.grid().multi_index(base);
            idx[st.axes[i].clone()].copy_from_slice(&fg.grid().multi_index(fnode));
            out.copy_from_slice(&field.at(g.grid().node(&idx))[block.clone()]);
        });
        let slice = BendingField::new(slice, "slice").unwrap();
        let fit = fit_killing(fg, &fi.combine(1.0, &slice, -1.0).unwrap()).unwrap();
        let ftol = Tolerance::for_grid(fg.grid());
        t.le(format!("factor {i} modulo motion"), fit.residual, ftol.tol(ROUND_TRIP));
    }
    let whole = reassemble(&g, &st, &rep.factors).unwrap();
    let fit = fit_killing(&g, &whole.combine(1.0, &field, -1.0).unwrap()).unwrap();
    t.le("reassembly modulo motion", fit.residual, tol.tol(ROUND_TRIP));
}

fn remark_coverage(t: &mut Tally) {
    let g = geom("cylinder_r4", 32, None);
    let tol = Tolerance::for_grid(g.grid());
    for b in ["normal_field", "normal_field:profile=wave"] {
        let r = bending_residual(&g, &bending_sum(b, &g).unwrap()).unwrap().value();
        t.le(format!("cylinder_r4 {b} bending"), r, tol.tol(BEND));
    }
}

fn hypersurface(t: &mut Tally) {
    let g = geom("cylinder", 32, None);
    let tol = Tolerance::for_grid(g.grid());
    let n = g.n();
    let shape = GridField::from_fn(g.grid(), &[n, n], |node, _, out| {
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = g.alpha(node, i, j, 0);
            }
        }
    });
    match hypersurface_pair(&g, &shape, &tol) {
        Ok((p, rep)) => {
            t.le("𝓑 = A wedge", rep.wedge, rep.tol);
            t.le("𝓑 = A Codazzi", rep.codazzi, rep.tol);
            t.flag("𝓑 = A pair passes the fundamental system", verify(&g, &p, &tol).unwrap().pass);
        }
        Err(e) => t.fail("𝓑 = A", e),
    }
    let rep = hypersurface_conditions(&g, g.metric(), &tol).unwrap();
    t.flag("𝓑 = identity rejected", !rep.pass);
    t.ge("𝓑 = identity wedge", rep.wedge, WEDGE_REJECTION);
    t.flag("identity pair refused", hypersurface_pair(&g, g.metric(), &tol).is_err());
}

fn cli_contract(t: &mut Tally) {
    let res = "32";
    let mut wrong = Vec::new();
    let mut runs = 0;
    for (name, bendings) in CATALOG {
        for args in [vec!["sanity", name], vec!["snullity", name]] {
            let mut all = vec!["--resolution", res];
            all.extend(args.iter().copied());
            runs += 1;
            if cli(&all).code != 0 {
                wrong.push(all.join(" "));
            }
        }
        for b in *bendings {
            for cmd in ["verify", "classify", "reconstruct", "solve-e"] {
                let expect = if cmd == "solve-e" && DEGENERATE_NORMAL.contains(name) { 1 } else { 0 };
                runs += 1;
                if cli(&["--resolution", res, cmd, name, b]).code != expect {
                    wrong.push(format!("{cmd} {name} {b}"));
                }
            }
        }
    }
    for (args, expect) in [
        (vec!["--chart", "1.0,1.2;0.3,0.5", "verify", "sphere", "killing:rot@beta=0.01"], 1),
        (vec!["--chart", "0,1;0,1", "verify", "cylinder", "radial"], 1),
        (vec!["frobnicate"], 2),
        (vec!["sanity", "klein_bottle"], 2),
        (vec!["verify", "cylinder", "wobble"], 2),
        (vec!["--tol-scale", "-1", "sanity", "torus"], 2),
    ] {
        runs += 1;
        if cli(&args).code != expect {
            wrong.push(args.join(" "));
        }
    }
    t.flag(format!("{runs} command lines, unexpected exit codes: {wrong:?}"), wrong.is_empty());

    let dir = std::env::temp_dir().join(format!("infbend-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = |n: &str| dir.join(n).to_string_lossy().into_owned();
    let mut drift: f64 = 0.0;
    for (name, field) in [("torus", "circle_fourier:2"), ("sphere", "killing:gen=0.2;1;-0.4"), ("cylinder_r4", "normal_field")] {
        let (sf, bf, pf) = (path("s.json"), path("b.json"), path("p.json"));
        let pair_spec = format!("{field}@E=0");
        for (what, out) in [(None, &sf), (Some(field), &bf), (Some(pair_spec.as_str()), &pf)] {
            let mut args = vec!["--resolution", res, "export", name];
            args.extend(what);
            args.extend(["--output", out.as_str()]);
            assert_eq!(cli(&args).code, 0, "{args:?}");
        }
        for (direct, file) in [(field, &bf), (pair_spec.as_str(), &pf)] {
            let (_, a) = json(&["--resolution", res, "verify", name, direct]);
            let (_, b) = json(&["verify", &sf, file]);
            let (ca, cb) = (a["checks"].as_array().unwrap(), b["checks"].as_array().unwrap());
            if ca.len() != cb.len() {
                drift = f64::INFINITY;
            }
            for (x, y) in ca.iter().zip(cb) {
                drift = drift.max((x["value"].as_f64().unwrap() - y["value"].as_f64().unwrap()).abs());
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    t.le("JSON re-ingestion residual drift", drift, DRIFT);
}

type Criterion = (usize, &'static str, fn(&mut Tally));

const CRITERIA: &[Criterion] = &[
    (1, "geometry sanity", geometry_sanity),
    (2, "fundamental system on the catalog", system_test),
    (3, "tangential identity and compatibility", tangential_identity),
    (4, "reconstruction round trip", round_trip),
    (5, "triviality of pairs", triviality),
    (6, "uniqueness of E", uniqueness),
    (7, "s-nullity and product hypotheses", nullities),
    (8, "product splitting", splitting),
    (9, "normal field on a degenerate scene", remark_coverage),
    (10, "hypersurface tensors", hypersurface),
    (11, "CLI contract", cli_contract),
];

fn main() -> ExitCode {
    let start = Instant::now();
    let results: Vec<(Tally, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|&(_, _, f)| {
                s.spawn(move || {
                    let t0 = Instant::now();
                    let mut t = Tally::new();
                    f(&mut t);
                    (t, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    let mut t = Tally::new();
                    t.fail("criterion", "panicked");
                    (t, 0.0)
                })
            })
            .collect()
    });
    let mut out = String::new();
    let mut failed = 0;
    for ((id, title, _), (t, secs)) in CRITERIA.iter().zip(&results) {
        let _ = writeln!(out, "criterion {id:>2} {:<40} {}  ({secs:.1}s)", title, if t.pass { "PASS" } else { "FAIL" });
        for line in &t.lines {
            let _ = writeln!(out, "      {line}");
        }
        failed += usize::from(!t.pass);
    }
    let _ = writeln!(
        out,
        "acceptance: {} passed, {failed} failed in {:.1}s",
        CRITERIA.len() - failed,
        start.elapsed().as_secs_f64()
    );
    print!("{out}");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
