use std::f64::consts::PI;

use infbend::numgrid::*;
use proptest::prelude::*;

fn interval(a: f64, b: f64, nodes: usize) -> ChartGrid {
    ChartGrid::new(vec![[a, b]], vec![nodes], vec![false]).unwrap()
}

fn circle(nodes: usize) -> ChartGrid {
    ChartGrid::new(vec![[0.0, 2.0 * PI]], vec![nodes], vec![true]).unwrap()
}

fn square(nodes: usize) -> ChartGrid {
    ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 1.0]], nodes, vec![false, false]).unwrap()
}

fn scalar(grid: &ChartGrid, f: impl Fn(&[f64]) -> f64) -> GridField {
    GridField::from_fn(grid, &[1], |_, x, out| out[0] = f(x))
}

#[test]
fn derivative_of_constant_vanishes() {
    let g = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 2.0 * PI]], 12, vec![false, true]).unwrap();
    let c = scalar(&g, |_| 3.25);
    for axis in 0..2 {
        assert!(partial(&c, axis).unwrap().max_abs() < 1e-13);
    }
}

#[test]
fn central_stencil_is_exact_on_quadratics() {
    let g = interval(0.0, 1.0, 64);
    let d = partial(&scalar(&g, |x| x[0] * x[0]), 0).unwrap();
    for node in 2..62 {
        assert!((d.at(node)[0] - 2.0 * g.coord(0, node)).abs() <= 1e-12);
    }
}

#[test]
fn periodic_sine_differentiates_to_cosine() {
    let g = circle(32);
    let h = 2.0 * PI / 32.0;
    let d = partial(&scalar(&g, |x| x[0].sin()), 0).unwrap();
    let err = (0..32).fold(0.0f64, |m, n| m.max((d.at(n)[0] - g.coord(0, n).cos()).abs()));
    assert!(err <= h * h, "error {err:.3e}");
}

#[test]
fn boundary_derivatives_keep_second_order() {
    let errors: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| {
            let g = interval(0.0, 1.5, n);
            let d = partial(&scalar(&g, |x| x[0].exp()), 0).unwrap();
            (0..n).fold(0.0f64, |m, k| m.max((d.at(k)[0] - g.coord(0, k).exp()).abs()))
        })
        .collect();
    let ratio = errors[0] / errors[1];
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn partial_rejects_bad_axis() {
    let g = interval(0.0, 1.0, 8);
    assert!(partial(&scalar(&g, |x| x[0]), 1).is_err());
}

#[test]
fn zero_rhs_keeps_base_value() {
    let g = square(8);
    let zero = |_: usize, _: usize, v: &[f64]| vec![0.0; v.len()];
    let path = rectangle_loop(&g, 0, (0, 1), (5, 3)).unwrap();
    assert_eq!(line_integrate(&g, &zero, &[1.5, -2.0], &path[..6]).unwrap(), vec![1.5, -2.0]);
}

#[test]
fn quadratic_antiderivative_is_exact() {
    let g = interval(0.0, 1.0, 64);
    let rhs = |node: usize, _: usize, _: &[f64]| vec![2.0 * g.coord(0, node)];
    let path: Vec<usize> = (5..50).collect();
    let (u0, u1) = (g.coord(0, 5), g.coord(0, 49));
    let v = line_integrate(&g, &rhs, &[0.75], &path).unwrap();
    assert!((v[0] - (u1 * u1 - u0 * u0 + 0.75)).abs() <= 1e-10);
}

#[test]
fn cosine_around_the_circle_closes() {
    let g = circle(32);
    let h = 2.0 * PI / 32.0;
    let rhs = |node: usize, _: usize, _: &[f64]| vec![g.coord(0, node).cos()];
    let path = periodic_loop(&g, 3, 0).unwrap();
    let r = loop_residual(&g, &rhs, &[0.4], &path).unwrap();
    assert!(r <= h * h * 2.0, "loop residual {r:.3e}");
}

#[test]
fn non_adjacent_paths_and_open_loops_are_rejected() {
    let g = square(8);
    let zero = |_: usize, _: usize, v: &[f64]| vec![0.0; v.len()];
    assert!(matches!(
        line_integrate(&g, &zero, &[0.0], &[0, 2]),
        Err(infbend::Error::NonAdjacentPath { .. })
    ));
    assert!(matches!(
        loop_residual(&g, &zero, &[0.0], &[0, 1, 2]),
        Err(infbend::Error::OpenLoop { .. })
    ));
}

#[test]
fn gradients_are_closed() {
    let g = square(16);
    // φ = u² + uv + v²
    let rhs = |node: usize, axis: usize, _: &[f64]| {
        let x = g.coords(node);
        vec![if axis == 0 { 2.0 * x[0] + x[1] } else { x[0] + 2.0 * x[1] }]
    };
    for corner in [0, 17, 100] {
        let cell = rectangle_loop(&g, corner, (0, 1), (1, 1)).unwrap();
        assert!(loop_residual(&g, &rhs, &[1.0], &cell).unwrap() <= 1e-10);
    }
}

#[test]
fn broken_form_picks_up_enclosed_area() {
    let g = square(32);
    let h = g.spacing(0);
    // the form u dv
    let rhs = |node: usize, axis: usize, _: &[f64]| vec![if axis == 1 { g.coords(node)[0] } else { 0.0 }];
    let cell = rectangle_loop(&g, 40, (0, 1), (1, 1)).unwrap();
    let r = loop_residual(&g, &rhs, &[0.0], &cell).unwrap();
    assert!((r - h * h).abs() <= 1e-12);
    let block = rectangle_loop(&g, 40, (0, 1), (4, 4)).unwrap();
    let r = loop_residual(&g, &rhs, &[0.0], &block).unwrap();
    assert!((r - 16.0 * h * h).abs() <= 1e-12);
    assert!(r > 10.0 * h * h);
}

#[test]
fn sweep_visits_every_node_once() {
    let g = ChartGrid::new(vec![[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], vec![8, 9, 10], vec![false, true, false]).unwrap();
    for order in [[0, 1, 2], [2, 1, 0], [1, 0, 2]] {
        let edges = sweep_edges(&g, 77, &order).unwrap();
        assert_eq!(edges.len(), g.node_count() - 1);
        let mut seen = vec![false; g.node_count()];
        seen[77] = true;
        for (from, to) in edges {
            assert!(seen[from]);
            assert!(!seen[to]);
            seen[to] = true;
        }
    }
}

#[test]
fn mixed_partials_commute_on_smooth_fields() {
    let g = ChartGrid::uniform(vec![[0.5, PI - 0.5], [0.0, 2.0 * PI]], 32, vec![false, true]).unwrap();
    let h = g.max_spacing();
    let u = scalar(&g, |x| x[0].sin() * x[1].cos() + (x[0] * x[1]).sin());
    let a = partial(&partial(&u, 0).unwrap(), 1).unwrap();
    let b = partial(&partial(&u, 1).unwrap(), 0).unwrap();
    // third derivatives of u are bounded by about 2π³ on this chart
    assert!(a.max_abs_diff(&b) <= 10.0 * h * h * 2.0 * PI.powi(3));
}

fn smooth(grid: &ChartGrid, c: [f64; 4]) -> GridField {
    GridField::from_fn(grid, &[2], |_, x, out| {
        out[0] = c[0] * (x[0] + 2.0 * x[1]).sin() + c[1] * x[0] * x[1];
        out[1] = c[2] * (x[0] - x[1]).cos() + c[3] * x[1].powi(3);
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_is_linear(c1 in prop::array::uniform4(-3.0f64..3.0), c2 in prop::array::uniform4(-3.0f64..3.0),
                         a in -5.0f64..5.0, b in -5.0f64..5.0, axis in 0usize..2) {
        let g = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 2.0 * PI]], 10, vec![false, true]).unwrap();
        let (f, k) = (smooth(&g, c1), smooth(&g, c2));
        let lhs = partial(&f.combine(a, &k, b).unwrap(), axis).unwrap();
        let rhs = partial(&f, axis).unwrap().combine(a, &partial(&k, axis).unwrap(), b).unwrap();
        // roundoff follows the size of each term over h, not the derivative
        let scale = 1.0 + (a.abs() * f.max_abs() + b.abs() * k.max_abs()) / g.max_spacing();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-13 * scale);
    }

    #[test]
    fn quadrature_path_and_reverse_cancel(steps in prop::collection::vec((0usize..2, prop::bool::ANY), 1..40),
                                          base in prop::array::uniform2(-10.0f64..10.0)) {
        let g = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 2.0 * PI]], 12, vec![false, true]).unwrap();
        let rhs = |node: usize, axis: usize, _: &[f64]| {
            let x = g.coords(node);
            vec![(x[0] * 3.0 + axis as f64).sin(), x[1].cos() * x[0]]
        };
        let mut path = vec![g.center_node()];
        for (axis, up) in steps {
            let cur = *path.last().unwrap();
            if let Some(next) = g.neighbor(cur, axis, if up { 1 } else { -1 }) {
                path.push(next);
            }
        }
        let there = line_integrate(&g, &rhs, &base, &path).unwrap();
        path.reverse();
        let back = line_integrate(&g, &rhs, &there, &path).unwrap();
        for (x, y) in back.iter().zip(&base) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn linear_ode_reversal_error_is_fifth_order_per_edge() {
    // y' = y·cos(u): reversal is not exact for a value-dependent rhs, but the
    // defect per edge is O(h⁵).
    let defect = |n: usize| {
        let g = interval(0.0, 1.0, n);
        let rhs = |node: usize, _: usize, v: &[f64]| vec![v[0] * g.coord(0, node).cos()];
        let path: Vec<usize> = (0..n).collect();
        let there = line_integrate(&g, &rhs, &[1.0], &path).unwrap();
        let rev: Vec<usize> = path.into_iter().rev().collect();
        (line_integrate(&g, &rhs, &there, &rev).unwrap()[0] - 1.0).abs()
    };
    assert!(defect(16) < 1e-5);
    assert!(defect(32) < defect(16) / 8.0 || defect(32) < 1e-14);
}
