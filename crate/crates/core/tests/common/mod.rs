#![allow(dead_code)]

use infbend::geometry::{build_geometry, FramedGeometry};
use infbend::scenes::{scene, Spec};
use infbend::tolerance::Tolerance;

pub fn geom(spec: &str, nodes: usize) -> FramedGeometry {
    build_geometry(&scene(&Spec::parse(spec).unwrap(), nodes, None).unwrap()).unwrap()
}

pub fn geom_on(spec: &str, nodes: usize, chart: &[[f64; 2]]) -> FramedGeometry {
    build_geometry(&scene(&Spec::parse(spec).unwrap(), nodes, Some(chart)).unwrap()).unwrap()
}

pub fn tol(geom: &FramedGeometry) -> Tolerance {
    Tolerance::for_grid(geom.grid())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every catalog scene with the bendings that apply to it.
pub const CATALOG: &[(&str, &[&str])] = &[
    ("plane", &["zero", "killing:rot", "killing:v=1;2;3"]),
    ("cylinder", &["zero", "killing:rot", "killing:gen=0.3;-1;0.5", "circle_fourier:2", "circle_fourier:3"]),
    ("cylinder_r4", &["killing:rot", "normal_field", "normal_field:profile=wave", "circle_fourier:2"]),
    ("torus", &["killing:rot", "killing:gen=1;0.3;0;0.5;-1;0.7", "circle_fourier:2", "circle_fourier:2+circle_fourier:3,axis=1,offset=2"]),
    ("sphere", &["killing:rot", "killing:gen=0.2;1;-0.4"]),
    ("graph", &["killing:gen=0.3;-1;0.5,v=1;0;2"]),
    ("complex_graph", &["killing:gen=1;0.3;0;0.5;-1;0.7"]),
];
