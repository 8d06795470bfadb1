//! Rectangular chart grids, sampled fields, finite differences and line
//! integration along grid paths.
//!
//! Nodes are stored row-major over the axes in declaration order, so the
//! last axis varies fastest. Every per-node value of a [`GridField`] is a
//! flat slice whose logical shape is `field.shape()`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count per axis.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartGrid {
    dim: usize,
    bounds: Vec<[f64; 2]>,
    resolution: Vec<usize>,
    periodic: Vec<bool>,
}

impl ChartGrid {
    pub fn new(bounds: Vec<[f64; 2]>, resolution: Vec<usize>, periodic: Vec<bool>) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        if resolution.len() != dim || periodic.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "bounds, resolution and periodic have lengths {}, {}, {}",
                dim,
                resolution.len(),
                periodic.len()
            )));
        }
        for (axis, (&[a, b], &r)) in bounds.iter().zip(&resolution).enumerate() {
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has empty or non-finite interval [{a}, {b}]"
                )));
            }
            if r < MIN_RESOLUTION {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {r} nodes, need at least {MIN_RESOLUTION}"
                )));
            }
        }
        Ok(Self {
            dim,
            bounds,
            resolution,
            periodic,
        })
    }

    /// Uniform grid with the same node count on every axis.
    pub fn uniform(bounds: Vec<[f64; 2]>, nodes: usize, periodic: Vec<bool>) -> Result<Self> {
        let dim = bounds.len();
        Self::new(bounds, vec![nodes; dim], periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let [a, b] = self.bounds[axis];
        let r = self.resolution[axis];
        if self.periodic[axis] {
            (b - a) / r as f64
        } else {
            (b - a) / (r - 1) as f64
        }
    }

    /// Largest spacing over all axes; the `h` in every `c · h²` tolerance.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        self.bounds[axis][0] + index as f64 * self.spacing(axis)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rest = node;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.resolution[axis];
            rest /= self.resolution[axis];
        }
        idx
    }

    pub fn node(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    /// Neighbour `step` nodes away along `axis`, wrapping on periodic axes.
    pub fn neighbor(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let r = self.resolution[axis] as isize;
        let i = self.multi_index(node)[axis] as isize;
        let j = i + step;
        let j = if self.periodic[axis] {
            j.rem_euclid(r)
        } else if (0..r).contains(&j) {
            j
        } else {
            return None;
        };
        Some((node as isize + (j - i) * self.stride(axis) as isize) as usize)
    }

    /// Returns `(axis, sign)` when `a` and `b` are joined by one grid edge.
    pub fn edge(&self, a: usize, b: usize) -> Option<(usize, f64)> {
        (0..self.dim).find_map(|axis| {
            if self.neighbor(a, axis, 1) == Some(b) {
                Some((axis, 1.0))
            } else if self.neighbor(a, axis, -1) == Some(b) {
                Some((axis, -1.0))
            } else {
                None
            }
        })
    }

    /// Sub-grid node sets: the grid of the axes in `axes`, in order.
    pub fn restrict(&self, axes: &[usize]) -> Result<ChartGrid> {
        ChartGrid::new(
            axes.iter().map(|&a| self.bounds[a]).collect(),
            axes.iter().map(|&a| self.resolution[a]).collect(),
            axes.iter().map(|&a| self.periodic[a]).collect(),
        )
    }

    pub fn center_node(&self) -> usize {
        let idx: Vec<usize> = self.resolution.iter().map(|&r| r / 2).collect();
        self.node(&idx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: ChartGrid,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: &ChartGrid, shape: &[usize]) -> Self {
        let comps: usize = shape.iter().product();
        Self {
            grid: grid.clone(),
            shape: shape.to_vec(),
            values: vec![0.0; comps * grid.node_count()],
        }
    }

    /// Builds a field node by node; `fill` receives the node index, its
    /// chart coordinates and the output slice.
    pub fn from_fn(
        grid: &ChartGrid,
        shape: &[usize],
        mut fill: impl FnMut(usize, &[f64], &mut [f64]),
    ) -> Self {
        let mut field = Self::zeros(grid, shape);
        let comps = field.components();
        for node in 0..grid.node_count() {
            let x = grid.coords(node);
            fill(node, &x, &mut field.values[node * comps..(node + 1) * comps]);
        }
        field
    }

    pub fn from_values(grid: &ChartGrid, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let comps: usize = shape.iter().product();
        if values.len() != comps * grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {} nodes of shape {:?}, got {}",
                comps * grid.node_count(),
                grid.node_count(),
                shape,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite value at node {}",
                pos / comps.max(1)
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn components(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let c = self.components();
        &self.values[node * c..(node + 1) * c]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let c = self.components();
        &mut self.values[node * c..(node + 1) * c]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `a · self + b · other`.
    pub fn combine(&self, a: f64, other: &GridField, b: f64) -> Result<GridField> {
        if self.shape != other.shape || self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "cannot combine fields of shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridField {
            grid: self.grid.clone(),
            shape: self.shape.clone(),
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

/// First partial derivative along `axis`: second-order central differences
/// in the interior and across periodic wraps, second-order one-sided
/// differences on the two boundary layers of non-periodic axes.
///
/// The boundary stencil is the central one applied after extending the
/// samples by quartic extrapolation, so its truncation error agrees with the
/// interior error up to `O(h⁴)`. Iterated derivatives therefore keep their
/// `O(h²)` rate up to the boundary.
pub fn partial(field: &GridField, axis: usize) -> Result<GridField> {
    let grid = field.grid();
    if axis >= grid.dim() {
        return Err(Error::AxisOutOfRange {
            axis,
            dim: grid.dim(),
        });
    }
    let h = grid.spacing(axis);
    let r = grid.resolution()[axis];
    let stride = grid.stride(axis);
    let comps = field.components();
    let periodic = grid.is_periodic(axis);
    let src = field.values();
    let mut out = GridField::zeros(grid, field.shape());
    for node in 0..grid.node_count() {
        let i = (node / stride) % r;
        let at = |j: usize| {
            let n = node - i * stride + j * stride;
            &src[n * comps..(n + 1) * comps]
        };
        let dst = out.at_mut(node);
        if periodic || (i > 0 && i + 1 < r) {
            let (lo, hi) = (at((i + r - 1) % r), at((i + 1) % r));
            for c in 0..comps {
                dst[c] = (hi[c] - lo[c]) / (2.0 * h);
            }
        } else if i == 0 {
            let f = [at(0), at(1), at(2), at(3), at(4)];
            for c in 0..comps {
                dst[c] = one_sided(f.map(|v| v[c])) / h;
            }
        } else {
            let f = [at(r - 1), at(r - 2), at(r - 3), at(r - 4), at(r - 5)];
            for c in 0..comps {
                dst[c] = -one_sided(f.map(|v| v[c])) / h;
            }
        }
    }
    Ok(out)
}

/// `h·f′(x₀)` from `f(x₀), f(x₀ + h), …, f(x₀ + 4h)`.
fn one_sided(f: [f64; 5]) -> f64 {
    (-5.0 * f[0] + 11.0 * f[1] - 10.0 * f[2] + 5.0 * f[3] - f[4]) / 2.0
}

/// All first partials, one field per axis.
pub fn gradient(field: &GridField) -> Vec<GridField> {
    (0..field.grid().dim())
        .map(|axis| partial(field, axis).expect("axis in range"))
        .collect()
}

/// Derivative provider for line integration: the derivative, per unit chart
/// coordinate along `axis`, of the integrated quantity at `node` given its
/// current `value`.
pub trait EdgeRhs {
    fn eval(&self, node: usize, axis: usize, value: &[f64]) -> Vec<f64>;
}

impl<F> EdgeRhs for F
where
    F: Fn(usize, usize, &[f64]) -> Vec<f64>,
{
    fn eval(&self, node: usize, axis: usize, value: &[f64]) -> Vec<f64> {
        self(node, axis, value)
    }
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

/// One classical fourth-order step across the edge `from -> to`. Midpoint
/// evaluations average the rhs of the two endpoints.
pub fn rk4_edge(
    grid: &ChartGrid,
    rhs: &dyn EdgeRhs,
    from: usize,
    to: usize,
    value: &[f64],
) -> Option<Vec<f64>> {
    let (axis, sign) = grid.edge(from, to)?;
    let h = sign * grid.spacing(axis);
    let mid = |y: &[f64]| -> Vec<f64> {
        let a = rhs.eval(from, axis, y);
        let b = rhs.eval(to, axis, y);
        a.iter().zip(&b).map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let k1 = rhs.eval(from, axis, value);
    let k2 = mid(&axpy(value, 0.5 * h, &k1));
    let k3 = mid(&axpy(value, 0.5 * h, &k2));
    let k4 = rhs.eval(to, axis, &axpy(value, h, &k3));
    Some(
        (0..value.len())
            .map(|c| value[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]))
            .collect(),
    )
}

/// Integrates along `path` starting from `base_value` at `path[0]`.
pub fn line_integrate(
    grid: &ChartGrid,
    rhs: &dyn EdgeRhs,
    base_value: &[f64],
    path: &[usize],
) -> Result<Vec<f64>> {
    let mut value = base_value.to_vec();
    for (at, pair) in path.windows(2).enumerate() {
        value = rk4_edge(grid, rhs, pair[0], pair[1], &value).ok_or(Error::NonAdjacentPath {
            at,
            from: pair[0],
            to: pair[1],
        })?;
    }
    Ok(value)
}

/// Change of the integrated value around a closed path, normalized by
/// `max(1, |base_value|)`.
pub fn loop_residual(
    grid: &ChartGrid,
    rhs: &dyn EdgeRhs,
    base_value: &[f64],
    path: &[usize],
) -> Result<f64> {
    let (start, end) = match (path.first(), path.last()) {
        (Some(&s), Some(&e)) => (s, e),
        _ => return Err(Error::OpenLoop { start: 0, end: 0 }),
    };
    if start != end || path.len() < 2 {
        return Err(Error::OpenLoop { start, end });
    }
    let end_value = line_integrate(grid, rhs, base_value, path)?;
    let diff = end_value
        .iter()
        .zip(base_value)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = base_value.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(diff / norm.max(1.0))
}

/// Closed rectangle of grid edges: `extent.0` steps along `axes.0`, then
/// `extent.1` along `axes.1`, then back.
pub fn rectangle_loop(
    grid: &ChartGrid,
    corner: usize,
    axes: (usize, usize),
    extent: (usize, usize),
) -> Result<Vec<usize>> {
    for axis in [axes.0, axes.1] {
        if axis >= grid.dim() {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: grid.dim(),
            });
        }
    }
    let mut path = vec![corner];
    let legs = [
        (axes.0, extent.0, 1),
        (axes.1, extent.1, 1),
        (axes.0, extent.0, -1),
        (axes.1, extent.1, -1),
    ];
    let mut node = corner;
    for (axis, count, step) in legs {
        for _ in 0..count {
            node = grid.neighbor(node, axis, step).ok_or_else(|| {
                Error::InvalidGrid(format!("rectangle leaves the grid along axis {axis}"))
            })?;
            path.push(node);
        }
    }
    Ok(path)
}

/// The full loop around periodic `axis` through `node`.
pub fn periodic_loop(grid: &ChartGrid, node: usize, axis: usize) -> Result<Vec<usize>> {
    if !grid.is_periodic(axis) {
        return Err(Error::InvalidGrid(format!("axis {axis} is not periodic")));
    }
    let mut path = vec![node];
    let mut cur = node;
    for _ in 0..grid.resolution()[axis] {
        cur = grid.neighbor(cur, axis, 1).expect("periodic axis wraps");
        path.push(cur);
    }
    Ok(path)
}

/// Edges `(from, to)` of an axis-ordered sweep from `base`, in processing
/// order: the line through `base` along `order[0]`, then lines along
/// `order[1]` from every node of that line, and so on. Periodic axes are
/// swept without crossing the wrap.
pub fn sweep_edges(grid: &ChartGrid, base: usize, order: &[usize]) -> Result<Vec<(usize, usize)>> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..grid.dim()).collect::<Vec<_>>() {
        return Err(Error::InvalidGrid(format!(
            "sweep order {order:?} is not a permutation of the axes"
        )));
    }
    if base >= grid.node_count() {
        return Err(Error::InvalidGrid(format!("base node {base} outside the grid")));
    }
    let mut edges = Vec::with_capacity(grid.node_count());
    let mut frontier = vec![base];
    for &axis in order {
        let r = grid.resolution()[axis];
        let stride = grid.stride(axis);
        let mut next = Vec::with_capacity(frontier.len() * r);
        for &start in &frontier {
            let i0 = (start / stride) % r;
            let line = |j: usize| start - i0 * stride + j * stride;
            next.push(start);
            let forward: Vec<usize> = (i0 + 1..r).collect();
            let backward: Vec<usize> = (0..i0).rev().collect();
            for run in [forward, backward] {
                let mut prev = start;
                for j in run {
                    let node = line(j);
                    edges.push((prev, node));
                    next.push(node);
                    prev = node;
                }
            }
        }
        frontier = next;
    }
    Ok(edges)
}

/// Integrates from `base` to every node along the sweep of [`sweep_edges`].
pub fn sweep(
    grid: &ChartGrid,
    rhs: &dyn EdgeRhs,
    base: usize,
    base_value: &[f64],
    order: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let mut values: Vec<Option<Vec<f64>>> = vec![None; grid.node_count()];
    values[base] = Some(base_value.to_vec());
    for (from, to) in sweep_edges(grid, base, order)? {
        let y = values[from].as_ref().expect("swept in order");
        let v = rk4_edge(grid, rhs, from, to, y).expect("adjacent line nodes");
        values[to] = Some(v);
    }
    Ok(values
        .into_iter()
        .map(|v| v.expect("sweep covers the grid"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line_grid(nodes: usize) -> ChartGrid {
        ChartGrid::new(vec![[0.0, 1.0]], vec![nodes], vec![false]).unwrap()
    }

    fn circle_grid(nodes: usize) -> ChartGrid {
        ChartGrid::new(vec![[0.0, 2.0 * PI]], vec![nodes], vec![true]).unwrap()
    }

    #[test]
    fn rejects_coarse_axes() {
        assert!(ChartGrid::new(vec![[0.0, 1.0]], vec![7], vec![false]).is_err());
        assert!(ChartGrid::new(vec![[1.0, 0.0]], vec![9], vec![false]).is_err());
    }

    #[test]
    fn index_round_trip_is_row_major() {
        let g = ChartGrid::new(vec![[0.0, 1.0], [0.0, 1.0]], vec![8, 9], vec![false, true]).unwrap();
        assert_eq!(g.node(&[1, 0]), 9);
        assert_eq!(g.node(&[0, 1]), 1);
        for node in 0..g.node_count() {
            assert_eq!(g.node(&g.multi_index(node)), node);
        }
        assert_eq!(g.neighbor(g.node(&[3, 8]), 1, 1), Some(g.node(&[3, 0])));
        assert_eq!(g.neighbor(g.node(&[7, 2]), 0, 1), None);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = circle_grid(16);
        let f = GridField::from_fn(&g, &[2], |_, _, out| out.copy_from_slice(&[3.0, -1.5]));
        assert_eq!(partial(&f, 0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn quadratic_is_differentiated_exactly() {
        let g = line_grid(64);
        let f = GridField::from_fn(&g, &[1], |_, x, out| out[0] = x[0] * x[0]);
        let d = partial(&f, 0).unwrap();
        for node in 0..g.node_count() {
            let u = g.coords(node)[0];
            assert!((d.at(node)[0] - 2.0 * u).abs() <= 1e-12, "node {node}");
        }
    }

    #[test]
    fn periodic_sine_derivative_within_h_squared() {
        let g = circle_grid(32);
        let f = GridField::from_fn(&g, &[1], |_, x, out| out[0] = x[0].sin());
        let d = partial(&f, 0).unwrap();
        let h = 2.0 * PI / 32.0;
        let err = (0..g.node_count())
            .map(|n| (d.at(n)[0] - g.coords(n)[0].cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= h * h, "err {err}");
    }

    #[test]
    fn iterated_derivatives_converge_at_second_order_up_to_the_boundary() {
        let third_error = |nodes: usize| {
            let g = ChartGrid::new(vec![[0.0, 1.5]], vec![nodes], vec![false]).unwrap();
            let f = GridField::from_fn(&g, &[1], |_, x, out| out[0] = x[0].sin());
            let d3 = partial(&partial(&partial(&f, 0).unwrap(), 0).unwrap(), 0).unwrap();
            (0..nodes)
                .map(|n| (d3.at(n)[0] + g.coords(n)[0].cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = third_error(32) / third_error(64);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn axis_out_of_range_is_an_error() {
        let g = line_grid(8);
        let f = GridField::zeros(&g, &[1]);
        assert!(matches!(partial(&f, 1), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn zero_rhs_keeps_base_value() {
        let g = line_grid(16);
        let rhs = |_: usize, _: usize, v: &[f64]| vec![0.0; v.len()];
        let path: Vec<usize> = (0..16).collect();
        let v = line_integrate(&g, &rhs, &[1.5, -2.0], &path).unwrap();
        assert_eq!(v, vec![1.5, -2.0]);
    }

    #[test]
    fn gradient_of_square_integrates_exactly() {
        let g = line_grid(40);
        let rhs = |node: usize, _: usize, _: &[f64]| vec![2.0 * g.coords(node)[0]];
        let path: Vec<usize> = (5..33).collect();
        let v = line_integrate(&g, &rhs, &[0.25], &path).unwrap();
        let (a, b) = (g.coords(5)[0], g.coords(32)[0]);
        assert!((v[0] - (b * b - a * a + 0.25)).abs() <= 1e-10);
    }

    #[test]
    fn cosine_around_the_circle_closes() {
        let g = circle_grid(32);
        let rhs = |node: usize, _: usize, _: &[f64]| vec![g.coords(node)[0].cos()];
        let path = periodic_loop(&g, 3, 0).unwrap();
        let res = loop_residual(&g, &rhs, &[0.7], &path).unwrap();
        let h = 2.0 * PI / 32.0;
        assert!(res <= 2.0 * h * h, "res {res}");
    }

    #[test]
    fn non_adjacent_path_is_rejected() {
        let g = line_grid(16);
        let rhs = |_: usize, _: usize, v: &[f64]| vec![0.0; v.len()];
        assert!(matches!(
            line_integrate(&g, &rhs, &[0.0], &[0, 2]),
            Err(Error::NonAdjacentPath { .. })
        ));
        assert!(matches!(
            loop_residual(&g, &rhs, &[0.0], &[0, 1, 2]),
            Err(Error::OpenLoop { .. })
        ));
    }

    #[test]
    fn exact_gradient_has_no_loop_residual_and_u_dv_has_area() {
        let g = ChartGrid::uniform(vec![[0.0, 1.0], [0.0, 1.0]], 33, vec![false, false]).unwrap();
        // d(u v) = v du + u dv
        let closed = |node: usize, axis: usize, _: &[f64]| {
            let x = g.coords(node);
            vec![if axis == 0 { x[1] } else { x[0] }]
        };
        let cell = rectangle_loop(&g, g.node(&[4, 7]), (0, 1), (1, 1)).unwrap();
        assert!(loop_residual(&g, &closed, &[0.0], &cell).unwrap() <= 1e-10);

        // u dv alone: circulation equals the enclosed area
        let broken = |node: usize, axis: usize, _: &[f64]| {
            let x = g.coords(node);
            vec![if axis == 1 { x[0] } else { 0.0 }]
        };
        let h = g.spacing(0);
        let square = rectangle_loop(&g, g.node(&[2, 2]), (0, 1), (8, 8)).unwrap();
        let res = loop_residual(&g, &broken, &[0.0], &square).unwrap();
        let area = (8.0 * h) * (8.0 * h);
        assert!((res - area).abs() <= 1e-12, "res {res} area {area}");
        assert!(res > 10.0 * h * h);
    }

    #[test]
    fn sweep_reproduces_a_polynomial_potential() {
        let g = ChartGrid::uniform(vec![[0.0, 1.0], [-1.0, 1.0]], 12, vec![false, false]).unwrap();
        // potential u v + u, gradient (v + 1, u)
        let rhs = |node: usize, axis: usize, _: &[f64]| {
            let x = g.coords(node);
            vec![if axis == 0 { x[1] + 1.0 } else { x[0] }]
        };
        let base = g.node(&[5, 3]);
        let xb = g.coords(base);
        let pot = |x: &[f64]| x[0] * x[1] + x[0];
        for order in [[0, 1], [1, 0]] {
            let vals = sweep(&g, &rhs, base, &[pot(&xb)], &order).unwrap();
            for node in 0..g.node_count() {
                assert!((vals[node][0] - pot(&g.coords(node))).abs() < 1e-12);
            }
        }
    }
}
