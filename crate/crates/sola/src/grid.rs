//! Uniform tensor grid on a box domain: quadrature, edge gradients,
//! conservative flux assembly with homogeneous Dirichlet boundary, boundary
//! strips and compactly supported space-time cutoffs.

use crate::error::{Error, Result};
use crate::problem::Flux;

/// Points are carried as `[f64; 2]`; 1d grids use component 0 only.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct BoxDomain {
    pub dim: usize,
    pub min: Point,
    pub max: Point,
}

impl BoxDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Parameter(format!("degenerate interval [{a}, {b}]")));
        }
        Ok(Self {
            dim: 1,
            min: [a, 0.0],
            max: [b, 0.0],
        })
    }

    pub fn square(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Parameter(format!("degenerate square [{a}, {b}]^2")));
        }
        Ok(Self {
            dim: 2,
            min: [a, a],
            max: [b, b],
        })
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.side(a)).product()
    }

    /// Distance from `x` to the boundary of the box (0 outside).
    pub fn boundary_distance(&self, x: Point) -> f64 {
        let mut d = f64::INFINITY;
        for a in 0..self.dim {
            d = d.min(x[a] - self.min[a]).min(self.max[a] - x[a]);
        }
        d.max(0.0)
    }

    /// Measure of the strip of points within distance `eps` of the boundary.
    pub fn strip_measure(&self, eps: f64) -> f64 {
        match self.dim {
            1 => (2.0 * eps).min(self.side(0)),
            _ => {
                let l0 = self.side(0);
                let l1 = self.side(1);
                let inner0 = (l0 - 2.0 * eps).max(0.0);
                let inner1 = (l1 - 2.0 * eps).max(0.0);
                l0 * l1 - inner0 * inner1
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    pub nodes_per_axis: usize,
    pub spacing: f64,
    pub time_steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub domain: BoxDomain,
    interior: Vec<usize>,
    /// Rank of each node among the interior unknowns; usize::MAX on the boundary.
    interior_rank: Vec<usize>,
}

pub fn build_grid(
    domain: BoxDomain,
    nodes_per_axis: usize,
    time_steps: usize,
    horizon: f64,
) -> Result<Grid> {
    if nodes_per_axis < 3 {
        return Err(Error::Parameter(format!(
            "need at least 3 nodes per axis (got {nodes_per_axis})"
        )));
    }
    if time_steps < 1 {
        return Err(Error::Parameter("need at least one time step".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!(
            "horizon must be positive (got {horizon})"
        )));
    }
    if domain.dim == 2 && (domain.side(0) - domain.side(1)).abs() > 1e-12 * domain.side(0) {
        return Err(Error::Parameter(
            "2d grids require a square box (uniform spacing on both axes)".into(),
        ));
    }
    let spacing = domain.side(0) / (nodes_per_axis - 1) as f64;
    let n = nodes_per_axis;
    let count = n.pow(domain.dim as u32);
    let mut interior = Vec::new();
    let mut interior_rank = vec![usize::MAX; count];
    for idx in 0..count {
        let (i, j) = match domain.dim {
            1 => (idx, 0),
            _ => (idx % n, idx / n),
        };
        let on_boundary = i == 0 || i == n - 1 || (domain.dim == 2 && (j == 0 || j == n - 1));
        if !on_boundary {
            interior_rank[idx] = interior.len();
            interior.push(idx);
        }
    }
    Ok(Grid {
        dim: domain.dim,
        nodes_per_axis,
        spacing,
        time_steps,
        dt: horizon / time_steps as f64,
        horizon,
        domain,
        interior,
        interior_rank,
    })
}

/// Undirected grid edge along `axis`, from node `from` to node `to`.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub axis: usize,
    pub from: usize,
    pub to: usize,
}

impl Grid {
    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        match self.dim {
            1 => (idx, 0),
            _ => (idx % self.nodes_per_axis, idx / self.nodes_per_axis),
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        match self.dim {
            1 => i,
            _ => j * self.nodes_per_axis + i,
        }
    }

    pub fn position(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        [
            self.domain.min[0] + i as f64 * self.spacing,
            if self.dim == 2 {
                self.domain.min[1] + j as f64 * self.spacing
            } else {
                0.0
            },
        ]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.interior_rank[idx] == usize::MAX
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_rank(&self, idx: usize) -> Option<usize> {
        match self.interior_rank[idx] {
            usize::MAX => None,
            r => Some(r),
        }
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// Tensor trapezoid weight of a node (volume units).
    pub fn quad_weight(&self, idx: usize) -> f64 {
        let (i, j) = self.coords(idx);
        let n = self.nodes_per_axis;
        let mut w = self.spacing.powi(self.dim as i32);
        if i == 0 || i == n - 1 {
            w *= 0.5;
        }
        if self.dim == 2 && (j == 0 || j == n - 1) {
            w *= 0.5;
        }
        w
    }

    /// Trapezoid quadrature of a nodal slice over the box.
    pub fn integrate_space(&self, slice: &[f64]) -> f64 {
        debug_assert_eq!(slice.len(), self.node_count());
        slice
            .iter()
            .enumerate()
            .map(|(idx, v)| self.quad_weight(idx) * v)
            .sum()
    }

    /// Space-time quadrature: composite right-endpoint rule in time, i.e.
    /// slices 1..=M each weighted dt. Slice 0 never enters space-time
    /// integrals; initial-datum terms are handled separately where needed.
    pub fn integrate_space_time(&self, gf: &GridFunction) -> f64 {
        (1..=self.time_steps)
            .map(|m| self.dt * self.integrate_space(gf.slice(m)))
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.nodes_per_axis;
        match self.dim {
            1 => n - 1,
            _ => 2 * n * (n - 1),
        }
    }

    /// Visit every edge once, in a fixed deterministic order
    /// (x-edges row by row, then y-edges in 2d).
    pub fn for_each_edge<F: FnMut(Edge)>(&self, mut f: F) {
        let n = self.nodes_per_axis;
        match self.dim {
            1 => {
                for i in 0..n - 1 {
                    f(Edge {
                        axis: 0,
                        from: i,
                        to: i + 1,
                    });
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n - 1 {
                        f(Edge {
                            axis: 0,
                            from: self.index(i, j),
                            to: self.index(i + 1, j),
                        });
                    }
                }
                for j in 0..n - 1 {
                    for i in 0..n {
                        f(Edge {
                            axis: 1,
                            from: self.index(i, j),
                            to: self.index(i, j + 1),
                        });
                    }
                }
            }
        }
    }

    pub fn edge_midpoint(&self, e: Edge) -> Point {
        let a = self.position(e.from);
        let b = self.position(e.to);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Full gradient vector at an edge midpoint: exact difference quotient
    /// along the edge axis, averaged transverse difference quotients in 2d.
    pub fn edge_gradient(&self, slice: &[f64], e: Edge) -> [f64; 2] {
        let h = self.spacing;
        let axial = (slice[e.to] - slice[e.from]) / h;
        if self.dim == 1 {
            return [axial, 0.0];
        }
        let n = self.nodes_per_axis;
        let t = 1 - e.axis; // transverse axis
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for &node in &[e.from, e.to] {
            let (i, j) = self.coords(node);
            let (along, limit) = if t == 0 { (i, n) } else { (j, n) };
            if along + 1 < limit {
                let up = if t == 0 {
                    self.index(i + 1, j)
                } else {
                    self.index(i, j + 1)
                };
                sum += (slice[up] - slice[node]) / h;
                cnt += 1;
            }
            if along > 0 {
                let dn = if t == 0 {
                    self.index(i - 1, j)
                } else {
                    self.index(i, j - 1)
                };
                sum += (slice[node] - slice[dn]) / h;
                cnt += 1;
            }
        }
        let trans = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        if e.axis == 0 {
            [axial, trans]
        } else {
            [trans, axial]
        }
    }
}

/// Space-time nodal field; slice `m` holds the values at time `m * dt`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub node_count: usize,
    pub slices: usize,
    data: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        let node_count = grid.node_count();
        let slices = grid.time_steps + 1;
        Self {
            node_count,
            slices,
            data: vec![0.0; node_count * slices],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(Point, f64) -> f64) -> Self {
        let mut gf = Self::zeros(grid);
        for m in 0..gf.slices {
            let t = grid.time(m);
            for idx in 0..gf.node_count {
                let x = grid.position(idx);
                gf.slice_mut(m)[idx] = f(x, t);
            }
        }
        gf
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.data[m * self.node_count..(m + 1) * self.node_count]
    }

    pub fn slice_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.node_count..(m + 1) * self.node_count]
    }

    /// Maximum nodal value over slices 1..=M (the evolved part).
    pub fn max_evolved(&self) -> f64 {
        self.data[self.node_count..]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
    }

    pub fn min_all(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    /// L1(Q) distance computed with the grid's space-time quadrature.
    pub fn l1_distance(&self, other: &GridFunction, grid: &Grid) -> f64 {
        assert_eq!(self.node_count, other.node_count);
        assert_eq!(self.slices, other.slices);
        let mut total = 0.0;
        for m in 1..self.slices {
            let a = self.slice(m);
            let b = other.slice(m);
            let mut s = 0.0;
            for idx in 0..self.node_count {
                s += grid.quad_weight(idx) * (a[idx] - b[idx]).abs();
            }
            total += grid.dt * s;
        }
        total
    }

    pub fn l1_norm(&self, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for m in 1..self.slices {
            total += grid.dt
                * grid.integrate_space(&self.slice(m).iter().map(|v| v.abs()).collect::<Vec<_>>());
        }
        total
    }
}

/// Conservative assembly of the elliptic operator `-div a(x,t,grad u)` at the
/// interior nodes (zero elsewhere). For the identity flux at p = 2 this is
/// the standard second-difference stencil.
pub fn flux_divergence(grid: &Grid, flux: &Flux, p: f64, slice: &[f64], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    let h = grid.spacing;
    grid.for_each_edge(|e| {
        let g = grid.edge_gradient(slice, e);
        let mid = grid.edge_midpoint(e);
        let fe = flux.eval(mid, t, g, p)[e.axis];
        // A_i = -(F_right - F_left)/h per axis: edge contributes -F/h to its
        // `from` row and +F/h to its `to` row, interior rows only.
        if !grid.is_boundary(e.from) {
            out[e.from] -= fe / h;
        }
        if !grid.is_boundary(e.to) {
            out[e.to] += fe / h;
        }
    });
    out
}

/// Mean of `(1/eps) * T_k(u)` over the boundary strip of width `eps`,
/// quadratured with exact cell/strip overlap weights.
pub fn boundary_strip_mass(grid: &Grid, slice: &[f64], k: f64, eps: f64) -> Result<f64> {
    strip_power_mass(grid, slice, k, eps, 1.0)
}

/// Same strip quadrature applied to `T_k(u)^q` (used by the interpolation
/// diagnostic for strong singularities).
pub fn strip_power_mass(grid: &Grid, slice: &[f64], k: f64, eps: f64, q: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Parameter(format!(
            "strip level k must be positive (got {k})"
        )));
    }
    if eps <= grid.spacing {
        return Err(Error::Parameter(format!(
            "strip width {eps} does not resolve the grid spacing {}",
            grid.spacing
        )));
    }
    let h = grid.spacing;
    let dom = &grid.domain;
    // 1d overlap of a node cell with [min, min+eps) U (max-eps, max].
    let axis_overlap = |x: f64, axis: usize| -> f64 {
        let lo = (x - 0.5 * h).max(dom.min[axis]);
        let hi = (x + 0.5 * h).min(dom.max[axis]);
        if hi <= lo {
            return 0.0;
        }
        let inner_lo = dom.min[axis] + eps;
        let inner_hi = dom.max[axis] - eps;
        let inner = (hi.min(inner_hi) - lo.max(inner_lo)).max(0.0);
        (hi - lo) - inner
    };
    let axis_full = |x: f64, axis: usize| -> f64 {
        let lo = (x - 0.5 * h).max(dom.min[axis]);
        let hi = (x + 0.5 * h).min(dom.max[axis]);
        (hi - lo).max(0.0)
    };
    let mut total = 0.0;
    for idx in 0..grid.node_count() {
        let x = grid.position(idx);
        let w = match grid.dim {
            1 => axis_overlap(x[0], 0),
            _ => {
                // cell minus its intersection with the inner box
                let full = axis_full(x[0], 0) * axis_full(x[1], 1);
                let inner0 = axis_full(x[0], 0) - axis_overlap(x[0], 0);
                let inner1 = axis_full(x[1], 1) - axis_overlap(x[1], 1);
                full - inner0 * inner1
            }
        };
        if w > 0.0 {
            let tk = slice[idx].clamp(-k, k);
            total += w * tk.abs().powf(q) * tk.signum();
        }
    }
    Ok(total / eps)
}

/// Space-time test function `phi(x,t) = B(x) tau(t)` with a polynomial bump
/// `B` supported strictly inside the box and a C1 temporal profile equal to 1
/// up to `T - margin` and vanishing at `T`. Values, gradients and time
/// derivatives are exact formulas.
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    pub label: String,
    pub center: Point,
    pub radius: f64,
    pub temporal_margin: f64,
    pub horizon: f64,
    pub dim: usize,
}

pub fn bump_cutoff(
    domain: &BoxDomain,
    horizon: f64,
    label: &str,
    center: Point,
    radius: f64,
    temporal_margin: f64,
) -> Result<CutoffFunction> {
    if !(radius > 0.0) {
        return Err(Error::Parameter(format!(
            "cutoff radius must be positive (got {radius})"
        )));
    }
    if domain.boundary_distance(center) <= radius {
        return Err(Error::Parameter(format!(
            "cutoff support touches the boundary (center {:?}, radius {radius})",
            &center[..domain.dim]
        )));
    }
    if !(temporal_margin > 0.0 && temporal_margin <= horizon) {
        return Err(Error::Parameter(format!(
            "temporal margin must lie in (0, T] (got {temporal_margin})"
        )));
    }
    Ok(CutoffFunction {
        label: label.to_string(),
        center,
        radius,
        temporal_margin,
        horizon,
        dim: domain.dim,
    })
}

impl CutoffFunction {
    fn radial2(&self, x: Point) -> f64 {
        let mut r2 = 0.0;
        for a in 0..self.dim {
            r2 += (x[a] - self.center[a]) * (x[a] - self.center[a]);
        }
        r2
    }

    fn spatial(&self, x: Point) -> f64 {
        let q = 1.0 - self.radial2(x) / (self.radius * self.radius);
        if q > 0.0 {
            q * q
        } else {
            0.0
        }
    }

    fn temporal(&self, t: f64) -> f64 {
        let start = self.horizon - self.temporal_margin;
        if t <= start {
            1.0
        } else if t >= self.horizon {
            0.0
        } else {
            let s = (t - start) / self.temporal_margin;
            1.0 - s * s * (3.0 - 2.0 * s)
        }
    }

    fn temporal_derivative(&self, t: f64) -> f64 {
        let start = self.horizon - self.temporal_margin;
        if t <= start || t >= self.horizon {
            0.0
        } else {
            let s = (t - start) / self.temporal_margin;
            -6.0 * s * (1.0 - s) / self.temporal_margin
        }
    }

    pub fn value(&self, x: Point, t: f64) -> f64 {
        self.spatial(x) * self.temporal(t)
    }

    pub fn gradient(&self, x: Point, t: f64) -> [f64; 2] {
        let q = 1.0 - self.radial2(x) / (self.radius * self.radius);
        if q <= 0.0 {
            return [0.0, 0.0];
        }
        let tau = self.temporal(t);
        let scale = -4.0 * q / (self.radius * self.radius) * tau;
        let mut g = [0.0, 0.0];
        for a in 0..self.dim {
            g[a] = scale * (x[a] - self.center[a]);
        }
        g
    }

    pub fn time_derivative(&self, x: Point, t: f64) -> f64 {
        self.spatial(x) * self.temporal_derivative(t)
    }
}

/// The fixed three-bump panel used by the monitors: centered wide bump,
/// off-center bump, near-boundary bump clearing the boundary by two spacings.
pub fn cutoff_panel(grid: &Grid) -> Vec<CutoffFunction> {
    let dom = &grid.domain;
    let h = grid.spacing;
    let side = dom.side(0);
    let margin = grid.horizon / 4.0;
    let mid = |a: usize| 0.5 * (dom.min[a] + dom.max[a]);
    let center: Point = [mid(0), if grid.dim == 2 { mid(1) } else { 0.0 }];
    let mut panel = Vec::new();
    panel.push(
        bump_cutoff(
            dom,
            grid.horizon,
            "phi_center",
            center,
            0.5 * side - 2.0 * h,
            margin,
        )
        .expect("centered cutoff"),
    );
    let off: Point = [
        dom.min[0] + 0.35 * side,
        if grid.dim == 2 {
            dom.min[1] + 0.6 * side
        } else {
            0.0
        },
    ];
    panel.push(
        bump_cutoff(dom, grid.horizon, "phi_offset", off, 0.2 * side, margin)
            .expect("off-center cutoff"),
    );
    let r_edge = 0.1 * side;
    let near: Point = [
        dom.min[0] + r_edge + 2.0 * h,
        if grid.dim == 2 { mid(1) } else { 0.0 },
    ];
    panel.push(
        bump_cutoff(dom, grid.horizon, "phi_edge", near, r_edge, margin)
            .expect("near-boundary cutoff"),
    );
    panel
}
