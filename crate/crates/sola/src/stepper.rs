//! Implicit Euler marching for the level-n approximating problem. Each time
//! step freezes the state inside the singular factor and solves the
//! resulting quasilinear elliptic problem with a damped Newton iteration on
//! the regularized flux; the freeze is iterated to a fixed point exactly as
//! in the continuous construction, with convergence telemetered rather than
//! assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{flux_divergence, Grid, GridFunction};
use crate::problem::ApproximateProblem;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Fixed-point stop: L1(Omega) distance of successive iterates, relative
    /// to the box volume.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Newton stop: residual sup-norm over interior nodes.
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Initial Newton step fraction; halved until the residual decreases.
    pub damping: f64,
    /// Base magnitude regularization added to |grad|^2 in the Jacobian only;
    /// the residual always uses the exact flux.
    pub flux_regularization: f64,
    /// Accepted slices may dip this far below zero before the run errors out.
    pub nonneg_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            picard_tol: 1e-10,
            picard_max: 80,
            newton_tol: 1e-10,
            newton_max: 40,
            damping: 1.0,
            flux_regularization: 1e-10,
            nonneg_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(Error::Parameter(
                "solver tolerances must be positive".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Parameter(format!(
                "damping must lie in (0, 1] (got {})",
                self.damping
            )));
        }
        if self.flux_regularization < 0.0 || self.nonneg_tolerance < 0.0 {
            return Err(Error::Parameter(
                "regularization and nonnegativity tolerance must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepTelemetry {
    /// Number of frozen-coefficient solves performed this step.
    pub picard_iterations: usize,
    pub newton_iterations: usize,
    pub final_residual: f64,
    pub final_picard_gap: f64,
    /// Whether the extrapolated (Aitken) update had to be engaged; the plain
    /// freeze map stops contracting once the singularity is strong.
    pub accelerated: bool,
    /// Successive-iterate L1 distances, for contraction diagnostics.
    pub picard_gaps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: GridFunction,
    pub per_step: Vec<StepTelemetry>,
    pub level: u32,
    pub config: SolverConfig,
}

fn sup_norm_interior(grid: &Grid, values: &[f64]) -> f64 {
    grid.interior()
        .iter()
        .map(|&i| values[i].abs())
        .fold(0.0, f64::max)
}

fn l1_slice_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (0..grid.node_count())
        .map(|i| grid.quad_weight(i) * (a[i] - b[i]).abs())
        .sum()
}

/// Residual of the implicit step at the interior nodes:
/// `(w - prev)/dt - div a(x,t,grad w) - rhs`.
fn residual(
    grid: &Grid,
    approx: &ApproximateProblem,
    w: &[f64],
    prev: &[f64],
    rhs: &[f64],
    t: f64,
) -> Vec<f64> {
    let mut r = flux_divergence(grid, &approx.flux, approx.p, w, t);
    for &idx in grid.interior() {
        r[idx] += (w[idx] - prev[idx]) / grid.dt - rhs[idx];
    }
    r
}

/// Symmetric positive linear system for the Newton direction: diagonal plus
/// edge couplings between interior unknowns.
struct Linearization {
    diag: Vec<f64>,
    /// (rank_a, rank_b, coupling); coupling = -kappa_e / h^2.
    links: Vec<(usize, usize, f64)>,
}

fn assemble(
    grid: &Grid,
    approx: &ApproximateProblem,
    w: &[f64],
    t: f64,
    eps: f64,
) -> Linearization {
    let n_unknowns = grid.interior().len();
    let mut diag = vec![1.0 / grid.dt; n_unknowns];
    let mut links = Vec::with_capacity(grid.edge_count());
    let h2 = grid.spacing * grid.spacing;
    grid.for_each_edge(|e| {
        let g = grid.edge_gradient(w, e);
        let mid = grid.edge_midpoint(e);
        let kappa = approx
            .flux
            .axis_derivative(mid, t, g, approx.p, e.axis, eps)
            .max(0.0);
        let c = kappa / h2;
        let ra = grid.interior_rank(e.from);
        let rb = grid.interior_rank(e.to);
        if let Some(a) = ra {
            diag[a] += c;
        }
        if let Some(b) = rb {
            diag[b] += c;
        }
        if let (Some(a), Some(b)) = (ra, rb) {
            links.push((a, b, -c));
        }
    });
    Linearization { diag, links }
}

fn solve_tridiag(lin: &Linearization, b: &[f64]) -> Vec<f64> {
    // interior ranks are consecutive in 1d, so the links are (r, r+1)
    let n = b.len();
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for &(a, bb, c) in &lin.links {
        debug_assert_eq!(bb, a + 1);
        sup[a] = c;
        sub[bb] = c;
    }
    let mut diag = lin.diag.clone();
    let mut rhs = b.to_vec();
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    if n > 0 {
        x[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
        }
    }
    x
}

fn apply(lin: &Linearization, x: &[f64], y: &mut [f64]) {
    for i in 0..x.len() {
        y[i] = lin.diag[i] * x[i];
    }
    for &(a, b, c) in &lin.links {
        y[a] += c * x[b];
        y[b] += c * x[a];
    }
}

/// Jacobi-preconditioned conjugate gradients; the system is symmetric
/// positive definite by construction (positive diagonal shift 1/dt).
fn solve_cg(lin: &Linearization, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&lin.diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut ap = vec![0.0; n];
    for _ in 0..20 * n.max(50) {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= 1e-13 * bnorm {
            break;
        }
        apply(lin, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / lin.diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn max_edge_gradient(grid: &Grid, slice: &[f64]) -> f64 {
    let mut gmax: f64 = 0.0;
    grid.for_each_edge(|e| {
        gmax = gmax.max(((slice[e.to] - slice[e.from]) / grid.spacing).abs());
    });
    gmax
}

/// One implicit step with the singular factor frozen at `frozen`: solves
/// `(w - prev)/dt - div a(grad w) = h_n(frozen) f_n + mu_n` with homogeneous
/// Dirichlet boundary, to residual sup-norm `newton_tol`. On stagnation the
/// Jacobian regularization is widened twice (x100) before failing.
pub fn elliptic_step(
    grid: &Grid,
    approx: &ApproximateProblem,
    config: &SolverConfig,
    prev: &[f64],
    frozen: &[f64],
    guess: &[f64],
    t_next: f64,
    mu_slice: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let mut rhs = vec![0.0; grid.node_count()];
    for &idx in grid.interior() {
        let x = grid.position(idx);
        rhs[idx] = approx.singular_factor(frozen[idx]) * approx.truncated_source(x, t_next)
            + mu_slice[idx];
    }
    // zero data and zero state: the zero slice is the exact root (for p < 2
    // Newton would otherwise crawl toward it against the sublinear flux)
    if rhs.iter().all(|&v| v == 0.0) && prev.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; grid.node_count()], 0));
    }
    let eps_base = config.flux_regularization * (1.0 + max_edge_gradient(grid, prev));
    let mut newton_total = 0usize;
    let mut last_residual = f64::INFINITY;
    for attempt in 0..3 {
        let eps = eps_base * 100f64.powi(attempt);
        let mut w = guess.to_vec();
        for idx in 0..grid.node_count() {
            if grid.is_boundary(idx) {
                w[idx] = 0.0;
            }
        }
        for _ in 0..config.newton_max {
            let r = residual(grid, approx, &w, prev, &rhs, t_next);
            let rn = sup_norm_interior(grid, &r);
            if rn <= config.newton_tol {
                return Ok((w, newton_total));
            }
            newton_total += 1;
            let lin = assemble(grid, approx, &w, t_next, eps);
            let neg_r: Vec<f64> = grid.interior().iter().map(|&i| -r[i]).collect();
            let d = if grid.dim == 1 {
                solve_tridiag(&lin, &neg_r)
            } else {
                solve_cg(&lin, &neg_r)
            };
            let mut lambda = config.damping;
            let mut accepted = false;
            for _ in 0..40 {
                let mut trial = w.clone();
                for (rank, &idx) in grid.interior().iter().enumerate() {
                    trial[idx] += lambda * d[rank];
                }
                let rt = residual(grid, approx, &trial, prev, &rhs, t_next);
                if sup_norm_interior(grid, &rt) < rn {
                    w = trial;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // residual may have landed inside tolerance on the last accepted step
        let r = residual(grid, approx, &w, prev, &rhs, t_next);
        let rn = sup_norm_interior(grid, &r);
        if rn <= config.newton_tol {
            return Ok((w, newton_total));
        }
        last_residual = rn;
    }
    Err(Error::Solver {
        step: 0,
        detail: format!(
            "Newton stagnated after {} iterations across the regularization ladder; last residual {last_residual:.6e}",
            newton_total
        ),
    })
}

/// Iterate the frozen-coefficient map from `init` (default: the previous
/// slice) until successive iterates are `picard_tol * |Omega|`-close in
/// L1(Omega).
///
/// The plain freeze map contracts for mild singularities but turns into a
/// two-cycle once the local slope of `s -> h_n(s) f` beats the implicit
/// operator's damping (strong singularities, early steps). When the iterate
/// distances stop contracting, the update switches to a nodewise Aitken
/// extrapolation of the last three iterates, clamped to their bracket; the
/// fixed points of the map are untouched.
pub fn picard_fixed_point(
    grid: &Grid,
    approx: &ApproximateProblem,
    config: &SolverConfig,
    prev: &[f64],
    t_next: f64,
    mu_slice: &[f64],
    init: Option<&[f64]>,
) -> Result<(Vec<f64>, StepTelemetry)> {
    let volume = grid.domain.volume();
    let tol = config.picard_tol * volume;
    let mut x = init.unwrap_or(prev).to_vec();
    for idx in 0..grid.node_count() {
        if grid.is_boundary(idx) {
            x[idx] = 0.0;
        }
    }
    let mut guess = x.clone();
    let mut gaps: Vec<f64> = Vec::new();
    let mut newton_total = 0usize;
    let mut evals = 0usize;
    let mut accelerate = false;
    let mut prev_gap = f64::INFINITY;
    let finish = |w: Vec<f64>,
                  gaps: Vec<f64>,
                  evals: usize,
                  newton_total: usize,
                  accelerate: bool,
                  gap: f64|
     -> (Vec<f64>, StepTelemetry) {
        let r = residual_norm(grid, approx, config, prev, &w, t_next, mu_slice);
        (
            w,
            StepTelemetry {
                picard_iterations: evals,
                newton_iterations: newton_total,
                final_residual: r,
                final_picard_gap: gap,
                accelerated: accelerate,
                picard_gaps: gaps,
            },
        )
    };
    while evals < config.picard_max {
        let (w, nits) = elliptic_step(grid, approx, config, prev, &x, &guess, t_next, mu_slice)?;
        evals += 1;
        newton_total += nits;
        let gap = l1_slice_distance(grid, &w, &x);
        gaps.push(gap);
        if gap <= tol {
            return Ok(finish(w, gaps, evals, newton_total, accelerate, gap));
        }
        if !accelerate && evals >= 2 && gap > 0.75 * prev_gap && gap > 10.0 * tol {
            accelerate = true;
        }
        if !accelerate {
            guess = w.clone();
            x = w;
            prev_gap = gap;
            continue;
        }
        // second application of the map, then extrapolate
        let (w2, nits2) = elliptic_step(grid, approx, config, prev, &w, &w, t_next, mu_slice)?;
        evals += 1;
        newton_total += nits2;
        let gap2 = l1_slice_distance(grid, &w2, &w);
        gaps.push(gap2);
        if gap2 <= tol {
            return Ok(finish(w2, gaps, evals, newton_total, accelerate, gap2));
        }
        for idx in 0..grid.node_count() {
            if grid.is_boundary(idx) {
                x[idx] = 0.0;
                continue;
            }
            let (a, b, c) = (x[idx], w[idx], w2[idx]);
            let denom = c - 2.0 * b + a;
            let scale = a.abs() + b.abs() + c.abs() + 1e-30;
            let mut next = if denom.abs() > 1e-14 * scale {
                a - (b - a) * (b - a) / denom
            } else {
                c
            };
            let lo = a.min(b).min(c);
            let hi = a.max(b).max(c);
            next = next.clamp(lo, hi);
            x[idx] = next;
        }
        guess = w2;
        prev_gap = gap2;
    }
    let tail: Vec<f64> = gaps.iter().rev().take(2).cloned().collect();
    Err(Error::Solver {
        step: 0,
        detail: format!(
            "fixed-point iteration did not settle within {} applications of the freeze map; last two iterate distances {tail:?}",
            config.picard_max
        ),
    })
}

fn residual_norm(
    grid: &Grid,
    approx: &ApproximateProblem,
    _config: &SolverConfig,
    prev: &[f64],
    w: &[f64],
    t_next: f64,
    mu_slice: &[f64],
) -> f64 {
    let mut rhs = vec![0.0; grid.node_count()];
    for &idx in grid.interior() {
        let x = grid.position(idx);
        rhs[idx] =
            approx.singular_factor(w[idx]) * approx.truncated_source(x, t_next) + mu_slice[idx];
    }
    let r = residual(grid, approx, w, prev, &rhs, t_next);
    sup_norm_interior(grid, &r)
}

/// March the approximating problem over the whole cylinder. `warm` supplies
/// per-slice initial fixed-point states (typically the solution at a coarser
/// truncation level).
pub fn evolve(
    grid: &Grid,
    approx: &ApproximateProblem,
    config: &SolverConfig,
    warm: Option<&GridFunction>,
) -> Result<SolveResult> {
    config.validate()?;
    let mut u = GridFunction::zeros(grid);
    for idx in 0..grid.node_count() {
        // Dirichlet projection of the (truncated) initial datum
        u.slice_mut(0)[idx] = if grid.is_boundary(idx) {
            0.0
        } else {
            approx.truncated_initial(grid.position(idx))
        };
    }
    let mut per_step = Vec::with_capacity(grid.time_steps);
    for m in 0..grid.time_steps {
        let t_next = grid.time(m + 1);
        let mu_slice = approx.mollified_measure.slice(m + 1).to_vec();
        let init = warm.map(|g| g.slice(m + 1));
        let prev = u.slice(m).to_vec();
        let (w, telemetry) = picard_fixed_point(
            grid, approx, config, &prev, t_next, &mu_slice, init,
        )
        .map_err(|e| match e {
            Error::Solver { detail, .. } => Error::Solver {
                step: m + 1,
                detail,
            },
            other => other,
        })?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -config.nonneg_tolerance {
            return Err(Error::Assertion(format!(
                "nonnegativity breached at time step {}: min nodal value {min:.6e}",
                m + 1
            )));
        }
        u.slice_mut(m + 1).copy_from_slice(&w);
        per_step.push(telemetry);
    }
    Ok(SolveResult {
        solution: u,
        per_step,
        level: approx.level,
        config: *config,
    })
}
