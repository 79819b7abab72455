//! Estimate monitors: each a priori bound, boundary-condition recovery and
//! splitting argument satisfied by the approximation ladder is recomputed on
//! a finished solve and reported with an explicit verdict.
//!
//! Conventions shared by all monitors: space-time integrals use the grid's
//! right-endpoint time rule; indicator sets on nodal integrands are decided
//! nodewise, on gradient integrands by the edge-averaged state; quantified
//! parameters (k, eps, delta, the cutoff) are sampled on fixed panels that
//! are part of the study configuration.

use crate::error::{Error, Result};
use crate::grid::{boundary_strip_mass, strip_power_mass, CutoffFunction, Grid};
use crate::measures::RadonMeasure;
use crate::problem::{ApproximateProblem, Problem};
use crate::stepper::SolveResult;
use crate::truncations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Info => write!(f, "info"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub monitor: String,
    pub level: u32,
    pub params: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub verdict: Verdict,
}

impl EstimateReport {
    pub fn info_row(monitor: &str, level: u32, params: String, value: f64) -> Self {
        Self {
            monitor: monitor.into(),
            level,
            params,
            value,
            bound: None,
            verdict: Verdict::Info,
        }
    }

    fn bounded(
        monitor: &str,
        level: u32,
        params: String,
        value: f64,
        bound: f64,
        slack: f64,
    ) -> Self {
        let verdict = if value <= bound * (1.0 + slack) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            monitor: monitor.into(),
            level,
            params,
            value,
            bound: Some(bound),
            verdict,
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let filtered: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if filtered.len() < 2 {
        return None;
    }
    let n = filtered.len() as f64;
    let sx: f64 = filtered.iter().map(|p| p.0).sum();
    let sy: f64 = filtered.iter().map(|p| p.1).sum();
    let sxx: f64 = filtered.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = filtered.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Supremum over the evolved slices of the spatial L1 norm, against the
/// explicit data constant (5% slack).
pub fn linf_l1_monitor(
    grid: &Grid,
    result: &SolveResult,
    problem: &Problem,
) -> Result<EstimateReport> {
    let mut value: f64 = 0.0;
    for m in 1..=grid.time_steps {
        let abs: Vec<f64> = result.solution.slice(m).iter().map(|v| v.abs()).collect();
        value = value.max(grid.integrate_space(&abs));
    }
    let bound = crate::problem::mass_bound_constant(problem, grid)?;
    Ok(EstimateReport::bounded(
        "mass_linf_l1",
        result.level,
        String::new(),
        value,
        bound,
        0.05,
    ))
}

/// Truncation energy `sum |grad T_k(u)|^p phi^p` per ladder level plus the
/// fitted log-log slope over the active range (levels below the solution
/// maximum); the growth law requires slope <= 1.1.
pub fn truncation_energy_monitor(
    grid: &Grid,
    result: &SolveResult,
    p: f64,
    k_ladder: &[f64],
    cutoff: &CutoffFunction,
) -> Result<Vec<EstimateReport>> {
    let mut reports = Vec::new();
    let max_u = result.solution.max_evolved();
    let mut points = Vec::new();
    for &k in k_ladder {
        if !(k > 0.0) {
            return Err(Error::Parameter(
                "truncation ladder must be positive".into(),
            ));
        }
        let value = truncation_energy(grid, result, p, k, cutoff);
        reports.push(EstimateReport::info_row(
            "truncation_energy",
            result.level,
            format!("k={k};cutoff={}", cutoff.label),
            value,
        ));
        if k <= max_u && value > 0.0 {
            points.push((k, value));
        }
    }
    let slope = loglog_slope(&points);
    let (value, verdict) = match slope {
        Some(s) => (
            s,
            if s <= 1.1 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        ),
        // zero solution or truncation never active: vacuously fine
        None => (0.0, Verdict::Pass),
    };
    reports.push(EstimateReport {
        monitor: "truncation_energy_slope".into(),
        level: result.level,
        params: format!("active_points={};cutoff={}", points.len(), cutoff.label),
        value,
        bound: Some(1.1),
        verdict,
    });
    Ok(reports)
}

fn truncation_energy(
    grid: &Grid,
    result: &SolveResult,
    p: f64,
    k: f64,
    cutoff: &CutoffFunction,
) -> f64 {
    let hd = grid.spacing.powi(grid.dim as i32);
    let mut total = 0.0;
    let mut clipped = vec![0.0; grid.node_count()];
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let slice = result.solution.slice(m);
        for i in 0..grid.node_count() {
            clipped[i] = slice[i].clamp(-k, k);
        }
        let mut s = 0.0;
        grid.for_each_edge(|e| {
            let g = grid.edge_gradient(&clipped, e);
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if mag > 0.0 {
                let phi = cutoff.value(grid.edge_midpoint(e), t);
                s += mag.powf(p) * phi.powf(p);
            }
        });
        total += grid.dt * s * hd;
    }
    total
}

/// Energy caught between consecutive truncation levels:
/// `sum over {k < u < k+1} of |grad u|^p phi^p` (edge membership by the
/// averaged state). Bounded uniformly along the ladder.
pub fn strip_energy_monitor(
    grid: &Grid,
    result: &SolveResult,
    p: f64,
    k: f64,
    cutoff: &CutoffFunction,
) -> EstimateReport {
    let hd = grid.spacing.powi(grid.dim as i32);
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let slice = result.solution.slice(m);
        let mut s = 0.0;
        grid.for_each_edge(|e| {
            let avg = 0.5 * (slice[e.from] + slice[e.to]);
            if avg > k && avg < k + 1.0 {
                let g = grid.edge_gradient(slice, e);
                let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if mag > 0.0 {
                    let phi = cutoff.value(grid.edge_midpoint(e), t);
                    s += mag.powf(p) * phi.powf(p);
                }
            }
        });
        total += grid.dt * s * hd;
    }
    EstimateReport::info_row(
        "strip_energy",
        result.level,
        format!("k={k};cutoff={}", cutoff.label),
        total,
    )
}

/// Localized mass of the singular term `int h_n(u_n) f_n phi`; along the
/// ladder these values must stay bounded and become Cauchy.
pub fn singular_mass_monitor(
    grid: &Grid,
    result: &SolveResult,
    approx: &ApproximateProblem,
    cutoff: &CutoffFunction,
) -> EstimateReport {
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let slice = result.solution.slice(m);
        let mut s = 0.0;
        for idx in 0..grid.node_count() {
            let x = grid.position(idx);
            let phi = cutoff.value(x, t);
            if phi > 0.0 {
                s += grid.quad_weight(idx)
                    * approx.singular_factor(slice[idx])
                    * approx.truncated_source(x, t)
                    * phi;
            }
        }
        total += grid.dt * s;
    }
    EstimateReport::info_row(
        "singular_source_mass",
        result.level,
        format!("cutoff={}", cutoff.label),
        total,
    )
}

/// Boundary recovery: worst-slice strip means per epsilon, the
/// nonincreasing-in-epsilon verdict (5% noise) and the consistency of the
/// smallest strip with O(eps + h). For strong singularities (gamma > 1) the
/// interpolation quantity used to recover the boundary condition is reported
/// alongside.
pub fn boundary_trace_monitor(
    grid: &Grid,
    result: &SolveResult,
    k: f64,
    epsilon_ladder: &[f64],
    gamma: f64,
    p: f64,
) -> Result<Vec<EstimateReport>> {
    let mut eps_sorted: Vec<f64> = epsilon_ladder.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for &eps in &eps_sorted {
        if eps <= 2.0 * grid.spacing {
            return Err(Error::Parameter(format!(
                "strip ladder entry {eps} is unresolved by spacing {}",
                grid.spacing
            )));
        }
    }
    let mut reports = Vec::new();
    let mut worst_values = Vec::new();
    for &eps in &eps_sorted {
        let mut worst: f64 = 0.0;
        for m in 1..=grid.time_steps {
            worst = worst.max(boundary_strip_mass(grid, result.solution.slice(m), k, eps)?);
        }
        worst_values.push(worst);
        reports.push(EstimateReport::info_row(
            "boundary_trace",
            result.level,
            format!("k={k};eps={eps}"),
            worst,
        ));
        if gamma > 1.0 {
            let q = (gamma - 1.0 + p) / p;
            let mut worst_interp: f64 = 0.0;
            for m in 1..=grid.time_steps {
                let strip = strip_power_mass(grid, result.solution.slice(m), k, eps, q)?;
                let geom =
                    (grid.domain.strip_measure(eps) / eps).powf((gamma - 1.0) / (gamma - 1.0 + p));
                worst_interp = worst_interp.max(geom * strip.max(0.0).powf(p / (gamma - 1.0 + p)));
            }
            reports.push(EstimateReport::info_row(
                "boundary_trace_interpolated",
                result.level,
                format!("k={k};eps={eps}"),
                worst_interp,
            ));
        }
    }
    // nonincreasing as eps decreases, with 5% slack
    let mut monotone = true;
    for w in worst_values.windows(2) {
        if w[1] > w[0] * 1.05 + 1e-12 {
            monotone = false;
        }
    }
    // smallest strip consistent with O(eps + h), the proportionality constant
    // fitted from the coarser strips; the linear-layer model only applies to
    // mild singularities (past gamma = 1 the layer is sublinear and the
    // interpolated rows above carry the record), so there the consistency
    // check is informational and only monotonicity gates.
    let smallest = *worst_values.last().unwrap();
    let eps_small = *eps_sorted.last().unwrap();
    let mut c_trace: f64 = 0.0;
    for (i, &eps) in eps_sorted.iter().enumerate().take(eps_sorted.len() - 1) {
        c_trace = c_trace.max(worst_values[i] / (eps + grid.spacing));
    }
    let bound = c_trace * (eps_small + grid.spacing);
    let consistent = smallest <= bound * 1.05 + 1e-12;
    let gate = monotone && (gamma > 1.0 || consistent);
    reports.push(EstimateReport {
        monitor: "boundary_trace_verdict".into(),
        level: result.level,
        params: format!(
            "k={k};monotone={monotone};linear_layer_consistent={consistent};fit_constant={c_trace:.6e}"
        ),
        value: smallest,
        bound: Some(bound),
        verdict: if gate { Verdict::Pass } else { Verdict::Fail },
    });
    Ok(reports)
}

/// Gap in the distributional identity: time term + initial term + flux term
/// minus singular source and measure pairing, all by grid quadrature. The
/// measure is paired exactly (atoms evaluated pointwise), not through its
/// mollification; the data enter at the solved truncation level.
pub fn distributional_residual_monitor(
    grid: &Grid,
    result: &SolveResult,
    problem: &Problem,
    approx: &ApproximateProblem,
    cutoff: &CutoffFunction,
) -> EstimateReport {
    let hd = grid.spacing.powi(grid.dim as i32);
    let mut time_term = 0.0;
    let mut flux_term = 0.0;
    let mut source_term = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let slice = result.solution.slice(m);
        let mut st = 0.0;
        let mut ss = 0.0;
        for idx in 0..grid.node_count() {
            let x = grid.position(idx);
            st -= grid.quad_weight(idx) * slice[idx] * cutoff.time_derivative(x, t);
            let phi = cutoff.value(x, t);
            if phi > 0.0 {
                ss += grid.quad_weight(idx)
                    * approx.singular_factor(slice[idx])
                    * approx.truncated_source(x, t)
                    * phi;
            }
        }
        let mut sf = 0.0;
        grid.for_each_edge(|e| {
            let g = grid.edge_gradient(slice, e);
            let mid = grid.edge_midpoint(e);
            let a = approx.flux.eval(mid, t, g, approx.p)[e.axis];
            let dphi = cutoff.gradient(mid, t)[e.axis];
            sf += a * dphi;
        });
        time_term += grid.dt * st;
        flux_term += grid.dt * sf * hd;
        source_term += grid.dt * ss;
    }
    let mut init_term = 0.0;
    for idx in 0..grid.node_count() {
        init_term -= grid.quad_weight(idx)
            * result.solution.slice(0)[idx]
            * cutoff.value(grid.position(idx), 0.0);
    }
    let measure_term = problem.measure.pair(grid, &|x, t| cutoff.value(x, t));
    let value = (time_term + init_term + flux_term - source_term - measure_term).abs();
    EstimateReport::info_row(
        "weak_residual",
        result.level,
        format!("cutoff={}", cutoff.label),
        value,
    )
}

/// Small-state mass `A(delta) = int over {u <= delta} of h_n(u) f_n phi`
/// against the majorant obtained from the indicator-smoother test function,
/// plus the fitted decay slope (must reach 0.8/p').
pub fn delta_split_monitor(
    grid: &Grid,
    result: &SolveResult,
    approx: &ApproximateProblem,
    delta_ladder: &[f64],
    cutoff: &CutoffFunction,
) -> Result<Vec<EstimateReport>> {
    let p = approx.p;
    let hd = grid.spacing.powi(grid.dim as i32);
    for w in delta_ladder.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Parameter(
                "delta ladder must be strictly decreasing".into(),
            ));
        }
    }
    let mut reports = Vec::new();
    let mut points = Vec::new();
    for &delta_raw in delta_ladder {
        if !(delta_raw > 0.0) {
            return Err(Error::Parameter("delta ladder must be positive".into()));
        }
        // nudge delta off nodal plateaus so the level set is unambiguous
        let mut delta = delta_raw;
        for _ in 0..100 {
            let mut clean = true;
            for m in 1..=grid.time_steps {
                for &v in result.solution.slice(m) {
                    if (v - delta).abs() <= 1e-12 * delta.max(1.0) {
                        clean = false;
                        break;
                    }
                }
                if !clean {
                    break;
                }
            }
            if clean {
                break;
            }
            delta *= 1.0 + 1e-9;
        }
        let mut small_mass = 0.0;
        let mut primitive_term = 0.0;
        let mut gradient_term = 0.0;
        for m in 1..=grid.time_steps {
            let t = grid.time(m);
            let slice = result.solution.slice(m);
            let mut sm = 0.0;
            let mut pt = 0.0;
            for idx in 0..grid.node_count() {
                let x = grid.position(idx);
                let phi = cutoff.value(x, t);
                let state = slice[idx];
                if state <= delta && phi > 0.0 {
                    sm += grid.quad_weight(idx)
                        * approx.singular_factor(state)
                        * approx.truncated_source(x, t)
                        * phi;
                }
                pt -= grid.quad_weight(idx)
                    * truncations::vee_primitive(delta, state.max(0.0))?
                    * cutoff.time_derivative(x, t);
            }
            let mut gt = 0.0;
            grid.for_each_edge(|e| {
                let avg = 0.5 * (slice[e.from] + slice[e.to]);
                let vee = match truncations::vee(delta, avg) {
                    Ok(v) => v,
                    Err(_) => 0.0,
                };
                if vee > 0.0 {
                    let g = grid.edge_gradient(slice, e);
                    let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
                    if mag > 0.0 {
                        let dphi = cutoff.gradient(grid.edge_midpoint(e), t);
                        let dphi_mag = (dphi[0] * dphi[0] + dphi[1] * dphi[1]).sqrt();
                        gt += mag.powf(p - 1.0) * dphi_mag * vee;
                    }
                }
            });
            small_mass += grid.dt * sm;
            primitive_term += grid.dt * pt;
            gradient_term += grid.dt * gt * hd;
        }
        let majorant = primitive_term + gradient_term;
        reports.push(EstimateReport::bounded(
            "delta_split",
            result.level,
            format!("delta={delta_raw};cutoff={}", cutoff.label),
            small_mass,
            majorant,
            0.05,
        ));
        if small_mass > 0.0 {
            points.push((delta_raw, small_mass));
        }
    }
    let p_conj = p / (p - 1.0);
    let threshold = 0.8 / p_conj;
    let slope = loglog_slope(&points);
    let (value, verdict) = match slope {
        Some(s) => (
            s,
            if s >= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        ),
        None => (0.0, Verdict::Pass), // no singular mass anywhere: nothing to decay
    };
    reports.push(EstimateReport {
        monitor: "delta_split_slope".into(),
        level: result.level,
        params: format!("min_slope={threshold:.4};cutoff={}", cutoff.label),
        value,
        bound: Some(threshold),
        verdict,
    });
    Ok(reports)
}

#[derive(Debug, Clone, Copy)]
pub enum EnergyMode {
    /// Localized energy with exponent `q`; only meaningful inside the window
    /// `q < p - N/(N+1)`.
    LocalQ(f64),
    /// Global gradient energy with the natural exponent `p` (no cutoff).
    GlobalP,
}

/// Gradient energy `sum |grad u|^r (phi^r)` with `r = q` (localized) or
/// `r = p` (global). Boundedness along the ladder is judged by the studies.
pub fn gradient_energy_monitor(
    grid: &Grid,
    result: &SolveResult,
    p: f64,
    mode: EnergyMode,
    cutoff: Option<&CutoffFunction>,
) -> Result<EstimateReport> {
    let (r, params) = match mode {
        EnergyMode::LocalQ(q) => {
            let n = grid.dim as f64;
            let window = p - n / (n + 1.0);
            if !(q < window) {
                return Err(Error::Hypothesis(format!(
                    "localized exponent q={q} is outside the window q < p - N/(N+1) = {window:.4} for N={n}"
                )));
            }
            if cutoff.is_none() {
                return Err(Error::Parameter("localized energy needs a cutoff".into()));
            }
            (q, format!("mode=q;q={q};cutoff={}", cutoff.unwrap().label))
        }
        EnergyMode::GlobalP => (p, "mode=p".into()),
    };
    let hd = grid.spacing.powi(grid.dim as i32);
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let slice = result.solution.slice(m);
        let mut s = 0.0;
        grid.for_each_edge(|e| {
            let g = grid.edge_gradient(slice, e);
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if mag > 0.0 {
                let w = match cutoff {
                    Some(phi) if matches!(mode, EnergyMode::LocalQ(_)) => {
                        phi.value(grid.edge_midpoint(e), t).powf(r)
                    }
                    _ => 1.0,
                };
                s += mag.powf(r) * w;
            }
        });
        total += grid.dt * s * hd;
    }
    Ok(EstimateReport::info_row(
        "gradient_energy",
        result.level,
        params,
        total,
    ))
}

/// L1 flux distance between two solves, localized by a cutoff: the
/// observable shadow of the gradient-compactness step.
pub fn flux_cauchy_gap(
    grid: &Grid,
    coarse: &SolveResult,
    fine: &SolveResult,
    p: f64,
    flux: &crate::problem::Flux,
    cutoff: &CutoffFunction,
) -> f64 {
    let hd = grid.spacing.powi(grid.dim as i32);
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let a_slice = coarse.solution.slice(m);
        let b_slice = fine.solution.slice(m);
        let mut s = 0.0;
        grid.for_each_edge(|e| {
            let mid = grid.edge_midpoint(e);
            let phi = cutoff.value(mid, t);
            if phi > 0.0 {
                let fa = flux.eval(mid, t, grid.edge_gradient(a_slice, e), p);
                let fb = flux.eval(mid, t, grid.edge_gradient(b_slice, e), p);
                let d0 = fa[0] - fb[0];
                let d1 = fa[1] - fb[1];
                s += (d0 * d0 + d1 * d1).sqrt() * phi;
            }
        });
        total += grid.dt * s * hd;
    }
    total
}

/// `(1/T) int T~_{k,1}(|v - w|)`: vanishes exactly when the two fields agree
/// on the grid, and controls every truncation of the difference.
pub fn uniqueness_functional(
    grid: &Grid,
    v: &crate::grid::GridFunction,
    w: &crate::grid::GridFunction,
    k: f64,
) -> Result<f64> {
    if v.node_count != w.node_count || v.slices != w.slices {
        return Err(Error::Parameter(
            "uniqueness functional needs matching grids".into(),
        ));
    }
    if !(k > 0.0) {
        return Err(Error::Parameter(format!(
            "level k must be positive (got {k})"
        )));
    }
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let a = v.slice(m);
        let b = w.slice(m);
        let mut s = 0.0;
        for idx in 0..grid.node_count() {
            s += grid.quad_weight(idx)
                * truncations::truncation_primitive(k, 1.0, (a[idx] - b[idx]).abs())?;
        }
        total += grid.dt * s;
    }
    Ok(total / grid.horizon)
}

/// Run the complete monitor suite for one rung over a cutoff panel.
#[allow(clippy::too_many_arguments)]
pub fn full_monitor_suite(
    grid: &Grid,
    result: &SolveResult,
    problem: &Problem,
    approx: &ApproximateProblem,
    panel: &[CutoffFunction],
    k_ladder: &[f64],
    epsilon_ladder: &[f64],
    delta_ladder: &[f64],
) -> Result<Vec<EstimateReport>> {
    let mut rows = Vec::new();
    rows.push(linf_l1_monitor(grid, result, problem)?);
    for phi in panel {
        rows.extend(truncation_energy_monitor(
            grid, result, problem.p, k_ladder, phi,
        )?);
        rows.push(strip_energy_monitor(grid, result, problem.p, 1.0, phi));
        rows.push(singular_mass_monitor(grid, result, approx, phi));
        rows.push(distributional_residual_monitor(
            grid, result, problem, approx, phi,
        ));
        rows.extend(delta_split_monitor(
            grid,
            result,
            approx,
            delta_ladder,
            phi,
        )?);
    }
    rows.extend(boundary_trace_monitor(
        grid,
        result,
        1.0,
        epsilon_ladder,
        problem.singularity.gamma,
        problem.p,
    )?);
    rows.push(gradient_energy_monitor(
        grid,
        result,
        problem.p,
        EnergyMode::GlobalP,
        None,
    )?);
    // the localized small-exponent energy only applies inside the window
    let n = grid.dim as f64;
    let window = problem.p - n / (n + 1.0);
    if window > 1.0 {
        let q = 0.5 * (1.0 + window);
        rows.push(gradient_energy_monitor(
            grid,
            result,
            problem.p,
            EnergyMode::LocalQ(q),
            panel.first(),
        )?);
    } else {
        rows.push(EstimateReport::info_row(
            "gradient_energy",
            result.level,
            "mode=q;hypotheses_unmet=exponent_window_empty".into(),
            f64::NAN,
        ));
    }
    Ok(rows)
}

/// Radon measure paired against a cutoff; thin wrapper used by studies.
pub fn pair_measure(grid: &Grid, mu: &RadonMeasure, cutoff: &CutoffFunction) -> f64 {
    mu.pair(grid, &|x, t| cutoff.value(x, t))
}
