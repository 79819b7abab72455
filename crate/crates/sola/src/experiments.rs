//! Runnable studies over the approximation ladder: convergence of the rungs,
//! two-path uniqueness, the regularizing effect of the decay of the
//! zero-order factor, the substitution cross-check, and manufactured-solution
//! verification. Each study emits monitor rows, CSV/JSON artifacts and a
//! verdict; hypothesis gates refuse with a dedicated error class.

use std::path::PathBuf;
use std::time::Instant;

use serde_json::json;

use crate::error::{Error, Result};
use crate::estimates::{
    self, flux_cauchy_gap, gradient_energy_monitor, EnergyMode, EstimateReport, Verdict,
};
use crate::fields::ScalarField;
use crate::grid::{build_grid, cutoff_panel, BoxDomain, Grid, GridFunction};
use crate::measures::RadonMeasure;
use crate::problem::{
    build_approximation, classify_source_regularity, validate_singularity, validate_structure,
    Flux, Problem, SingularityProfile,
};
use crate::report;
use crate::stepper::{evolve, SolveResult, SolverConfig};

#[derive(Debug, Clone)]
pub struct Panels {
    pub k_ladder: Vec<f64>,
    pub epsilon_ladder: Vec<f64>,
    pub delta_ladder: Vec<f64>,
}

impl Default for Panels {
    fn default() -> Self {
        Self {
            k_ladder: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            epsilon_ladder: vec![0.2, 0.1, 0.05],
            delta_ladder: vec![0.08, 0.04, 0.02, 0.01],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Study {
    pub problem: Problem,
    pub grid: Grid,
    pub n_ladder: Vec<u32>,
    pub solver: SolverConfig,
    pub panels: Panels,
    pub width_base: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Study {
    pub fn new(problem: Problem, grid: Grid) -> Self {
        let width_base = crate::problem::default_width_base(&problem.domain, problem.horizon);
        Self {
            problem,
            grid,
            n_ladder: vec![4, 16, 64, 256],
            solver: SolverConfig::default(),
            panels: Panels::default(),
            width_base,
            seed: 0,
            out: None,
        }
    }

    fn check_ladder(&self) -> Result<()> {
        if self.n_ladder.is_empty() {
            return Err(Error::Config("the level ladder must be nonempty".into()));
        }
        for w in self.n_ladder.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "the level ladder must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

fn write_study_outputs(
    study: &Study,
    rows: &[EstimateReport],
    solutions: &[(u32, &GridFunction)],
    summary: &serde_json::Value,
) -> Result<()> {
    if let Some(dir) = &study.out {
        report::ensure_dir(dir)?;
        report::write_monitor_csv(&dir.join("monitors.csv"), rows)?;
        report::write_json(&dir.join("summary.json"), summary)?;
        let fields = dir.join("fields");
        report::ensure_dir(&fields)?;
        for (level, gf) in solutions {
            report::write_field_csv(&fields.join(format!("u_n{level}.csv")), &study.grid, gf)?;
        }
    }
    Ok(())
}

fn telemetry_summary(res: &SolveResult) -> serde_json::Value {
    let max_picard = res
        .per_step
        .iter()
        .map(|t| t.picard_iterations)
        .max()
        .unwrap_or(0);
    let total_newton: usize = res.per_step.iter().map(|t| t.newton_iterations).sum();
    let accelerated_steps = res.per_step.iter().filter(|t| t.accelerated).count();
    json!({
        "level": res.level,
        "max_picard_iterations": max_picard,
        "total_newton_iterations": total_newton,
        "accelerated_steps": accelerated_steps,
    })
}

/// Discretization metadata attached to every study summary (the monitor CSV
/// keeps its fixed six columns).
fn grid_summary(grid: &Grid) -> serde_json::Value {
    json!({
        "dim": grid.dim,
        "nodes_per_axis": grid.nodes_per_axis,
        "time_steps": grid.time_steps,
        "spacing": grid.spacing,
        "dt": grid.dt,
        "horizon": grid.horizon,
    })
}

#[derive(Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<EstimateReport>,
    pub levels: Vec<u32>,
    pub gaps: Vec<f64>,
    pub relative_final_gap: f64,
    pub strictly_decreasing: bool,
    pub pass: bool,
    pub solutions: Vec<SolveResult>,
}

/// Solve every rung of the ladder (warm-starting each level from the
/// previous one), difference consecutive rungs in L1(Q), and run the whole
/// monitor suite per rung. The last rung is declared the reference solution.
pub fn run_convergence_study(study: &Study) -> Result<ConvergenceReport> {
    study.check_ladder()?;
    let started = Instant::now();
    validate_structure(
        &study.problem.flux,
        study.problem.p,
        &study.problem.domain,
        study.problem.horizon,
        200,
        study.seed,
    )?;
    let grid = &study.grid;
    let panel = cutoff_panel(grid);
    let mut rows = Vec::new();
    let mut solutions: Vec<SolveResult> = Vec::new();
    let mut gaps = Vec::new();
    for &n in &study.n_ladder {
        let approx = build_approximation(&study.problem, n, grid, study.width_base)?;
        let warm = solutions.last().map(|r| &r.solution);
        let res = evolve(grid, &approx, &study.solver, warm)?;
        rows.extend(estimates::full_monitor_suite(
            grid,
            &res,
            &study.problem,
            &approx,
            &panel,
            &study.panels.k_ladder,
            &study.panels.epsilon_ladder,
            &study.panels.delta_ladder,
        )?);
        if let Some(prev) = solutions.last() {
            let gap = res.solution.l1_distance(&prev.solution, grid);
            rows.push(EstimateReport {
                monitor: "ladder_l1_gap".into(),
                level: n,
                params: format!("against={}", prev.level),
                value: gap,
                bound: None,
                verdict: Verdict::Info,
            });
            rows.push(EstimateReport {
                monitor: "flux_cauchy_gap".into(),
                level: n,
                params: format!("against={};cutoff={}", prev.level, panel[0].label),
                value: flux_cauchy_gap(
                    grid,
                    prev,
                    &res,
                    study.problem.p,
                    &study.problem.flux,
                    &panel[0],
                ),
                bound: None,
                verdict: Verdict::Info,
            });
            gaps.push(gap);
        }
        solutions.push(res);
    }
    let reference = solutions.last().expect("nonempty ladder");
    let ref_norm = reference.solution.l1_norm(grid).max(1e-300);
    let relative_final_gap = gaps.last().map(|g| g / ref_norm).unwrap_or(0.0);
    let strictly_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = strictly_decreasing
        && relative_final_gap <= 1e-3
        && rows.iter().all(|r| r.verdict != Verdict::Fail);
    rows.push(EstimateReport {
        monitor: "ladder_convergence".into(),
        level: reference.level,
        params: format!("strictly_decreasing={strictly_decreasing}"),
        value: relative_final_gap,
        bound: Some(1e-3),
        verdict: if strictly_decreasing && relative_final_gap <= 1e-3 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });
    let summary = json!({
        "study": "converge",
        "grid": grid_summary(&study.grid),
        "levels": study.n_ladder,
        "l1_gaps": gaps,
        "relative_final_gap": relative_final_gap,
        "strictly_decreasing": strictly_decreasing,
        "reference_level": reference.level,
        "telemetry": solutions.iter().map(telemetry_summary).collect::<Vec<_>>(),
        "pass": pass,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    let fields: Vec<(u32, &GridFunction)> =
        solutions.iter().map(|r| (r.level, &r.solution)).collect();
    write_study_outputs(study, &rows, &fields, &summary)?;
    Ok(ConvergenceReport {
        rows,
        levels: study.n_ladder.clone(),
        gaps,
        relative_final_gap,
        strictly_decreasing,
        pass,
        solutions,
    })
}

#[derive(Debug)]
pub struct UniquenessReport {
    pub rows: Vec<EstimateReport>,
    pub l1_gap_relative: f64,
    pub functional_unit: f64,
    pub functional_peak: f64,
    pub energy_direct: f64,
    pub energy_ladder: f64,
    pub pass: bool,
}

/// Produce two candidate solutions of the same homogeneous problem along
/// different computational paths (direct cold solve at the top level vs a
/// warm-started ladder) and verify they coincide: the discrete shadow of
/// finite-energy uniqueness for a nonincreasing factor.
pub fn run_uniqueness_test(study: &Study) -> Result<UniquenessReport> {
    study.check_ladder()?;
    let started = Instant::now();
    let problem = &study.problem;
    if !problem.measure.is_zero() {
        return Err(Error::Hypothesis(
            "uniqueness test requires a homogeneous problem (zero measure)".into(),
        ));
    }
    if !problem.singularity.nonincreasing {
        return Err(Error::Hypothesis(
            "uniqueness requires a nonincreasing zero-order factor".into(),
        ));
    }
    validate_singularity(&problem.singularity, 300, 50.0)?;
    if problem.singularity.gamma > 1.0 {
        return Err(Error::Hypothesis(format!(
            "finite-energy certificate needs gamma <= 1 (got {})",
            problem.singularity.gamma
        )));
    }
    let theta = problem.singularity.theta.ok_or_else(|| {
        Error::Hypothesis("uniqueness test needs the decay exponent theta declared".into())
    })?;
    let class = classify_source_regularity(problem, theta, &study.grid)?;
    if theta < 1.0 && !class.finite_energy_eligible() {
        return Err(Error::Hypothesis(format!(
            "source not certified for the finite-energy class at theta={theta}"
        )));
    }
    let grid = &study.grid;
    let n_top = *study.n_ladder.last().unwrap();

    // path A: direct cold solve at the top level
    let approx_top = build_approximation(problem, n_top, grid, study.width_base)?;
    let direct = evolve(grid, &approx_top, &study.solver, None)?;

    // path B: ladder interleaving, each rung warm-started from the previous
    let mut ladder_solution: Option<SolveResult> = None;
    for &n in &study.n_ladder {
        let approx = build_approximation(problem, n, grid, study.width_base)?;
        let warm = ladder_solution.as_ref().map(|r| &r.solution);
        ladder_solution = Some(evolve(grid, &approx, &study.solver, warm)?);
    }
    let ladder = ladder_solution.unwrap();

    let l1_gap = direct.solution.l1_distance(&ladder.solution, grid);
    let ref_norm = direct.solution.l1_norm(grid).max(1e-300);
    let l1_gap_relative = l1_gap / ref_norm;
    let peak = direct.solution.max_evolved().max(1.0);
    let functional_unit =
        estimates::uniqueness_functional(grid, &direct.solution, &ladder.solution, 1.0)?;
    let functional_peak =
        estimates::uniqueness_functional(grid, &direct.solution, &ladder.solution, peak)?;
    let energy_direct =
        gradient_energy_monitor(grid, &direct, problem.p, EnergyMode::GlobalP, None)?.value;
    let energy_ladder =
        gradient_energy_monitor(grid, &ladder, problem.p, EnergyMode::GlobalP, None)?.value;
    let pass = functional_unit <= 1e-10 && functional_peak <= 1e-10 && l1_gap_relative <= 1e-8;

    let mut rows = vec![
        EstimateReport {
            monitor: "uniqueness_functional".into(),
            level: n_top,
            params: "k=1".into(),
            value: functional_unit,
            bound: Some(1e-10),
            verdict: if functional_unit <= 1e-10 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        },
        EstimateReport {
            monitor: "uniqueness_functional".into(),
            level: n_top,
            params: format!("k={peak}"),
            value: functional_peak,
            bound: Some(1e-10),
            verdict: if functional_peak <= 1e-10 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        },
        EstimateReport {
            monitor: "uniqueness_l1_gap".into(),
            level: n_top,
            params: "relative".into(),
            value: l1_gap_relative,
            bound: Some(1e-8),
            verdict: if l1_gap_relative <= 1e-8 {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        },
        EstimateReport::info_row(
            "finite_energy_certificate",
            n_top,
            "path=direct".into(),
            energy_direct,
        ),
        EstimateReport::info_row(
            "finite_energy_certificate",
            n_top,
            "path=ladder".into(),
            energy_ladder,
        ),
    ];
    rows.push(EstimateReport::info_row(
        "source_class_norm",
        n_top,
        format!("theta={theta}"),
        class.norm(),
    ));
    let summary = json!({
        "study": "uniqueness",
        "grid": grid_summary(&study.grid),
        "note": "two-path agreement certifies uniqueness of the discrete fixed point along both computational paths; it is evidence for, not proof of, the continuous statement",
        "l1_gap_relative": l1_gap_relative,
        "functional_unit": functional_unit,
        "functional_peak": functional_peak,
        "energy_direct": energy_direct,
        "energy_ladder": energy_ladder,
        "pass": pass,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    write_study_outputs(
        study,
        &rows,
        &[
            (direct.level, &direct.solution),
            (ladder.level, &ladder.solution),
        ],
        &summary,
    )?;
    Ok(UniquenessReport {
        rows,
        l1_gap_relative,
        functional_unit,
        functional_peak,
        energy_direct,
        energy_ladder,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct RegularityCase {
    pub label: String,
    pub problem: Problem,
    /// Control cases document the contrast (energy expected to grow).
    pub control: bool,
}

#[derive(Debug)]
pub struct RegularityCaseOutcome {
    pub label: String,
    pub energies: Vec<f64>,
    pub upper_ratio: f64,
    pub control: bool,
    pub pass: bool,
}

#[derive(Debug)]
pub struct RegularityReport {
    pub rows: Vec<EstimateReport>,
    pub cases: Vec<RegularityCaseOutcome>,
    pub pass: bool,
}

/// Global gradient-energy ladders per decay case: bounded energies certify
/// the regularizing effect; the control case (no decay, barely integrable
/// source) documents the contrast by growing.
pub fn run_regularity_study(study: &Study, cases: &[RegularityCase]) -> Result<RegularityReport> {
    study.check_ladder()?;
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for case in cases {
        let problem = &case.problem;
        if !problem.measure.is_zero() {
            return Err(Error::Hypothesis(format!(
                "case {}: the regularity study needs a homogeneous problem",
                case.label
            )));
        }
        if !case.control {
            if problem.singularity.gamma > 1.0 {
                return Err(Error::Hypothesis(format!(
                    "case {}: the energy estimate needs gamma <= 1",
                    case.label
                )));
            }
            let theta = problem.singularity.theta.ok_or_else(|| {
                Error::Hypothesis(format!(
                    "case {}: decay exponent theta undeclared",
                    case.label
                ))
            })?;
            let class = classify_source_regularity(problem, theta, &study.grid)?;
            if theta < 1.0 && !class.finite_energy_eligible() {
                return Err(Error::Hypothesis(format!(
                    "case {}: source fails the mixed-norm class at theta={theta}",
                    case.label
                )));
            }
            rows.push(EstimateReport::info_row(
                "source_class_norm",
                0,
                format!("case={};theta={theta}", case.label),
                class.norm(),
            ));
        }
        let mut energies = Vec::new();
        let mut prev: Option<SolveResult> = None;
        for &n in &study.n_ladder {
            let approx = build_approximation(problem, n, &study.grid, study.width_base)?;
            let res = evolve(
                &study.grid,
                &approx,
                &study.solver,
                prev.as_ref().map(|r| &r.solution),
            )?;
            let energy =
                gradient_energy_monitor(&study.grid, &res, problem.p, EnergyMode::GlobalP, None)?
                    .value;
            rows.push(EstimateReport::info_row(
                "gradient_energy",
                n,
                format!("case={};mode=p", case.label),
                energy,
            ));
            energies.push(energy);
            prev = Some(res);
        }
        // boundedness judged on the upper ladder (all rungs past the first)
        let upper = &energies[1.min(energies.len() - 1)..];
        let max = upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = upper.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper_ratio = if min > 0.0 {
            max / min
        } else if max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        let pass = if case.control {
            // growth is the expected (informational) outcome
            energies.last().unwrap() > &(energies.first().unwrap() * 1.25)
        } else {
            upper_ratio <= 1.25
        };
        rows.push(EstimateReport {
            monitor: "energy_ladder_ratio".into(),
            level: *study.n_ladder.last().unwrap(),
            params: format!("case={};control={}", case.label, case.control),
            value: upper_ratio,
            bound: if case.control { None } else { Some(1.25) },
            verdict: if case.control {
                Verdict::Info
            } else if pass {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        });
        outcomes.push(RegularityCaseOutcome {
            label: case.label.clone(),
            energies,
            upper_ratio,
            control: case.control,
            pass,
        });
    }
    let pass = outcomes.iter().all(|c| c.pass);
    let summary = json!({
        "study": "regularity",
        "grid": grid_summary(&study.grid),
        "cases": outcomes.iter().map(|c| json!({
            "label": c.label,
            "energies": c.energies,
            "upper_ratio": c.upper_ratio,
            "control": c.control,
            "pass": c.pass,
        })).collect::<Vec<_>>(),
        "pass": pass,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    write_study_outputs(study, &rows, &[], &summary)?;
    Ok(RegularityReport {
        rows,
        cases: outcomes,
        pass,
    })
}

#[derive(Debug)]
pub struct ExampleOutcome {
    pub gamma: f64,
    pub level: u32,
    pub relative_gap: f64,
    pub pass: bool,
}

#[derive(Debug)]
pub struct ExampleReport {
    pub rows: Vec<EstimateReport>,
    pub outcomes: Vec<ExampleOutcome>,
    pub pass: bool,
}

/// Substitution cross-check: solve the linear problem once, rebuild its
/// source as `g = f u^gamma`, then run the singular pipeline on `g/u^gamma`
/// data. Both are fixed points of the same discrete system once the
/// truncation level clears the factor's range on the linear solution, so the
/// two answers must coincide at matched discretization.
pub fn run_example_crosscheck(study: &Study, gammas: &[f64]) -> Result<ExampleReport> {
    let started = Instant::now();
    let problem = &study.problem;
    if (problem.p - 2.0).abs() > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "the substitution cross-check runs at p = 2 (got {})",
            problem.p
        )));
    }
    if !matches!(problem.flux, Flux::PLaplacian) {
        return Err(Error::Hypothesis(
            "the cross-check needs the plain gradient flux".into(),
        ));
    }
    if !problem.measure.is_zero() {
        return Err(Error::Hypothesis(
            "the cross-check is homogeneous (zero measure)".into(),
        ));
    }
    let grid = &study.grid;

    // step 1: the linear solve (bounded unit factor)
    let linear = Problem::new(
        problem.domain,
        problem.horizon,
        problem.p,
        problem.flux.clone(),
        SingularityProfile::constant(1.0),
        problem.source.clone(),
        problem.initial.clone(),
        RadonMeasure::zero(),
    )?;
    let n_linear = *study.n_ladder.last().unwrap();
    let approx_linear = build_approximation(&linear, n_linear, grid, study.width_base)?;
    let base = evolve(grid, &approx_linear, &study.solver, None)?;

    // interior positivity gate for the division
    let mut min_interior = f64::INFINITY;
    let mut witness = 0usize;
    for m in 1..=grid.time_steps {
        let slice = base.solution.slice(m);
        for &idx in grid.interior() {
            if slice[idx] < min_interior {
                min_interior = slice[idx];
                witness = idx;
            }
        }
    }
    if min_interior <= 1e-8 {
        return Err(Error::Hypothesis(format!(
            "linear solution not strictly positive in the interior (min {min_interior:.3e} at node {witness}); cannot build the substituted source"
        )));
    }

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &gamma in gammas {
        if gamma > 1.0 {
            // past gamma = 1 the substitution needs the source in
            // L^2(0,T; L^{(2*/gamma)'}), and the Sobolev conjugate 2* only
            // exists for N > 2: on the line and planar grids this run
            // supports, the stronger class is undefined, so the variant is
            // refused rather than reported uncertified
            return Err(Error::Hypothesis(format!(
                "cross-check at gamma = {gamma} > 1 needs the stronger source class \
                 L^2(0,T; L^(2*/gamma)'), undefined at p = 2 in dimension {} (requires p < N)",
                problem.domain.dim
            )));
        }
        // step 2: g = f * u^gamma on the grid
        let mut g_data = Vec::with_capacity(grid.node_count() * (grid.time_steps + 1));
        for m in 0..=grid.time_steps {
            let t = grid.time(m);
            let slice = base.solution.slice(m);
            for idx in 0..grid.node_count() {
                let x = grid.position(idx);
                let f = problem.source.value(&problem.domain, x, t).max(0.0);
                g_data.push(f * slice[idx].max(0.0).powf(gamma));
            }
        }
        let g_field = ScalarField::from_samples(grid, g_data);

        // step 3: singular pipeline at a level that clears the factor range
        let needed = (4.0 * min_interior.powf(-gamma)).max(4.0);
        let mut level: u32 = 4;
        while (level as f64) < needed && level < 1 << 24 {
            level *= 2;
        }
        let singular = Problem::new(
            problem.domain,
            problem.horizon,
            problem.p,
            problem.flux.clone(),
            SingularityProfile::inverse_power(gamma.max(1e-9)),
            g_field,
            problem.initial.clone(),
            RadonMeasure::zero(),
        )?;
        // cold start: the singular pipeline must reproduce the linear
        // solution on its own, not merely accept it as an initial state
        let approx = build_approximation(&singular, level, grid, study.width_base)?;
        let singular_run = evolve(grid, &approx, &study.solver, None)?;
        let gap = singular_run.solution.l1_distance(&base.solution, grid);
        let rel = gap / base.solution.l1_norm(grid).max(1e-300);
        let pass = rel <= 1e-6;
        rows.push(EstimateReport {
            monitor: "crosscheck_l1_gap".into(),
            level,
            params: format!("gamma={gamma}"),
            value: rel,
            bound: Some(1e-6),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        });
        outcomes.push(ExampleOutcome {
            gamma,
            level,
            relative_gap: rel,
            pass,
        });
    }
    let pass = outcomes.iter().all(|o| o.pass);
    let summary = json!({
        "study": "example",
        "grid": grid_summary(&study.grid),
        "outcomes": outcomes.iter().map(|o| json!({
            "gamma": o.gamma,
            "level": o.level,
            "relative_gap": o.relative_gap,
            "pass": o.pass,
        })).collect::<Vec<_>>(),
        "min_interior_linear": min_interior,
        "pass": pass,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    write_study_outputs(study, &rows, &[(base.level, &base.solution)], &summary)?;
    Ok(ExampleReport {
        rows,
        outcomes,
        pass,
    })
}

#[derive(Debug)]
pub struct ManufacturedReport {
    pub rows: Vec<EstimateReport>,
    pub spatial_errors: Vec<(f64, f64)>,
    pub temporal_errors: Vec<(f64, f64)>,
    pub spatial_order: f64,
    pub temporal_order: f64,
    pub planar_error: Option<f64>,
    pub pass: bool,
}

fn heat_oracle_error(domain: BoxDomain, nodes: usize, steps: usize, horizon: f64) -> Result<f64> {
    let grid = build_grid(domain, nodes, steps, horizon)?;
    let problem = Problem::new(
        domain,
        horizon,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::constant(1.0),
        ScalarField::Zero,
        ScalarField::SineProduct,
        RadonMeasure::zero(),
    )?;
    let approx = build_approximation(&problem, 4, &grid, 1.0)?;
    let res = evolve(&grid, &approx, &SolverConfig::default(), None)?;
    let side = domain.side(0);
    let rate = (std::f64::consts::PI / side).powi(2) * domain.dim as f64;
    let decay = (-rate * horizon).exp();
    let mut err2 = 0.0;
    let last = res.solution.slice(grid.time_steps);
    for idx in 0..grid.node_count() {
        let x = grid.position(idx);
        let mut exact = decay;
        for a in 0..domain.dim {
            exact *= (std::f64::consts::PI * (x[a] - domain.min[a]) / side).sin();
        }
        err2 += grid.quad_weight(idx) * (last[idx] - exact) * (last[idx] - exact);
    }
    Ok(err2.sqrt())
}

/// Refinement ladders against the separable heat oracle: spatial order with
/// time steps tied to the square of the spacing, temporal order on a fine
/// fixed mesh. One planar rung sanity-checks the 2d assembly.
pub fn run_manufactured(study: &Study) -> Result<ManufacturedReport> {
    let started = Instant::now();
    let problem = &study.problem;
    if (problem.p - 2.0).abs() > 1e-12 {
        return Err(Error::Hypothesis(
            "manufactured verification runs at p = 2".into(),
        ));
    }
    if problem.singularity.singular_at_zero {
        return Err(Error::Hypothesis(
            "manufactured verification needs a bounded unit factor".into(),
        ));
    }
    if !problem.measure.is_zero() || !problem.source.is_zero() {
        return Err(Error::Hypothesis(
            "manufactured verification runs the pure decay case".into(),
        ));
    }
    let horizon = problem.horizon;
    let dom1 = BoxDomain::interval(problem.domain.min[0], problem.domain.max[0])?;
    let mut rows = Vec::new();

    let mut spatial = Vec::new();
    for (nodes, steps) in [(17usize, 64usize), (33, 256), (65, 1024)] {
        let scaled = (steps as f64 * horizon).ceil().max(4.0) as usize;
        let err = heat_oracle_error(dom1, nodes, scaled, horizon)?;
        let h = dom1.side(0) / (nodes - 1) as f64;
        spatial.push((h, err));
        rows.push(EstimateReport::info_row(
            "manufactured_error",
            0,
            format!("ladder=spatial;nodes={nodes};steps={scaled}"),
            err,
        ));
    }
    let spatial_order = -slope_ln(&spatial);

    let mut temporal = Vec::new();
    for steps in [4usize, 8, 16, 32] {
        let err = heat_oracle_error(dom1, 257, steps, horizon)?;
        temporal.push((horizon / steps as f64, err));
        rows.push(EstimateReport::info_row(
            "manufactured_error",
            0,
            format!("ladder=temporal;nodes=257;steps={steps}"),
            err,
        ));
    }
    let temporal_order = -slope_ln(&temporal);

    let planar_error = if study.grid.dim <= 2 {
        let dom2 = BoxDomain::square(problem.domain.min[0], problem.domain.max[0])?;
        let err = heat_oracle_error(dom2, 33, (64.0 * horizon).ceil().max(4.0) as usize, horizon)?;
        rows.push(EstimateReport::info_row(
            "manufactured_error",
            0,
            "ladder=planar;nodes=33x33".into(),
            err,
        ));
        Some(err)
    } else {
        None
    };

    let pass = spatial_order >= 1.8 && temporal_order >= 0.9;
    rows.push(EstimateReport {
        monitor: "manufactured_spatial_order".into(),
        level: 0,
        params: String::new(),
        value: spatial_order,
        bound: Some(1.8),
        verdict: if spatial_order >= 1.8 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });
    rows.push(EstimateReport {
        monitor: "manufactured_temporal_order".into(),
        level: 0,
        params: String::new(),
        value: temporal_order,
        bound: Some(0.9),
        verdict: if temporal_order >= 0.9 {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    });
    let summary = json!({
        "study": "manufactured",
        "grid": grid_summary(&study.grid),
        "spatial": spatial.iter().map(|(h, e)| json!({"h": h, "error": e})).collect::<Vec<_>>(),
        "temporal": temporal.iter().map(|(dt, e)| json!({"dt": dt, "error": e})).collect::<Vec<_>>(),
        "spatial_order": spatial_order,
        "temporal_order": temporal_order,
        "planar_error": planar_error,
        "pass": pass,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    write_study_outputs(study, &rows, &[], &summary)?;
    Ok(ManufacturedReport {
        rows,
        spatial_errors: spatial,
        temporal_errors: temporal,
        spatial_order,
        temporal_order,
        planar_error,
        pass,
    })
}

fn slope_ln(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Single-rung solve for the CLI: build the approximation at one level,
/// march it, dump fields and telemetry.
pub fn run_single_solve(study: &Study, level: u32) -> Result<SolveResult> {
    let started = Instant::now();
    let approx = build_approximation(&study.problem, level, &study.grid, study.width_base)?;
    let res = evolve(&study.grid, &approx, &study.solver, None)?;
    if let Some(dir) = &study.out {
        report::ensure_dir(dir)?;
        let fields = dir.join("fields");
        report::ensure_dir(&fields)?;
        report::write_field_csv(
            &fields.join(format!("u_n{level}.csv")),
            &study.grid,
            &res.solution,
        )?;
        report::write_json(
            &dir.join("telemetry.json"),
            &json!({
                "level": level,
                "per_step": res.per_step,
                "summary": telemetry_summary(&res),
                "wall_seconds": started.elapsed().as_secs_f64(),
            }),
        )?;
    }
    Ok(res)
}

/// Validation entry point for the CLI: structure sampling, singularity
/// envelope, and the source classification when a decay exponent is given.
pub fn run_validation(study: &Study, sample_count: usize) -> Result<serde_json::Value> {
    let problem = &study.problem;
    let structure = validate_structure(
        &problem.flux,
        problem.p,
        &problem.domain,
        problem.horizon,
        sample_count,
        study.seed,
    )?;
    let singularity = validate_singularity(&problem.singularity, sample_count.max(64), 50.0)?;
    let classification = match problem.singularity.theta {
        Some(theta) => {
            let class = classify_source_regularity(problem, theta, &study.grid)?;
            json!({
                "theta": theta,
                "finite_energy_eligible": class.finite_energy_eligible(),
                "norm": class.norm(),
            })
        }
        None => json!(null),
    };
    let value = json!({
        "study": "validate",
        "grid": grid_summary(&study.grid),
        "structure": {
            "samples": structure.samples,
            "empirical_alpha": structure.empirical_alpha,
            "empirical_beta": structure.empirical_beta,
            "min_monotonicity_gap": structure.min_monotonicity_gap,
        },
        "singularity": {
            "worst_envelope_margin": singularity.worst_envelope_margin,
            "worst_tail_margin": singularity.worst_tail_margin,
            "max_sampled_modulus": singularity.max_sampled_modulus,
            "monotonicity_checked": singularity.monotonicity_checked,
        },
        "source_classification": classification,
        "exponent_window_holds": problem.exponent_window_holds(),
        "pass": true,
    });
    if let Some(dir) = &study.out {
        report::ensure_dir(dir)?;
        report::write_json(&dir.join("summary.json"), &value)?;
    }
    Ok(value)
}
