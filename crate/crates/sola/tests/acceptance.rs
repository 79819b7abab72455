//! Acceptance battery: every quantitative claim the artifact is supposed to
//! certify, one test per criterion, each printing a single verdict line.
//! Run with `cargo test --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use common::{battery_problem, heat_problem, unit_grid};
use sola::estimates::{
    boundary_trace_monitor, delta_split_monitor, distributional_residual_monitor, linf_l1_monitor,
    singular_mass_monitor, truncation_energy_monitor, Verdict,
};
use sola::experiments::{
    run_convergence_study, run_example_crosscheck, run_manufactured, run_regularity_study,
    run_uniqueness_test, RegularityCase, Study,
};
use sola::fields::ScalarField;
use sola::grid::{build_grid, cutoff_panel, BoxDomain};
use sola::measures::RadonMeasure;
use sola::problem::{build_approximation, mass_bound_constant, Flux, Problem, SingularityProfile};
use sola::stepper::{evolve, SolveResult, SolverConfig};
use sola::truncations;

const BATTERY_LADDER: [u32; 4] = [4, 16, 64, 256];
const BATTERY_WIDTH_BASE: f64 = 4.0;

fn solve_battery_ladder(problem: &Problem) -> Vec<SolveResult> {
    let grid = unit_grid(129, 128);
    let mut out: Vec<SolveResult> = Vec::new();
    for &n in &BATTERY_LADDER {
        let approx = build_approximation(problem, n, &grid, BATTERY_WIDTH_BASE).unwrap();
        let warm = out.last().map(|r| &r.solution);
        out.push(evolve(&grid, &approx, &SolverConfig::default(), warm).unwrap());
    }
    out
}

#[test]
fn criterion_01_explicit_mass_bound() {
    let started = Instant::now();
    let grid = unit_grid(129, 128);
    let mut worst_margin = f64::INFINITY;
    let mut runs = 0;
    for p in [1.8, 2.0, 3.0] {
        for gamma in [0.5, 2.0] {
            for dirac in [false, true] {
                let problem = battery_problem(p, gamma, dirac);
                let bound = mass_bound_constant(&problem, &grid).unwrap();
                for res in solve_battery_ladder(&problem) {
                    let rep = linf_l1_monitor(&grid, &res, &problem).unwrap();
                    runs += 1;
                    worst_margin = worst_margin.min(bound * 1.05 - rep.value);
                    assert_eq!(
                        rep.verdict,
                        Verdict::Pass,
                        "mass bound breached at p={p}, gamma={gamma}, dirac={dirac}, n={}: {} > {bound} * 1.05",
                        res.level,
                        rep.value
                    );
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 01 (explicit mass bound): PASS - {runs} rungs within bound, worst margin {worst_margin:.3}, {elapsed:.1}s"
    );
    assert!(
        elapsed <= 180.0,
        "battery exceeded the 3 minute budget: {elapsed:.1}s"
    );
}

#[test]
fn criterion_02_truncation_energy_slope() {
    // Slope of the truncation energy against the level over the active range,
    // as stated: <= 1.1 with at least 3 fitted points, for every battery case
    // carrying the unit atom. The one-sided bound E(k) <= C k does hold, but
    // its fitted-slope form does not: the energy of levels below the box
    // drain threshold is quadratically small on a bounded domain, so the
    // active-range slope sits near 2 even for the exact Dirichlet heat kernel
    // evaluated on this grid (slopes 2.18 at 129x128, 1.91 at 513x512).
    let grid = unit_grid(129, 128);
    let panel = cutoff_panel(&grid);
    let k_ladder = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    let mut slopes = Vec::new();
    let mut all_pass = true;
    for p in [1.8, 2.0, 3.0] {
        for gamma in [0.5, 2.0] {
            let problem = battery_problem(p, gamma, true);
            let res = solve_battery_ladder(&problem).pop().unwrap();
            let rows = truncation_energy_monitor(&grid, &res, p, &k_ladder, &panel[0]).unwrap();
            let slope_row = rows
                .iter()
                .find(|r| r.monitor == "truncation_energy_slope")
                .expect("slope row");
            let points: usize = slope_row
                .params
                .split(';')
                .find_map(|kv| {
                    kv.strip_prefix("active_points=")
                        .and_then(|v| v.parse().ok())
                })
                .unwrap();
            assert!(points >= 3, "fit needs >= 3 points (got {points})");
            slopes.push((p, gamma, slope_row.value));
            if slope_row.verdict != Verdict::Pass {
                all_pass = false;
            }
        }
    }
    println!(
        "criterion 02 (truncation-energy slope <= 1.1): {} - fitted slopes {:?}",
        if all_pass { "PASS" } else { "FAIL" },
        slopes
            .iter()
            .map(|(p, g, s)| format!("p={p},gamma={g}:{s:.2}"))
            .collect::<Vec<_>>()
    );
    assert!(
        all_pass,
        "active-range slopes exceed 1.1: {slopes:?}; the exact Dirichlet kernel on this grid \
         also fits at slope ~2, so the slope form of the level-energy law does not hold on a \
         bounded desk-scale domain even though E(k) <= C k itself does"
    );
}

#[test]
fn criterion_03_singular_term_local_boundedness() {
    let grid = unit_grid(129, 128);
    let panel = cutoff_panel(&grid);
    let problem = battery_problem(2.0, 0.5, false);
    let ladder = solve_battery_ladder(&problem);
    let mut values = Vec::new();
    for res in &ladder {
        let approx = build_approximation(&problem, res.level, &grid, BATTERY_WIDTH_BASE).unwrap();
        values.push(singular_mass_monitor(&grid, res, &approx, &panel[0]).value);
    }
    let finite = values.iter().all(|v| v.is_finite());
    let last_gap = (values[3] - values[2]).abs() / values[2].abs().max(1e-300);
    println!(
        "criterion 03 (singular-term local boundedness): {} - ladder values {values:?}, last-two-rung gap {last_gap:.2e}",
        if finite && last_gap <= 0.10 { "PASS" } else { "FAIL" }
    );
    assert!(finite, "singular mass not finite: {values:?}");
    assert!(
        last_gap <= 0.10,
        "last-two-rung relative gap {last_gap} exceeds 10%"
    );
}

#[test]
fn criterion_04_ladder_convergence() {
    // gamma = 1 keeps the factor truncation active on resolvable boundary
    // layers at every rung, so the rung differences carry real signal.
    let grid = unit_grid(129, 128);
    let problem = Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::inverse_power(1.0),
        ScalarField::Constant(1.0),
        ScalarField::Zero,
        RadonMeasure::zero(),
    )
    .unwrap();
    let mut study = Study::new(problem, grid);
    study.width_base = BATTERY_WIDTH_BASE;
    let rep = run_convergence_study(&study).unwrap();
    println!(
        "criterion 04 (ladder convergence): {} - gaps {:?}, relative final gap {:.3e}",
        if rep.strictly_decreasing && rep.relative_final_gap <= 1e-3 {
            "PASS"
        } else {
            "FAIL"
        },
        rep.gaps,
        rep.relative_final_gap
    );
    assert!(
        rep.strictly_decreasing,
        "ladder gaps not strictly decreasing: {:?}",
        rep.gaps
    );
    assert!(
        rep.relative_final_gap <= 1e-3,
        "final relative gap {} exceeds 1e-3",
        rep.relative_final_gap
    );
}

#[test]
fn criterion_05_boundary_recovery() {
    let grid = unit_grid(129, 128);
    let eps_ladder = [0.2, 0.1, 0.05];

    // mild singularity battery cases: monotone in eps and O(eps + h)
    for (label, problem) in [
        ("singular", battery_problem(2.0, 0.5, false)),
        ("singular+dirac", battery_problem(2.0, 0.5, true)),
    ] {
        let approx = build_approximation(&problem, 64, &grid, BATTERY_WIDTH_BASE).unwrap();
        let res = evolve(&grid, &approx, &SolverConfig::default(), None).unwrap();
        let rows = boundary_trace_monitor(&grid, &res, 1.0, &eps_ladder, 0.5, 2.0).unwrap();
        let verdict = rows.last().unwrap();
        assert_eq!(verdict.verdict, Verdict::Pass, "{label}: {:?}", verdict);
    }

    // heat run: strip means scale like O(eps) since the solution vanishes
    // linearly at the boundary
    let heat = heat_problem(ScalarField::SineProduct, ScalarField::Zero);
    let approx = build_approximation(&heat, 4, &grid, BATTERY_WIDTH_BASE).unwrap();
    let res = evolve(&grid, &approx, &SolverConfig::default(), None).unwrap();
    let rows = boundary_trace_monitor(&grid, &res, 1.0, &eps_ladder, 0.0, 2.0).unwrap();
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.monitor == "boundary_trace")
        .map(|r| r.value)
        .collect();
    let slope = (values[0] / values[2]).ln() / (eps_ladder[0] / eps_ladder[2]).ln();
    assert!(rows.last().unwrap().verdict == Verdict::Pass);
    assert!(
        slope >= 0.8 && slope <= 1.3,
        "heat strip means should scale like O(eps), got slope {slope:.3} ({values:?})"
    );
    println!(
        "criterion 05 (boundary recovery): PASS - worst-slice strip means nonincreasing, heat-run eps-scaling slope {slope:.2}"
    );
}

#[test]
fn criterion_06_distributional_residual() {
    // exact zero on all-zero data
    let grid = unit_grid(33, 16);
    let zero = heat_problem(ScalarField::Zero, ScalarField::Zero);
    let approx = build_approximation(&zero, 4, &grid, BATTERY_WIDTH_BASE).unwrap();
    let res = evolve(&grid, &approx, &SolverConfig::default(), None).unwrap();
    for phi in &cutoff_panel(&grid) {
        let r = distributional_residual_monitor(&grid, &res, &zero, &approx, phi);
        assert!(
            r.value <= 1e-12,
            "zero-data residual {} (cutoff {})",
            r.value,
            phi.label
        );
    }

    // simultaneous (h, dt, n) refinement on the singular atom-driven case:
    // the worst residual over the cutoff panel must shrink by >= 1.5x per rung
    let mut worst = Vec::new();
    for (nodes, steps, n) in [(65usize, 32usize, 16u32), (129, 64, 64), (257, 128, 256)] {
        let grid = unit_grid(nodes, steps);
        let problem = battery_problem(2.0, 0.5, true);
        let approx = build_approximation(&problem, n, &grid, BATTERY_WIDTH_BASE).unwrap();
        let res = evolve(&grid, &approx, &SolverConfig::default(), None).unwrap();
        let mut rung_worst: f64 = 0.0;
        for phi in &cutoff_panel(&grid) {
            rung_worst = rung_worst
                .max(distributional_residual_monitor(&grid, &res, &problem, &approx, phi).value);
        }
        worst.push(rung_worst);
    }
    let factors: Vec<f64> = worst.windows(2).map(|w| w[0] / w[1]).collect();
    println!(
        "criterion 06 (distributional residual): PASS - zero case exact, refinement residuals {worst:?}, shrink factors {factors:?}"
    );
    for f in &factors {
        assert!(
            *f >= 1.5,
            "residual shrink factor {f} below 1.5 ({worst:?})"
        );
    }
}

#[test]
fn criterion_07_delta_splitting() {
    let grid = unit_grid(129, 128);
    let problem = battery_problem(2.0, 0.5, false);
    let approx = build_approximation(&problem, 256, &grid, BATTERY_WIDTH_BASE).unwrap();
    let res = evolve(&grid, &approx, &SolverConfig::default(), None).unwrap();
    let delta_ladder = [0.08, 0.04, 0.02, 0.01];
    let mut slopes = Vec::new();
    for phi in &cutoff_panel(&grid) {
        let rows = delta_split_monitor(&grid, &res, &approx, &delta_ladder, phi).unwrap();
        for row in &rows {
            assert_eq!(
                row.verdict,
                Verdict::Pass,
                "delta splitting failed (cutoff {}): {row:?}",
                phi.label
            );
            if row.monitor == "delta_split_slope" {
                slopes.push(row.value);
            }
        }
    }
    println!(
        "criterion 07 (delta splitting): PASS - small-state mass under the majorant at every delta, decay slopes {:?} >= 0.4",
        slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_08_uniqueness() {
    let grid = unit_grid(129, 128);
    let problem = Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::inverse_power_tail(0.5, 1.5),
        ScalarField::Constant(1.0),
        ScalarField::SineProduct,
        RadonMeasure::zero(),
    )
    .unwrap();
    let mut study = Study::new(problem, grid);
    study.solver.picard_tol = 1e-13;
    study.solver.newton_tol = 1e-11;
    let rep = run_uniqueness_test(&study).unwrap();
    assert!(
        rep.functional_unit <= 1e-10 && rep.functional_peak <= 1e-10,
        "uniqueness functional too large: {} / {}",
        rep.functional_unit,
        rep.functional_peak
    );
    assert!(
        rep.l1_gap_relative <= 1e-8,
        "two-path L1 gap {}",
        rep.l1_gap_relative
    );

    // the increasing-factor control must be refused with exit code 2
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/configs/uniqueness_control.json"
    );
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_sola"))
        .args(["uniqueness", config])
        .output()
        .expect("spawn solver binary");
    let code = output.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        2,
        "increasing-factor control should refuse with exit code 2, got {code}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    println!(
        "criterion 08 (uniqueness): PASS - functional {:.2e}, relative L1 gap {:.2e}, control refused with exit 2",
        rep.functional_unit, rep.l1_gap_relative
    );
}

#[test]
fn criterion_09_regularizing_effect() {
    // theta = 1.5 (integrable branch) in 1d
    let grid1 = unit_grid(129, 128);
    let theta15 = Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::inverse_power_tail(0.5, 1.5),
        ScalarField::Constant(1.0),
        ScalarField::SineProduct,
        RadonMeasure::zero(),
    )
    .unwrap();
    let control = Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::constant(1.0),
        ScalarField::Bump {
            center: [0.5, 0.0],
            width: 0.02,
            height: 512.0,
        },
        ScalarField::Zero,
        RadonMeasure::zero(),
    )
    .unwrap();
    let study1 = Study::new(theta15.clone(), grid1);
    let cases1 = vec![
        RegularityCase {
            label: "theta=1.5".into(),
            problem: theta15,
            control: false,
        },
        RegularityCase {
            label: "control".into(),
            problem: control,
            control: true,
        },
    ];
    let rep1 = run_regularity_study(&study1, &cases1).unwrap();

    // theta = 0.5 needs the mixed-norm class, which requires p < N: run it
    // planar at p = 1.8
    let grid2 = build_grid(BoxDomain::square(0.0, 1.0).unwrap(), 33, 64, 1.0).unwrap();
    let theta05 = Problem::new(
        BoxDomain::square(0.0, 1.0).unwrap(),
        1.0,
        1.8,
        Flux::PLaplacian,
        SingularityProfile::inverse_power(0.5),
        ScalarField::Constant(1.0),
        ScalarField::SineProduct,
        RadonMeasure::zero(),
    )
    .unwrap();
    let study2 = Study::new(theta05.clone(), grid2);
    let cases2 = vec![RegularityCase {
        label: "theta=0.5 planar".into(),
        problem: theta05,
        control: false,
    }];
    let rep2 = run_regularity_study(&study2, &cases2).unwrap();

    let mut summary = Vec::new();
    for case in rep1.cases.iter().chain(rep2.cases.iter()) {
        summary.push(format!(
            "{}: ratio {:.3}{}",
            case.label,
            case.upper_ratio,
            if case.control {
                " (growth expected)"
            } else {
                ""
            }
        ));
        assert!(
            case.pass,
            "regularity case {} failed: energies {:?}",
            case.label, case.energies
        );
    }
    println!(
        "criterion 09 (regularizing effect): PASS - {}",
        summary.join("; ")
    );
}

#[test]
fn criterion_10_substitution_crosscheck() {
    let grid = unit_grid(129, 128);
    let problem = heat_problem(ScalarField::SineProduct, ScalarField::Constant(1.0));
    let mut study = Study::new(problem, grid);
    study.solver.picard_tol = 1e-13;
    study.solver.newton_tol = 1e-11;
    let rep = run_example_crosscheck(&study, &[0.5, 1.0]).unwrap();
    for o in &rep.outcomes {
        assert!(
            o.relative_gap <= 1e-6,
            "crosscheck gap {} at gamma {} (level {})",
            o.relative_gap,
            o.gamma,
            o.level
        );
    }
    println!(
        "criterion 10 (substitution cross-check): PASS - relative gaps {:?}",
        rep.outcomes
            .iter()
            .map(|o| format!("gamma={}: {:.2e}", o.gamma, o.relative_gap))
            .collect::<Vec<_>>()
    );
}

#[test]
fn criterion_11_solver_oracles() {
    let domain = BoxDomain::interval(0.0, 1.0).unwrap();
    let problem = Problem::new(
        domain,
        0.25,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::constant(1.0),
        ScalarField::Zero,
        ScalarField::SineProduct,
        RadonMeasure::zero(),
    )
    .unwrap();
    let grid = build_grid(domain, 65, 32, 0.25).unwrap();
    let study = Study::new(problem, grid);
    let rep = run_manufactured(&study).unwrap();
    assert!(
        rep.spatial_order >= 1.8,
        "spatial order {}",
        rep.spatial_order
    );
    assert!(
        rep.temporal_order >= 0.9,
        "temporal order {}",
        rep.temporal_order
    );
    let dense_worst = common_dense_equivalence();
    assert!(
        dense_worst <= 1e-10,
        "dense-solve equivalence worst gap {dense_worst:.3e}"
    );
    println!(
        "criterion 11 (solver oracles): PASS - spatial order {:.2}, temporal order {:.2}, dense-solve equivalence {:.2e}",
        rep.spatial_order, rep.temporal_order, dense_worst
    );
}

/// Worst sup-norm gap between the Newton path and a dense LU solve of the
/// same stencil system, over every frozen-coefficient solve of a short
/// singular march at p = 2.
fn common_dense_equivalence() -> f64 {
    use nalgebra::{DMatrix, DVector};
    use sola::stepper::elliptic_step;

    let grid = unit_grid(33, 16);
    let problem = battery_problem(2.0, 0.5, true);
    let approx = build_approximation(&problem, 8, &grid, BATTERY_WIDTH_BASE).unwrap();
    let config = SolverConfig {
        newton_tol: 5e-13,
        ..Default::default()
    };
    let n_int = grid.interior().len();
    let mut worst: f64 = 0.0;
    let mut prev: Vec<f64> = (0..grid.node_count())
        .map(|idx| {
            if grid.is_boundary(idx) {
                0.0
            } else {
                approx.truncated_initial(grid.position(idx))
            }
        })
        .collect();
    for m in 0..grid.time_steps {
        let t = grid.time(m + 1);
        let mu = approx.mollified_measure.slice(m + 1).to_vec();
        let mut v = prev.clone();
        for _ in 0..60 {
            let (w, _) = elliptic_step(&grid, &approx, &config, &prev, &v, &v, t, &mu).unwrap();
            // dense route for the identical linear system
            let mut mat = DMatrix::<f64>::zeros(n_int, n_int);
            let mut rhs = DVector::<f64>::zeros(n_int);
            for (rank, &idx) in grid.interior().iter().enumerate() {
                mat[(rank, rank)] = 1.0 / grid.dt;
                let x = grid.position(idx);
                rhs[rank] = prev[idx] / grid.dt
                    + approx.singular_factor(v[idx]) * approx.truncated_source(x, t)
                    + mu[idx];
            }
            let h2 = grid.spacing * grid.spacing;
            grid.for_each_edge(|e| {
                let ra = grid.interior_rank(e.from);
                let rb = grid.interior_rank(e.to);
                if let Some(a) = ra {
                    mat[(a, a)] += 1.0 / h2;
                }
                if let Some(b) = rb {
                    mat[(b, b)] += 1.0 / h2;
                }
                if let (Some(a), Some(b)) = (ra, rb) {
                    mat[(a, b)] -= 1.0 / h2;
                    mat[(b, a)] -= 1.0 / h2;
                }
            });
            let direct = mat.lu().solve(&rhs).expect("dense solve");
            for (rank, &idx) in grid.interior().iter().enumerate() {
                worst = worst.max((w[idx] - direct[rank]).abs());
            }
            let gap: f64 = (0..grid.node_count())
                .map(|i| grid.quad_weight(i) * (w[i] - v[i]).abs())
                .sum();
            v = w;
            if gap <= config.picard_tol * grid.domain.volume() {
                break;
            }
        }
        prev = v;
    }
    worst
}

#[test]
fn criterion_12_gadget_suite() {
    use rand::{Rng, SeedableRng};
    let started = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);

    // decomposition identity over 1e6 samples
    for _ in 0..1_000_000 {
        let k = rng.gen_range(1e-3..1e3);
        let s = rng.gen_range(-2e3..2e3);
        let t = truncations::truncate(k, s).unwrap();
        let g = truncations::excess(k, s).unwrap();
        let err = (t + g - s).abs();
        assert!(
            err <= 1e-12 * s.abs().max(1.0),
            "decomposition broke at k={k}, s={s}: {err}"
        );
        if s.abs() <= k {
            assert_eq!(t, s);
            assert_eq!(g, 0.0);
        }
    }

    // clamp-power primitive against a midpoint-rule oracle (1e-6 relative)
    for _ in 0..2_000 {
        let k = rng.gen_range(0.2..4.0);
        let eta = rng.gen_range(0.5..3.0);
        let s = rng.gen_range(0.0..8.0);
        let closed = truncations::truncation_primitive(k, eta, s).unwrap();
        let panels = 20_000;
        let dt = s / panels as f64;
        let mut quad = 0.0;
        for i in 0..panels {
            let t = (i as f64 + 0.5) * dt;
            quad += t.clamp(-k, k).powf(eta) * dt;
        }
        let scale = closed.abs().max(1e-12);
        assert!(
            (closed - quad).abs() / scale <= 1e-6,
            "primitive mismatch at k={k}, eta={eta}, s={s}: closed {closed} vs quadrature {quad}"
        );
    }

    // indicator-smoother primitive against the exact trapezoid on the kink
    // partition (1e-10), and the smoother's range, over 1e6 samples
    for _ in 0..1_000_000 {
        let delta = rng.gen_range(1e-3..10.0);
        let s = rng.gen_range(0.0..25.0);
        let v = truncations::vee(delta, s).unwrap();
        assert!((0.0..=1.0).contains(&v));
        let closed = truncations::vee_primitive(delta, s).unwrap();
        // piecewise-linear integrand: trapezoid on the pieces is exact
        let mut quad = 0.0;
        let breaks = [0.0, delta.min(s), (2.0 * delta).min(s), s];
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                let va = truncations::vee(delta, w[0]).unwrap();
                let vb = truncations::vee(delta, w[1]).unwrap();
                quad += 0.5 * (va + vb) * (w[1] - w[0]);
            }
        }
        assert!(
            (closed - quad).abs() <= 1e-10 * closed.abs().max(1.0),
            "smoother primitive mismatch at delta={delta}, s={s}"
        );
    }

    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 12 (gadget suite): PASS - 2e6+ samples at stated tolerances in {elapsed:.1}s"
    );
    assert!(elapsed <= 30.0, "gadget suite exceeded 30s: {elapsed:.1}s");
}
