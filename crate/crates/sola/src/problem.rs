//! Continuous problem data: box, horizon, flux field, singular zero-order
//! factor, source, initial datum and measure; sampled validation of the
//! structural hypotheses; and construction of the level-n approximation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::grid::{Grid, GridFunction, Point};
use crate::measures::RadonMeasure;
use crate::truncations;

/// User extension point for flux fields outside the registry.
pub trait FluxFn: Send + Sync {
    fn eval(&self, x: Point, t: f64, xi: [f64; 2], p: f64) -> [f64; 2];
}

/// Coefficient field for the weighted flux, measurable in `(x, t)`.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient {
    Constant(f64),
    /// Linear ramp from `lo` at the left face to `hi` at the right face
    /// along axis 0.
    Ramp {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },
    /// Space-time ramp: the spatial ramp further scaled from `lo` toward
    /// `hi` as `t` runs through the horizon.
    SpaceTimeRamp {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
        horizon: f64,
    },
}

impl Coefficient {
    pub fn value(&self, x: Point, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Ramp {
                lo,
                hi,
                x_min,
                x_max,
            } => {
                let s = ((x[0] - x_min) / (x_max - x_min)).clamp(0.0, 1.0);
                lo + (hi - lo) * s
            }
            Coefficient::SpaceTimeRamp {
                lo,
                hi,
                x_min,
                x_max,
                horizon,
            } => {
                let s = ((x[0] - x_min) / (x_max - x_min)).clamp(0.0, 1.0);
                let r = (t / horizon).clamp(0.0, 1.0);
                lo + (hi - lo) * 0.5 * (s + r)
            }
        }
    }
}

#[derive(Clone)]
pub enum Flux {
    /// `a(xi) = |xi|^{p-2} xi`.
    PLaplacian,
    /// `a(x,t,xi) = c(x) |xi|^{p-2} xi` with `0 < c_min <= c <= c_max`.
    Weighted(Coefficient),
    Custom(Arc<dyn FluxFn>),
}

impl std::fmt::Debug for Flux {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Flux::PLaplacian => write!(f, "PLaplacian"),
            Flux::Weighted(c) => write!(f, "Weighted({c:?})"),
            Flux::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Flux {
    pub fn eval(&self, x: Point, t: f64, xi: [f64; 2], p: f64) -> [f64; 2] {
        match self {
            Flux::Custom(fx) => fx.eval(x, t, xi, p),
            _ => {
                let m2 = xi[0] * xi[0] + xi[1] * xi[1];
                if m2 == 0.0 {
                    return [0.0, 0.0]; // limit value for every p > 1
                }
                let c = match self {
                    Flux::Weighted(co) => co.value(x, t),
                    _ => 1.0,
                };
                let s = c * m2.powf(0.5 * (p - 2.0));
                [s * xi[0], s * xi[1]]
            }
        }
    }

    /// Derivative of the `axis` flux component with respect to the `axis`
    /// gradient component, with magnitude regularization `eps` (added to
    /// `|xi|^2`). Used by the stepper's Newton linearization.
    pub fn axis_derivative(
        &self,
        x: Point,
        t: f64,
        xi: [f64; 2],
        p: f64,
        axis: usize,
        eps: f64,
    ) -> f64 {
        match self {
            Flux::Custom(_) => {
                // symmetric difference on the normal component
                let scale = 1e-6 * (1.0 + xi[axis].abs());
                let mut hi = xi;
                let mut lo = xi;
                hi[axis] += scale;
                lo[axis] -= scale;
                (self.eval(x, t, hi, p)[axis] - self.eval(x, t, lo, p)[axis]) / (2.0 * scale)
            }
            _ => {
                let c = match self {
                    Flux::Weighted(co) => co.value(x, t),
                    _ => 1.0,
                };
                let m2 = xi[0] * xi[0] + xi[1] * xi[1] + eps;
                if m2 == 0.0 {
                    return 0.0;
                }
                // d/dg [ (g^2 + s^2 + eps)^{(p-2)/2} g ] with g the axis part
                c * m2.powf(0.5 * (p - 4.0))
                    * ((p - 1.0) * xi[axis] * xi[axis] + (m2 - xi[axis] * xi[axis]))
            }
        }
    }
}

/// How the zero-order factor is evaluated; the declared envelope parameters
/// live in `SingularityProfile` and are checked against this by sampling.
#[derive(Debug, Clone, Copy)]
pub enum SingularityKind {
    Constant {
        value: f64,
    },
    /// `coeff * s^{-exponent}`.
    InversePower {
        exponent: f64,
        coeff: f64,
    },
    /// `min(s^{-near}, s^{-far})`: behaves like `s^{-near}` under 1 and
    /// `s^{-far}` above it (requires `far >= near`).
    InversePowerTail {
        near: f64,
        far: f64,
    },
    /// `exp(-s) + s^{-exponent}`.
    ExpPlusInversePower {
        exponent: f64,
    },
    /// `1 + s/(1+s)`: bounded, increasing; control case for the uniqueness
    /// hypothesis gate.
    BoundedIncreasing,
}

#[derive(Debug, Clone)]
pub struct SingularityProfile {
    pub kind: SingularityKind,
    pub gamma: f64,
    pub bound_constant: f64,
    pub s0: f64,
    pub sup_tail: f64,
    pub sigma: f64,
    pub theta: Option<f64>,
    pub s1: Option<f64>,
    pub nonincreasing: bool,
    pub singular_at_zero: bool,
}

impl SingularityProfile {
    pub fn new(
        kind: SingularityKind,
        gamma: f64,
        bound_constant: f64,
        s0: f64,
        theta: Option<f64>,
        s1: Option<f64>,
        nonincreasing: bool,
    ) -> Result<Self> {
        if gamma < 0.0 || !(bound_constant > 0.0) || !(s0 > 0.0) {
            return Err(Error::Parameter(format!(
                "singularity profile needs gamma >= 0, C > 0, s0 > 0 (got {gamma}, {bound_constant}, {s0})"
            )));
        }
        let singular_at_zero = match kind {
            SingularityKind::Constant { .. } | SingularityKind::BoundedIncreasing => false,
            SingularityKind::InversePower { exponent, .. } => exponent > 0.0,
            SingularityKind::InversePowerTail { near, .. } => near > 0.0,
            SingularityKind::ExpPlusInversePower { exponent } => exponent > 0.0,
        };
        let mut profile = Self {
            kind,
            gamma,
            bound_constant,
            s0,
            sup_tail: 0.0,
            sigma: gamma.max(1.0),
            theta,
            s1,
            nonincreasing,
            singular_at_zero,
        };
        profile.sup_tail = profile.tail_supremum();
        if !(profile.evaluate_limit_at_zero() != 0.0) {
            return Err(Error::Parameter(
                "the zero-order factor must not vanish at 0".into(),
            ));
        }
        Ok(profile)
    }

    /// `h(s)` for `s > 0`.
    pub fn evaluate(&self, s: f64) -> f64 {
        match self.kind {
            SingularityKind::Constant { value } => value,
            SingularityKind::InversePower { exponent, coeff } => coeff * s.powf(-exponent),
            SingularityKind::InversePowerTail { near, far } => s.powf(-near).min(s.powf(-far)),
            SingularityKind::ExpPlusInversePower { exponent } => (-s).exp() + s.powf(-exponent),
            SingularityKind::BoundedIncreasing => 1.0 + s / (1.0 + s),
        }
    }

    fn evaluate_limit_at_zero(&self) -> f64 {
        if self.singular_at_zero {
            f64::INFINITY
        } else {
            match self.kind {
                SingularityKind::Constant { value } => value,
                SingularityKind::BoundedIncreasing => 1.0,
                SingularityKind::InversePower { coeff, .. } => coeff,
                _ => self.evaluate(1e-12),
            }
        }
    }

    /// Supremum of `h` on `[s0, infinity)`; exact for the registry kinds
    /// (all monotone past their break points).
    fn tail_supremum(&self) -> f64 {
        match self.kind {
            SingularityKind::Constant { value } => value,
            SingularityKind::BoundedIncreasing => 2.0,
            _ => self.evaluate(self.s0),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(
            SingularityKind::Constant { value },
            0.0,
            value.max(1e-12),
            1.0,
            Some(0.0),
            Some(1.0),
            false,
        )
        .expect("constant profile")
    }

    pub fn inverse_power(gamma: f64) -> Self {
        Self::new(
            SingularityKind::InversePower {
                exponent: gamma,
                coeff: 1.0,
            },
            gamma,
            1.0,
            1.0,
            Some(gamma),
            Some(1.0),
            true,
        )
        .expect("inverse power profile")
    }

    pub fn inverse_power_tail(gamma: f64, theta: f64) -> Self {
        Self::new(
            SingularityKind::InversePowerTail {
                near: gamma,
                far: theta,
            },
            gamma,
            1.0,
            1.0,
            Some(theta),
            Some(1.0),
            true,
        )
        .expect("tail profile")
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: crate::grid::BoxDomain,
    pub horizon: f64,
    pub p: f64,
    pub flux: Flux,
    pub singularity: SingularityProfile,
    pub source: ScalarField,
    pub initial: ScalarField,
    pub measure: RadonMeasure,
}

impl Problem {
    pub fn new(
        domain: crate::grid::BoxDomain,
        horizon: f64,
        p: f64,
        flux: Flux,
        singularity: SingularityProfile,
        source: ScalarField,
        initial: ScalarField,
        measure: RadonMeasure,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::Parameter(format!(
                "horizon must be positive (got {horizon})"
            )));
        }
        if !(p > 1.0) {
            return Err(Error::Parameter(format!(
                "exponent p must exceed 1 (got {p})"
            )));
        }
        Ok(Self {
            domain,
            horizon,
            p,
            flux,
            singularity,
            source,
            initial,
            measure,
        })
    }

    /// Whether p sits in the window the theory requires for dimension N:
    /// `2 - 1/(N+1) < p < N`.
    pub fn exponent_window_holds(&self) -> bool {
        let n = self.domain.dim as f64;
        self.p > 2.0 - 1.0 / (n + 1.0) && self.p < n
    }
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub samples: usize,
    pub empirical_alpha: f64,
    pub empirical_beta: f64,
    pub min_monotonicity_gap: f64,
    pub worst_coercivity_point: Point,
    pub pass: bool,
}

/// Sample the flux on random `(x, t, xi, eta)` tuples and check coercivity,
/// growth and strict monotonicity, reporting empirical constants and worst
/// margins. A violated sample is a structured failure naming the condition.
pub fn validate_structure(
    flux: &Flux,
    p: f64,
    domain: &crate::grid::BoxDomain,
    horizon: f64,
    sample_count: usize,
    seed: u64,
) -> Result<StructureReport> {
    if sample_count < 1 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = f64::INFINITY;
    let mut beta: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut worst = [0.0, 0.0];
    let draw_vec = |rng: &mut ChaCha8Rng, dim: usize| -> [f64; 2] {
        let mag = 10f64.powf(rng.gen_range(-3.0..3.0));
        let mut v: [f64; 2] = [0.0, 0.0];
        loop {
            for a in v.iter_mut().take(dim) {
                *a = rng.gen_range(-1.0..1.0);
            }
            let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if norm > 1e-3 {
                for a in v.iter_mut() {
                    *a *= mag / norm;
                }
                return v;
            }
        }
    };
    for _ in 0..sample_count {
        let mut x = [0.0, 0.0];
        for a in 0..domain.dim {
            x[a] = rng.gen_range(domain.min[a]..domain.max[a]);
        }
        let t = rng.gen_range(0.0..horizon);
        let xi = draw_vec(&mut rng, domain.dim);
        let eta = draw_vec(&mut rng, domain.dim);
        let a_xi = flux.eval(x, t, xi, p);
        let norm_xi = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let dot = a_xi[0] * xi[0] + a_xi[1] * xi[1];
        let ratio = dot / norm_xi.powf(p);
        if ratio < alpha {
            alpha = ratio;
            worst = x;
        }
        if ratio <= 0.0 {
            return Err(Error::StructureViolation {
                condition: "coercivity".into(),
                witness: format!(
                    "x={:?}, t={t:.4}, xi={:?}",
                    &x[..domain.dim],
                    &xi[..domain.dim]
                ),
                margin: ratio,
            });
        }
        let norm_a = (a_xi[0] * a_xi[0] + a_xi[1] * a_xi[1]).sqrt();
        beta = beta.max(norm_a / norm_xi.powf(p - 1.0));
        let diff = [xi[0] - eta[0], xi[1] - eta[1]];
        let nd = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
        if nd > 1e-9 {
            let a_eta = flux.eval(x, t, eta, p);
            let gap = (a_xi[0] - a_eta[0]) * diff[0] + (a_xi[1] - a_eta[1]) * diff[1];
            min_gap = min_gap.min(gap);
            if gap <= 0.0 {
                return Err(Error::StructureViolation {
                    condition: "strict monotonicity".into(),
                    witness: format!(
                        "x={:?}, t={t:.4}, xi={:?}, eta={:?}",
                        &x[..domain.dim],
                        &xi[..domain.dim],
                        &eta[..domain.dim]
                    ),
                    margin: gap,
                });
            }
        }
    }
    Ok(StructureReport {
        samples: sample_count,
        empirical_alpha: alpha,
        empirical_beta: beta,
        min_monotonicity_gap: min_gap,
        worst_coercivity_point: worst,
        pass: true,
    })
}

#[derive(Debug, Clone)]
pub struct SingularityReport {
    pub worst_envelope_margin: f64,
    pub worst_tail_margin: f64,
    pub max_sampled_modulus: f64,
    pub monotonicity_checked: bool,
}

/// Check the declared envelope `h(s) <= C s^{-gamma}` on a log grid in
/// `(0, s0]`, boundedness by `sup_tail` on `[s0, s_max]`, a continuity proxy
/// and (when claimed) monotonicity.
pub fn validate_singularity(
    profile: &SingularityProfile,
    sample_count: usize,
    s_max: f64,
) -> Result<SingularityReport> {
    if !(s_max > profile.s0) {
        return Err(Error::Parameter(format!(
            "s_max must exceed s0 (got {s_max} vs {})",
            profile.s0
        )));
    }
    let n = sample_count.max(8);
    let mut worst_env = f64::INFINITY;
    // log-spaced in (0, s0], four decades below s0
    for j in 0..n {
        let s = profile.s0 * 10f64.powf(-4.0 * j as f64 / (n - 1) as f64);
        let env = profile.bound_constant * s.powf(-profile.gamma);
        let margin = env - profile.evaluate(s);
        worst_env = worst_env.min(margin);
        if margin < -1e-9 * env.abs().max(1.0) {
            return Err(Error::Hypothesis(format!(
                "singularity envelope violated at s={s:.6e}: h={:.6e} > C s^-gamma = {env:.6e}",
                profile.evaluate(s)
            )));
        }
    }
    let mut worst_tail = f64::INFINITY;
    let mut prev: Option<(f64, f64)> = None;
    let mut max_mod: f64 = 0.0;
    for j in 0..n {
        let s = profile.s0 + (s_max - profile.s0) * j as f64 / (n - 1) as f64;
        let v = profile.evaluate(s);
        let margin = profile.sup_tail - v;
        worst_tail = worst_tail.min(margin);
        if margin < -1e-9 * profile.sup_tail.max(1.0) {
            return Err(Error::Hypothesis(format!(
                "tail bound violated at s={s:.6e}: h={v:.6e} > sup_tail={:.6e}",
                profile.sup_tail
            )));
        }
        if let Some((ps, pv)) = prev {
            max_mod = max_mod.max((v - pv).abs() / (s - ps));
        }
        prev = Some((s, v));
    }
    if profile.nonincreasing {
        // ladder over both regions
        let mut last = f64::INFINITY;
        for j in 0..n {
            let s =
                profile.s0 * 1e-3 * (s_max / (profile.s0 * 1e-3)).powf(j as f64 / (n - 1) as f64);
            let v = profile.evaluate(s);
            if v > last * (1.0 + 1e-12) + 1e-14 {
                return Err(Error::Hypothesis(format!(
                    "declared nonincreasing factor increases near s={s:.6e}"
                )));
            }
            last = v;
        }
    }
    Ok(SingularityReport {
        worst_envelope_margin: worst_env,
        worst_tail_margin: worst_tail,
        max_sampled_modulus: max_mod,
        monotonicity_checked: profile.nonincreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateExponents {
    /// `r N / (N - r)`, absent when `r >= N`.
    pub sobolev: Option<f64>,
    /// `r / (r - 1)`.
    pub holder: f64,
}

pub fn conjugate_exponents(r: f64, n_dim: usize) -> Result<ConjugateExponents> {
    if !(r > 1.0) {
        return Err(Error::Parameter(format!(
            "exponent must exceed 1 (got {r})"
        )));
    }
    let n = n_dim as f64;
    let sobolev = if r < n { Some(r * n / (n - r)) } else { None };
    Ok(ConjugateExponents {
        sobolev,
        holder: r / (r - 1.0),
    })
}

#[derive(Debug, Clone)]
pub enum SourceClass {
    /// Mixed-norm class that closes the global energy estimate for
    /// `theta < 1`: finite `L^{p/(p-1+theta)}(0,T; L^{(p*/(1-theta))'})` norm.
    FiniteEnergyEligible {
        theta: f64,
        time_exponent: f64,
        space_exponent: f64,
        mixed_norm: f64,
    },
    /// `theta >= 1` branch (or `p >= N` fallback): plain `L^1(Q)` norm.
    Integrable { l1_norm: f64, note: Option<String> },
}

impl SourceClass {
    pub fn norm(&self) -> f64 {
        match self {
            SourceClass::FiniteEnergyEligible { mixed_norm, .. } => *mixed_norm,
            SourceClass::Integrable { l1_norm, .. } => *l1_norm,
        }
    }

    pub fn finite_energy_eligible(&self) -> bool {
        matches!(self, SourceClass::FiniteEnergyEligible { .. })
    }
}

/// Classify the source against the decay exponent `theta`: below 1 the mixed
/// norm that closes the global energy estimate is computed by quadrature, at
/// or above 1 only integrability is needed.
pub fn classify_source_regularity(
    problem: &Problem,
    theta: f64,
    grid: &Grid,
) -> Result<SourceClass> {
    if theta < 0.0 {
        return Err(Error::Parameter(format!(
            "theta must be nonnegative (got {theta})"
        )));
    }
    let l1 = |grid: &Grid| -> f64 {
        let mut total = 0.0;
        for m in 1..=grid.time_steps {
            let t = grid.time(m);
            let mut s = 0.0;
            for idx in 0..grid.node_count() {
                s += grid.quad_weight(idx)
                    * problem
                        .source
                        .value(&problem.domain, grid.position(idx), t)
                        .abs();
            }
            total += grid.dt * s;
        }
        total
    };
    if theta >= 1.0 {
        return Ok(SourceClass::Integrable {
            l1_norm: l1(grid),
            note: None,
        });
    }
    let n_dim = problem.domain.dim;
    let sobolev = conjugate_exponents(problem.p, n_dim)?.sobolev;
    let p_star = match sobolev {
        Some(v) => v,
        None => {
            return Ok(SourceClass::Integrable {
                l1_norm: l1(grid),
                note: Some(format!(
                    "p = {} >= N = {n_dim}: the Sobolev conjugate is undefined, classification limited to the theta >= 1 branch",
                    problem.p
                )),
            });
        }
    };
    let space_exponent = conjugate_exponents(p_star / (1.0 - theta), n_dim)?.holder;
    let time_exponent = problem.p / (problem.p - 1.0 + theta);
    let mut time_sum = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let mut space_sum = 0.0;
        for idx in 0..grid.node_count() {
            let v = problem
                .source
                .value(&problem.domain, grid.position(idx), t)
                .abs();
            space_sum += grid.quad_weight(idx) * v.powf(space_exponent);
        }
        time_sum += grid.dt * space_sum.powf(time_exponent / space_exponent);
    }
    Ok(SourceClass::FiniteEnergyEligible {
        theta,
        time_exponent,
        space_exponent,
        mixed_norm: time_sum.powf(1.0 / time_exponent),
    })
}

/// Level-n approximating problem: `h`, `f` and the initial datum truncated
/// at `n`, the measure mollified on the grid.
#[derive(Debug, Clone)]
pub struct ApproximateProblem {
    pub level: u32,
    pub domain: crate::grid::BoxDomain,
    pub horizon: f64,
    pub p: f64,
    pub flux: Flux,
    pub singularity: SingularityProfile,
    pub source: ScalarField,
    pub initial: ScalarField,
    pub mollified_measure: GridFunction,
}

impl ApproximateProblem {
    /// `h_n(s) = T_n(h(max(s, 0)))`; with a genuine blow-up at zero this is
    /// `n` at `s = 0`, matching the truncation of the limit value.
    pub fn singular_factor(&self, s: f64) -> f64 {
        let n = self.level as f64;
        let s = s.max(0.0);
        if s == 0.0 {
            return if self.singularity.singular_at_zero {
                n
            } else {
                self.singularity.evaluate_limit_at_zero().min(n)
            };
        }
        self.singularity.evaluate(s).min(n)
    }

    pub fn truncated_source(&self, x: Point, t: f64) -> f64 {
        self.source
            .value(&self.domain, x, t)
            .min(self.level as f64)
            .max(0.0)
    }

    pub fn truncated_initial(&self, x: Point) -> f64 {
        self.initial
            .value(&self.domain, x, 0.0)
            .min(self.level as f64)
            .max(0.0)
    }
}

/// Build the n-th approximating problem; mollification of the measure is
/// delegated to the measures module with kernel width `width_base / n`.
pub fn build_approximation(
    problem: &Problem,
    n: u32,
    grid: &Grid,
    width_base: f64,
) -> Result<ApproximateProblem> {
    if n < 1 {
        return Err(Error::Parameter(
            "approximation level must be at least 1".into(),
        ));
    }
    let mollified_measure = problem.measure.mollify(grid, n, width_base)?;
    Ok(ApproximateProblem {
        level: n,
        domain: problem.domain,
        horizon: problem.horizon,
        p: problem.p,
        flux: problem.flux.clone(),
        singularity: problem.singularity.clone(),
        source: problem.source.clone(),
        initial: problem.initial.clone(),
        mollified_measure,
    })
}

/// Default mollifier width base: a quarter of the smallest cylinder side.
pub fn default_width_base(domain: &crate::grid::BoxDomain, horizon: f64) -> f64 {
    let mut w = horizon;
    for a in 0..domain.dim {
        w = w.min(domain.side(a));
    }
    w / 4.0
}

/// Explicit right-hand side of the slicewise mass estimate:
/// `||f||_{L1(Q)} (1 + sup h on [s0, inf)) + |mu|(Q) + |Omega| + int T~_{1,sigma}(u_0)`.
pub fn mass_bound_constant(problem: &Problem, grid: &Grid) -> Result<f64> {
    if !problem.singularity.sup_tail.is_finite() {
        return Err(Error::Parameter(
            "singularity profile incomplete: tail supremum not finite".into(),
        ));
    }
    let mut f_l1 = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let mut s = 0.0;
        for idx in 0..grid.node_count() {
            s += grid.quad_weight(idx)
                * problem
                    .source
                    .value(&problem.domain, grid.position(idx), t)
                    .abs();
        }
        f_l1 += grid.dt * s;
    }
    let mut initial_term = 0.0;
    for idx in 0..grid.node_count() {
        let u0 = problem
            .initial
            .value(&problem.domain, grid.position(idx), 0.0)
            .max(0.0);
        initial_term += grid.quad_weight(idx)
            * truncations::truncation_primitive(1.0, problem.singularity.sigma, u0)?;
    }
    Ok(f_l1 * (1.0 + problem.singularity.sup_tail)
        + problem.measure.total_variation()
        + problem.domain.volume()
        + initial_term)
}
