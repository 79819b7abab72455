//! Scalar truncation gadgets shared by the solver and the estimate monitors.
//!
//! All of them are exact closed forms; the quadrature counterparts live in
//! the test suite as independent oracles.

use crate::error::{Error, Result};

/// Parameter bundle for the truncation gadgets: level `k`, power `eta`,
/// indicator width `delta` and the exponent `sigma = max(1, gamma)` used by
/// the mass estimate.
#[derive(Debug, Clone, Copy)]
pub struct TruncationFamily {
    pub k: f64,
    pub eta: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl TruncationFamily {
    pub fn new(k: f64, eta: f64, delta: f64, sigma: f64) -> Result<Self> {
        if !(k > 0.0) || !(eta > 0.0) || !(delta > 0.0) {
            return Err(Error::Parameter(format!(
                "truncation family needs k, eta, delta > 0 (got k={k}, eta={eta}, delta={delta})"
            )));
        }
        if !(sigma >= 1.0) {
            return Err(Error::Parameter(format!(
                "sigma must be >= 1 (got {sigma})"
            )));
        }
        Ok(Self {
            k,
            eta,
            delta,
            sigma,
        })
    }
}

fn positive_level(k: f64) -> Result<()> {
    if k > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "truncation level must be positive (got {k})"
        )))
    }
}

/// Clamp `s` to the band `[-k, k]`.
pub fn truncate(k: f64, s: f64) -> Result<f64> {
    positive_level(k)?;
    Ok(s.clamp(-k, k))
}

/// Signed excess over the band: `(|s| - k)^+ sign(s)`; complements `truncate`
/// so that `truncate(k, s) + excess(k, s) = s`.
pub fn excess(k: f64, s: f64) -> Result<f64> {
    positive_level(k)?;
    let e = (s.abs() - k).max(0.0);
    Ok(if s < 0.0 { -e } else { e })
}

/// Primitive of the `eta`-th power of the clamp, for nonnegative states:
/// `s^(eta+1)/(eta+1)` below the level, affine continuation above it.
pub fn truncation_primitive(k: f64, eta: f64, s: f64) -> Result<f64> {
    positive_level(k)?;
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!(
            "eta must be positive (got {eta})"
        )));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "truncation_primitive expects a nonnegative state (got {s})"
        )));
    }
    if s <= k {
        Ok(s.powf(eta + 1.0) / (eta + 1.0))
    } else {
        Ok(k.powf(eta + 1.0) / (eta + 1.0) + k.powf(eta) * (s - k))
    }
}

/// Piecewise-linear smoothing of the indicator of `{s <= delta}`: equal to 1
/// up to `delta`, linear down to 0 at `2 delta`.
pub fn vee(delta: f64, s: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be positive (got {delta})"
        )));
    }
    Ok(if s <= delta {
        1.0
    } else if s < 2.0 * delta {
        (2.0 * delta - s) / delta
    } else {
        0.0
    })
}

/// Primitive of `vee`; saturates at `3 delta / 2`.
pub fn vee_primitive(delta: f64, s: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be positive (got {delta})"
        )));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "vee_primitive expects a nonnegative state (got {s})"
        )));
    }
    Ok(if s <= delta {
        s
    } else if s < 2.0 * delta {
        delta + (2.0 * delta * (s - delta) - 0.5 * (s * s - delta * delta)) / delta
    } else {
        1.5 * delta
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(2.0, 3.0).unwrap(), 2.0);
        assert_eq!(truncate(2.0, -3.0).unwrap(), -2.0);
        assert_eq!(truncate(5.0, 1.5).unwrap(), 1.5);
        assert!(truncate(0.0, 1.0).is_err());
        assert!(truncate(-1.0, 1.0).is_err());
    }

    #[test]
    fn excess_examples() {
        assert_eq!(excess(2.0, 3.0).unwrap(), 1.0);
        assert_eq!(excess(2.0, -3.0).unwrap(), -1.0);
        assert_eq!(excess(2.0, 1.0).unwrap(), 0.0);
        assert!(excess(0.0, 1.0).is_err());
    }

    #[test]
    fn decomposition_is_exact_inside_band() {
        // |s| <= k: truncate returns s bit-for-bit and excess is exactly zero.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let k = rng.gen_range(0.001..10.0);
            let s = rng.gen_range(-k..k);
            assert_eq!(truncate(k, s).unwrap(), s);
            assert_eq!(excess(k, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn truncation_primitive_examples() {
        assert!((truncation_primitive(1.0, 1.0, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert!((truncation_primitive(1.0, 2.0, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(truncation_primitive(1.0, 1.0, -0.1).is_err());
        assert!(truncation_primitive(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn primitive_at_unit_level_dominates_s_minus_one() {
        // With k = 1 and any power sigma >= 1 the primitive stays above s - 1.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50_000 {
            let sigma = rng.gen_range(1.0..4.0);
            let s = rng.gen_range(0.0..20.0);
            let v = truncation_primitive(1.0, sigma, s).unwrap();
            assert!(
                v >= s - 1.0 - 1e-12,
                "primitive {v} under s-1 at s={s}, sigma={sigma}"
            );
        }
    }

    #[test]
    fn vee_examples_and_bounds() {
        assert_eq!(vee(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(vee(1.0, 1.5).unwrap(), 0.5);
        assert_eq!(vee(1.0, 3.0).unwrap(), 0.0);
        assert!(vee(0.0, 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut prev_s = f64::NEG_INFINITY;
        let mut prev_v = f64::INFINITY;
        let mut sorted: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..5.0)).collect();
        sorted.sort_by(f64::total_cmp);
        for s in sorted {
            let v = vee(1.3, s).unwrap();
            assert!((0.0..=1.0).contains(&v));
            if s > prev_s {
                assert!(v <= prev_v + 1e-15, "vee not nonincreasing");
            }
            prev_s = s;
            prev_v = v;
        }
    }

    #[test]
    fn vee_primitive_examples() {
        assert_eq!(vee_primitive(1.0, 1.0).unwrap(), 1.0);
        assert!((vee_primitive(1.0, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((vee_primitive(1.0, 10.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(vee_primitive(1.0, -1.0).is_err());
    }

    #[test]
    fn family_invariants() {
        assert!(TruncationFamily::new(1.0, 1.0, 1.0, 1.0).is_ok());
        assert!(TruncationFamily::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(TruncationFamily::new(1.0, 1.0, 1.0, 0.5).is_err());
    }
}
