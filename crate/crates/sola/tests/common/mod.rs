//! Shared builders for the integration suites: the battery problems on the
//! unit cylinder and the grids the studies run on.
#![allow(dead_code)] // each test binary uses its own subset

use sola::fields::ScalarField;
use sola::grid::{build_grid, BoxDomain, Grid};
use sola::measures::{Atom, RadonMeasure};
use sola::problem::{Flux, Problem, SingularityProfile};

pub fn unit_grid(nodes: usize, steps: usize) -> Grid {
    build_grid(BoxDomain::interval(0.0, 1.0).unwrap(), nodes, steps, 1.0).unwrap()
}

pub fn unit_dirac() -> RadonMeasure {
    RadonMeasure::from_atoms(vec![Atom {
        position: [0.5, 0.0],
        time: 0.5,
        mass: 1.0,
    }])
    .unwrap()
}

/// Battery case: `u_t - div(|grad u|^{p-2} grad u) = u^{-gamma} f + mu` on
/// the unit cylinder with `f = 1`, zero initial datum and an optional unit
/// atom at the center of the cylinder.
pub fn battery_problem(p: f64, gamma: f64, dirac: bool) -> Problem {
    Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        p,
        Flux::PLaplacian,
        SingularityProfile::inverse_power(gamma),
        ScalarField::Constant(1.0),
        ScalarField::Zero,
        if dirac {
            unit_dirac()
        } else {
            RadonMeasure::zero()
        },
    )
    .unwrap()
}

pub fn heat_problem(initial: ScalarField, source: ScalarField) -> Problem {
    Problem::new(
        BoxDomain::interval(0.0, 1.0).unwrap(),
        1.0,
        2.0,
        Flux::PLaplacian,
        SingularityProfile::constant(1.0),
        source,
        initial,
        RadonMeasure::zero(),
    )
    .unwrap()
}
