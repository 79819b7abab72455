//! Nonnegative bounded Radon measures on the cylinder as atoms plus an
//! absolutely continuous density, their mollification into the smooth source
//! ladder, and narrow-convergence diagnostics.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::grid::{Grid, GridFunction, Point};

#[derive(Debug, Clone, Copy)]
pub struct Atom {
    pub position: Point,
    pub time: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct RadonMeasure {
    pub atoms: Vec<Atom>,
    pub density: Option<ScalarField>,
    total_variation: f64,
}

impl RadonMeasure {
    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            density: None,
            total_variation: 0.0,
        }
    }

    /// Purely atomic measure; masses must be positive (locations are checked
    /// against the cylinder when the measure is first used on a grid).
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if !(a.mass > 0.0) {
                return Err(Error::Parameter(format!(
                    "atom mass must be positive (got {})",
                    a.mass
                )));
            }
        }
        let tv = atoms.iter().map(|a| a.mass).sum();
        Ok(Self {
            atoms,
            density: None,
            total_variation: tv,
        })
    }

    /// Atoms plus a nonnegative density; the density's cylinder integral is
    /// quadratured on the supplied grid and cached in the total variation.
    pub fn with_density(atoms: Vec<Atom>, density: ScalarField, grid: &Grid) -> Result<Self> {
        let mut base = Self::from_atoms(atoms)?;
        let field = GridFunction::from_fn(grid, |x, t| density.value(&grid.domain, x, t));
        if field.min_all() < 0.0 {
            return Err(Error::Parameter(
                "measure density must be nonnegative".into(),
            ));
        }
        base.total_variation += grid.integrate_space_time(&field);
        base.density = Some(density);
        Ok(base)
    }

    pub fn total_variation(&self) -> f64 {
        self.total_variation
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.is_none()
    }

    fn check_atoms_inside(&self, grid: &Grid) -> Result<()> {
        for a in &self.atoms {
            let inside_time = a.time > 0.0 && a.time < grid.horizon;
            if !inside_time || grid.domain.boundary_distance(a.position) <= 0.0 {
                return Err(Error::Parameter(format!(
                    "atom at {:?}, t={} must lie strictly inside the cylinder",
                    &a.position[..grid.dim],
                    a.time
                )));
            }
        }
        Ok(())
    }

    /// Pairing against a continuous test function: exact atom evaluation plus
    /// grid quadrature of the density part.
    pub fn pair(&self, grid: &Grid, phi: &dyn Fn(Point, f64) -> f64) -> f64 {
        let mut total: f64 = self
            .atoms
            .iter()
            .map(|a| a.mass * phi(a.position, a.time))
            .sum();
        if let Some(density) = &self.density {
            for m in 1..=grid.time_steps {
                let t = grid.time(m);
                let mut s = 0.0;
                for idx in 0..grid.node_count() {
                    let x = grid.position(idx);
                    s += grid.quad_weight(idx) * density.value(&grid.domain, x, t) * phi(x, t);
                }
                total += grid.dt * s;
            }
        }
        total
    }

    /// Replace every atom by a nonnegative compact bump of space-time width
    /// `width_base / n`, normalized discretely so the grid quadrature of the
    /// output reproduces the total variation; the density part passes
    /// through. Refuses when the kernel is unresolved by the grid.
    pub fn mollify(&self, grid: &Grid, n: u32, width_base: f64) -> Result<GridFunction> {
        if n < 1 {
            return Err(Error::Parameter(
                "mollification level must be at least 1".into(),
            ));
        }
        let mut out = GridFunction::zeros(grid);
        if self.is_zero() {
            return Ok(out);
        }
        self.check_atoms_inside(grid)?;
        let width = width_base / n as f64;
        if width < 2.0 * grid.spacing || width < 2.0 * grid.dt {
            return Err(Error::GridTooCoarse { level: n, width });
        }
        let bump = |r: f64| -> f64 {
            let q = 1.0 - r * r;
            if q > 0.0 {
                q * q
            } else {
                0.0
            }
        };
        for atom in &self.atoms {
            let mut kernel = GridFunction::zeros(grid);
            for m in 0..=grid.time_steps {
                let t = grid.time(m);
                let tb = bump((t - atom.time) / width);
                if tb == 0.0 {
                    continue;
                }
                let slice = kernel.slice_mut(m);
                for idx in 0..grid.node_count() {
                    let x = grid.position(idx);
                    let mut v = tb;
                    for a in 0..grid.dim {
                        v *= bump((x[a] - atom.position[a]) / width);
                    }
                    slice[idx] = v;
                }
            }
            let mass = grid.integrate_space_time(&kernel);
            if mass <= 0.0 {
                return Err(Error::GridTooCoarse { level: n, width });
            }
            let scale = atom.mass / mass;
            for m in 0..=grid.time_steps {
                let src = kernel.slice(m).to_vec();
                let dst = out.slice_mut(m);
                for idx in 0..grid.node_count() {
                    dst[idx] += scale * src[idx];
                }
            }
        }
        if let Some(density) = &self.density {
            for m in 0..=grid.time_steps {
                let t = grid.time(m);
                let dst = out.slice_mut(m);
                for idx in 0..grid.node_count() {
                    dst[idx] += density.value(&grid.domain, grid.position(idx), t).max(0.0);
                }
            }
        }
        Ok(out)
    }
}

/// Pair a mollified (gridded) measure with a test function by quadrature.
pub fn pair_field(grid: &Grid, field: &GridFunction, phi: &dyn Fn(Point, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for m in 1..=grid.time_steps {
        let t = grid.time(m);
        let mut s = 0.0;
        for idx in 0..grid.node_count() {
            s += grid.quad_weight(idx) * field.slice(m)[idx] * phi(grid.position(idx), t);
        }
        total += grid.dt * s;
    }
    total
}

#[derive(Debug, Clone)]
pub struct NarrowRow {
    pub level: u32,
    pub test_label: String,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct NarrowConvergenceReport {
    pub rows: Vec<NarrowRow>,
    /// Whether, for every test function, the gaps are nonincreasing in n up
    /// to the given relative noise.
    pub monotone_within_noise: bool,
}

/// Tabulate `|<mollify(mu, n), phi> - <mu, phi>|` over the level ladder and
/// a panel of bounded continuous test functions.
pub fn narrow_convergence_report(
    mu: &RadonMeasure,
    grid: &Grid,
    levels: &[u32],
    width_base: f64,
    panel: &[(String, Box<dyn Fn(Point, f64) -> f64>)],
) -> Result<NarrowConvergenceReport> {
    if panel.is_empty() {
        return Err(Error::Parameter("test panel must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &n in levels {
        let field = mu.mollify(grid, n, width_base)?;
        for (label, phi) in panel {
            let exact = mu.pair(grid, phi.as_ref());
            let smoothed = pair_field(grid, &field, phi.as_ref());
            rows.push(NarrowRow {
                level: n,
                test_label: label.clone(),
                gap: (smoothed - exact).abs(),
            });
        }
    }
    let mut monotone = true;
    for (label, _) in panel {
        let gaps: Vec<f64> = rows
            .iter()
            .filter(|r| &r.test_label == label)
            .map(|r| r.gap)
            .collect();
        for w in gaps.windows(2) {
            if w[1] > w[0] * 1.05 + 1e-10 {
                monotone = false;
            }
        }
    }
    Ok(NarrowConvergenceReport {
        rows,
        monotone_within_noise: monotone,
    })
}
