//! Scalar field registry: the source `f`, the initial datum and measure
//! densities are either closed-form fields from this registry or gridded
//! data imported from CSV.

use std::sync::Arc;

use crate::grid::{BoxDomain, Grid, Point};

/// Nodally sampled field with its own geometry; looked up by nearest node
/// and nearest slice, so it is exact on the grid it was sampled on.
#[derive(Debug, Clone)]
pub struct GriddedData {
    pub dim: usize,
    pub nodes_per_axis: usize,
    pub time_steps: usize,
    pub horizon: f64,
    pub min: Point,
    pub max: Point,
    pub data: Vec<f64>,
}

impl GriddedData {
    pub fn value(&self, x: Point, t: f64) -> f64 {
        let n = self.nodes_per_axis;
        let h = (self.max[0] - self.min[0]) / (n - 1) as f64;
        let clamp_idx = |v: f64| -> usize { (v.round().max(0.0) as usize).min(n - 1) };
        let i = clamp_idx((x[0] - self.min[0]) / h);
        let idx = if self.dim == 2 {
            let j = clamp_idx((x[1] - self.min[1]) / h);
            j * n + i
        } else {
            i
        };
        let dt = self.horizon / self.time_steps as f64;
        let m = ((t / dt).round().max(0.0) as usize).min(self.time_steps);
        let nodes = n.pow(self.dim as u32);
        self.data[m * nodes + idx]
    }
}

#[derive(Debug, Clone)]
pub enum ScalarField {
    Zero,
    Constant(f64),
    /// Product of half-sine arches over the box axes; nonnegative, zero trace.
    SineProduct,
    /// Compact polynomial bump `height * prod (1 - ((x_i - c_i)/width)^2)^2`.
    Bump {
        center: Point,
        width: f64,
        height: f64,
    },
    Gridded(Arc<GriddedData>),
}

impl ScalarField {
    pub fn value(&self, domain: &BoxDomain, x: Point, t: f64) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant(c) => *c,
            ScalarField::SineProduct => {
                let mut v = 1.0;
                for a in 0..domain.dim {
                    let s = (x[a] - domain.min[a]) / domain.side(a);
                    v *= (std::f64::consts::PI * s).sin();
                }
                v
            }
            ScalarField::Bump {
                center,
                width,
                height,
            } => {
                let mut v = *height;
                for a in 0..domain.dim {
                    let r = (x[a] - center[a]) / width;
                    let q = 1.0 - r * r;
                    if q <= 0.0 {
                        return 0.0;
                    }
                    v *= q * q;
                }
                v
            }
            ScalarField::Gridded(d) => d.value(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Zero)
    }

    /// Sample a solver output (or any space-time nodal data) into a field.
    pub fn from_samples(grid: &Grid, data: Vec<f64>) -> Self {
        ScalarField::Gridded(Arc::new(GriddedData {
            dim: grid.dim,
            nodes_per_axis: grid.nodes_per_axis,
            time_steps: grid.time_steps,
            horizon: grid.horizon,
            min: grid.domain.min,
            max: grid.domain.max,
            data,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn registry_values() {
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        assert_eq!(ScalarField::Zero.value(&dom, [0.3, 0.0], 0.1), 0.0);
        assert_eq!(ScalarField::Constant(2.5).value(&dom, [0.3, 0.0], 0.1), 2.5);
        let s = ScalarField::SineProduct.value(&dom, [0.5, 0.0], 0.0);
        assert!((s - 1.0).abs() < 1e-12);
        let b = ScalarField::Bump {
            center: [0.5, 0.0],
            width: 0.2,
            height: 3.0,
        };
        assert_eq!(b.value(&dom, [0.8, 0.0], 0.0), 0.0);
        assert_eq!(b.value(&dom, [0.5, 0.0], 0.0), 3.0);
    }

    #[test]
    fn gridded_round_trip_on_matching_grid() {
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let g = build_grid(dom, 9, 4, 1.0).unwrap();
        let mut data = Vec::new();
        for m in 0..=4 {
            for i in 0..9 {
                data.push((m * 9 + i) as f64);
            }
        }
        let f = ScalarField::from_samples(&g, data);
        for m in 0..=4 {
            for i in 0..9 {
                let x = g.position(i);
                let v = f.value(&g.domain, x, g.time(m));
                assert_eq!(v, (m * 9 + i) as f64);
            }
        }
    }
}
