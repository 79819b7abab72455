//! JSON study configuration: problem data (flux selector, zero-order factor
//! parameters, field selectors or gridded CSV data, measure atoms plus
//! density), grid, ladder, solver knobs and monitor panels.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Panels, RegularityCase, Study};
use crate::fields::ScalarField;
use crate::grid::{build_grid, BoxDomain, Grid};
use crate::measures::{Atom, RadonMeasure};
use crate::problem::{
    default_width_base, Coefficient, Flux, Problem, SingularityKind, SingularityProfile,
};
use crate::stepper::SolverConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluxFile {
    PLaplacian,
    WeightedPLaplacian { c_min: f64, c_max: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularityFile {
    Constant {
        value: f64,
    },
    /// `s^{-gamma}` with envelope constant 1 and break point 1.
    InversePower {
        gamma: f64,
    },
    /// `min(s^{-gamma}, s^{-theta})`, declaring decay `theta` at infinity.
    InversePowerTail {
        gamma: f64,
        theta: f64,
    },
    /// Bounded increasing control profile (fails the uniqueness gate).
    BoundedIncreasing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldFile {
    Zero,
    Constant {
        value: f64,
    },
    SineProduct,
    Bump {
        center: Vec<f64>,
        width: f64,
        height: f64,
    },
    GridCsv {
        path: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomFile {
    pub x: Vec<f64>,
    pub t: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeasureFile {
    #[serde(default)]
    pub atoms: Vec<AtomFile>,
    #[serde(default)]
    pub density: Option<FieldFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dim: usize,
    pub box_min: f64,
    pub box_max: f64,
    pub horizon: f64,
    pub p: f64,
    pub flux: FluxFile,
    pub singularity: SingularityFile,
    pub source: FieldFile,
    pub initial: FieldFile,
    #[serde(default)]
    pub measure: MeasureFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub nodes: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelsFile {
    #[serde(default)]
    pub k_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_ladder: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityCaseFile {
    pub label: String,
    pub problem: ProblemFile,
    #[serde(default)]
    pub control: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyFile {
    pub problem: ProblemFile,
    pub grid: GridFile,
    #[serde(default)]
    pub n_ladder: Option<Vec<u32>>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub panels: Option<PanelsFile>,
    /// Mollifier width at level 1 (defaults to a quarter of the smallest
    /// cylinder side); the kernel width at level n is this over n.
    #[serde(default)]
    pub mollifier_width_base: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Extra cases for the regularity study.
    #[serde(default)]
    pub regularity_cases: Option<Vec<RegularityCaseFile>>,
    /// Decay exponents for the substitution cross-check.
    #[serde(default)]
    pub crosscheck_gammas: Option<Vec<f64>>,
}

fn domain_of(file: &ProblemFile) -> Result<BoxDomain> {
    match file.dim {
        1 => BoxDomain::interval(file.box_min, file.box_max),
        2 => BoxDomain::square(file.box_min, file.box_max),
        d => Err(Error::Config(format!("dimension must be 1 or 2 (got {d})"))),
    }
}

fn field_of(file: &FieldFile, base: &Path) -> Result<ScalarField> {
    Ok(match file {
        FieldFile::Zero => ScalarField::Zero,
        FieldFile::Constant { value } => ScalarField::Constant(*value),
        FieldFile::SineProduct => ScalarField::SineProduct,
        FieldFile::Bump {
            center,
            width,
            height,
        } => {
            let mut c = [0.0, 0.0];
            for (i, v) in center.iter().take(2).enumerate() {
                c[i] = *v;
            }
            ScalarField::Bump {
                center: c,
                width: *width,
                height: *height,
            }
        }
        FieldFile::GridCsv { path } => {
            let resolved = if Path::new(path).is_absolute() {
                PathBuf::from(path)
            } else {
                base.join(path)
            };
            crate::report::read_field_csv(&resolved)?
        }
    })
}

fn singularity_of(file: &SingularityFile) -> Result<SingularityProfile> {
    Ok(match file {
        SingularityFile::Constant { value } => SingularityProfile::constant(*value),
        SingularityFile::InversePower { gamma } => SingularityProfile::inverse_power(*gamma),
        SingularityFile::InversePowerTail { gamma, theta } => {
            if theta < gamma {
                return Err(Error::Config(format!(
                    "tail profile needs theta >= gamma (got {theta} < {gamma})"
                )));
            }
            SingularityProfile::inverse_power_tail(*gamma, *theta)
        }
        SingularityFile::BoundedIncreasing => SingularityProfile::new(
            SingularityKind::BoundedIncreasing,
            0.0,
            2.0,
            1.0,
            None,
            None,
            false,
        )?,
    })
}

fn flux_of(file: &FluxFile, domain: &BoxDomain) -> Result<Flux> {
    Ok(match file {
        FluxFile::PLaplacian => Flux::PLaplacian,
        FluxFile::WeightedPLaplacian { c_min, c_max } => {
            if !(*c_min > 0.0 && c_max >= c_min) {
                return Err(Error::Config(format!(
                    "weighted flux needs 0 < c_min <= c_max (got {c_min}, {c_max})"
                )));
            }
            Flux::Weighted(Coefficient::Ramp {
                lo: *c_min,
                hi: *c_max,
                x_min: domain.min[0],
                x_max: domain.max[0],
            })
        }
    })
}

pub fn problem_of(file: &ProblemFile, grid: &Grid, base: &Path) -> Result<Problem> {
    let domain = domain_of(file)?;
    let source = field_of(&file.source, base)?;
    let initial = field_of(&file.initial, base)?;
    let mut atoms = Vec::new();
    for a in &file.measure.atoms {
        let mut x = [0.0, 0.0];
        for (i, v) in a.x.iter().take(2).enumerate() {
            x[i] = *v;
        }
        atoms.push(Atom {
            position: x,
            time: a.t,
            mass: a.mass,
        });
    }
    let measure = match &file.measure.density {
        Some(density) => RadonMeasure::with_density(atoms, field_of(density, base)?, grid)?,
        None if atoms.is_empty() => RadonMeasure::zero(),
        None => RadonMeasure::from_atoms(atoms)?,
    };
    Problem::new(
        domain,
        file.horizon,
        file.p,
        flux_of(&file.flux, &domain)?,
        singularity_of(&file.singularity)?,
        source,
        initial,
        measure,
    )
}

pub struct LoadedStudy {
    pub study: Study,
    pub regularity_cases: Vec<RegularityCase>,
    pub crosscheck_gammas: Vec<f64>,
}

pub fn load_study(
    path: &Path,
    grid_override: Option<(usize, usize)>,
    seed_override: Option<u64>,
    out: Option<PathBuf>,
) -> Result<LoadedStudy> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let file: StudyFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let (nodes, steps) = grid_override.unwrap_or((file.grid.nodes, file.grid.steps));
    let domain = domain_of(&file.problem)?;
    let grid = build_grid(domain, nodes, steps, file.problem.horizon)?;
    let problem = problem_of(&file.problem, &grid, &base)?;
    let mut study = Study::new(problem, grid);
    if let Some(ladder) = file.n_ladder {
        study.n_ladder = ladder;
    }
    if let Some(solver) = file.solver {
        study.solver = solver;
    }
    if let Some(panels) = file.panels {
        let defaults = Panels::default();
        study.panels = Panels {
            k_ladder: panels.k_ladder.unwrap_or(defaults.k_ladder),
            epsilon_ladder: panels.epsilon_ladder.unwrap_or(defaults.epsilon_ladder),
            delta_ladder: panels.delta_ladder.unwrap_or(defaults.delta_ladder),
        };
    }
    study.width_base = file
        .mollifier_width_base
        .unwrap_or_else(|| default_width_base(&study.problem.domain, study.problem.horizon));
    study.seed = seed_override.unwrap_or(file.seed);
    study.out = out;
    let mut regularity_cases = Vec::new();
    if let Some(cases) = &file.regularity_cases {
        for case in cases {
            let case_domain = domain_of(&case.problem)?;
            let case_grid = build_grid(case_domain, nodes, steps, case.problem.horizon)?;
            regularity_cases.push(RegularityCase {
                label: case.label.clone(),
                problem: problem_of(&case.problem, &case_grid, &base)?,
                control: case.control,
            });
        }
    }
    Ok(LoadedStudy {
        study,
        regularity_cases,
        crosscheck_gammas: file.crosscheck_gammas.unwrap_or_else(|| vec![0.5, 1.0]),
    })
}
