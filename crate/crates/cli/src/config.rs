//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere};
use sdl_core::harmonic::SphereMap;
use sdl_core::optimize::OptimizeParams;
use sdl_core::spectral::{DensityField, PotentialField};
use sdl_core::{DiscreteManifold, VectorField};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the single generator all random choices of a run draw from.
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the config file. Defaults to
    /// `<config stem>.out` next to it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub domain: DomainSpec,
    pub task: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Icosphere { subdivisions: usize },
    Disk { radial_resolution: usize },
    Torus { side_lengths: Vec<f64>, resolution: usize },
}

impl DomainSpec {
    pub fn build(&self) -> sdl_core::Result<DiscreteManifold> {
        match self {
            DomainSpec::Icosphere { subdivisions } => build_icosphere(*subdivisions),
            DomainSpec::Disk { radial_resolution } => build_disk_mesh(*radial_resolution),
            DomainSpec::Torus { side_lengths, resolution } => build_flat_torus(side_lengths, *resolution),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DomainSpec::Icosphere { subdivisions } => format!("icosphere({subdivisions})"),
            DomainSpec::Disk { radial_resolution } => format!("disk({radial_resolution})"),
            DomainSpec::Torus { side_lengths, resolution } => {
                let s: Vec<String> = side_lengths.iter().map(f64::to_string).collect();
                format!("torus([{}],{resolution})", s.join(","))
            }
        }
    }
}

/// A vertex function given in ambient coordinates `x = (x, y, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `base + Σ c_a x_a²`
    Quadratic { base: f64, coefficients: [f64; 3] },
    /// `exp(Σ a_a x_a)`
    Exponential { coefficients: [f64; 3] },
    /// Independent uniform values in `[low, high)`.
    Random { low: f64, high: f64 },
}

impl FieldSpec {
    pub fn validate(&self, what: &str) -> Result<(), CliError> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            FieldSpec::Constant { value } => value.is_finite(),
            FieldSpec::Quadratic { base, coefficients } => finite(coefficients) && base.is_finite(),
            FieldSpec::Exponential { coefficients } => finite(coefficients),
            FieldSpec::Random { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::validation(format!("{what}: parameters must be finite (and low < high)")))
        }
    }

    pub fn sample(&self, man: &DiscreteManifold, rng: &mut ChaCha8Rng) -> Vec<f64> {
        man.positions()
            .iter()
            .map(|p| match self {
                FieldSpec::Constant { value } => *value,
                FieldSpec::Quadratic { base, coefficients: c } => base + c[0] * p[0] * p[0] + c[1] * p[1] * p[1] + c[2] * p[2] * p[2],
                FieldSpec::Exponential { coefficients: c } => (c[0] * p[0] + c[1] * p[1] + c[2] * p[2]).exp(),
                FieldSpec::Random { low, high } => rng.random_range(*low..*high),
            })
            .collect()
    }
}

fn unit_density() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

fn zero_potential() -> FieldSpec {
    FieldSpec::Constant { value: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    WeightedLaplace,
    Schrodinger,
    Steklov,
}

/// Starting map for the harmonic map tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    /// The inclusion of the unit sphere.
    Identity,
    /// `x ↦ (cos 2πx/L, sin 2πx/L)` in `S¹`, for the torus.
    Circle { period: f64 },
    Constant { direction: Vec<f64> },
}

impl MapSpec {
    pub fn build(&self, man: &DiscreteManifold) -> sdl_core::Result<SphereMap> {
        match self {
            MapSpec::Identity => SphereMap::identity(man),
            MapSpec::Circle { period } => {
                let c = SphereMap::circle_map(man, *period)?;
                SphereMap::project(&VectorField::from_fn(man.vertex_count(), 2, |i| c.field().row(i)[..2].to_vec()))
            }
            MapSpec::Constant { direction } => SphereMap::constant(man.vertex_count(), direction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Spectrum {
        problem: Problem,
        count: usize,
        /// Density for the weighted Laplace and Steklov problems.
        #[serde(default = "unit_density")]
        density: FieldSpec,
        #[serde(default = "zero_potential")]
        potential: FieldSpec,
        /// Also write `eigenvectors.txt`.
        #[serde(default)]
        eigenvectors: bool,
        /// Largest accepted relative eigen-residual.
        #[serde(default = "default_residual_tol")]
        residual_tol: f64,
    },
    OptimizeDensity {
        #[serde(default = "unit_density")]
        density: FieldSpec,
        #[serde(default)]
        optimizer: OptimizerSpec,
    },
    OptimizeSteklov {
        #[serde(default = "unit_density")]
        density: FieldSpec,
        #[serde(default)]
        optimizer: OptimizerSpec,
    },
    HarmonicSolve {
        initial: MapSpec,
        #[serde(default)]
        perturbation: f64,
        #[serde(default = "default_solve_tol")]
        tol: f64,
        #[serde(default = "default_solve_iters")]
        max_iters: usize,
    },
    GlContinuation {
        initial: MapSpec,
        #[serde(default)]
        perturbation: f64,
        /// Strictly decreasing ε values; the default geometric schedule when absent.
        #[serde(default)]
        schedule: Option<Vec<f64>>,
        #[serde(default = "default_solve_tol")]
        tol: f64,
        #[serde(default = "default_solve_iters")]
        max_iters: usize,
    },
    Verify {
        #[serde(default)]
        fast: bool,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Spectrum { .. } => "spectrum",
            TaskSpec::OptimizeDensity { .. } => "optimize-density",
            TaskSpec::OptimizeSteklov { .. } => "optimize-steklov",
            TaskSpec::HarmonicSolve { .. } => "harmonic-solve",
            TaskSpec::GlContinuation { .. } => "gl-continuation",
            TaskSpec::Verify { .. } => "verify",
        }
    }
}

fn default_residual_tol() -> f64 {
    1e-8
}

fn default_solve_tol() -> f64 {
    1e-6
}

fn default_solve_iters() -> usize {
    20_000
}

/// Optimizer settings, mirroring [`OptimizeParams`] without the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default = "OptimizerSpec::eta")]
    pub eta: f64,
    #[serde(default = "OptimizerSpec::floor")]
    pub floor: f64,
    #[serde(default = "OptimizerSpec::max_iters")]
    pub max_iters: usize,
    #[serde(default = "OptimizerSpec::tol")]
    pub tol: f64,
    #[serde(default = "OptimizerSpec::patience")]
    pub patience: usize,
    #[serde(default)]
    pub ambient: Option<usize>,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            eta: Self::eta(),
            floor: Self::floor(),
            max_iters: Self::max_iters(),
            tol: Self::tol(),
            patience: Self::patience(),
            ambient: None,
        }
    }
}

impl OptimizerSpec {
    fn eta() -> f64 {
        OptimizeParams::default().eta
    }
    fn floor() -> f64 {
        OptimizeParams::default().floor
    }
    fn max_iters() -> usize {
        OptimizeParams::default().max_iters
    }
    fn tol() -> f64 {
        OptimizeParams::default().tol
    }
    fn patience() -> usize {
        OptimizeParams::default().patience
    }

    pub fn params(&self, seed: u64) -> OptimizeParams {
        OptimizeParams {
            eta: self.eta,
            floor: self.floor,
            max_iters: self.max_iters,
            tol: self.tol,
            patience: self.patience,
            ambient: self.ambient,
            seed,
            ..OptimizeParams::default()
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    /// Checks everything that can be checked without building the domain.
    pub fn validate(&self) -> Result<(), CliError> {
        let is_disk = matches!(self.domain, DomainSpec::Disk { .. });
        let is_sphere = matches!(self.domain, DomainSpec::Icosphere { .. });
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CliError::validation(format!("{what} must be positive (got {x})")))
            }
        };
        match &self.task {
            TaskSpec::Spectrum { problem, count, density, potential, residual_tol, .. } => {
                if *count == 0 {
                    return Err(CliError::validation("count must be at least 1"));
                }
                if *problem == Problem::Steklov && !is_disk {
                    return Err(CliError::validation("the steklov problem needs a disk domain"));
                }
                density.validate("density")?;
                potential.validate("potential")?;
                positive(*residual_tol, "residual_tol")?;
            }
            TaskSpec::OptimizeDensity { density, optimizer: params } => {
                density.validate("density")?;
                params.params(self.seed).validate().map_err(CliError::from_validation)?;
            }
            TaskSpec::OptimizeSteklov { density, optimizer: params } => {
                if !is_disk {
                    return Err(CliError::validation("optimize-steklov needs a disk domain"));
                }
                density.validate("density")?;
                params.params(self.seed).validate().map_err(CliError::from_validation)?;
            }
            TaskSpec::HarmonicSolve { initial, perturbation, tol, max_iters }
            | TaskSpec::GlContinuation { initial, perturbation, tol, max_iters, .. } => {
                if matches!(initial, MapSpec::Identity) && !is_sphere {
                    return Err(CliError::validation("the identity map needs an icosphere domain"));
                }
                if let MapSpec::Circle { period } = initial {
                    positive(*period, "period")?;
                }
                if !(*perturbation >= 0.0 && perturbation.is_finite()) {
                    return Err(CliError::validation("perturbation must be a non-negative number"));
                }
                positive(*tol, "tol")?;
                if *max_iters == 0 {
                    return Err(CliError::validation("max_iters must be at least 1"));
                }
                if let TaskSpec::GlContinuation { schedule: Some(s), .. } = &self.task {
                    if s.is_empty() || s.iter().any(|e| !(*e > 0.0)) || s.windows(2).any(|w| !(w[1] < w[0])) {
                        return Err(CliError::validation("schedule must be a non-empty, strictly decreasing list of positive values"));
                    }
                }
            }
            TaskSpec::Verify { .. } => {}
        }
        Ok(())
    }

    /// Where the outputs of a run of this config loaded from `config_path` go.
    pub fn output_dir(&self, config_path: &Path) -> PathBuf {
        let base = config_path.parent().unwrap_or(Path::new("."));
        match &self.output {
            Some(p) => base.join(p),
            None => {
                let stem = config_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                base.join(format!("{stem}.out"))
            }
        }
    }
}

pub fn density(man: &DiscreteManifold, spec: &FieldSpec, boundary: bool, rng: &mut ChaCha8Rng) -> sdl_core::Result<DensityField> {
    let values = spec.sample(man, rng);
    if boundary {
        DensityField::on_boundary(man, values)
    } else {
        DensityField::new(man, values)
    }
}

pub fn potential(man: &DiscreteManifold, spec: &FieldSpec, rng: &mut ChaCha8Rng) -> sdl_core::Result<PotentialField> {
    PotentialField::new(man, spec.sample(man, rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECTRUM: &str = r#"
seed = 3
[domain]
builder = "icosphere"
subdivisions = 2
[task]
kind = "spectrum"
problem = "weighted-laplace"
count = 6
"#;

    #[test]
    fn parses_a_minimal_config() {
        let cfg = ExperimentConfig::parse(SPECTRUM).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.domain, DomainSpec::Icosphere { subdivisions: 2 });
        let TaskSpec::Spectrum { count, density, .. } = cfg.task else { panic!() };
        assert_eq!(count, 6);
        assert_eq!(density, FieldSpec::Constant { value: 1.0 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            SPECTRUM.replace("seed = 3", "seed = 3\ncolour = 1"),
            SPECTRUM.replace("subdivisions = 2", "subdivisions = 2\nradius = 1"),
            SPECTRUM.replace("count = 6", "count = 6\nshift = 0.5"),
        ] {
            let err = ExperimentConfig::parse(&bad).unwrap_err();
            assert!(err.to_string().contains("unknown field"), "{err}");
        }
    }

    #[test]
    fn optimizer_keys_are_checked() {
        let text = "[domain]\nbuilder = \"icosphere\"\nsubdivisions = 2\n[task]\nkind = \"optimize-density\"\n[task.optimizer]\neta = 0.25\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let TaskSpec::OptimizeDensity { optimizer: params, .. } = cfg.task else { panic!() };
        assert_eq!(params.eta, 0.25);
        assert_eq!(params.max_iters, OptimizeParams::default().max_iters);
        assert!(ExperimentConfig::parse(&text.replace("eta = 0.25", "etta = 0.25")).is_err());
        assert!(ExperimentConfig::parse(&text.replace("eta = 0.25", "eta = 2.0")).is_err());
    }

    #[test]
    fn incompatible_domains_are_rejected() {
        assert!(ExperimentConfig::parse(&SPECTRUM.replace("weighted-laplace", "steklov")).is_err());
        let gl = "[domain]\nbuilder = \"disk\"\nradial_resolution = 4\n[task]\nkind = \"gl-continuation\"\ninitial = { kind = \"identity\" }\n";
        assert!(ExperimentConfig::parse(gl).is_err());
    }

    #[test]
    fn output_dir_is_relative_to_the_config() {
        let cfg = ExperimentConfig::parse(SPECTRUM).unwrap();
        assert_eq!(cfg.output_dir(Path::new("/a/b/s.toml")), PathBuf::from("/a/b/s.out"));
        let cfg = ExperimentConfig { output: Some("res".into()), ..cfg };
        assert_eq!(cfg.output_dir(Path::new("/a/b/s.toml")), PathBuf::from("/a/b/res"));
    }
}
