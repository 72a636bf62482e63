//! Single runs: execute one config and write its outputs and manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdl_core::harmonic::{default_schedule, gl_continuation, harmonic_flow, harmonic_residual, spectral_index, GLConfig, SphereMap};
use sdl_core::io::{self, fmt_f64, MapMeta, Metadata};
use sdl_core::optimize::{
    certify_upper_bound_sphere, criticality_check_density, free_boundary_check, maximize_F1, maximize_steklov_density,
};
use sdl_core::spectral::{
    calibrated_zero_tol, schrodinger_spectrum, steklov_spectrum, weighted_laplace_spectrum, SpectrumResult, MULTIPLICITY_GAP,
};
use sdl_core::verify::run_all;
use sdl_core::domain::dirichlet_energy;
use sdl_core::DiscreteManifold;
use serde::Serialize;

use crate::config::{density, potential, DomainSpec, ExperimentConfig, MapSpec, Problem, TaskSpec};
use crate::CliError;

/// Largest relative change of `F₁` between accepted steps still counted as
/// monotone.
const MONOTONE_TOL: f64 = 1e-6;
/// Relative window around the sharp constants `8π` and `2π`.
const SHARP_WINDOW: f64 = 0.02;
/// Index computations are skipped above this vertex count.
const INDEX_VERTEX_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `<= 1e-8`.
    pub condition: String,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), passed: value <= bound, value, condition: format!("<= {}", fmt_f64(bound)) }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.into(), passed: lo <= value && value <= hi, value, condition: format!("in [{}, {}]", fmt_f64(lo), fmt_f64(hi)) }
    }

    fn holds(name: &str, passed: bool) -> Self {
        Check { name: name.into(), passed, value: f64::from(u8::from(passed)), condition: "== 1".into() }
    }
}

/// Task results, written to `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub task: String,
    pub domain: String,
    pub vertices: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// One operation and the tolerances it ran with.
#[derive(Debug, Clone, Serialize)]
pub struct Operation {
    pub name: String,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub operation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Passed,
    ChecksFailed,
    ValidationError,
    SolverError,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Passed => 0,
            RunStatus::ChecksFailed => 1,
            RunStatus::ValidationError => 2,
            RunStatus::SolverError => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub config_path: String,
    pub config: Option<ExperimentConfig>,
    pub threads: usize,
    pub wall_seconds: f64,
    pub status: RunStatus,
    pub operations: Vec<Operation>,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub summary: Option<Summary>,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

/// Everything a task produced, before it is written.
pub struct TaskOutput {
    pub summary: Summary,
    pub operations: Vec<Operation>,
    /// File name, contents and producing operation.
    pub files: Vec<(String, Vec<u8>, String)>,
}

struct Builder {
    metrics: BTreeMap<String, f64>,
    checks: Vec<Check>,
    operations: Vec<Operation>,
    files: Vec<(String, Vec<u8>, String)>,
}

impl Builder {
    fn new() -> Self {
        Builder { metrics: BTreeMap::new(), checks: Vec::new(), operations: Vec::new(), files: Vec::new() }
    }

    fn metric(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.into(), v);
    }

    fn operation(&mut self, name: &str, tolerances: &[(&str, f64)]) {
        let tolerances = tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.operations.push(Operation { name: name.into(), tolerances });
    }

    fn file(&mut self, name: &str, operation: &str, write: impl FnOnce(&mut Vec<u8>) -> sdl_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(CliError::from_solver)?;
        self.files.push((name.into(), buf, operation.into()));
        Ok(())
    }

    fn finish(self, cfg: &ExperimentConfig, man: Option<&DiscreteManifold>) -> TaskOutput {
        let passed = self.checks.iter().all(|c| c.passed);
        TaskOutput {
            summary: Summary {
                task: cfg.task.name().into(),
                domain: cfg.domain.label(),
                vertices: man.map_or(0, |m| m.vertex_count()),
                seed: cfg.seed,
                metrics: self.metrics,
                checks: self.checks,
                passed,
            },
            operations: self.operations,
            files: self.files,
        }
    }
}

fn meta(pairs: &[(&str, String)]) -> Metadata {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn solver<T>(r: sdl_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_solver)
}

fn input<T>(r: sdl_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_validation)
}

fn initial_map(man: &DiscreteManifold, spec: &MapSpec, perturbation: f64, rng: &mut ChaCha8Rng) -> Result<SphereMap, CliError> {
    let u = input(spec.build(man))?;
    let seed = rng.next_u64();
    if perturbation > 0.0 {
        solver(u.perturbed(perturbation, seed))
    } else {
        Ok(u)
    }
}

fn spectrum_task(
    b: &mut Builder,
    man: &DiscreteManifold,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let TaskSpec::Spectrum { problem, count, density: dspec, potential: vspec, eigenvectors, residual_tol } = &cfg.task else {
        unreachable!()
    };
    let s: SpectrumResult = match problem {
        Problem::WeightedLaplace => {
            let beta = input(density(man, dspec, false, rng))?;
            solver(weighted_laplace_spectrum(man, &beta, *count))?
        }
        Problem::Schrodinger => {
            let v = input(potential(man, vspec, rng))?;
            solver(schrodinger_spectrum(man, &v, *count))?
        }
        Problem::Steklov => {
            let rho = input(density(man, dspec, true, rng))?;
            solver(steklov_spectrum(man, &rho, *count))?
        }
    };
    let op = s.problem.to_string() + "_spectrum";
    b.operation(&op, &[("residual_tol", *residual_tol), ("zero_tol", s.zero_tol), ("multiplicity_gap", MULTIPLICITY_GAP)]);
    let extra = meta(&[("domain", cfg.domain.label().replace(' ', "")), ("seed", cfg.seed.to_string())]);
    b.file("spectrum.csv", &op, |w| io::write_spectrum_csv(&s, &extra, w))?;
    if *eigenvectors {
        b.file("eigenvectors.txt", &op, |w| io::write_eigenvectors(&s, &extra, w))?;
    }
    for (k, l) in s.eigenvalues.iter().enumerate() {
        b.metric(&format!("eigenvalue_{k}"), *l);
    }
    b.metric("zero_tol", s.zero_tol);
    let worst = s.residuals.iter().cloned().fold(0.0, f64::max);
    b.checks.push(Check::at_most("max_relative_residual", worst, *residual_tol));
    b.checks.push(Check::at_most("orthonormality_defect", s.orthonormality_defect(), 1e-8));
    Ok(())
}

fn optimize_density_task(
    b: &mut Builder,
    man: &DiscreteManifold,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let TaskSpec::OptimizeDensity { density: dspec, optimizer } = &cfg.task else { unreachable!() };
    let beta0 = input(density(man, dspec, false, rng))?;
    let params = optimizer.params(rng.next_u64());
    let (beta, trace) = solver(maximize_F1(man, &beta0, &params))?;
    let op = "maximize_F1";
    b.operation(op, &[("tol", params.tol), ("eta", params.eta), ("floor", params.floor), ("min_eta", params.min_eta), ("rank_tol", params.rank_tol), ("monotone_tol", MONOTONE_TOL)]);
    let extra = meta(&[("operation", op.into()), ("stop", format!("{:?}", trace.stop))]);
    b.file("trace.csv", op, |w| io::write_optimizer_trace(&trace.iterations, &extra, w))?;
    b.file("density.txt", op, |w| io::write_density(&beta, &meta(&[("operation", op.into())]), w))?;
    b.file("map.txt", op, |w| io::write_map(&trace.final_map, &MapMeta { operation: op.into(), epsilon: None }, w))?;
    let f1 = trace.best_f1();
    b.metric("F1", f1);
    b.metric("iterations", trace.iterations.len().saturating_sub(1) as f64);
    b.metric("converged", f64::from(u8::from(trace.converged)));
    b.checks.push(Check::holds("trace_monotone", trace.is_monotone_within(MONOTONE_TOL)));
    let crit = solver(criticality_check_density(man, &beta, 1, params.tol))?;
    b.operation("criticality_check_density", &[("tol", params.tol)]);
    b.metric("fixed_point_residual", crit.r1);
    b.metric("recombination_residual", crit.r2);
    b.metric("cluster_dim", crit.cluster_dim as f64);
    if matches!(cfg.domain, DomainSpec::Icosphere { .. }) {
        let (bound, y) = solver(certify_upper_bound_sphere(man, &beta))?;
        b.operation("certify_upper_bound_sphere", &[("balance_tol", sdl_core::optimize::BALANCE_TOL)]);
        b.metric("certified_bound", bound);
        b.metric("mobius_norm", y.norm());
        b.metric("F1_over_8pi", f1 / (8.0 * PI));
        b.checks.push(Check::at_most("F1_minus_bound", f1 - bound, 1e-9 * bound));
        b.checks.push(Check::at_most("bound_over_8pi", bound / (8.0 * PI), 1.0 + SHARP_WINDOW));
        b.checks.push(Check::within("F1_over_8pi", f1 / (8.0 * PI), 1.0 - SHARP_WINDOW, 1.0 + SHARP_WINDOW));
    }
    Ok(())
}

fn optimize_steklov_task(
    b: &mut Builder,
    man: &DiscreteManifold,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let TaskSpec::OptimizeSteklov { density: dspec, optimizer } = &cfg.task else { unreachable!() };
    let rho0 = input(density(man, dspec, true, rng))?;
    let params = optimizer.params(rng.next_u64());
    let (rho, trace) = solver(maximize_steklov_density(man, &rho0, &params))?;
    let op = "maximize_steklov_density";
    b.operation(op, &[("tol", params.tol), ("eta", params.eta), ("floor", params.floor), ("min_eta", params.min_eta), ("monotone_tol", MONOTONE_TOL)]);
    let extra = meta(&[("operation", op.into()), ("stop", format!("{:?}", trace.stop))]);
    b.file("trace.csv", op, |w| io::write_optimizer_trace(&trace.iterations, &extra, w))?;
    b.file("density.txt", op, |w| io::write_density(&rho, &meta(&[("operation", op.into())]), w))?;
    b.file("map.txt", op, |w| io::write_map(&trace.final_map, &MapMeta { operation: op.into(), epsilon: None }, w))?;
    let g1 = trace.best_f1();
    b.metric("G1", g1);
    b.metric("G1_over_2pi", g1 / (2.0 * PI));
    b.metric("iterations", trace.iterations.len().saturating_sub(1) as f64);
    if let Some(h) = trace.iterations.last().and_then(|r| r.harmonicity_defect) {
        b.metric("harmonicity_defect", h);
    }
    b.checks.push(Check::holds("trace_monotone", trace.is_monotone_within(MONOTONE_TOL)));
    b.checks.push(Check::within("G1_over_2pi", g1 / (2.0 * PI), 1.0 - SHARP_WINDOW, 1.0 + SHARP_WINDOW));
    let fb_tol = 2.0 * params.tol.max(1e-3);
    let fb = solver(free_boundary_check(man, trace.final_map.field(), fb_tol))?;
    b.operation("free_boundary_check", &[("tol", fb_tol)]);
    b.metric("free_boundary_interior_defect", fb.interior_defect);
    b.metric("free_boundary_normality_defect", fb.normality_defect);
    b.metric("free_boundary_nu1", fb.nu[0]);
    b.metric("free_boundary_nu2", fb.nu[1]);
    Ok(())
}

fn index_metrics(b: &mut Builder, man: &DiscreteManifold, map: &SphereMap) -> Result<(), CliError> {
    if man.vertex_count() > INDEX_VERTEX_CAP {
        return Ok(());
    }
    let zt = solver(calibrated_zero_tol(man))?;
    let ind = solver(spectral_index(man, map, zt))?;
    b.operation("spectral_index", &[("zero_tol", zt)]);
    b.metric("spectral_index", ind.negative_count as f64);
    b.metric("spectral_nullity", ind.null_count as f64);
    Ok(())
}

fn harmonic_solve_task(
    b: &mut Builder,
    man: &DiscreteManifold,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let TaskSpec::HarmonicSolve { initial, perturbation, tol, max_iters } = &cfg.task else { unreachable!() };
    let u0 = initial_map(man, initial, *perturbation, rng)?;
    let flow = solver(harmonic_flow(man, &u0, *tol, *max_iters))?;
    let op = "harmonic_flow";
    b.operation(op, &[("tol", *tol), ("max_iters", *max_iters as f64)]);
    let mut trace = String::from("iteration,dirichlet\n");
    for (k, e) in flow.energies.iter().enumerate() {
        trace.push_str(&format!("{k},{e}\n"));
    }
    b.files.push(("trace.csv".into(), trace.into_bytes(), op.into()));
    b.file("map.txt", op, |w| io::write_map(&flow.map, &MapMeta { operation: op.into(), epsilon: None }, w))?;
    b.metric("dirichlet", flow.energy);
    b.metric("tangential_residual", flow.residual);
    b.metric("harmonic_residual", solver(harmonic_residual(man, &flow.map))?);
    b.metric("iterations", flow.iterations as f64);
    b.checks.push(Check::holds("converged", flow.converged));
    b.checks.push(Check::at_most("tangential_residual", flow.residual, *tol));
    index_metrics(b, man, &flow.map)
}

fn gl_task(b: &mut Builder, man: &DiscreteManifold, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<(), CliError> {
    let TaskSpec::GlContinuation { initial, perturbation, schedule, tol, max_iters } = &cfg.task else { unreachable!() };
    let u0 = initial_map(man, initial, *perturbation, rng)?;
    let schedule = schedule.clone().unwrap_or_else(|| default_schedule(man));
    let gl = GLConfig::default();
    let (map, stages) = solver(gl_continuation(man, u0.field(), &schedule, &gl, *tol, *max_iters))?;
    let op = "gl_continuation";
    b.operation(op, &[("tol", *tol), ("max_iters", *max_iters as f64), ("delta0", gl.delta0), ("r0", gl.r0)]);
    let extra = meta(&[("operation", op.into()), ("tol", fmt_f64(*tol))]);
    b.file("trace.csv", op, |w| io::write_gl_trace(&stages, &extra, w))?;
    let last = stages.last().expect("schedule is non-empty");
    b.file("map.txt", op, |w| io::write_map(&map, &MapMeta { operation: op.into(), epsilon: Some(last.epsilon) }, w))?;
    for s in &stages {
        b.metric(&format!("potential_term_{}", s.stage), s.potential_term);
    }
    b.metric("final_epsilon", last.epsilon);
    b.metric("final_dirichlet", last.dirichlet);
    b.metric("projected_dirichlet", solver(dirichlet_energy(man, map.field()))?);
    b.checks.push(Check::holds("all_stages_converged", stages.iter().all(|s| s.converged)));
    if let [.., a, z] = stages.as_slice() {
        b.checks.push(Check::at_most("final_potential_ratio", z.potential_term / a.potential_term, 1.0));
    }
    index_metrics(b, man, &map)
}

fn verify_task(b: &mut Builder, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let TaskSpec::Verify { fast } = &cfg.task else { unreachable!() };
    let results = run_all(*fast, |r| eprintln!("{r}"));
    b.operation("verify", &[("fast", f64::from(u8::from(*fast)))]);
    let mut csv = String::from("criterion,name,passed,detail\n");
    for r in &results {
        csv.push_str(&format!("{},{},{},\"{}\"\n", r.id, r.name, r.passed, r.detail.replace('"', "\"\"")));
        b.checks.push(Check::holds(&format!("criterion_{}", r.id), r.passed));
    }
    b.files.push(("verify.csv".into(), csv.into_bytes(), "verify".into()));
    Ok(())
}

/// Builds the domain and executes the task; nothing is written.
pub fn run_task(cfg: &ExperimentConfig) -> Result<TaskOutput, CliError> {
    let mut b = Builder::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let TaskSpec::Verify { .. } = cfg.task {
        verify_task(&mut b, cfg)?;
        return Ok(b.finish(cfg, None));
    }
    let man = input(cfg.domain.build())?;
    b.metric("mesh_size", man.mesh_size());
    match cfg.task {
        TaskSpec::Spectrum { .. } => spectrum_task(&mut b, &man, cfg, &mut rng)?,
        TaskSpec::OptimizeDensity { .. } => optimize_density_task(&mut b, &man, cfg, &mut rng)?,
        TaskSpec::OptimizeSteklov { .. } => optimize_steklov_task(&mut b, &man, cfg, &mut rng)?,
        TaskSpec::HarmonicSolve { .. } => harmonic_solve_task(&mut b, &man, cfg, &mut rng)?,
        TaskSpec::GlContinuation { .. } => gl_task(&mut b, &man, cfg, &mut rng)?,
        TaskSpec::Verify { .. } => unreachable!(),
    }
    Ok(b.finish(cfg, Some(&man)))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), CliError> {
    io::write_atomic(&dir.join("manifest.json"), &json(m)).map_err(|e| CliError::validation(format!("cannot write manifest: {e}")))
}

/// Loads, validates and runs the config at `path`, then writes the outputs,
/// `summary.json` and `manifest.json` into the run's output directory.
/// Config errors that occur before the output directory is known are
/// returned as `Err`; every later failure is recorded in the manifest.
pub fn run_config(path: &Path, threads: usize) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let cfg = ExperimentConfig::load(path)?;
    let dir = cfg.output_dir(path);
    fs::create_dir_all(&dir).map_err(|e| CliError::validation(format!("cannot create {}: {e}", dir.display())))?;
    let mut manifest = Manifest {
        toolkit: "sdl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_path: path.display().to_string(),
        config: Some(cfg.clone()),
        threads,
        wall_seconds: 0.0,
        status: RunStatus::Passed,
        operations: Vec::new(),
        outputs: Vec::new(),
        checks: Vec::new(),
        diagnostics: Vec::new(),
        summary: None,
        output_dir: Some(dir.clone()),
    };
    match run_task(&cfg) {
        Ok(out) => {
            for (name, bytes, op) in &out.files {
                io::write_atomic(&dir.join(name), bytes).map_err(|e| CliError::validation(format!("cannot write {name}: {e}")))?;
                manifest.outputs.push(OutputFile { file: name.clone(), operation: op.clone() });
            }
            io::write_atomic(&dir.join("summary.json"), &json(&out.summary))
                .map_err(|e| CliError::validation(format!("cannot write summary: {e}")))?;
            manifest.outputs.push(OutputFile { file: "summary.json".into(), operation: cfg.task.name().into() });
            manifest.operations = out.operations;
            manifest.checks = out.summary.checks.clone();
            manifest.status = if out.summary.passed { RunStatus::Passed } else { RunStatus::ChecksFailed };
            for c in manifest.checks.iter().filter(|c| !c.passed) {
                manifest.diagnostics.push(format!("check {} failed: {} not {}", c.name, c.value, c.condition));
            }
            manifest.summary = Some(out.summary);
        }
        Err(e) => {
            manifest.status = match e {
                CliError::Validation(_) => RunStatus::ValidationError,
                CliError::Solver(_) => RunStatus::SolverError,
            };
            manifest.diagnostics.push(e.to_string());
        }
    }
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}
