//! Maximization of `λ₁(β) ∫β` over densities and of `σ₁(ρ) ∫_∂ ρ` over
//! boundary densities, Möbius balancing with certified upper bounds on the
//! sphere, and numerical checks of the criticality characterizations.
//!
//! Both optimizers run the same damped fixed-point iteration: build the map
//! `û = Φ/|Φ|` from the top-cluster eigenspace, replace the density by the
//! energy density of `û` divided by the eigenvalue, and mix.

mod criticality;
mod mobius;
mod steklov;

use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{energy_density, DiscreteManifold, VectorField};
use crate::error::{invalid, Error, Result};
use crate::harmonic::SphereMap;
use crate::spectral::{weighted_laplace_spectrum, DensityField, DirichletToNeumann};

pub use criticality::{
    criticality_check_density, criticality_check_potential, unit_recombination, DensityCriticality,
    PotentialCriticality, Recombination,
};
pub use mobius::{
    balance_defect, certify_upper_bound_sphere, hersch_balance, mobius_apply, MobiusParam, BALANCE_TOL,
};
pub use steklov::{free_boundary_check, maximize_steklov_density, FreeBoundaryReport};

/// Eigenvalues within this relative distance of `λ_m` join its eigenspace
/// when building eigenfunction maps.
pub const CLUSTER_WINDOW: f64 = 0.3;

/// Rows with `|Φ_i|` below this fraction of the weighted RMS of `|Φ|` are
/// treated as vanishing.
pub const PHI_FLOOR: f64 = 1e-3;

/// Share of the mass on which `Φ` may vanish before a run is aborted.
pub const DEGENERATE_MASS: f64 = 0.01;

/// Relative decrease of `F₁` tolerated before the damping is halved.
pub const DAMPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeParams {
    /// Initial mixing weight `η ∈ (0, 1]`.
    pub eta: f64,
    /// Density floor relative to the mean density.
    pub floor: f64,
    pub max_iters: usize,
    /// Stop once the relative `L¹` change of the density is below this.
    pub tol: f64,
    /// Stop after this many steps without a relative improvement above `tol`.
    pub patience: usize,
    /// Give up on a step once `η` has been halved below this.
    pub min_eta: f64,
    /// Report the final map in `S^k` for this `k` through a random isometry.
    pub ambient: Option<usize>,
    pub seed: u64,
    /// Relative singular value threshold for the map rank column.
    pub rank_tol: f64,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            floor: 1e-8,
            max_iters: 100,
            tol: 1e-6,
            patience: 15,
            min_eta: 1.0 / 256.0,
            ambient: None,
            seed: 0,
            rank_tol: 1e-6,
        }
    }
}

impl OptimizeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid(format!("eta must lie in (0, 1] (got {})", self.eta));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return invalid(format!("floor must lie in (0, 1) (got {})", self.floor));
        }
        if !(self.tol > 0.0) || !(self.min_eta > 0.0) || !(self.rank_tol > 0.0) {
            return invalid("tol, min_eta and rank_tol must be positive");
        }
        if self.max_iters == 0 || self.patience == 0 {
            return invalid("max_iters and patience must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `F₁` (or `G₁` for boundary densities).
    pub f1: f64,
    /// `λ₂ − λ₁`
    pub gap: f64,
    /// Relative `L¹` change of the density in this step.
    pub beta_change: f64,
    pub map_rank: usize,
    /// Interior defect of the harmonic extension (boundary runs only).
    pub harmonicity_defect: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    BetaChange,
    Stagnation,
    DampingExhausted,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    /// Row 0 is the initial density, every later row an accepted step.
    pub iterations: Vec<TraceRecord>,
    pub final_map: SphereMap,
    pub converged: bool,
    pub stop: StopReason,
}

impl OptimizeTrace {
    pub fn best_f1(&self) -> f64 {
        self.iterations.iter().map(|r| r.f1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone_within(&self, rel: f64) -> bool {
        self.iterations.windows(2).all(|w| w[1].f1 >= w[0].f1 * (1.0 - rel))
    }
}

/// Indices `j` around `m` with `|v_j − v_m| ≤ halfwidth`.
pub(crate) fn cluster_range(values: &[f64], m: usize, halfwidth: f64) -> Range<usize> {
    let mut lo = m;
    while lo > 0 && (values[lo - 1] - values[m]).abs() <= halfwidth {
        lo -= 1;
    }
    let mut hi = m + 1;
    while hi < values.len() && (values[hi] - values[m]).abs() <= halfwidth {
        hi += 1;
    }
    lo..hi
}

/// `Φ/|Φ|` row by row. Rows with `|Φ_i| < PHI_FLOOR · rms` take the
/// normalized average of their neighbours. Returns the map and the weight
/// share of those rows.
pub(crate) fn eigen_map(
    phi: &VectorField,
    weights: &[f64],
    neighbors: &dyn Fn(usize) -> Vec<usize>,
) -> (VectorField, f64) {
    let n = phi.vertex_count();
    let d = phi.dim();
    let norms = phi.row_norms();
    let wsum: f64 = weights.iter().sum();
    let rms = (weights.iter().zip(&norms).map(|(w, r)| w * r * r).sum::<f64>() / wsum).sqrt();
    let floor = PHI_FLOOR * rms;
    let tiny: Vec<bool> = (0..n).map(|i| weights[i] > 0.0 && !(norms[i] >= floor)).collect();
    let low = (0..n).filter(|&i| tiny[i]).map(|i| weights[i]).sum::<f64>() / wsum;
    let mut out = VectorField::zeros(n, d);
    for i in 0..n {
        if !tiny[i] && norms[i] > 0.0 {
            for (o, p) in out.row_mut(i).iter_mut().zip(phi.row(i)) {
                *o = p / norms[i];
            }
        }
    }
    for i in (0..n).filter(|&i| tiny[i] || norms[i] == 0.0) {
        let mut acc = vec![0.0; d];
        for j in neighbors(i) {
            if !tiny[j] && norms[j] > 0.0 {
                for (a, p) in acc.iter_mut().zip(phi.row(j)) {
                    *a += p / norms[j];
                }
            }
        }
        let r = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.0 {
            acc.iter_mut().for_each(|v| *v /= r);
        } else {
            acc[0] = 1.0;
        }
        out.row_mut(i).copy_from_slice(&acc);
    }
    (out, low)
}

pub(crate) fn stiffness_neighbors(man: &DiscreteManifold) -> impl Fn(usize) -> Vec<usize> + '_ {
    move |i| man.stiffness().row(i).filter(|&(j, v)| j != i && v != 0.0).map(|(j, _)| j).collect()
}

/// Number of singular values of the vertex-by-ambient matrix above
/// `tol` times the largest.
pub fn numerical_rank(u: &VectorField, tol: f64) -> usize {
    let a = DMatrix::<f64>::from_row_slice(u.vertex_count(), u.dim(), u.data());
    let s = a.singular_values();
    let top = s.max();
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * top).count()
}

/// Effective target dimension of the final map of an optimizer run.
pub fn stabilization_probe(man: &DiscreteManifold, trace: &OptimizeTrace, svd_tol: f64) -> Result<usize> {
    man.check_field(trace.final_map.field())?;
    if !(svd_tol > 0.0 && svd_tol < 1.0) {
        return invalid("svd_tol must lie in (0, 1)");
    }
    Ok(numerical_rank(trace.final_map.field(), svd_tol))
}

/// One evaluation of the fixed-point map at a normalized density.
pub(crate) struct Eval {
    pub f: f64,
    pub gap: f64,
    /// Candidate density `e(û)/λ` (unnormalized).
    pub cand: Vec<f64>,
    /// `û`, or its harmonic extension for boundary runs.
    pub map: VectorField,
    pub harmonicity: Option<f64>,
}

enum Target {
    Volume,
    Boundary(DirichletToNeumann),
}

/// The damped fixed-point iteration, one accepted step per [`Self::step`].
pub struct DensityOptimizer<'a> {
    man: &'a DiscreteManifold,
    target: Target,
    params: OptimizeParams,
    weights: Vec<f64>,
    beta: Vec<f64>,
    eval: Eval,
    eta: f64,
    records: Vec<TraceRecord>,
    best: (f64, Vec<f64>, VectorField),
    since_best: usize,
    stop: Option<StopReason>,
}

impl<'a> DensityOptimizer<'a> {
    /// Maximizes `λ₁(β) Σ m_i β_i`.
    pub fn volume(man: &'a DiscreteManifold, beta0: &DensityField, params: OptimizeParams) -> Result<Self> {
        if beta0.support() != crate::spectral::Support::Volume {
            return invalid("maximize_F1 needs a volume density");
        }
        Self::start(man, Target::Volume, man.mass().to_vec(), beta0.values(), params)
    }

    /// Maximizes `σ₁(ρ) Σ s_i ρ_i`.
    pub fn boundary(man: &'a DiscreteManifold, rho0: &DensityField, params: OptimizeParams) -> Result<Self> {
        if rho0.support() != crate::spectral::Support::Boundary {
            return invalid("maximize_steklov_density needs a boundary density");
        }
        let dtn = DirichletToNeumann::new(man)?;
        Self::start(man, Target::Boundary(dtn), man.boundary_weight().to_vec(), rho0.values(), params)
    }

    fn start(
        man: &'a DiscreteManifold,
        target: Target,
        weights: Vec<f64>,
        values: &[f64],
        params: OptimizeParams,
    ) -> Result<Self> {
        params.validate()?;
        let beta = prepare(&weights, values, params.floor)?;
        let eval = evaluate(man, &target, &weights, &beta)?;
        let records = vec![TraceRecord {
            iteration: 0,
            f1: eval.f,
            gap: eval.gap,
            beta_change: 0.0,
            map_rank: numerical_rank(&eval.map, params.rank_tol),
            harmonicity_defect: eval.harmonicity,
        }];
        let best = (eval.f, beta.clone(), eval.map.clone());
        let eta = params.eta;
        Ok(Self { man, target, params, weights, beta, eval, eta, records, best, since_best: 0, stop: None })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// The current normalized density values.
    pub fn density(&self) -> &[f64] {
        &self.beta
    }

    /// Takes one accepted step; returns `false` once the run has stopped.
    pub fn step(&mut self) -> Result<bool> {
        if self.stop.is_some() {
            return Ok(false);
        }
        let cand_mass: f64 = self.weights.iter().zip(&self.eval.cand).map(|(w, c)| w * c).sum();
        if !(cand_mass > 0.0) {
            return Err(Error::Divergence { solver: "density optimizer", reason: "candidate density vanishes".into() });
        }
        let mut eta = self.eta;
        let (beta, eval) = loop {
            let mixed: Vec<f64> =
                self.beta.iter().zip(&self.eval.cand).map(|(b, c)| (1.0 - eta) * b + eta * c / cand_mass).collect();
            let beta = prepare(&self.weights, &mixed, self.params.floor)?;
            let eval = evaluate(self.man, &self.target, &self.weights, &beta)?;
            if eval.f >= self.eval.f * (1.0 - DAMPING_TOL) {
                break (beta, eval);
            }
            eta *= 0.5;
            if eta < self.params.min_eta {
                self.stop = Some(StopReason::DampingExhausted);
                return Ok(false);
            }
        };
        let change: f64 = self.weights.iter().zip(beta.iter().zip(&self.beta)).map(|(w, (a, b))| w * (a - b).abs()).sum();
        let iteration = self.records.len();
        self.records.push(TraceRecord {
            iteration,
            f1: eval.f,
            gap: eval.gap,
            beta_change: change,
            map_rank: numerical_rank(&eval.map, self.params.rank_tol),
            harmonicity_defect: eval.harmonicity,
        });
        self.eta = (2.0 * eta).min(self.params.eta);
        if eval.f > self.best.0 * (1.0 + self.params.tol) {
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        if eval.f > self.best.0 {
            self.best = (eval.f, beta.clone(), eval.map.clone());
        }
        self.beta = beta;
        self.eval = eval;
        if change < self.params.tol {
            self.stop = Some(StopReason::BetaChange);
        } else if self.since_best >= self.params.patience {
            self.stop = Some(StopReason::Stagnation);
        } else if iteration >= self.params.max_iters {
            self.stop = Some(StopReason::MaxIterations);
        }
        Ok(self.stop.is_none())
    }

    /// Runs to a stop and returns the best density with the trace.
    pub fn run(mut self) -> Result<(DensityField, OptimizeTrace)> {
        while self.step()? {}
        self.finish()
    }

    pub fn finish(self) -> Result<(DensityField, OptimizeTrace)> {
        let stop = self.stop.unwrap_or(StopReason::MaxIterations);
        let (_, beta, map) = self.best;
        let (density, on_sphere) = match self.target {
            Target::Volume => (DensityField::new(self.man, beta)?, true),
            Target::Boundary(_) => (DensityField::on_boundary(self.man, beta)?, false),
        };
        let map = match self.params.ambient {
            Some(k) => embed(&map, k + 1, self.params.seed)?,
            None => map,
        };
        let final_map = if map.dim() < 2 { SphereMap::new(map.zero_padded(2), on_sphere)? } else { SphereMap::new(map, on_sphere)? };
        let trace = OptimizeTrace { iterations: self.records, final_map, converged: stop == StopReason::BetaChange, stop };
        Ok((density, trace))
    }
}

/// Floors at `floor · mean` on the support of `weights` and rescales to unit mass.
fn prepare(weights: &[f64], values: &[f64], floor: f64) -> Result<Vec<f64>> {
    let wsum: f64 = weights.iter().sum();
    let mass: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return invalid("density has no mass");
    }
    let lo = floor * mass / wsum;
    let floored: Vec<f64> = weights.iter().zip(values).map(|(&w, &v)| if w > 0.0 { v.max(lo) } else { 0.0 }).collect();
    let total: f64 = weights.iter().zip(&floored).map(|(w, v)| w * v).sum();
    Ok(floored.into_iter().map(|v| v / total).collect())
}

fn evaluate(man: &DiscreteManifold, target: &Target, weights: &[f64], beta: &[f64]) -> Result<Eval> {
    match target {
        Target::Volume => volume_eval(man, &DensityField::new(man, beta.to_vec())?),
        Target::Boundary(dtn) => steklov::boundary_eval(man, dtn, &DensityField::on_boundary(man, beta.to_vec())?, weights),
    }
}

/// Requests eigenvalues until the window above `λ_m` is closed.
pub(crate) fn spectrum_through_window<F>(m: usize, mut solve: F) -> Result<crate::spectral::SpectrumResult>
where
    F: FnMut(usize) -> Result<crate::spectral::SpectrumResult>,
{
    let mut count = m + 6;
    loop {
        let s = solve(count)?;
        if s.len() <= m {
            return invalid(format!("only {} eigenvalues available, need index {m}", s.len()));
        }
        let lm = s.eigenvalues[m];
        let top = *s.eigenvalues.last().unwrap();
        if top > lm + CLUSTER_WINDOW * lm.abs() || s.len() < count + 1 {
            return Ok(s);
        }
        count *= 2;
    }
}

fn volume_eval(man: &DiscreteManifold, beta: &DensityField) -> Result<Eval> {
    let s = spectrum_through_window(1, |c| weighted_laplace_spectrum(man, beta, c))?;
    let lambda = s.eigenvalues[1];
    let range = cluster_range(&s.eigenvalues, 1, CLUSTER_WINDOW * lambda);
    let range = range.start.max(1)..range.end;
    let phi = VectorField::from_components(&s.eigenvectors[range].iter().map(|f| f.0.clone()).collect::<Vec<_>>())?;
    let (map, low) = eigen_map(&phi, &s.weights, &stiffness_neighbors(man));
    if low > DEGENERATE_MASS {
        return Err(degenerate("maximize_F1", low, phi.dim()));
    }
    let e = energy_density(man, &map)?;
    let cand = e.0.iter().map(|v| v / lambda).collect();
    let gap = s.eigenvalues.get(2).map_or(f64::NAN, |l2| l2 - lambda);
    Ok(Eval { f: lambda * beta.total_mass(), gap, cand, map, harmonicity: None })
}

pub(crate) fn degenerate(solver: &'static str, low: f64, d: usize) -> Error {
    Error::Divergence {
        solver,
        reason: format!(
            "eigenfunction map of the {d}-dimensional eigenspace vanishes on {:.2}% of the mass (limit {:.0}%)",
            100.0 * low,
            100.0 * DEGENERATE_MASS
        ),
    }
}

/// Composes a map into `R^d` with a random isometric embedding `R^d → R^dim`.
fn embed(u: &VectorField, dim: usize, seed: u64) -> Result<VectorField> {
    let d = u.dim();
    if dim < d {
        return invalid(format!("eigenfunction map has {d} components, more than the requested ambient {dim}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for p in &q {
            let t: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(p).for_each(|(x, y)| *x -= t * y);
        }
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-8 {
            v.iter_mut().for_each(|x| *x /= r);
            q.push(v);
        }
    }
    Ok(VectorField::from_fn(u.vertex_count(), dim, |i| {
        let row = u.row(i);
        (0..dim).map(|c| q.iter().zip(row).map(|(col, x)| col[c] * x).sum()).collect()
    }))
}

/// Runs [`DensityOptimizer::volume`] to a stop.
#[allow(non_snake_case)]
pub fn maximize_F1(
    man: &DiscreteManifold,
    beta0: &DensityField,
    params: &OptimizeParams,
) -> Result<(DensityField, OptimizeTrace)> {
    DensityOptimizer::volume(man, beta0, params.clone())?.run()
}
