//! Weighted Laplace, Schrödinger and Steklov eigenproblems on a
//! [`DiscreteManifold`], with negative-eigenvalue counts and `P_m` membership.
//!
//! Every problem is a symmetric pencil `A f = λ B f` with a diagonal `B`:
//!
//! | problem | `A` | `B` |
//! |---|---|---|
//! | weighted Laplace | `K` | `diag(m_i β_i)` |
//! | Schrödinger | `K − diag(m_i V_i)` | `diag(m_i)` |
//! | Steklov | Schur complement of `K` on the boundary | `diag(s_i ρ_i)` |
//! | boundary Schrödinger | `K − diag(s_i v_i)` | `diag(m_i)` |

mod steklov;

use std::fmt;

use nalgebra::DMatrix;

use crate::domain::{DiscreteManifold, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::linalg::{lowest_eigenpairs, EigenOptions, EigenPairs};

pub use steklov::{
    boundary_schrodinger_spectrum, boundary_schrodinger_spectrum_with, steklov_spectrum, steklov_spectrum_with,
    DirichletToNeumann,
};

/// Relative gap below which neighbouring eigenvalues share a multiplicity group.
pub const MULTIPLICITY_GAP: f64 = 1e-6;

/// Which measure a density is integrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `Σ m_i β_i`
    Volume,
    /// `Σ s_i ρ_i` over boundary vertices
    Boundary,
}

/// Nonnegative per-vertex density with its cached total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
    total_mass: f64,
    support: Support,
}

impl DensityField {
    pub fn new(man: &DiscreteManifold, values: Vec<f64>) -> Result<Self> {
        Self::with_support(man, values, Support::Volume)
    }

    /// A density on `∂M`; entries at interior vertices are ignored.
    pub fn on_boundary(man: &DiscreteManifold, values: Vec<f64>) -> Result<Self> {
        if man.boundary().is_none() {
            return invalid("boundary density on a manifold without boundary");
        }
        Self::with_support(man, values, Support::Boundary)
    }

    fn with_support(man: &DiscreteManifold, values: Vec<f64>, support: Support) -> Result<Self> {
        man.check_scalar(&values)?;
        if let Some(i) = values.iter().position(|b| !(*b >= 0.0) || !b.is_finite()) {
            return invalid(format!("density must be finite and nonnegative (vertex {i}: {})", values[i]));
        }
        let weights = match support {
            Support::Volume => man.mass(),
            Support::Boundary => man.boundary_weight(),
        };
        let total_mass: f64 = weights.iter().zip(&values).map(|(w, b)| w * b).sum();
        if !(total_mass > 0.0) {
            return invalid("density vanishes identically");
        }
        Ok(Self { values, total_mass, support })
    }

    pub fn constant(man: &DiscreteManifold, c: f64) -> Result<Self> {
        Self::new(man, vec![c; man.vertex_count()])
    }

    pub fn boundary_constant(man: &DiscreteManifold, c: f64) -> Result<Self> {
        Self::on_boundary(man, vec![c; man.vertex_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0);
        Self {
            values: self.values.iter().map(|b| b * c).collect(),
            total_mass: self.total_mass * c,
            support: self.support,
        }
    }

    /// Rescaled to unit total mass.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.total_mass)
    }

    /// `β_i ← max(β_i, floor)`.
    pub fn floored(&self, man: &DiscreteManifold, floor: f64) -> Result<Self> {
        Self::with_support(man, self.values.iter().map(|b| b.max(floor)).collect(), self.support)
    }

    /// Per-vertex weights `m_i β_i` (or `s_i ρ_i`) of the right-hand pencil.
    pub fn weights(&self, man: &DiscreteManifold) -> Vec<f64> {
        let w = match self.support {
            Support::Volume => man.mass(),
            Support::Boundary => man.boundary_weight(),
        };
        w.iter().zip(&self.values).map(|(w, b)| w * b).collect()
    }
}

/// Signed per-vertex potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField(Vec<f64>);

impl PotentialField {
    pub fn new(man: &DiscreteManifold, values: Vec<f64>) -> Result<Self> {
        man.check_scalar(&values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("potential must be finite");
        }
        Ok(Self(values))
    }

    pub fn constant(man: &DiscreteManifold, c: f64) -> Result<Self> {
        Self::new(man, vec![c; man.vertex_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    WeightedLaplace,
    Schrodinger,
    Steklov,
    BoundarySchrodinger,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::WeightedLaplace => "weighted_laplace",
            Problem::Schrodinger => "schrodinger",
            Problem::Steklov => "steklov",
            Problem::BoundarySchrodinger => "boundary_schrodinger",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ScalarField>,
    pub residuals: Vec<f64>,
    pub problem: Problem,
    pub zero_tol: f64,
    /// Weights of the right-hand inner product the eigenvectors are orthonormal in.
    pub weights: Vec<f64>,
}

impl SpectrumResult {
    fn from_pairs(pairs: EigenPairs, problem: Problem, zero_tol: f64, weights: Vec<f64>) -> Self {
        Self {
            eigenvalues: pairs.values,
            eigenvectors: pairs.vectors.into_iter().map(ScalarField).collect(),
            residuals: pairs.residuals,
            problem,
            zero_tol,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Group label per eigenvalue, see [`multiplicity_groups`].
    pub fn groups(&self) -> Vec<usize> {
        multiplicity_groups(&self.eigenvalues, MULTIPLICITY_GAP)
    }

    /// Indices of the eigenvalues sharing a group with index `k`.
    pub fn cluster(&self, k: usize) -> std::ops::Range<usize> {
        let g = self.groups();
        let lo = g.iter().position(|&x| x == g[k]).unwrap();
        let hi = g.iter().rposition(|&x| x == g[k]).unwrap() + 1;
        lo..hi
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.eigenvectors.iter().enumerate() {
            for (j, b) in self.eigenvectors.iter().enumerate().take(i + 1) {
                let g: f64 = self.weights.iter().zip(a.values().iter().zip(b.values())).map(|(w, (x, y))| w * x * y).sum();
                worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// Labels consecutive eigenvalues with one group index while their relative
/// gap stays below `rel_gap`.
pub fn multiplicity_groups(values: &[f64], rel_gap: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(values.len());
    let mut g = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            let prev = values[i - 1];
            let scale = prev.abs().max(v.abs());
            if (v - prev).abs() > rel_gap * scale || scale == 0.0 && v != prev {
                g += 1;
            }
        }
        out.push(g);
    }
    out
}

/// Tolerances and backend choice shared by the spectral solvers.
#[derive(Debug, Clone, Default)]
pub struct SpectralOptions {
    pub eigen: EigenOptions,
    /// Overrides the calibrated zero tolerance.
    pub zero_tol: Option<f64>,
}

/// `10 · λ₁ · h²`, with `λ₁` from the unweighted Neumann Laplacian of the
/// same mesh and `h` the mean edge length: ten times the size of the
/// second-order discretization error of the low spectrum.
pub fn calibrated_zero_tol(man: &DiscreteManifold) -> Result<f64> {
    if let Some(&l1) = man.calibration().get() {
        return Ok(10.0 * l1 * man.mesh_size().powi(2));
    }
    let ones = vec![1.0; man.vertex_count()];
    let pairs = lowest_eigenpairs(man.stiffness(), man.mass(), 2, Some(&ones), &EigenOptions::default())?;
    let l1 = pairs.values.get(1).copied().unwrap_or(0.0);
    let _ = man.calibration().set(l1);
    Ok(10.0 * l1 * man.mesh_size().powi(2))
}

fn resolve_zero_tol(man: &DiscreteManifold, opts: &SpectralOptions) -> Result<f64> {
    match opts.zero_tol {
        Some(t) if t > 0.0 => Ok(t),
        Some(t) => invalid(format!("zero_tol must be positive (got {t})")),
        None => calibrated_zero_tol(man),
    }
}

/// `λ_0 = 0 ≤ λ_1 ≤ … ≤ λ_count` of `K f = λ diag(m_i β_i) f`.
pub fn weighted_laplace_spectrum(man: &DiscreteManifold, beta: &DensityField, count: usize) -> Result<SpectrumResult> {
    weighted_laplace_spectrum_with(man, beta, count, &SpectralOptions::default())
}

pub fn weighted_laplace_spectrum_with(
    man: &DiscreteManifold,
    beta: &DensityField,
    count: usize,
    opts: &SpectralOptions,
) -> Result<SpectrumResult> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    if beta.support() != Support::Volume {
        return invalid("weighted Laplace spectrum needs a volume density");
    }
    let zero_tol = resolve_zero_tol(man, opts)?;
    let w = beta.weights(man);
    let ones = vec![1.0; man.vertex_count()];
    let eig = EigenOptions { lower_bound: 0.0, ..opts.eigen.clone() };
    let pairs = lowest_eigenpairs(man.stiffness(), &w, count + 1, Some(&ones), &eig)?;
    Ok(SpectrumResult::from_pairs(pairs, Problem::WeightedLaplace, zero_tol, w))
}

/// `ν_1 ≤ … ≤ ν_count` of `(K − diag(m_i V_i)) f = ν diag(m_i) f`.
pub fn schrodinger_spectrum(man: &DiscreteManifold, v: &PotentialField, count: usize) -> Result<SpectrumResult> {
    schrodinger_spectrum_with(man, v, count, &SpectralOptions::default())
}

pub fn schrodinger_spectrum_with(
    man: &DiscreteManifold,
    v: &PotentialField,
    count: usize,
    opts: &SpectralOptions,
) -> Result<SpectrumResult> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    let zero_tol = resolve_zero_tol(man, opts)?;
    let shift: Vec<f64> = man.mass().iter().zip(v.values()).map(|(m, x)| -m * x).collect();
    let a = man.stiffness().add_diagonal(&shift);
    let vmax = v.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eig = EigenOptions { lower_bound: -vmax.max(0.0), ..opts.eigen.clone() };
    // a constant potential only shifts the Laplace spectrum, so constants stay exact
    let vmin = v.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let pairs = if vmin == vmax {
        let ones = vec![1.0; man.vertex_count()];
        let mut p = lowest_eigenpairs(man.stiffness(), man.mass(), count, Some(&ones), &eig_shifted(&eig, vmax))?;
        p.values.iter_mut().for_each(|x| *x -= vmax);
        p
    } else {
        lowest_eigenpairs(&a, man.mass(), count, None, &eig)?
    };
    Ok(SpectrumResult::from_pairs(pairs, Problem::Schrodinger, zero_tol, man.mass().to_vec()))
}

fn eig_shifted(e: &EigenOptions, c: f64) -> EigenOptions {
    EigenOptions { lower_bound: e.lower_bound + c, ..e.clone() }
}

/// Negative and near-null counts of a Schrödinger operator.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeCount {
    /// `#{ν < −zero_tol}`
    pub negative: usize,
    /// `#{|ν| ≤ zero_tol}`
    pub near_null: usize,
    pub zero_tol: f64,
    /// All eigenvalues that were computed to settle the counts.
    pub eigenvalues: Vec<f64>,
}

/// `N(V)`: the number of eigenvalues of `Δ − V` below `−zero_tol`.
pub fn count_negative(man: &DiscreteManifold, v: &PotentialField, zero_tol: f64) -> Result<NegativeCount> {
    count_negative_with(man, v, zero_tol, &SpectralOptions::default())
}

pub fn count_negative_with(
    man: &DiscreteManifold,
    v: &PotentialField,
    zero_tol: f64,
    opts: &SpectralOptions,
) -> Result<NegativeCount> {
    if !(zero_tol > 0.0) {
        return invalid("zero_tol must be positive");
    }
    let opts = SpectralOptions { zero_tol: Some(zero_tol), ..opts.clone() };
    let n = man.vertex_count();
    let mut count = 8.min(n);
    loop {
        let s = schrodinger_spectrum_with(man, v, count, &opts)?;
        let top = *s.eigenvalues.last().unwrap();
        if top > zero_tol || s.len() < count || count == n {
            let negative = s.eigenvalues.iter().filter(|&&x| x < -zero_tol).count();
            let near_null = s.eigenvalues.iter().filter(|&&x| x.abs() <= zero_tol).count();
            return Ok(NegativeCount { negative, near_null, zero_tol, eigenvalues: s.eigenvalues });
        }
        count = (2 * count).min(n);
    }
}

/// `V ∈ P_m ⟺ ν_{m+1}(V) ≥ −zero_tol`.
pub fn membership_pm(man: &DiscreteManifold, v: &PotentialField, m: usize, zero_tol: f64) -> Result<bool> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let s = schrodinger_spectrum_with(man, v, m + 1, &SpectralOptions { zero_tol: Some(zero_tol), ..Default::default() })?;
    Ok(s.eigenvalues[m] >= -zero_tol)
}

/// `F_m(β) = λ_m(β) Σ m_i β_i`.
pub fn functional_fm(man: &DiscreteManifold, beta: &DensityField, m: usize) -> Result<f64> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let s = weighted_laplace_spectrum(man, beta, m)?;
    Ok(s.eigenvalues[m] * beta.total_mass())
}

/// `A(W)[φ_a, φ_b] = −Σ_i m_i W_i φ_a(i) φ_b(i)` over an `M`-orthonormal
/// eigenspace basis. Its eigenvalues are the one-sided derivatives of the
/// clustered eigenvalues of `Δ − V` along `V → V + tW`.
pub fn eigenvalue_perturbation_form(
    man: &DiscreteManifold,
    eigenspace: &[ScalarField],
    w: &[f64],
) -> Result<DMatrix<f64>> {
    perturbation_form_in(man.mass(), eigenspace, w)
}

/// Same as [`eigenvalue_perturbation_form`] for an arbitrary diagonal inner
/// product `weights`.
pub fn perturbation_form_in(weights: &[f64], eigenspace: &[ScalarField], w: &[f64]) -> Result<DMatrix<f64>> {
    let n = weights.len();
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    if let Some(f) = eigenspace.iter().find(|f| f.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: f.len() });
    }
    let d = eigenspace.len();
    let gram = |a: &[f64], b: &[f64], ww: &dyn Fn(usize) -> f64| -> f64 {
        (0..n).map(|i| weights[i] * ww(i) * a[i] * b[i]).sum()
    };
    for i in 0..d {
        for j in 0..=i {
            let g = gram(eigenspace[i].values(), eigenspace[j].values(), &|_| 1.0);
            if (g - if i == j { 1.0 } else { 0.0 }).abs() > 1e-6 {
                return invalid(format!("eigenspace basis is not orthonormal (entry ({i},{j}) = {g})"));
            }
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| -gram(eigenspace[i].values(), eigenspace[j].values(), &|k| w[k])))
}
