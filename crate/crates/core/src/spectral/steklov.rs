use nalgebra::DMatrix;

use super::{resolve_zero_tol, DensityField, PotentialField, Problem, SpectralOptions, SpectrumResult, Support};
use crate::domain::{DiscreteManifold, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::linalg::{lowest_eigenpairs, Backend, EigenOptions, EnvelopeCholesky, TripletBuilder};

/// The discrete Dirichlet-to-Neumann map `K_BB − K_BI K_II⁻¹ K_IB` together
/// with the harmonic extension `f_I = −K_II⁻¹ K_IB f_B`.
#[derive(Debug, Clone)]
pub struct DirichletToNeumann {
    boundary: Vec<usize>,
    interior: Vec<usize>,
    n: usize,
    dtn: DMatrix<f64>,
    /// `K_II⁻¹ K_IB`
    ext: DMatrix<f64>,
}

impl DirichletToNeumann {
    pub fn new(man: &DiscreteManifold) -> Result<Self> {
        let bd = man.boundary().ok_or_else(|| Error::InvalidInput("manifold has no boundary".into()))?;
        let boundary = bd.vertices.clone();
        let interior = man.interior_vertices();
        let k = man.stiffness();
        let kbb = k.submatrix(&boundary, &boundary).to_dense();
        let (ext, coupling) = if interior.is_empty() {
            (DMatrix::zeros(0, boundary.len()), DMatrix::zeros(boundary.len(), boundary.len()))
        } else {
            let kii = k.submatrix(&interior, &interior).to_square_csr();
            // K_II is definite for a connected mesh with nonempty boundary
            let chol = EnvelopeCholesky::factor(&kii)?;
            let kib = k.submatrix(&interior, &boundary).to_dense();
            let mut ext = DMatrix::zeros(interior.len(), boundary.len());
            for c in 0..boundary.len() {
                let col: Vec<f64> = kib.column(c).iter().copied().collect();
                let x = chol.solve(&col);
                ext.column_mut(c).copy_from_slice(&x);
            }
            let coupling = kib.transpose() * &ext;
            (ext, coupling)
        };
        let mut dtn = kbb - coupling;
        let sym = 0.5 * (&dtn + dtn.transpose());
        dtn = sym;
        Ok(Self { boundary, interior, n: man.vertex_count(), dtn, ext })
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dtn
    }

    /// DtN applied to a boundary trace (ordered like [`Self::boundary`]).
    pub fn apply(&self, trace: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(trace);
        (&self.dtn * v).iter().copied().collect()
    }

    /// Harmonic extension of a boundary trace to a full vertex field.
    pub fn extend(&self, trace: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&b, &t) in self.boundary.iter().zip(trace) {
            out[b] = t;
        }
        if !self.interior.is_empty() {
            let v = nalgebra::DVector::from_column_slice(trace);
            let fi = &self.ext * v;
            for (&i, x) in self.interior.iter().zip(fi.iter()) {
                out[i] = -x;
            }
        }
        out
    }

    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        self.boundary.iter().map(|&b| f[b]).collect()
    }
}

/// `σ_0 = 0 ≤ σ_1 ≤ … ≤ σ_count` of `DtN f = σ diag(s_i ρ_i) f`; eigenvectors
/// are harmonically extended to the whole mesh.
pub fn steklov_spectrum(man: &DiscreteManifold, rho: &DensityField, count: usize) -> Result<SpectrumResult> {
    steklov_spectrum_with(man, &DirichletToNeumann::new(man)?, rho, count, &SpectralOptions::default())
}

pub fn steklov_spectrum_with(
    man: &DiscreteManifold,
    dtn: &DirichletToNeumann,
    rho: &DensityField,
    count: usize,
    opts: &SpectralOptions,
) -> Result<SpectrumResult> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    if rho.support() != Support::Boundary {
        return invalid("Steklov spectrum needs a boundary density");
    }
    let zero_tol = resolve_zero_tol(man, opts)?;
    let nb = dtn.boundary.len();
    let full_w = rho.weights(man);
    let w: Vec<f64> = dtn.boundary.iter().map(|&b| full_w[b]).collect();
    let mut tb = TripletBuilder::new(nb);
    for i in 0..nb {
        for j in 0..nb {
            tb.add(i, j, dtn.dtn[(i, j)]);
        }
    }
    let a = tb.build();
    let ones = vec![1.0; nb];
    let eig = EigenOptions { lower_bound: 0.0, backend: Backend::Dense, ..opts.eigen.clone() };
    let pairs = lowest_eigenpairs(&a, &w, count + 1, Some(&ones), &eig)?;
    Ok(SpectrumResult {
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors.iter().map(|v| ScalarField(dtn.extend(v))).collect(),
        residuals: pairs.residuals,
        problem: Problem::Steklov,
        zero_tol,
        weights: full_w,
    })
}

/// `ν_1 ≤ … ≤ ν_count` of `(K − diag(s_i v_i)) f = ν diag(m_i) f`, the
/// quadratic form `∫|df|² − ∫ f² v ds` against `∫ f²`.
pub fn boundary_schrodinger_spectrum(man: &DiscreteManifold, v: &PotentialField, count: usize) -> Result<SpectrumResult> {
    boundary_schrodinger_spectrum_with(man, v, count, &SpectralOptions::default())
}

pub fn boundary_schrodinger_spectrum_with(
    man: &DiscreteManifold,
    v: &PotentialField,
    count: usize,
    opts: &SpectralOptions,
) -> Result<SpectrumResult> {
    if count == 0 {
        return invalid("count must be at least 1");
    }
    if man.boundary().is_none() {
        return invalid("manifold has no boundary");
    }
    let zero_tol = resolve_zero_tol(man, opts)?;
    let s = man.boundary_weight();
    let shift: Vec<f64> = s.iter().zip(v.values()).map(|(s, x)| -s * x).collect();
    let a = man.stiffness().add_diagonal(&shift);
    let lb = s
        .iter()
        .zip(v.values())
        .zip(man.mass())
        .map(|((s, x), m)| s * x / m)
        .fold(0.0f64, f64::max);
    let eig = EigenOptions { lower_bound: -lb, ..opts.eigen.clone() };
    let pairs = lowest_eigenpairs(&a, man.mass(), count, None, &eig)?;
    Ok(SpectrumResult::from_pairs(pairs, Problem::BoundarySchrodinger, zero_tol, man.mass().to_vec()))
}
