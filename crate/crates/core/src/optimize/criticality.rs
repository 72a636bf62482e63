use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{cluster_range, eigen_map, spectrum_through_window, stiffness_neighbors, CLUSTER_WINDOW};
use crate::domain::{energy_density, DiscreteManifold, VectorField};
use crate::error::{invalid, Error, Result};
use crate::harmonic::{spectral_index, IndexReport, SphereMap};
use crate::spectral::{schrodinger_spectrum, weighted_laplace_spectrum, DensityField, PotentialField, Support};

/// A combination `u = L Φ` with `Σ_c u_c² ≈ 1`, where `C = LᵀL` solves the
/// least-squares problem `Σ_ab C_ab φ_a φ_b ≈ 1` over symmetric `C`.
#[derive(Debug, Clone)]
pub struct Recombination {
    pub coefficients: DMatrix<f64>,
    /// One component per positive eigenvalue of `C`.
    pub map: VectorField,
    /// `max_i ||u_i|² − 1|` over vertices with positive weight.
    pub residual: f64,
}

pub fn unit_recombination(phi: &VectorField, weights: &[f64]) -> Result<Recombination> {
    let n = phi.vertex_count();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
    }
    let d = phi.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    let mut a = DMatrix::<f64>::zeros(n, pairs.len());
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        let s = weights[i].max(0.0).sqrt();
        let row = phi.row(i);
        for (k, &(p, q)) in pairs.iter().enumerate() {
            a[(i, k)] = s * if p == q { row[p] * row[p] } else { 2.0 * row[p] * row[q] };
        }
        rhs[i] = s;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return invalid("recombination system is singular");
    }
    let x = svd.solve(&rhs, 1e-12 * smax).map_err(|e| Error::InvalidInput(format!("recombination solve: {e}")))?;
    let mut c = DMatrix::<f64>::zeros(d, d);
    for (k, &(p, q)) in pairs.iter().enumerate() {
        c[(p, q)] = x[k];
        c[(q, p)] = x[k];
    }
    let eig = SymmetricEigen::new(c.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k] > 1e-12 * top).collect();
    if keep.is_empty() {
        return invalid("recombination has no positive part");
    }
    let map = VectorField::from_fn(n, keep.len(), |i| {
        let row = phi.row(i);
        keep.iter()
            .map(|&k| eig.eigenvalues[k].sqrt() * (0..d).map(|a| eig.eigenvectors[(a, k)] * row[a]).sum::<f64>())
            .collect()
    });
    let residual = (0..n)
        .filter(|&i| weights[i] > 0.0)
        .map(|i| (map.row(i).iter().map(|v| v * v).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Recombination { coefficients: c, map, residual })
}

fn weighted_norm(mass: &[f64], f: impl Iterator<Item = f64>) -> f64 {
    mass.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct DensityCriticality {
    pub m: usize,
    pub lambda_m: f64,
    pub cluster_dim: usize,
    /// `‖λ_m β − e(û)‖ / ‖e(û)‖`
    pub r1: f64,
    /// Unit-sum-of-squares residual of the best recombination.
    pub r2: f64,
    /// Mass share where `|Φ|` fell below the floor.
    pub low_fraction: f64,
    pub map: SphereMap,
    pub recombined: SphereMap,
    pub spectral_index: IndexReport,
    pub critical: bool,
}

/// Tests `λ_m(β) β = e(û)` and the existence of a unit combination of the
/// `λ_m`-eigenspace, and reports the spectral index of the recombined map.
pub fn criticality_check_density(
    man: &DiscreteManifold,
    beta: &DensityField,
    m: usize,
    tol: f64,
) -> Result<DensityCriticality> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    if beta.support() != Support::Volume {
        return invalid("criticality check needs a volume density");
    }
    let s = spectrum_through_window(m, |c| weighted_laplace_spectrum(man, beta, c))?;
    let lambda = s.eigenvalues[m];
    let range = cluster_range(&s.eigenvalues, m, CLUSTER_WINDOW * lambda);
    let range = range.start.max(1)..range.end;
    let cluster_dim = range.len();
    let phi = VectorField::from_components(&s.eigenvectors[range].iter().map(|f| f.0.clone()).collect::<Vec<_>>())?;
    let (u, low_fraction) = eigen_map(&phi, &s.weights, &stiffness_neighbors(man));
    let e = energy_density(man, &u)?;
    let mass = man.mass();
    let num = weighted_norm(mass, beta.values().iter().zip(e.values()).map(|(b, x)| lambda * b - x));
    let r1 = num / weighted_norm(mass, e.values().iter().copied());
    let rec = unit_recombination(&phi, mass)?;
    let recombined = SphereMap::project(&pad(&rec.map))?;
    let spectral = spectral_index(man, &recombined, s.zero_tol)?;
    let critical = r1 < tol && rec.residual < tol && spectral.negative_count <= m;
    Ok(DensityCriticality {
        m,
        lambda_m: lambda,
        cluster_dim,
        r1,
        r2: rec.residual,
        low_fraction,
        map: SphereMap::new(pad(&u), true)?,
        recombined,
        spectral_index: spectral,
        critical,
    })
}

fn pad(u: &VectorField) -> VectorField {
    if u.dim() < 2 {
        u.zero_padded(2)
    } else {
        u.clone()
    }
}

#[derive(Debug, Clone)]
pub struct PotentialCriticality {
    pub m: usize,
    /// `ν_m(V)`
    pub nu_m: f64,
    /// `ν_{m+1}(V)`
    pub nu_m_plus_1: f64,
    pub zero_tol: f64,
    pub cluster_dim: usize,
    /// `‖V − e(û)‖ / ‖V‖` for `û` built from the `ν_{m+1}`-eigenspace.
    pub energy_residual: f64,
    pub unit_residual: f64,
    pub critical: bool,
    pub note: String,
}

/// Tests `ν_{m+1}(V) = 0` and `V = e(û)` with `û` built from the
/// `ν_{m+1}`-eigenspace; `ν_m` is reported alongside.
pub fn criticality_check_potential(
    man: &DiscreteManifold,
    v: &PotentialField,
    m: usize,
    tol: f64,
) -> Result<PotentialCriticality> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let n = man.vertex_count();
    let mut count = (m + 7).min(n);
    let (s, range) = loop {
        let s = schrodinger_spectrum(man, v, count)?;
        if s.len() <= m {
            return invalid(format!("only {} eigenvalues available", s.len()));
        }
        let half = CLUSTER_WINDOW * (s.eigenvalues[m] - s.eigenvalues[m - 1]).max(s.zero_tol);
        let top = *s.eigenvalues.last().unwrap();
        if top > s.eigenvalues[m] + half || s.len() < count || count == n {
            let r = cluster_range(&s.eigenvalues, m, half);
            break (s, r);
        }
        count = (2 * count).min(n);
    };
    let (nu_m, nu_next, zero_tol) = (s.eigenvalues[m - 1], s.eigenvalues[m], s.zero_tol);
    let cluster_dim = range.len();
    let phi = VectorField::from_components(&s.eigenvectors[range].iter().map(|f| f.0.clone()).collect::<Vec<_>>())?;
    let (u, _) = eigen_map(&phi, man.mass(), &stiffness_neighbors(man));
    let e = energy_density(man, &u)?;
    let mass = man.mass();
    let vn = weighted_norm(mass, v.values().iter().copied());
    let den = if vn > 0.0 { vn } else { weighted_norm(mass, e.values().iter().copied()) };
    let energy_residual = weighted_norm(mass, v.values().iter().zip(e.values()).map(|(a, b)| a - b)) / den;
    let unit_residual = unit_recombination(&phi, mass)?.residual;
    let in_null = nu_next.abs() <= zero_tol;
    let note = if nu_next > zero_tol {
        format!("interior of P_{m}, deformation V + t admissible")
    } else if nu_next < -zero_tol {
        format!("outside P_{m}: nu_{} < 0", m + 1)
    } else {
        format!("boundary of P_{m}: nu_{} = 0", m + 1)
    };
    let critical = in_null && energy_residual < tol && unit_residual < tol;
    Ok(PotentialCriticality {
        m,
        nu_m,
        nu_m_plus_1: nu_next,
        zero_tol,
        cluster_dim,
        energy_residual,
        unit_residual,
        critical,
        note,
    })
}
