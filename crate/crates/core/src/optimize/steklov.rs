use std::collections::HashMap;

use super::{cluster_range, degenerate, eigen_map, spectrum_through_window, DensityOptimizer, Eval, OptimizeParams, OptimizeTrace, CLUSTER_WINDOW, DEGENERATE_MASS};
use crate::domain::{DiscreteManifold, VectorField};
use crate::error::{invalid, Result};
use crate::spectral::{
    boundary_schrodinger_spectrum, steklov_spectrum_with, DensityField, DirichletToNeumann, PotentialField,
    SpectralOptions,
};

/// Runs [`DensityOptimizer::boundary`] to a stop: the fixed point of
/// `ρ ← |∂_n û| / σ₁(ρ)` with `û` the normalized `σ₁`-eigenfunction map.
pub fn maximize_steklov_density(
    man: &DiscreteManifold,
    rho0: &DensityField,
    params: &OptimizeParams,
) -> Result<(DensityField, OptimizeTrace)> {
    DensityOptimizer::boundary(man, rho0, params.clone())?.run()
}

fn interior_share(man: &DiscreteManifold, ku: &VectorField) -> f64 {
    let on_bd: Vec<bool> = {
        let mut f = vec![false; man.vertex_count()];
        if let Some(b) = man.boundary() {
            b.vertices.iter().for_each(|&i| f[i] = true);
        }
        f
    };
    let (mut inner, mut total) = (0.0, 0.0);
    for (i, row) in ku.rows().enumerate() {
        let r2: f64 = row.iter().map(|v| v * v).sum();
        total += r2;
        if !on_bd[i] {
            inner += r2;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (inner / total).sqrt()
    }
}

pub(super) fn boundary_eval(
    man: &DiscreteManifold,
    dtn: &DirichletToNeumann,
    rho: &DensityField,
    weights: &[f64],
) -> Result<Eval> {
    let opts = SpectralOptions::default();
    let s = spectrum_through_window(1, |c| steklov_spectrum_with(man, dtn, rho, c, &opts))?;
    let sigma = s.eigenvalues[1];
    let range = cluster_range(&s.eigenvalues, 1, CLUSTER_WINDOW * sigma);
    let range = range.start.max(1)..range.end;
    let bd = dtn.boundary();
    let index: HashMap<usize, usize> = bd.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let phi = VectorField::from_components(
        &s.eigenvectors[range].iter().map(|f| dtn.restrict(f.values())).collect::<Vec<_>>(),
    )?;
    let rw = rho.weights(man);
    let bw: Vec<f64> = bd.iter().map(|&v| rw[v]).collect();
    let neighbors = |k: usize| -> Vec<usize> {
        man.stiffness().row(bd[k]).filter_map(|(j, v)| if v != 0.0 && j != bd[k] { index.get(&j).copied() } else { None }).collect()
    };
    let (ub, low) = eigen_map(&phi, &bw, &neighbors);
    if low > DEGENERATE_MASS {
        return Err(degenerate("maximize_steklov_density", low, phi.dim()));
    }
    let d = ub.dim();
    let mut dn = vec![vec![0.0; d]; bd.len()];
    let mut ext = Vec::with_capacity(d);
    for c in 0..d {
        let trace = ub.component(c);
        for (k, flux) in dtn.apply(&trace).into_iter().enumerate() {
            dn[k][c] = flux / man.boundary_weight()[bd[k]];
        }
        ext.push(dtn.extend(&trace));
    }
    let mut cand = vec![0.0; man.vertex_count()];
    for (k, &v) in bd.iter().enumerate() {
        cand[v] = dn[k].iter().map(|x| x * x).sum::<f64>().sqrt() / sigma;
    }
    let map = VectorField::from_components(&ext)?;
    let harmonicity = interior_share(man, &man.apply_stiffness(&map));
    let gap = s.eigenvalues.get(2).map_or(f64::NAN, |s2| s2 - sigma);
    let mass: f64 = weights.iter().zip(rho.values()).map(|(w, r)| w * r).sum();
    Ok(Eval { f: sigma * mass, gap, cand, map, harmonicity: Some(harmonicity) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaryReport {
    /// `|u_i| ≤ 1 + tol` everywhere and `||u_i| − 1| ≤ tol` on the boundary.
    pub feasible: bool,
    /// `‖(K u)_I‖ / ‖K u‖`
    pub interior_defect: f64,
    /// `max_b |∂_n u_b − |∂_n u_b| u_b| / max_b |∂_n u_b|`
    pub normality_defect: f64,
    /// `ν₁, ν₂` of `∫|df|² − ∫ f² |∂_n u| ds`.
    pub nu: [f64; 2],
    pub zero_tol: f64,
    pub passes: bool,
}

/// Checks the free boundary conditions for `u : M → B^{k+1}`, with the
/// discrete normal derivative `∂_n u_b = (K u)_b / s_b`.
pub fn free_boundary_check(man: &DiscreteManifold, u: &VectorField, tol: f64) -> Result<FreeBoundaryReport> {
    man.check_field(u)?;
    let Some(bd) = man.boundary() else {
        return invalid("free boundary check needs a manifold with boundary");
    };
    let norms = u.row_norms();
    let feasible = norms.iter().all(|&r| r <= 1.0 + tol) && bd.vertices.iter().all(|&b| (norms[b] - 1.0).abs() <= tol);
    let ku = man.apply_stiffness(u);
    let interior_defect = interior_share(man, &ku);
    let s = man.boundary_weight();
    let mut v = vec![0.0; man.vertex_count()];
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for &b in &bd.vertices {
        let dn: Vec<f64> = ku.row(b).iter().map(|x| x / s[b]).collect();
        let r = dn.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dev = dn.iter().zip(u.row(b)).map(|(p, q)| (p - r * q).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(dev);
        scale = scale.max(r);
        v[b] = r;
    }
    let normality_defect = if scale > 0.0 { worst / scale } else { f64::INFINITY };
    let spec = boundary_schrodinger_spectrum(man, &PotentialField::new(man, v)?, 2)?;
    let nu = [spec.eigenvalues[0], spec.eigenvalues[1]];
    let passes = feasible && interior_defect < tol && normality_defect < tol && nu[1].abs() <= spec.zero_tol;
    Ok(FreeBoundaryReport { feasible, interior_defect, normality_defect, nu, zero_tol: spec.zero_tol, passes })
}
