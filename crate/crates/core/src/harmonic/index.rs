use super::SphereMap;
use crate::domain::{energy_density, DiscreteManifold, ScalarField, VectorField};
use crate::error::{invalid, Error, Result};
use crate::linalg::{eigenpairs_through, EigenOptions, TripletBuilder};
use crate::spectral::{count_negative_with, PotentialField, SpectralOptions};

/// Eigenvalue counts of a quadratic form against a mass inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    /// `#{λ < −zero_tol}`
    pub negative_count: usize,
    /// `#{|λ| ≤ zero_tol}`
    pub null_count: usize,
    pub zero_tol: f64,
    /// Every eigenvalue computed to settle the counts, ascending.
    pub smallest_eigenvalues: Vec<f64>,
}

impl IndexReport {
    fn from_values(values: Vec<f64>, zero_tol: f64) -> Self {
        Self {
            negative_count: values.iter().filter(|&&x| x < -zero_tol).count(),
            null_count: values.iter().filter(|&&x| x.abs() <= zero_tol).count(),
            zero_tol,
            smallest_eigenvalues: values,
        }
    }
}

/// Orthonormal bases of `T_{u_i} S^k`, one list of `k` ambient vectors per
/// vertex. The coordinate axis closest to `u_i` is dropped and the remaining
/// axes are orthonormalized against `u_i` in order.
pub fn tangent_frames(u: &SphereMap) -> Vec<Vec<Vec<f64>>> {
    let d = u.field().dim();
    u.field()
        .rows()
        .map(|ui| {
            let skip = (0..d).max_by(|&a, &b| ui[a].abs().total_cmp(&ui[b].abs())).unwrap_or(0);
            let mut basis: Vec<Vec<f64>> = vec![ui.to_vec()];
            for axis in (0..d).filter(|&a| a != skip) {
                let mut t = vec![0.0; d];
                t[axis] = 1.0;
                for b in &basis {
                    let c: f64 = b.iter().zip(&t).map(|(x, y)| x * y).sum();
                    t.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
                let r = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                t.iter_mut().for_each(|x| *x /= r);
                basis.push(t);
            }
            basis.remove(0);
            basis
        })
        .collect()
}

fn check_tangential(u: &SphereMap, v: &VectorField) -> Result<()> {
    if v.dim() != u.field().dim() || v.vertex_count() != u.vertex_count() {
        return Err(Error::DimensionMismatch { expected: u.field().data().len(), found: v.data().len() });
    }
    for (i, (ui, vi)) in u.field().rows().zip(v.rows()).enumerate() {
        let t: f64 = ui.iter().zip(vi).map(|(a, b)| a * b).sum();
        if t.abs() > 1e-10 {
            return invalid(format!("variation is not tangential at vertex {i} (⟨u, v⟩ = {t:e})"));
        }
    }
    Ok(())
}

fn stiffness_part(man: &DiscreteManifold, v: &VectorField) -> f64 {
    v.components().iter().map(|c| man.stiffness().quad_form(c)).sum()
}

/// `E''(u)(v, v) = Σ_c v_cᵀ K v_c − Σ_i m_i e(u)_i |v_i|²` for `v ⊥ u`.
pub fn second_variation_apply(man: &DiscreteManifold, u: &SphereMap, v: &VectorField) -> Result<f64> {
    u.require_sphere()?;
    man.check_field(u.field())?;
    check_tangential(u, v)?;
    let e = energy_density(man, u.field())?;
    let pot: f64 = (0..man.vertex_count())
        .map(|i| man.mass()[i] * e.values()[i] * v.row(i).iter().map(|x| x * x).sum::<f64>())
        .sum();
    Ok(stiffness_part(man, v) - pot)
}

/// `II(p)(X, Y) = −⟨X, Y⟩ p` for the unit sphere.
pub fn sphere_second_fundamental_form(p: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
    let c: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    p.iter().map(|q| -c * q).collect()
}

/// The second variation for a target with second fundamental form `ii`:
/// `Σ_c v_cᵀ K v_c − Σ_i m_i ⟨τ_i, II(u_i)(v_i, v_i)⟩`, where
/// `τ_i = Σ_p II(u_i)(∂_p u, ∂_p u)` is averaged over the elements at `i`
/// with the same weights as the energy density.
pub fn second_variation_general<F>(man: &DiscreteManifold, u: &SphereMap, v: &VectorField, ii: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
{
    man.check_field(u.field())?;
    check_tangential(u, v)?;
    let n = man.vertex_count();
    let d = u.field().dim();
    let mut tau = vec![vec![0.0; d]; n];
    for el in man.elements() {
        let du = el.gradient(u.field());
        let share = el.volume / el.vertices().len() as f64;
        for &i in el.vertices() {
            let ui = u.field().row(i);
            for p in 0..3 {
                let xp: Vec<f64> = du.iter().map(|row| row[p]).collect();
                let s = ii(ui, &xp, &xp);
                tau[i].iter_mut().zip(&s).for_each(|(t, q)| *t += share * q);
            }
        }
    }
    let mut curv = 0.0;
    for (i, ti) in tau.iter().enumerate() {
        let vi = v.row(i);
        let s = ii(u.field().row(i), vi, vi);
        // τ_i carries the mass already
        curv += ti.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(stiffness_part(man, v) - curv)
}

/// `ind_E(u)` and its nullity from the Hessian on tangential fields.
pub fn morse_index(man: &DiscreteManifold, u: &SphereMap, zero_tol: f64) -> Result<IndexReport> {
    morse_index_on(man, u, &vec![true; man.vertex_count()], zero_tol)
}

/// `ind_E(u; Ω)`: the Hessian restricted to tangential fields vanishing at
/// every vertex outside `mask`.
pub fn morse_index_on(man: &DiscreteManifold, u: &SphereMap, mask: &[bool], zero_tol: f64) -> Result<IndexReport> {
    u.require_sphere()?;
    man.check_field(u.field())?;
    if mask.len() != man.vertex_count() {
        return Err(Error::DimensionMismatch { expected: man.vertex_count(), found: mask.len() });
    }
    if !(zero_tol > 0.0) {
        return invalid("zero_tol must be positive");
    }
    let k = u.target_dim();
    let mut local = vec![usize::MAX; mask.len()];
    let mut count = 0;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        local[i] = count;
        count += 1;
    }
    if count == 0 {
        return invalid("mask selects no vertices");
    }
    let frames = tangent_frames(u);
    let e = energy_density(man, u.field())?;
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut h = TripletBuilder::new(count * k);
    let mut mass = vec![0.0; count * k];
    for i in 0..man.vertex_count() {
        let li = local[i];
        if li == usize::MAX {
            continue;
        }
        for (j, kij) in man.stiffness().row(i) {
            let lj = local[j];
            if lj == usize::MAX {
                continue;
            }
            for a in 0..k {
                for b in 0..k {
                    let val = kij * dot(&frames[i][a], &frames[j][b]);
                    if val != 0.0 {
                        h.add(li * k + a, lj * k + b, val);
                    }
                }
            }
        }
        for a in 0..k {
            h.add(li * k + a, li * k + a, -man.mass()[i] * e.values()[i]);
            mass[li * k + a] = man.mass()[i];
        }
    }
    let h = h.build();
    let emax = e.values().iter().cloned().fold(0.0, f64::max);
    let opts = EigenOptions::default().with_lower_bound(-emax);
    let pairs = eigenpairs_through(&h, &mass, zero_tol, 16, &opts)?;
    Ok(IndexReport::from_values(pairs.values, zero_tol))
}

/// `ind_S(u)` and `nul_S(u)` from `(K − diag(m_i e(u)_i)) f = ν M f`.
pub fn spectral_index(man: &DiscreteManifold, u: &SphereMap, zero_tol: f64) -> Result<IndexReport> {
    u.require_sphere()?;
    let e = energy_density(man, u.field())?;
    let v = PotentialField::new(man, e.0)?;
    let c = count_negative_with(man, &v, zero_tol, &SpectralOptions::default())?;
    Ok(IndexReport::from_values(c.eigenvalues, zero_tol))
}

/// Index relations between `u : M → S^k` and `i_{k,k'} ∘ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexRelations {
    pub k: usize,
    pub k_prime: usize,
    pub morse: IndexReport,
    pub spectral: IndexReport,
    pub morse_embedded: IndexReport,
    pub spectral_embedded: IndexReport,
    /// `ind_E(u) + (k' − k) ind_S(u)`
    pub predicted_embedded_index: usize,
    /// `nul_E(u) + (k' − k) nul_S(u)`
    pub predicted_embedded_nullity: usize,
}

impl IndexRelations {
    /// `(k + 1) ind_S(u) ≥ ind_E(u)`.
    pub fn lower_bound_holds(&self) -> bool {
        (self.k + 1) * self.spectral.negative_count >= self.morse.negative_count
    }

    pub fn embedding_formula_holds(&self) -> bool {
        self.morse_embedded.negative_count == self.predicted_embedded_index
    }

    pub fn spectral_invariant(&self) -> bool {
        self.spectral.negative_count == self.spectral_embedded.negative_count
            && self.spectral.null_count == self.spectral_embedded.null_count
    }

    pub fn all_hold(&self) -> bool {
        self.lower_bound_holds() && self.embedding_formula_holds() && self.spectral_invariant()
    }
}

pub fn check_index_relations(
    man: &DiscreteManifold,
    u: &SphereMap,
    k_prime: usize,
    zero_tol: f64,
) -> Result<IndexRelations> {
    let k = u.target_dim();
    if k_prime <= k {
        return invalid(format!("k' = {k_prime} must exceed k = {k}"));
    }
    let w = u.embedded(k_prime)?;
    let morse = morse_index(man, u, zero_tol)?;
    let spectral = spectral_index(man, u, zero_tol)?;
    let morse_embedded = morse_index(man, &w, zero_tol)?;
    let spectral_embedded = spectral_index(man, &w, zero_tol)?;
    Ok(IndexRelations {
        k,
        k_prime,
        predicted_embedded_index: morse.negative_count + (k_prime - k) * spectral.negative_count,
        predicted_embedded_nullity: morse.null_count + (k_prime - k) * spectral.null_count,
        morse,
        spectral,
        morse_embedded,
        spectral_embedded,
    })
}

/// Evaluation of `p/(p+3) Σ m_i e_i ψ_i² ≤ ψᵀKψ` over test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma33Report {
    pub local_index: IndexReport,
    /// `k − 2 − ind_E(u; Ω)`
    pub p: i64,
    /// `p ≤ 0`: the inequality makes no claim.
    pub vacuous: bool,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Lemma33Report {
    /// Test functions with `lhs > (1 + slack) rhs`.
    pub fn violations(&self, slack: f64) -> usize {
        if self.vacuous {
            return 0;
        }
        self.lhs.iter().zip(&self.rhs).filter(|(l, r)| **l > (1.0 + slack) * **r).count()
    }

    /// Largest `lhs / rhs` over test functions with `rhs > 0`.
    pub fn worst_ratio(&self) -> f64 {
        self.lhs.iter().zip(&self.rhs).filter(|(_, r)| **r > 0.0).map(|(l, r)| l / r).fold(0.0, f64::max)
    }
}

pub fn lemma33_check(
    man: &DiscreteManifold,
    u: &SphereMap,
    mask: &[bool],
    psi: &[ScalarField],
    zero_tol: f64,
) -> Result<Lemma33Report> {
    let local_index = morse_index_on(man, u, mask, zero_tol)?;
    for (s, f) in psi.iter().enumerate() {
        man.check_scalar(f.values())?;
        if let Some(i) = (0..mask.len()).find(|&i| !mask[i] && f.values()[i] != 0.0) {
            return invalid(format!("test function {s} is nonzero at vertex {i} outside the region"));
        }
    }
    let p = u.target_dim() as i64 - 2 - local_index.negative_count as i64;
    let vacuous = p <= 0;
    let c = if vacuous { 0.0 } else { p as f64 / (p as f64 + 3.0) };
    let e = energy_density(man, u.field())?;
    let mut lhs = Vec::with_capacity(psi.len());
    let mut rhs = Vec::with_capacity(psi.len());
    for f in psi {
        let v = f.values();
        lhs.push(c * (0..v.len()).map(|i| man.mass()[i] * e.values()[i] * v[i] * v[i]).sum::<f64>());
        rhs.push(man.stiffness().quad_form(v));
    }
    Ok(Lemma33Report { local_index, p, vacuous, lhs, rhs })
}
