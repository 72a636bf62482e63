//! Sphere-valued harmonic maps: the constrained gradient flow, the
//! Ginzburg–Landau relaxation `E_ε(u) = ∫ ½|du|² + W(u)/ε²`, residual and
//! stress diagnostics, and Morse / spectral indices.

mod descent;
mod diagnostics;
mod flow;
mod gl;
mod index;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{DiscreteManifold, VectorField};
use crate::error::{invalid, Error, Result};

pub use diagnostics::{degree, monotonicity_diagnostic, MonotonicityTable};
pub use flow::{harmonic_flow, harmonic_residual, stress_defect, tangential_residual, FlowResult};
pub use gl::{
    default_schedule, gl_continuation, gl_descent, gl_energy, gl_energy_density, gl_gradient, GlRun, GlStage,
};
pub use index::{
    check_index_relations, lemma33_check, morse_index, morse_index_on, second_variation_apply,
    second_variation_general, sphere_second_fundamental_form, spectral_index, tangent_frames, IndexRelations,
    IndexReport, Lemma33Report,
};

/// Tolerance on `| |u_i| − 1 |` for maps flagged as lying on the sphere.
pub const SPHERE_TOL: f64 = 1e-12;

/// A map into `R^{k+1}`; when `on_sphere` every row has unit length.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMap {
    field: VectorField,
    on_sphere: bool,
}

impl SphereMap {
    pub fn new(field: VectorField, on_sphere: bool) -> Result<Self> {
        if field.dim() < 2 {
            return invalid("sphere maps need an ambient dimension of at least 2");
        }
        if !field.is_finite() {
            return invalid("map has non-finite entries");
        }
        if on_sphere {
            if let Some((i, r)) = field.row_norms().iter().enumerate().find(|(_, r)| (*r - 1.0).abs() > SPHERE_TOL) {
                return invalid(format!("row {i} has norm {r}, not on the unit sphere"));
            }
        }
        Ok(Self { field, on_sphere })
    }

    /// Normalizes every row onto the unit sphere.
    pub fn project(field: &VectorField) -> Result<Self> {
        let mut out = field.clone();
        for i in 0..out.vertex_count() {
            let row = out.row_mut(i);
            let r = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(r > 1e-300) || !r.is_finite() {
                return Err(Error::Divergence {
                    solver: "projection",
                    reason: format!("row {i} has norm {r} and cannot be projected"),
                });
            }
            row.iter_mut().for_each(|x| *x /= r);
        }
        Self::new(out, true)
    }

    /// `x ↦ x/|x|` restricted to the mesh vertices.
    pub fn identity(man: &DiscreteManifold) -> Result<Self> {
        Self::project(&VectorField::from_fn(man.vertex_count(), 3, |i| man.positions()[i].to_vec()))
    }

    pub fn constant(n: usize, direction: &[f64]) -> Result<Self> {
        Self::project(&VectorField::from_fn(n, direction.len(), |_| direction.to_vec()))
    }

    /// `x ↦ (cos 2πx₀/L, sin 2πx₀/L, 0)` on a torus with first side length `L`.
    pub fn circle_map(man: &DiscreteManifold, period: f64) -> Result<Self> {
        let w = 2.0 * std::f64::consts::PI / period;
        Self::project(&VectorField::from_fn(man.vertex_count(), 3, |i| {
            let x = man.positions()[i][0];
            vec![(w * x).cos(), (w * x).sin(), 0.0]
        }))
    }

    /// Identity perturbed by independent normal noise of the given amplitude
    /// and projected back to the sphere.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = self.field.clone();
        for x in f.data_mut() {
            *x += amplitude * standard_normal(&mut rng);
        }
        Self::project(&f)
    }

    /// The sphere `k` of `u : M → S^k ⊂ R^{k+1}`.
    pub fn target_dim(&self) -> usize {
        self.field.dim() - 1
    }

    pub fn on_sphere(&self) -> bool {
        self.on_sphere
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn into_field(self) -> VectorField {
        self.field
    }

    pub fn vertex_count(&self) -> usize {
        self.field.vertex_count()
    }

    /// `i_{k,k'} ∘ u`: the same map composed with the totally geodesic
    /// inclusion `S^k ⊂ S^{k'}`.
    pub fn embedded(&self, k_prime: usize) -> Result<Self> {
        if k_prime < self.target_dim() {
            return invalid(format!("cannot embed S^{} into S^{k_prime}", self.target_dim()));
        }
        Self::new(self.field.zero_padded(k_prime + 1), self.on_sphere)
    }

    pub(crate) fn require_sphere(&self) -> Result<()> {
        if !self.on_sphere {
            return invalid("operation needs a map with unit-length rows");
        }
        Ok(())
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Parameters of the relaxation potential `W` for the unit sphere target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GLConfig {
    pub epsilon: f64,
    /// Tube radius `δ₀`; `W = d²` on the half tube `| |a| − 1 | ≤ δ₀/2`.
    pub delta0: f64,
    /// `W = |a|²` outside the ball of radius `R₀`.
    pub r0: f64,
}

impl Default for GLConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, delta0: 0.5, r0: 2.0 }
    }
}

impl GLConfig {
    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return invalid(format!("epsilon must be positive (got {})", self.epsilon));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return invalid(format!("delta0 must lie in (0, 1) (got {})", self.delta0));
        }
        if !(self.r0 >= 1.0 + self.delta0) {
            return invalid(format!("R0 must be at least 1 + delta0 (got {})", self.r0));
        }
        Ok(())
    }

    fn inner(&self) -> Quintic {
        let d = self.delta0;
        Quintic::new(0.0, 1.0 - d / 2.0, [1.0, 0.0, 0.0], [d * d / 4.0, -d, 2.0])
    }

    fn outer(&self) -> Quintic {
        let d = self.delta0;
        let r = self.r0;
        Quintic::new(1.0 + d / 2.0, r, [d * d / 4.0, d, 2.0], [r * r, 2.0 * r, 2.0])
    }

    /// Radial profile `w(r)` and its derivative, `W(a) = w(|a|)`.
    pub fn radial(&self, r: f64) -> (f64, f64) {
        let d = self.delta0;
        if (r - 1.0).abs() <= d / 2.0 {
            ((r - 1.0).powi(2), 2.0 * (r - 1.0))
        } else if r >= self.r0 {
            (r * r, 2.0 * r)
        } else if r < 1.0 {
            self.inner().eval(r)
        } else {
            self.outer().eval(r)
        }
    }
}

/// Quintic Hermite interpolant matching value, slope and curvature at both ends.
#[derive(Debug, Clone, Copy)]
struct Quintic {
    start: f64,
    len: f64,
    c: [f64; 6],
}

impl Quintic {
    fn new(r0: f64, r1: f64, a: [f64; 3], b: [f64; 3]) -> Self {
        let l = r1 - r0;
        let (p0, p1, p2) = (a[0], a[1] * l, a[2] * l * l);
        let (q0, q1, q2) = (b[0], b[1] * l, b[2] * l * l);
        let c3 = 10.0 * (q0 - p0) - 6.0 * p1 - 4.0 * q1 - 1.5 * p2 + 0.5 * q2;
        let c4 = -15.0 * (q0 - p0) + 8.0 * p1 + 7.0 * q1 + 1.5 * p2 - q2;
        let c5 = 6.0 * (q0 - p0) - 3.0 * p1 - 3.0 * q1 - 0.5 * p2 + 0.5 * q2;
        Self { start: r0, len: l, c: [p0, p1, 0.5 * p2, c3, c4, c5] }
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        let t = (r - self.start) / self.len;
        let c = &self.c;
        let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let dv = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        (v, dv / self.len)
    }
}

/// `W(a)` and `∇W(a)`; both depend on `|a|` only.
pub fn potential_w(a: &[f64], cfg: &GLConfig) -> (f64, Vec<f64>) {
    let r = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (w, dw) = cfg.radial(r);
    if r == 0.0 {
        return (w, vec![0.0; a.len()]);
    }
    (w, a.iter().map(|x| dw * x / r).collect())
}

/// Sampled range of `W(a)/d(a)²` on the shells `δ₀/2 ≤ d ≤ R₀ − 1` around the
/// sphere, `d = | |a| − 1 |`.
pub fn potential_ratio_bounds(cfg: &GLConfig, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let dmax_out = cfg.r0 - 1.0;
    let dmax_in = 1.0;
    for k in 0..samples {
        let d = if k % 2 == 0 {
            rng.random_range(cfg.delta0 / 2.0..=dmax_out)
        } else {
            rng.random_range(cfg.delta0 / 2.0..=dmax_in)
        };
        let r = if k % 2 == 0 { 1.0 + d } else { 1.0 - d };
        let ratio = cfg.radial(r).0 / (d * d);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_is_c2_at_shell_edges() {
        let cfg = GLConfig::default();
        for r in [1.0 - cfg.delta0 / 2.0, 1.0 + cfg.delta0 / 2.0, cfg.r0] {
            let h = 1e-6;
            let (a, da) = cfg.radial(r - h);
            let (b, db) = cfg.radial(r + h);
            assert!((a - b).abs() < 1e-5);
            assert!((da - db).abs() < 1e-5);
            let (_, d1) = cfg.radial(r - 2.0 * h);
            let (_, d2) = cfg.radial(r + 2.0 * h);
            let left = (da - d1) / h;
            let right = (d2 - db) / h;
            assert!((left - right).abs() < 1e-3, "{r}: {left} vs {right}");
        }
    }

    #[test]
    fn potential_bounds_and_monotonicity() {
        let cfg = GLConfig::default();
        let lo = cfg.delta0.powi(2) / 4.0;
        let mut prev = cfg.radial(0.0).0;
        for k in 1..=1000 {
            let r = k as f64 * (1.0 - cfg.delta0 / 2.0) / 1000.0;
            let w = cfg.radial(r).0;
            assert!(w <= prev + 1e-15 && w >= lo - 1e-15);
            prev = w;
        }
        let mut prev = cfg.radial(1.0 + cfg.delta0 / 2.0).0;
        for k in 1..=1000 {
            let r = 1.0 + cfg.delta0 / 2.0 + k as f64 * (cfg.r0 - 1.0 - cfg.delta0 / 2.0) / 1000.0;
            let w = cfg.radial(r).0;
            assert!(w >= prev - 1e-15 && w <= cfg.r0.powi(2) + 1e-12);
            prev = w;
        }
        assert_eq!(cfg.radial(0.0).1, 0.0);
    }

    #[test]
    fn tube_closed_forms() {
        let cfg = GLConfig::default();
        let (w, g) = potential_w(&[0.0, 0.0, 1.0], &cfg);
        assert_eq!(w, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
        let r = 1.0 + cfg.delta0 / 4.0;
        let a = [r / 3f64.sqrt(); 3];
        let (w, g) = potential_w(&a, &cfg);
        assert!((w - cfg.delta0.powi(2) / 16.0).abs() < 1e-14);
        for (gi, ai) in g.iter().zip(&a) {
            assert!((gi - cfg.delta0 / 2.0 * ai / r).abs() < 1e-14);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GLConfig::default().validate().is_ok());
        assert!(GLConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(GLConfig { delta0: 1.0, ..Default::default() }.validate().is_err());
        assert!(GLConfig { r0: 1.2, ..Default::default() }.validate().is_err());
    }
}
