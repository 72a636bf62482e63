use std::f64::consts::PI;

use super::gl::gl_energy_density;
use super::{GLConfig, SphereMap};
use crate::domain::{DiscreteManifold, VectorField};
use crate::error::{invalid, Error, Result};

/// Degree of `u : S² → S²` as the total signed solid angle of the image
/// triangles divided by `4π`.
pub fn degree(man: &DiscreteManifold, u: &SphereMap) -> Result<f64> {
    man.check_field(u.field())?;
    if u.field().dim() != 3 {
        return invalid("degree needs a map into S²");
    }
    let Some(tris) = man.triangles() else {
        return invalid("degree needs a triangle mesh");
    };
    let r = |i: usize| -> [f64; 3] {
        let x = u.field().row(i);
        [x[0], x[1], x[2]]
    };
    let mut total = 0.0;
    for t in tris {
        let (a, b, c) = (r(t[0]), r(t[1]), r(t[2]));
        let num = dot(a, cross(b, c));
        let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
        total += 2.0 * num.atan2(den);
    }
    Ok(total / (4.0 * PI))
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Scaled local energies `r^{2−n} Σ_{d(i, x₀) < r} m_i e_ε(u)_i` over graph
/// distance balls.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityTable {
    pub center: usize,
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Smallest `C ≥ 0` with `e^{C r_a²} R(r_a) ≤ e^{C r_b²} R(r_b)` for all `r_a < r_b`.
    pub fitted_c: f64,
    /// Indices `a` with `R(r_{a+1}) < 0.95 R(r_a)`.
    pub dips: Vec<usize>,
}

impl MonotonicityTable {
    pub fn is_nondecreasing_within(&self, rel: f64) -> bool {
        self.ratios.windows(2).all(|w| w[1] >= (1.0 - rel) * w[0])
    }
}

pub fn monotonicity_diagnostic(
    man: &DiscreteManifold,
    u: &VectorField,
    cfg: &GLConfig,
    center: usize,
    radii: &[f64],
) -> Result<MonotonicityTable> {
    if center >= man.vertex_count() {
        return invalid(format!("center vertex {center} out of range"));
    }
    if radii.is_empty() || radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > 0.0) {
        return invalid("radii must be positive and strictly increasing");
    }
    let e = gl_energy_density(man, u, cfg)?;
    let dist = man.graph_distances(center);
    let n = man.dim() as i32;
    let mut ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        let inside: Vec<usize> = (0..dist.len()).filter(|&i| dist[i] < r).collect();
        if inside.len() < 2 {
            return Err(Error::InvalidInput(format!("ball of radius {r} contains fewer than two vertices")));
        }
        let local: f64 = inside.iter().map(|&i| man.mass()[i] * e.values()[i]).sum();
        ratios.push(r.powi(2 - n) * local);
    }
    let mut fitted_c = 0.0f64;
    for a in 0..radii.len() {
        for b in a + 1..radii.len() {
            if ratios[a] > 0.0 && ratios[b] > 0.0 && ratios[b] < ratios[a] {
                fitted_c = fitted_c.max((ratios[a] / ratios[b]).ln() / (radii[b].powi(2) - radii[a].powi(2)));
            }
        }
    }
    let dips = (0..radii.len().saturating_sub(1)).filter(|&a| ratios[a + 1] < 0.95 * ratios[a]).collect();
    Ok(MonotonicityTable { center, radii: radii.to_vec(), ratios, fitted_c, dips })
}
