use super::descent::{descend, dirichlet_change, stiffness_spectral_radius, DescentProblem};
use super::SphereMap;
use crate::domain::{dirichlet_energy, energy_density, Cells, DiscreteManifold, VectorField};
use crate::error::{invalid, Result};

fn tangential_part(u: &[f64], g: &mut [f64], dim: usize) {
    for (ui, gi) in u.chunks(dim).zip(g.chunks_mut(dim)) {
        let t: f64 = ui.iter().zip(gi.iter()).map(|(a, b)| a * b).sum();
        for (gk, uk) in gi.iter_mut().zip(ui) {
            *gk -= t * uk;
        }
    }
}

fn normalize_rows(mut x: Vec<f64>, dim: usize) -> Vec<f64> {
    for row in x.chunks_mut(dim) {
        let r = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= r);
    }
    x
}

/// `(Σ_i m_i |(I − u_i u_iᵀ)(M⁻¹K u)_i|²)^{1/2}`.
pub fn tangential_residual(man: &DiscreteManifold, u: &SphereMap) -> Result<f64> {
    man.check_field(u.field())?;
    let dim = u.field().dim();
    let mut g = man.laplacian(u.field()).into_data();
    tangential_part(u.field().data(), &mut g, dim);
    Ok(g.chunks(dim).zip(man.mass()).map(|(r, m)| m * r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt())
}

struct FlowProblem<'a> {
    man: &'a DiscreteManifold,
    dim: usize,
    metric: Vec<f64>,
}

impl DescentProblem for FlowProblem<'_> {
    fn energy(&self, x: &[f64]) -> f64 {
        dirichlet_energy(self.man, &VectorField::new(self.dim, x.to_vec()).unwrap()).unwrap()
    }

    fn energy_change(&self, x: &[f64], y: &[f64]) -> f64 {
        dirichlet_change(self.man.stiffness(), self.dim, x, y)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.man.laplacian(&VectorField::new(self.dim, x.to_vec()).unwrap()).into_data();
        tangential_part(x, &mut g, self.dim);
        g
    }

    fn metric(&self) -> &[f64] {
        &self.metric
    }

    fn residual(&self, _x: &[f64], g: &[f64]) -> f64 {
        g.iter().zip(&self.metric).map(|(v, m)| m * v * v).sum::<f64>().sqrt()
    }

    fn retract(&self, x: Vec<f64>) -> Vec<f64> {
        normalize_rows(x, self.dim)
    }

    // long projected steps can flip triangles and change the homotopy class
    fn step_cap(&self, g: &[f64]) -> f64 {
        let gmax = g.chunks(self.dim).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        MAX_TURN / gmax.max(f64::MIN_POSITIVE)
    }
}

/// Largest per-vertex displacement of one projected step.
const MAX_TURN: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub map: SphereMap,
    pub iterations: usize,
    pub energy: f64,
    /// Final [`tangential_residual`].
    pub residual: f64,
    pub converged: bool,
    /// Dirichlet energy after every accepted step.
    pub energies: Vec<f64>,
}

/// Projected gradient descent `u ← normalize(u − τ P_u M⁻¹K u)` with
/// backtracking on the Dirichlet energy.
pub fn harmonic_flow(man: &DiscreteManifold, u0: &SphereMap, tol: f64, max_iters: usize) -> Result<FlowResult> {
    u0.require_sphere()?;
    man.check_field(u0.field())?;
    let dim = u0.field().dim();
    let metric: Vec<f64> = man.mass().iter().flat_map(|&m| std::iter::repeat_n(m, dim)).collect();
    let p = FlowProblem { man, dim, metric };
    let tau0 = 1.0 / stiffness_spectral_radius(man.stiffness(), man.mass()).max(f64::MIN_POSITIVE);
    let out = descend(&p, u0.field().data().to_vec(), tol, max_iters, tau0, "harmonic_flow")?;
    let map = SphereMap::project(&VectorField::new(dim, out.x)?)?;
    Ok(FlowResult {
        map,
        iterations: out.iterations,
        energy: out.energy,
        residual: out.residual,
        converged: out.converged,
        energies: out.history,
    })
}

/// `‖M⁻¹K u − e(u) u‖_M / ‖e(u)‖_M`; zero for constant maps.
pub fn harmonic_residual(man: &DiscreteManifold, u: &SphereMap) -> Result<f64> {
    u.require_sphere()?;
    let e = energy_density(man, u.field())?;
    let lap = man.laplacian(u.field());
    let dim = u.field().dim();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..man.vertex_count() {
        let m = man.mass()[i];
        let ei = e.values()[i];
        let r2: f64 = lap.row(i).iter().zip(u.field().row(i)).map(|(l, x)| (l - ei * x).powi(2)).sum();
        num += m * r2;
        den += m * ei * ei;
    }
    let _ = dim;
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

/// Discrete inner-variation defect
/// `∫ ½|du|² div X − ⟨du*du, DX⟩`, normalized by `∫ ½|du|²|div X| + |⟨du*du, DX⟩|`.
///
/// On triangle meshes `X` is an ambient vector field interpolated linearly
/// on each triangle; on grids `X` has one component per axis and all
/// derivatives are central differences.
pub fn stress_defect(man: &DiscreteManifold, u: &VectorField, x: &VectorField) -> Result<f64> {
    man.check_field(u)?;
    man.check_field(x)?;
    let (mut defect, mut scale) = (0.0, 0.0);
    match man.cells() {
        Cells::Triangles(_) => {
            if x.dim() != 3 {
                return invalid("the test field on a triangle mesh needs three ambient components");
            }
            for el in man.elements() {
                let du = el.gradient(u);
                let dx = el.gradient(x);
                // G_pq = Σ_c ∂_p u^c ∂_q u^c,  J_pq = ∂_p X^q
                let mut g = [[0.0; 3]; 3];
                for row in &du {
                    for p in 0..3 {
                        for q in 0..3 {
                            g[p][q] += row[p] * row[q];
                        }
                    }
                }
                let tr_g = g[0][0] + g[1][1] + g[2][2];
                let div = dx[0][0] + dx[1][1] + dx[2][2];
                let mut pair = 0.0;
                for (p, gp) in g.iter().enumerate() {
                    for (q, gpq) in gp.iter().enumerate() {
                        pair += gpq * dx[q][p];
                    }
                }
                defect += el.volume * (0.5 * tr_g * div - pair);
                scale += el.volume * (0.5 * tr_g * div.abs() + pair.abs());
            }
        }
        Cells::Grid { shape, spacing } => {
            let n = shape.len();
            if x.dim() != n {
                return invalid(format!("the test field on a {n}-torus needs {n} components"));
            }
            let res = shape[0];
            let stride: Vec<usize> = (0..n).map(|a| res.pow(a as u32)).collect();
            let cell: f64 = spacing.iter().product();
            let shift = |i: usize, a: usize, s: isize| -> usize {
                let ia = (i / stride[a]) % res;
                let ja = (ia as isize + s).rem_euclid(res as isize) as usize;
                i - ia * stride[a] + ja * stride[a]
            };
            let d = u.dim();
            for i in 0..man.vertex_count() {
                let mut du = vec![vec![0.0; d]; n];
                let mut dx = vec![vec![0.0; n]; n];
                for a in 0..n {
                    let (p, q) = (shift(i, a, 1), shift(i, a, -1));
                    for c in 0..d {
                        du[a][c] = (u.row(p)[c] - u.row(q)[c]) / (2.0 * spacing[a]);
                    }
                    for b in 0..n {
                        dx[a][b] = (x.row(p)[b] - x.row(q)[b]) / (2.0 * spacing[a]);
                    }
                }
                let tr_g: f64 = du.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum();
                let div: f64 = (0..n).map(|a| dx[a][a]).sum();
                let mut pair = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let gab: f64 = du[a].iter().zip(&du[b]).map(|(p, q)| p * q).sum();
                        pair += gab * dx[a][b];
                    }
                }
                defect += cell * (0.5 * tr_g * div - pair);
                scale += cell * (0.5 * tr_g * div.abs() + pair.abs());
            }
        }
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(defect.abs() / scale)
}
