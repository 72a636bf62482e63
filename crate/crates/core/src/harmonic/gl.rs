use super::descent::{descend, dirichlet_change, DescentProblem};
use super::{potential_w, GLConfig, SphereMap};
use crate::domain::{dirichlet_energy, energy_density, DiscreteManifold, ScalarField, VectorField};
use crate::error::{invalid, Error, Result};
use crate::linalg::EnvelopeCholesky;

/// `E_ε(u) = E(u) + Σ m_i W(u_i)/ε²`.
pub fn gl_energy(man: &DiscreteManifold, u: &VectorField, cfg: &GLConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(dirichlet_energy(man, u)? + potential_term(man, u, cfg))
}

fn potential_term(man: &DiscreteManifold, u: &VectorField, cfg: &GLConfig) -> f64 {
    let eps2 = cfg.epsilon * cfg.epsilon;
    u.rows().zip(man.mass()).map(|(row, m)| m * potential_w(row, cfg).0).sum::<f64>() / eps2
}

/// `e_ε(u)_i = ½ e(u)_i + W(u_i)/ε²`.
pub fn gl_energy_density(man: &DiscreteManifold, u: &VectorField, cfg: &GLConfig) -> Result<ScalarField> {
    cfg.validate()?;
    let e = energy_density(man, u)?;
    let eps2 = cfg.epsilon * cfg.epsilon;
    Ok(ScalarField(e.values().iter().zip(u.rows()).map(|(e, row)| 0.5 * e + potential_w(row, cfg).0 / eps2).collect()))
}

/// Gradient of `E_ε` in the lumped-mass metric: `M⁻¹K u + ∇W(u)/ε²`.
pub fn gl_gradient(man: &DiscreteManifold, u: &VectorField, cfg: &GLConfig) -> Result<VectorField> {
    cfg.validate()?;
    man.check_field(u)?;
    let mut g = man.laplacian(u);
    let eps2 = cfg.epsilon * cfg.epsilon;
    for i in 0..u.vertex_count() {
        let (_, dw) = potential_w(u.row(i), cfg);
        for (gi, d) in g.row_mut(i).iter_mut().zip(dw) {
            *gi += d / eps2;
        }
    }
    Ok(g)
}

struct GlProblem<'a> {
    man: &'a DiscreteManifold,
    cfg: GLConfig,
    dim: usize,
    metric: Vec<f64>,
    /// `K + (2/ε²) M`, matching the Hessian of `E_ε` in the radial direction.
    precond: EnvelopeCholesky,
    shift: f64,
}

impl GlProblem<'_> {
    fn field(&self, x: &[f64]) -> VectorField {
        VectorField::new(self.dim, x.to_vec()).expect("length is a multiple of dim")
    }
}

impl DescentProblem for GlProblem<'_> {
    fn energy(&self, x: &[f64]) -> f64 {
        let u = self.field(x);
        dirichlet_energy(self.man, &u).unwrap() + potential_term(self.man, &u, &self.cfg)
    }

    fn energy_change(&self, x: &[f64], y: &[f64]) -> f64 {
        let eps2 = self.cfg.epsilon * self.cfg.epsilon;
        let mut dw = 0.0;
        for ((a, b), m) in x.chunks(self.dim).zip(y.chunks(self.dim)).zip(self.man.mass()) {
            let ra = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let half = self.cfg.delta0 / 2.0;
            dw += m * if (ra - 1.0).abs() <= half && (rb - 1.0).abs() <= half {
                (rb - ra) * (rb + ra - 2.0)
            } else {
                self.cfg.radial(rb).0 - self.cfg.radial(ra).0
            };
        }
        dirichlet_change(self.man.stiffness(), self.dim, x, y) + dw / eps2
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        gl_gradient(self.man, &self.field(x), &self.cfg).unwrap().into_data()
    }

    fn metric(&self) -> &[f64] {
        &self.metric
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let n = self.man.vertex_count();
        let mut out = vec![0.0; g.len()];
        let mut rhs = vec![0.0; n];
        for c in 0..self.dim {
            for i in 0..n {
                rhs[i] = self.man.mass()[i] * g[i * self.dim + c];
            }
            for (i, v) in self.precond.solve(&rhs).into_iter().enumerate() {
                out[i * self.dim + c] = v;
            }
        }
        out
    }

    fn precond_norm2(&self, s: &[f64]) -> f64 {
        let n = self.man.vertex_count();
        let mut sc = vec![0.0; n];
        let mut total = 0.0;
        for c in 0..self.dim {
            for i in 0..n {
                sc[i] = s[i * self.dim + c];
            }
            total += self.man.stiffness().quad_form(&sc)
                + self.shift * sc.iter().zip(self.man.mass()).map(|(v, m)| m * v * v).sum::<f64>();
        }
        total
    }

    fn residual(&self, _x: &[f64], g: &[f64]) -> f64 {
        g.chunks(self.dim).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }
}

/// Result of one relaxation solve.
#[derive(Debug, Clone)]
pub struct GlRun {
    pub u: VectorField,
    pub iterations: usize,
    pub energy: f64,
    pub dirichlet: f64,
    pub potential_term: f64,
    /// `max_i |(M⁻¹K u + ∇W(u)/ε²)_i|`
    pub residual: f64,
    pub converged: bool,
    /// `E_ε` after every accepted step.
    pub energies: Vec<f64>,
}

/// Preconditioned gradient descent for `E_ε` until the vertex-wise gradient norm
/// drops below `tol`. Running out of iterations is reported through
/// `converged = false`, not as an error.
pub fn gl_descent(
    man: &DiscreteManifold,
    u0: &VectorField,
    cfg: &GLConfig,
    tol: f64,
    max_iters: usize,
) -> Result<GlRun> {
    cfg.validate()?;
    man.check_field(u0)?;
    if !u0.is_finite() {
        return invalid("initial field has non-finite entries");
    }
    let dim = u0.dim();
    let metric: Vec<f64> = man.mass().iter().flat_map(|&m| std::iter::repeat_n(m, dim)).collect();
    let shift = 2.0 / (cfg.epsilon * cfg.epsilon);
    let shifted: Vec<f64> = man.mass().iter().map(|m| shift * m).collect();
    let precond = EnvelopeCholesky::factor(&man.stiffness().add_diagonal(&shifted))?;
    let p = GlProblem { man, cfg: *cfg, dim, metric, precond, shift };
    let tau0 = 1.0;
    let out = descend(&p, u0.data().to_vec(), tol, max_iters, tau0, "gl_descent")?;
    let u = p.field(&out.x);
    let dirichlet = dirichlet_energy(man, &u)?;
    let potential = potential_term(man, &u, cfg);
    Ok(GlRun {
        u,
        iterations: out.iterations,
        energy: out.energy,
        dirichlet,
        potential_term: potential,
        residual: out.residual,
        converged: out.converged,
        energies: out.history,
    })
}

/// One row of the continuation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GlStage {
    pub stage: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub dirichlet: f64,
    pub potential_term: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Geometric schedule with ratio ½ from 0.4, ending at `max(0.05, 2h)`.
pub fn default_schedule(man: &DiscreteManifold) -> Vec<f64> {
    let floor = 0.05f64.max(2.0 * man.mesh_size());
    let mut out = Vec::new();
    let mut eps = 0.4;
    while eps > floor * (1.0 + 1e-9) {
        out.push(eps);
        eps *= 0.5;
    }
    out.push(floor.min(0.4));
    out
}

/// Warm-started relaxation along a decreasing ε schedule, followed by
/// projection onto the sphere.
pub fn gl_continuation(
    man: &DiscreteManifold,
    u0: &VectorField,
    schedule: &[f64],
    cfg: &GLConfig,
    tol: f64,
    max_iters: usize,
) -> Result<(SphereMap, Vec<GlStage>)> {
    if schedule.is_empty() {
        return invalid("empty epsilon schedule");
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("epsilon schedule must be strictly decreasing");
    }
    let mut u = u0.clone();
    let mut trace = Vec::with_capacity(schedule.len());
    for (stage, &eps) in schedule.iter().enumerate() {
        let run = gl_descent(man, &u, &cfg.with_epsilon(eps), tol, max_iters)
            .map_err(|e| Error::Stage { stage, source: Box::new(e) })?;
        trace.push(GlStage {
            stage,
            epsilon: eps,
            iterations: run.iterations,
            dirichlet: run.dirichlet,
            potential_term: run.potential_term,
            residual: run.residual,
            converged: run.converged,
        });
        u = run.u;
    }
    let map = SphereMap::project(&u).map_err(|e| Error::Stage { stage: schedule.len() - 1, source: Box::new(e) })?;
    Ok((map, trace))
}
