//! Monotone gradient descent with Barzilai–Borwein trial steps and Armijo
//! backtracking, shared by the Ginzburg–Landau solver and the harmonic flow.

use crate::error::{Error, Result};

pub(crate) trait DescentProblem {
    fn energy(&self, x: &[f64]) -> f64;
    /// `energy(y) − energy(x)`; overridden where the difference can be
    /// formed without cancellation.
    fn energy_change(&self, x: &[f64], y: &[f64]) -> f64 {
        self.energy(y) - self.energy(x)
    }
    /// Gradient in the metric given by [`Self::metric`].
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn metric(&self) -> &[f64];
    fn residual(&self, x: &[f64], g: &[f64]) -> f64;
    fn retract(&self, x: Vec<f64>) -> Vec<f64> {
        x
    }
    /// Search direction for the metric gradient `g`; the identity by default.
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        g.to_vec()
    }
    /// `sᵀ P⁻¹ s` for the preconditioner of [`Self::precondition`].
    fn precond_norm2(&self, s: &[f64]) -> f64 {
        s.iter().zip(self.metric()).map(|(v, m)| m * v * v).sum()
    }
    /// Largest admissible trial step for the current gradient.
    fn step_cap(&self, _g: &[f64]) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step, starting with the initial value and
    /// accumulated from the per-step changes.
    pub history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

pub(crate) fn descend<P: DescentProblem>(
    p: &P,
    x0: Vec<f64>,
    tol: f64,
    max_iters: usize,
    tau0: f64,
    solver: &'static str,
) -> Result<DescentOutcome> {
    let w = p.metric();
    let mut x = p.retract(x0);
    let mut e = p.energy(&x);
    let mut g = p.gradient(&x);
    let mut history = vec![e];
    let mut tau = tau0;
    for it in 0..max_iters {
        let r = p.residual(&x, &g);
        if !r.is_finite() || !e.is_finite() {
            return Err(Error::Divergence { solver, reason: format!("non-finite state at iteration {it}") });
        }
        if r <= tol {
            return Ok(DescentOutcome { x, energy: e, residual: r, iterations: it, converged: true, history });
        }
        let d = p.precondition(&g);
        let slope: f64 = g.iter().zip(&d).zip(w).map(|((a, b), m)| m * a * b).sum();
        tau = tau.min(p.step_cap(&d));
        let mut accepted = None;
        let mut lowest = f64::INFINITY;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - tau * b).collect();
            let trial = p.retract(trial);
            let de = p.energy_change(&x, &trial);
            lowest = lowest.min(de);
            if de <= -ARMIJO * tau * slope {
                accepted = Some((trial, de));
                break;
            }
            tau *= 0.5;
        }
        let Some((xn, de)) = accepted else {
            // rounding-level stagnation is not divergence
            if lowest <= 0.0 || r <= 1e3 * tol {
                return Ok(DescentOutcome { x, energy: e, residual: r, iterations: it, converged: false, history });
            }
            return Err(Error::Divergence {
                solver,
                reason: format!("energy increases for every step down to {tau:e} (residual {r:e})"),
            });
        };
        let gn = p.gradient(&xn);
        let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let sy: f64 = (0..xn.len()).map(|k| w[k] * step[k] * (gn[k] - g[k])).sum();
        let ss = p.precond_norm2(&step);
        tau = if sy > 0.0 { (ss / sy).min(1e6 * tau0) } else { 2.0 * tau };
        x = xn;
        e += de;
        g = gn;
        history.push(e);
    }
    let r = p.residual(&x, &g);
    Ok(DescentOutcome { x, energy: e, residual: r, iterations: max_iters, converged: r <= tol, history })
}

/// Largest eigenvalue of `M⁻¹K` by power iteration.
pub(crate) fn stiffness_spectral_radius(k: &crate::linalg::CsrMatrix, mass: &[f64]) -> f64 {
    let n = mass.len();
    // alternating start vector has a component along the top mode on every builder mesh
    let mut v: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -0.7 } + (i as f64 * 0.618).sin() * 0.1).collect();
    let mut lam = 0.0;
    for _ in 0..60 {
        let kv = k.mul_vec(&v);
        let next: Vec<f64> = kv.iter().zip(mass).map(|(a, m)| a / m).collect();
        let num: f64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().zip(mass).map(|(a, m)| m * a * a).sum();
        lam = num / den;
        let s = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s == 0.0 {
            break;
        }
        v = next.into_iter().map(|x| x / s).collect();
    }
    lam
}

/// `½ yᵀ(K ⊗ I)y − ½ xᵀ(K ⊗ I)x` for vertex-major fields, formed from the step
/// `s = y − x` as `sᵀK x + ½ sᵀK s`.
pub(crate) fn dirichlet_change(k: &crate::linalg::CsrMatrix, dim: usize, x: &[f64], y: &[f64]) -> f64 {
    let n = k.dim();
    let mut total = 0.0;
    let mut xc = vec![0.0; n];
    let mut sc = vec![0.0; n];
    for c in 0..dim {
        for i in 0..n {
            xc[i] = x[i * dim + c];
            sc[i] = y[i * dim + c] - xc[i];
        }
        total += k.bilinear(&sc, &xc) + 0.5 * k.quad_form(&sc);
    }
    total
}
