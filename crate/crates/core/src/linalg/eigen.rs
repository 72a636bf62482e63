//! Lowest eigenpairs of symmetric pencils `A x = λ B x` with `B` diagonal and
//! positive semidefinite.
//!
//! Both backends work with the shifted operator `S = A − σB`, where `σ` sits
//! below a caller-supplied lower bound of the spectrum so that `S` is positive
//! definite. Directions in the kernel of `B` correspond to infinite
//! eigenvalues and never appear in the output.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::EnvelopeCholesky;
use super::sparse::{dot, norm, wdot, CsrMatrix};
use crate::error::{invalid, Error, Result};

/// Pencils up to this size are solved densely under [`Backend::Auto`].
pub const DENSE_CUTOFF: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub backend: Backend,
    /// Relative residual target for the iterative backend.
    pub tol: f64,
    pub max_iters: usize,
    /// A number no larger than the smallest eigenvalue of the pencil.
    pub lower_bound: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { backend: Backend::Auto, tol: 1e-11, max_iters: 3000, lower_bound: 0.0, seed: 0x5eed }
    }
}

impl EigenOptions {
    pub fn with_lower_bound(mut self, lb: f64) -> Self {
        self.lower_bound = lb;
        self
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

/// Ascending eigenvalues with `B`-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖A x − λ B x‖ / ((‖A‖ + |λ| ‖B‖) ‖x‖)` per pair.
    pub residuals: Vec<f64>,
    pub backend: Backend,
}

/// Computes the `count` lowest finite eigenpairs of `A x = λ B x`.
///
/// `null`, when given, must be an exact eigenvector with eigenvalue zero (for
/// instance the constants for a Neumann stiffness matrix). It is returned as
/// the first pair with eigenvalue exactly `0.0` and all other eigenvectors are
/// kept `B`-orthogonal to it.
pub fn lowest_eigenpairs(
    a: &CsrMatrix,
    b: &[f64],
    count: usize,
    null: Option<&[f64]>,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if b.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return invalid("pencil weight must be finite and nonnegative");
    }
    let rank = b.iter().filter(|&&x| x > 0.0).count();
    if rank == 0 {
        return invalid("pencil weight vanishes identically");
    }
    if count == 0 {
        return invalid("eigenpair count must be at least 1");
    }
    let count = count.min(rank);
    if let Some(c) = null {
        if c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
    }

    let backend = match opts.backend {
        Backend::Auto if n <= DENSE_CUTOFF => Backend::Dense,
        Backend::Auto => Backend::Iterative,
        other => other,
    };

    let lb = opts.lower_bound;
    let mut sigma = lb - 0.05 * (1.0 + lb.abs());
    for _attempt in 0..12 {
        let result = match backend {
            Backend::Dense => dense_lowest(a, b, count, null, sigma),
            _ => iterative_lowest(a, b, count, null, sigma, opts),
        };
        match result {
            Err(Error::NotPositiveDefinite { .. }) => {
                sigma -= 2.0 * (1.0 + sigma.abs());
            }
            other => return other,
        }
    }
    Err(Error::InvalidInput(format!("could not find a positive definite shift below {lb}")))
}

/// All eigenpairs up to and including the first eigenvalue above
/// `threshold`, found by doubling the requested count from `start`.
pub fn eigenpairs_through(
    a: &CsrMatrix,
    b: &[f64],
    threshold: f64,
    start: usize,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let rank = b.iter().filter(|&&x| x > 0.0).count();
    let mut count = start.clamp(1, rank.max(1));
    loop {
        let pairs = lowest_eigenpairs(a, b, count, None, opts)?;
        let top = pairs.values.last().copied().unwrap_or(f64::INFINITY);
        if top > threshold || pairs.values.len() < count || count >= rank {
            return Ok(pairs);
        }
        count = (2 * count).min(rank);
    }
}

fn shifted(a: &CsrMatrix, b: &[f64], sigma: f64) -> CsrMatrix {
    let d: Vec<f64> = b.iter().map(|&x| -sigma * x).collect();
    a.add_diagonal(&d)
}

/// Normwise backward error, with `‖·‖_∞` standing in for the matrix norms.
fn relative_residual(a: &CsrMatrix, b: &[f64], a_norm: f64, b_norm: f64, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b.iter().zip(x)).map(|(p, (w, v))| (p - lambda * w * v).powi(2)).sum::<f64>().sqrt();
    r / ((a_norm + lambda.abs() * b_norm) * norm(x) + f64::MIN_POSITIVE)
}

fn b_normalized(b: &[f64], c: &[f64]) -> Vec<f64> {
    let s = wdot(b, c, c).sqrt();
    c.iter().map(|v| v / s).collect()
}

fn project_out(b: &[f64], c_unit: &[f64], x: &mut [f64]) {
    let t = wdot(b, c_unit, x);
    for (xi, ci) in x.iter_mut().zip(c_unit) {
        *xi -= t * ci;
    }
}

fn finish(
    a: &CsrMatrix,
    b: &[f64],
    mut values: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
    null: Option<&[f64]>,
    count: usize,
    backend: Backend,
) -> EigenPairs {
    if let Some(c) = null {
        let c_unit = b_normalized(b, c);
        if !vectors.is_empty() {
            let (drop, overlap) = vectors
                .iter()
                .enumerate()
                .map(|(k, v)| (k, wdot(b, &c_unit, v).abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            // the iterative path has already deflated the null vector
            if overlap > 0.5 {
                values.remove(drop);
                vectors.remove(drop);
            }
        }
        for v in vectors.iter_mut() {
            project_out(b, &c_unit, v);
            let s = wdot(b, v, v).sqrt();
            v.iter_mut().for_each(|x| *x /= s);
        }
        values.insert(0, 0.0);
        vectors.insert(0, c_unit);
    }
    values.truncate(count);
    vectors.truncate(count);
    let a_norm = (0..a.dim()).map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let b_norm = b.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let residuals = values.iter().zip(&vectors).map(|(&l, v)| relative_residual(a, b, a_norm, b_norm, l, v)).collect();
    EigenPairs { values, vectors, residuals, backend }
}

fn dense_lowest(
    a: &CsrMatrix,
    b: &[f64],
    count: usize,
    null: Option<&[f64]>,
    sigma: f64,
) -> Result<EigenPairs> {
    let n = a.dim();
    let mut s = a.to_dense();
    for i in 0..n {
        s[(i, i)] -= sigma * b[i];
    }
    let chol = s.cholesky().ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
    let l = chol.l();
    let mut w = DMatrix::from_diagonal(&DVector::from_iterator(n, b.iter().map(|x| x.sqrt())));
    if !l.solve_lower_triangular_mut(&mut w) {
        return Err(Error::NotPositiveDefinite { pivot: 0, value: 0.0 });
    }
    let c = &w * w.transpose();
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mu_max = eig.eigenvalues[order[0]];
    let take = count + usize::from(null.is_some());
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for &k in order.iter().take(take) {
        let mu = eig.eigenvalues[k];
        if !(mu > mu_max * 1e-13) {
            break;
        }
        let z = eig.eigenvectors.column(k).into_owned();
        let x = l.tr_solve_lower_triangular(&z).ok_or(Error::NotPositiveDefinite { pivot: k, value: 0.0 })?;
        let mut x: Vec<f64> = x.iter().copied().collect();
        let s = wdot(b, &x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
        values.push(sigma + 1.0 / mu);
        vectors.push(x);
    }
    Ok(finish(a, b, values, vectors, null, count, Backend::Dense))
}

/// Shift-and-invert block subspace iteration with Rayleigh–Ritz projection.
fn iterative_lowest(
    a: &CsrMatrix,
    b: &[f64],
    count: usize,
    null: Option<&[f64]>,
    sigma: f64,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let n = a.dim();
    let chol = EnvelopeCholesky::factor(&shifted(a, b, sigma))?;
    let c_unit = null.map(|c| b_normalized(b, c));
    let rank = b.iter().filter(|&&x| x > 0.0).count() - usize::from(null.is_some());
    let want = count - usize::from(null.is_some());
    if want == 0 {
        return Ok(finish(a, b, Vec::new(), Vec::new(), null, count, Backend::Iterative));
    }
    let block = (want + (want / 2).max(10)).min(rank);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> =
        (0..block).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();

    let mut worst = f64::INFINITY;
    for iter in 0..opts.max_iters {
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|xj| {
                let bx: Vec<f64> = b.iter().zip(xj).map(|(w, v)| w * v).collect();
                let mut yj = chol.solve(&bx);
                if let Some(c) = &c_unit {
                    project_out(b, c, &mut yj);
                }
                yj
            })
            .collect();
        y = b_orthonormalize(b, y);
        if y.len() < want {
            return Err(Error::EigenNoConvergence { iterations: iter, residual: f64::INFINITY });
        }
        let ay: Vec<Vec<f64>> = y.iter().map(|v| a.mul_vec(v)).collect();
        let p = y.len();
        let h = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut new_x = Vec::with_capacity(p);
        let mut thetas = Vec::with_capacity(p);
        worst = 0.0f64;
        for (rank_k, &k) in order.iter().enumerate() {
            let coeffs = eig.eigenvectors.column(k);
            let mut v = vec![0.0; n];
            let mut av = vec![0.0; n];
            for (j, cj) in coeffs.iter().enumerate() {
                super::sparse::axpy(*cj, &y[j], &mut v);
                if rank_k < want {
                    super::sparse::axpy(*cj, &ay[j], &mut av);
                }
            }
            let theta = eig.eigenvalues[k];
            if rank_k < want {
                let bv_norm = b.iter().zip(&v).map(|(w, x)| (w * x).powi(2)).sum::<f64>().sqrt();
                let r = av
                    .iter()
                    .zip(b.iter().zip(&v))
                    .map(|(p, (w, x))| (p - theta * w * x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                // the shift sets the scale for eigenvalues near zero
                worst = worst.max(r / (norm(&av) + (theta.abs() + sigma.abs()) * bv_norm + f64::MIN_POSITIVE));
            }
            thetas.push(theta);
            new_x.push(v);
        }
        x = new_x;
        if worst < opts.tol {
            x.truncate(want);
            thetas.truncate(want);
            return Ok(finish(a, b, thetas, x, null, count, Backend::Iterative));
        }
    }
    Err(Error::EigenNoConvergence { iterations: opts.max_iters, residual: worst })
}

/// Orthonormalizes columns in the `B` inner product, discarding directions
/// that are numerically dependent.
fn b_orthonormalize(b: &[f64], y: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let p = y.len();
    let n = b.len();
    let g = DMatrix::from_fn(p, p, |i, j| wdot(b, &y[i], &y[j]));
    let eig = SymmetricEigen::new(g);
    let gmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    for k in order {
        let lam = eig.eigenvalues[k];
        if !(lam > gmax * 1e-24) {
            continue;
        }
        let mut v = vec![0.0; n];
        for (j, cj) in eig.eigenvectors.column(k).iter().enumerate() {
            super::sparse::axpy(*cj / lam.sqrt(), &y[j], &mut v);
        }
        out.push(v);
    }
    // one pass of modified Gram–Schmidt to clean up rounding
    for i in 0..out.len() {
        for j in 0..i {
            let t = wdot(b, &out[j], &out[i]);
            let (head, tail) = out.split_at_mut(i);
            super::sparse::axpy(-t, &head[j], &mut tail[0]);
        }
        let s = wdot(b, &out[i], &out[i]).sqrt();
        out[i].iter_mut().for_each(|v| *v /= s);
    }
    out
}
