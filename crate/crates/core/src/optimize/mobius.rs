use crate::domain::{DiscreteManifold, VectorField};
use crate::error::{invalid, Error, Result};
use crate::linalg::sparse::dot;

/// A point `y` of the open unit ball parametrizing `G_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusParam {
    y: Vec<f64>,
}

impl MobiusParam {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return invalid("Möbius parameter must be a finite nonempty vector");
        }
        let r = dot(&y, &y).sqrt();
        if !(r < 1.0) {
            return invalid(format!("Möbius parameter must lie in the open unit ball (|y| = {r})"));
        }
        Ok(Self { y })
    }

    pub fn zero(dim: usize) -> Self {
        Self { y: vec![0.0; dim] }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn norm(&self) -> f64 {
        dot(&self.y, &self.y).sqrt()
    }
}

/// `G_y(x) = (1 − |y|²)(x + y)/|x + y|² + y`.
pub fn mobius_apply(p: &MobiusParam, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.y.len() {
        return Err(Error::DimensionMismatch { expected: p.y.len(), found: x.len() });
    }
    let r = dot(x, x).sqrt();
    if (r - 1.0).abs() > 1e-9 {
        return invalid(format!("point has norm {r}, not on the unit sphere"));
    }
    Ok(apply_raw(&p.y, x))
}

fn apply_raw(y: &[f64], x: &[f64]) -> Vec<f64> {
    let a = 1.0 - dot(y, y);
    let z: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
    let q = dot(&z, &z);
    z.iter().zip(y).map(|(zk, yk)| a * zk / q + yk).collect()
}

/// Adds `w · ∂G_y(x)/∂y` to `jac` (row-major).
fn add_jacobian(y: &[f64], x: &[f64], w: f64, jac: &mut [f64]) {
    let d = y.len();
    let a = 1.0 - dot(y, y);
    let z: Vec<f64> = x.iter().zip(y).map(|(p, q)| p + q).collect();
    let q = dot(&z, &z);
    for k in 0..d {
        for l in 0..d {
            let mut v = -2.0 * z[k] * y[l] / q - 2.0 * a * z[k] * z[l] / (q * q);
            if k == l {
                v += a / q + 1.0;
            }
            jac[k * d + l] += w * v;
        }
    }
}

fn sphere_points(man: &DiscreteManifold) -> Result<Vec<[f64; 3]>> {
    if man.triangles().is_none() {
        return invalid("Möbius balancing needs a triangle mesh of the sphere");
    }
    let pts = man.positions().to_vec();
    if let Some(i) = pts.iter().position(|p| (dot(p, p).sqrt() - 1.0).abs() > 1e-9) {
        return invalid(format!("vertex {i} is not on the unit sphere"));
    }
    Ok(pts)
}

fn center(pts: &[[f64; 3]], w: &[f64], total: f64, y: &[f64]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for (p, &wi) in pts.iter().zip(w) {
        if wi > 0.0 {
            let g = apply_raw(y, p);
            for k in 0..3 {
                c[k] += wi * g[k];
            }
        }
    }
    c.map(|v| v / total)
}

/// `‖Σ_i w_i G_y(x_i)‖ / Σ_i w_i`.
pub fn balance_defect(man: &DiscreteManifold, weight: &[f64], p: &MobiusParam) -> Result<f64> {
    let pts = sphere_points(man)?;
    let total = check_weight(man, weight)?;
    if p.y.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: p.y.len() });
    }
    let c = center(&pts, weight, total, &p.y);
    Ok(dot(&c, &c).sqrt())
}

fn check_weight(man: &DiscreteManifold, weight: &[f64]) -> Result<f64> {
    man.check_scalar(weight)?;
    if weight.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return invalid("balancing weight must be finite and nonnegative");
    }
    let total: f64 = weight.iter().sum();
    if !(total > 0.0) {
        return invalid("balancing weight vanishes identically");
    }
    Ok(total)
}

/// Target for the balanced center of mass.
pub const BALANCE_TOL: f64 = 1e-8;
const BALANCE_ITERS: usize = 200;

/// Finds `y` with `Σ_i w_i G_y(x_i) = 0` by damped Newton steps on the
/// center of mass, falling back to a one-dimensional search along `−center`
/// when no damped step reduces the defect.
pub fn hersch_balance(man: &DiscreteManifold, weight: &[f64]) -> Result<MobiusParam> {
    let pts = sphere_points(man)?;
    let total = check_weight(man, weight)?;
    let norm = |c: &[f64; 3]| dot(c, c).sqrt();
    let mut y = vec![0.0; 3];
    let mut c = center(&pts, weight, total, &y);
    let mut defect = norm(&c);
    for _ in 0..BALANCE_ITERS {
        if defect <= 0.1 * BALANCE_TOL {
            break;
        }
        let mut jac = vec![0.0; 9];
        for (p, &wi) in pts.iter().zip(weight) {
            if wi > 0.0 {
                add_jacobian(&y, p, wi / total, &mut jac);
            }
        }
        let j = nalgebra::Matrix3::from_row_slice(&jac);
        let step = j.lu().solve(&nalgebra::Vector3::new(-c[0], -c[1], -c[2]));
        let mut accepted = false;
        if let Some(s) = step {
            let mut t = 1.0;
            for _ in 0..60 {
                let cand: Vec<f64> = (0..3).map(|k| y[k] + t * s[k]).collect();
                if dot(&cand, &cand) < 1.0 {
                    let cc = center(&pts, weight, total, &cand);
                    if norm(&cc) < defect {
                        y = cand;
                        c = cc;
                        defect = norm(&c);
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if !accepted {
            let (ny, nc) = line_search(&pts, weight, total, &y, &c);
            if !(norm(&nc) < defect) {
                break;
            }
            y = ny;
            c = nc;
            defect = norm(&c);
        }
    }
    if defect > BALANCE_TOL {
        return Err(Error::MaxIterations { solver: "hersch_balance", iterations: BALANCE_ITERS, residual: defect });
    }
    MobiusParam::new(y)
}

/// Golden-section search for the smallest defect along `y − s ĉ`.
fn line_search(pts: &[[f64; 3]], w: &[f64], total: f64, y: &[f64], c: &[f64; 3]) -> (Vec<f64>, [f64; 3]) {
    let cn = dot(c, c).sqrt();
    let d: Vec<f64> = c.iter().map(|v| -v / cn).collect();
    // largest s with |y + s d| < 1
    let yd = dot(y, &d);
    let smax = (-yd + (yd * yd + 1.0 - dot(y, y)).sqrt()) * (1.0 - 1e-12);
    let at = |s: f64| -> (Vec<f64>, [f64; 3]) {
        let p: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + s * b).collect();
        let cc = center(pts, w, total, &p);
        (p, cc)
    };
    let f = |s: f64| {
        let (_, cc) = at(s);
        dot(&cc, &cc)
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, smax);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    at(0.5 * (a + b))
}

/// Upper bound `Σ_a ⟨G_y^a, K G_y^a⟩ = 2E(G_y)` for `λ₁(β) Σ m_i β_i`, with
/// `y` balancing the measure `m_i β_i`.
///
/// Each coordinate of `G_y` is orthogonal to the constants in the
/// `β`-weighted inner product and `Σ_a (G_y^a)² = 1`, so the bound holds
/// exactly for the discrete pencil.
pub fn certify_upper_bound_sphere(
    man: &DiscreteManifold,
    beta: &crate::spectral::DensityField,
) -> Result<(f64, MobiusParam)> {
    let pts = sphere_points(man)?;
    let w = beta.weights(man);
    let p = hersch_balance(man, &w)?;
    let f = VectorField::from_fn(man.vertex_count(), 3, |i| apply_raw(p.y(), &pts[i]));
    let bound = 2.0 * crate::domain::dirichlet_energy(man, &f)?;
    Ok((bound, p))
}
