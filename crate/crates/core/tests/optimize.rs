use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere, dirichlet_energy, energy_density, VectorField};
use sdl_core::harmonic::SphereMap;
use sdl_core::optimize::*;
use sdl_core::spectral::{functional_fm, steklov_spectrum, DensityField, PotentialField};

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn mobius_identity_norm_and_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = rng.random_range(2..6);
        let x = random_unit(&mut rng, d);
        let t = rng.random_range(0.0..0.99);
        let y: Vec<f64> = random_unit(&mut rng, d).iter().map(|v| t * v).collect();
        let g0 = mobius_apply(&MobiusParam::zero(d), &x).unwrap();
        assert!(g0.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-15));
        let p = MobiusParam::new(y.clone()).unwrap();
        let gx = mobius_apply(&p, &x).unwrap();
        assert!((norm(&gx) - 1.0).abs() < 1e-12);
        let back = mobius_apply(&MobiusParam::new(y.iter().map(|v| -v).collect()).unwrap(), &gx).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
    }
    assert!(MobiusParam::new(vec![1.0, 0.0, 0.0]).is_err());
    assert!(mobius_apply(&MobiusParam::zero(3), &[2.0, 0.0, 0.0]).is_err());
}

fn bump(man: &sdl_core::DiscreteManifold, c: [f64; 3], width: f64) -> Vec<f64> {
    man.positions()
        .iter()
        .zip(man.mass())
        .map(|(p, m)| {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
            m * (-d2 / (width * width)).exp()
        })
        .collect()
}

#[test]
fn hersch_balance_cases() {
    let man = build_icosphere(3).unwrap();
    let y = hersch_balance(&man, man.mass()).unwrap();
    assert!(y.norm() < 1e-8);

    let w = bump(&man, [0.0, 0.0, 1.0], 0.5);
    let y = hersch_balance(&man, &w).unwrap();
    assert!(balance_defect(&man, &w, &y).unwrap() <= BALANCE_TOL);
    let (yx, yy, yz) = (y.y()[0], y.y()[1], y.y()[2]);
    assert!(yx.abs() < 1e-6 && yy.abs() < 1e-6, "{:?}", y.y());
    assert!(yz < 0.0 && yz > -1.0);
    // bisection on the z-axis alone
    let cz = |t: f64| -> f64 {
        let p = MobiusParam::new(vec![0.0, 0.0, -t]).unwrap();
        let tot: f64 = w.iter().sum();
        man.positions().iter().zip(&w).map(|(x, wi)| wi * mobius_apply(&p, x).unwrap()[2]).sum::<f64>() / tot
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-12);
    assert!(cz(lo) > 0.0 && cz(hi) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cz(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((-yz - lo).abs() < 1e-7, "{yz} vs {lo}");

    let mut w2 = bump(&man, [0.0, 0.0, 1.0], 0.3);
    for (a, b) in w2.iter_mut().zip(bump(&man, [0.0, 0.0, -1.0], 0.3)) {
        *a += b;
    }
    let y = hersch_balance(&man, &w2).unwrap();
    assert!(y.norm() < 1e-8);

    assert!(hersch_balance(&man, &vec![0.0; man.vertex_count()]).is_err());
    let torus = build_flat_torus(&[1.0, 1.0], 8).unwrap();
    assert!(hersch_balance(&torus, torus.mass()).is_err());
}

/// Relative weighted `L²` distance from `b` to the nearest multiple of `prof(t)`,
/// minimized over a grid of `t ∈ (−0.9, 0.9)`.
fn orbit_misfit(w: &[f64], b: &[f64], prof: &dyn Fn(f64) -> Vec<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for k in -900..900 {
        let p = prof(k as f64 / 1000.0);
        let num: f64 = w.iter().zip(b).zip(&p).map(|((w, x), q)| w * x * q).sum();
        let den: f64 = w.iter().zip(&p).map(|(w, q)| w * q * q).sum();
        let c = num / den;
        let r: f64 = w.iter().zip(b).zip(&p).map(|((w, x), q)| w * (x - c * q).powi(2)).sum();
        let n: f64 = w.iter().zip(b).map(|(w, x)| w * x * x).sum();
        best = best.min((r / n).sqrt());
    }
    best
}

fn skewed(man: &sdl_core::DiscreteManifold) -> DensityField {
    DensityField::new(man, man.positions().iter().map(|p| 1.0 + 0.5 * p[2].max(0.0)).collect()).unwrap()
}

#[test]
fn certificate_bounds_on_the_sphere() {
    let man = build_icosphere(4).unwrap();
    let eight_pi = 8.0 * PI;
    let one = DensityField::constant(&man, 1.0).unwrap();
    let (bound, y) = certify_upper_bound_sphere(&man, &one).unwrap();
    let f = functional_fm(&man, &one, 1).unwrap();
    assert!(y.norm() < 1e-8);
    assert!((bound / eight_pi - 1.0).abs() < 0.01);
    assert!(f <= bound && (f / bound - 1.0).abs() < 0.01, "{f} {bound}");

    let lower = DensityField::new(&man, man.positions().iter().map(|p| if p[2] < 0.0 { 1.0 } else { 0.0 }).collect()).unwrap();
    for beta in [skewed(&man), lower] {
        let (bound, _) = certify_upper_bound_sphere(&man, &beta).unwrap();
        let f = functional_fm(&man, &beta, 1).unwrap();
        assert!(bound <= eight_pi * 1.01, "{bound}");
        assert!(f <= bound * (1.0 + 1e-9), "{f} > {bound}");
    }
}

#[test]
fn maximize_from_constant_density() {
    let man = build_icosphere(4).unwrap();
    let params = OptimizeParams { ambient: Some(9), ..Default::default() };
    let one = DensityField::constant(&man, 1.0).unwrap();
    let (beta, trace) = maximize_F1(&man, &one, &params).unwrap();
    assert!(trace.converged);
    assert!((trace.best_f1() / (8.0 * PI) - 1.0).abs() < 0.01);
    let mean = beta.total_mass() / man.volume();
    assert!(beta.values().iter().all(|b| (b / mean - 1.0).abs() < 0.02));
    assert_eq!(trace.final_map.field().dim(), 10);
    assert_eq!(stabilization_probe(&man, &trace, 1e-6).unwrap(), 3);

    let f = functional_fm(&man, &beta, 1).unwrap();
    for c in [1e-3, 7.0, 250.0] {
        assert!((functional_fm(&man, &beta.scaled(c), 1).unwrap() / f - 1.0).abs() < 1e-10);
    }
    // normalized iterates do not see the scale of the start
    let (_, scaled) = maximize_F1(&man, &one.scaled(13.0), &params).unwrap();
    assert_eq!(scaled.iterations.len(), trace.iterations.len());
    for (a, b) in scaled.iterations.iter().zip(&trace.iterations) {
        assert!((a.f1 / b.f1 - 1.0).abs() < 1e-10);
    }

    // fixed-point self-consistency and the bound chain
    let crit = criticality_check_density(&man, &beta, 1, 0.02).unwrap();
    assert!(crit.r1 < 5.0 * params.tol, "{}", crit.r1);
    let two_e = 2.0 * dirichlet_energy(&man, crit.map.field()).unwrap();
    let (bound, _) = certify_upper_bound_sphere(&man, &beta).unwrap();
    let v1 = trace.best_f1();
    assert!(v1 <= two_e * 1.01 && two_e <= bound * 1.01, "{v1} {two_e} {bound}");
}

#[test]
fn maximize_from_skewed_density() {
    let man = build_icosphere(4).unwrap();
    let beta0 = skewed(&man);
    let (beta, trace) = maximize_F1(&man, &beta0, &OptimizeParams::default()).unwrap();
    assert!(trace.is_monotone_within(DAMPING_TOL));
    let first = trace.iterations[0].f1;
    assert!(trace.best_f1() > first);
    assert!((trace.best_f1() / (8.0 * PI) - 1.0).abs() < 0.02);
    // maximizers form the orbit of the constant under Möbius pullback, |dG_y|² ∝ ((1 − t²)/|x + t e_z|²)²
    let prof = |t: f64| -> Vec<f64> {
        man.positions().iter().map(|p| ((1.0 - t * t) / (p[0] * p[0] + p[1] * p[1] + (p[2] + t).powi(2))).powi(2)).collect()
    };
    let before = orbit_misfit(man.mass(), beta0.values(), &prof);
    let after = orbit_misfit(man.mass(), beta.values(), &prof);
    assert!(after < 0.005 && after < 0.1 * before, "{before} {after}");
    assert!(trace.iterations.iter().all(|r| r.map_rank == 3));
    for b in [&beta0, &beta] {
        let (bound, _) = certify_upper_bound_sphere(&man, b).unwrap();
        assert!(functional_fm(&man, b, 1).unwrap() <= bound * 1.02);
    }
}

#[test]
fn density_criticality_reports() {
    let man = build_icosphere(3).unwrap();
    let one = DensityField::constant(&man, 1.0).unwrap();
    let c = criticality_check_density(&man, &one, 1, 0.02).unwrap();
    assert_eq!(c.cluster_dim, 3);
    assert!(c.r1 < 0.02 && c.r2 < 0.02, "{} {}", c.r1, c.r2);
    assert_eq!(c.spectral_index.negative_count, 1);
    assert!(c.critical);

    let strong = DensityField::new(&man, man.positions().iter().map(|p| 1.0 + 3.0 * p[2].max(0.0)).collect()).unwrap();
    let c = criticality_check_density(&man, &strong, 1, 0.02).unwrap();
    assert!(c.r1 > 0.1, "{}", c.r1);
    assert!(!c.critical);

    let torus = build_flat_torus(&[1.0, 1.0], 24).unwrap();
    let c = criticality_check_density(&torus, &DensityField::constant(&torus, 1.0).unwrap(), 1, 0.02).unwrap();
    assert_eq!(c.cluster_dim, 4);
    assert!(c.r1 < 0.02 && c.r2 < 0.02, "{} {}", c.r1, c.r2);
    assert_eq!(c.recombined.field().dim(), 4);
    assert!(c.spectral_index.negative_count <= 1);
}

#[test]
fn potential_criticality_reports() {
    let man = build_icosphere(3).unwrap();
    let c = criticality_check_potential(&man, &PotentialField::constant(&man, 2.0).unwrap(), 1, 0.02).unwrap();
    assert!(c.nu_m_plus_1.abs() <= c.zero_tol);
    assert!(c.nu_m < -c.zero_tol);
    assert!(c.energy_residual < 0.02 && c.unit_residual < 0.02);
    assert!(c.critical);

    let c = criticality_check_potential(&man, &PotentialField::constant(&man, 0.0).unwrap(), 1, 0.02).unwrap();
    assert!(c.nu_m_plus_1 > c.zero_tol);
    assert!(!c.critical);
    assert_eq!(c.note, "interior of P_1, deformation V + t admissible");

    let torus = build_flat_torus(&[1.0, 1.0], 24).unwrap();
    let u = SphereMap::circle_map(&torus, 1.0).unwrap();
    let v = PotentialField::new(&torus, energy_density(&torus, u.field()).unwrap().0).unwrap();
    let c = criticality_check_potential(&torus, &v, 1, 0.02).unwrap();
    assert!(c.nu_m_plus_1.abs() <= c.zero_tol);
    assert!(c.energy_residual < 0.02 && c.unit_residual < 0.02, "{} {}", c.energy_residual, c.unit_residual);
}

#[test]
fn steklov_density_optimization() {
    let disk = build_disk_mesh(12).unwrap();
    let params = OptimizeParams::default();
    let one = DensityField::boundary_constant(&disk, 1.0).unwrap();
    let (rho, trace) = maximize_steklov_density(&disk, &one, &params).unwrap();
    assert!(((trace.iterations[0].f1) / (2.0 * PI) - 1.0).abs() < 0.02);
    assert!((trace.best_f1() / (2.0 * PI) - 1.0).abs() < 0.02);
    let bd = &disk.boundary().unwrap().vertices;
    let mean = rho.total_mass() / disk.boundary_weight().iter().sum::<f64>();
    assert!(bd.iter().all(|&b| (rho.values()[b] / mean - 1.0).abs() < 0.02));
    assert!(trace.iterations.iter().all(|r| r.harmonicity_defect.unwrap() < 1e-10));

    let g = |r: &DensityField| steklov_spectrum(&disk, r, 1).unwrap().eigenvalues[1] * r.total_mass();
    let g1 = g(&rho);
    for c in [0.01, 3.0, 400.0] {
        assert!((g(&rho.scaled(c)) / g1 - 1.0).abs() < 1e-10);
    }

    let report = free_boundary_check(&disk, trace.final_map.field(), 0.02).unwrap();
    assert!(report.interior_defect < 2.0 * params.tol && report.normality_defect < 0.02, "{report:?}");

    let skew: Vec<f64> = disk.positions().iter().map(|p| 1.0 + 0.6 * p[0].max(0.0)).collect();
    let rho0 = DensityField::on_boundary(&disk, skew).unwrap();
    let (rho, trace) = maximize_steklov_density(&disk, &rho0, &params).unwrap();
    assert!(trace.is_monotone_within(DAMPING_TOL));
    assert!(trace.best_f1() > trace.iterations[0].f1);
    // disk maximizers are Poisson kernels (1 − t²)/|x − t e_1|²
    let prof = |t: f64| -> Vec<f64> {
        disk.positions().iter().map(|p| (1.0 - t * t) / ((p[0] - t).powi(2) + p[1] * p[1])).collect()
    };
    let w = disk.boundary_weight();
    let before = orbit_misfit(w, rho0.values(), &prof);
    let after = orbit_misfit(w, rho.values(), &prof);
    assert!(after < 0.005 && after < 0.1 * before, "{before} {after}");
}

#[test]
fn free_boundary_reports() {
    let disk = build_disk_mesh(12).unwrap();
    let id = VectorField::from_fn(disk.vertex_count(), 2, |i| disk.positions()[i][..2].to_vec());
    let r = free_boundary_check(&disk, &id, 0.02).unwrap();
    assert!(r.feasible && r.interior_defect < 0.02 && r.normality_defect < 0.02, "{r:?}");
    assert!(r.nu[1].abs() <= r.zero_tol && r.nu[0] < -r.zero_tol);
    assert!(r.passes);

    let bd = &disk.boundary().unwrap().vertices;
    let mut flat = VectorField::zeros(disk.vertex_count(), 2);
    for &b in bd {
        flat.row_mut(b).copy_from_slice(&disk.positions()[b][..2]);
    }
    let r = free_boundary_check(&disk, &flat, 0.02).unwrap();
    assert!(r.interior_defect > 0.1, "{r:?}");
    assert!(!r.passes);
    assert!(free_boundary_check(&build_icosphere(1).unwrap(), &VectorField::zeros(42, 3), 0.02).is_err());
}

#[test]
fn stabilization_ranks() {
    let torus = build_flat_torus(&[1.0, 1.0], 16).unwrap();
    let u = SphereMap::circle_map(&torus, 1.0).unwrap().embedded(5).unwrap();
    let c = SphereMap::constant(torus.vertex_count(), &[0.0, 1.0, 0.0]).unwrap();
    let rank = |m: &SphereMap| numerical_rank(m.field(), 1e-8);
    assert_eq!(rank(&u), 2);
    assert_eq!(rank(&c), 1);
}
