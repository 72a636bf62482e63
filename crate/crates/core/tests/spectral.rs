use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere};
use sdl_core::linalg::{Backend, EigenOptions};
use sdl_core::spectral::*;
use sdl_core::DiscreteManifold;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn sphere_laplace_oracle() {
    let s = build_icosphere(5).unwrap();
    let r = weighted_laplace_spectrum(&s, &DensityField::constant(&s, 1.0).unwrap(), 8).unwrap();
    assert_eq!(r.eigenvalues[0], 0.0);
    let c0 = &r.eigenvectors[0];
    assert!(c0.values().iter().all(|x| (x - c0.values()[0]).abs() < 1e-14));
    for k in 1..=3 {
        assert!(close(r.eigenvalues[k], 2.0, 0.005), "{:?}", r.eigenvalues);
    }
    for k in 4..=8 {
        assert!(close(r.eigenvalues[k], 6.0, 0.01), "{:?}", r.eigenvalues);
    }
    assert!(r.orthonormality_defect() < 1e-8);
    assert_eq!(&r.groups()[..5], &[0, 1, 1, 1, 2]);
}

#[test]
fn laplace_homogeneity() {
    let s = build_icosphere(2).unwrap();
    let beta = DensityField::new(&s, s.positions().iter().map(|p| 1.0 + 0.5 * p[0] * p[1] + p[2] * p[2]).collect()).unwrap();
    let a = weighted_laplace_spectrum(&s, &beta, 5).unwrap();
    let b = weighted_laplace_spectrum(&s, &beta.scaled(3.7), 5).unwrap();
    for k in 1..=5 {
        assert!(close(b.eigenvalues[k], a.eigenvalues[k] / 3.7, 1e-10));
    }
    let f1 = functional_fm(&s, &beta, 1).unwrap();
    let f2 = functional_fm(&s, &beta.scaled(0.01), 1).unwrap();
    assert!(close(f1, f2, 1e-10));
}

#[test]
fn degenerate_density_keeps_finite_modes() {
    let s = build_icosphere(2).unwrap();
    let beta = DensityField::new(&s, s.positions().iter().map(|p| if p[2] < 0.0 { 1.0 } else { 0.0 }).collect()).unwrap();
    let r = weighted_laplace_spectrum(&s, &beta, 4).unwrap();
    assert_eq!(r.eigenvalues[0], 0.0);
    assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    assert!(r.eigenvalues[1] > 0.0 && r.eigenvalues[1].is_finite());
    assert!(r.orthonormality_defect() < 1e-8);
}

#[test]
fn schrodinger_shift_oracles() {
    let s = build_icosphere(5).unwrap();
    let r = schrodinger_spectrum(&s, &PotentialField::constant(&s, 0.0).unwrap(), 2).unwrap();
    assert_eq!(r.eigenvalues[0], 0.0);
    let r = schrodinger_spectrum(&s, &PotentialField::constant(&s, 2.0).unwrap(), 5).unwrap();
    assert!((r.eigenvalues[0] + 2.0).abs() < 1e-12);
    for k in 1..=3 {
        assert!(r.eigenvalues[k].abs() < 5e-2);
    }
    assert!(close(r.eigenvalues[4], 4.0, 0.02));

    let t = build_flat_torus(&[1.0, 1.0], 64).unwrap();
    let c = 4.0 * PI * PI;
    let r = schrodinger_spectrum(&t, &PotentialField::constant(&t, c).unwrap(), 5).unwrap();
    assert!(close(r.eigenvalues[0], -c, 1e-12));
    for k in 1..=4 {
        assert!(r.eigenvalues[k].abs() < 0.01 * c, "{:?}", r.eigenvalues);
    }
}

#[test]
fn negative_counts() {
    let s = build_icosphere(5).unwrap();
    let zero = count_negative(&s, &PotentialField::constant(&s, 0.0).unwrap(), 0.05).unwrap();
    assert_eq!(zero.negative, 0);
    assert_eq!(zero.near_null, 1);
    let two = count_negative(&s, &PotentialField::constant(&s, 2.0).unwrap(), 0.05).unwrap();
    assert_eq!(two.negative, 1);
    assert_eq!(two.near_null, 3);
    // λ_1 = 2 < 3.5 < λ_4 = 6: the constant and the three coordinate functions
    let c = count_negative(&s, &PotentialField::constant(&s, 3.5).unwrap(), 0.05).unwrap();
    assert_eq!(c.negative, 4);
    // λ_2 = 6 < 9 < λ_3 = 12
    let s3 = build_icosphere(3).unwrap();
    let c = count_negative(&s3, &PotentialField::constant(&s3, 9.0).unwrap(), 0.05).unwrap();
    assert_eq!(c.negative, 9);
}

#[test]
fn pm_membership() {
    let s = build_icosphere(5).unwrap();
    let tol = calibrated_zero_tol(&s).unwrap();
    for m in 1..=3 {
        assert!(membership_pm(&s, &PotentialField::constant(&s, 0.0).unwrap(), m, tol).unwrap());
    }
    assert!(membership_pm(&s, &PotentialField::constant(&s, 2.0).unwrap(), 1, tol).unwrap());
    assert!(!membership_pm(&s, &PotentialField::constant(&s, 3.0).unwrap(), 1, tol).unwrap());
}

#[test]
fn disk_steklov_oracle() {
    let d = build_disk_mesh(20).unwrap();
    let rho = DensityField::boundary_constant(&d, 1.0).unwrap();
    let r = steklov_spectrum(&d, &rho, 4).unwrap();
    assert_eq!(r.eigenvalues[0], 0.0);
    assert!(close(r.eigenvalues[1], 1.0, 0.02) && close(r.eigenvalues[2], 1.0, 0.02), "{:?}", r.eigenvalues);
    assert!(close(r.eigenvalues[3], 2.0, 0.03) && close(r.eigenvalues[4], 2.0, 0.03), "{:?}", r.eigenvalues);
    assert!(r.orthonormality_defect() < 1e-8);
    let r2 = steklov_spectrum(&d, &rho.scaled(2.5), 4).unwrap();
    for k in 1..=4 {
        assert!(close(r2.eigenvalues[k], r.eigenvalues[k] / 2.5, 1e-10));
    }
}

#[test]
fn disk_boundary_schrodinger() {
    let d = build_disk_mesh(12).unwrap();
    let r = boundary_schrodinger_spectrum(&d, &PotentialField::constant(&d, 0.0).unwrap(), 2).unwrap();
    assert!(r.eigenvalues[0].abs() < 1e-10);
    let r = boundary_schrodinger_spectrum(&d, &PotentialField::constant(&d, 1.0).unwrap(), 3).unwrap();
    assert!(r.eigenvalues[0] < 0.0);
    assert!(r.eigenvalues[1].abs() < 0.05, "{:?}", r.eigenvalues);
    let r = boundary_schrodinger_spectrum(&d, &PotentialField::constant(&d, -1.0).unwrap(), 3).unwrap();
    assert!(r.eigenvalues.iter().all(|&x| x > 0.0));
}

#[test]
fn perturbation_form_basics() {
    let s = build_icosphere(3).unwrap();
    let r = weighted_laplace_spectrum(&s, &DensityField::constant(&s, 1.0).unwrap(), 3).unwrap();
    let space = &r.eigenvectors[1..4];
    let a = eigenvalue_perturbation_form(&s, space, &vec![1.5; s.vertex_count()]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { -1.5 } else { 0.0 };
            assert!((a[(i, j)] - want).abs() < 1e-10);
        }
    }
    // mean-zero W against the constant eigenspace
    let w: Vec<f64> = s.positions().iter().map(|p| p[0]).collect();
    let a = eigenvalue_perturbation_form(&s, &r.eigenvectors[..1], &w).unwrap();
    assert!(a[(0, 0)].abs() < 1e-12);
    let bad = vec![r.eigenvectors[1].clone(), r.eigenvectors[1].clone()];
    assert!(eigenvalue_perturbation_form(&s, &bad, &w).is_err());
}

#[test]
fn perturbation_form_matches_finite_difference() {
    let s = build_icosphere(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w: Vec<f64> = (0..s.vertex_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v0 = PotentialField::constant(&s, 0.0).unwrap();
    let base = schrodinger_spectrum(&s, &v0, 4).unwrap();
    let a = eigenvalue_perturbation_form(&s, &base.eigenvectors[1..4], &w).unwrap();
    assert!((a.clone() - a.transpose()).amax() < 1e-14);
    let mut predicted: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    predicted.sort_by(f64::total_cmp);
    let t = 1e-5;
    let vt = PotentialField::new(&s, w.iter().map(|x| t * x).collect()).unwrap();
    let moved = schrodinger_spectrum(&s, &vt, 4).unwrap();
    for (k, p) in predicted.iter().enumerate() {
        let fd = (moved.eigenvalues[k + 1] - base.eigenvalues[k + 1]) / t;
        assert!((fd - p).abs() < 1e-4, "{fd} vs {p}");
    }
}

#[test]
fn schrodinger_monotone_in_potential() {
    let s = build_icosphere(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let v: Vec<f64> = (0..s.vertex_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let vp: Vec<f64> = v.iter().map(|x| x + rng.random_range(0.0..1.0)).collect();
        let a = schrodinger_spectrum(&s, &PotentialField::new(&s, v).unwrap(), 6).unwrap();
        let b = schrodinger_spectrum(&s, &PotentialField::new(&s, vp).unwrap(), 6).unwrap();
        for k in 0..6 {
            assert!(a.eigenvalues[k] >= b.eigenvalues[k] - 1e-10);
        }
    }
}

fn backends_agree(man: &DiscreteManifold) {
    let beta = DensityField::new(man, man.positions().iter().map(|p| 1.2 + p[0]).collect()).unwrap();
    let opts = |b| SpectralOptions { eigen: EigenOptions::default().with_backend(b), zero_tol: Some(1.0) };
    let d = weighted_laplace_spectrum_with(man, &beta, 6, &opts(Backend::Dense)).unwrap();
    let i = weighted_laplace_spectrum_with(man, &beta, 6, &opts(Backend::Iterative)).unwrap();
    for k in 1..=6 {
        assert!(close(i.eigenvalues[k], d.eigenvalues[k], 1e-7));
    }
}

#[test]
fn dense_and_iterative_backends_agree() {
    backends_agree(&build_icosphere(3).unwrap());
    backends_agree(&build_disk_mesh(8).unwrap());
}

#[test]
fn rayleigh_quotients_match_eigenvalues() {
    let s = build_icosphere(3).unwrap();
    let beta = DensityField::new(&s, s.positions().iter().map(|p| 1.0 + 0.7 * p[2]).collect()).unwrap();
    let r = weighted_laplace_spectrum(&s, &beta, 5).unwrap();
    for (f, &l) in r.eigenvectors.iter().zip(&r.eigenvalues) {
        let q = s.stiffness().quad_form(f.values())
            / f.values().iter().zip(&r.weights).map(|(x, w)| w * x * x).sum::<f64>();
        assert!((q - l).abs() < 1e-8 * l.max(1.0));
    }
}
