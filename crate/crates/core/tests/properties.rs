use std::sync::OnceLock;

use proptest::prelude::*;
use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere, dirichlet_energy, energy_density, VectorField};
use sdl_core::harmonic::{gl_energy, gl_gradient, morse_index_on, GLConfig, SphereMap};
use sdl_core::optimize::{balance_defect, certify_upper_bound_sphere, hersch_balance, mobius_apply, MobiusParam, BALANCE_TOL};
use sdl_core::spectral::{
    calibrated_zero_tol, functional_fm, schrodinger_spectrum, steklov_spectrum, weighted_laplace_spectrum, DensityField,
    PotentialField,
};
use sdl_core::DiscreteManifold;

fn sphere() -> &'static DiscreteManifold {
    static S: OnceLock<DiscreteManifold> = OnceLock::new();
    S.get_or_init(|| build_icosphere(2).unwrap())
}

fn coarse_sphere() -> &'static DiscreteManifold {
    static S: OnceLock<DiscreteManifold> = OnceLock::new();
    S.get_or_init(|| build_icosphere(1).unwrap())
}

fn disk() -> &'static DiscreteManifold {
    static D: OnceLock<DiscreteManifold> = OnceLock::new();
    D.get_or_init(|| build_disk_mesh(5).unwrap())
}

fn torus() -> &'static DiscreteManifold {
    static T: OnceLock<DiscreteManifold> = OnceLock::new();
    T.get_or_init(|| build_flat_torus(&[1.0, 1.0], 8).unwrap())
}

/// Density from a few random coefficients of low-degree monomials.
fn smooth_density(man: &DiscreteManifold, a: &[f64]) -> DensityField {
    DensityField::new(
        man,
        man.positions()
            .iter()
            .map(|p| (a[0] * p[0] + a[1] * p[1] + a[2] * p[2] + a[3] * p[0] * p[1] + a[4] * p[2] * p[2]).exp())
            .collect(),
    )
    .unwrap()
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (r > 1e-3).then(|| v.iter().map(|x| x / r).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplace_eigenvalues_scale_inversely(a in prop::collection::vec(-1.0..1.0f64, 5), log_c in -3.0..3.0f64) {
        let s = sphere();
        let beta = smooth_density(s, &a);
        let c = 10f64.powf(log_c);
        let x = weighted_laplace_spectrum(s, &beta, 4).unwrap();
        let y = weighted_laplace_spectrum(s, &beta.scaled(c), 4).unwrap();
        for k in 1..=4 {
            prop_assert!(rel(y.eigenvalues[k] * c, x.eigenvalues[k]) < 1e-10);
        }
        prop_assert!(rel(functional_fm(s, &beta.scaled(c), 2).unwrap(), functional_fm(s, &beta, 2).unwrap()) < 1e-10);
    }

    #[test]
    fn steklov_functional_is_scale_invariant(vals in prop::collection::vec(0.2..3.0f64, 91), log_c in -3.0..3.0f64) {
        let d = disk();
        let rho = DensityField::on_boundary(d, vals[..d.vertex_count()].to_vec()).unwrap();
        let c = 10f64.powf(log_c);
        let g = |r: &DensityField| steklov_spectrum(d, r, 1).unwrap().eigenvalues[1] * r.total_mass();
        prop_assert!(rel(g(&rho.scaled(c)), g(&rho)) < 1e-10);
    }

    #[test]
    fn schrodinger_eigenvalues_decrease_in_the_potential(
        v in prop::collection::vec(-3.0..3.0f64, 42),
        bump in prop::collection::vec(0.0..1.0f64, 42),
    ) {
        let s = coarse_sphere();
        let w: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let x = schrodinger_spectrum(s, &PotentialField::new(s, v).unwrap(), 6).unwrap();
        let y = schrodinger_spectrum(s, &PotentialField::new(s, w).unwrap(), 6).unwrap();
        for (a, b) in x.eigenvalues.iter().zip(&y.eigenvalues) {
            prop_assert!(*a >= *b - 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn gl_gradient_matches_central_differences(
        radii in prop::collection::vec(0.2..2.3f64, 42),
        raw in prop::collection::vec(-1.0..1.0f64, 126),
        dir in prop::collection::vec(-1.0..1.0f64, 126),
        eps in 0.1..0.5f64,
    ) {
        let s = coarse_sphere();
        let cfg = GLConfig::default().with_epsilon(eps);
        let mut data = raw.clone();
        for (row, r) in data.chunks_mut(3).zip(&radii) {
            let n = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            row.iter_mut().for_each(|x| *x *= r / n);
        }
        let u = VectorField::new(3, data).unwrap();
        let g = gl_gradient(s, &u, &cfg).unwrap();
        let analytic: f64 = (0..s.vertex_count())
            .map(|i| s.mass()[i] * g.row(i).iter().zip(&dir[3 * i..3 * i + 3]).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let h = 1e-6;
        let at = |t: f64| {
            let d = u.data().iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            gl_energy(s, &VectorField::new(3, d).unwrap(), &cfg).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{} vs {}", fd, analytic);
    }

    #[test]
    fn quadrature_of_the_energy_density(raw in prop::collection::vec(-2.0..2.0f64, 4 * 91), which in 0usize..3) {
        let man = [coarse_sphere(), disk(), torus()][which];
        let n = man.vertex_count();
        let u = VectorField::new(4, raw[..4 * n].to_vec()).unwrap();
        let e = energy_density(man, &u).unwrap();
        let lhs: f64 = man.mass().iter().zip(e.values()).map(|(m, x)| m * x).sum();
        prop_assert!(rel(lhs, 2.0 * dirichlet_energy(man, &u).unwrap()) < 1e-12);
    }

    #[test]
    fn mobius_maps_preserve_the_sphere(
        x in prop::collection::vec(-1.0..1.0f64, 2..6),
        dir in prop::collection::vec(-1.0..1.0f64, 6),
        r in 0.0..0.99f64,
    ) {
        let d = x.len();
        let (Some(x), Some(yd)) = (unit(x), unit(dir[..d].to_vec())) else { return Ok(()) };
        let y: Vec<f64> = yd.iter().map(|v| r * v).collect();
        let gx = mobius_apply(&MobiusParam::new(y.clone()).unwrap(), &x).unwrap();
        prop_assert!((gx.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        let back = mobius_apply(&MobiusParam::new(y.iter().map(|v| -v).collect()).unwrap(), &gx).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn certified_bound_is_sound(a in prop::collection::vec(-1.5..1.5f64, 5)) {
        let s = sphere();
        let beta = smooth_density(s, &a);
        let (bound, y) = certify_upper_bound_sphere(s, &beta).unwrap();
        prop_assert!(functional_fm(s, &beta, 1).unwrap() <= bound * (1.0 + 1e-12));
        prop_assert!(balance_defect(s, &beta.weights(s), &y).unwrap() <= BALANCE_TOL);
    }

    #[test]
    fn balance_defect_meets_tolerance(w in prop::collection::vec(0.0..1.0f64, 42), spike in 0usize..42, height in 0.0..200.0f64) {
        let s = coarse_sphere();
        let mut w = w;
        w[spike] += height;
        if let Ok(y) = hersch_balance(s, &w) {
            prop_assert!(balance_defect(s, &w, &y).unwrap() <= BALANCE_TOL);
            prop_assert!(y.norm() < 1.0);
        }
    }

    #[test]
    fn local_morse_index_grows_with_the_region(cut_a in 0.0..1.0f64, cut_b in 0.0..1.0f64) {
        let t = torus();
        let tol = calibrated_zero_tol(t).unwrap();
        let u = SphereMap::circle_map(t, 1.0).unwrap();
        let (lo, hi) = if cut_a < cut_b { (cut_a, cut_b) } else { (cut_b, cut_a) };
        let small: Vec<bool> = t.positions().iter().map(|p| p[1] < lo).collect();
        let large: Vec<bool> = t.positions().iter().map(|p| p[1] < hi).collect();
        if small.iter().any(|&m| m) {
            let a = morse_index_on(t, &u, &small, tol).unwrap();
            let b = morse_index_on(t, &u, &large, tol).unwrap();
            prop_assert!(a.negative_count <= b.negative_count);
        }
    }
}
