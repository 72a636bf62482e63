use std::f64::consts::PI;

use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere, dirichlet_energy, energy_density};
use sdl_core::{DiscreteManifold, VectorField};

fn rayleigh(man: &DiscreteManifold, f: &[f64]) -> f64 {
    man.stiffness().quad_form(f) / man.integrate(&f.iter().map(|x| x * x).collect::<Vec<_>>())
}

fn identity(man: &DiscreteManifold) -> VectorField {
    VectorField::from_fn(man.vertex_count(), 3, |i| man.positions()[i].to_vec())
}

fn circle_map(man: &DiscreteManifold) -> VectorField {
    VectorField::from_fn(man.vertex_count(), 3, |i| {
        let x = man.positions()[i][0];
        vec![(2.0 * PI * x).cos(), (2.0 * PI * x).sin(), 0.0]
    })
}

#[test]
fn torus_volume_and_fourier_quotient() {
    let t = build_flat_torus(&[1.0, 1.0], 32).unwrap();
    assert!((t.volume() - 1.0).abs() < 1e-12);
    let t = build_flat_torus(&[1.0, 1.0], 64).unwrap();
    let f: Vec<f64> = t.positions().iter().map(|p| (2.0 * PI * p[0]).cos()).collect();
    let q = rayleigh(&t, &f);
    assert!((q / (4.0 * PI * PI) - 1.0).abs() < 0.01, "{q}");
}

#[test]
fn circle_first_eigenvalue() {
    let c = build_flat_torus(&[2.0 * PI], 16).unwrap();
    let f: Vec<f64> = c.positions().iter().map(|p| p[0].cos()).collect();
    assert!((rayleigh(&c, &f) - 1.0).abs() < 0.02);
}

#[test]
fn icosphere_area_and_kernel() {
    let s = build_icosphere(4).unwrap();
    assert!((s.volume() - 4.0 * PI).abs() / (4.0 * PI) < 0.005);
    for k in 1..=4 {
        let s = build_icosphere(k).unwrap();
        let ones = vec![1.0; s.vertex_count()];
        let r = s.stiffness().mul_vec(&ones);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
        assert!(s.stiffness().asymmetry() == 0.0);
    }
}

#[test]
fn icosphere_height_quotient() {
    let s = build_icosphere(5).unwrap();
    let z: Vec<f64> = s.positions().iter().map(|p| p[2]).collect();
    assert!((rayleigh(&s, &z) / 2.0 - 1.0).abs() < 0.005);
}

#[test]
fn disk_boundary_measure() {
    let d = build_disk_mesh(20).unwrap();
    let b = d.boundary().unwrap();
    let total: f64 = b.weights.iter().sum();
    assert!((total - 2.0 * PI).abs() / (2.0 * PI) < 0.01);
    assert!(b.weights.iter().all(|&w| w > 0.0));
    assert_eq!(d.boundary_weight()[0], 0.0);
    for &i in &d.interior_vertices() {
        assert_eq!(d.boundary_weight()[i], 0.0);
    }
    let ones = vec![1.0; d.vertex_count()];
    assert!(d.stiffness().mul_vec(&ones).iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn disk_stiffness_kernel_is_constants() {
    let d = build_disk_mesh(4).unwrap();
    let eig = d.stiffness().to_dense().symmetric_eigenvalues();
    let mut v: Vec<f64> = eig.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    assert!(v[0].abs() < 1e-10);
    assert!(v[1] > 1e-3);
}

#[test]
fn constant_field_has_no_energy() {
    for man in [build_icosphere(2).unwrap(), build_flat_torus(&[1.0, 2.0], 8).unwrap(), build_disk_mesh(3).unwrap()] {
        let u = VectorField::from_fn(man.vertex_count(), 3, |_| vec![0.3, -1.0, 2.0]);
        assert!(dirichlet_energy(&man, &u).unwrap().abs() < 1e-12);
        assert!(energy_density(&man, &u).unwrap().values().iter().all(|e| e.abs() < 1e-12));
    }
}

#[test]
fn identity_energy_and_density_on_sphere() {
    let s = build_icosphere(5).unwrap();
    let u = identity(&s);
    let e = dirichlet_energy(&s, &u).unwrap();
    assert!((e / (4.0 * PI) - 1.0).abs() < 0.01);
    let dens = energy_density(&s, &u).unwrap();
    let worst = dens.values().iter().map(|x| (x / 2.0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn circle_map_energy_on_torus() {
    let t = build_flat_torus(&[1.0, 1.0], 64).unwrap();
    let u = circle_map(&t);
    let e = dirichlet_energy(&t, &u).unwrap();
    assert!((e / (2.0 * PI * PI) - 1.0).abs() < 0.01);
    let dens = energy_density(&t, &u).unwrap();
    let worst = dens.values().iter().map(|x| (x / (4.0 * PI * PI) - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.01);
}

#[test]
fn quadrature_identity_on_every_builder() {
    let meshes = [
        build_icosphere(3).unwrap(),
        build_flat_torus(&[1.0], 12).unwrap(),
        build_flat_torus(&[1.0, 0.5], 10).unwrap(),
        build_flat_torus(&[1.0, 1.0, 2.0], 6).unwrap(),
        build_disk_mesh(6).unwrap(),
    ];
    for man in &meshes {
        let u = VectorField::from_fn(man.vertex_count(), 2, |i| {
            let p = man.positions()[i];
            vec![(3.0 * p[0] + p[1]).sin(), p[2] * p[0] - p[1]]
        });
        let lhs = man.integrate(energy_density(man, &u).unwrap().values());
        let rhs = 2.0 * dirichlet_energy(man, &u).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0), "{}: {lhs} vs {rhs}", man.tag().name);
    }
}

#[test]
fn refinement_converges() {
    let area_err: Vec<f64> = (1..=5).map(|k| (build_icosphere(k).unwrap().volume() - 4.0 * PI).abs()).collect();
    let torus_err: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&r| {
            let t = build_flat_torus(&[1.0, 1.0], r).unwrap();
            let f: Vec<f64> = t.positions().iter().map(|p| (2.0 * PI * (p[0] + p[1])).sin()).collect();
            (rayleigh(&t, &f) - 8.0 * PI * PI).abs()
        })
        .collect();
    for errs in [area_err, torus_err] {
        for w in errs.windows(2) {
            // at least first order under halving of the mesh size
            assert!(w[1] < 0.55 * w[0], "{errs:?}");
        }
    }
}
