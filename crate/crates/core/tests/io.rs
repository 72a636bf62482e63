use sdl_core::domain::{build_disk_mesh, build_flat_torus, build_icosphere};
use sdl_core::harmonic::{gl_continuation, GLConfig, SphereMap};
use sdl_core::io::*;
use sdl_core::optimize::{maximize_F1, OptimizeParams};
use sdl_core::spectral::{weighted_laplace_spectrum, DensityField};
use sdl_core::{DiscreteManifold, VectorField};

fn round_trip(man: &DiscreteManifold) -> DiscreteManifold {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.off");
    save_mesh(man, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    load_mesh(&path).unwrap()
}

#[test]
fn mesh_round_trip_is_lossless() {
    for man in [
        build_icosphere(3).unwrap(),
        build_disk_mesh(7).unwrap(),
        build_flat_torus(&[1.0, 2.5], 12).unwrap(),
        build_flat_torus(&[0.3, 0.7, 1.1], 5).unwrap(),
    ] {
        let back = round_trip(&man);
        assert_eq!(back.positions(), man.positions());
        assert_eq!(back.cells(), man.cells());
        assert_eq!(back.tag(), man.tag());
        assert_eq!(back.dim(), man.dim());
        assert_eq!(back.mass(), man.mass());
        assert_eq!(back.boundary(), man.boundary());
        assert_eq!(back.stiffness().to_dense(), man.stiffness().to_dense());
    }
}

#[test]
fn mesh_sidecar_mismatch_is_rejected() {
    let man = build_flat_torus(&[1.0, 1.0], 6).unwrap();
    let mut off = Vec::new();
    write_off(&man, &mut off).unwrap();
    let mut meta = Vec::new();
    write_sidecar(&man, &mut meta).unwrap();
    let meta = String::from_utf8(meta).unwrap();
    assert!(read_off(off.as_slice(), &meta).is_ok());
    assert!(read_off(off.as_slice(), &meta.replace("side_lengths = 1,1", "side_lengths = 1,2")).is_err());
    assert!(read_off(off.as_slice(), &meta.replace("format = sdl-mesh 1", "format = other")).is_err());
}

#[test]
fn spectrum_csv_round_trip() {
    let man = build_icosphere(2).unwrap();
    let s = weighted_laplace_spectrum(&man, &DensityField::constant(&man, 1.0).unwrap(), 8).unwrap();
    let mut extra = Metadata::new();
    extra.insert("mesh".into(), "icosphere(2)".into());
    let mut buf = Vec::new();
    write_spectrum_csv(&s, &extra, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# "));
    assert_eq!(text.lines().nth(1).unwrap(), "index,eigenvalue,multiplicity_group,residual");
    let (meta, rows) = read_spectrum_csv(buf.as_slice()).unwrap();
    assert_eq!(meta["problem"], "weighted_laplace");
    assert_eq!(meta["mesh"], "icosphere(2)");
    assert_eq!(meta["zero_tol"].parse::<f64>().unwrap(), s.zero_tol);
    assert_eq!(rows.len(), s.len());
    let groups = s.groups();
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r.index, k);
        assert_eq!(r.eigenvalue, s.eigenvalues[k]);
        assert_eq!(r.residual, s.residuals[k]);
        assert_eq!(r.multiplicity_group, groups[k]);
    }
    // constants, then the three first spherical harmonics, then five more
    assert_eq!(groups[..4], [0, 1, 1, 1]);

    let mut vecs = Vec::new();
    write_eigenvectors(&s, &extra, &mut vecs).unwrap();
    let text = String::from_utf8(vecs).unwrap();
    let body: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(body.len(), man.vertex_count());
    let v: f64 = body[5].split(' ').nth(2).unwrap().parse().unwrap();
    assert_eq!(v, s.eigenvectors[2].values()[5]);
}

#[test]
fn map_and_density_checkpoints_round_trip() {
    let man = build_icosphere(2).unwrap();
    let map = SphereMap::identity(&man).unwrap().perturbed(0.2, 7).unwrap();
    let info = MapMeta { operation: "perturbed_identity".into(), epsilon: None };
    let mut buf = Vec::new();
    write_map(&map, &info, &mut buf).unwrap();
    let (back, back_info) = read_map(buf.as_slice()).unwrap();
    assert_eq!(back, map);
    assert_eq!(back_info, info);

    let relaxed = SphereMap::new(VectorField::from_fn(man.vertex_count(), 3, |i| vec![0.5 * i as f64, -1e-300, 3.0]), false).unwrap();
    let info = MapMeta { operation: "gl_descent".into(), epsilon: Some(0.05) };
    let mut buf = Vec::new();
    write_map(&relaxed, &info, &mut buf).unwrap();
    let (back, back_info) = read_map(buf.as_slice()).unwrap();
    assert_eq!(back, relaxed);
    assert_eq!(back_info.epsilon, Some(0.05));

    let disk = build_disk_mesh(5).unwrap();
    let vals: Vec<f64> = disk.positions().iter().map(|p| 1.0 + p[0] / 3.0).collect();
    for beta in [DensityField::new(&disk, vals.clone()).unwrap(), DensityField::on_boundary(&disk, vals).unwrap()] {
        let mut buf = Vec::new();
        write_density(&beta, &Metadata::new(), &mut buf).unwrap();
        let (back, _) = read_density(&disk, buf.as_slice()).unwrap();
        assert_eq!(back.values(), beta.values());
        assert_eq!(back.support(), beta.support());
    }
}

#[test]
fn gl_trace_round_trip() {
    let man = build_icosphere(2).unwrap();
    let u0 = SphereMap::identity(&man).unwrap().perturbed(0.1, 3).unwrap();
    let (_, stages) = gl_continuation(&man, u0.field(), &[0.4, 0.2], &GLConfig::default(), 1e-6, 500).unwrap();
    let mut extra = Metadata::new();
    extra.insert("tol".into(), "1e-6".into());
    let mut buf = Vec::new();
    write_gl_trace(&stages, &extra, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.contains("stage,epsilon,iterations,dirichlet,potential_term,residual\n"));
    let (meta, back) = read_gl_trace(buf.as_slice()).unwrap();
    assert_eq!(meta["tol"], "1e-6");
    assert_eq!(back, stages);
}

#[test]
fn optimizer_trace_round_trip() {
    let man = build_icosphere(2).unwrap();
    let beta: Vec<f64> = man.positions().iter().map(|p| 1.0 + 0.3 * p[0] * p[0]).collect();
    let params = OptimizeParams { max_iters: 5, ..Default::default() };
    let (_, trace) = maximize_F1(&man, &DensityField::new(&man, beta).unwrap(), &params).unwrap();
    let mut buf = Vec::new();
    write_optimizer_trace(&trace.iterations, &Metadata::new(), &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("iteration,F1,gap,beta_change,map_rank\n"));
    let (_, back) = read_optimizer_trace(buf.as_slice()).unwrap();
    assert_eq!(back.len(), trace.iterations.len());
    for (a, b) in back.iter().zip(&trace.iterations) {
        assert_eq!((a.iteration, a.f1, a.beta_change, a.map_rank), (b.iteration, b.f1, b.beta_change, b.map_rank));
        assert!(a.gap == b.gap || a.gap.is_nan() && b.gap.is_nan());
    }
}

#[test]
fn writes_are_deterministic() {
    let man = build_icosphere(2).unwrap();
    let s = weighted_laplace_spectrum(&man, &DensityField::constant(&man, 1.0).unwrap(), 6).unwrap();
    let t = weighted_laplace_spectrum(&man, &DensityField::constant(&man, 1.0).unwrap(), 6).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_spectrum_csv(&s, &Metadata::new(), &mut a).unwrap();
    write_spectrum_csv(&t, &Metadata::new(), &mut b).unwrap();
    assert_eq!(a, b);
}
