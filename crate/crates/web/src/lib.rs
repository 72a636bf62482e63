//! Browser demo: sphere spectra, density optimization on the sphere and
//! Steklov density optimization on the disk.
//!
//! The computations are plain Rust functions so they can be tested natively;
//! the `wasm_bindgen` exports below only flatten their results into typed arrays.

use sdl_core::domain::{build_disk_mesh, build_icosphere, Cells};
use sdl_core::optimize::{maximize_F1, maximize_steklov_density, OptimizeParams};
use sdl_core::spectral::{weighted_laplace_spectrum, DensityField};
use sdl_core::{DiscreteManifold, Result};
use wasm_bindgen::prelude::*;

/// Largest subdivision level the page offers; icosphere(5) has 10242 vertices.
pub const MAX_SUBDIVISIONS: usize = 4;
pub const MAX_RADIAL: usize = 24;
pub const MAX_ITERS: usize = 200;

/// Leading eigenvalues of the round-sphere Laplacian.
pub fn sphere_eigenvalues(subdivisions: usize, count: usize) -> Result<Vec<f64>> {
    let man = build_icosphere(subdivisions.min(MAX_SUBDIVISIONS))?;
    let s = weighted_laplace_spectrum(&man, &DensityField::constant(&man, 1.0)?, count.max(1))?;
    Ok(s.eigenvalues)
}

#[derive(Debug, Clone)]
pub struct SphereRun {
    pub positions: Vec<f64>,
    pub triangles: Vec<u32>,
    pub initial: Vec<f64>,
    pub density: Vec<f64>,
    /// `F₁` per accepted step, starting with the initial density.
    pub trace: Vec<f64>,
}

/// Starts from `1 + skew·z` and runs the optimizer.
pub fn optimize_on_sphere(subdivisions: usize, skew: f64, iters: usize) -> Result<SphereRun> {
    let man = build_icosphere(subdivisions.min(MAX_SUBDIVISIONS))?;
    let skew = skew.clamp(0.0, 0.95);
    let beta0: Vec<f64> = man.positions().iter().map(|p| 1.0 + skew * p[2]).collect();
    let beta0 = DensityField::new(&man, beta0)?;
    let params = OptimizeParams { max_iters: iters.clamp(1, MAX_ITERS), ..Default::default() };
    let (beta, trace) = maximize_F1(&man, &beta0, &params)?;
    Ok(SphereRun {
        positions: flat_positions(&man),
        triangles: triangles(&man),
        initial: beta0.normalized().values().to_vec(),
        density: beta.values().to_vec(),
        trace: trace.iterations.iter().map(|r| r.f1).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct DiskRun {
    /// Polar angle of each boundary vertex, in boundary order.
    pub angles: Vec<f64>,
    pub initial: Vec<f64>,
    pub density: Vec<f64>,
    /// `G₁` per accepted step.
    pub trace: Vec<f64>,
}

/// Starts from `1 + skew·cos θ` on the unit circle and maximizes `σ₁ · L`.
pub fn optimize_on_disk(radial: usize, skew: f64, iters: usize) -> Result<DiskRun> {
    let man = build_disk_mesh(radial.clamp(3, MAX_RADIAL))?;
    let skew = skew.clamp(0.0, 0.95);
    let rho0: Vec<f64> = man.positions().iter().map(|p| 1.0 + skew * p[0]).collect();
    let rho0 = DensityField::on_boundary(&man, rho0)?;
    let params = OptimizeParams { max_iters: iters.clamp(1, MAX_ITERS), ..Default::default() };
    let (rho, trace) = maximize_steklov_density(&man, &rho0, &params)?;
    let bd = &man.boundary().expect("disk has a boundary").vertices;
    let initial = rho0.normalized();
    Ok(DiskRun {
        angles: bd.iter().map(|&i| man.positions()[i][1].atan2(man.positions()[i][0])).collect(),
        initial: bd.iter().map(|&i| initial.values()[i]).collect(),
        density: bd.iter().map(|&i| rho.values()[i]).collect(),
        trace: trace.iterations.iter().map(|r| r.f1).collect(),
    })
}

fn flat_positions(man: &DiscreteManifold) -> Vec<f64> {
    man.positions().iter().flatten().copied().collect()
}

fn triangles(man: &DiscreteManifold) -> Vec<u32> {
    match man.cells() {
        Cells::Triangles(t) => t.iter().flatten().map(|&i| i as u32).collect(),
        Cells::Grid { .. } => Vec::new(),
    }
}

fn js_err(e: sdl_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = sphereSpectrum)]
pub fn sphere_spectrum(subdivisions: usize, count: usize) -> std::result::Result<Vec<f64>, JsError> {
    sphere_eigenvalues(subdivisions, count).map_err(js_err)
}

#[wasm_bindgen]
pub struct SphereResult(SphereRun);

#[wasm_bindgen]
impl SphereResult {
    #[wasm_bindgen(getter)]
    pub fn positions(&self) -> Vec<f64> {
        self.0.positions.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn triangles(&self) -> Vec<u32> {
        self.0.triangles.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn initial(&self) -> Vec<f64> {
        self.0.initial.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.0.density.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> Vec<f64> {
        self.0.trace.clone()
    }
}

#[wasm_bindgen(js_name = optimizeSphere)]
pub fn optimize_sphere(subdivisions: usize, skew: f64, iters: usize) -> std::result::Result<SphereResult, JsError> {
    optimize_on_sphere(subdivisions, skew, iters).map(SphereResult).map_err(js_err)
}

#[wasm_bindgen]
pub struct DiskResult(DiskRun);

#[wasm_bindgen]
impl DiskResult {
    #[wasm_bindgen(getter)]
    pub fn angles(&self) -> Vec<f64> {
        self.0.angles.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn initial(&self) -> Vec<f64> {
        self.0.initial.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.0.density.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> Vec<f64> {
        self.0.trace.clone()
    }
}

#[wasm_bindgen(js_name = steklovDisk)]
pub fn steklov_disk(radial: usize, skew: f64, iters: usize) -> std::result::Result<DiskResult, JsError> {
    optimize_on_disk(radial, skew, iters).map(DiskResult).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_spectrum_starts_with_zero_then_two() {
        let ev = sphere_eigenvalues(3, 4).unwrap();
        assert!(ev[0].abs() < 1e-8);
        for &l in &ev[1..4] {
            assert!((l - 2.0).abs() < 5e-3, "{l}");
        }
    }

    #[test]
    fn sphere_run_climbs_towards_eight_pi() {
        let run = optimize_on_sphere(2, 0.6, 25).unwrap();
        assert_eq!(run.positions.len(), 3 * 162);
        assert_eq!(run.triangles.len(), 3 * 320);
        assert_eq!(run.density.len(), 162);
        let (first, last) = (run.trace[0], *run.trace.last().unwrap());
        assert!(last > first);
        assert!((last / (8.0 * PI) - 1.0).abs() < 0.03, "{last}");
    }

    #[test]
    fn disk_run_climbs_towards_two_pi() {
        let run = optimize_on_disk(8, 0.6, 25).unwrap();
        assert_eq!(run.angles.len(), run.density.len());
        assert_eq!(run.initial.len(), run.density.len());
        let last = *run.trace.last().unwrap();
        assert!(last > run.trace[0]);
        assert!((last / (2.0 * PI) - 1.0).abs() < 0.03, "{last}");
    }

    #[test]
    fn oversized_requests_are_clamped() {
        assert_eq!(optimize_on_disk(1000, 0.0, 0).unwrap().angles.len(), optimize_on_disk(MAX_RADIAL, 0.0, 0).unwrap().angles.len());
    }
}
