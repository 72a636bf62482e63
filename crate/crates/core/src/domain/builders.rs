use std::collections::HashMap;
use std::f64::consts::PI;

use super::{cross, dot3, norm3, sub, BuilderTag, Cells, DiscreteManifold, Element};
use crate::error::{invalid, Result};

/// Periodic uniform grid on `Π [0, L_a)` with the second-order
/// finite-difference Dirichlet form `Σ_edges (Π h) ((u_j − u_i)/h_a)²`.
pub fn build_flat_torus(side_lengths: &[f64], resolution: usize) -> Result<DiscreteManifold> {
    let n = side_lengths.len();
    if !(1..=3).contains(&n) {
        return invalid(format!("torus dimension must be 1, 2 or 3 (got {n})"));
    }
    if side_lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return invalid("torus side lengths must be positive");
    }
    if resolution < 4 {
        return invalid(format!("torus resolution must be at least 4 (got {resolution})"));
    }
    let spacing: Vec<f64> = side_lengths.iter().map(|l| l / resolution as f64).collect();
    let cell: f64 = spacing.iter().product();
    let count = resolution.pow(n as u32);
    let stride: Vec<usize> = (0..n).map(|a| resolution.pow(a as u32)).collect();

    let mut positions = Vec::with_capacity(count);
    let mut elements = Vec::with_capacity(count * n);
    for idx in 0..count {
        let mut p = [0.0; 3];
        for a in 0..n {
            let ia = (idx / stride[a]) % resolution;
            p[a] = ia as f64 * spacing[a];
            let ja = (ia + 1) % resolution;
            let nb = idx - ia * stride[a] + ja * stride[a];
            let mut g = [0.0; 3];
            g[a] = 1.0 / spacing[a];
            elements.push(Element::edge(idx, nb, cell, g));
        }
        positions.push(p);
    }
    let mut tag = BuilderTag::new("flat_torus").with("resolution", resolution);
    tag = tag.with("side_lengths", side_lengths.iter().map(|l| format!("{l}")).collect::<Vec<_>>().join(","));
    Ok(DiscreteManifold::assemble(
        n,
        positions,
        elements,
        vec![cell; count],
        None,
        Cells::Grid { shape: vec![resolution; n], spacing },
        tag,
    ))
}

/// Unit sphere from a subdivided icosahedron, vertices projected to `|x| = 1`,
/// cotangent stiffness and one-third-area lumped masses.
pub fn build_icosphere(subdivisions: usize) -> Result<DiscreteManifold> {
    if !(1..=7).contains(&subdivisions) {
        return invalid(format!("icosphere subdivisions must be in 1..=7 (got {subdivisions})"));
    }
    let (positions, triangles) = icosphere_geometry(subdivisions);
    let tag = BuilderTag::new("icosphere").with("subdivisions", subdivisions);
    DiscreteManifold::from_triangles(positions, triangles, tag)
}

pub(crate) fn icosphere_geometry(subdivisions: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut pos: Vec<[f64; 3]> = raw.iter().map(|&p| normalize(p)).collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, pos: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = [pos[a][0] + pos[b][0], pos[a][1] + pos[b][1], pos[a][2] + pos[b][2]];
                pos.push(normalize(m));
                pos.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut pos);
            let bc = midpoint(b, c, &mut pos);
            let ca = midpoint(c, a, &mut pos);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    // outward orientation
    for t in tris.iter_mut() {
        let nrm = cross(sub(pos[t[1]], pos[t[0]]), sub(pos[t[2]], pos[t[0]]));
        if dot3(nrm, pos[t[0]]) < 0.0 {
            t.swap(1, 2);
        }
    }
    (pos, tris)
}

/// Unit disk from concentric rings: ring `j` (radius `j/R`) carries `6j`
/// equally spaced vertices, adjacent rings are stitched by angle.
pub fn build_disk_mesh(radial_resolution: usize) -> Result<DiscreteManifold> {
    if radial_resolution < 3 {
        return invalid(format!("disk radial resolution must be at least 3 (got {radial_resolution})"));
    }
    let r = radial_resolution;
    let mut positions = vec![[0.0, 0.0, 0.0]];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for j in 1..=r {
        let count = 6 * j;
        let radius = j as f64 / r as f64;
        let ring: Vec<usize> = (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                positions.push([radius * th.cos(), radius * th.sin(), 0.0]);
                positions.len() - 1
            })
            .collect();
        rings.push(ring);
    }
    let angle = |j: usize, k: usize| -> f64 {
        if j == 0 {
            0.0
        } else {
            2.0 * PI * k as f64 / (6 * j) as f64
        }
    };
    let mut tris = Vec::new();
    for j in 1..=r {
        let inner = &rings[j - 1];
        let outer = &rings[j];
        if j == 1 {
            for k in 0..outer.len() {
                tris.push([inner[0], outer[k], outer[(k + 1) % outer.len()]]);
            }
            continue;
        }
        let (m, big) = (inner.len(), outer.len());
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < m || ib < big {
            let next_a = if ia < m { angle(j - 1, ia + 1) } else { f64::INFINITY };
            let next_b = if ib < big { angle(j, ib + 1) } else { f64::INFINITY };
            if next_b <= next_a {
                tris.push([inner[ia % m], outer[ib % big], outer[(ib + 1) % big]]);
                ib += 1;
            } else {
                tris.push([inner[ia % m], outer[ib % big], inner[(ia + 1) % m]]);
                ia += 1;
            }
        }
    }
    for t in tris.iter_mut() {
        let nrm = cross(sub(positions[t[1]], positions[t[0]]), sub(positions[t[2]], positions[t[0]]));
        if nrm[2] < 0.0 {
            t.swap(1, 2);
        }
    }
    let tag = BuilderTag::new("disk").with("radial_resolution", r);
    DiscreteManifold::from_triangles(positions, tris, tag)
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let s = norm3(p);
    [p[0] / s, p[1] / s, p[2] / s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_rejects_bad_input() {
        assert!(build_flat_torus(&[1.0, 0.0], 8).is_err());
        assert!(build_flat_torus(&[1.0, -1.0], 8).is_err());
        assert!(build_flat_torus(&[1.0, 1.0], 3).is_err());
        assert!(build_flat_torus(&[], 8).is_err());
        assert!(build_flat_torus(&[1.0; 4], 8).is_err());
    }

    #[test]
    fn icosphere_counts() {
        for s in 1..=3 {
            let m = build_icosphere(s).unwrap();
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s as u32) + 2);
            assert_eq!(m.triangles().unwrap().len(), 20 * 4usize.pow(s as u32));
            assert!(m.boundary().is_none());
        }
        assert!(build_icosphere(0).is_err());
        assert!(build_icosphere(8).is_err());
    }

    #[test]
    fn disk_counts_and_boundary_order() {
        let m = build_disk_mesh(4).unwrap();
        assert_eq!(m.vertex_count(), 1 + 3 * 4 * 5);
        let b = m.boundary().unwrap();
        assert_eq!(b.vertices.len(), 24);
        // consecutive boundary vertices are neighbours on the unit circle
        for w in b.vertices.windows(2) {
            let (p, q) = (m.positions()[w[0]], m.positions()[w[1]]);
            assert!(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() < 0.3);
        }
        assert!(build_disk_mesh(2).is_err());
    }
}
