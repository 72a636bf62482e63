//! Discrete Riemannian domains and the quadratic forms built on them.
//!
//! A [`DiscreteManifold`] carries a symmetric stiffness matrix `K` (the
//! Dirichlet form, `xᵀKx ≈ ∫|dx|²`), lumped vertex masses `m_i`, optional
//! boundary weights `s_i`, and the list of energy elements `K` was assembled
//! from. Every element stores the ambient gradients of its nodal basis
//! functions, so that `uᵀ K_e u = vol_e |du_e|²` holds exactly; the energy
//! density is obtained by spreading `vol_e |du_e|²` evenly over the element's
//! vertices, which makes `Σ m_i e_i = 2E(u)` an identity rather than an
//! approximation.

mod builders;
mod fields;

use std::collections::{BTreeMap, BinaryHeap};
use std::sync::OnceLock;

pub use builders::{build_disk_mesh, build_flat_torus, build_icosphere};
pub use fields::{ScalarField, VectorField};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

/// A simplex-like energy element: an edge (grid domains) or a triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    verts: [usize; 3],
    len: u8,
    /// Length/area/volume weight of the element.
    pub volume: f64,
    /// Ambient gradient of each nodal basis function.
    grads: [[f64; 3]; 3],
}

impl Element {
    pub(crate) fn edge(i: usize, j: usize, volume: f64, grad_j: [f64; 3]) -> Self {
        let neg = [-grad_j[0], -grad_j[1], -grad_j[2]];
        Self { verts: [i, j, usize::MAX], len: 2, volume, grads: [neg, grad_j, [0.0; 3]] }
    }

    /// P1 triangle in `R³`; returns `None` for degenerate triangles.
    pub(crate) fn triangle(tri: [usize; 3], p: [[f64; 3]; 3]) -> Option<Self> {
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        let nrm = cross(e1, e2);
        let twice_area = norm3(nrm);
        if !(twice_area > 0.0) {
            return None;
        }
        let area = 0.5 * twice_area;
        // ∇φ_k = n × (opposite edge) / (2A), edge oriented so the gradient points at vertex k
        let unit = scale(nrm, 1.0 / twice_area);
        let mut grads = [[0.0; 3]; 3];
        for (k, g) in grads.iter_mut().enumerate() {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            *g = scale(cross(unit, sub(b, a)), 1.0 / twice_area);
        }
        Some(Self { verts: tri, len: 3, volume: area, grads })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts[..self.len as usize]
    }

    pub fn grads(&self) -> &[[f64; 3]] {
        &self.grads[..self.len as usize]
    }

    /// `du` on the element as `dim` rows of ambient gradient vectors.
    /// Values enter relative to the first vertex, so constants have exactly
    /// zero gradient.
    pub fn gradient(&self, u: &VectorField) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; u.dim()];
        let base = u.row(self.vertices()[0]);
        for (&v, g) in self.vertices().iter().zip(self.grads()) {
            for (c, row) in out.iter_mut().enumerate() {
                let val = u.row(v)[c] - base[c];
                for a in 0..3 {
                    row[a] += val * g[a];
                }
            }
        }
        out
    }

    pub fn scalar_gradient(&self, f: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        let base = f[self.vertices()[0]];
        for (&v, g) in self.vertices().iter().zip(self.grads()) {
            for a in 0..3 {
                out[a] += (f[v] - base) * g[a];
            }
        }
        out
    }

    /// `vol · |du|²` for this element.
    pub fn energy(&self, u: &VectorField) -> f64 {
        self.volume * self.gradient(u).iter().map(|r| r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sum::<f64>()
    }
}

/// Cell structure kept for geometric diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Triangles(Vec<[usize; 3]>),
    /// Periodic tensor grid; vertex index is `Σ i_a · stride_a` with axis 0 fastest.
    Grid { shape: Vec<usize>, spacing: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// Boundary vertices ordered along each boundary loop.
    pub vertices: Vec<usize>,
    /// Lumped boundary measure `s_i`, aligned with `vertices`.
    pub weights: Vec<f64>,
}

/// Builder name and parameters, recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuilderTag {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl BuilderTag {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteManifold {
    dim: usize,
    positions: Vec<[f64; 3]>,
    stiffness: CsrMatrix,
    mass: Vec<f64>,
    boundary: Option<Boundary>,
    boundary_weight: Vec<f64>,
    elements: Vec<Element>,
    cells: Cells,
    tag: BuilderTag,
    mesh_size: f64,
    calibration: OnceLock<f64>,
}

impl DiscreteManifold {
    pub(crate) fn assemble(
        dim: usize,
        positions: Vec<[f64; 3]>,
        elements: Vec<Element>,
        mass: Vec<f64>,
        boundary: Option<Boundary>,
        cells: Cells,
        tag: BuilderTag,
    ) -> Self {
        let n = positions.len();
        let mut b = TripletBuilder::new(n);
        let mut offdiag_sum = vec![0.0; n];
        let mut edge_len = 0.0;
        let mut edge_count = 0usize;
        for e in &elements {
            let vs = e.vertices();
            let gs = e.grads();
            for a in 0..vs.len() {
                for c in (a + 1)..vs.len() {
                    let w = e.volume * dot3(gs[a], gs[c]);
                    b.add_sym(vs[a], vs[c], w);
                    offdiag_sum[vs[a]] += w;
                    offdiag_sum[vs[c]] += w;
                }
            }
            if vs.len() == 2 {
                edge_len += 1.0 / norm3(gs[1]);
                edge_count += 1;
            } else {
                for a in 0..vs.len() {
                    edge_len += norm3(sub(positions[vs[a]], positions[vs[(a + 1) % vs.len()]]));
                    edge_count += 1;
                }
            }
        }
        // diagonal as minus the off-diagonal row sum keeps K·1 = 0 exact in assembly
        for (i, s) in offdiag_sum.iter().enumerate() {
            b.add(i, i, -s);
        }
        let stiffness = b.build();
        let mut boundary_weight = vec![0.0; n];
        if let Some(bd) = &boundary {
            for (&v, &w) in bd.vertices.iter().zip(&bd.weights) {
                boundary_weight[v] = w;
            }
        }
        let mesh_size = if edge_count > 0 { edge_len / edge_count as f64 } else { 0.0 };
        Self {
            dim,
            positions,
            stiffness,
            mass,
            boundary,
            boundary_weight,
            elements,
            cells,
            tag,
            mesh_size,
            calibration: OnceLock::new(),
        }
    }

    /// Triangle mesh in `R³` with lumped (one-third area) masses; boundary
    /// loops are detected from edges used by a single triangle.
    pub fn from_triangles(positions: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>, tag: BuilderTag) -> Result<Self> {
        let n = positions.len();
        let mut mass = vec![0.0; n];
        let mut elements = Vec::with_capacity(triangles.len());
        for t in &triangles {
            if t.iter().any(|&v| v >= n) {
                return invalid(format!("triangle {t:?} references a missing vertex"));
            }
            let el = Element::triangle(*t, [positions[t[0]], positions[t[1]], positions[t[2]]])
                .ok_or_else(|| Error::InvalidInput(format!("degenerate triangle {t:?}")))?;
            for &v in t {
                mass[v] += el.volume / 3.0;
            }
            elements.push(el);
        }
        if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
            return invalid(format!("vertex {i} belongs to no triangle"));
        }
        let boundary = boundary_loops(&positions, &triangles)?;
        Ok(Self::assemble(2, positions, elements, mass, boundary, Cells::Triangles(triangles), tag))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn volume(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn boundary(&self) -> Option<&Boundary> {
        self.boundary.as_ref()
    }

    /// Per-vertex boundary weight, zero at interior vertices.
    pub fn boundary_weight(&self) -> &[f64] {
        &self.boundary_weight
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn triangles(&self) -> Option<&[[usize; 3]]> {
        match &self.cells {
            Cells::Triangles(t) => Some(t),
            Cells::Grid { .. } => None,
        }
    }

    pub fn tag(&self) -> &BuilderTag {
        &self.tag
    }

    /// Mean edge length.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Cached `λ₁` of the unweighted Laplacian, filled on first use.
    pub(crate) fn calibration(&self) -> &OnceLock<f64> {
        &self.calibration
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count()).filter(|&i| self.boundary_weight[i] == 0.0).collect()
    }

    pub fn check_scalar(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.vertex_count() {
            return Err(Error::DimensionMismatch { expected: self.vertex_count(), found: f.len() });
        }
        Ok(())
    }

    pub fn check_field(&self, u: &VectorField) -> Result<()> {
        if u.vertex_count() != self.vertex_count() {
            return Err(Error::DimensionMismatch { expected: self.vertex_count(), found: u.vertex_count() });
        }
        Ok(())
    }

    /// `Σ m_i f_i`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.mass.iter().zip(f).map(|(m, x)| m * x).sum()
    }

    /// Component-wise `K u`, formed as `Σ_j K_ij (u_j − u_i)` so that
    /// constant fields map to exact zeros.
    pub fn apply_stiffness(&self, u: &VectorField) -> VectorField {
        let d = u.dim();
        let mut out = VectorField::zeros(u.vertex_count(), d);
        for i in 0..u.vertex_count() {
            let ui = u.row(i);
            let mut acc = vec![0.0; d];
            for (j, kij) in self.stiffness.row(i) {
                if j == i {
                    continue;
                }
                for (a, (uj, uii)) in acc.iter_mut().zip(u.row(j).iter().zip(ui)) {
                    *a += kij * (uj - uii);
                }
            }
            out.row_mut(i).copy_from_slice(&acc);
        }
        out
    }

    /// Component-wise `M⁻¹ K u`.
    pub fn laplacian(&self, u: &VectorField) -> VectorField {
        let mut ku = self.apply_stiffness(u);
        let d = ku.dim();
        for (i, m) in self.mass.iter().enumerate() {
            ku.data_mut()[i * d..(i + 1) * d].iter_mut().for_each(|x| *x /= m);
        }
        ku
    }

    /// Unique undirected edges with their Euclidean lengths (grid edges use
    /// the grid spacing, not the wrapped coordinate difference).
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut seen = BTreeMap::new();
        for e in &self.elements {
            let vs = e.vertices();
            for a in 0..vs.len() {
                for c in (a + 1)..vs.len() {
                    let (i, j) = (vs[a].min(vs[c]), vs[a].max(vs[c]));
                    let len = if vs.len() == 2 {
                        1.0 / norm3(e.grads()[1])
                    } else {
                        norm3(sub(self.positions[i], self.positions[j]))
                    };
                    seen.entry((i, j)).or_insert(len);
                }
            }
        }
        seen.into_iter().map(|((i, j), l)| (i, j, l)).collect()
    }

    /// Shortest-path distances along mesh edges from `source`.
    pub fn graph_distances(&self, source: usize) -> Vec<f64> {
        let n = self.vertex_count();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, l) in self.edges() {
            adj[i].push((j, l));
            adj[j].push((i, l));
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, source));
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, l) in &adj[v] {
                let nd = d + l;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(HeapItem(nd, w));
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn boundary_loops(positions: &[[f64; 3]], triangles: &[[usize; 3]]) -> Result<Option<Boundary>> {
    let mut count: BTreeMap<(usize, usize), (usize, usize, i32)> = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = count.entry(key).or_insert((a, b, 0));
            entry.2 += 1;
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b, c) in count.values() {
        if c == 1 {
            if next.insert(a, b).is_some() {
                return invalid(format!("non-manifold boundary at vertex {a}"));
            }
        } else if c > 2 {
            return invalid(format!("edge ({a},{b}) shared by {c} triangles"));
        }
    }
    if next.is_empty() {
        return Ok(None);
    }
    let mut vertices = Vec::new();
    let mut weights = Vec::new();
    let mut remaining = next.clone();
    while let Some((&start, _)) = remaining.iter().next() {
        let mut lp = vec![start];
        let mut cur = start;
        loop {
            let nx = remaining.remove(&cur).ok_or_else(|| Error::InvalidInput("open boundary chain".into()))?;
            if nx == start {
                break;
            }
            lp.push(nx);
            cur = nx;
        }
        let m = lp.len();
        for k in 0..m {
            let prev = lp[(k + m - 1) % m];
            let nxt = lp[(k + 1) % m];
            let v = lp[k];
            let w = 0.5 * (norm3(sub(positions[v], positions[prev])) + norm3(sub(positions[nxt], positions[v])));
            vertices.push(v);
            weights.push(w);
        }
    }
    Ok(Some(Boundary { vertices, weights }))
}

/// Dirichlet energy `½ Σ_c u_cᵀ K u_c`.
pub fn dirichlet_energy(man: &DiscreteManifold, u: &VectorField) -> Result<f64> {
    man.check_field(u)?;
    let ku = man.apply_stiffness(u);
    Ok(0.5 * u.data().iter().zip(ku.data()).map(|(a, b)| a * b).sum::<f64>())
}

/// Vertex energy density `e_i = m_i⁻¹ Σ_{e∋i} vol_e |du_e|² / #verts(e)`.
pub fn energy_density(man: &DiscreteManifold, u: &VectorField) -> Result<ScalarField> {
    man.check_field(u)?;
    let mut acc = vec![0.0; man.vertex_count()];
    for e in man.elements() {
        let share = e.energy(u) / e.vertices().len() as f64;
        for &v in e.vertices() {
            acc[v] += share;
        }
    }
    for (a, m) in acc.iter_mut().zip(man.mass()) {
        *a /= m;
    }
    Ok(ScalarField(acc))
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
