//! Discrete domains: a weighted radial grid for balls, a plain interval, and
//! a structured triangulation of the disk.
//!
//! All meshes carry piecewise-linear (P1) elements. For the radial grid the
//! `ω_{N-1} r^{N-1}` weight is folded into the element and facet measures, so
//! assembly code never needs to know which kind of mesh it is working on.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::problem::Field;

/// Content hash identifying a mesh; fields carry it to prevent mixing meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshId(pub u64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Radial reduction of the ball `B_R ⊂ ℝ^N`.
    Radial1D { ambient_dim: usize, radius: f64 },
    /// Unweighted interval `[0, L]` with a boundary point at each end.
    Interval1D { length: f64 },
    Triangular2D,
}

/// P1 element: node indices, measure and the constant gradients of its
/// local basis functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub nodes: Vec<usize>,
    pub measure: f64,
    pub basis_gradients: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub measure: f64,
    pub normal: [f64; 2],
    /// Element the facet belongs to.
    pub element: usize,
}

/// Boundary node with its lumped share of the facet measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub node: usize,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    id: MeshId,
    kind: MeshKind,
    nodes: Vec<[f64; 2]>,
    elements: Vec<Element>,
    facets: Vec<Facet>,
    boundary_nodes: Vec<BoundaryNode>,
    #[serde(skip)]
    boundary_slot: Vec<Option<usize>>,
}

/// Surface measure of the unit sphere `S^{N-1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Volume of the unit ball in `ℝ^N`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

// Γ(n/2) for positive integers n.
fn gamma_half(n: usize) -> f64 {
    let mut g = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k + 2 <= n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

impl Mesh {
    fn assemble(
        kind: MeshKind,
        nodes: Vec<[f64; 2]>,
        elements: Vec<Element>,
        facets: Vec<Facet>,
    ) -> Result<Self> {
        let mut shares = vec![0.0; nodes.len()];
        let mut on_boundary = vec![false; nodes.len()];
        for f in &facets {
            let share = f.measure / f.nodes.len() as f64;
            for &n in &f.nodes {
                shares[n] += share;
                on_boundary[n] = true;
            }
        }
        let boundary_nodes: Vec<BoundaryNode> = (0..nodes.len())
            .filter(|&n| on_boundary[n])
            .map(|n| BoundaryNode { node: n, measure: shares[n] })
            .collect();
        let mut mesh = Mesh {
            id: MeshId(0),
            kind,
            nodes,
            elements,
            facets,
            boundary_nodes,
            boundary_slot: Vec::new(),
        };
        mesh.rebuild_index();
        mesh.validate()?;
        mesh.id = mesh.content_hash();
        Ok(mesh)
    }

    fn rebuild_index(&mut self) {
        self.boundary_slot = vec![None; self.nodes.len()];
        for (k, b) in self.boundary_nodes.iter().enumerate() {
            self.boundary_slot[b.node] = Some(k);
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, e) in self.elements.iter().enumerate() {
            if !(e.measure > 0.0) || !e.measure.is_finite() {
                return Err(invalid(format!("element {i} has non-positive measure")));
            }
            if e.nodes.iter().any(|&n| n >= self.nodes.len()) {
                return Err(invalid(format!("element {i} references a missing node")));
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            let len = f.normal[0].hypot(f.normal[1]);
            if (len - 1.0).abs() > 1e-12 || !(f.measure > 0.0) {
                return Err(invalid(format!("facet {i} is degenerate")));
            }
        }
        if self.boundary_nodes.is_empty() {
            return Err(invalid("mesh has no boundary"));
        }
        Ok(())
    }

    // FNV-1a over geometry and connectivity.
    fn content_hash(&self) -> MeshId {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        match &self.kind {
            MeshKind::Radial1D { ambient_dim, radius } => {
                eat(1);
                eat(*ambient_dim as u64);
                eat(radius.to_bits());
            }
            MeshKind::Interval1D { length } => {
                eat(2);
                eat(length.to_bits());
            }
            MeshKind::Triangular2D => eat(3),
        }
        for x in &self.nodes {
            eat(x[0].to_bits());
            eat(x[1].to_bits());
        }
        for e in &self.elements {
            for &n in &e.nodes {
                eat(n as u64);
            }
        }
        MeshId(h)
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn kind(&self) -> &MeshKind {
        &self.kind
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary_nodes
    }

    /// Position of `node` in [`Mesh::boundary_nodes`], if it lies on ∂Ω.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    /// Dimension N of the ambient space the mesh represents.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            MeshKind::Radial1D { ambient_dim, .. } => ambient_dim,
            MeshKind::Interval1D { .. } => 1,
            MeshKind::Triangular2D => 2,
        }
    }

    /// Number of gradient components stored per element.
    pub fn gradient_dim(&self) -> usize {
        match self.kind {
            MeshKind::Triangular2D => 2,
            _ => 1,
        }
    }

    /// Distance of a node from the origin (the radial coordinate on radial grids).
    pub fn radius_of(&self, node: usize) -> f64 {
        let x = self.nodes[node];
        x[0].hypot(x[1])
    }

    /// |Ω|.
    pub fn volume(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }

    /// H^{N-1}(∂Ω).
    pub fn boundary_measure(&self) -> f64 {
        self.facets.iter().map(|f| f.measure).sum()
    }

    /// Radius of the ball in ℝ^N with the same volume as the mesh.
    pub fn equal_volume_radius(&self) -> f64 {
        let n = self.ambient_dim();
        (self.volume() / unit_ball_volume(n)).powf(1.0 / n as f64)
    }

    pub(crate) fn check_field(&self, u: &Field) -> Result<()> {
        if u.mesh_id() != self.id {
            return Err(Error::MeshMismatch { expected: self.id, found: u.mesh_id() });
        }
        if u.len() != self.nodes.len() {
            return Err(Error::LengthMismatch { expected: self.nodes.len(), found: u.len() });
        }
        Ok(())
    }

    /// Constant gradient of `values` on element `e`.
    #[inline]
    pub(crate) fn element_gradient(&self, e: &Element, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, &n) in e.nodes.iter().enumerate() {
            g[0] += values[n] * e.basis_gradients[a][0];
            g[1] += values[n] * e.basis_gradients[a][1];
        }
        g
    }

    /// Writes the mesh as JSON (nodes, elements, facets).
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(
            std::io::BufWriter::new(file),
            &MeshFileRef { schema_version: SCHEMA_VERSION, mesh: self },
        )?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeshFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { expected: SCHEMA_VERSION, found: file.schema_version });
        }
        let mut mesh = file.mesh;
        mesh.rebuild_index();
        mesh.validate()?;
        let id = mesh.content_hash();
        if id != mesh.id {
            return Err(Error::Malformed("mesh id does not match its contents".into()));
        }
        Ok(mesh)
    }
}

#[derive(Serialize)]
struct MeshFileRef<'a> {
    schema_version: u32,
    mesh: &'a Mesh,
}

#[derive(Deserialize)]
struct MeshFile {
    schema_version: u32,
    mesh: Mesh,
}

/// Radial grid on `[0, R]` representing `B_R ⊂ ℝ^N`.
///
/// Nodes are `r_i = R (i/n)^grading`; `grading > 1` clusters cells at the
/// origin. Cell measures are `ω_{N-1} (r_{i+1}^N - r_i^N) / N`, so the volume
/// is `ω_N R^N` up to rounding.
pub fn build_radial(ambient_dim: usize, radius: f64, n_cells: usize, grading: f64) -> Result<Mesh> {
    if ambient_dim < 2 {
        return Err(invalid("radial grids need N >= 2"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid("radius must be positive"));
    }
    if n_cells < 2 {
        return Err(invalid("radial grid needs at least 2 cells"));
    }
    if !(grading > 0.0) || !grading.is_finite() {
        return Err(invalid("grading must be positive"));
    }
    let n = ambient_dim as i32;
    let sphere = unit_sphere_area(ambient_dim);
    let r: Vec<f64> = (0..=n_cells)
        .map(|i| {
            if i == n_cells {
                radius
            } else {
                radius * (i as f64 / n_cells as f64).powf(grading)
            }
        })
        .collect();
    let nodes = r.iter().map(|&x| [x, 0.0]).collect();
    let elements = (0..n_cells)
        .map(|i| {
            let h = r[i + 1] - r[i];
            Element {
                nodes: vec![i, i + 1],
                measure: sphere * (r[i + 1].powi(n) - r[i].powi(n)) / n as f64,
                basis_gradients: vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]],
            }
        })
        .collect();
    let facets = vec![Facet {
        nodes: vec![n_cells],
        measure: sphere * radius.powi(n - 1),
        normal: [1.0, 0.0],
        element: n_cells - 1,
    }];
    Mesh::assemble(MeshKind::Radial1D { ambient_dim, radius }, nodes, elements, facets)
}

/// Uniform grid with `n_nodes` nodes on `[0, length]`; both endpoints are
/// boundary points of unit (counting) measure.
pub fn build_interval(n_nodes: usize, length: f64) -> Result<Mesh> {
    if n_nodes < 2 {
        return Err(invalid("interval needs at least 2 nodes"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(invalid("length must be positive"));
    }
    let cells = n_nodes - 1;
    let h = length / cells as f64;
    let nodes = (0..n_nodes).map(|i| [i as f64 * h, 0.0]).collect();
    let elements = (0..cells)
        .map(|i| Element {
            nodes: vec![i, i + 1],
            measure: h,
            basis_gradients: vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]],
        })
        .collect();
    let facets = vec![
        Facet { nodes: vec![0], measure: 1.0, normal: [-1.0, 0.0], element: 0 },
        Facet { nodes: vec![cells], measure: 1.0, normal: [1.0, 0.0], element: cells - 1 },
    ];
    Mesh::assemble(MeshKind::Interval1D { length }, nodes, elements, facets)
}

/// Structured disk of radius `radius` made of `2^refinement` concentric rings.
///
/// Ring `k` carries `6k` equally spaced nodes; refinement 0 is the hexagonal
/// fan. The mesh covers the inscribed `6·2^refinement`-gon exactly.
pub fn build_disk(radius: f64, refinement: u32) -> Result<Mesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid("radius must be positive"));
    }
    if refinement > 10 {
        return Err(invalid("refinement above 10 is not supported"));
    }
    let rings = 1usize << refinement;
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(nodes.len());
        let rk = radius * k as f64 / rings as f64;
        let m = 6 * k;
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            nodes.push([rk * th.cos(), rk * th.sin()]);
        }
    }
    let ring_node = |k: usize, j: usize| -> usize {
        if k == 0 {
            0
        } else {
            ring_start[k] + j % (6 * k)
        }
    };

    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(6 * rings * rings);
    for k in 1..=rings {
        for s in 0..6 {
            for i in 0..k {
                tris.push([ring_node(k, s * k + i), ring_node(k, s * k + i + 1), ring_node(k - 1, s * (k - 1) + i)]);
            }
            for i in 0..k - 1 {
                tris.push([
                    ring_node(k - 1, s * (k - 1) + i),
                    ring_node(k, s * k + i + 1),
                    ring_node(k - 1, s * (k - 1) + i + 1),
                ]);
            }
        }
    }

    let mut elements = Vec::with_capacity(tris.len());
    for t in tris {
        elements.push(triangle_element(&nodes, t)?);
    }

    // Boundary: edges of the outer ring, each owned by its outer triangle.
    let mut facets = Vec::with_capacity(6 * rings);
    let outer = 6 * rings;
    let mut owner = std::collections::HashMap::new();
    for (ei, e) in elements.iter().enumerate() {
        for a in 0..3 {
            let (p, q) = (e.nodes[a], e.nodes[(a + 1) % 3]);
            owner.insert((p.min(q), p.max(q)), ei);
        }
    }
    for j in 0..outer {
        let a = ring_node(rings, j);
        let b = ring_node(rings, j + 1);
        let (pa, pb) = (nodes[a], nodes[b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = dx.hypot(dy);
        let mut normal = [dy / len, -dx / len];
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        if normal[0] * mid[0] + normal[1] * mid[1] < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let element = *owner
            .get(&(a.min(b), a.max(b)))
            .ok_or_else(|| Error::Malformed("boundary edge without owner".into()))?;
        facets.push(Facet { nodes: vec![a, b], measure: len, normal, element });
    }
    Mesh::assemble(MeshKind::Triangular2D, nodes, elements, facets)
}

fn triangle_element(coords: &[[f64; 2]], mut t: [usize; 3]) -> Result<Element> {
    let signed = |t: &[usize; 3]| {
        let (a, b, c) = (coords[t[0]], coords[t[1]], coords[t[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    };
    if signed(&t) < 0.0 {
        t.swap(1, 2);
    }
    let area = signed(&t);
    if !(area > 0.0) {
        return Err(Error::Malformed("degenerate triangle".into()));
    }
    let mut grads = Vec::with_capacity(3);
    for a in 0..3 {
        let p = coords[t[(a + 1) % 3]];
        let q = coords[t[(a + 2) % 3]];
        // ∇φ_a is perpendicular to the opposite edge, scaled by 1/(2|T|).
        grads.push([(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)]);
    }
    Ok(Element { nodes: t.to_vec(), measure: area, basis_gradients: grads })
}

/// Per-element gradients of a nodal field.
pub fn gradient(mesh: &Mesh, u: &Field) -> Result<Vec<[f64; 2]>> {
    mesh.check_field(u)?;
    Ok(mesh.elements.iter().map(|e| mesh.element_gradient(e, u.values())).collect())
}
