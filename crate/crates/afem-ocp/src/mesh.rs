//! Conforming 2D triangulations with newest-vertex bisection.
//!
//! A [`Mesh`] stores vertices, counterclockwise triangles and an edge table.
//! Refinement is by newest-vertex bisection: each element carries the local
//! index of its newest vertex, and the edge opposite that vertex is the one
//! that gets split. Conformity is restored by recursive closure on the
//! refinement-edge neighbor, so a mesh returned by [`Mesh::refine`] never has
//! hanging nodes. Midpoints created on the curved boundary segment of the
//! three-quarter disk are snapped back to the unit circle.

use std::collections::HashMap;

use thiserror::Error;

/// Hard bound on closure recursion; exceeding it means the refinement-edge
/// tagging of the initial mesh is incompatible.
const MAX_CLOSURE_DEPTH: usize = 4096;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unknown domain name '{0}'")]
    UnknownDomain(String),
    #[error("element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },
}

/// Identifier of the curved boundary segment a vertex sits on.
/// Curve 0 is the unit circle centered at the origin.
pub const CURVE_UNIT_CIRCLE: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
    pub boundary_curve_id: Option<u32>,
}

impl Vertex {
    fn interior(x: f64, y: f64) -> Self {
        Vertex { x, y, on_boundary: false, boundary_curve_id: None }
    }
}

/// Triangle with counterclockwise vertices. `refinement_edge` is the local
/// index of the newest vertex; the edge opposite it is bisected next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub v: [usize; 3],
    pub refinement_edge: u8,
    pub generation: u32,
}

impl Element {
    /// Vertex pair of the edge opposite local vertex `k`, i.e. edge `k`.
    fn edge(&self, k: usize) -> (usize, usize) {
        (self.v[(k + 1) % 3], self.v[(k + 2) % 3])
    }

    fn refinement_edge_pair(&self) -> (usize, usize) {
        self.edge(self.refinement_edge as usize)
    }
}

/// Supported computational domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSpec {
    /// (0,1)^2 split along the diagonal.
    UnitSquare,
    /// (-1,1)^2, four quadrant squares each split through the center.
    Square2,
    /// Sector 0 < r < 1, 0 < theta < 3*pi/2, polygonalized arc.
    ThreeQuarterDisk { arc_segments: usize },
    /// (-1,1)^2 minus the quarter [0,1) x (-1,0]; reentrant corner at the origin.
    SlitSquare,
}

impl DomainSpec {
    pub fn from_name(name: &str) -> Result<Self, MeshError> {
        match name {
            "unit-square" => Ok(DomainSpec::UnitSquare),
            "square2" => Ok(DomainSpec::Square2),
            "three-quarter-disk" => Ok(DomainSpec::ThreeQuarterDisk { arc_segments: 12 }),
            "slit-square" => Ok(DomainSpec::SlitSquare),
            other => Err(MeshError::UnknownDomain(other.to_string())),
        }
    }
}

/// Result of [`Mesh::audit`].
#[derive(Debug, Clone, Copy)]
pub struct MeshAudit {
    pub conforming: bool,
    pub max_aspect: f64,
    pub min_angle_deg: f64,
    pub element_count: usize,
    pub vertex_count: usize,
}

/// Exact per-element geometry derived from vertex coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    /// Element diameter (longest edge for a triangle).
    pub h_t: f64,
    /// Length of edge k (the edge opposite local vertex k).
    pub edge_lengths: [f64; 3],
    /// Outward unit normal of edge k.
    pub normals: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub elements: Vec<Element>,
    /// Edge (sorted vertex pair) to adjacent element ids.
    edge_table: HashMap<(usize, usize), Vec<usize>>,
    /// For vertices created as edge midpoints, the parent vertex pair.
    /// Initial vertices carry `None`. Parents always have smaller indices.
    midpoint_parents: Vec<Option<(usize, usize)>>,
}

fn ekey(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Build the initial mesh of a domain. Refinement edges are assigned to
    /// the longest edge of each element (ties broken by the lexicographically
    /// smallest vertex pair), which keeps repeated closure terminating on all
    /// supported domains.
    pub fn initial(domain: DomainSpec) -> Mesh {
        let (vertices, raw_elements) = match domain {
            DomainSpec::UnitSquare => {
                let vs = vec![
                    Vertex::interior(0.0, 0.0),
                    Vertex::interior(1.0, 0.0),
                    Vertex::interior(1.0, 1.0),
                    Vertex::interior(0.0, 1.0),
                ];
                (vs, vec![[0, 1, 2], [0, 2, 3]])
            }
            DomainSpec::Square2 => {
                let vs = vec![
                    Vertex::interior(0.0, 0.0),   // center
                    Vertex::interior(1.0, 0.0),   // 1
                    Vertex::interior(1.0, 1.0),   // 2
                    Vertex::interior(0.0, 1.0),   // 3
                    Vertex::interior(-1.0, 1.0),  // 4
                    Vertex::interior(-1.0, 0.0),  // 5
                    Vertex::interior(-1.0, -1.0), // 6
                    Vertex::interior(0.0, -1.0),  // 7
                    Vertex::interior(1.0, -1.0),  // 8
                ];
                // Two triangles per quadrant, diagonals through the center.
                let els = vec![
                    [0, 1, 2],
                    [0, 2, 3],
                    [0, 3, 4],
                    [0, 4, 5],
                    [0, 5, 6],
                    [0, 6, 7],
                    [0, 7, 8],
                    [0, 8, 1],
                ];
                (vs, els)
            }
            DomainSpec::ThreeQuarterDisk { arc_segments } => {
                let n = arc_segments.max(3);
                let mut vs = vec![Vertex::interior(0.0, 0.0)];
                let span = 1.5 * std::f64::consts::PI;
                for i in 0..=n {
                    let th = span * i as f64 / n as f64;
                    vs.push(Vertex {
                        x: th.cos(),
                        y: th.sin(),
                        on_boundary: true,
                        boundary_curve_id: Some(CURVE_UNIT_CIRCLE),
                    });
                }
                let els = (0..n).map(|i| [0, i + 1, i + 2]).collect();
                (vs, els)
            }
            DomainSpec::SlitSquare => {
                let vs = vec![
                    Vertex::interior(0.0, 0.0),   // reentrant corner
                    Vertex::interior(1.0, 0.0),   // 1
                    Vertex::interior(1.0, 1.0),   // 2
                    Vertex::interior(0.0, 1.0),   // 3
                    Vertex::interior(-1.0, 1.0),  // 4
                    Vertex::interior(-1.0, 0.0),  // 5
                    Vertex::interior(-1.0, -1.0), // 6
                    Vertex::interior(0.0, -1.0),  // 7
                ];
                let els = vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5], [0, 5, 6], [0, 6, 7]];
                (vs, els)
            }
        };

        let elements = raw_elements
            .into_iter()
            .map(|v| {
                let e = Element { v, refinement_edge: 0, generation: 0 };
                Element { refinement_edge: longest_edge_index(&vertices, &e), ..e }
            })
            .collect::<Vec<_>>();

        let mut mesh = Mesh {
            midpoint_parents: vec![None; vertices.len()],
            vertices,
            elements,
            edge_table: HashMap::new(),
        };
        mesh.rebuild_edge_table();
        mesh.mark_boundary_vertices();
        debug_assert!(mesh.audit().conforming);
        mesh
    }

    /// Validating constructor for externally supplied connectivity.
    pub fn from_raw(vertices: Vec<Vertex>, elements: Vec<Element>) -> Result<Mesh, MeshError> {
        for (i, e) in elements.iter().enumerate() {
            if e.v.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidElement {
                    element: i,
                    reason: "vertex index out of range".into(),
                });
            }
            if e.v[0] == e.v[1] || e.v[1] == e.v[2] || e.v[0] == e.v[2] {
                return Err(MeshError::InvalidElement {
                    element: i,
                    reason: "repeated vertex".into(),
                });
            }
            let p = |k: usize| [vertices[e.v[k]].x, vertices[e.v[k]].y];
            let area = signed_area(p(0), p(1), p(2));
            if !(area > 0.0) {
                return Err(MeshError::InvalidElement {
                    element: i,
                    reason: format!("signed area {area} is not positive (degenerate or flipped)"),
                });
            }
            if e.refinement_edge > 2 {
                return Err(MeshError::InvalidElement {
                    element: i,
                    reason: "refinement edge index out of range".into(),
                });
            }
        }
        let mut mesh = Mesh {
            midpoint_parents: vec![None; vertices.len()],
            vertices,
            elements,
            edge_table: HashMap::new(),
        };
        mesh.rebuild_edge_table();
        mesh.mark_boundary_vertices();
        Ok(mesh)
    }

    /// Bypasses all validation; for audit tests that need broken meshes.
    #[doc(hidden)]
    pub fn from_raw_unchecked(vertices: Vec<Vertex>, elements: Vec<Element>) -> Mesh {
        let mut mesh = Mesh {
            midpoint_parents: vec![None; vertices.len()],
            vertices,
            elements,
            edge_table: HashMap::new(),
        };
        mesh.rebuild_edge_table();
        mesh
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_coords(&self, v: usize) -> [f64; 2] {
        [self.vertices[v].x, self.vertices[v].y]
    }

    /// Parent vertex pair when this vertex was created as an edge midpoint.
    pub fn midpoint_parents(&self, v: usize) -> Option<(usize, usize)> {
        self.midpoint_parents[v]
    }

    /// The element sharing edge `k` of element `t`, if any.
    pub fn neighbor_across(&self, t: usize, k: usize) -> Option<usize> {
        let (a, b) = self.elements[t].edge(k);
        let adj = self.edge_table.get(&ekey(a, b))?;
        adj.iter().copied().find(|&e| e != t)
    }

    /// Interior edges as (vertex pair, element pair), each edge once.
    pub fn interior_edges(&self) -> impl Iterator<Item = ((usize, usize), (usize, usize))> + '_ {
        self.edge_table.iter().filter_map(|(&k, adj)| {
            if adj.len() == 2 {
                Some((k, (adj[0], adj[1])))
            } else {
                None
            }
        })
    }

    fn rebuild_edge_table(&mut self) {
        let mut table: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = e.edge(k);
                table.entry(ekey(a, b)).or_default().push(i);
            }
        }
        self.edge_table = table;
    }

    fn mark_boundary_vertices(&mut self) {
        for (&(a, b), adj) in self.edge_table.iter() {
            if adj.len() == 1 {
                self.vertices[a].on_boundary = true;
                self.vertices[b].on_boundary = true;
            }
        }
    }

    pub fn element_geometry(&self, t: usize) -> ElementGeometry {
        let e = &self.elements[t];
        let p: Vec<[f64; 2]> = e.v.iter().map(|&v| self.vertex_coords(v)).collect();
        let area = signed_area(p[0], p[1], p[2]);
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            let tx = b[0] - a[0];
            let ty = b[1] - a[1];
            let len = (tx * tx + ty * ty).sqrt();
            edge_lengths[k] = len;
            // Rotate the CCW tangent by -90 degrees to point outward.
            normals[k] = [ty / len, -tx / len];
        }
        let h_t = edge_lengths.iter().cloned().fold(0.0, f64::max);
        ElementGeometry { area, h_t, edge_lengths, normals }
    }

    /// Bisect a single element (closure included), returning the new mesh.
    pub fn bisect(&self, element_id: usize) -> Mesh {
        self.refine(&[element_id], 1).0
    }

    /// Bisect every marked element at least `b` times and restore conformity.
    /// Returns the refined mesh and the sorted set of input elements that are
    /// no longer present.
    pub fn refine(&self, marked: &[usize], b: usize) -> (Mesh, Vec<usize>) {
        let mut w = Working::new(self);
        let mut frontier: Vec<usize> = marked.to_vec();
        frontier.sort_unstable();
        frontier.dedup();
        for _ in 0..b {
            let mut next = Vec::new();
            for &t in &frontier {
                w.ensure_bisected(t, 0);
                if let Some(ch) = w.children[t] {
                    next.extend_from_slice(&ch);
                }
            }
            frontier = next;
        }
        w.finish(self)
    }

    /// Structural and shape-quality audit.
    pub fn audit(&self) -> MeshAudit {
        let mut conforming = true;

        // Adjacency counts and orientation.
        let mut table: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            if e.v[0] == e.v[1] || e.v[1] == e.v[2] || e.v[0] == e.v[2] {
                conforming = false;
                continue;
            }
            let p = |k: usize| self.vertex_coords(e.v[k]);
            if signed_area(p(0), p(1), p(2)) <= 0.0 {
                conforming = false;
            }
            for k in 0..3 {
                let (a, b) = e.edge(k);
                table.entry(ekey(a, b)).or_default().push(i);
            }
        }
        if table.values().any(|adj| adj.len() > 2) {
            conforming = false;
        }

        // Hanging nodes: a once-adjacent edge whose exact midpoint exists as a
        // vertex with sub-edges on the other side. Midpoints are computed with
        // the same formula used during refinement, so bit-exact lookup works.
        let mut pos_index: HashMap<(u64, u64), usize> = HashMap::new();
        for (i, v) in self.vertices.iter().enumerate() {
            pos_index.insert((v.x.to_bits(), v.y.to_bits()), i);
        }
        for (&(a, b), adj) in table.iter() {
            if adj.len() != 1 {
                continue;
            }
            let pa = self.vertex_coords(a);
            let pb = self.vertex_coords(b);
            let mid = (0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]));
            if let Some(&m) = pos_index.get(&(mid.0.to_bits(), mid.1.to_bits())) {
                if table.contains_key(&ekey(a, m)) && table.contains_key(&ekey(m, b)) {
                    conforming = false;
                }
            }
        }

        // Stored edge table must agree with the rebuilt one.
        if self.edge_table.len() != table.len() {
            conforming = false;
        }

        let mut max_aspect: f64 = 0.0;
        let mut min_angle: f64 = f64::INFINITY;
        for t in 0..self.elements.len() {
            let g = self.element_geometry(t);
            if g.area <= 0.0 {
                continue;
            }
            let perimeter: f64 = g.edge_lengths.iter().sum();
            let inscribed = 4.0 * g.area / perimeter; // diameter of inscribed circle
            max_aspect = max_aspect.max(g.h_t / inscribed);
            // Law of cosines per corner.
            let [l0, l1, l2] = g.edge_lengths;
            for (opp, e1, e2) in [(l0, l1, l2), (l1, l2, l0), (l2, l0, l1)] {
                let c = ((e1 * e1 + e2 * e2 - opp * opp) / (2.0 * e1 * e2)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(c.acos());
            }
        }

        MeshAudit {
            conforming,
            max_aspect,
            min_angle_deg: min_angle.to_degrees(),
            element_count: self.elements.len(),
            vertex_count: self.vertices.len(),
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|t| self.element_geometry(t).area).sum()
    }
}

fn longest_edge_index(vertices: &[Vertex], e: &Element) -> u8 {
    let p = |v: usize| [vertices[v].x, vertices[v].y];
    let mut best = 0usize;
    let mut best_len = -1.0f64;
    for k in 0..3 {
        let (a, b) = e.edge(k);
        let len = dist(p(a), p(b));
        let tie = (len - best_len).abs() <= 1e-12 * len.max(best_len);
        if len > best_len && !tie {
            best = k;
            best_len = len;
        } else if tie {
            // Deterministic tie-break: smallest sorted vertex pair.
            let (ca, cb) = e.edge(best);
            if ekey(a, b) < ekey(ca, cb) {
                best = k;
                best_len = len.max(best_len);
            }
        }
    }
    best as u8
}

/// Mutable refinement state; parents are tombstoned, children appended.
struct Working {
    vertices: Vec<Vertex>,
    midpoint_parents: Vec<Option<(usize, usize)>>,
    elements: Vec<Element>,
    alive: Vec<bool>,
    children: Vec<Option<[usize; 2]>>,
    edge_table: HashMap<(usize, usize), Vec<usize>>,
    midpoint_of: HashMap<(usize, usize), usize>,
}

impl Working {
    fn new(mesh: &Mesh) -> Working {
        Working {
            vertices: mesh.vertices.clone(),
            midpoint_parents: mesh.midpoint_parents.clone(),
            elements: mesh.elements.clone(),
            alive: vec![true; mesh.elements.len()],
            children: vec![None; mesh.elements.len()],
            edge_table: mesh.edge_table.clone(),
            midpoint_of: HashMap::new(),
        }
    }

    fn neighbor_across(&self, t: usize, key: (usize, usize)) -> Option<usize> {
        self.edge_table.get(&key)?.iter().copied().find(|&e| e != t)
    }

    /// Midpoint vertex of an edge, created on first use. A midpoint of a
    /// boundary edge whose endpoints both lie on the same curved segment is
    /// snapped onto that curve.
    fn midpoint_vertex(&mut self, key: (usize, usize)) -> usize {
        if let Some(&m) = self.midpoint_of.get(&key) {
            return m;
        }
        let (a, b) = key;
        let va = self.vertices[a];
        let vb = self.vertices[b];
        let is_boundary = self.edge_table.get(&key).map_or(false, |adj| adj.len() == 1);
        let mut x = 0.5 * (va.x + vb.x);
        let mut y = 0.5 * (va.y + vb.y);
        let mut curve = None;
        if is_boundary {
            if let (Some(ca), Some(cb)) = (va.boundary_curve_id, vb.boundary_curve_id) {
                if ca == cb && ca == CURVE_UNIT_CIRCLE {
                    let r = (x * x + y * y).sqrt();
                    if r > 0.0 {
                        x /= r;
                        y /= r;
                    }
                    curve = Some(ca);
                }
            }
        }
        let m = self.vertices.len();
        self.vertices.push(Vertex { x, y, on_boundary: is_boundary, boundary_curve_id: curve });
        self.midpoint_parents.push(Some(key));
        self.midpoint_of.insert(key, m);
        m
    }

    /// Guarantee element `t` has been bisected, recursively refining the
    /// neighbor across the refinement edge until the pair is compatible.
    fn ensure_bisected(&mut self, t: usize, depth: usize) {
        assert!(
            depth <= MAX_CLOSURE_DEPTH,
            "bisection closure exceeded depth {MAX_CLOSURE_DEPTH}; incompatible edge tagging"
        );
        if !self.alive[t] {
            return;
        }
        loop {
            let (a, b) = self.elements[t].refinement_edge_pair();
            let key = ekey(a, b);
            match self.neighbor_across(t, key) {
                None => {
                    let m = self.midpoint_vertex(key);
                    self.bisect_leaf(t, m);
                    return;
                }
                Some(n) => {
                    let nkey = {
                        let (na, nb) = self.elements[n].refinement_edge_pair();
                        ekey(na, nb)
                    };
                    if nkey == key {
                        let m = self.midpoint_vertex(key);
                        self.bisect_leaf(t, m);
                        self.bisect_leaf(n, m);
                        return;
                    }
                    self.ensure_bisected(n, depth + 1);
                    // A child of n with refinement edge `key` now borders t.
                }
            }
        }
    }

    /// Split `t` across its refinement edge at vertex `m`. The caller has
    /// already arranged conformity on the other side of that edge.
    fn bisect_leaf(&mut self, t: usize, m: usize) {
        let e = self.elements[t];
        let k = e.refinement_edge as usize;
        let peak = e.v[k];
        let a = e.v[(k + 1) % 3];
        let b = e.v[(k + 2) % 3];
        let gen = e.generation + 1;
        // Newest vertex m sits at local index 2 resp. 1, so the children's
        // refinement edges are the parent's two non-refinement edges.
        let c1 = Element { v: [peak, a, m], refinement_edge: 2, generation: gen };
        let c2 = Element { v: [peak, m, b], refinement_edge: 1, generation: gen };

        for k in 0..3 {
            let (ea, eb) = e.edge(k);
            let key = ekey(ea, eb);
            if let Some(adj) = self.edge_table.get_mut(&key) {
                adj.retain(|&x| x != t);
                if adj.is_empty() {
                    self.edge_table.remove(&key);
                }
            }
        }

        let i1 = self.elements.len();
        let i2 = i1 + 1;
        self.elements.push(c1);
        self.elements.push(c2);
        self.alive.push(true);
        self.alive.push(true);
        self.children.push(None);
        self.children.push(None);
        self.alive[t] = false;
        self.children[t] = Some([i1, i2]);

        for (i, c) in [(i1, c1), (i2, c2)] {
            for k in 0..3 {
                let (ea, eb) = c.edge(k);
                self.edge_table.entry(ekey(ea, eb)).or_default().push(i);
            }
        }
    }

    fn finish(self, input: &Mesh) -> (Mesh, Vec<usize>) {
        let refined: Vec<usize> =
            (0..input.elements.len()).filter(|&t| !self.alive[t]).collect();
        let elements: Vec<Element> = self
            .elements
            .into_iter()
            .zip(self.alive)
            .filter_map(|(e, alive)| alive.then_some(e))
            .collect();
        let mut mesh = Mesh {
            vertices: self.vertices,
            elements,
            edge_table: HashMap::new(),
            midpoint_parents: self.midpoint_parents,
        };
        mesh.rebuild_edge_table();
        mesh.mark_boundary_vertices();
        (mesh, refined)
    }
}

/// Transfer per-vertex values from a mesh to one of its refinements.
/// New vertices are edge midpoints, so linear interpolation along the parent
/// edge (the average of the endpoint values) is the exact P1 prolongation;
/// for arc-snapped midpoints it is the linear extension along the old edge.
pub fn prolong_vertex_values(coarse_values: &[f64], fine: &Mesh) -> Vec<f64> {
    let mut out = Vec::with_capacity(fine.n_vertices());
    out.extend_from_slice(coarse_values);
    for v in coarse_values.len()..fine.n_vertices() {
        let (a, b) = fine
            .midpoint_parents(v)
            .expect("vertex beyond the coarse mesh must be a midpoint");
        out.push(0.5 * (out[a] + out[b]));
    }
    out
}
