//! Conforming triangle meshes with newest vertex bisection (NVB).
//!
//! Vertex ids are persistent: refinement keeps every existing vertex at its
//! id and appends new midpoints, each of which remembers the edge it bisected.
//! That parent record is what prolongation and the two-level estimator use
//! to move between nested meshes.

mod io;
mod refine;

use std::collections::HashMap;

pub use io::{read_mesh, write_mesh};
pub use refine::{realized_new_vertices, refine, uniform_refine, NewVertex, TwoLevelOverlay};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// An undirected edge, stored with the smaller vertex id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge(usize, usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.0, self.1)
    }
}

/// A positively oriented triangle. Local edge `k` joins vertices `k` and
/// `(k + 1) % 3`; `ref_edge` names the edge NVB bisects next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub ref_edge: u8,
    pub generation: u32,
}

impl Triangle {
    pub fn new(vertices: [usize; 3], ref_edge: u8) -> Self {
        Triangle {
            vertices,
            ref_edge,
            generation: 0,
        }
    }

    /// Vertices rotated so that the reference edge is `(v[0], v[1])` and
    /// `v[2]` is the newest vertex.
    pub fn canonical(&self) -> [usize; 3] {
        let k = self.ref_edge as usize % 3;
        let v = self.vertices;
        [v[k], v[(k + 1) % 3], v[(k + 2) % 3]]
    }

    pub fn edges(&self) -> [Edge; 3] {
        let v = self.vertices;
        [Edge::new(v[0], v[1]), Edge::new(v[1], v[2]), Edge::new(v[2], v[0])]
    }

    pub fn reference_edge(&self) -> Edge {
        let c = self.canonical();
        Edge::new(c[0], c[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    boundary: Vec<bool>,
    triangles: Vec<Triangle>,
    parents: Vec<Option<Edge>>,
}

/// Edges of a mesh in ascending `(min id, max id)` order with their
/// adjacent triangles.
#[derive(Debug, Clone)]
pub struct EdgeTable {
    pub edges: Vec<Edge>,
    pub adjacent: Vec<Vec<usize>>,
    index: HashMap<Edge, usize>,
}

impl EdgeTable {
    pub fn id(&self, edge: Edge) -> Option<usize> {
        self.index.get(&edge).copied()
    }

    pub fn is_interior(&self, id: usize) -> bool {
        self.adjacent[id].len() == 2
    }

    pub fn interior(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .zip(&self.adjacent)
            .filter(|(_, adj)| adj.len() == 2)
            .map(|(e, _)| *e)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

impl Mesh {
    /// Builds a mesh and rejects it unless it passes [`Mesh::audit`].
    pub fn new(vertices: Vec<Point>, boundary: Vec<bool>, triangles: Vec<Triangle>) -> Result<Self> {
        if vertices.len() != boundary.len() {
            return Err(Error::InvalidInput(format!(
                "{} vertices but {} boundary flags",
                vertices.len(),
                boundary.len()
            )));
        }
        for t in &triangles {
            if t.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!(
                    "triangle {:?} references a missing vertex",
                    t.vertices
                )));
            }
        }
        let parents = vec![None; vertices.len()];
        let mesh = Mesh {
            vertices,
            boundary,
            triangles,
            parents,
        };
        let audit = mesh.audit();
        if !audit.is_valid() {
            return Err(Error::NonConforming(audit.issues.join("; ")));
        }
        Ok(mesh)
    }

    pub(crate) fn from_parts(
        vertices: Vec<Point>,
        boundary: Vec<bool>,
        triangles: Vec<Triangle>,
        parents: Vec<Option<Edge>>,
    ) -> Self {
        Mesh {
            vertices,
            boundary,
            triangles,
            parents,
        }
    }

    /// The default initial mesh of the L-shaped domain
    /// `(-1,1)^2 \ (-1,0]^2`: three unit squares, each cut along the diagonal
    /// from its lower-left to its upper-right corner. Diagonals are the
    /// reference edges.
    pub fn initial_lshape() -> Self {
        let vertices = vec![
            [0.0, -1.0],
            [1.0, -1.0],
            [-1.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [-1.0, 1.0],
            [0.0, 1.0],
            [1.0, 1.0],
        ];
        // squares listed counter-clockwise from the lower-left corner
        let squares = [[0, 1, 4, 3], [2, 3, 6, 5], [3, 4, 7, 6]];
        let triangles = squares
            .iter()
            .flat_map(|&[p0, p1, p2, p3]| {
                [Triangle::new([p0, p1, p2], 2), Triangle::new([p0, p2, p3], 0)]
            })
            .collect();
        let n = vertices.len();
        Mesh::from_parts(vertices, vec![true; n], triangles, vec![None; n])
    }

    /// The unit square `(0,1)^2` split along its main diagonal.
    pub fn unit_square() -> Self {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let triangles = vec![Triangle::new([0, 1, 2], 2), Triangle::new([0, 2, 3], 0)];
        Mesh::from_parts(vertices, vec![true; 4], triangles, vec![None; 4])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// The bisected edge a vertex was created on, if any.
    pub fn parent_edge(&self, v: usize) -> Option<Edge> {
        self.parents[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn edge_table(&self) -> EdgeTable {
        let mut adj: HashMap<Edge, Vec<usize>> = HashMap::with_capacity(self.triangles.len() * 2);
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in tri.edges() {
                adj.entry(e).or_default().push(t);
            }
        }
        let mut entries: Vec<(Edge, Vec<usize>)> = adj.into_iter().collect();
        entries.sort_unstable_by_key(|(e, _)| *e);
        let index = entries.iter().enumerate().map(|(i, (e, _))| (*e, i)).collect();
        let (edges, adjacent) = entries.into_iter().unzip();
        EdgeTable {
            edges,
            adjacent,
            index,
        }
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_min_angle(self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every structural invariant and reports what it found.
    pub fn audit(&self) -> MeshAudit {
        let mut issues = Vec::new();
        let table = self.edge_table();

        let mut positively_oriented = true;
        for t in 0..self.triangles.len() {
            if self.signed_area(t) <= 0.0 {
                positively_oriented = false;
                issues.push(format!("triangle {t} has non-positive signed area"));
            }
        }
        let ref_edges_valid = self.triangles.iter().all(|t| t.ref_edge < 3);
        if !ref_edges_valid {
            issues.push("reference-edge marker outside 0..=2".into());
        }

        let mut conforming = true;
        let mut on_boundary_edge = vec![false; self.vertices.len()];
        let coords: HashMap<(u64, u64), usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0].to_bits(), p[1].to_bits()), i))
            .collect();
        let mut n_boundary = 0;
        for (e, adj) in table.edges.iter().zip(&table.adjacent) {
            let (a, b) = e.endpoints();
            match adj.len() {
                1 => {
                    n_boundary += 1;
                    on_boundary_edge[a] = true;
                    on_boundary_edge[b] = true;
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if let Some(&h) = coords.get(&(mid[0].to_bits(), mid[1].to_bits())) {
                        conforming = false;
                        issues.push(format!("hanging vertex {h} on edge ({a}, {b})"));
                    }
                }
                2 => {}
                k => {
                    conforming = false;
                    issues.push(format!("edge ({a}, {b}) shared by {k} triangles"));
                }
            }
        }
        let mut boundary_flags_consistent = true;
        for (v, (&flag, &seen)) in self.boundary.iter().zip(&on_boundary_edge).enumerate() {
            if flag != seen {
                boundary_flags_consistent = false;
                issues.push(format!(
                    "vertex {v} boundary flag {flag} disagrees with edge adjacency"
                ));
            }
        }

        MeshAudit {
            conforming,
            positively_oriented,
            ref_edges_valid,
            boundary_flags_consistent,
            min_angle: self.min_angle(),
            num_vertices: self.vertices.len(),
            num_triangles: self.triangles.len(),
            num_edges: table.len(),
            num_boundary_edges: n_boundary,
            num_interior_edges: table.len() - n_boundary,
            issues,
        }
    }

    /// Locates the triangle containing `p` by brute force; returns the
    /// triangle index and barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        const EPS: f64 = 1e-12;
        (0..self.triangles.len()).find_map(|t| {
            let bary = barycentric(self.corners(t), p);
            bary.iter().all(|&l| l >= -EPS).then_some((t, bary))
        })
    }
}

#[derive(Debug, Clone)]
pub struct MeshAudit {
    pub conforming: bool,
    pub positively_oriented: bool,
    pub ref_edges_valid: bool,
    pub boundary_flags_consistent: bool,
    pub min_angle: f64,
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub num_edges: usize,
    pub num_boundary_edges: usize,
    pub num_interior_edges: usize,
    pub issues: Vec<String>,
}

impl MeshAudit {
    pub fn is_valid(&self) -> bool {
        self.conforming && self.positively_oriented && self.ref_edges_valid && self.boundary_flags_consistent
    }
}

pub fn barycentric([p0, p1, p2]: [Point; 3], p: Point) -> [f64; 3] {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let l1 = ((p[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p[1] - p0[1])) / det;
    let l2 = ((p1[0] - p0[0]) * (p[1] - p0[1]) - (p[0] - p0[0]) * (p1[1] - p0[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn triangle_min_angle(p: [Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let w = [c[0] - a[0], c[1] - a[1]];
            let cross = u[0] * w[1] - u[1] * w[0];
            let dot = u[0] * w[0] + u[1] * w[1];
            cross.abs().atan2(dot).to_degrees()
        })
        .fold(f64::INFINITY, f64::min)
}
