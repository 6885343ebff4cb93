use std::collections::{BTreeSet, HashMap, HashSet};

use super::{Edge, EdgeTable, Mesh, Triangle};
use crate::error::{Error, Result};

/// A vertex of the uniform refinement that is new and interior, i.e. a
/// member of N⁺. It is identified by the coarse edge it bisects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NewVertex {
    pub edge: Edge,
    /// Vertex id in the fine mesh.
    pub vertex: usize,
}

/// A mesh together with its uniform refinement (every edge bisected once).
#[derive(Debug, Clone)]
pub struct TwoLevelOverlay {
    pub fine: Mesh,
    /// N⁺ in ascending parent-edge order.
    pub new_vertices: Vec<NewVertex>,
    /// Coarse parent of every fine triangle.
    pub parent_triangle: Vec<usize>,
    positions: HashMap<Edge, usize>,
}

impl TwoLevelOverlay {
    /// Position of the midpoint of `edge` within N⁺.
    pub fn position(&self, edge: Edge) -> Option<usize> {
        self.positions.get(&edge).copied()
    }

    pub fn len(&self) -> usize {
        self.new_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_vertices.is_empty()
    }

    pub fn edges_of(&self, positions: &[usize]) -> Vec<Edge> {
        positions.iter().map(|&p| self.new_vertices[p].edge).collect()
    }

    /// For every coarse triangle, the number of z ∈ N⁺ whose fine hat
    /// function has support overlapping it with positive area.
    pub fn hat_overlap_counts(&self, num_coarse: usize) -> Vec<usize> {
        let fine_vertex_pos: HashMap<usize, usize> = self
            .new_vertices
            .iter()
            .enumerate()
            .map(|(i, nv)| (nv.vertex, i))
            .collect();
        let mut touching: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_coarse];
        for (t, tri) in self.fine.triangles().iter().enumerate() {
            for v in tri.vertices {
                if let Some(&z) = fine_vertex_pos.get(&v) {
                    touching[self.parent_triangle[t]].insert(z);
                }
            }
        }
        touching.iter().map(BTreeSet::len).collect()
    }
}

/// Uniform refinement: every triangle is split into four by three
/// bisections.
pub fn uniform_refine(mesh: &Mesh) -> TwoLevelOverlay {
    let table = mesh.edge_table();
    let marked: BTreeSet<Edge> = table.edges.iter().copied().collect();
    let (fine, parent_triangle, mids) = bisect_marked(mesh, &table, &marked);
    let new_vertices: Vec<NewVertex> = table
        .interior()
        .map(|edge| NewVertex {
            edge,
            vertex: mids[&edge],
        })
        .collect();
    let positions = new_vertices
        .iter()
        .enumerate()
        .map(|(i, nv)| (nv.edge, i))
        .collect();
    TwoLevelOverlay {
        fine,
        new_vertices,
        parent_triangle,
        positions,
    }
}

/// The coarsest NVB refinement of `mesh` whose vertices include the
/// midpoints of all `marked` edges. Every marked edge must be an interior
/// edge, i.e. its midpoint must belong to N⁺.
pub fn refine(mesh: &Mesh, marked: &[Edge]) -> Result<Mesh> {
    let table = mesh.edge_table();
    let mut closed: BTreeSet<Edge> = BTreeSet::new();
    for &e in marked {
        match table.id(e) {
            Some(id) if table.is_interior(id) => {
                closed.insert(e);
            }
            _ => {
                let (a, b) = e.endpoints();
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) is not an interior edge of the mesh"
                )));
            }
        }
    }
    if closed.is_empty() {
        return Ok(mesh.clone());
    }
    close_marking(mesh, &table, &mut closed);
    let (refined, _, _) = bisect_marked(mesh, &table, &closed);
    Ok(refined)
}

/// Propagates marks so that every triangle with a marked edge also has its
/// reference edge marked.
fn close_marking(mesh: &Mesh, table: &EdgeTable, marked: &mut BTreeSet<Edge>) {
    let tris = mesh.triangles();
    let mut queue: Vec<Edge> = marked.iter().copied().collect();
    while let Some(e) = queue.pop() {
        let id = table.id(e).expect("marked edge belongs to the mesh");
        for &t in &table.adjacent[id] {
            let r = tris[t].reference_edge();
            if marked.insert(r) {
                queue.push(r);
            }
        }
    }
}

type Bisection = (Mesh, Vec<usize>, HashMap<Edge, usize>);

/// Bisects every marked edge. The marking must be closed. Midpoints get
/// consecutive ids in ascending edge order; children follow parent order.
fn bisect_marked(mesh: &Mesh, table: &EdgeTable, marked: &BTreeSet<Edge>) -> Bisection {
    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary.clone();
    let mut parents = mesh.parents.clone();
    let mut mids = HashMap::with_capacity(marked.len());
    for &e in marked {
        let (a, b) = e.endpoints();
        let (pa, pb) = (vertices[a], vertices[b]);
        let id = vertices.len();
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        let on_boundary = table.adjacent[table.id(e).expect("marked edge in table")].len() == 1;
        boundary.push(on_boundary);
        parents.push(Some(e));
        mids.insert(e, id);
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len() + 2 * marked.len());
    let mut parent_triangle = Vec::with_capacity(triangles.capacity());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let before = triangles.len();
        bisect_into(*tri, &mids, &mut triangles);
        parent_triangle.extend(std::iter::repeat(t).take(triangles.len() - before));
    }
    (
        Mesh::from_parts(vertices, boundary, triangles, parents),
        parent_triangle,
        mids,
    )
}

fn bisect_into(tri: Triangle, mids: &HashMap<Edge, usize>, out: &mut Vec<Triangle>) {
    let [a, b, c] = tri.canonical();
    match mids.get(&Edge::new(a, b)) {
        Some(&m) => {
            let generation = tri.generation + 1;
            // children keep the orientation; their reference edges are the
            // old non-reference edges, opposite the new vertex m
            for vertices in [[c, a, m], [b, c, m]] {
                let child = Triangle {
                    vertices,
                    ref_edge: 0,
                    generation,
                };
                bisect_into(child, mids, out);
            }
        }
        None => out.push(tri),
    }
}

/// Set of fine vertex positions in N⁺ that became vertices of `refined`.
pub fn realized_new_vertices(overlay: &TwoLevelOverlay, coarse: &Mesh, refined: &Mesh) -> Vec<usize> {
    let created: HashSet<Edge> = (coarse.num_vertices()..refined.num_vertices())
        .filter_map(|v| refined.parent_edge(v))
        .collect();
    overlay
        .new_vertices
        .iter()
        .enumerate()
        .filter(|(_, nv)| created.contains(&nv.edge))
        .map(|(i, _)| i)
        .collect()
}
