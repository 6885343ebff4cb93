use std::sync::Arc;

use sprs::CsMat;

use super::quadrature::TriangleRule;
use crate::meshkit::{Mesh, Point};
use crate::model::ScalarField;

/// P1 space with homogeneous Dirichlet conditions on a mesh: free-node
/// numbering, element geometry and a fixed CSR sparsity pattern.
#[derive(Debug)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    free_of_vertex: Vec<Option<usize>>,
    free_vertices: Vec<usize>,
    areas: Vec<f64>,
    gradients: Vec<[[f64; 2]; 3]>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// For each element, the CSR slot of local entry `(i, j)` if both
    /// vertices are free.
    slots: Vec<[Option<usize>; 9]>,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mut free_of_vertex = vec![None; mesh.num_vertices()];
        let mut free_vertices = Vec::new();
        for v in 0..mesh.num_vertices() {
            if !mesh.is_boundary(v) {
                free_of_vertex[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        let n = free_vertices.len();

        let mut areas = Vec::with_capacity(mesh.num_triangles());
        let mut gradients = Vec::with_capacity(mesh.num_triangles());
        for t in 0..mesh.num_triangles() {
            let [p0, p1, p2] = mesh.corners(t);
            let area = mesh.signed_area(t);
            let inv = 1.0 / (2.0 * area);
            // ∇λ_i = rot(p_{i+2} - p_{i+1}) / (2|T|)
            let grad = |a: Point, b: Point| [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
            gradients.push([grad(p1, p2), grad(p2, p0), grad(p0, p1)]);
            areas.push(area);
        }

        let mut neighbours: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for tri in mesh.triangles() {
            let free = tri.vertices.map(|v| free_of_vertex[v]);
            for a in free.iter().flatten() {
                for b in free.iter().flatten() {
                    neighbours[*a].push(*b);
                }
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for row in &mut neighbours {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        let slot = |i: usize, j: usize| -> usize {
            let row = &indices[indptr[i]..indptr[i + 1]];
            indptr[i] + row.binary_search(&j).expect("pattern contains element couplings")
        };
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let free = tri.vertices.map(|v| free_of_vertex[v]);
                let mut s = [None; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        if let (Some(a), Some(b)) = (free[i], free[j]) {
                            s[3 * i + j] = Some(slot(a, b));
                        }
                    }
                }
                s
            })
            .collect();

        FemSpace {
            mesh,
            free_of_vertex,
            free_vertices,
            areas,
            gradients,
            indptr,
            indices,
            slots,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Number of free nodes, i.e. `dim X`.
    pub fn dim(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn free_index(&self, vertex: usize) -> Option<usize> {
        self.free_of_vertex[vertex]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free_vertices
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.gradients[t]
    }

    /// Per-element `∫_T a dx`.
    pub fn element_integrals(&self, rule: TriangleRule, a: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.mesh.num_triangles())
            .map(|t| rule.integrate(self.mesh.corners(t), self.areas[t], &a))
            .collect()
    }

    /// Stiffness matrix `∫ a ∇φ_i·∇φ_j` over free nodes, given `∫_T a` per
    /// element (P1 gradients are constant per element).
    pub fn stiffness_from_integrals(&self, integrals: &[f64]) -> CsMat<f64> {
        let mut data = vec![0.0; self.indices.len()];
        for (t, slots) in self.slots.iter().enumerate() {
            let g = &self.gradients[t];
            let w = integrals[t];
            for i in 0..3 {
                for j in 0..3 {
                    if let Some(s) = slots[3 * i + j] {
                        data[s] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
            }
        }
        let n = self.dim();
        CsMat::new((n, n), self.indptr.clone(), self.indices.clone(), data)
    }

    /// `(∫_D f φ_z dx)_z` over free nodes. Constant `f` is integrated
    /// exactly (`f |patch| / 3`).
    pub fn load_vector(&self, rule: TriangleRule, f: &ScalarField) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let local: [f64; 3] = match f.as_constant() {
                Some(c) => [c * self.areas[t] / 3.0; 3],
                None => {
                    let corners = self.mesh.corners(t);
                    let mut acc = [0.0; 3];
                    for (l, w) in rule.points() {
                        let fx = f.eval(super::quadrature::map_to(corners, l));
                        for k in 0..3 {
                            acc[k] += self.areas[t] * w * fx * l[k];
                        }
                    }
                    acc
                }
            };
            for (k, &v) in tri.vertices.iter().enumerate() {
                if let Some(i) = self.free_of_vertex[v] {
                    out[i] += local[k];
                }
            }
        }
        out
    }

    /// Interpolates vertex values into a free-node vector.
    pub fn restrict_vertex_values(&self, values: &[f64]) -> Vec<f64> {
        self.free_vertices.iter().map(|&v| values[v]).collect()
    }

    /// Expands a free-node vector to all vertices (boundary values zero).
    pub fn vertex_values(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.num_vertices()];
        for (&v, &x) in self.free_vertices.iter().zip(free) {
            out[v] = x;
        }
        out
    }
}

/// `A x` accumulated into `y` with weight `alpha`.
pub fn spmv_acc(a: &CsMat<f64>, alpha: f64, x: &[f64], y: &mut [f64]) {
    let indptr = a.indptr();
    let indptr = indptr.raw_storage();
    let indices = a.indices();
    let data = a.data();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in indptr[i]..indptr[i + 1] {
            acc += data[k] * x[indices[k]];
        }
        *yi += alpha * acc;
    }
}

pub fn diagonal(a: &CsMat<f64>) -> Vec<f64> {
    (0..a.rows()).map(|i| *a.get(i, i).unwrap_or(&0.0)).collect()
}
