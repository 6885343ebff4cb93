//! Dense reference computations used as oracles by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use sgfem::galerkin::FemSpace;
use sgfem::meshkit::{refine, Edge, Mesh};
use sgfem::model::ProblemSpec;
use sgfem::paramkit::{IndexSet, MultiIndex};

/// Five-point Gauss-Legendre rule on [-1, 1], exact to degree 9.
pub fn gauss5() -> [(f64, f64); 5] {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
    [(-b, wb), (-a, wa), (0.0, 128.0 / 225.0), (a, wa), (b, wb)]
}

/// Explicit orthonormal Legendre polynomials for `dy/2`, degree ≤ 3.
pub fn legendre_explicit(n: u32, y: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => 3f64.sqrt() * y,
        2 => 5f64.sqrt() * (3.0 * y * y - 1.0) / 2.0,
        3 => 7f64.sqrt() * (5.0 * y * y * y - 3.0 * y) / 2.0,
        _ => panic!("degree {n} not tabulated"),
    }
}

/// `∫ y_m P_ν P_μ dπ` by tensor Gauss quadrature, one factor per dimension.
pub fn coupling_by_quadrature(nu: &MultiIndex, mu: &MultiIndex, m: u32) -> f64 {
    let top = nu.max_dimension().max(mu.max_dimension()).max(m);
    let mut value = 1.0;
    for k in 1..=top {
        let (a, b) = (nu.degree(k), mu.degree(k));
        let factor: f64 = gauss5()
            .iter()
            .map(|&(y, w)| {
                let weight = if k == m { y } else { 1.0 };
                0.5 * w * weight * legendre_explicit(a, y) * legendre_explicit(b, y)
            })
            .sum();
        value *= factor;
    }
    value
}

/// Dense stiffness over the free nodes from per-element `∫_T a`; element
/// gradients come from the inverse Jacobian.
pub fn dense_stiffness(space: &FemSpace, integrals: &[f64]) -> DMatrix<f64> {
    let mesh = space.mesh();
    let n = space.dim();
    let mut a = DMatrix::zeros(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [p0, p1, p2] = mesh.corners(t);
        let jac = nalgebra::Matrix2::new(p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1]);
        let area = jac.determinant().abs() / 2.0;
        let inv_t = jac.try_inverse().unwrap().transpose();
        let ref_grads = [
            nalgebra::Vector2::new(-1.0, -1.0),
            nalgebra::Vector2::new(1.0, 0.0),
            nalgebra::Vector2::new(0.0, 1.0),
        ];
        let grads: Vec<_> = ref_grads.iter().map(|g| inv_t * g).collect();
        let mean = integrals[t] / area;
        for i in 0..3 {
            for j in 0..3 {
                if let (Some(a_i), Some(a_j)) = (space.free_index(tri.vertices[i]), space.free_index(tri.vertices[j])) {
                    a[(a_i, a_j)] += mean * area * grads[i].dot(&grads[j]);
                }
            }
        }
    }
    a
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let w = 2.0 / ((1.0 - x * x) * dp * dp);
                    return (x, w);
                }
            }
        })
        .collect()
}

/// `∫_T g` by a collapsed (Duffy) tensor Gauss rule with `n × n` points.
pub fn duffy_integrate(corners: [[f64; 2]; 3], n: usize, g: impl Fn([f64; 2]) -> f64) -> f64 {
    let [p0, p1, p2] = corners;
    let det = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
    let rule = gauss_legendre(n);
    let mut sum = 0.0;
    for &(u, wu) in &rule {
        let s = 0.5 * (u + 1.0);
        for &(v, wv) in &rule {
            let t = 0.5 * (v + 1.0) * (1.0 - s);
            let x = [
                p0[0] + s * (p1[0] - p0[0]) + t * (p2[0] - p0[0]),
                p0[1] + s * (p1[1] - p0[1]) + t * (p2[1] - p0[1]),
            ];
            sum += 0.25 * wu * wv * (1.0 - s) * g(x);
        }
    }
    sum * det
}

/// Dense `A_0..A_max_dim` with element integrals from a 24 × 24 Duffy rule.
pub fn dense_family(space: &FemSpace, spec: &ProblemSpec, max_dim: u32) -> Vec<DMatrix<f64>> {
    let mesh = space.mesh();
    (0..=max_dim)
        .map(|m| {
            let ints: Vec<f64> = (0..mesh.num_triangles())
                .map(|t| duffy_integrate(mesh.corners(t), 24, |x| spec.coefficient(m, x)))
                .collect();
            dense_stiffness(space, &ints)
        })
        .collect()
}

/// Dense `Σ_m A_m ⊗ G_m` on `rows × cols` with blocks in index-set order.
pub fn dense_kronecker(stiff: &[DMatrix<f64>], rows: &IndexSet, cols: &IndexSet) -> DMatrix<f64> {
    let n = stiff[0].nrows();
    let mut b = DMatrix::zeros(n * rows.len(), n * cols.len());
    for (i, nu) in rows.iter().enumerate() {
        for (j, mu) in cols.iter().enumerate() {
            for (m, a) in stiff.iter().enumerate() {
                let g = if m == 0 {
                    if nu == mu {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    coupling_by_quadrature(nu, mu, m as u32)
                };
                if g.abs() > 1e-14 {
                    let mut view = b.view_mut((i * n, j * n), (n, n));
                    view += a * g;
                }
            }
        }
    }
    b
}

pub fn dense_load(space: &FemSpace, rows: &IndexSet) -> DVector<f64> {
    let mesh = space.mesh();
    let n = space.dim();
    let mut f = DVector::zeros(n * rows.len());
    if let Some(k) = rows.position(&MultiIndex::zero()) {
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.signed_area(t);
            for v in tri.vertices {
                if let Some(i) = space.free_index(v) {
                    f[k * n + i] += area / 3.0;
                }
            }
        }
    }
    f
}

pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().cholesky().expect("SPD").solve(b)
}

/// P1 value of a vertex-value vector at `p`, found by scanning all triangles.
pub fn eval_p1(mesh: &Mesh, vertex_values: &[f64], p: [f64; 2]) -> f64 {
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = mesh.corners(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        let l0 = 1.0 - l1 - l2;
        if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
            let v = tri.vertices;
            return l0 * vertex_values[v[0]] + l1 * vertex_values[v[1]] + l2 * vertex_values[v[2]];
        }
    }
    panic!("point {p:?} outside the mesh");
}

/// First NVB refinement of the L-shape (marking interior edges greedily)
/// with exactly `dim` free nodes.
pub fn lshape_with_free_nodes(dim: usize) -> Mesh {
    let mut mesh = Mesh::initial_lshape();
    loop {
        let free = (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary(v)).count();
        if free == dim {
            return mesh;
        }
        assert!(free < dim, "overshot {dim} free nodes");
        let table = mesh.edge_table();
        let candidates: Vec<Edge> = table.interior().collect();
        mesh = candidates
            .into_iter()
            .map(|e| refine(&mesh, &[e]).unwrap())
            .find(|m| (0..m.num_vertices()).filter(|&v| !m.is_boundary(v)).count() <= dim)
            .expect("some single-edge refinement stays within the target");
    }
}

/// Classical Legendre `L_n` by Bonnet's recurrence, `L_n(1) = 1`.
pub fn legendre_classical(n: u32, y: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, y);
    if n == 0 {
        return 1.0;
    }
    for k in 2..=n {
        let k = f64::from(k);
        let p2 = ((2.0 * k - 1.0) * y * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p1
}
