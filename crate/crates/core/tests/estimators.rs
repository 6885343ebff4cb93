mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::*;
use nalgebra::DVector;
use sgfem::estimators::*;
use sgfem::galerkin::*;
use sgfem::meshkit::{uniform_refine, Mesh, Triangle};
use sgfem::model::{contrast_bounds, ProblemSpec};
use sgfem::paramkit::{detail_index_set, IndexSet, MultiIndex};

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn overall_examples() {
    assert_eq!(overall(&[3.0, 4.0], &[]), (5.0, 5.0, 0.0));
    assert_eq!(overall(&[], &[]), (0.0, 0.0, 0.0));
    let s = 2.0 * 2f64.sqrt();
    let (eta, sp, pa) = overall(&[1.0, 2.0, 2.0], &[s, s]);
    assert!((eta - 5.0).abs() < 1e-12 && (sp - 3.0).abs() < 1e-12 && (pa - 4.0).abs() < 1e-12);
}

#[test]
fn totals_are_pythagorean() {
    let mesh = Arc::new(uniform_refine(&Mesh::initial_lshape()).fine);
    let p = IndexSet::from_indices([MultiIndex::unit(1)]);
    let spec = ProblemSpec::benchmark();
    let prob = solve_problem(mesh, &p, &spec, &opts(), None).unwrap();
    let est = estimate(&prob.solution, &prob.stiffness, &spec).unwrap();
    let ind = &est.indicators;
    assert!(ind.spatial.iter().chain(&ind.parametric).all(|&v| v >= 0.0));
    assert!((ind.eta.powi(2) - ind.eta_spatial.powi(2) - ind.eta_parametric.powi(2)).abs() < 1e-12);
    let all: Vec<usize> = (0..ind.spatial.len()).collect();
    assert!((ind.spatial_sum(&all) - ind.eta_spatial).abs() < 1e-12);
    assert_eq!(ind.spatial.len(), est.overlay.new_vertices.len());
    assert_eq!(ind.parametric.len(), detail_index_set(&p).len());
}

#[test]
fn spatial_indicators_match_dense_residual() {
    let mesh = Arc::new(Mesh::initial_lshape());
    let spec = ProblemSpec::benchmark();
    for p in [IndexSet::new(), IndexSet::from_indices([MultiIndex::unit(1)])] {
        let prob = solve_problem(mesh.clone(), &p, &spec, &opts(), None).unwrap();
        let est = estimate(&prob.solution, &prob.stiffness, &spec).unwrap();

        let coarse = FemSpace::new(mesh.clone());
        let fine = FemSpace::new(Arc::new(est.overlay.fine.clone()));
        let stiff = dense_family(&fine, &spec, 1);
        let b = dense_kronecker(&stiff, &p, &p);
        let n = fine.dim();
        let mut u_hat = DVector::zeros(n * p.len());
        for k in 0..p.len() {
            let cv = coarse.vertex_values(prob.solution.block(k));
            for (i, &v) in fine.free_vertices().iter().enumerate() {
                u_hat[k * n + i] = eval_p1(&mesh, &cv, fine.mesh().vertices()[v]);
            }
        }
        let r = dense_load(&fine, &p) - &b * u_hat;
        for (z, nv) in est.overlay.new_vertices.iter().enumerate() {
            let i = fine.free_index(nv.vertex).unwrap();
            let sq: f64 = (0..p.len()).map(|k| r[k * n + i].powi(2)).sum();
            let oracle = (sq / stiff[0][(i, i)]).sqrt();
            assert!((est.indicators.spatial[z] - oracle).abs() < 1e-10, "{} vs {oracle}", est.indicators.spatial[z]);
        }
    }
}

#[test]
fn parametric_indicators_match_dense_oracle() {
    let mesh = Arc::new(uniform_refine(&Mesh::initial_lshape()).fine);
    let spec = ProblemSpec::benchmark();
    for p in [IndexSet::new(), IndexSet::from_indices([MultiIndex::unit(1), MultiIndex::unit(2)])] {
        let q = detail_index_set(&p);
        let prob = solve_problem(mesh.clone(), &p, &spec, &opts(), None).unwrap();
        let eta = parametric_indicators(&prob.solution, &q, &prob.stiffness, &spec).unwrap();

        let space = FemSpace::new(mesh.clone());
        let stiff = dense_family(&space, &spec, 3);
        let u = DVector::from_column_slice(prob.solution.coefficients());
        let r_all = dense_load(&space, &q) - dense_kronecker(&stiff, &q, &p) * u;
        let n = space.dim();
        for k in 0..q.len() {
            let r = r_all.rows(k * n, n).into_owned();
            let e = dense_solve(&stiff[0], &r);
            let oracle = e.dot(&r).sqrt();
            assert!((eta[k] - oracle).abs() < 1e-10 * oracle.max(1.0), "{} vs {oracle}", eta[k]);
        }
    }
}

#[test]
fn deterministic_problem_has_no_parametric_error() {
    let mesh = Arc::new(uniform_refine(&Mesh::initial_lshape()).fine);
    let spec = ProblemSpec::deterministic();
    let p = IndexSet::from_indices([MultiIndex::unit(1)]);
    let prob = solve_problem(mesh, &p, &spec, &opts(), None).unwrap();
    let est = estimate(&prob.solution, &prob.stiffness, &spec).unwrap();
    assert!(est.indicators.parametric.iter().all(|&v| v == 0.0));
    assert!(est.indicators.eta_spatial > 0.0);
}

#[test]
fn enhanced_solution_has_no_spatial_residual() {
    let mesh = Arc::new(uniform_refine(&Mesh::initial_lshape()).fine);
    let spec = ProblemSpec::benchmark();
    let p = IndexSet::from_indices([MultiIndex::unit(1)]);
    let q = detail_index_set(&p);
    let enh = solve_enhanced(mesh, &p, &q, &spec, &opts()).unwrap();
    let u_hat = enh.combined().unwrap();
    let all = u_hat.indices().clone();
    let coupling = CouplingFamily::square(&all, 2);
    let op = KroneckerOperator::new(&enh.fine_stiffness, &coupling).unwrap();
    let mut bu = vec![0.0; op.len()];
    op.apply(u_hat.coefficients(), &mut bu);
    let f = assemble_load(enh.fine_stiffness.space(), &spec.rhs, &all, TriangleRule::default());
    let n = enh.fine_stiffness.dim();
    let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for nu in p.iter() {
        let k = all.position(nu).unwrap();
        for nv in &enh.overlay.new_vertices {
            let i = enh.fine_stiffness.space().free_index(nv.vertex).unwrap();
            assert!((f[k * n + i] - bu[k * n + i]).abs() < 1e-8 * scale);
        }
    }
}

#[test]
fn lower_bound_of_the_two_sided_estimate() {
    let spec = ProblemSpec::benchmark();
    let lambda = contrast_bounds(&spec).unwrap().lambda;
    let mut mesh = Arc::new(Mesh::initial_lshape());
    let p = IndexSet::from_indices([MultiIndex::unit(1)]);
    for _ in 0..3 {
        let prob = solve_problem(mesh.clone(), &p, &spec, &opts(), None).unwrap();
        let est = estimate(&prob.solution, &prob.stiffness, &spec).unwrap();
        let q = est.indicators.detail.clone();
        let enh = solve_enhanced(mesh.clone(), &p, &q, &spec, &opts()).unwrap();
        let u_hat = enh.combined().unwrap();
        let up = prolong(&prob.solution, u_hat.space().clone(), u_hat.indices()).unwrap();
        let d = u_hat.sub(&up).unwrap();
        let err = b_energy(&enh.fine_stiffness, &d, &d).unwrap();
        assert!(lambda / 3.0 * est.indicators.eta.powi(2) <= err * (1.0 + 1e-6));
        mesh = Arc::new(uniform_refine(&mesh).fine);
    }
}

#[test]
fn indicators_are_invariant_under_renumbering() {
    let base = uniform_refine(&Mesh::initial_lshape()).fine;
    let nv = base.num_vertices();
    // reverse the vertex numbering
    let perm: Vec<usize> = (0..nv).rev().collect();
    let mut vertices = vec![[0.0; 2]; nv];
    let mut flags = vec![false; nv];
    for v in 0..nv {
        vertices[perm[v]] = base.vertices()[v];
        flags[perm[v]] = base.is_boundary(v);
    }
    let triangles: Vec<Triangle> = base
        .triangles()
        .iter()
        .map(|t| Triangle::new(t.vertices.map(|v| perm[v]), t.ref_edge))
        .collect();
    let other = Mesh::new(vertices, flags, triangles).unwrap();

    let spec = ProblemSpec::benchmark();
    let p = IndexSet::from_indices([MultiIndex::unit(1)]);
    let by_point = |mesh: Mesh| {
        let prob = solve_problem(Arc::new(mesh), &p, &spec, &opts(), None).unwrap();
        let est = estimate(&prob.solution, &prob.stiffness, &spec).unwrap();
        let map: HashMap<(i64, i64), f64> = est
            .overlay
            .new_vertices
            .iter()
            .zip(&est.indicators.spatial)
            .map(|(nv, &eta)| {
                let x = est.overlay.fine.vertices()[nv.vertex];
                (((x[0] * 1e6).round() as i64, (x[1] * 1e6).round() as i64), eta)
            })
            .collect();
        (map, est.indicators.parametric)
    };
    let (a, pa) = by_point(base);
    let (b, pb) = by_point(other);
    assert_eq!(a.len(), b.len());
    for (k, v) in &a {
        assert!((v - b[k]).abs() < 1e-10);
    }
    for (x, y) in pa.iter().zip(&pb) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn mismatched_inputs_are_rejected() {
    let spec = ProblemSpec::benchmark();
    let p = IndexSet::new();
    let a = solve_problem(Arc::new(Mesh::initial_lshape()), &p, &spec, &opts(), None).unwrap();
    let b = solve_problem(Arc::new(uniform_refine(&Mesh::initial_lshape()).fine), &p, &spec, &opts(), None).unwrap();
    assert!(parametric_indicators(&a.solution, &detail_index_set(&p), &b.stiffness, &spec).is_err());
    let overlay = uniform_refine(&Mesh::initial_lshape());
    assert!(spatial_indicators(&a.solution, &overlay, &a.stiffness, &spec).is_err());
    // overlay of a finer mesh
    let deeper = uniform_refine(b.solution.mesh());
    let deeper_stiff = StiffnessFamily::assemble(
        Arc::new(FemSpace::new(Arc::new(deeper.fine.clone()))),
        &spec,
        0,
        TriangleRule::default(),
    );
    assert!(spatial_indicators(&a.solution, &deeper, &deeper_stiff, &spec).is_err());
    assert!(spatial_indicators(&b.solution, &deeper, &deeper_stiff, &spec).is_ok());
}
