mod common;

use std::collections::BTreeSet;

use common::{gauss_legendre, legendre_classical};
use proptest::prelude::*;
use sgfem::paramkit::*;

fn idx(pairs: &[(u32, u32)]) -> MultiIndex {
    MultiIndex::from_pairs(pairs.iter().copied())
}

/// `∫ w(y) P_n P_m dy/2` with a 64-point rule.
fn integral(n: u32, m: u32, w: impl Fn(f64) -> f64) -> f64 {
    gauss_legendre(64)
        .iter()
        .map(|&(y, wt)| 0.5 * wt * w(y) * legendre(n, y) * legendre(m, y))
        .sum()
}

#[test]
fn orthonormal_up_to_degree_twenty() {
    for n in 0..=20 {
        for m in 0..=20 {
            let delta = if n == m { 1.0 } else { 0.0 };
            assert!((integral(n, m, |_| 1.0) - delta).abs() < 1e-12, "({n}, {m})");
        }
    }
}

#[test]
fn matches_scaled_classical_legendre() {
    for n in 0..=20 {
        for i in 0..=40 {
            let y = -1.0 + f64::from(i) / 20.0;
            let expect = f64::from(2 * n + 1).sqrt() * legendre_classical(n, y);
            assert!((legendre(n, y) - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }
    assert_eq!(legendre(0, 0.3), 1.0);
    assert!((legendre(1, 0.4) - 3f64.sqrt() * 0.4).abs() < 1e-15);
    for n in 0..=10 {
        assert!((legendre(n, 1.0) - f64::from(2 * n + 1).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn coupling_coefficients_match_quadrature() {
    assert!((coupling_coefficient(1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    assert!((coupling_coefficient(2) - 2.0 / 15f64.sqrt()).abs() < 1e-15);
    for n in 0..=20u32 {
        for k in 0..=20u32 {
            let oracle = integral(n, k, |y| y);
            let expect = if n.abs_diff(k) == 1 { coupling_coefficient(n.max(k)) } else { 0.0 };
            assert!((oracle - expect).abs() < 1e-12, "({n}, {k})");
        }
    }
    // decreasing towards 1/2 from above, inside the envelope
    let mut prev = f64::INFINITY;
    for n in 1..200u32 {
        let c = coupling_coefficient(n);
        assert!(c < prev && c > 0.5 && c < 0.5 + 1.0 / (8.0 * f64::from(n)));
        prev = c;
    }
}

#[test]
fn triple_products_factorise() {
    let pairs = [
        (idx(&[]), idx(&[(1, 1)]), 1),
        (idx(&[(1, 2), (3, 1)]), idx(&[(1, 3), (3, 1)]), 1),
        (idx(&[(2, 1)]), idx(&[(2, 1), (4, 1)]), 4),
        (idx(&[(2, 1)]), idx(&[(2, 1), (4, 1)]), 2),
        (idx(&[]), idx(&[(1, 2)]), 1),
    ];
    for (nu, mu, m) in pairs {
        let oracle = common::coupling_by_quadrature(&nu, &mu, m);
        assert!((triple_product(&nu, &mu, m) - oracle).abs() < 1e-12);
        assert_eq!(triple_product(&nu, &mu, m), triple_product(&mu, &nu, m));
    }
}

#[test]
fn active_dimension_examples() {
    assert_eq!(active_dimension(&IndexSet::new()), 0);
    assert_eq!(active_dimension(&IndexSet::from_indices([MultiIndex::unit(1)])), 1);
    let p = IndexSet::from_indices([MultiIndex::unit(1), idx(&[(1, 1), (4, 1)])]);
    assert_eq!(active_dimension(&p), 4);
}

fn as_set(set: &IndexSet) -> BTreeSet<MultiIndex> {
    set.iter().cloned().collect()
}

#[test]
fn detail_set_examples() {
    let q = detail_index_set(&IndexSet::from_indices([MultiIndex::zero()]));
    assert_eq!(as_set(&q), [MultiIndex::unit(1)].into_iter().collect());
    let q = detail_index_set(&IndexSet::from_indices([MultiIndex::unit(1)]));
    let expect: BTreeSet<_> = [idx(&[(2, 1)]), idx(&[(1, 2)]), idx(&[(1, 1), (2, 1)])].into_iter().collect();
    assert_eq!(as_set(&q), expect);
    let q = detail_index_set(&IndexSet::from_indices([MultiIndex::unit(1), idx(&[(1, 2)])]));
    let expect: BTreeSet<_> =
        [idx(&[(2, 1)]), idx(&[(1, 3)]), idx(&[(1, 1), (2, 1)]), idx(&[(1, 2), (2, 1)])].into_iter().collect();
    assert_eq!(as_set(&q), expect);
}

/// Every neighbour `ν ± ε_m` with `m ≤ M_P + 1` that is outside P.
fn brute_force_detail(p: &IndexSet) -> BTreeSet<MultiIndex> {
    let top = active_dimension(p) + 1;
    let mut out = BTreeSet::new();
    for nu in p.iter() {
        for m in 1..=top {
            let mut degrees: Vec<i64> = (1..=top).map(|k| i64::from(nu.degree(k))).collect();
            for step in [-1i64, 1] {
                degrees[(m - 1) as usize] += step;
                if degrees.iter().all(|&d| d >= 0) {
                    let mu = MultiIndex::from_pairs(
                        degrees
                            .iter()
                            .enumerate()
                            .filter(|(_, &d)| d > 0)
                            .map(|(k, &d)| (k as u32 + 1, d as u32)),
                    );
                    if !p.contains(&mu) {
                        out.insert(mu);
                    }
                }
                degrees[(m - 1) as usize] -= step;
            }
        }
    }
    out
}

fn arbitrary_set() -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(prop::collection::vec((1u32..6, 1u32..4), 0..3), 0..8)
        .prop_map(|raw| IndexSet::from_indices(raw.into_iter().map(MultiIndex::from_pairs)))
}

proptest! {
    #[test]
    fn detail_set_matches_enumeration(p in arbitrary_set()) {
        let q = detail_index_set(&p);
        prop_assert_eq!(as_set(&q), brute_force_detail(&p));
        prop_assert!(q.iter().all(|mu| !p.contains(mu)));
        let listed: Vec<_> = q.iter().cloned().collect();
        let mut sorted = listed.clone();
        sorted.dedup();
        prop_assert_eq!(listed.len(), sorted.len());
    }

    #[test]
    fn detail_sets_survive_enrichment(p in arbitrary_set(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let q = detail_index_set(&p);
        let marked: Vec<MultiIndex> = picks.iter().map(|i| q.get(i.index(q.len())).clone()).collect();
        let mut larger = p.clone();
        larger.extend(marked);
        let q_next = detail_index_set(&larger);
        for mu in q.iter().filter(|mu| !larger.contains(mu)) {
            prop_assert!(q_next.contains(mu));
        }
        // positions of existing members never move
        for (k, nu) in p.iter().enumerate() {
            prop_assert_eq!(larger.position(nu), Some(k));
        }
    }

    #[test]
    fn dump_round_trips(p in arbitrary_set()) {
        prop_assert_eq!(IndexSet::parse_dump(&p.dump()).unwrap(), p);
    }
}
