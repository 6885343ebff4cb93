use crate::paramkit::{triple_product, IndexSet};

/// One nonzero of `G_m`: row index, column index (positions in the row and
/// column index sets), dimension `m` and value `∫ y_m P_ν P_μ dπ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEntry {
    pub m: u32,
    pub col: usize,
    pub value: f64,
}

/// The parametric operators `G_1..G_M` between two index sets, stored row by
/// row. `G_0` is the identity and is not stored.
#[derive(Debug, Clone)]
pub struct CouplingFamily {
    rows: Vec<Vec<CouplingEntry>>,
    num_cols: usize,
    max_dim: u32,
}

impl CouplingFamily {
    /// Couplings between `rows` and `cols` for dimensions `1..=max_dim`.
    pub fn new(rows: &IndexSet, cols: &IndexSet, max_dim: u32) -> Self {
        let entries = rows
            .iter()
            .map(|nu| {
                let mut out = Vec::new();
                for m in 1..=max_dim {
                    let up = nu.raised(m);
                    let down = nu.lowered(m);
                    for mu in std::iter::once(up).chain(down) {
                        if let Some(col) = cols.position(&mu) {
                            out.push(CouplingEntry {
                                m,
                                col,
                                value: triple_product(nu, &mu, m),
                            });
                        }
                    }
                }
                out
            })
            .collect();
        CouplingFamily {
            rows: entries,
            num_cols: cols.len(),
            max_dim,
        }
    }

    /// Square family on one index set.
    pub fn square(set: &IndexSet, max_dim: u32) -> Self {
        Self::new(set, set, max_dim)
    }

    pub fn row(&self, i: usize) -> &[CouplingEntry] {
        &self.rows[i]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn max_dim(&self) -> u32 {
        self.max_dim
    }

    /// Largest dimension that actually carries a coupling.
    pub fn max_coupled_dim(&self) -> u32 {
        self.rows.iter().flatten().map(|e| e.m).max().unwrap_or(0)
    }
}

/// Sparse block of `G_m` as `(row, col, value)` triples; `m = 0` gives the
/// identity pattern between equal indices.
pub fn assemble_coupling(rows: &IndexSet, cols: &IndexSet, m: u32) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (i, nu) in rows.iter().enumerate() {
        if m == 0 {
            if let Some(j) = cols.position(nu) {
                out.push((i, j, 1.0));
            }
            continue;
        }
        let up = nu.raised(m);
        let mut neighbours: Vec<usize> = std::iter::once(up)
            .chain(nu.lowered(m))
            .filter_map(|mu| cols.position(&mu))
            .collect();
        neighbours.sort_unstable();
        for j in neighbours {
            out.push((i, j, triple_product(nu, cols.get(j), m)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramkit::MultiIndex;

    #[test]
    fn first_order_block() {
        let p = IndexSet::from_indices([MultiIndex::unit(1)]);
        let g = assemble_coupling(&p, &p, 1);
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|&(i, j, _)| i != j));
        assert!(g.iter().all(|&(_, _, v)| (v - s).abs() < 1e-15));
        assert!(assemble_coupling(&p, &p, 2).is_empty());
    }

    #[test]
    fn identity_for_mean() {
        let p = IndexSet::new();
        assert_eq!(assemble_coupling(&p, &p, 0), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn family_is_symmetric() {
        let p = IndexSet::from_indices([
            MultiIndex::unit(1),
            MultiIndex::unit(2),
            MultiIndex::from_pairs([(1, 2)]),
            MultiIndex::from_pairs([(1, 1), (2, 1)]),
        ]);
        let fam = CouplingFamily::square(&p, 3);
        for i in 0..p.len() {
            for e in fam.row(i) {
                let back = fam.row(e.col).iter().find(|b| b.col == i && b.m == e.m).unwrap();
                assert_eq!(back.value, e.value);
            }
        }
        assert_eq!(fam.max_coupled_dim(), 2);
    }
}
