use std::collections::BTreeSet;

/// Symmetric sparse matrix stored in full CSR form (both triangles).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricCsr {
    /// Zero-valued matrix with the given symmetric sparsity pattern.
    ///
    /// `adjacency[i]` lists the off-diagonal columns coupled to row `i`; the
    /// diagonal is always present. The pattern is symmetrised.
    pub fn with_pattern(n: usize, adjacency: &[BTreeSet<usize>]) -> Self {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            row.insert(i);
        }
        for (i, adj) in adjacency.iter().enumerate() {
            for &j in adj {
                rows[i].insert(j);
                rows[j].insert(i);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        SymmetricCsr {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Storage slot of entry `(i, j)`, if it is in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    /// Adds `v` to both `(i, j)` and `(j, i)` (once when `i == j`).
    ///
    /// Panics if the entry is outside the pattern.
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside sparsity pattern");
        self.values[s] += v;
        if i != j {
            let t = self.slot(j, i).expect("entry outside sparsity pattern");
            self.values[t] += v;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Principal submatrix with the listed rows/columns removed.
    pub fn without(&self, removed: &[usize]) -> (SymmetricCsr, Vec<Option<usize>>) {
        let mut map = vec![None; self.n];
        let mut next = 0;
        for (i, m) in map.iter_mut().enumerate() {
            if !removed.contains(&i) {
                *m = Some(next);
                next += 1;
            }
        }
        let mut adjacency = vec![BTreeSet::new(); next];
        for i in 0..self.n {
            let Some(ri) = map[i] else { continue };
            let (cols, _) = self.row(i);
            for &j in cols {
                if let Some(rj) = map[j] {
                    if rj != ri {
                        adjacency[ri].insert(rj);
                    }
                }
            }
        }
        let mut out = SymmetricCsr::with_pattern(next, &adjacency);
        for i in 0..self.n {
            let Some(ri) = map[i] else { continue };
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(rj) = map[j] {
                    let s = out.slot(ri, rj).unwrap();
                    out.values[s] = v;
                }
            }
        }
        (out, map)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SymmetricCsr {
        let adj: Vec<BTreeSet<usize>> = (0..n)
            .map(|i| if i + 1 < n { [i + 1].into() } else { BTreeSet::new() })
            .collect();
        let mut a = SymmetricCsr::with_pattern(n, &adj);
        for i in 0..n {
            a.add_sym(i, i, 2.0);
            if i + 1 < n {
                a.add_sym(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn pattern_is_symmetric() {
        let a = path(5);
        assert_eq!(a.nnz(), 5 + 2 * 4);
        assert_eq!(a.get(1, 2), -1.0);
        assert_eq!(a.get(2, 1), -1.0);
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn removal_keeps_remaining_entries() {
        let a = path(4);
        let (b, map) = a.without(&[1]);
        assert_eq!(b.dim(), 3);
        assert_eq!(map, vec![Some(0), None, Some(1), Some(2)]);
        assert_eq!(b.get(1, 2), -1.0);
        assert_eq!(b.get(0, 1), 0.0);
    }
}
