use std::collections::VecDeque;

use super::SymmetricCsr;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee ordering of the matrix graph.
///
/// Returns `perm` with `perm[new] = old`. Each connected component is
/// started from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(a: &SymmetricCsr) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len() - 1).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(a, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SymmetricCsr, root: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; a.dim()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = Vec::new();
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        if level[v] > depth {
            depth = level[v];
        }
        for &w in a.row(v).0 {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    for (v, &l) in level.iter().enumerate() {
        if l == depth {
            last.push(v);
        }
    }
    (last, depth)
}

fn pseudo_peripheral(a: &SymmetricCsr, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut last, mut depth) = bfs_levels(a, root);
    loop {
        let candidate = *last
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("non-empty level");
        let (cand_last, cand_depth) = bfs_levels(a, candidate);
        if cand_depth <= depth {
            return root;
        }
        root = candidate;
        last = cand_last;
        depth = cand_depth;
    }
}

/// Cholesky factor `P A Pᵀ = L Lᵀ` stored row-wise inside the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymmetricCsr) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SymmetricCsr, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let mut first = vec![0; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.row(perm[i]).0.iter().map(|&c| inv_perm[c]).min().unwrap_or(i).min(i);
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(perm[i]);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv_perm[c];
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let li = &data[row_i + k0 - fi..row_i + j - fi];
                let lj = &data[start[j] + k0 - fj..start[j] + j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let diag = data[start[j + 1] - 1];
                data[row_i + j - fi] = (data[row_i + j - fi] - dot) / diag;
            }
            let off = &data[row_i..row_i + i - fi];
            let sq: f64 = off.iter().map(|x| x * x).sum();
            let a_ii = data[row_i + i - fi];
            let d = a_ii - sq;
            if !(d > a_ii.abs() * 1e-14) || !d.is_finite() {
                return Err(Error::numerical(format!(
                    "matrix is not positive definite (pivot {d:e} at unknown {})",
                    perm[i]
                )));
            }
            data[row_i + i - fi] = d.sqrt();
        }

        Ok(EnvelopeCholesky {
            perm,
            inv_perm,
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor (envelope size).
    pub fn envelope_len(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(&row[..i - fi]) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (old, xo) in x.iter_mut().enumerate() {
            *xo = y[self.inv_perm[old]];
        }
        x
    }
}
