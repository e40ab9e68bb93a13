//! Envelope Cholesky after reverse Cuthill-McKee reordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut scratch = vec![usize::MAX; n];
    while order.len() < n {
        // pick the unvisited vertex of minimal degree, then move to a
        // pseudo-peripheral vertex of its component
        let mut start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, e) = farthest(&adj, &degree, start, &mut scratch);
            if e <= ecc {
                break;
            }
            ecc = e;
            start = far;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn farthest(adj: &[Vec<usize>], degree: &[usize], start: usize, dist: &mut [usize]) -> (usize, usize) {
    let mut touched = vec![start];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0usize);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > best.1 || (d == best.1 && degree[v] < degree[best.0]) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                touched.push(w);
                queue.push_back(w);
            }
        }
    }
    for v in touched {
        dist[v] = usize::MAX;
    }
    best
}

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
    min_pivot: f64,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn <= new {
                    values[offsets[new] + jn - first[new]] += v;
                }
            }
        }
        let mut min_pivot = f64::INFINITY;
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offsets[i] + j - fi];
                let ri = &values[offsets[i] + k0 - fi..offsets[i] + j - fi];
                let rj = &values[offsets[j] + k0 - fj..offsets[j] + j - fj];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                values[offsets[i] + j - fi] = s / values[offsets[j + 1] - 1];
            }
            let row = &values[offsets[i]..offsets[i + 1] - 1];
            let d = values[offsets[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotSpd {
                    row: perm[i],
                    pivot: d,
                });
            }
            min_pivot = min_pivot.min(d);
            values[offsets[i + 1] - 1] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            offsets,
            values,
            min_pivot,
        })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.values[self.offsets[i + 1] - 1];
        }
        for i in (0..n).rev() {
            y[i] /= self.values[self.offsets[i + 1] - 1];
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1] - 1];
            for (l, x) in row.iter().zip(&mut y[fi..i]) {
                *x -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
