//! Compressed sparse row matrices for the structured-grid operators.

#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<u32>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from per-row (col, val) lists; duplicates are merged, columns sorted.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Csr {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0u32);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut iter = row.into_iter();
            if let Some(mut cur) = iter.next() {
                for (c, v) in iter {
                    if c == cur.0 {
                        cur.1 += v;
                    } else {
                        if cur.1 != 0.0 {
                            cols.push(cur.0);
                            vals.push(cur.1);
                        }
                        cur = (c, v);
                    }
                }
                if cur.1 != 0.0 {
                    cols.push(cur.0);
                    vals.push(cur.1);
                }
            }
            row_ptr.push(cols.len() as u32);
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut s = 0.0;
            for e in lo..hi {
                s += self.vals[e] * x[self.cols[e] as usize];
            }
            y[r] = s;
        }
    }

    /// y += alpha * A x
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut s = 0.0;
            for e in lo..hi {
                s += self.vals[e] * x[self.cols[e] as usize];
            }
            y[r] += alpha * s;
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0u32; self.n_cols + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        let mut next = counts;
        for r in 0..self.n_rows {
            for e in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                let c = self.cols[e] as usize;
                let slot = next[c] as usize;
                cols[slot] = r as u32;
                vals[slot] = self.vals[e];
                next[c] += 1;
            }
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            cols,
            vals,
        }
    }

    /// A + B with identical shapes.
    pub fn add(&self, other: &Csr) -> Csr {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(self.n_rows);
        for r in 0..self.n_rows {
            let mut row = Vec::with_capacity(
                (self.row_ptr[r + 1] - self.row_ptr[r] + other.row_ptr[r + 1] - other.row_ptr[r])
                    as usize,
            );
            for e in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                row.push((self.cols[e], self.vals[e]));
            }
            for e in other.row_ptr[r] as usize..other.row_ptr[r + 1] as usize {
                row.push((other.cols[e], other.vals[e]));
            }
            rows.push(row);
        }
        Csr::from_rows(self.n_cols, rows)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        assert_eq!(self.n_rows, self.n_cols);
        let mut d = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            for e in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                if self.cols[e] as usize == r {
                    d[r] = self.vals[e];
                }
            }
        }
        d
    }

    /// Maximum absolute asymmetry |A - A^T| over matched entries (diagnostic).
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut m = 0.0f64;
        for r in 0..self.n_rows {
            let a = &self.vals[self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize];
            let ac = &self.cols[self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize];
            let b = &t.vals[t.row_ptr[r] as usize..t.row_ptr[r + 1] as usize];
            let bc = &t.cols[t.row_ptr[r] as usize..t.row_ptr[r + 1] as usize];
            let mut ia = 0;
            let mut ib = 0;
            while ia < a.len() || ib < b.len() {
                match (ac.get(ia), bc.get(ib)) {
                    (Some(&ca), Some(&cb)) if ca == cb => {
                        m = m.max((a[ia] - b[ib]).abs());
                        ia += 1;
                        ib += 1;
                    }
                    (Some(&ca), Some(&cb)) if ca < cb => {
                        m = m.max(a[ia].abs());
                        ia += 1;
                    }
                    (Some(_), Some(_)) => {
                        m = m.max(b[ib].abs());
                        ib += 1;
                    }
                    (Some(_), None) => {
                        m = m.max(a[ia].abs());
                        ia += 1;
                    }
                    (None, Some(_)) => {
                        m = m.max(b[ib].abs());
                        ib += 1;
                    }
                    (None, None) => break,
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Csr {
        // [[2, 0, 1], [0, 3, 0], [4, 0, 5]]
        Csr::from_rows(
            3,
            vec![
                vec![(2, 1.0), (0, 2.0)],
                vec![(1, 1.5), (1, 1.5)],
                vec![(0, 4.0), (2, 5.0)],
            ],
        )
    }

    #[test]
    fn matvec_and_duplicate_merge() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        let x = vec![1.0, 2.0, 3.0];
        let mut y = vec![0.0; 3];
        a.matvec(&x, &mut y);
        assert_eq!(y, vec![5.0, 6.0, 19.0]);
        a.matvec_add(-1.0, &x, &mut y);
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let a = sample();
        let att = a.transpose().transpose();
        let x = vec![0.3, -0.7, 1.1];
        let mut y1 = vec![0.0; 3];
        let mut y2 = vec![0.0; 3];
        a.matvec(&x, &mut y1);
        att.matvec(&x, &mut y2);
        assert_eq!(y1, y2);
    }

    #[test]
    fn add_and_diagonal() {
        let a = sample();
        let s = a.add(&a);
        assert_eq!(s.diagonal(), vec![4.0, 6.0, 10.0]);
        assert!(a.asymmetry() > 0.0); // 1 vs 4 off-diagonal
    }
}
