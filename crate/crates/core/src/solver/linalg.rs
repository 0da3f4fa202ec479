//! Sparse linear algebra for the frozen-policy systems: CSR storage, ILU(0)
//! and restarted GMRES with right preconditioning.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n: 0,
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    /// Appends a row; entries must have distinct columns.
    pub fn push_row(&mut self, entries: &mut [(usize, f64)]) {
        entries.sort_unstable_by_key(|e| e.0);
        for &(c, v) in entries.iter() {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
        self.n += 1;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yr = s;
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
pub(crate) struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Option<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for p in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.cols[p] == r {
                    diag[r] = p;
                }
            }
            if diag[r] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for r in 0..n {
            let (start, end) = (lu.row_ptr[r], lu.row_ptr[r + 1]);
            for p in start..end {
                pos[lu.cols[p]] = p;
            }
            for p in start..end {
                let k = lu.cols[p];
                if k >= r {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                let l = lu.vals[p] / pivot;
                lu.vals[p] = l;
                for q in diag[k] + 1..lu.row_ptr[k + 1] {
                    let c = lu.cols[q];
                    let target = pos[c];
                    if target != usize::MAX {
                        lu.vals[target] -= l * lu.vals[q];
                    }
                }
            }
            for p in start..end {
                pos[lu.cols[p]] = usize::MAX;
            }
            if !(lu.vals[diag[r]].abs() > 0.0) {
                return None;
            }
        }
        Some(Self { lu, diag })
    }

    /// Solves `(LU) z = x` in place.
    pub fn apply(&self, z: &mut [f64]) {
        let lu = &self.lu;
        for r in 0..lu.n {
            let mut s = z[r];
            for p in lu.row_ptr[r]..self.diag[r] {
                s -= lu.vals[p] * z[lu.cols[p]];
            }
            z[r] = s;
        }
        for r in (0..lu.n).rev() {
            let mut s = z[r];
            for p in self.diag[r] + 1..lu.row_ptr[r + 1] {
                s -= lu.vals[p] * z[lu.cols[p]];
            }
            z[r] = s / lu.vals[self.diag[r]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) struct KrylovOutcome {
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖ / ‖b‖` on return.
    pub rel_residual: f64,
}

/// GMRES(m) with right ILU(0) preconditioning. `x` holds the initial guess
/// and receives the result.
pub(crate) fn gmres(
    a: &Csr,
    pre: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovOutcome {
    let n = a.n;
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let m = restart.max(1);
    let mut v: Vec<Vec<f64>> = (0..=m).map(|_| vec![0.0; n]).collect();
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut hmat = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0;

    loop {
        a.matvec(x, &mut w);
        for i in 0..n {
            v[0][i] = b[i] - w[i];
        }
        let beta = norm(&v[0]);
        let rel = beta / bnorm;
        if rel <= rtol || total >= max_iter {
            return KrylovOutcome {
                iterations: total,
                rel_residual: rel,
            };
        }
        v[0].iter_mut().for_each(|e| *e /= beta);
        g.iter_mut().for_each(|e| *e = 0.0);
        g[0] = beta;

        let mut used = 0;
        for j in 0..m {
            z.copy_from_slice(&v[j]);
            pre.apply(&mut z);
            a.matvec(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                hmat[i][j] = hij;
                for (we, ve) in w.iter_mut().zip(&v[i]) {
                    *we -= hij * ve;
                }
            }
            let hn = norm(&w);
            hmat[j + 1][j] = hn;
            if hn > 0.0 {
                for (dst, src) in v[j + 1].iter_mut().zip(&w) {
                    *dst = src / hn;
                }
            }
            for i in 0..j {
                let t = cs[i] * hmat[i][j] + sn[i] * hmat[i + 1][j];
                hmat[i + 1][j] = -sn[i] * hmat[i][j] + cs[i] * hmat[i + 1][j];
                hmat[i][j] = t;
            }
            let d = libm::hypot(hmat[j][j], hmat[j + 1][j]);
            if d == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = hmat[j][j] / d;
                sn[j] = hmat[j + 1][j] / d;
            }
            hmat[j][j] = d;
            hmat[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            let estimate = libm::fabs(g[j + 1]) / bnorm;
            if estimate <= rtol || hn == 0.0 || total >= max_iter {
                break;
            }
        }

        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= hmat[i][k] * y[k];
            }
            y[i] = s / hmat[i][i];
        }
        z.iter_mut().for_each(|e| *e = 0.0);
        for (k, yk) in y.iter().enumerate() {
            for (ze, ve) in z.iter_mut().zip(&v[k]) {
                *ze += yk * ve;
            }
        }
        pre.apply(&mut z);
        for (xe, ze) in x.iter_mut().zip(&z) {
            *xe += ze;
        }
    }
}
