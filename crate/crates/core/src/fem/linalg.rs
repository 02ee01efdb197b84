//! Sparse assembly and symmetric positive-definite solvers.

use nalgebra::{DMatrix, DVector};
use sprs::{CsMat, TriMat};

use crate::error::{numerical, Result};

/// Which linear solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Jacobi-preconditioned conjugate gradients; falls back to a dense
    /// Cholesky factorization on small systems if CG stalls.
    #[default]
    Cg,
    /// Dense Cholesky; intended as a reference on small systems.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub rtol: f64,
    pub max_iter: Option<usize>,
    /// Acceptance bound on `‖Ax − b‖ / ‖b‖` after solving.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Cg,
            rtol: 1e-12,
            max_iter: None,
            residual_tol: 1e-10,
        }
    }
}

/// Largest system the dense fallback will factor.
pub const DENSE_FALLBACK_LIMIT: usize = 4000;

/// Triplet accumulator for a square matrix plus right-hand side.
#[derive(Debug)]
pub struct Assembler {
    n: usize,
    tri: TriMat<f64>,
    pub rhs: Vec<f64>,
}

impl Assembler {
    pub fn new(n: usize) -> Self {
        Assembler {
            n,
            tri: TriMat::new((n, n)),
            rhs: vec![0.0; n],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.tri.add_triplet(i, j, v);
    }

    pub fn finish(self) -> LinearSystem {
        LinearSystem {
            matrix: self.tri.to_csr(),
            rhs: self.rhs,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsMat<f64>,
    pub rhs: Vec<f64>,
    n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn matvec(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    let indptr = a.indptr();
    let (indices, data) = (a.indices(), a.data());
    for (row, out) in y.iter_mut().enumerate() {
        let range = indptr.outer_inds_sz(row);
        let mut s = 0.0;
        for k in range {
            s += data[k] * x[indices[k]];
        }
        *out = s;
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSystem {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (row, vec) in self.matrix.outer_iterator().enumerate() {
            if let Some(v) = vec.get(row) {
                d[row] = *v;
            }
        }
        d
    }

    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        matvec(&self.matrix, x, &mut ax);
        let r: Vec<f64> = ax.iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        let bn = norm2(&self.rhs);
        if bn == 0.0 {
            norm2(&r)
        } else {
            norm2(&r) / bn
        }
    }

    /// Largest asymmetry `|A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let t = self.matrix.transpose_view().to_csr();
        let mut worst = 0.0f64;
        for (row, vec) in self.matrix.outer_iterator().enumerate() {
            for (col, v) in vec.iter() {
                let w = t.get(row, col).copied().unwrap_or(0.0);
                worst = worst.max((v - w).abs());
            }
        }
        worst
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        matvec(&self.matrix, x, &mut ax);
        dotp(x, &ax)
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
        let (x, iterations) = match opts.kind {
            SolverKind::Dense => (self.solve_dense()?, 0),
            SolverKind::Cg => match self.solve_pcg(opts) {
                Ok(r) => r,
                Err(e) if self.n <= DENSE_FALLBACK_LIMIT => {
                    let _ = e;
                    (self.solve_dense()?, 0)
                }
                Err(e) => return Err(e),
            },
        };
        let relative_residual = self.relative_residual(&x);
        if !(relative_residual <= opts.residual_tol) {
            return Err(numerical(format!(
                "linear solve residual {relative_residual:e} exceeds {:e}",
                opts.residual_tol
            )));
        }
        Ok((
            x,
            SolveStats {
                iterations,
                relative_residual,
            },
        ))
    }

    fn solve_pcg(&self, opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
        let n = self.n;
        let b = &self.rhs;
        let bn = norm2(b);
        let mut x = vec![0.0; n];
        if bn == 0.0 {
            return Ok((x, 0));
        }
        let diag = self.diagonal();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(numerical("matrix has a non-positive diagonal entry"));
        }
        let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dotp(&r, &z);
        let max_iter = opts.max_iter.unwrap_or(10 * n + 100);
        for it in 1..=max_iter {
            matvec(&self.matrix, &p, &mut ap);
            let pap = dotp(&p, &ap);
            if !(pap > 0.0) {
                return Err(numerical("conjugate gradients broke down (matrix not positive definite)"));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) <= opts.rtol * bn {
                return Ok((x, it));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dotp(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(numerical(format!("conjugate gradients did not converge in {max_iter} iterations")))
    }

    pub fn solve_dense(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (row, vec) in self.matrix.outer_iterator().enumerate() {
            for (col, v) in vec.iter() {
                m[(row, col)] += *v;
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| numerical("dense Cholesky failed (matrix not positive definite)"))?;
        Ok(chol.solve(&DVector::from_column_slice(&self.rhs)).as_slice().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> LinearSystem {
        let mut a = Assembler::new(n);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
                a.add(i - 1, i, -1.0);
            }
            a.rhs[i] = 1.0 + i as f64 * 0.1;
        }
        a.finish()
    }

    #[test]
    fn cg_matches_dense() {
        let sys = laplacian_1d(60);
        let (x, stats) = sys.solve(&SolverOptions::default()).unwrap();
        let xd = sys.solve_dense().unwrap();
        assert!(stats.iterations > 0);
        for (a, b) in x.iter().zip(&xd) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
        assert_eq!(sys.max_asymmetry(), 0.0);
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut a = Assembler::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 0, 2.0);
        a.add(1, 1, 4.0);
        a.rhs = vec![3.0, 8.0];
        let (x, _) = a.finish().solve(&SolverOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_is_an_error() {
        let mut a = Assembler::new(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.rhs = vec![1.0, 1.0];
        let sys = a.finish();
        assert!(sys.solve(&SolverOptions { kind: SolverKind::Dense, ..Default::default() }).is_err());
        assert!(sys.solve(&SolverOptions::default()).is_err());
    }
}
