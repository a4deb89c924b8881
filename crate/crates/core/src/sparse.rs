//! Compressed sparse row matrices and symmetric positive definite solvers.
//!
//! The direct solver is a sparse Cholesky factorisation from `faer` with a
//! fill-reducing ordering; the iterative one is Jacobi-preconditioned
//! conjugate gradients.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed in input
    /// order so the result does not depend on anything but the triplet list.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// y += alpha * A x
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let s: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *yr += alpha * s;
        }
    }

    /// Aᵀ x
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.nrows,
            "dimension mismatch in transpose_mul_vec"
        );
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
        y
    }

    /// alpha·A + beta·B
    pub fn linear_combination(alpha: f64, a: &CsrMatrix, beta: f64, b: &CsrMatrix) -> CsrMatrix {
        assert_eq!((a.nrows, a.ncols), (b.nrows, b.ncols));
        let trip = a
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(b.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        CsrMatrix::from_triplets(a.nrows, a.ncols, trip)
    }

    /// The block with the given rows and columns, renumbered in list order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_map[c];
                if j != usize::MAX {
                    trip.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trip)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// max |A_ij - A_ji|
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trip: Vec<_> = self
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .expect("CSR triplets are in bounds")
    }
}

/// Which linear solver backs the SPD solves.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum LinearSolverKind {
    #[default]
    Direct,
    ConjugateGradient {
        rel_tol: f64,
        max_iter: usize,
    },
}

impl LinearSolverKind {
    pub fn cg(rel_tol: f64) -> Self {
        LinearSolverKind::ConjugateGradient {
            rel_tol,
            max_iter: 20_000,
        }
    }
}

/// A factorised (or preconditioned) symmetric positive definite operator.
pub enum SpdSolver {
    Direct {
        n: usize,
        llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    },
    Cg {
        matrix: CsrMatrix,
        inv_diag: Vec<f64>,
        rel_tol: f64,
        max_iter: usize,
    },
}

impl SpdSolver {
    pub fn new(matrix: &CsrMatrix, kind: LinearSolverKind) -> Result<Self> {
        assert_eq!(matrix.nrows, matrix.ncols);
        match kind {
            LinearSolverKind::Direct => {
                let llt = matrix
                    .to_faer()
                    .sp_cholesky(faer::Side::Lower)
                    .map_err(|e| Error::Definiteness(format!("sparse Cholesky failed: {e:?}")))?;
                Ok(SpdSolver::Direct {
                    n: matrix.nrows,
                    llt,
                })
            }
            LinearSolverKind::ConjugateGradient { rel_tol, max_iter } => {
                let diag = matrix.diagonal();
                if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
                    return Err(Error::Definiteness(format!(
                        "diagonal entry {i} is {} (not positive)",
                        diag[i]
                    )));
                }
                Ok(SpdSolver::Cg {
                    matrix: matrix.clone(),
                    inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
                    rel_tol,
                    max_iter,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Direct { n, .. } => *n,
            SpdSolver::Cg { matrix, .. } => matrix.nrows,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.dim());
        match self {
            SpdSolver::Direct { n, llt } => {
                let rhs = faer::Col::<f64>::from_fn(*n, |i| b[i]);
                let x = llt.solve(&rhs);
                Ok((0..*n).map(|i| x[i]).collect())
            }
            SpdSolver::Cg {
                matrix,
                inv_diag,
                rel_tol,
                max_iter,
            } => conjugate_gradient(matrix, inv_diag, b, *rel_tol, *max_iter),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG from a zero initial guess.
fn conjugate_gradient(
    a: &CsrMatrix,
    inv_diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Definiteness(format!(
                "CG encountered non-positive curvature {pap:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve {
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}

/// Largest eigenvalue of the symmetric-definite pencil `M x = μ G x` with
/// `G` positive definite, by dense Cholesky reduction to a standard problem.
pub fn dense_max_generalized_eigenvalue(m: &CsrMatrix, g: &CsrMatrix) -> Result<f64> {
    let n = g.nrows;
    let gd = faer::Mat::<f64>::from_fn(n, n, |i, j| g.get(i, j));
    let md = faer::Mat::<f64>::from_fn(n, n, |i, j| m.get(i, j));
    let llt = gd
        .llt(faer::Side::Lower)
        .map_err(|_| Error::Definiteness("Gram matrix of the gradient is singular".into()))?;
    let l = llt.L();
    // C = L⁻¹ M L⁻ᵀ
    let mut y = md.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, y.as_mut(), faer::Par::Seq);
    let mut c = y.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), faer::Par::Seq);
    let c = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Definiteness(format!("eigensolver failed: {e:?}")))?;
    Ok(eig.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Same pencil, by power iteration on G⁻¹M with Rayleigh-quotient stopping.
pub fn power_max_generalized_eigenvalue(
    m: &CsrMatrix,
    g: &CsrMatrix,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = g.nrows;
    let g_solver = SpdSolver::new(g, LinearSolverKind::Direct)?;
    // Deterministic start with components in every direction.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin())
        .collect();
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let mx = m.mul_vec(&x);
        let y = g_solver.solve(&mx)?;
        let gy = g.mul_vec(&y);
        let ygy = dot(&y, &gy);
        if !(ygy > 0.0) {
            return Ok(0.0);
        }
        let my = m.mul_vec(&y);
        mu = dot(&y, &my) / ygy;
        // residual of M y - μ G y relative to |M y|
        let res: f64 = my
            .iter()
            .zip(&gy)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = dot(&my, &my).sqrt();
        let norm = ygy.sqrt();
        x = y.iter().map(|v| v / norm).collect();
        if res <= rel_tol * scale {
            return Ok(mu);
        }
    }
    Err(Error::Definiteness(format!(
        "power iteration did not converge (last estimate {mu:e})"
    )))
}
