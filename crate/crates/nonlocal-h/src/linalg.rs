//! Sparse helpers and a direct solver that picks dense or sparse factorizations by size.

use faer::linalg::solvers::{Llt, PartialPivLu};
use faer::prelude::*;
use faer::sparse::linalg::matmul::sparse_sparse_matmul;
use faer::sparse::linalg::solvers::{Llt as SpLlt, Lu as SpLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat, Par, Side};

use crate::error::{Error, Result};

pub type SpMat = SparseColMat<usize, f64>;

/// Systems up to this size (or denser than `DENSE_FILL`) are factorized densely.
pub const DENSE_SOLVE_LIMIT: usize = 2500;
const DENSE_FILL: f64 = 0.04;
const PIVOT_RATIO_FLOOR: f64 = 1e-13;

pub fn from_triplets(nrows: usize, ncols: usize, t: &[Triplet<usize, usize, f64>]) -> SpMat {
    SpMat::try_new_from_triplets(nrows, ncols, t).expect("triplet assembly")
}

pub fn identity(n: usize) -> SpMat {
    let t: Vec<_> = (0..n).map(|i| Triplet::new(i, i, 1.0)).collect();
    from_triplets(n, n, &t)
}

pub fn diagonal(d: &[f64]) -> SpMat {
    let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| Triplet::new(i, i, v)).collect();
    from_triplets(d.len(), d.len(), &t)
}

pub fn triplets(a: &SpMat) -> Vec<Triplet<usize, usize, f64>> {
    let mut out = Vec::with_capacity(a.val().len());
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            out.push(Triplet::new(i, j, v));
        }
    }
    out
}

pub fn spmv(a: &SpMat, x: &Col<f64>) -> Col<f64> {
    assert_eq!(a.ncols(), x.nrows());
    let mut y = Col::<f64>::zeros(a.nrows());
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            y[i] += v * xj;
        }
    }
    y
}

pub fn spmv_t(a: &SpMat, x: &Col<f64>) -> Col<f64> {
    assert_eq!(a.nrows(), x.nrows());
    Col::from_fn(a.ncols(), |j| {
        a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)).map(|(&i, &v)| v * x[i]).sum()
    })
}

pub fn transpose(a: &SpMat) -> SpMat {
    let t: Vec<_> = triplets(a).into_iter().map(|t| Triplet::new(t.col, t.row, t.val)).collect();
    from_triplets(a.ncols(), a.nrows(), &t)
}

pub fn matmul(a: &SpMat, b: &SpMat) -> SpMat {
    sparse_sparse_matmul(a.as_ref(), b.as_ref(), 1.0, Par::Seq).expect("sparse product")
}

/// `alpha * a + beta * b`.
pub fn add(alpha: f64, a: &SpMat, beta: f64, b: &SpMat) -> SpMat {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut t: Vec<_> = triplets(a).into_iter().map(|t| Triplet::new(t.row, t.col, alpha * t.val)).collect();
    t.extend(triplets(b).into_iter().map(|t| Triplet::new(t.row, t.col, beta * t.val)));
    from_triplets(a.nrows(), a.ncols(), &t)
}

pub fn to_dense(a: &SpMat) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            m[(i, j)] += v;
        }
    }
    m
}

pub fn from_dense(m: &Mat<f64>) -> SpMat {
    let mut t = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                t.push(Triplet::new(i, j, m[(i, j)]));
            }
        }
    }
    from_triplets(m.nrows(), m.ncols(), &t)
}

pub fn sparse_is_symmetric(a: &SpMat, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.val().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let lookup = |i: usize, j: usize| -> f64 {
        let rows = a.row_idx_of_col_raw(j);
        let vals = a.val_of_col(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => rows.iter().zip(vals).filter(|(&r, _)| r == i).map(|(_, &v)| v).sum(),
        }
    };
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            if (v - lookup(j, i)).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn dense_is_symmetric(a: &Mat<f64>, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.norm_max().max(f64::MIN_POSITIVE);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= rel_tol * scale))
}

pub fn dot(x: &Col<f64>, y: &Col<f64>) -> f64 {
    assert_eq!(x.nrows(), y.nrows());
    (0..x.nrows()).map(|i| x[i] * y[i]).sum()
}

pub fn norm(x: &Col<f64>) -> f64 {
    x.norm_l2()
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(a: &Mat<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.singular_values().map(|s| s.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN)
}

/// Ratio of extreme singular values; infinite for singular or empty-rank input.
pub fn condition_number(a: &Mat<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    match a.singular_values() {
        Ok(s) => {
            let hi = s[0];
            let lo = *s.last().unwrap();
            if lo <= 0.0 || !lo.is_finite() {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Extreme eigenvalues `(min, max)` of a symmetric operator given by its action, from
/// `steps` Lanczos iterations with full reorthogonalization.
pub fn lanczos_extremes(n: usize, steps: usize, apply: impl Fn(&Col<f64>) -> Col<f64>) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = steps.min(n).max(1);
    let mut q: Vec<Col<f64>> = Vec::with_capacity(m);
    let mut v = Col::from_fn(n, |i| 1.0 + ((i * 2654435761 + 17) % 1009) as f64 / 1009.0);
    v /= v.norm_l2();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for k in 0..m {
        q.push(v.clone());
        let mut w = apply(&v);
        let a = dot(&w, &v);
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let c = dot(&w, qi);
                w -= qi * c;
            }
        }
        let b = w.norm_l2();
        let scale = alpha.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if k + 1 == m || b <= 1e-13 * scale {
            break;
        }
        beta.push(b);
        v = w / b;
    }
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let ev = t.self_adjoint_eigenvalues(Side::Lower).expect("tridiagonal eigenvalues");
    (ev[0], ev[k - 1])
}

/// Conjugate gradients for a symmetric positive definite operator; errors if the relative
/// residual does not reach `tol` within `max_iter` steps.
pub fn conjugate_gradient(
    b: &Col<f64>,
    tol: f64,
    max_iter: usize,
    apply: impl Fn(&Col<f64>) -> Col<f64>,
) -> Result<Col<f64>> {
    let n = b.nrows();
    let bn = b.norm_l2();
    let mut x = Col::<f64>::zeros(n);
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let step = rr / dot(&p, &ap);
        x += &p * step;
        r -= &ap * step;
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bn {
            // confirm against the true residual
            let true_r = b - apply(&x);
            if true_r.norm_l2() <= 10.0 * tol * bn {
                return Ok(x);
            }
            r = true_r;
            rr = dot(&r, &r);
            p = r.clone();
            continue;
        }
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    Err(Error::Solve(format!("conjugate gradients did not reach {tol:.1e} in {max_iter} steps")))
}

enum Kind {
    DenseLu(PartialPivLu<f64>),
    DenseLlt(Llt<f64>),
    SparseLlt(SpLlt<usize, f64>),
    SparseLu(SpLu<usize, f64>),
}

/// A factorized square system. Symmetric positive definite input uses Cholesky,
/// everything else LU.
pub struct Solver {
    kind: Kind,
    dim: usize,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.kind {
            Kind::DenseLu(_) => "dense-lu",
            Kind::DenseLlt(_) => "dense-llt",
            Kind::SparseLlt(_) => "sparse-llt",
            Kind::SparseLu(_) => "sparse-lu",
        };
        write!(f, "Solver({name}, {})", self.dim)
    }
}

impl Solver {
    pub fn new(a: &SpMat) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Structural(format!("solver needs a square matrix, got {}x{}", n, a.ncols())));
        }
        let fill = a.val().len() as f64 / (n.max(1) as f64).powi(2);
        if n <= DENSE_SOLVE_LIMIT || fill > DENSE_FILL {
            return Self::dense(&to_dense(a));
        }
        if sparse_is_symmetric(a, 1e-14) {
            if let Ok(llt) = a.sp_cholesky(Side::Lower) {
                return Ok(Solver { kind: Kind::SparseLlt(llt), dim: n });
            }
        }
        let lu = a.sp_lu().map_err(|e| Error::Solve(format!("sparse LU failed: {e:?}")))?;
        let s = Solver { kind: Kind::SparseLu(lu), dim: n };
        s.probe(a)?;
        Ok(s)
    }

    pub fn dense(a: &Mat<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::Structural(format!("solver needs a square matrix, got {}x{}", n, a.ncols())));
        }
        if dense_is_symmetric(a, 1e-14) {
            if let Ok(llt) = a.llt(Side::Lower) {
                return Ok(Solver { kind: Kind::DenseLlt(llt), dim: n });
            }
        }
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if n > 0 && (!(lo > PIVOT_RATIO_FLOOR * hi) || !hi.is_finite()) {
            return Err(Error::Solve(format!("matrix is numerically singular (pivot ratio {:.2e})", lo / hi)));
        }
        Ok(Solver { kind: Kind::DenseLu(lu), dim: n })
    }

    // Sparse LU does not report singular pivots; a solve against a fixed vector exposes them.
    fn probe(&self, a: &SpMat) -> Result<()> {
        let b = Col::from_fn(self.dim, |i| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
        let x = self.solve(&b);
        let r = spmv(a, &x) - &b;
        if !x.norm_l2().is_finite() || r.norm_l2() > 1e-8 * b.norm_l2() {
            return Err(Error::Solve("matrix is numerically singular".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &Col<f64>) -> Col<f64> {
        assert_eq!(b.nrows(), self.dim);
        match &self.kind {
            Kind::DenseLu(f) => f.solve(b),
            Kind::DenseLlt(f) => f.solve(b),
            Kind::SparseLlt(f) => f.solve(b),
            Kind::SparseLu(f) => f.solve(b),
        }
    }

    pub fn solve_transpose(&self, b: &Col<f64>) -> Col<f64> {
        assert_eq!(b.nrows(), self.dim);
        match &self.kind {
            Kind::DenseLu(f) => f.solve_transpose(b),
            Kind::DenseLlt(f) => f.solve(b),
            Kind::SparseLlt(f) => f.solve(b),
            Kind::SparseLu(f) => f.solve_transpose(b),
        }
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        assert_eq!(b.nrows(), self.dim);
        match &self.kind {
            Kind::DenseLu(f) => f.solve(b),
            Kind::DenseLlt(f) => f.solve(b),
            Kind::SparseLlt(f) => f.solve(b),
            Kind::SparseLu(f) => f.solve(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SpMat {
        let mut t = Vec::new();
        for i in 0..n {
            t.push(Triplet::new(i, i, 2.0));
            if i > 0 {
                t.push(Triplet::new(i, i - 1, -1.0));
                t.push(Triplet::new(i - 1, i, -1.0));
            }
        }
        from_triplets(n, n, &t)
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let n = 3000;
        let a = laplace_1d(n);
        let b = Col::from_fn(n, |i| (i as f64 * 0.37).sin());
        let s = Solver::new(&a).unwrap();
        let x = s.solve(&b);
        let r = spmv(&a, &x) - &b;
        assert!(r.norm_l2() <= 1e-10 * b.norm_l2());
        let small = laplace_1d(40);
        let d = Solver::dense(&to_dense(&small)).unwrap();
        let bs = Col::from_fn(40, |i| i as f64);
        let xs = d.solve(&bs);
        assert!((spmv(&small, &xs) - &bs).norm_l2() < 1e-10 * bs.norm_l2());
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut m = Mat::<f64>::identity(4, 4);
        m[(3, 3)] = 0.0;
        m[(2, 3)] = 1.0;
        assert!(Solver::dense(&m).is_err());
    }

    #[test]
    fn transpose_solve_matches_transpose_system() {
        let m = Mat::from_fn(5, 5, |i, j| if i == j { 4.0 } else { (i as f64 - 2.0 * j as f64) * 0.1 });
        let s = Solver::dense(&m).unwrap();
        let b = Col::from_fn(5, |i| i as f64 + 1.0);
        let x = s.solve_transpose(&b);
        let r = m.transpose() * &x - &b;
        assert!(r.norm_l2() < 1e-12);
    }

    #[test]
    fn spmv_transpose_is_adjoint() {
        let a = from_triplets(3, 2, &[Triplet::new(0, 0, 1.0), Triplet::new(2, 1, -2.0), Triplet::new(1, 0, 3.0)]);
        let x = Col::from_fn(2, |i| i as f64 + 1.0);
        let y = Col::from_fn(3, |i| 2.0 - i as f64);
        assert!((dot(&spmv(&a, &x), &y) - dot(&x, &spmv_t(&a, &y))).abs() < 1e-14);
        assert!(sparse_is_symmetric(&laplace_1d(5), 0.0));
        assert!(!sparse_is_symmetric(&a, 0.0));
    }
    #[test]
    fn lanczos_and_cg_on_path_laplacian() {
        let n = 200;
        let a = laplace_1d(n);
        let (lo, hi) = lanczos_extremes(n, 200, |x| spmv(&a, x));
        let exact = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((lo - exact(1)).abs() < 1e-9 && (hi - exact(n)).abs() < 1e-9);
        let b = Col::from_fn(n, |i| (i as f64).cos());
        let x = conjugate_gradient(&b, 1e-12, 1000, |v| spmv(&a, v)).unwrap();
        assert!((spmv(&a, &x) - &b).norm_l2() <= 1e-11 * b.norm_l2());
    }
}
