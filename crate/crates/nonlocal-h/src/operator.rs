//! Weighted finite-dimensional Hilbert spaces with diagonal mass, linear maps between
//! them, mass-orthonormal subspaces and the minimum modulus.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::Triplet;
use faer::{Col, Mat, Side};

use crate::error::{Error, Result};
use crate::linalg::{self, SpMat, Solver};

/// Singular values below `tol * sigma_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Dense SVD is used up to this dimension.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    mass: Vec<f64>,
}

pub type Space = Arc<HilbertSpace>;

impl HilbertSpace {
    pub fn new(mass: Vec<f64>) -> Result<Space> {
        if mass.is_empty() {
            return Err(Error::Structural("a Hilbert space needs positive dimension".into()));
        }
        if let Some(w) = mass.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Structural(format!("mass weight {w} is not positive")));
        }
        Ok(Arc::new(HilbertSpace { mass }))
    }

    /// Constant weight on every dof. Dimension zero is allowed here for coordinate spaces.
    pub fn uniform(dim: usize, weight: f64) -> Space {
        assert!(weight > 0.0 && weight.is_finite());
        Arc::new(HilbertSpace { mass: vec![weight; dim] })
    }

    pub fn euclidean(dim: usize) -> Space {
        Self::uniform(dim, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Common weight if the mass is a multiple of the identity.
    pub fn uniform_weight(&self) -> Option<f64> {
        let w = *self.mass.first()?;
        self.mass.iter().all(|&m| m == w).then_some(w)
    }

    pub fn inner(&self, x: &Col<f64>, y: &Col<f64>) -> f64 {
        assert_eq!(x.nrows(), self.dim());
        assert_eq!(y.nrows(), self.dim());
        (0..self.dim()).map(|i| self.mass[i] * x[i] * y[i]).sum()
    }

    pub fn norm(&self, x: &Col<f64>) -> f64 {
        self.inner(x, x).sqrt()
    }

    pub fn apply_mass(&self, x: &Col<f64>) -> Col<f64> {
        Col::from_fn(self.dim(), |i| self.mass[i] * x[i])
    }

    pub fn apply_mass_inverse(&self, x: &Col<f64>) -> Col<f64> {
        Col::from_fn(self.dim(), |i| x[i] / self.mass[i])
    }

    fn sqrt_mass(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m.sqrt()).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Matrix {
    Dense(Mat<f64>),
    Sparse(SpMat),
}

impl Matrix {
    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.ncols(),
            Matrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn apply(&self, x: &Col<f64>) -> Col<f64> {
        match self {
            Matrix::Dense(m) => m * x,
            Matrix::Sparse(m) => linalg::spmv(m, x),
        }
    }

    pub fn apply_transpose(&self, x: &Col<f64>) -> Col<f64> {
        match self {
            Matrix::Dense(m) => m.transpose() * x,
            Matrix::Sparse(m) => linalg::spmv_t(m, x),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(m) => linalg::to_dense(m),
        }
    }

    pub fn as_sparse(&self) -> Option<&SpMat> {
        match self {
            Matrix::Sparse(m) => Some(m),
            Matrix::Dense(_) => None,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows() * m.ncols(),
            Matrix::Sparse(m) => m.val().len(),
        }
    }

    pub fn to_sparse(&self) -> SpMat {
        match self {
            Matrix::Dense(m) => linalg::from_dense(m),
            Matrix::Sparse(m) => m.clone(),
        }
    }

    /// `diag(left) * self * diag(right)`.
    fn scaled(&self, left: &[f64], right: &[f64]) -> Matrix {
        match self {
            Matrix::Dense(m) => Matrix::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| left[i] * m[(i, j)] * right[j])),
            Matrix::Sparse(m) => {
                let t: Vec<_> = linalg::triplets(m)
                    .into_iter()
                    .map(|t| Triplet::new(t.row, t.col, left[t.row] * t.val * right[t.col]))
                    .collect();
                Matrix::Sparse(linalg::from_triplets(m.nrows(), m.ncols(), &t))
            }
        }
    }

    fn transposed(&self) -> Matrix {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.transpose().to_owned()),
            Matrix::Sparse(m) => Matrix::Sparse(linalg::transpose(m)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearMap {
    domain: Space,
    codomain: Space,
    matrix: Matrix,
}

impl LinearMap {
    pub fn new(domain: Space, codomain: Space, matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::Structural(format!(
                "matrix is {}x{} but spaces need {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(LinearMap { domain, codomain, matrix })
    }

    pub fn dense(domain: Space, codomain: Space, m: Mat<f64>) -> Result<Self> {
        Self::new(domain, codomain, Matrix::Dense(m))
    }

    pub fn sparse(domain: Space, codomain: Space, m: SpMat) -> Result<Self> {
        Self::new(domain, codomain, Matrix::Sparse(m))
    }

    pub fn identity(space: Space) -> Self {
        let n = space.dim();
        LinearMap { domain: space.clone(), codomain: space, matrix: Matrix::Sparse(linalg::identity(n)) }
    }

    pub fn domain(&self) -> &Space {
        &self.domain
    }

    pub fn codomain(&self) -> &Space {
        &self.codomain
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, x: &Col<f64>) -> Col<f64> {
        assert_eq!(x.nrows(), self.domain.dim(), "vector does not live in the domain");
        self.matrix.apply(x)
    }

    /// Plain matrix transpose applied to `y`; equals the adjoint only for uniform masses.
    pub fn apply_transpose(&self, y: &Col<f64>) -> Col<f64> {
        assert_eq!(y.nrows(), self.codomain.dim(), "vector does not live in the codomain");
        self.matrix.apply_transpose(y)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        self.matrix.to_dense()
    }

    /// The matrix of the map in mass-orthonormal coordinates, `M_cod^(1/2) A M_dom^(-1/2)`.
    pub fn symmetrized(&self) -> Matrix {
        let l = self.codomain.sqrt_mass();
        let r: Vec<f64> = self.domain.sqrt_mass().iter().map(|s| 1.0 / s).collect();
        self.matrix.scaled(&l, &r)
    }

    /// Operator norm in the weighted norms.
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.symmetrized().to_dense())
    }
}

/// `A* = M_dom^-1 A^T M_cod`.
pub fn adjoint(a: &LinearMap) -> LinearMap {
    let l: Vec<f64> = a.domain.mass().iter().map(|m| 1.0 / m).collect();
    let matrix = a.matrix.transposed().scaled(&l, a.codomain.mass());
    LinearMap { domain: a.codomain.clone(), codomain: a.domain.clone(), matrix }
}

#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: Space,
    basis: Mat<f64>,
}

impl Subspace {
    /// Accepts a basis that is already mass-orthonormal.
    pub fn new(ambient: Space, basis: Mat<f64>) -> Result<Self> {
        if basis.nrows() != ambient.dim() || basis.ncols() > ambient.dim() {
            return Err(Error::Structural("basis shape does not fit the ambient space".into()));
        }
        let s = Subspace { ambient, basis };
        let g = s.gram();
        let err = (&g - Mat::<f64>::identity(g.nrows(), g.ncols())).norm_max();
        if err > 1e-11 {
            return Err(Error::Structural(format!("basis is not mass-orthonormal (error {err:.2e})")));
        }
        Ok(s)
    }

    /// Orthonormal basis for the span of the columns; directions with singular value below
    /// `tol * sigma_max` are dropped.
    pub fn from_spanning(ambient: Space, vectors: &Mat<f64>, tol: f64) -> Result<Self> {
        if vectors.nrows() != ambient.dim() {
            return Err(Error::Structural("spanning vectors do not fit the ambient space".into()));
        }
        if vectors.ncols() == 0 {
            return Ok(Self::zero(ambient));
        }
        let sq = ambient.sqrt_mass();
        let w = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| sq[i] * vectors[(i, j)]);
        let svd = w.thin_svd().map_err(|e| Error::Structural(format!("SVD failed: {e:?}")))?;
        let s = svd.S().column_vector();
        let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
        let r = (0..s.nrows()).filter(|&i| s[i] > tol * smax && s[i] > 0.0).count();
        let u = svd.U();
        let basis = Mat::from_fn(vectors.nrows(), r, |i, j| u[(i, j)] / sq[i]);
        Ok(Subspace { ambient, basis })
    }

    pub fn zero(ambient: Space) -> Self {
        let n = ambient.dim();
        Subspace { ambient, basis: Mat::zeros(n, 0) }
    }

    pub fn full(ambient: Space) -> Self {
        let n = ambient.dim();
        let basis = Mat::from_fn(n, n, |i, j| if i == j { 1.0 / ambient.mass()[i].sqrt() } else { 0.0 });
        Subspace { ambient, basis }
    }

    pub fn ambient(&self) -> &Space {
        &self.ambient
    }

    pub fn basis(&self) -> &Mat<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn gram(&self) -> Mat<f64> {
        let mb = Mat::from_fn(self.basis.nrows(), self.basis.ncols(), |i, j| self.ambient.mass()[i] * self.basis[(i, j)]);
        self.basis.transpose() * mb
    }

    /// Coordinates `basis^T M v` (this is the adjoint of the embedding).
    pub fn coordinates(&self, v: &Col<f64>) -> Col<f64> {
        self.basis.transpose() * self.ambient.apply_mass(v)
    }

    pub fn embed(&self, c: &Col<f64>) -> Col<f64> {
        &self.basis * c
    }

    /// Mass-orthogonal complement, computed densely.
    pub fn complement(&self) -> Result<Subspace> {
        let n = self.ambient.dim();
        if n > DENSE_LIMIT {
            return Err(Error::Structural(format!("complement needs a dense SVD, dimension {n} exceeds {DENSE_LIMIT}")));
        }
        if self.dim() == 0 {
            return Ok(Self::full(self.ambient.clone()));
        }
        let sq = self.ambient.sqrt_mass();
        let w = Mat::from_fn(n, self.dim(), |i, j| sq[i] * self.basis[(i, j)]);
        let svd = w.svd().map_err(|e| Error::Structural(format!("SVD failed: {e:?}")))?;
        let u = svd.U();
        let k = self.dim();
        let basis = Mat::from_fn(n, n - k, |i, j| u[(i, k + j)] / sq[i]);
        Ok(Subspace { ambient: self.ambient.clone(), basis })
    }

    /// The coordinate space of this subspace (unit mass, since the basis is orthonormal).
    pub fn coordinate_space(&self) -> Space {
        HilbertSpace::euclidean(self.dim())
    }
}

/// Orthogonal projection onto `s`.
pub fn project(s: &Subspace, v: &Col<f64>) -> Result<Col<f64>> {
    if v.nrows() != s.ambient.dim() {
        return Err(Error::Structural("vector does not live in the ambient space".into()));
    }
    Ok(s.embed(&s.coordinates(v)))
}

/// Kernel and range of `a` as mass-orthonormal subspaces.
pub fn fundamental_subspaces(a: &LinearMap, tol: f64) -> Result<(Subspace, Subspace)> {
    let (m, n) = (a.codomain.dim(), a.domain.dim());
    if m.max(n) > DENSE_LIMIT {
        return Err(Error::Structural(format!(
            "fundamental_subspaces uses a dense SVD, dimension {} exceeds {DENSE_LIMIT}",
            m.max(n)
        )));
    }
    let s = a.symmetrized().to_dense();
    let svd = s.svd().map_err(|e| Error::Structural(format!("SVD failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let smax = if sv.nrows() > 0 { sv[0] } else { 0.0 };
    let rank = (0..sv.nrows()).filter(|&i| sv[i] > tol * smax && sv[i] > 0.0).count();
    let sd = a.domain.sqrt_mass();
    let sc = a.codomain.sqrt_mass();
    let (u, v) = (svd.U(), svd.V());
    let kernel = Mat::from_fn(n, n - rank, |i, j| v[(i, rank + j)] / sd[i]);
    let range = Mat::from_fn(m, rank, |i, j| u[(i, j)] / sc[i]);
    Ok((
        Subspace { ambient: a.domain.clone(), basis: kernel },
        Subspace { ambient: a.codomain.clone(), basis: range },
    ))
}

pub fn rank(a: &LinearMap, tol: f64) -> Result<usize> {
    Ok(fundamental_subspaces(a, tol)?.1.dim())
}

/// Smallest nonzero singular value in the weighted norms; `+inf` for the zero map.
pub fn min_modulus(a: &LinearMap) -> Result<f64> {
    let (m, n) = (a.codomain.dim(), a.domain.dim());
    if m.max(n) <= DENSE_LIMIT {
        let sv = a
            .symmetrized()
            .to_dense()
            .singular_values()
            .map_err(|e| Error::Structural(format!("SVD failed: {e:?}")))?;
        let smax = sv.first().copied().unwrap_or(0.0);
        return Ok(sv
            .iter()
            .copied()
            .filter(|&s| s > DEFAULT_RANK_TOL * smax && s > 0.0)
            .fold(f64::INFINITY, f64::min));
    }
    sparse_min_modulus(a)
}

// Inverse iteration on the Gram operator of an injective (or surjective) map.
fn sparse_min_modulus(a: &LinearMap) -> Result<f64> {
    let s = a.symmetrized().to_sparse();
    let st = linalg::transpose(&s);
    let candidates = [linalg::matmul(&st, &s), linalg::matmul(&s, &st)];
    for gram in candidates {
        if gram.val().iter().all(|v| *v == 0.0) {
            return Ok(f64::INFINITY);
        }
        let Ok(llt) = gram.sp_cholesky(Side::Lower) else { continue };
        let n = gram.nrows();
        let mut x = Col::from_fn(n, |i| 1.0 + ((i * 2654435761) % 1000) as f64 / 1000.0);
        x /= x.norm_l2();
        let mut lambda = f64::INFINITY;
        for _ in 0..500 {
            let y = llt.solve(&x);
            let ny = y.norm_l2();
            let est = linalg::dot(&x, &y);
            x = y / ny;
            let next = 1.0 / est;
            if (next - lambda).abs() <= 1e-13 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        return Ok(lambda.max(0.0).sqrt());
    }
    Err(Error::Structural("minimum modulus of a large map that is neither injective nor surjective".into()))
}

/// Block-diagonal map on the direct sums of the domains and codomains.
pub fn direct_sum(maps: &[LinearMap]) -> Result<LinearMap> {
    if maps.is_empty() {
        return Err(Error::Structural("direct sum of an empty list".into()));
    }
    let dom: Vec<f64> = maps.iter().flat_map(|a| a.domain.mass().iter().copied()).collect();
    let cod: Vec<f64> = maps.iter().flat_map(|a| a.codomain.mass().iter().copied()).collect();
    let (nr, nc) = (cod.len(), dom.len());
    let all_dense = maps.iter().all(|a| matches!(a.matrix, Matrix::Dense(_)));
    let mut r0 = 0;
    let mut c0 = 0;
    let matrix = if all_dense {
        let mut m = Mat::<f64>::zeros(nr, nc);
        for a in maps {
            let d = a.to_dense();
            m.as_mut().submatrix_mut(r0, c0, d.nrows(), d.ncols()).copy_from(&d);
            r0 += d.nrows();
            c0 += d.ncols();
        }
        Matrix::Dense(m)
    } else {
        let mut t = Vec::new();
        for a in maps {
            let s = a.matrix.to_sparse();
            t.extend(linalg::triplets(&s).into_iter().map(|x| Triplet::new(x.row + r0, x.col + c0, x.val)));
            r0 += s.nrows();
            c0 += s.ncols();
        }
        Matrix::Sparse(linalg::from_triplets(nr, nc, &t))
    };
    let domain = if dom.is_empty() { HilbertSpace::uniform(0, 1.0) } else { HilbertSpace::new(dom)? };
    let codomain = if cod.is_empty() { HilbertSpace::uniform(0, 1.0) } else { HilbertSpace::new(cod)? };
    LinearMap::new(domain, codomain, matrix)
}

/// `iota_{s1}^* A iota_{s0}` in the bases of the two subspaces.
pub fn compress(a: &LinearMap, s0: &Subspace, s1: &Subspace) -> Result<LinearMap> {
    if s0.ambient.as_ref() != a.domain.as_ref() || s1.ambient.as_ref() != a.codomain.as_ref() {
        return Err(Error::Structural("subspaces do not live in the map's spaces".into()));
    }
    let ab = match &a.matrix {
        Matrix::Dense(m) => m * &s0.basis,
        Matrix::Sparse(m) => {
            let mut out = Mat::<f64>::zeros(m.nrows(), s0.dim());
            for j in 0..s0.dim() {
                let col = linalg::spmv(m, &s0.basis.col(j).to_owned());
                out.col_mut(j).copy_from(&col);
            }
            out
        }
    };
    let mab = Mat::from_fn(ab.nrows(), ab.ncols(), |i, j| s1.ambient.mass()[i] * ab[(i, j)]);
    let c = s1.basis.transpose() * mab;
    LinearMap::dense(s0.coordinate_space(), s1.coordinate_space(), c)
}

/// Factorization of a square map for repeated solves.
pub fn factorize(a: &LinearMap) -> Result<Solver> {
    match &a.matrix {
        Matrix::Dense(m) => Solver::dense(m),
        Matrix::Sparse(m) => Solver::new(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Mat<f64> {
        Mat::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_space(rng: &mut ChaCha8Rng, n: usize) -> Space {
        HilbertSpace::new((0..n).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap()
    }

    #[test]
    fn adjoint_of_identity_and_plain_transpose() {
        let s = HilbertSpace::euclidean(3);
        let id = LinearMap::identity(s.clone());
        assert!((adjoint(&id).to_dense() - Mat::<f64>::identity(3, 3)).norm_max() == 0.0);
        let e = HilbertSpace::euclidean(2);
        let a = LinearMap::dense(e.clone(), e, mat![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(adjoint(&a).to_dense(), mat![[0.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn adjoint_weighted_scalar() {
        let dom = HilbertSpace::new(vec![4.0]).unwrap();
        let cod = HilbertSpace::new(vec![1.0]).unwrap();
        let a = LinearMap::dense(dom.clone(), cod.clone(), mat![[2.0]]).unwrap();
        let b = adjoint(&a);
        assert!((b.to_dense()[(0, 0)] - 0.5).abs() < 1e-15);
        // <Ax, y>_cod = <x, A*y>_dom on basis vectors
        let x = Col::from_fn(1, |_| 1.0);
        let y = Col::from_fn(1, |_| 1.0);
        assert!((cod.inner(&a.apply(&x), &y) - dom.inner(&x, &b.apply(&y))).abs() < 1e-15);
    }

    #[test]
    fn adjoint_weighted_random_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dom = random_space(&mut rng, 6);
        let cod = random_space(&mut rng, 4);
        let a = LinearMap::dense(dom.clone(), cod.clone(), random_mat(&mut rng, 4, 6)).unwrap();
        let b = adjoint(&a);
        for _ in 0..5 {
            let x = Col::from_fn(6, |_| rng.random_range(-1.0..1.0));
            let y = Col::from_fn(4, |_| rng.random_range(-1.0..1.0));
            assert!((cod.inner(&a.apply(&x), &y) - dom.inner(&x, &b.apply(&y))).abs() < 1e-13);
        }
        let back = adjoint(&b);
        assert!((back.to_dense() - a.to_dense()).norm_max() < 1e-12);
    }

    #[test]
    fn fundamental_subspaces_of_simple_maps() {
        let e = HilbertSpace::euclidean(3);
        let z = LinearMap::dense(e.clone(), e.clone(), Mat::zeros(3, 3)).unwrap();
        let (k, r) = fundamental_subspaces(&z, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((k.dim(), r.dim()), (3, 0));
        let e2 = HilbertSpace::euclidean(2);
        let d = LinearMap::dense(e2.clone(), e2.clone(), mat![[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let (k, r) = fundamental_subspaces(&d, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((k.dim(), r.dim()), (1, 1));
        assert!((k.basis()[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((r.basis()[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_onto_diagonal_line() {
        let e = HilbertSpace::euclidean(2);
        let s = Subspace::new(e.clone(), mat![[1.0 / 2f64.sqrt()], [1.0 / 2f64.sqrt()]]).unwrap();
        let v = Col::from_fn(2, |i| if i == 0 { 1.0 } else { 0.0 });
        let p = project(&s, &v).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let full = Subspace::full(e.clone());
        assert!((project(&full, &v).unwrap() - &v).norm_l2() < 1e-15);
        assert_eq!(project(&Subspace::zero(e), &v).unwrap().norm_l2(), 0.0);
    }

    #[test]
    fn min_modulus_of_diagonal_and_identity() {
        let e = HilbertSpace::euclidean(3);
        let d = LinearMap::dense(e.clone(), e.clone(), mat![[0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        assert!((min_modulus(&d).unwrap() - 2.0).abs() < 1e-14);
        assert!((min_modulus(&LinearMap::identity(e.clone())).unwrap() - 1.0).abs() < 1e-14);
        let z = LinearMap::dense(e.clone(), e, Mat::zeros(3, 3)).unwrap();
        assert!(min_modulus(&z).unwrap().is_infinite());
    }

    #[test]
    fn direct_sum_of_scalars() {
        let e = HilbertSpace::euclidean(1);
        let a = LinearMap::dense(e.clone(), e.clone(), mat![[2.0]]).unwrap();
        let b = LinearMap::dense(e.clone(), e, mat![[3.0]]).unwrap();
        let s = direct_sum(&[a.clone(), b]).unwrap();
        assert!((min_modulus(&s).unwrap() - 2.0).abs() < 1e-14);
        let single = direct_sum(&[a.clone()]).unwrap();
        assert_eq!(single.to_dense(), a.to_dense());
    }

    #[test]
    fn direct_sum_min_modulus_is_min_of_summands() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let maps: Vec<_> = (0..4)
            .map(|_| {
                let s = random_space(&mut rng, 6);
                LinearMap::dense(s.clone(), s, random_mat(&mut rng, 6, 6)).unwrap()
            })
            .collect();
        let each = maps.iter().map(|a| min_modulus(a).unwrap()).fold(f64::INFINITY, f64::min);
        let sum = min_modulus(&direct_sum(&maps).unwrap()).unwrap();
        assert!((sum - each).abs() <= 1e-12);
    }

    #[test]
    fn compress_matches_triple_product() {
        let e = HilbertSpace::euclidean(2);
        let a = LinearMap::dense(e.clone(), e.clone(), mat![[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let s = Subspace::new(e.clone(), mat![[0.0], [1.0]]).unwrap();
        assert!((compress(&a, &s, &s).unwrap().to_dense()[(0, 0)] - 2.0).abs() < 1e-15);
        let full = Subspace::full(e);
        assert_eq!(compress(&a, &full, &full).unwrap().to_dense(), a.to_dense());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = random_space(&mut rng, 8);
        let a = LinearMap::dense(sp.clone(), sp.clone(), random_mat(&mut rng, 8, 8)).unwrap();
        let s = Subspace::from_spanning(sp.clone(), &random_mat(&mut rng, 8, 3), DEFAULT_RANK_TOL).unwrap();
        let b = s.basis();
        let m = Mat::from_fn(8, 8, |i, j| if i == j { sp.mass()[i] } else { 0.0 });
        let oracle = b.transpose() * &m * a.to_dense() * b;
        assert!((compress(&a, &s, &s).unwrap().to_dense() - oracle).norm_max() < 1e-13);
    }

    #[test]
    fn sparse_min_modulus_matches_dense_on_path_gradient() {
        // forward difference on a path with Dirichlet ends: injective
        let n = 2100;
        let mut t = Vec::new();
        for i in 0..=n {
            if i < n {
                t.push(Triplet::new(i, i, 1.0));
            }
            if i > 0 {
                t.push(Triplet::new(i, i - 1, -1.0));
            }
        }
        let g = linalg::from_triplets(n + 1, n, &t);
        let a = LinearMap::sparse(HilbertSpace::euclidean(n), HilbertSpace::euclidean(n + 1), g).unwrap();
        let exact = 2.0 * (std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
        let got = min_modulus(&a).unwrap();
        assert!((got - exact).abs() < 1e-8 * exact, "{got} vs {exact}");
    }
}
