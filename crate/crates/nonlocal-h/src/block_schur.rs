//! 2x2 block decompositions with respect to an orthogonal split, Schur complements and the
//! four maps `a00^-1`, `a00^-1 a01`, `a10 a00^-1`, `a11 - a10 a00^-1 a01`.
//!
//! Blocks are stored in mass-orthonormal coordinates of the split, so the block algebra is
//! plain Euclidean matrix algebra.

use std::sync::Arc;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, spectral_norm};
use crate::operator::{compress, LinearMap, Space, Subspace, DEFAULT_RANK_TOL};

/// Condition number beyond which a block counts as singular.
pub const INVERTIBILITY_CAP: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct BlockSplit {
    ambient: Space,
    h0: Subspace,
    h1: Subspace,
}

impl BlockSplit {
    pub fn new(h0: Subspace, h1: Subspace) -> Result<Self> {
        if h0.ambient().as_ref() != h1.ambient().as_ref() {
            return Err(Error::Structural("split parts live in different spaces".into()));
        }
        let ambient = h0.ambient().clone();
        if h0.dim() + h1.dim() != ambient.dim() {
            return Err(Error::Structural(format!(
                "split dimensions {} + {} do not add up to {}",
                h0.dim(),
                h1.dim(),
                ambient.dim()
            )));
        }
        let m = Mat::from_fn(ambient.dim(), h1.dim(), |i, j| ambient.mass()[i] * h1.basis()[(i, j)]);
        let cross = h0.basis().transpose() * m;
        if cross.nrows() > 0 && cross.ncols() > 0 && cross.norm_max() > 1e-10 {
            return Err(Error::Structural("split parts are not orthogonal".into()));
        }
        Ok(BlockSplit { ambient, h0, h1 })
    }

    /// `h0` together with its orthogonal complement.
    pub fn from_h0(h0: Subspace) -> Result<Self> {
        let h1 = h0.complement()?;
        Self::new(h0, h1)
    }

    pub fn ambient(&self) -> &Space {
        &self.ambient
    }

    pub fn h0(&self) -> &Subspace {
        &self.h0
    }

    pub fn h1(&self) -> &Subspace {
        &self.h1
    }

    /// The split with the roles of the two parts exchanged.
    pub fn swapped(&self) -> BlockSplit {
        BlockSplit { ambient: self.ambient.clone(), h0: self.h1.clone(), h1: self.h0.clone() }
    }

    fn same_as(&self, other: &BlockSplit) -> bool {
        self.ambient.as_ref() == other.ambient.as_ref()
            && self.h0.basis().nrows() == other.h0.basis().nrows()
            && self.h0.dim() == other.h0.dim()
            && (self.h0.basis() - other.h0.basis()).norm_max() == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct BlockOperator {
    split: Arc<BlockSplit>,
    pub a00: Mat<f64>,
    pub a01: Mat<f64>,
    pub a10: Mat<f64>,
    pub a11: Mat<f64>,
}

impl BlockOperator {
    pub fn new(a: &LinearMap, split: Arc<BlockSplit>) -> Result<Self> {
        if a.domain().as_ref() != split.ambient.as_ref() || a.codomain().as_ref() != split.ambient.as_ref() {
            return Err(Error::Structural("operator and split live in different spaces".into()));
        }
        let blk = |s: &Subspace, t: &Subspace| compress(a, s, t).map(|m| m.to_dense());
        Ok(BlockOperator {
            a00: blk(&split.h0, &split.h0)?,
            a01: blk(&split.h1, &split.h0)?,
            a10: blk(&split.h0, &split.h1)?,
            a11: blk(&split.h1, &split.h1)?,
            split,
        })
    }

    pub fn split(&self) -> &Arc<BlockSplit> {
        &self.split
    }

    /// Coordinates of the whole operator in the basis `[h0 | h1]`.
    pub fn coordinate_matrix(&self) -> Mat<f64> {
        let (d0, d1) = (self.a00.nrows(), self.a11.nrows());
        let mut m = Mat::<f64>::zeros(d0 + d1, d0 + d1);
        m.as_mut().submatrix_mut(0, 0, d0, d0).copy_from(&self.a00);
        m.as_mut().submatrix_mut(0, d0, d0, d1).copy_from(&self.a01);
        m.as_mut().submatrix_mut(d0, 0, d1, d0).copy_from(&self.a10);
        m.as_mut().submatrix_mut(d0, d0, d1, d1).copy_from(&self.a11);
        m
    }

    /// `iota0 a00 iota0* + iota0 a01 iota1* + iota1 a10 iota0* + iota1 a11 iota1*`.
    pub fn reassemble(&self) -> Result<LinearMap> {
        LinearMap::dense(self.split.ambient.clone(), self.split.ambient.clone(), self.ambient_matrix(&self.coordinate_matrix()))
    }

    fn ambient_matrix(&self, coords: &Mat<f64>) -> Mat<f64> {
        let s = &self.split;
        let n = s.ambient.dim();
        let (d0, d1) = (s.h0.dim(), s.h1.dim());
        let mut b = Mat::<f64>::zeros(n, d0 + d1);
        b.as_mut().submatrix_mut(0, 0, n, d0).copy_from(s.h0.basis());
        b.as_mut().submatrix_mut(0, d0, n, d1).copy_from(s.h1.basis());
        let mb = Mat::from_fn(n, d0 + d1, |i, j| s.ambient.mass()[i] * b[(i, j)]);
        &b * coords * mb.transpose()
    }

    fn from_coordinates(split: Arc<BlockSplit>, m: &Mat<f64>) -> Self {
        let d0 = split.h0.dim();
        let d1 = split.h1.dim();
        BlockOperator {
            a00: m.as_ref().submatrix(0, 0, d0, d0).to_owned(),
            a01: m.as_ref().submatrix(0, d0, d0, d1).to_owned(),
            a10: m.as_ref().submatrix(d0, 0, d1, d0).to_owned(),
            a11: m.as_ref().submatrix(d0, d0, d1, d1).to_owned(),
            split,
        }
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.coordinate_matrix())
    }
}

#[derive(Debug, Clone)]
pub struct SchurData {
    pub inv00: Mat<f64>,
    pub m01: Mat<f64>,
    pub m10: Mat<f64>,
    pub schur: Mat<f64>,
}

fn checked_inverse(m: &Mat<f64>, what: &str) -> Result<Mat<f64>> {
    if m.nrows() == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let c = condition_number(m);
    if !(c < INVERTIBILITY_CAP) {
        return Err(Error::Membership(format!("{what} is not invertible (condition number {c:.3e})")));
    }
    Ok(m.partial_piv_lu().inverse())
}

pub fn schur_data(a: &BlockOperator) -> Result<SchurData> {
    let inv00 = checked_inverse(&a.a00, "a00")?;
    let m01 = &inv00 * &a.a01;
    let m10 = &a.a10 * &inv00;
    let schur = &a.a11 - &a.a10 * &m01;
    Ok(SchurData { inv00, m01, m10, schur })
}

/// `|| L a U - diag(a00, a_S) || / ||a||` with the unitriangular factors of the block
/// elimination.
pub fn lu_factorization_residual(a: &BlockOperator) -> Result<f64> {
    let s = schur_data(a)?;
    let (d0, d1) = (a.a00.nrows(), a.a11.nrows());
    let n = d0 + d1;
    let mut l = Mat::<f64>::identity(n, n);
    l.as_mut().submatrix_mut(d0, 0, d1, d0).copy_from(-&s.m10);
    let mut u = Mat::<f64>::identity(n, n);
    u.as_mut().submatrix_mut(0, d0, d0, d1).copy_from(-&s.m01);
    let mut d = Mat::<f64>::zeros(n, n);
    d.as_mut().submatrix_mut(0, 0, d0, d0).copy_from(&a.a00);
    d.as_mut().submatrix_mut(d0, d0, d1, d1).copy_from(&s.schur);
    let r = &l * a.coordinate_matrix() * &u - d;
    Ok(spectral_norm(&r) / a.norm().max(f64::MIN_POSITIVE))
}

/// The explicit 2x2 block inverse, returned as a block operator on the same split.
pub fn block_inverse_blocks(a: &BlockOperator) -> Result<BlockOperator> {
    let s = schur_data(a)?;
    let si = checked_inverse(&s.schur, "the Schur complement")?;
    let b01 = -(&s.m01 * &si);
    let b10 = -(&si * &s.m10);
    let b00 = &s.inv00 + &s.m01 * &si * &s.m10;
    Ok(BlockOperator { split: a.split.clone(), a00: b00, a01: b01, a10: b10, a11: si })
}

pub fn block_inverse(a: &BlockOperator) -> Result<LinearMap> {
    block_inverse_blocks(a)?.reassemble()
}

#[derive(Debug, Clone, Copy)]
pub struct DualityReport {
    /// `||[a^-1]_11^-1 - a_S||`
    pub schur: f64,
    /// `||[a^-1]_11^-1 [a^-1]_10 + a10 a00^-1||`
    pub left: f64,
    /// `||[a^-1]_01 [a^-1]_11^-1 + a00^-1 a01||`
    pub right: f64,
    /// `||([a^-1]_00 - [a^-1]_01 [a^-1]_11^-1 [a^-1]_10) - a00^-1||`
    pub corner: f64,
    pub norm: f64,
}

impl DualityReport {
    pub fn max(&self) -> f64 {
        self.schur.max(self.left).max(self.right).max(self.corner)
    }
}

/// Residuals of the identities linking the Schur maps of `a` to the blocks of `a^-1`,
/// where `a^-1` comes from a general dense inverse.
pub fn inversion_duality(a: &BlockOperator) -> Result<DualityReport> {
    let s = schur_data(a)?;
    let full = a.coordinate_matrix();
    let inv = checked_inverse(&full, "a")?;
    let b = BlockOperator::from_coordinates(a.split.clone(), &inv);
    let b11i = checked_inverse(&b.a11, "[a^-1]_11")?;
    Ok(DualityReport {
        schur: spectral_norm(&(&b11i - &s.schur)),
        left: spectral_norm(&(&b11i * &b.a10 + &s.m10)),
        right: spectral_norm(&(&b.a01 * &b11i + &s.m01)),
        corner: spectral_norm(&(&b.a00 - &b.a01 * &b11i * &b.a10 - &s.inv00)),
        norm: a.norm(),
    })
}

pub fn tau_bound(a: &BlockOperator) -> Result<f64> {
    let s = schur_data(a)?;
    Ok([&s.inv00, &s.m01, &s.m10, &s.schur].iter().map(|m| spectral_norm(m)).fold(0.0, f64::max))
}

/// Ordered mass-orthonormal test vectors with summable positive weights.
#[derive(Debug, Clone)]
pub struct TestFamily {
    ambient: Space,
    vectors: Mat<f64>,
    weights: Vec<f64>,
}

impl TestFamily {
    pub fn new(ambient: Space, vectors: Mat<f64>, weights: Vec<f64>) -> Result<Self> {
        if vectors.nrows() != ambient.dim() || vectors.ncols() != weights.len() {
            return Err(Error::Structural("test family shape mismatch".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || weights.iter().sum::<f64>() > 1.0 + 1e-14 {
            return Err(Error::Structural("weights must be positive with sum at most one".into()));
        }
        Subspace::new(ambient.clone(), vectors.clone())?;
        Ok(TestFamily { ambient, vectors, weights })
    }

    /// Geometric weights `2^-j`, `j = 1, 2, ...`.
    pub fn geometric(ambient: Space, vectors: Mat<f64>) -> Result<Self> {
        let w = (1..=vectors.ncols()).map(|j| 0.5f64.powi(j as i32)).collect();
        Self::new(ambient, vectors, w)
    }

    /// The leading columns of `preferred` followed by seeded random directions, all
    /// mass-orthonormalized in order.
    pub fn with_random(ambient: Space, preferred: &Mat<f64>, random: usize, seed: u64) -> Result<Self> {
        let n = ambient.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = preferred.ncols() + random;
        let mut raw = Mat::<f64>::zeros(n, total);
        raw.as_mut().submatrix_mut(0, 0, n, preferred.ncols()).copy_from(preferred);
        for j in preferred.ncols()..total {
            for i in 0..n {
                raw[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let q = gram_schmidt(&ambient, &raw);
        Self::geometric(ambient, q)
    }

    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn ambient(&self) -> &Space {
        &self.ambient
    }

    pub fn vector(&self, j: usize) -> Col<f64> {
        self.vectors.col(j).to_owned()
    }
}

/// Ordered modified Gram-Schmidt in the mass inner product, run twice; dependent columns
/// are dropped.
pub fn gram_schmidt(space: &Space, raw: &Mat<f64>) -> Mat<f64> {
    let mut cols: Vec<Col<f64>> = Vec::new();
    for j in 0..raw.ncols() {
        let mut v = raw.col(j).to_owned();
        let start = space.norm(&v);
        for _ in 0..2 {
            for q in &cols {
                let c = space.inner(q, &v);
                v -= q * c;
            }
        }
        let nv = space.norm(&v);
        if nv > DEFAULT_RANK_TOL * start.max(f64::MIN_POSITIVE) && nv > 0.0 {
            cols.push(v / nv);
        }
    }
    let mut out = Mat::<f64>::zeros(raw.nrows(), cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.col_mut(j).copy_from(c);
    }
    out
}

/// Pairings `<t_j, m t_k>` of the four Schur maps on a test family.
#[derive(Debug, Clone)]
pub struct SchurPairings {
    pub maps: [Mat<f64>; 4],
}

impl SchurPairings {
    /// `sum_jk w_j w_k sum_maps |<t_j,(m_a - m_b) t_k>|`.
    pub fn distance(&self, other: &SchurPairings, weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for (ma, mb) in self.maps.iter().zip(&other.maps) {
            for j in 0..weights.len() {
                for k in 0..weights.len() {
                    total += weights[j] * weights[k] * (ma[(j, k)] - mb[(j, k)]).abs();
                }
            }
        }
        total
    }
}

pub fn schur_pairings(a: &BlockOperator, t: &TestFamily) -> Result<SchurPairings> {
    let s = schur_data(a)?;
    let sp = &a.split;
    if t.ambient.as_ref() != sp.ambient.as_ref() {
        return Err(Error::Structural("test family and split live in different spaces".into()));
    }
    let mt = Mat::from_fn(t.vectors.nrows(), t.len(), |i, j| sp.ambient.mass()[i] * t.vectors[(i, j)]);
    let c0 = sp.h0.basis().transpose() * &mt;
    let c1 = sp.h1.basis().transpose() * &mt;
    Ok(SchurPairings {
        maps: [
            c0.transpose() * &s.inv00 * &c0,
            c0.transpose() * &s.m01 * &c1,
            c1.transpose() * &s.m10 * &c0,
            c1.transpose() * &s.schur * &c1,
        ],
    })
}

/// Weighted pairing distance between the Schur maps of `a` and `b` on the same split.
pub fn schur_distance(a: &BlockOperator, b: &BlockOperator, t: &TestFamily) -> Result<f64> {
    if !Arc::ptr_eq(&a.split, &b.split) && !a.split.same_as(&b.split) {
        return Err(Error::Structural("operators are decomposed with respect to different splits".into()));
    }
    Ok(schur_pairings(a, t)?.distance(&schur_pairings(b, t)?, t.weights()))
}

#[derive(Debug, Clone, Copy)]
pub struct ThreeBlockReport {
    pub inverse: f64,
    pub left: f64,
    pub right: f64,
    pub schur: f64,
}

impl ThreeBlockReport {
    pub fn max(&self) -> f64 {
        self.inverse.max(self.left).max(self.right).max(self.schur)
    }
}

fn hstack(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.nrows(), a.ncols() + b.ncols());
    m.as_mut().submatrix_mut(0, 0, a.nrows(), a.ncols()).copy_from(a);
    m.as_mut().submatrix_mut(0, a.ncols(), b.nrows(), b.ncols()).copy_from(b);
    m
}

fn vstack(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.nrows() + b.nrows(), a.ncols());
    m.as_mut().submatrix_mut(0, 0, a.nrows(), a.ncols()).copy_from(a);
    m.as_mut().submatrix_mut(a.nrows(), 0, b.nrows(), b.ncols()).copy_from(b);
    m
}

/// Expresses the Schur maps for the coarse split `(L0 + L1, L2)` through the maps of the
/// fine split `(L0, L1 + L2)` and compares them with a direct coarse computation.
pub fn three_block_expansion(a: &LinearMap, l0: &Subspace, l1: &Subspace, l2: &Subspace) -> Result<ThreeBlockReport> {
    let blk = |s: &Subspace, t: &Subspace| compress(a, s, t).map(|m| m.to_dense());
    let parts = [l0, l1, l2];
    let mut b: Vec<Vec<Mat<f64>>> = Vec::new();
    for t in parts {
        let mut row = Vec::new();
        for s in parts {
            row.push(blk(s, t)?);
        }
        b.push(row);
    }
    let i00 = checked_inverse(&b[0][0], "a00")?;
    let a_s = &b[1][1] - &b[1][0] * &i00 * &b[0][1];
    let si = checked_inverse(&a_s, "the corner Schur complement")?;

    let e_inv = {
        let top = hstack(&(&i00 + &i00 * &b[0][1] * &si * &b[1][0] * &i00), &(-(&i00 * &b[0][1] * &si)));
        let bot = hstack(&(-(&si * &b[1][0] * &i00)), &si);
        vstack(&top, &bot)
    };
    let e_left = hstack(
        &(&b[2][0] * &i00 + (&b[2][0] * &i00 * &b[0][1] - &b[2][1]) * &si * &b[1][0] * &i00),
        &((&b[2][1] - &b[2][0] * &i00 * &b[0][1]) * &si),
    );
    let e_right = vstack(
        &(&i00 * &b[0][2] + &i00 * &b[0][1] * &si * (&b[1][0] * &i00 * &b[0][2] - &b[1][2])),
        &(&si * (&b[1][2] - &b[1][0] * &i00 * &b[0][2])),
    );
    let e_schur = (&b[2][2] - &b[2][0] * &i00 * &b[0][2])
        + (&b[2][1] - &b[2][0] * &i00 * &b[0][1]) * &si * (&b[1][0] * &i00 * &b[0][2] - &b[1][2]);

    // direct oracle on the coarse split
    let k0 = Subspace::new(l0.ambient().clone(), hstack(l0.basis(), l1.basis()))?;
    let coarse = BlockOperator::new(a, Arc::new(BlockSplit::new(k0, l2.clone())?))?;
    let d = schur_data(&coarse)?;
    Ok(ThreeBlockReport {
        inverse: spectral_norm(&(&e_inv - &d.inv00)),
        left: spectral_norm(&(&e_left - &d.m10)),
        right: spectral_norm(&(&e_right - &d.m01)),
        schur: spectral_norm(&(&e_schur - &d.schur)),
    })
}

/// Random operator whose symmetric part (in the mass inner product) is at least `alpha`.
pub fn random_coercive(space: &Space, alpha: f64, rng: &mut impl Rng) -> LinearMap {
    let n = space.dim();
    let x = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let y = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let scale = 1.0 / (n as f64).sqrt();
    let psd = x.transpose() * &x * (scale * scale);
    let skew = (&y - y.transpose()) * scale;
    let core = psd + skew + Mat::<f64>::identity(n, n) * alpha;
    // conjugate so the mass-weighted symmetric part keeps the bound
    let m = space.mass();
    let a = Mat::from_fn(n, n, |i, j| core[(i, j)] * m[j].sqrt() / m[i].sqrt());
    LinearMap::dense(space.clone(), space.clone(), a).expect("square")
}

/// A random split with `d0`-dimensional first part.
pub fn random_split(space: &Space, d0: usize, rng: &mut impl Rng) -> Result<Arc<BlockSplit>> {
    let n = space.dim();
    let raw = Mat::from_fn(n, d0, |_, _| rng.random_range(-1.0..1.0));
    let h0 = Subspace::from_spanning(space.clone(), &raw, DEFAULT_RANK_TOL)?;
    if h0.dim() != d0 {
        return Err(Error::Structural("random split lost rank".into()));
    }
    Ok(Arc::new(BlockSplit::from_h0(h0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::mat;
    use crate::operator::HilbertSpace;

    fn unit_split(n: usize, d0: usize) -> Arc<BlockSplit> {
        let e = HilbertSpace::euclidean(n);
        let h0 = Subspace::new(e.clone(), Mat::from_fn(n, d0, |i, j| (i == j) as u8 as f64)).unwrap();
        let h1 = Subspace::new(e, Mat::from_fn(n, n - d0, |i, j| (i == j + d0) as u8 as f64)).unwrap();
        Arc::new(BlockSplit::new(h0, h1).unwrap())
    }

    fn op(m: Mat<f64>) -> LinearMap {
        let e = HilbertSpace::euclidean(m.nrows());
        LinearMap::dense(e.clone(), e, m).unwrap()
    }

    #[test]
    fn identity_schur_data() {
        let a = BlockOperator::new(&op(Mat::identity(3, 3)), unit_split(3, 1)).unwrap();
        let s = schur_data(&a).unwrap();
        assert_eq!(s.inv00, Mat::<f64>::identity(1, 1));
        assert_eq!(s.m01.norm_max(), 0.0);
        assert_eq!(s.m10.norm_max(), 0.0);
        assert_eq!(s.schur, Mat::<f64>::identity(2, 2));
        assert!((tau_bound(&a).unwrap() - 1.0).abs() < 1e-15);
        let inv = block_inverse(&a).unwrap().to_dense();
        assert!((inv - Mat::<f64>::identity(3, 3)).norm_max() < 1e-15);
        assert_eq!(inversion_duality(&a).unwrap().max(), 0.0);
    }

    #[test]
    fn two_by_two_hand_values() {
        let a = BlockOperator::new(&op(mat![[2.0, 1.0], [1.0, 2.0]]), unit_split(2, 1)).unwrap();
        let s = schur_data(&a).unwrap();
        assert!((s.inv00[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.m01[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.m10[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.schur[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((tau_bound(&a).unwrap() - 1.5).abs() < 1e-15);
        let inv = block_inverse(&a).unwrap().to_dense();
        let oracle = mat![[2.0, -1.0], [-1.0, 2.0]] * (1.0 / 3.0);
        assert!((inv - oracle).norm_max() < 1e-15);
        assert!(inversion_duality(&a).unwrap().max() <= 1e-12);
    }

    #[test]
    fn block_diagonal_and_scaled_identity() {
        let a = BlockOperator::new(&op(mat![[4.0, 0.0], [0.0, 3.0]]), unit_split(2, 1)).unwrap();
        let s = schur_data(&a).unwrap();
        assert!((s.inv00[(0, 0)] - 0.25).abs() < 1e-15 && s.m01[(0, 0)] == 0.0 && s.m10[(0, 0)] == 0.0);
        assert!((s.schur[(0, 0)] - 3.0).abs() < 1e-15);
        let lam = 3.5;
        let b = BlockOperator::new(&op(Mat::<f64>::identity(4, 4) * lam), unit_split(4, 2)).unwrap();
        assert!((tau_bound(&b).unwrap() - lam).abs() < 1e-14);
    }

    #[test]
    fn singular_corner_is_not_a_member() {
        let a = BlockOperator::new(&op(mat![[0.0, 1.0], [1.0, 0.0]]), unit_split(2, 1)).unwrap();
        assert!(matches!(schur_data(&a), Err(Error::Membership(_))));
        // the inverse is a member of the swapped class: [a^-1]_11 = 0 is singular too here,
        // while a00 of the inverse w.r.t. the swapped split is also 0
        let b = BlockOperator::new(&op(mat![[0.0, 1.0], [1.0, 1.0]]), unit_split(2, 1)).unwrap();
        assert!(schur_data(&b).is_err());
        let inv = b.coordinate_matrix().partial_piv_lu().inverse();
        let ib = BlockOperator::new(&op(inv), Arc::new(unit_split(2, 1).swapped())).unwrap();
        assert!(schur_data(&ib).is_err());
    }

    #[test]
    fn random_block_inverse_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let e = HilbertSpace::new((0..20).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        let a = random_coercive(&e, 0.5, &mut rng);
        let split = random_split(&e, 8, &mut rng).unwrap();
        let b = BlockOperator::new(&a, split).unwrap();
        let inv = block_inverse(&b).unwrap().to_dense();
        let oracle = a.to_dense().partial_piv_lu().inverse();
        assert!((inv - oracle).norm_max() < 1e-9);
        assert!((b.reassemble().unwrap().to_dense() - a.to_dense()).norm_max() < 1e-12);
    }

    #[test]
    fn duality_on_fifty_dimensional_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let e = HilbertSpace::euclidean(50);
        let a = random_coercive(&e, 0.3, &mut rng);
        let b = BlockOperator::new(&a, random_split(&e, 20, &mut rng).unwrap()).unwrap();
        let r = inversion_duality(&b).unwrap();
        assert!(r.max() <= 1e-9 * r.norm, "{r:?}");
        assert!(lu_factorization_residual(&b).unwrap() <= 1e-10);
    }

    #[test]
    fn distance_examples() {
        let n = 4;
        let e = HilbertSpace::euclidean(n);
        let split = unit_split(n, 2);
        let a = BlockOperator::new(&op(Mat::identity(n, n)), split.clone()).unwrap();
        let b = BlockOperator::new(&op(Mat::<f64>::identity(n, n) * 2.0), split).unwrap();
        let t = TestFamily::geometric(e, Mat::identity(n, n)).unwrap();
        assert_eq!(schur_distance(&a, &a, &t).unwrap(), 0.0);
        let d = schur_distance(&a, &b, &t).unwrap();
        assert!(d > 0.0);
        assert!((d - schur_distance(&b, &a, &t).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn oscillating_multipliers_approach_their_mean() {
        // diag(1 + 0.5 sign(sin)) on a 1D grid against smooth test vectors
        let n = 256;
        let e = HilbertSpace::uniform(n, 1.0 / n as f64);
        let split = {
            let h0 = Subspace::new(e.clone(), Mat::from_fn(n, 1, |i, _| if i == 0 { (n as f64).sqrt() } else { 0.0 })).unwrap();
            Arc::new(BlockSplit::from_h0(h0).unwrap())
        };
        let modes = Mat::from_fn(n, 3, |i, k| {
            let x = (i as f64 + 0.5) / n as f64;
            (2f64).sqrt() * ((k + 1) as f64 * std::f64::consts::PI * x).sin()
        });
        let t = TestFamily::with_random(e.clone(), &modes, 0, 1).unwrap();
        let limit = BlockOperator::new(&LinearMap::identity(e.clone()), split.clone()).unwrap();
        let mut last = f64::INFINITY;
        for freq in [2usize, 4, 8, 16] {
            let m = Mat::from_fn(n, n, |i, j| {
                if i != j {
                    return 0.0;
                }
                let period = n / freq;
                if (i % period) < period / 2 { 1.5 } else { 0.5 }
            });
            let a = BlockOperator::new(&LinearMap::dense(e.clone(), e.clone(), m).unwrap(), split.clone()).unwrap();
            let d = schur_distance(&a, &limit, &t).unwrap();
            assert!(d < last, "{d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn three_block_identity_and_block_diagonal() {
        let n = 3;
        let e = HilbertSpace::euclidean(n);
        let s = |k: usize| Subspace::new(e.clone(), Mat::from_fn(n, 1, |i, _| (i == k) as u8 as f64)).unwrap();
        let r = three_block_expansion(&op(Mat::identity(n, n)), &s(0), &s(1), &s(2)).unwrap();
        assert_eq!(r.max(), 0.0);
        let d = op(mat![[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 4.0]]);
        let r = three_block_expansion(&d, &s(0), &s(1), &s(2)).unwrap();
        assert_eq!(r.max(), 0.0);
        let k0 = Subspace::new(e.clone(), Mat::from_fn(n, 2, |i, j| (i == j) as u8 as f64)).unwrap();
        let coarse = BlockOperator::new(&d, Arc::new(BlockSplit::new(k0, s(2)).unwrap())).unwrap();
        assert!((schur_data(&coarse).unwrap().schur[(0, 0)] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn three_block_random_thirty() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let e = HilbertSpace::euclidean(30);
        let a = random_coercive(&e, 0.5, &mut rng);
        let split = random_split(&e, 10, &mut rng).unwrap();
        let rest = split.h1().basis();
        let l1 = Subspace::new(e.clone(), rest.as_ref().subcols(0, 5).to_owned()).unwrap();
        let l2 = Subspace::new(e.clone(), rest.as_ref().subcols(5, 15).to_owned()).unwrap();
        let r = three_block_expansion(&a, split.h0(), &l1, &l2).unwrap();
        assert!(r.max() <= 1e-9, "{r:?}");
    }
}
