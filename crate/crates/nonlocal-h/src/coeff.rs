//! Coefficient operators on the field space: per-voxel tensors, layered media, nonlocal
//! convolutions and random coercive perturbations, plus the admissibility report.

use std::sync::{Arc, OnceLock};

use faer::sparse::Triplet;
use faer::{Col, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::derham::GridComplex;
use crate::error::{Error, Result};
use crate::linalg::{self, condition_number, lanczos_extremes, Solver, SpMat};
use crate::operator::{LinearMap, Matrix, DENSE_LIMIT};

pub type Tensor = [[f64; 3]; 3];

/// Condition numbers at or above this count as singular.
pub const DEFAULT_COND_CAP: f64 = 1e10;

/// Largest convolution stencil applied by direct summation.
const MAX_STENCIL_RADIUS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    Multiplication,
    Convolution,
    BlockStructured,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientParams {
    Identity,
    Tensor { alpha: f64, diagonal: bool },
    Layered { minus: f64, plus: f64, n: usize },
    Convolution { n: usize, l1: f64, sigma: f64 },
    RandomCoercive { alpha: f64, seed: u64 },
    Custom(String),
}

/// A bounded operator on the field space H of a grid complex.
pub struct Coefficient {
    complex: Arc<GridComplex>,
    operator: LinearMap,
    sparse: SpMat,
    kind: CoefficientKind,
    params: CoefficientParams,
    lower_bound: Option<f64>,
    symmetric: bool,
    diagonal: Option<Vec<f64>>,
    inverse: OnceLock<std::result::Result<Arc<Solver>, String>>,
    pub(crate) field_cache: OnceLock<std::result::Result<Arc<crate::electro::Factorizations>, String>>,
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Coefficient({:?}, {:?}, nnz {})", self.kind, self.params, self.sparse.val().len())
    }
}

impl Coefficient {
    fn assemble(
        complex: Arc<GridComplex>,
        sparse: SpMat,
        kind: CoefficientKind,
        params: CoefficientParams,
        lower_bound: Option<f64>,
    ) -> Result<Self> {
        let hs = complex.field_space().clone();
        let operator = LinearMap::sparse(hs.clone(), hs, sparse.clone())?;
        let symmetric = linalg::sparse_is_symmetric(&sparse, 1e-15);
        let diagonal = is_diagonal(&sparse).then(|| {
            let mut d = vec![0.0; sparse.nrows()];
            for t in linalg::triplets(&sparse) {
                d[t.row] += t.val;
            }
            d
        });
        Ok(Coefficient {
            complex,
            operator,
            sparse,
            kind,
            params,
            lower_bound,
            symmetric,
            diagonal,
            inverse: OnceLock::new(),
            field_cache: OnceLock::new(),
        })
    }

    pub fn identity(complex: &Arc<GridComplex>) -> Result<Self> {
        Self::assemble(
            complex.clone(),
            linalg::identity(complex.n1()),
            CoefficientKind::Multiplication,
            CoefficientParams::Identity,
            Some(1.0),
        )
    }

    /// Wraps an arbitrary square operator on H.
    pub fn from_operator(complex: &Arc<GridComplex>, op: &LinearMap, label: &str) -> Result<Self> {
        let hs = complex.field_space();
        if op.domain().as_ref() != hs.as_ref() || op.codomain().as_ref() != hs.as_ref() {
            return Err(Error::Structural("coefficient must be a square operator on the field space".into()));
        }
        Self::assemble(complex.clone(), op.matrix().to_sparse(), CoefficientKind::Custom, CoefficientParams::Custom(label.into()), None)
    }

    pub fn with_kind(mut self, kind: CoefficientKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn complex(&self) -> &Arc<GridComplex> {
        &self.complex
    }

    pub fn operator(&self) -> &LinearMap {
        &self.operator
    }

    pub fn matrix(&self) -> &SpMat {
        &self.sparse
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn params(&self) -> &CoefficientParams {
        &self.params
    }

    /// Lower bound on the symmetric part guaranteed by the construction, if any.
    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.sparse.nrows()
    }

    pub fn apply(&self, v: &Col<f64>) -> Col<f64> {
        match &self.diagonal {
            Some(d) => Col::from_fn(v.nrows(), |i| d[i] * v[i]),
            None => linalg::spmv(&self.sparse, v),
        }
    }

    pub fn apply_transpose(&self, v: &Col<f64>) -> Col<f64> {
        match &self.diagonal {
            Some(d) => Col::from_fn(v.nrows(), |i| d[i] * v[i]),
            None => linalg::spmv_t(&self.sparse, v),
        }
    }

    pub fn apply_mat(&self, v: &Mat<f64>) -> Mat<f64> {
        let mut out = Mat::<f64>::zeros(v.nrows(), v.ncols());
        for j in 0..v.ncols() {
            out.col_mut(j).copy_from(&self.apply(&v.col(j).to_owned()));
        }
        out
    }

    fn is_local(&self) -> bool {
        self.sparse.val().len() <= 64 * self.dim().max(1)
    }

    fn direct_inverse(&self) -> Result<Arc<Solver>> {
        self.inverse
            .get_or_init(|| Solver::new(&self.sparse).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(|e| Error::Admissibility(format!("coefficient is not invertible: {e}")))
    }

    /// `eps^-1 b`. Local operators are factorized; nonlocal symmetric ones use conjugate
    /// gradients to a relative residual of 1e-14.
    pub fn solve(&self, b: &Col<f64>) -> Result<Col<f64>> {
        if let Some(d) = &self.diagonal {
            if d.iter().any(|&x| x == 0.0) {
                return Err(Error::Admissibility("diagonal coefficient has a zero entry".into()));
            }
            return Ok(Col::from_fn(b.nrows(), |i| b[i] / d[i]));
        }
        if !self.is_local() && self.symmetric && self.lower_bound.is_some_and(|a| a > 0.0) {
            return linalg::conjugate_gradient(b, 1e-14, 2000, |v| self.apply(v));
        }
        Ok(self.direct_inverse()?.solve(b))
    }

    /// Dense matrix of the coefficient (small domains only).
    pub fn to_dense(&self) -> Mat<f64> {
        linalg::to_dense(&self.sparse)
    }
}

fn is_diagonal(a: &SpMat) -> bool {
    (0..a.ncols()).all(|j| a.row_idx_of_col_raw(j).iter().all(|&i| i == j))
}

/// Per-voxel tensors on the full voxel box, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub shape: [usize; 3],
    pub values: Vec<Tensor>,
}

#[derive(Deserialize)]
struct TensorFile {
    shape: Option<[usize; 3]>,
    constant: Option<[f64; 9]>,
    tensors: Option<Vec<[f64; 9]>>,
}

fn unflatten(t: &[f64; 9]) -> Tensor {
    [[t[0], t[1], t[2]], [t[3], t[4], t[5]], [t[6], t[7], t[8]]]
}

impl TensorField {
    pub fn constant(shape: [usize; 3], t: Tensor) -> Self {
        TensorField { shape, values: vec![t; shape.iter().product()] }
    }

    pub fn diagonal(shape: [usize; 3], d: [f64; 3]) -> Self {
        Self::constant(shape, [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn from_fn(shape: [usize; 3], f: impl Fn(usize, usize, usize) -> Tensor) -> Self {
        let mut values = Vec::with_capacity(shape.iter().product());
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    values.push(f(i, j, k));
                }
            }
        }
        TensorField { shape, values }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> &Tensor {
        &self.values[(k * self.shape[1] + j) * self.shape[0] + i]
    }

    /// Reads `{"constant": [9 numbers]}` or `{"shape": [nx,ny,nz], "tensors": [[9 numbers], ...]}`
    /// (row-major tensors, voxels x fastest).
    pub fn from_json(text: &str, shape: [usize; 3]) -> Result<Self> {
        let file: TensorFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("tensor file: {e}")))?;
        if let Some(c) = file.constant {
            return Ok(Self::constant(shape, unflatten(&c)));
        }
        let (Some(s), Some(t)) = (file.shape, file.tensors) else {
            return Err(Error::Config("tensor file needs `constant` or `shape` and `tensors`".into()));
        };
        if s != shape || t.len() != shape.iter().product::<usize>() {
            return Err(Error::Config(format!("tensor field has shape {s:?} with {} entries, domain is {shape:?}", t.len())));
        }
        Ok(TensorField { shape, values: t.iter().map(unflatten).collect() })
    }
}

fn sym_min_eig(t: &Tensor) -> f64 {
    let s = Mat::from_fn(3, 3, |i, j| 0.5 * (t[i][j] + t[j][i]));
    s.self_adjoint_eigenvalues(Side::Lower).map(|e| e[0]).unwrap_or(f64::NEG_INFINITY)
}

/// The 4 voxels sharing an edge in direction `d` at lattice point `p`.
fn edge_voxels(d: usize, p: [usize; 3]) -> [[usize; 3]; 4] {
    let (a, b) = ((d + 1) % 3, (d + 2) % 3);
    let mut out = [[0; 3]; 4];
    for (n, (da, db)) in [(1, 1), (0, 1), (1, 0), (0, 0)].into_iter().enumerate() {
        let mut v = p;
        v[a] = if da == 1 { p[a].wrapping_sub(1) } else { p[a] };
        v[b] = if db == 1 { p[b].wrapping_sub(1) } else { p[b] };
        out[n] = v;
    }
    out
}

/// Local coefficient from per-voxel tensors with symmetric parts at least `alpha`.
///
/// Diagonal fields give a diagonal edge operator (each edge averages the matching component
/// over its 4 voxels). Full tensors use `alpha I + P^T (eps_c - alpha I) P`, where `P` maps an
/// edge field to voxel vectors by averaging the 4 parallel voxel edges with weight 1/4, so
/// `||P|| <= 1` and the symmetric part stays above `alpha`.
pub fn multiplication_coefficient(complex: &Arc<GridComplex>, field: &TensorField, alpha: f64) -> Result<Coefficient> {
    let dom = complex.domain();
    if field.shape != dom.shape() {
        return Err(Error::Structural(format!("tensor field shape {:?} differs from domain {:?}", field.shape, dom.shape())));
    }
    if !(alpha > 0.0) {
        return Err(Error::Coercivity(format!("coercivity constant must be positive, got {alpha}")));
    }
    let [nx, ny, nz] = field.shape;
    let mut diagonal = true;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !dom.voxel(i, j, k) {
                    continue;
                }
                let t = field.at(i, j, k);
                let m = sym_min_eig(t);
                if m < alpha - 1e-12 * alpha.max(1.0) {
                    return Err(Error::Coercivity(format!(
                        "voxel ({i},{j},{k}) has symmetric part with eigenvalue {m} below {alpha}"
                    )));
                }
                diagonal &= (0..3).all(|a| (0..3).all(|b| a == b || t[a][b] == 0.0));
            }
        }
    }
    let n1 = complex.n1();
    let sparse = if diagonal {
        let d: Vec<f64> = (0..n1)
            .map(|e| {
                let (dir, p) = complex.edge(e);
                edge_voxels(dir, p).iter().map(|v| field.at(v[0], v[1], v[2])[dir][dir]).sum::<f64>() / 4.0
            })
            .collect();
        linalg::diagonal(&d)
    } else {
        let mut t: Vec<Triplet<usize, usize, f64>> = (0..n1).map(|e| Triplet::new(e, e, alpha)).collect();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if !dom.voxel(i, j, k) {
                        continue;
                    }
                    let c = field.at(i, j, k);
                    let mut local: Vec<(usize, usize)> = Vec::with_capacity(12);
                    for d in 0..3 {
                        let (a, b) = ((d + 1) % 3, (d + 2) % 3);
                        for (oa, ob) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let mut p = [i as isize, j as isize, k as isize];
                            p[a] += oa;
                            p[b] += ob;
                            if let Some(e) = complex.edge_lookup(d, p) {
                                local.push((e, d));
                            }
                        }
                    }
                    for &(e1, d1) in &local {
                        for &(e2, d2) in &local {
                            let v = c[d1][d2] - if d1 == d2 { alpha } else { 0.0 };
                            if v != 0.0 {
                                t.push(Triplet::new(e1, e2, v / 16.0));
                            }
                        }
                    }
                }
            }
        }
        linalg::from_triplets(n1, n1, &t)
    };
    Coefficient::assemble(
        complex.clone(),
        sparse,
        CoefficientKind::Multiplication,
        CoefficientParams::Tensor { alpha, diagonal },
        Some(alpha),
    )
}

/// Fraction of the interval `[s0, s1]` where `frac(s) >= 1/2`.
fn plus_fraction(s0: f64, s1: f64) -> f64 {
    let f = |s: f64| 0.5 * s.floor() + (s - s.floor() - 0.5).max(0.0);
    (f(s1) - f(s0)) / (s1 - s0)
}

/// Voxel laminate of a two-phase medium layered along x with `n` periods over the box
/// length: phase `minus` where `frac(n x / L) < 1/2`, `plus` otherwise. Each voxel carries the
/// exact laminate average of its slab (harmonic across layers, arithmetic along them).
pub fn layered_tensor_field(shape: [usize; 3], minus: f64, plus: f64, n: usize) -> TensorField {
    let nx = shape[0] as f64;
    TensorField::from_fn(shape, |i, _, _| {
        let s0 = n as f64 * i as f64 / nx;
        let s1 = n as f64 * (i + 1) as f64 / nx;
        let theta = plus_fraction(s0, s1);
        let across = 1.0 / (theta / plus + (1.0 - theta) / minus);
        let along = theta * plus + (1.0 - theta) * minus;
        [[across, 0.0, 0.0], [0.0, along, 0.0], [0.0, 0.0, along]]
    })
}

pub fn layered_coefficient(complex: &Arc<GridComplex>, minus: f64, plus: f64, n: usize) -> Result<Coefficient> {
    if !(minus > 0.0 && plus > 0.0) {
        return Err(Error::Coercivity(format!("phase values must be positive, got {minus} and {plus}")));
    }
    let field = layered_tensor_field(complex.domain().shape(), minus, plus, n);
    let mut c = multiplication_coefficient(complex, &field, minus.min(plus))?;
    c.params = CoefficientParams::Layered { minus, plus, n };
    Ok(c)
}

/// Truncated Gaussian kernel `rho(x) = amplitude * exp(-|x|^2 / (2 sigma^2))`, cut to the cube
/// `|x_k| <= cutoff * sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionKernel {
    pub amplitude: f64,
    pub sigma: f64,
    pub cutoff: f64,
}

impl ConvolutionKernel {
    pub fn zero() -> Self {
        ConvolutionKernel { amplitude: 0.0, sigma: 1.0, cutoff: 2.5 }
    }

    /// Kernel with width `sigma_cells * h` whose discrete l1 norm at `n = 1` equals `l1`.
    pub fn gaussian_with_l1(h: f64, sigma_cells: f64, l1: f64) -> Self {
        Self::truncated_gaussian(h, sigma_cells, 2.5, l1)
    }

    /// Gaussian cut off at `cutoff * sigma` (max norm), scaled to discrete l1 norm `l1` at n = 1.
    pub fn truncated_gaussian(h: f64, sigma_cells: f64, cutoff: f64, l1: f64) -> Self {
        let unit = ConvolutionKernel { amplitude: 1.0, sigma: sigma_cells * h, cutoff };
        let base = unit.l1_norm(h, 1);
        ConvolutionKernel { amplitude: l1 / base, ..unit }
    }

    /// Stencil radius in cells for the scaled kernel `rho(n .)`.
    pub fn radius(&self, h: f64, n: usize) -> usize {
        if self.amplitude == 0.0 {
            return 0;
        }
        (self.cutoff * self.sigma / (n as f64 * h) + 1e-9).floor() as usize
    }

    /// Quadrature weight `rho(n h delta) h^3` for a lattice offset.
    pub fn weight(&self, h: f64, n: usize, delta: [isize; 3]) -> f64 {
        let r2: f64 = delta.iter().map(|&d| (n as f64 * d as f64 * h).powi(2)).sum();
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp() * h * h * h
    }

    /// Discrete l1 norm `h^3 sum |rho(n h delta)|` over the stencil.
    pub fn l1_norm(&self, h: f64, n: usize) -> f64 {
        let r = self.radius(h, n) as isize;
        let mut s = 0.0;
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    s += self.weight(h, n, [a, b, c]).abs();
                }
            }
        }
        s
    }
}

/// `id + K_n`, where `K_n` convolves each field component with `rho(n .)` by direct summation
/// over same-direction edges inside the domain.
pub fn convolution_coefficient(complex: &Arc<GridComplex>, kernel: &ConvolutionKernel, n: usize) -> Result<Coefficient> {
    if n == 0 {
        return Err(Error::Structural("scaling index must be positive".into()));
    }
    let h = complex.h();
    let l1 = kernel.l1_norm(h, n);
    if l1 >= 1.0 {
        return Err(Error::Coercivity(format!("kernel l1 norm {l1} is not below 1")));
    }
    let r = kernel.radius(h, n);
    if r > MAX_STENCIL_RADIUS {
        return Err(Error::Structural(format!("kernel stencil radius {r} exceeds {MAX_STENCIL_RADIUS}")));
    }
    let n1 = complex.n1();
    let ri = r as isize;
    let mut weights = Vec::new();
    for a in -ri..=ri {
        for b in -ri..=ri {
            for c in -ri..=ri {
                let w = kernel.weight(h, n, [a, b, c]);
                if w != 0.0 {
                    weights.push(([a, b, c], w));
                }
            }
        }
    }
    let mut t = Vec::with_capacity(n1 * (weights.len() + 1));
    for e in 0..n1 {
        let (d, p) = complex.edge(e);
        let mut diag = 1.0;
        for &(delta, w) in &weights {
            if delta == [0, 0, 0] {
                diag += w;
                continue;
            }
            let q = [p[0] as isize + delta[0], p[1] as isize + delta[1], p[2] as isize + delta[2]];
            if let Some(f) = complex.edge_lookup(d, q) {
                t.push(Triplet::new(f, e, w));
            }
        }
        t.push(Triplet::new(e, e, diag));
    }
    let sparse = linalg::from_triplets(n1, n1, &t);
    let kind = if kernel.amplitude == 0.0 { CoefficientKind::Multiplication } else { CoefficientKind::Convolution };
    Coefficient::assemble(
        complex.clone(),
        sparse,
        kind,
        CoefficientParams::Convolution { n, l1, sigma: kernel.sigma },
        Some(1.0 - l1),
    )
}

/// Sparse non-symmetric coefficient with symmetric part at least `alpha`: diagonal in
/// `[alpha+1, alpha+2]`, symmetric couplings in `[-0.1, 0.1]` and skew couplings in
/// `[-0.5, 0.5]` between neighbouring edges.
pub fn random_coercive(complex: &Arc<GridComplex>, alpha: f64, seed: u64) -> Result<Coefficient> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = complex.n1();
    let mut t = Vec::new();
    for e in 0..n1 {
        t.push(Triplet::new(e, e, alpha + 1.0 + rng.random::<f64>()));
    }
    for e in 0..n1 {
        let (d, p) = complex.edge(e);
        let pi = [p[0] as isize, p[1] as isize, p[2] as isize];
        let mut nbrs = Vec::with_capacity(5);
        for dd in 0..3 {
            let mut q = pi;
            q[dd] += 1;
            nbrs.extend(complex.edge_lookup(d, q));
            if dd != d {
                nbrs.extend(complex.edge_lookup(dd, pi));
            }
        }
        for f in nbrs {
            let s = rng.random_range(-0.1..0.1);
            let k = rng.random_range(-0.5..0.5);
            t.push(Triplet::new(e, f, s + k));
            t.push(Triplet::new(f, e, s - k));
        }
    }
    Coefficient::assemble(
        complex.clone(),
        linalg::from_triplets(n1, n1, &t),
        CoefficientKind::Custom,
        CoefficientParams::RandomCoercive { alpha, seed },
        Some(alpha),
    )
}

/// Invertibility of the coefficient (a1), of its compression to the gradients (a2) and of
/// the compression of its inverse to the curls (a3), with coercivity estimates
/// `alpha = min sym(eps)` and `1/beta = min sym(eps^-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a3_ok: bool,
    pub conds: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    /// `"dense"` for exact condition numbers, `"coercivity-bound"` for bounds from
    /// `alpha` and `||eps||` on large domains.
    pub method: &'static str,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.a1_ok && self.a2_ok && self.a3_ok
    }
}

fn orthonormal_range(a: &Mat<f64>) -> Mat<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Mat::zeros(a.nrows(), 0);
    }
    let svd = a.thin_svd().expect("thin SVD");
    let s = svd.S().column_vector();
    let smax = s[0];
    let r = (0..s.nrows()).filter(|&i| s[i] > 1e-10 * smax).count();
    svd.U().subcols(0, r).to_owned()
}

fn sym_min(m: &Mat<f64>) -> f64 {
    let s = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    s.self_adjoint_eigenvalues(Side::Lower).map(|e| e[0]).unwrap_or(f64::NAN)
}

pub fn admissibility_check(eps: &Coefficient, cap: f64) -> AdmissibilityReport {
    let complex = eps.complex();
    if complex.n1() <= DENSE_LIMIT {
        return dense_admissibility(eps, cap);
    }
    let n = eps.dim();
    let (smin, _) = lanczos_extremes(n, 120, |v| (eps.apply(v) + eps.apply_transpose(v)) * 0.5);
    let (_, gmax) = lanczos_extremes(n, 60, |v| eps.apply_transpose(&eps.apply(v)));
    let norm = gmax.max(0.0).sqrt();
    if smin > 0.0 {
        // coercive: every compression has symmetric part >= smin (or smin/||eps||^2 for the
        // inverse) and norm <= ||eps|| (or 1/smin)
        let c1 = norm / smin;
        let c3 = (1.0 / smin) / (smin / (norm * norm));
        let beta = if eps.is_symmetric() { norm } else { norm * norm / smin };
        return AdmissibilityReport {
            a1_ok: c1 < cap,
            a2_ok: c1 < cap,
            a3_ok: c3 < cap,
            conds: [c1, c1, c3],
            alpha: smin,
            beta,
            method: "coercivity-bound",
        };
    }
    AdmissibilityReport {
        a1_ok: false,
        a2_ok: false,
        a3_ok: false,
        conds: [f64::NAN; 3],
        alpha: smin,
        beta: f64::NAN,
        method: "coercivity-bound",
    }
}

fn dense_admissibility(eps: &Coefficient, cap: f64) -> AdmissibilityReport {
    let complex = eps.complex();
    let e = eps.to_dense();
    let c1 = condition_number(&e);
    let q0 = orthonormal_range(&complex.g().to_dense());
    let c2 = condition_number(&(q0.transpose() * &e * &q0));
    let alpha = sym_min(&e);
    let (c3, beta) = if c1 < cap {
        let inv = match Solver::dense(&e) {
            Ok(s) => s.solve_mat(&Mat::identity(e.nrows(), e.nrows())),
            Err(_) => Mat::from_fn(e.nrows(), e.nrows(), |_, _| f64::NAN),
        };
        let q1 = orthonormal_range(&complex.ccirc().to_dense().transpose().to_owned());
        let c3 = condition_number(&(q1.transpose() * &inv * &q1));
        (c3, 1.0 / sym_min(&inv))
    } else {
        (f64::INFINITY, f64::NAN)
    };
    AdmissibilityReport {
        a1_ok: c1 < cap,
        a2_ok: c2 < cap,
        a3_ok: c3 < cap,
        conds: [c1, c2, c3],
        alpha,
        beta,
        method: "dense",
    }
}

/// Wraps a dense matrix on H as a custom coefficient.
pub fn dense_coefficient(complex: &Arc<GridComplex>, m: Mat<f64>, label: &str) -> Result<Coefficient> {
    let hs = complex.field_space().clone();
    let op = LinearMap::new(hs.clone(), hs, Matrix::Dense(m))?;
    Coefficient::from_operator(complex, &op, label)
}
