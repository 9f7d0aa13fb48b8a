//! Generalized Helmholtz decomposition, harmonic projections and the two electrostatics
//! formulations on a grid complex.
//!
//! All spaces carry the uniform mass `h^3`, so `div = G^T` and `curl = Ccirc^T`. The curl part
//! of a field is kept as `w = eps^-1 curl v` and found without inverting `eps`: `w` is the unique
//! field with `Ccirc w = g` and `eps w` orthogonal to `ker Ccirc = ran G + H_D`.

use std::sync::Arc;

use faer::{Col, Mat};

use crate::coeff::Coefficient;
use crate::derham::{GridComplex, HarmonicBasis, HarmonicKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Solver, SpMat};
use crate::operator::{Subspace, DEFAULT_RANK_TOL};

/// Per-coefficient factorizations, cached on the coefficient.
pub struct Factorizations {
    a: SpMat,
    a_solver: Arc<Solver>,
    z: Mat<f64>,
    /// `G^T eps Z`
    gez: Mat<f64>,
    /// `G^T eps^T Z`, so that `Z^T eps G = gtez^T`
    gtez: Mat<f64>,
    /// `A^-1 G^T eps Z`
    w: Mat<f64>,
    schur: Option<Solver>,
}

impl std::fmt::Debug for Factorizations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Factorizations(A {:?}, harmonic {})", self.a_solver, self.z.ncols())
    }
}

impl Factorizations {
    fn build(eps: &Coefficient) -> Result<Self> {
        let c = eps.complex();
        let g = c.g_csc();
        let a = linalg::matmul(&linalg::transpose(g), &linalg::matmul(eps.matrix(), g));
        let a_solver = Arc::new(Solver::new(&a).map_err(|e| {
            Error::Admissibility(format!("compression to the gradients is not invertible: {e}"))
        })?);
        let z = c.harmonic_dirichlet()?.basis.basis().clone();
        let k = z.ncols();
        let mut ez = Mat::<f64>::zeros(z.nrows(), k);
        let mut etz = Mat::<f64>::zeros(z.nrows(), k);
        for j in 0..k {
            let col = z.col(j).to_owned();
            ez.col_mut(j).copy_from(&eps.apply(&col));
            etz.col_mut(j).copy_from(&eps.apply_transpose(&col));
        }
        let mut gez = Mat::<f64>::zeros(c.n0(), k);
        let mut gtez = Mat::<f64>::zeros(c.n0(), k);
        for j in 0..k {
            gez.col_mut(j).copy_from(&linalg::spmv_t(g, &ez.col(j).to_owned()));
            gtez.col_mut(j).copy_from(&linalg::spmv_t(g, &etz.col(j).to_owned()));
        }
        let w = a_solver.solve_mat(&gez);
        let schur = if k > 0 {
            let s = z.transpose() * &ez - gtez.transpose() * &w;
            Some(Solver::dense(&s).map_err(|e| {
                Error::Admissibility(format!("compression to the curl-free fields is not invertible: {e}"))
            })?)
        } else {
            None
        };
        Ok(Factorizations { a, a_solver, z, gez, gtez, w, schur })
    }

    pub fn harmonic_dim(&self) -> usize {
        self.z.ncols()
    }

    /// `A^-1 r` with up to two steps of iterative refinement.
    pub fn solve_a(&self, r: &Col<f64>) -> Col<f64> {
        let mut u = self.a_solver.solve(r);
        let rn = r.norm_l2();
        for _ in 0..2 {
            let res = r - linalg::spmv(&self.a, &u);
            if res.norm_l2() <= 1e-13 * rn {
                break;
            }
            u += self.a_solver.solve(&res);
        }
        u
    }

    pub fn solve_a_transpose(&self, r: &Col<f64>) -> Col<f64> {
        self.a_solver.solve_transpose(r)
    }

    /// Solves `[G Z]^T eps [G Z] (a, c) = (r0, r1)`.
    pub fn bordered_solve(&self, r0: &Col<f64>, r1: &Col<f64>) -> (Col<f64>, Col<f64>) {
        let Some(s) = &self.schur else {
            return (self.solve_a(r0), Col::zeros(0));
        };
        let y = self.solve_a(r0);
        let c = s.solve(&(r1 - self.gtez.transpose() * &y));
        let a = &y - &self.w * &c;
        (a, c)
    }

    pub fn harmonic(&self) -> &Mat<f64> {
        &self.z
    }

    pub fn gez(&self) -> &Mat<f64> {
        &self.gez
    }
}

pub fn factorizations(eps: &Coefficient) -> Result<Arc<Factorizations>> {
    if let Some(f) = eps.field_cache.get() {
        return f.clone().map_err(Error::Admissibility);
    }
    let built = Factorizations::build(eps);
    let stored = eps
        .field_cache
        .get_or_init(|| built.map(Arc::new).map_err(|e| e.to_string()))
        .clone();
    stored.map_err(Error::Admissibility)
}

fn mass_norm(c: &GridComplex, v: &Col<f64>) -> f64 {
    (c.h().powi(3)).sqrt() * v.norm_l2()
}

/// Potential `u` with `div eps G u = f`.
pub fn reduced_solve_grad(eps: &Coefficient, f: &Col<f64>) -> Result<Col<f64>> {
    let c = eps.complex();
    if f.nrows() != c.n0() {
        return Err(Error::Structural(format!("potential data has length {}, expected {}", f.nrows(), c.n0())));
    }
    let fac = factorizations(eps)?;
    let u = fac.solve_a(f);
    let res = (f - linalg::spmv(&fac.a, &u)).norm_l2();
    if res > 1e-10 * f.norm_l2() {
        return Err(Error::Solve(format!("gradient solve residual {:.2e}", res / f.norm_l2())));
    }
    Ok(u)
}

/// The field `w = eps^-1 curl v` with `Ccirc w = g` and `eps w` orthogonal to `ker Ccirc`.
pub fn curl_field(eps: &Coefficient, g: &Col<f64>) -> Result<Col<f64>> {
    curl_field_checked(eps, g, true)
}

// Without the range check, `g` is replaced by its projection onto ran(Ccirc); decompositions use
// this since the curl of a curl-free field is pure rounding noise.
fn curl_field_checked(eps: &Coefficient, g: &Col<f64>, check: bool) -> Result<Col<f64>> {
    let c = eps.complex();
    if g.nrows() != c.n2() {
        return Err(Error::Structural(format!("curl data has length {}, expected {}", g.nrows(), c.n2())));
    }
    let gn = g.norm_l2();
    if gn == 0.0 {
        return Ok(Col::zeros(c.n1()));
    }
    let cc = c.ccirc_csc();
    let w0 = c.hodge_solve(&linalg::spmv_t(cc, g))?;
    let miss = (linalg::spmv(cc, &w0) - g).norm_l2();
    if check && miss > 1e-10 * gn {
        return Err(Error::Data(format!("curl data is not in the range of the curl (relative defect {:.2e})", miss / gn)));
    }
    let fac = factorizations(eps)?;
    let ew0 = eps.apply(&w0);
    let r0 = -linalg::spmv_t(c.g_csc(), &ew0);
    let r1 = -(fac.z.transpose() * &ew0);
    let (a, cz) = fac.bordered_solve(&r0, &r1);
    let mut w = w0 + linalg::spmv(c.g_csc(), &a);
    if cz.nrows() > 0 {
        w += &fac.z * &cz;
    }
    Ok(w)
}

/// Reduced curl potential `v` in `ran(Ccirc)` with `Ccirc eps^-1 curl v = g`.
pub fn reduced_solve_curl(eps: &Coefficient, g: &Col<f64>) -> Result<Col<f64>> {
    let w = curl_field(eps, g)?;
    curl_potential(eps, &w)
}

/// The `v` in `ran(Ccirc)` with `curl v = eps w`, for `eps w` orthogonal to `ker Ccirc`.
fn curl_potential(eps: &Coefficient, w: &Col<f64>) -> Result<Col<f64>> {
    let c = eps.complex();
    if w.norm_l2() == 0.0 {
        return Ok(Col::zeros(c.n2()));
    }
    let phi = c.hodge_solve(&eps.apply(w))?;
    Ok(linalg::spmv(c.ccirc_csc(), &phi))
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// `u` in X0
    pub potential: Col<f64>,
    /// `v` in ran(Ccirc) with `curl v = eps w`
    pub curl: Col<f64>,
    /// `w = eps^-1 curl v`
    pub curl_field: Col<f64>,
    /// the eps-harmonic remainder
    pub harmonic: Col<f64>,
}

impl Decomposition {
    pub fn reassemble(&self, complex: &GridComplex) -> Col<f64> {
        linalg::spmv(complex.g_csc(), &self.potential) + &self.curl_field + &self.harmonic
    }
}

/// `E = G u + eps^-1 curl v + x_eps`.
pub fn helmholtz_decompose(e: &Col<f64>, eps: &Coefficient) -> Result<Decomposition> {
    let c = eps.complex();
    if e.nrows() != c.n1() {
        return Err(Error::Structural(format!("field has length {}, expected {}", e.nrows(), c.n1())));
    }
    let fac = factorizations(eps)?;
    let potential = fac.solve_a(&linalg::spmv_t(c.g_csc(), &eps.apply(e)));
    let curl_field = curl_field_checked(eps, &linalg::spmv(c.ccirc_csc(), e), false)?;
    let harmonic = e - linalg::spmv(c.g_csc(), &potential) - &curl_field;
    let curl = curl_potential(eps, &curl_field)?;
    Ok(Decomposition { potential, curl, curl_field, harmonic })
}

/// `pi_D`, `pi_eps` or `pi^eps` applied to `e`.
pub fn project_harmonic(e: &Col<f64>, eps: &Coefficient, which: HarmonicKind) -> Result<Col<f64>> {
    let c = eps.complex();
    match which {
        HarmonicKind::Dirichlet => {
            let z = c.harmonic_dirichlet()?.basis;
            Ok(z.embed(&z.coordinates(e)))
        }
        HarmonicKind::Eps => Ok(helmholtz_decompose(e, eps)?.harmonic),
        HarmonicKind::EpsDual => {
            let fac = factorizations(eps)?;
            let u = fac.solve_a(&linalg::spmv_t(c.g_csc(), e));
            let einv = eps.solve(e)?;
            let w = curl_field_checked(eps, &linalg::spmv(c.ccirc_csc(), &einv), false)?;
            Ok(e - eps.apply(&linalg::spmv(c.g_csc(), &u)) - eps.apply(&w))
        }
    }
}

/// `x - G (div eps G)^-1 div eps x`: the eps-harmonic field with Dirichlet part `x`.
pub fn eps_harmonic_from_dirichlet(eps: &Coefficient, x: &Col<f64>) -> Result<Col<f64>> {
    let c = eps.complex();
    let fac = factorizations(eps)?;
    let u = fac.solve_a(&linalg::spmv_t(c.g_csc(), &eps.apply(x)));
    Ok(x - linalg::spmv(c.g_csc(), &u))
}

/// Mass-orthonormal basis of one of the three harmonic spaces.
pub fn harmonic_basis(eps: &Coefficient, kind: HarmonicKind) -> Result<HarmonicBasis> {
    let c = eps.complex();
    let z = c.harmonic_dirichlet()?.basis;
    if kind == HarmonicKind::Dirichlet {
        return Ok(HarmonicBasis { kind, basis: z });
    }
    let mut cols = Mat::<f64>::zeros(c.n1(), z.dim());
    for j in 0..z.dim() {
        let x = eps_harmonic_from_dirichlet(eps, &z.basis().col(j).to_owned())?;
        let x = if kind == HarmonicKind::EpsDual { eps.apply(&x) } else { x };
        cols.col_mut(j).copy_from(&x);
    }
    Ok(HarmonicBasis { kind, basis: Subspace::from_spanning(c.field_space().clone(), &cols, DEFAULT_RANK_TOL)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// `div eps E = f`, `Ccirc E = g`, `pi_eps E = x` with `x` eps-harmonic
    Primal,
    /// `div H = f`, `Ccirc eps^-1 H = g`, `pi^eps H = x` with `x` in `eps H_eps`
    Dual,
    /// as `Primal` but with the normalization `pi_D pi_eps E = x` for `x` in H_D
    PiDNormalized,
}

#[derive(Debug, Clone)]
pub struct ElectrostaticData {
    pub f: Col<f64>,
    pub g: Col<f64>,
    pub x: Col<f64>,
    pub formulation: Formulation,
}

impl ElectrostaticData {
    pub fn zero(complex: &GridComplex, formulation: Formulation) -> Self {
        ElectrostaticData {
            f: Col::zeros(complex.n0()),
            g: Col::zeros(complex.n2()),
            x: Col::zeros(complex.n1()),
            formulation,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Residuals {
    pub div: f64,
    pub curl: f64,
    pub harmonic: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.div.max(self.curl).max(self.harmonic)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: Col<f64>,
    pub potential_part: Col<f64>,
    /// reduced curl potential `v` in ran(Ccirc)
    pub curl_part: Col<f64>,
    /// the field contribution of `v`: `eps^-1 curl v` (primal) or `curl v` (dual)
    pub curl_field: Col<f64>,
    pub harmonic_part: Col<f64>,
    pub residuals: Residuals,
}

fn rel(defect: f64, scale: f64) -> f64 {
    if defect == 0.0 {
        0.0
    } else {
        defect / scale.max(f64::MIN_POSITIVE)
    }
}

fn check_lengths(c: &GridComplex, d: &ElectrostaticData) -> Result<()> {
    if d.f.nrows() != c.n0() || d.g.nrows() != c.n2() || d.x.nrows() != c.n1() {
        return Err(Error::Data(format!(
            "data lengths ({}, {}, {}) do not match the complex ({}, {}, {})",
            d.f.nrows(),
            d.g.nrows(),
            d.x.nrows(),
            c.n0(),
            c.n2(),
            c.n1()
        )));
    }
    Ok(())
}

/// Verifies that the harmonic datum lies in the space its formulation declares.
fn check_harmonic_datum(eps: &Coefficient, d: &ElectrostaticData) -> Result<()> {
    let c = eps.complex();
    let xn = mass_norm(c, &d.x);
    if xn == 0.0 {
        return Ok(());
    }
    let h = c.h();
    let (a, b) = match d.formulation {
        Formulation::Primal => (
            mass_norm(c, &linalg::spmv_t(c.g_csc(), &eps.apply(&d.x))),
            mass_norm(c, &linalg::spmv(c.ccirc_csc(), &d.x)),
        ),
        Formulation::Dual => (
            mass_norm(c, &linalg::spmv_t(c.g_csc(), &d.x)),
            mass_norm(c, &linalg::spmv(c.ccirc_csc(), &eps.solve(&d.x)?)),
        ),
        Formulation::PiDNormalized => {
            let p = project_harmonic(&d.x, eps, HarmonicKind::Dirichlet)?;
            (mass_norm(c, &(&d.x - p)) / h, 0.0)
        }
    };
    if a.max(b) * h > 1e-9 * xn {
        return Err(Error::Data(format!("harmonic datum is not in the declared space (defect {:.2e})", a.max(b) * h / xn)));
    }
    Ok(())
}

/// Solves the electrostatics problem in the requested formulation.
pub fn solve_electrostatics(eps: &Coefficient, data: &ElectrostaticData) -> Result<SolveResult> {
    let c = eps.complex();
    check_lengths(c, data)?;
    check_harmonic_datum(eps, data)?;
    let h = c.h();
    let gm = c.g_csc();
    let cm = c.ccirc_csc();
    let u = reduced_solve_grad(eps, &data.f)?;
    let w = curl_field(eps, &data.g)?;
    let v = curl_potential(eps, &w)?;
    let gu = linalg::spmv(gm, &u);
    match data.formulation {
        Formulation::Primal | Formulation::PiDNormalized => {
            let x_eps = if data.formulation == Formulation::Primal {
                data.x.clone()
            } else {
                eps_harmonic_from_dirichlet(eps, &data.x)?
            };
            let field = &gu + &w + &x_eps;
            let ef = eps.apply(&field);
            let div = rel(
                mass_norm(c, &(linalg::spmv_t(gm, &ef) - &data.f)),
                mass_norm(c, &data.f) + mass_norm(c, &ef) / h,
            );
            let curl = rel(
                mass_norm(c, &(linalg::spmv(cm, &field) - &data.g)),
                mass_norm(c, &data.g) + mass_norm(c, &field) / h,
            );
            let pe = project_harmonic(&field, eps, HarmonicKind::Eps)?;
            let harmonic = if data.formulation == Formulation::Primal {
                rel(mass_norm(c, &(&pe - &data.x)), mass_norm(c, &data.x) + mass_norm(c, &field))
            } else {
                let pd = project_harmonic(&pe, eps, HarmonicKind::Dirichlet)?;
                rel(mass_norm(c, &(&pd - &data.x)), mass_norm(c, &data.x) + mass_norm(c, &field))
            };
            Ok(SolveResult {
                field,
                potential_part: u,
                curl_part: v,
                curl_field: w,
                harmonic_part: x_eps,
                residuals: Residuals { div, curl, harmonic },
            })
        }
        Formulation::Dual => {
            let cv = linalg::spmv_t(cm, &v);
            let field = eps.apply(&gu) + &cv + &data.x;
            let div = rel(
                mass_norm(c, &(linalg::spmv_t(gm, &field) - &data.f)),
                mass_norm(c, &data.f) + mass_norm(c, &field) / h,
            );
            let einv = eps.solve(&field)?;
            let curl = rel(
                mass_norm(c, &(linalg::spmv(cm, &einv) - &data.g)),
                mass_norm(c, &data.g) + mass_norm(c, &einv) / h,
            );
            let pd = project_harmonic(&field, eps, HarmonicKind::EpsDual)?;
            let harmonic = rel(mass_norm(c, &(&pd - &data.x)), mass_norm(c, &data.x) + mass_norm(c, &field));
            Ok(SolveResult {
                field,
                potential_part: u,
                curl_part: v,
                curl_field: cv,
                harmonic_part: data.x.clone(),
                residuals: Residuals { div, curl, harmonic },
            })
        }
    }
}

/// Dual norm `sqrt(<f, (div G)^-1 f>)` on X0.
pub fn hminus_norm(complex: &GridComplex, f: &Col<f64>) -> Result<f64> {
    if f.norm_l2() == 0.0 {
        return Ok(0.0);
    }
    let s = complex.laplacian_solver()?;
    let q = linalg::dot(f, &s.solve(f));
    Ok((complex.h().powi(3) * q.max(0.0)).sqrt())
}

/// Residuals of `pi_eps pi_D = id` on H_eps and `pi_D pi_eps = id` on H_D, over basis vectors.
pub fn bijection_residuals(eps: &Coefficient) -> Result<(f64, f64)> {
    let c = eps.complex();
    let z = c.harmonic_dirichlet()?.basis;
    let he = harmonic_basis(eps, HarmonicKind::Eps)?.basis;
    let mut r = (0.0f64, 0.0f64);
    for j in 0..he.dim() {
        let x = he.basis().col(j).to_owned();
        let back = project_harmonic(&project_harmonic(&x, eps, HarmonicKind::Dirichlet)?, eps, HarmonicKind::Eps)?;
        r.0 = r.0.max(mass_norm(c, &(back - &x)) / mass_norm(c, &x));
    }
    for j in 0..z.dim() {
        let x = z.basis().col(j).to_owned();
        let back = project_harmonic(&project_harmonic(&x, eps, HarmonicKind::Eps)?, eps, HarmonicKind::Dirichlet)?;
        r.1 = r.1.max(mass_norm(c, &(back - &x)) / mass_norm(c, &x));
    }
    Ok(r)
}

/// `pi_eps pi_D E` against `(1 - G (div eps G)^-1 div eps) pi_D E`, relative to `||E||`.
pub fn reform_identity_residual(eps: &Coefficient, e: &Col<f64>) -> Result<f64> {
    let c = eps.complex();
    let pd = project_harmonic(e, eps, HarmonicKind::Dirichlet)?;
    let lhs = project_harmonic(&pd, eps, HarmonicKind::Eps)?;
    let rhs = eps_harmonic_from_dirichlet(eps, &pd)?;
    Ok(rel(mass_norm(c, &(lhs - rhs)), mass_norm(c, e)))
}

/// The two block identities tying the gradient solve to the Schur maps of `eps` for the split
/// `ran(G) + ker(div)`:
/// `G (div eps G)^-1 div eps = i0 i0* + i0 eps00^-1 eps01 i1*` and
/// `eps (1 - G (div eps G)^-1 div eps) = i1 (eps11 - eps10 eps00^-1 eps01) i1*`.
pub fn block_identity_residuals(eps: &Coefficient, v: &Col<f64>) -> Result<(f64, f64)> {
    use crate::schur_grid::{GridSchurMaps, GridSplit, SchurMap};
    let c = eps.complex();
    let fac = factorizations(eps)?;
    let maps = GridSchurMaps::new(eps, GridSplit::Gradients)?;
    let ev = eps.apply(v);
    let oblique = linalg::spmv(c.g_csc(), &fac.solve_a(&linalg::spmv_t(c.g_csc(), &ev)));
    let p0 = maps.project_h0(v)?;
    let rhs_c = &p0 + maps.apply(SchurMap::Right, v)?;
    let lhs_d = &ev - eps.apply(&oblique);
    let rhs_d = maps.apply(SchurMap::Schur, v)?;
    let scale = mass_norm(c, v);
    Ok((rel(mass_norm(c, &(oblique - rhs_c)), scale), rel(mass_norm(c, &(lhs_d - rhs_d)), scale)))
}
