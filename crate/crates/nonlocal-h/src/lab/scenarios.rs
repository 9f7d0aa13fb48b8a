use std::sync::Arc;

use faer::Col;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{workers, DataKind, Family, ScenarioConfig, Seeds};
use super::report::{non_increasing_tail, Status, Table, Verdict};
use crate::block_schur::TestFamily;
use crate::coeff::{
    convolution_coefficient, layered_coefficient, multiplication_coefficient, Coefficient, ConvolutionKernel,
    TensorField,
};
use crate::derham::{GridComplex, VoxelDomain};
use crate::electro::{hminus_norm, solve_electrostatics, ElectrostaticData, Formulation, SolveResult};
use crate::error::{Error, Result};
use crate::linalg;
use crate::schur_grid::{field_test_family, grid_schur_pairings, GridSplit};

/// The CSV columns of a homogenisation report.
pub const COLUMNS: [&str; 9] =
    ["n", "d_schur", "energy", "energy_gap", "e_weak_max", "flux_weak_max", "res_div", "res_curl", "res_harm"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayeredParams {
    pub minus: f64,
    pub plus: f64,
}

/// Equal-volume laminate limit: harmonic mean across the layers, arithmetic along them.
pub fn homogenised_tensor(p: LayeredParams) -> [f64; 3] {
    let across = 2.0 / (1.0 / p.minus + 1.0 / p.plus);
    let along = 0.5 * (p.minus + p.plus);
    [across, along, along]
}

/// The layered medium with `n` periods along x. Indices beyond a third of the grid size are
/// rejected, since the period would then span fewer than 3 cells.
pub fn layered_sequence(complex: &Arc<GridComplex>, p: LayeredParams, n: usize) -> Result<Coefficient> {
    let cells = complex.domain().shape()[0];
    if 3 * n > cells {
        return Err(Error::Config(format!("index {n} exceeds a third of the grid size {cells}")));
    }
    layered_coefficient(complex, p.minus, p.plus, n)
}

pub fn homogenised_limit(complex: &Arc<GridComplex>, p: LayeredParams) -> Result<Coefficient> {
    let t = homogenised_tensor(p);
    multiplication_coefficient(complex, &TensorField::diagonal(complex.domain().shape(), t), t[0].min(t[1]))
}

/// A coefficient family indexed by `n` with its candidate limit.
#[derive(Debug, Clone)]
pub enum SequenceFamily {
    Layered(LayeredParams),
    Convolution { l1: f64, sigma_cells: f64, cutoff: f64 },
    Constant(f64),
    Custom(TensorField),
}

impl SequenceFamily {
    pub fn from_config(cfg: &ScenarioConfig, complex: &GridComplex) -> Result<Self> {
        Ok(match cfg.family {
            Family::Layered => SequenceFamily::Layered(LayeredParams { minus: cfg.minus, plus: cfg.plus }),
            Family::Convolution => {
                SequenceFamily::Convolution { l1: cfg.l1, sigma_cells: cfg.sigma_cells, cutoff: cfg.cutoff }
            }
            Family::Constant => SequenceFamily::Constant(cfg.value),
            Family::Custom => {
                let path = cfg.tensor_file.as_ref().ok_or_else(|| Error::Config("custom family needs tensor_file".into()))?;
                let text = std::fs::read_to_string(path)?;
                SequenceFamily::Custom(TensorField::from_json(&text, complex.domain().shape())?)
            }
            Family::Interleaved => {
                return Err(Error::Config("the interleaved family is only used by the incomparable demo".into()))
            }
        })
    }

    pub fn member(&self, complex: &Arc<GridComplex>, n: usize) -> Result<Coefficient> {
        match self {
            SequenceFamily::Layered(p) => layered_sequence(complex, *p, n),
            SequenceFamily::Convolution { l1, sigma_cells, cutoff } => {
                let k = ConvolutionKernel::truncated_gaussian(complex.h(), *sigma_cells, *cutoff, *l1);
                convolution_coefficient(complex, &k, n)
            }
            _ => self.limit(complex),
        }
    }

    pub fn limit(&self, complex: &Arc<GridComplex>) -> Result<Coefficient> {
        let shape = complex.domain().shape();
        match self {
            SequenceFamily::Layered(p) => homogenised_limit(complex, *p),
            SequenceFamily::Convolution { .. } => Coefficient::identity(complex),
            SequenceFamily::Constant(v) => multiplication_coefficient(complex, &TensorField::diagonal(shape, [*v; 3]), *v),
            SequenceFamily::Custom(field) => {
                let alpha = field
                    .values
                    .iter()
                    .map(|t| {
                        let s = faer::Mat::from_fn(3, 3, |i, j| 0.5 * (t[i][j] + t[j][i]));
                        s.self_adjoint_eigenvalues(faer::Side::Lower).map(|e| e[0]).unwrap_or(f64::NAN)
                    })
                    .fold(f64::INFINITY, f64::min);
                multiplication_coefficient(complex, field, alpha)
            }
        }
    }
}

fn box_sines(complex: &GridComplex, x: [f64; 3], k: [usize; 3]) -> f64 {
    let shape = complex.domain().shape();
    let h = complex.h();
    (0..3).map(|a| (k[a] as f64 * std::f64::consts::PI * x[a] / (shape[a] as f64 * h)).sin()).product()
}

const LOW_MODES: [[usize; 3]; 8] =
    [[1, 1, 1], [2, 1, 1], [1, 2, 1], [1, 1, 2], [2, 2, 1], [2, 1, 2], [1, 2, 2], [2, 2, 2]];

/// Fixed smooth data: `f` a random combination of low sine modes on the nodes, `g` the curl of
/// a smooth random edge field and `x` a random harmonic Dirichlet field.
pub fn scenario_data(complex: &GridComplex, seeds: Seeds, kind: DataKind) -> Result<ElectrostaticData> {
    let mut rf = ChaCha8Rng::seed_from_u64(seeds.f);
    let a: Vec<f64> = LOW_MODES.iter().map(|_| rf.random_range(-1.0..1.0)).collect();
    let f = Col::from_fn(complex.n0(), |i| {
        let x = complex.node_position(i);
        LOW_MODES.iter().zip(&a).map(|(k, c)| c * box_sines(complex, x, *k)).sum()
    });
    let mut data = ElectrostaticData::zero(complex, Formulation::PiDNormalized);
    data.f = f;
    if kind == DataKind::Potential {
        return Ok(data);
    }
    let mut rg = ChaCha8Rng::seed_from_u64(seeds.g);
    let b: Vec<[f64; 3]> = LOW_MODES.iter().map(|_| [(); 3].map(|_| rg.random_range(-1.0..1.0))).collect();
    let s = Col::from_fn(complex.n1(), |e| {
        let (d, x) = complex.edge_midpoint(e);
        LOW_MODES.iter().zip(&b).map(|(k, c)| c[d] * box_sines(complex, x, *k)).sum()
    });
    data.g = linalg::spmv(complex.ccirc_csc(), &s);
    let z = complex.harmonic_dirichlet()?.basis;
    let mut rx = ChaCha8Rng::seed_from_u64(seeds.x);
    let c = Col::from_fn(z.dim(), |_| rx.random_range(-1.0..1.0));
    data.x = z.embed(&c);
    Ok(data)
}

/// Runs `f` on every item with up to `workers` threads; results keep the input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// One solved member of a coefficient sequence.
#[derive(Debug, Clone)]
pub struct Member {
    pub n: usize,
    pub field: Col<f64>,
    pub flux: Col<f64>,
    pub coercivity: f64,
    pub pairings_by_split: Vec<(GridSplit, crate::block_schur::SchurPairings)>,
    pub residuals: crate::electro::Residuals,
}

/// All solves of a homogenisation scenario, from which reports for either split are built.
#[derive(Debug, Clone)]
pub struct HomogenisationRun {
    pub complex: Arc<GridComplex>,
    pub members: Vec<Member>,
    pub limit_field: Col<f64>,
    pub limit_flux: Col<f64>,
    pub limit_pairings: Vec<(GridSplit, crate::block_schur::SchurPairings)>,
    pub family: TestFamily,
    pub data: ElectrostaticData,
    pub tolerance: f64,
    pub flux_tolerance: f64,
}

fn solve_member(
    eps: &Coefficient,
    data: &ElectrostaticData,
    splits: &[GridSplit],
    family: &TestFamily,
) -> Result<(SolveResult, Vec<(GridSplit, crate::block_schur::SchurPairings)>)> {
    let r = solve_electrostatics(eps, data)?;
    let mut p = Vec::new();
    for &s in splits {
        p.push((s, grid_schur_pairings(eps, s, family)?));
    }
    Ok((r, p))
}

/// Solves the problem for every index of the family and for its limit.
pub fn run_sequence(
    complex: &Arc<GridComplex>,
    family: &SequenceFamily,
    indices: &[usize],
    data: ElectrostaticData,
    tests: TestFamily,
    splits: &[GridSplit],
    tolerance: f64,
    flux_tolerance: f64,
) -> Result<HomogenisationRun> {
    let limit = family.limit(complex)?;
    let (lim, limit_pairings) = solve_member(&limit, &data, splits, &tests)?;
    let limit_flux = limit.apply(&lim.field);
    let results = par_map(indices, workers(), |&n| -> Result<Member> {
        let eps = family.member(complex, n)?;
        let (r, p) = solve_member(&eps, &data, splits, &tests)?;
        Ok(Member {
            n,
            flux: eps.apply(&r.field),
            field: r.field,
            coercivity: eps.lower_bound().unwrap_or(f64::NAN),
            pairings_by_split: p,
            residuals: r.residuals,
        })
    });
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HomogenisationRun {
        complex: complex.clone(),
        members,
        limit_field: lim.field,
        limit_flux,
        limit_pairings,
        family: tests,
        data,
        tolerance,
        flux_tolerance,
    })
}

impl HomogenisationRun {
    fn inner(&self, a: &Col<f64>, b: &Col<f64>) -> f64 {
        self.complex.h().powi(3) * linalg::dot(a, b)
    }

    pub fn limit_energy(&self) -> f64 {
        self.inner(&self.limit_flux, &self.limit_field)
    }

    /// The report for one split; verdicts come from the rows.
    pub fn report(&self, split: GridSplit) -> Result<Table> {
        let mut t = Table::new(COLUMNS.to_vec());
        let e_lim = self.limit_energy();
        let norm_e = self.inner(&self.limit_field, &self.limit_field).sqrt();
        let norm_flux = self.inner(&self.limit_flux, &self.limit_flux).sqrt();
        let lp = &self.limit_pairings.iter().find(|p| p.0 == split).ok_or_else(|| Error::Config("split not computed".into()))?.1;
        let tv = self.family.vectors();
        let w = self.complex.h().powi(3);
        for m in &self.members {
            let p = &m.pairings_by_split.iter().find(|p| p.0 == split).expect("split computed").1;
            let d_schur = p.distance(lp, self.family.weights());
            let energy = self.inner(&m.flux, &m.field);
            let de = tv.transpose() * (&m.field - &self.limit_field) * w;
            let df = tv.transpose() * (&m.flux - &self.limit_flux) * w;
            let max_abs = |c: &Col<f64>| c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            t.rows.push(vec![
                m.n as f64,
                d_schur,
                energy,
                (energy - e_lim).abs() / e_lim.abs().max(f64::MIN_POSITIVE),
                max_abs(&de) / norm_e.max(f64::MIN_POSITIVE),
                max_abs(&df) / norm_flux.max(f64::MIN_POSITIVE),
                m.residuals.div,
                m.residuals.curl,
                m.residuals.harmonic,
            ]);
        }
        let gap = t.column("energy_gap");
        let flux = t.column("flux_weak_max");
        let ew = t.column("e_weak_max");
        let ds = t.column("d_schur");
        let slack = 1e-9;
        t.note("split", split.name());
        t.note("limit_energy", format!("{e_lim:.9e}"));
        t.note("tolerance_energy_gap", self.tolerance);
        t.note("tolerance_flux_weak", self.flux_tolerance);
        t.note("hminus_f", format!("{:.9e}", hminus_norm(&self.complex, &self.data.f)?));
        t.note("trend_window", "last three indices");
        let last = |v: &[f64]| *v.last().unwrap_or(&f64::NAN);
        t.verdicts.push(Verdict::new("energy_gap_trend", Status::from_bool(non_increasing_tail(&gap, slack))));
        t.verdicts.push(Verdict::new("energy_gap_final", Status::from_bool(last(&gap) <= self.tolerance)));
        t.verdicts.push(Verdict::new("e_weak_trend", Status::from_bool(non_increasing_tail(&ew, slack))));
        t.verdicts.push(Verdict::new("flux_weak_trend", Status::from_bool(non_increasing_tail(&flux, slack))));
        t.verdicts.push(Verdict::new("flux_weak_final", Status::from_bool(last(&flux) <= self.flux_tolerance)));
        t.verdicts.push(Verdict::new("schur_trend", Status::from_bool(non_increasing_tail(&ds, slack))));
        Ok(t)
    }
}

pub fn load_complex(domain: &str) -> Result<Arc<GridComplex>> {
    GridComplex::build(VoxelDomain::load(domain)?)
}

pub fn run_homogenisation_with_splits(cfg: &ScenarioConfig, splits: &[GridSplit]) -> Result<HomogenisationRun> {
    let complex = load_complex(&cfg.domain)?;
    let family = SequenceFamily::from_config(cfg, &complex)?;
    let data = scenario_data(&complex, cfg.seeds, cfg.data)?;
    let tests = field_test_family(&complex, cfg.test_fourier, cfg.test_random, cfg.seeds.test)?;
    run_sequence(&complex, &family, &cfg.indices, data, tests, splits, cfg.tolerance, cfg.flux_tolerance)
}

/// Runs the configured scenario and reports it for the configured split.
pub fn run_homogenisation(cfg: &ScenarioConfig) -> Result<Table> {
    let split = cfg.grid_split()?;
    let run = run_homogenisation_with_splits(cfg, &[split])?;
    run.report(split)
}

/// Pairings `<r_n, q_n>` against the limit pairing, with the hypothesis surrogates: relative
/// H^-1 distance of the last two divergences and relative distance of the last two curls.
pub fn divcurl_check(
    complex: &GridComplex,
    indices: &[usize],
    r: &[Col<f64>],
    q: &[Col<f64>],
    r_lim: &Col<f64>,
    q_lim: &Col<f64>,
    tolerance: f64,
) -> Result<Table> {
    if r.len() != q.len() || r.len() != indices.len() {
        return Err(Error::Structural(format!(
            "sequence lengths differ: {} indices, {} and {} fields",
            indices.len(),
            r.len(),
            q.len()
        )));
    }
    let w = complex.h().powi(3);
    let lim = w * linalg::dot(r_lim, q_lim);
    let mut t = Table::new(vec!["n", "pairing", "gap", "hminus_div"]);
    let div = |v: &Col<f64>| linalg::spmv_t(complex.g_csc(), v);
    let curl = |v: &Col<f64>| linalg::spmv(complex.ccirc_csc(), v);
    for ((n, rn), qn) in indices.iter().zip(r).zip(q) {
        let p = w * linalg::dot(rn, qn);
        t.rows.push(vec![*n as f64, p, (p - lim).abs() / lim.abs().max(f64::MIN_POSITIVE), hminus_norm(complex, &div(rn))?]);
    }
    let k = r.len();
    let (div_spread, curl_spread) = if k >= 2 {
        let dd = hminus_norm(complex, &(div(&r[k - 1]) - div(&r[k - 2])))?;
        let ds = hminus_norm(complex, &div(&r[k - 1]))?.max(hminus_norm(complex, &div(&r[k - 2]))?);
        let cd = (curl(&q[k - 1]) - curl(&q[k - 2])).norm_l2();
        // curls of curl-free fields are pure roundoff, so the scale includes ||q|| / h
        let cs = curl(&q[k - 1]).norm_l2().max(curl(&q[k - 2]).norm_l2())
            + q[k - 1].norm_l2().max(q[k - 2].norm_l2()) / complex.h();
        let rel = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b.max(f64::MIN_POSITIVE) };
        (rel(dd, ds), rel(cd, cs))
    } else {
        (0.0, 0.0)
    };
    t.note("limit_pairing", format!("{lim:.9e}"));
    t.note("div_spread", format!("{div_spread:.3e}"));
    t.note("curl_spread", format!("{curl_spread:.3e}"));
    t.note("spread_threshold", HYPOTHESIS_SPREAD);
    t.note("tolerance_gap", tolerance);
    let gaps = t.column("gap");
    let status = if div_spread > HYPOTHESIS_SPREAD || curl_spread > HYPOTHESIS_SPREAD {
        Status::NotApplicable
    } else {
        Status::from_bool(non_increasing_tail(&gaps, 1e-9) && *gaps.last().unwrap_or(&f64::NAN) <= tolerance)
    };
    t.verdicts.push(Verdict::new("divcurl", status));
    Ok(t)
}

/// Largest relative spread of the last two divergences (or curls) still counted as convergent.
pub const HYPOTHESIS_SPREAD: f64 = 0.05;

/// Unit-norm gradients of `sin(n pi x / L)`-type potentials: bounded fields whose divergences
/// do not settle in H^-1.
pub fn oscillating_gradients(complex: &GridComplex, indices: &[usize]) -> Vec<Col<f64>> {
    indices
        .iter()
        .map(|&n| {
            let phi = Col::from_fn(complex.n0(), |i| {
                let x = complex.node_position(i);
                box_sines(complex, x, [2 * n + 1, 1, 1])
            });
            let g = linalg::spmv(complex.g_csc(), &phi);
            let norm = (complex.h().powi(3) * linalg::dot(&g, &g)).sqrt();
            g / norm
        })
        .collect()
}

pub fn run_divcurl(cfg: &ScenarioConfig) -> Result<Table> {
    if cfg.adversarial {
        let complex = load_complex(&cfg.domain)?;
        let seq = oscillating_gradients(&complex, &cfg.indices);
        let last = seq.last().expect("indices are non-empty").clone();
        return divcurl_check(&complex, &cfg.indices, &seq, &seq, &last, &last, cfg.tolerance);
    }
    let split = cfg.grid_split()?;
    let run = run_homogenisation_with_splits(cfg, &[split])?;
    let r: Vec<_> = run.members.iter().map(|m| m.flux.clone()).collect();
    let q: Vec<_> = run.members.iter().map(|m| m.field.clone()).collect();
    divcurl_check(&run.complex, &cfg.indices, &r, &q, &run.limit_flux, &run.limit_field, cfg.tolerance)
}

/// `||E_n - E|| / ||E||` per index with the coercivity sandwich
/// `c ||E_n - E||^2 <= <E_n - E, eps_n (E_n - E)>`.
pub fn compactness_demo(cfg: &ScenarioConfig) -> Result<Table> {
    let complex = load_complex(&cfg.domain)?;
    let family = SequenceFamily::from_config(cfg, &complex)?;
    let data = scenario_data(&complex, cfg.seeds, cfg.data)?;
    let limit = family.limit(&complex)?;
    let e = solve_electrostatics(&limit, &data)?.field;
    let w = complex.h().powi(3);
    let norm_e = (w * linalg::dot(&e, &e)).sqrt();
    let rows = par_map(&cfg.indices, workers(), |&n| -> Result<Vec<f64>> {
        let eps = family.member(&complex, n)?;
        let en = solve_electrostatics(&eps, &data)?.field;
        let d = &en - &e;
        let dd = w * linalg::dot(&d, &d);
        let c = eps.lower_bound().ok_or_else(|| Error::Coercivity("family member has no coercivity bound".into()))?;
        let lhs = c * dd;
        let rhs = w * linalg::dot(&d, &eps.apply(&d));
        Ok(vec![n as f64, dd.sqrt() / norm_e, lhs, rhs])
    });
    let mut t = Table::new(vec!["n", "error", "sandwich_lhs", "sandwich_rhs"]);
    for r in rows {
        t.rows.push(r?);
    }
    let err = t.column("error");
    let sandwich_ok = t.rows.iter().all(|r| r[2] <= r[3] + 1e-10 * r[3].abs().max(r[2].abs()).max(f64::MIN_POSITIVE));
    t.note("sandwich_slack", 1e-10);
    t.verdicts.push(Verdict::new("sandwich", Status::from_bool(sandwich_ok)));
    t.verdicts.push(Verdict::new("error_trend", Status::from_bool(non_increasing_tail(&err, 1e-9))));
    Ok(t)
}

/// Compliances `<f, u>` of the layered medium and of the homogenised tensor for three
/// potential-only loads oscillating once along x, y and z.
pub fn reference_compliances(complex: &Arc<GridComplex>, p: LayeredParams, n: usize) -> Result<[(f64, f64); 3]> {
    let layered = layered_sequence(complex, p, n)?;
    let limit = homogenised_limit(complex, p)?;
    let mut out = [(0.0, 0.0); 3];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut k = [1usize; 3];
        k[d] = 2;
        let f = Col::from_fn(complex.n0(), |i| box_sines(complex, complex.node_position(i), k));
        let ul = crate::electro::reduced_solve_grad(&layered, &f)?;
        let uh = crate::electro::reduced_solve_grad(&limit, &f)?;
        *slot = (linalg::dot(&f, &ul), linalg::dot(&f, &uh));
    }
    Ok(out)
}
