//! Interleaved diagonal sequences on a three-block space `L0 + L1 + L2` whose Schur maps
//! converge for one choice of split and oscillate for the other.

use std::sync::Arc;

use faer::Mat;

use super::config::ScenarioConfig;
use super::report::{Status, Table, Verdict};
use crate::block_schur::{
    block_inverse_blocks, gram_schmidt, schur_pairings, BlockOperator, BlockSplit, SchurPairings, TestFamily,
};
use crate::error::{Error, Result};
use crate::operator::{HilbertSpace, LinearMap, Space, Subspace};

pub const COLUMNS: [&str; 5] = ["n", "d_tau0", "d_tau1", "d_tau0_inv", "d_tau1_inv"];

/// Final distance below which a sequence counts as converged.
pub const CONVERGED: f64 = 1e-3;
/// Least separation between the even and odd clusters of a non-convergent sequence.
pub const CLUSTER_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct InterleavedParams {
    pub dims: [usize; 3],
    /// amplitude of the square-wave multiplier used for odd indices
    pub amplitude: f64,
    pub test_modes: usize,
}

impl InterleavedParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        InterleavedParams { dims: [cfg.block0, cfg.block1, cfg.block2], amplitude: cfg.amplitude, test_modes: cfg.test_fourier }
    }
}

/// The three-block space, the two splits and the test family.
pub struct Setting {
    pub space: Space,
    pub tau0: Arc<BlockSplit>,
    pub tau1: Arc<BlockSplit>,
    pub tests: TestFamily,
    params: InterleavedParams,
}

fn coordinate_block(space: &Space, range: std::ops::Range<usize>) -> Result<Subspace> {
    let n = space.dim();
    let start = range.start;
    let basis = Mat::from_fn(n, range.len(), |i, j| if i == start + j { 1.0 / space.mass()[i].sqrt() } else { 0.0 });
    Subspace::new(space.clone(), basis)
}

/// `L1` is a grid of `m` cells of `[0, 1]` with mass `1/m`; `L0` and `L2` carry unit mass.
pub fn setting(p: InterleavedParams) -> Result<Setting> {
    let [d0, m, d2] = p.dims;
    if d0 == 0 || m < 4 || d2 == 0 {
        return Err(Error::Structural(format!("degenerate three-block split {:?}", p.dims)));
    }
    let n = d0 + m + d2;
    let mass: Vec<f64> = (0..n).map(|i| if (d0..d0 + m).contains(&i) { 1.0 / m as f64 } else { 1.0 }).collect();
    let space = HilbertSpace::new(mass)?;
    let tau0 = BlockSplit::new(coordinate_block(&space, 0..d0)?, coordinate_block(&space, d0..n)?)?;
    let tau1 = BlockSplit::new(coordinate_block(&space, 0..d0 + m)?, coordinate_block(&space, d0 + m..n)?)?;
    let modes = p.test_modes.min(m);
    let mut raw = Mat::<f64>::zeros(n, modes + 2);
    for j in 0..modes {
        for i in 0..m {
            let x = (i as f64 + 0.5) / m as f64;
            raw[(d0 + i, j)] = ((j + 1) as f64 * std::f64::consts::PI * x).sin();
        }
    }
    raw[(0, modes)] = 1.0;
    raw[(n - 1, modes + 1)] = 1.0;
    let tests = TestFamily::geometric(space.clone(), gram_schmidt(&space, &raw))?;
    Ok(Setting { space, tau0: Arc::new(tau0), tau1: Arc::new(tau1), tests, params: p })
}

fn square_wave(x: f64, freq: usize) -> f64 {
    if ((x * freq as f64 * 2.0).floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Setting {
    /// Multiplier of `b_n` on `L1`: constant one for even `n`, and `1 + s sq(k x)` with
    /// `k = (n - 1) / 2` for odd `n`. Both have weak limit one; the inverses have weak limits
    /// one and `1 / (1 - s^2)`.
    pub fn multiplier(&self, n: usize) -> Vec<f64> {
        let m = self.params.dims[1];
        if n % 2 == 0 || self.params.amplitude == 0.0 {
            return vec![1.0; m];
        }
        let k = (n - 1) / 2;
        (0..m).map(|i| 1.0 + self.params.amplitude * square_wave((i as f64 + 0.5) / m as f64, k.max(1))).collect()
    }

    /// `c_n = diag(id, b_n, id)`.
    pub fn member(&self, n: usize) -> Result<LinearMap> {
        let [d0, m, _] = self.params.dims;
        let b = self.multiplier(n);
        let dim = self.space.dim();
        let diag: Vec<f64> = (0..dim).map(|i| if (d0..d0 + m).contains(&i) { b[i - d0] } else { 1.0 }).collect();
        LinearMap::dense(self.space.clone(), self.space.clone(), Mat::from_fn(dim, dim, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn limit(&self) -> LinearMap {
        LinearMap::identity(self.space.clone())
    }

    pub fn pairings(&self, a: &LinearMap, split: &Arc<BlockSplit>) -> Result<SchurPairings> {
        schur_pairings(&BlockOperator::new(a, split.clone())?, &self.tests)
    }
}

/// Largest separation between the even-index and odd-index clusters; zero when they overlap.
pub fn cluster_gap(indices: &[usize], values: &[f64]) -> f64 {
    let pick = |parity: usize| -> Vec<f64> {
        indices.iter().zip(values).filter(|(n, _)| *n % 2 == parity).map(|(_, v)| *v).collect()
    };
    let (even, odd) = (pick(0), pick(1));
    if even.is_empty() || odd.is_empty() {
        return 0.0;
    }
    let lo = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo(&odd) - hi(&even)).max(lo(&even) - hi(&odd)).max(0.0)
}

pub fn incomparable_demo(cfg: &ScenarioConfig) -> Result<Table> {
    let s = setting(InterleavedParams::from_config(cfg))?;
    let limit = s.limit();
    let (lim0, lim1) = (s.pairings(&limit, &s.tau0)?, s.pairings(&limit, &s.tau1)?);
    let w = s.tests.weights();
    let mut t = Table::new(COLUMNS.to_vec());
    for &n in &cfg.indices {
        let c = s.member(n)?;
        let inv = block_inverse_blocks(&BlockOperator::new(&c, s.tau0.clone())?)?.reassemble()?;
        t.rows.push(vec![
            n as f64,
            s.pairings(&c, &s.tau0)?.distance(&lim0, w),
            s.pairings(&c, &s.tau1)?.distance(&lim1, w),
            s.pairings(&inv, &s.tau0)?.distance(&lim0, w),
            s.pairings(&inv, &s.tau1)?.distance(&lim1, w),
        ]);
    }
    let last = |name: &str| *t.column(name).last().expect("indices are non-empty");
    let gap = |name: &str| cluster_gap(&cfg.indices, &t.column(name));
    let (g1, g0i) = (gap("d_tau1"), gap("d_tau0_inv"));
    let (f0, f1i) = (last("d_tau0"), last("d_tau1_inv"));
    t.note("dims", format!("{:?}", s.params.dims));
    t.note("amplitude", s.params.amplitude);
    t.note("converged_below", CONVERGED);
    t.note("cluster_gap_at_least", CLUSTER_GAP);
    t.note("cluster_gap_tau1", format!("{g1:.6e}"));
    t.note("cluster_gap_tau0_inv", format!("{g0i:.6e}"));
    t.verdicts.push(Verdict::new("tau0_converges", Status::from_bool(f0 <= CONVERGED)));
    t.verdicts.push(Verdict::new("tau1_clusters", Status::from_bool(g1 >= CLUSTER_GAP)));
    t.verdicts.push(Verdict::new("inverse_tau1_converges", Status::from_bool(f1i <= CONVERGED)));
    t.verdicts.push(Verdict::new("inverse_tau0_clusters", Status::from_bool(g0i >= CLUSTER_GAP)));
    Ok(t)
}
