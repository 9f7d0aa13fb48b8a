//! Voxel domains and the staggered cochain complex with electric boundary conditions:
//! potentials on interior nodes, fields on interior edges, curls on interior faces.
//!
//! Dof ordering is lexicographic by (direction, z, y, x) with x fastest.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use faer::sparse::Triplet;
use faer::{Col, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpMat, Solver};
use crate::operator::{HilbertSpace, LinearMap, Space, Subspace, DEFAULT_RANK_TOL};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelDomain {
    shape: [usize; 3],
    mask: Vec<bool>,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct DomainFile {
    shape: [usize; 3],
    h: f64,
    /// Runs of `[value, count]` over voxels in (z, y, x) order.
    rle: Vec<[usize; 2]>,
}

impl VoxelDomain {
    pub fn new(shape: [usize; 3], mask: Vec<bool>, h: f64) -> Result<Self> {
        if shape.iter().any(|&s| s == 0) {
            return Err(Error::Structural(format!("shape {shape:?} has an empty axis")));
        }
        if mask.len() != shape[0] * shape[1] * shape[2] {
            return Err(Error::Structural(format!("mask length {} does not match shape {shape:?}", mask.len())));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::Structural("domain has no occupied voxel".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Structural(format!("spacing {h} must be positive")));
        }
        Ok(VoxelDomain { shape, mask, h })
    }

    pub fn from_fn(shape: [usize; 3], h: f64, f: impl Fn(usize, usize, usize) -> bool) -> Result<Self> {
        let mut mask = Vec::with_capacity(shape[0] * shape[1] * shape[2]);
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    mask.push(f(i, j, k));
                }
            }
        }
        Self::new(shape, mask, h)
    }

    pub fn solid_cube(n: usize) -> Result<Self> {
        Self::from_fn([n, n, n], 1.0 / n as f64, |_, _, _| true)
    }

    /// `n^3` cube with a centered `m^3` cavity.
    pub fn cavity_cube(n: usize, m: usize) -> Result<Self> {
        if m + 2 > n || (n - m) % 2 != 0 {
            return Err(Error::Structural(format!("cavity {m} must be centered strictly inside {n}")));
        }
        let lo = (n - m) / 2;
        let inside = |a: usize| a >= lo && a < lo + m;
        Self::from_fn([n, n, n], 1.0 / n as f64, |i, j, k| !(inside(i) && inside(j) && inside(k)))
    }

    /// 11^3 cube with two disjoint 3^3 cavities.
    pub fn two_cavity() -> Result<Self> {
        let c = |a: usize, lo: usize| a >= lo && a < lo + 3;
        Self::from_fn([11, 11, 11], 1.0 / 11.0, |i, j, k| !((c(i, 2) || c(i, 6)) && c(j, 4) && c(k, 4)))
    }

    /// Parses "solid-cube N", "cavity-cube N M", "two-cavity", "replicated K".
    pub fn fixture(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split_whitespace().collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Config(format!("bad number {s:?} in fixture {spec:?}")))
        };
        match parts.as_slice() {
            ["solid-cube", n] => Self::solid_cube(num(n)?),
            ["cavity-cube", n, m] => Self::cavity_cube(num(n)?, num(m)?),
            ["two-cavity"] => Self::two_cavity(),
            ["replicated", k] => replicate_domain(&Self::cavity_cube(9, 3)?, num(k)?, 1),
            _ => Err(Error::Config(format!("unknown fixture {spec:?}"))),
        }
    }

    /// A fixture name or a path to a JSON domain file.
    pub fn load(spec: &str) -> Result<Self> {
        if std::path::Path::new(spec).is_file() {
            Self::from_json(&std::fs::read_to_string(spec)?)
        } else {
            Self::fixture(spec)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: DomainFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("domain file: {e}")))?;
        let mut mask = Vec::new();
        for [v, c] in f.rle {
            if v > 1 {
                return Err(Error::Config(format!("occupancy value {v} is not 0 or 1")));
            }
            mask.extend(std::iter::repeat_n(v == 1, c));
        }
        Self::new(f.shape, mask, f.h)
    }

    pub fn to_json(&self) -> String {
        let mut rle: Vec<[usize; 2]> = Vec::new();
        for &b in &self.mask {
            match rle.last_mut() {
                Some(last) if last[0] == b as usize => last[1] += 1,
                _ => rle.push([b as usize, 1]),
            }
        }
        serde_json::to_string(&DomainFile { shape: self.shape, h: self.h, rle }).expect("serializable")
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn occupied_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn voxel(&self, i: usize, j: usize, k: usize) -> bool {
        self.mask[(k * self.shape[1] + j) * self.shape[0] + i]
    }

    /// Occupancy with out-of-range coordinates treated as empty.
    pub fn occupied(&self, i: isize, j: isize, k: isize) -> bool {
        let [nx, ny, nz] = self.shape;
        if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
            return false;
        }
        self.voxel(i as usize, j as usize, k as usize)
    }

    /// Bounded components of the empty region under 6-connectivity (the outside is the
    /// component touching the padding layer).
    pub fn cavity_count(&self) -> usize {
        let [nx, ny, nz] = self.shape;
        let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
        let idx = |i: usize, j: usize, k: usize| (k * py + j) * px + i;
        let empty = |i: usize, j: usize, k: usize| !self.occupied(i as isize - 1, j as isize - 1, k as isize - 1);
        let mut seen = vec![false; px * py * pz];
        let mut comps = 0;
        for k in 0..pz {
            for j in 0..py {
                for i in 0..px {
                    if seen[idx(i, j, k)] || !empty(i, j, k) {
                        continue;
                    }
                    comps += 1;
                    seen[idx(i, j, k)] = true;
                    let mut q = VecDeque::from([(i, j, k)]);
                    while let Some((a, b, c)) = q.pop_front() {
                        let mut push = |a: usize, b: usize, c: usize| {
                            if !seen[idx(a, b, c)] && empty(a, b, c) {
                                seen[idx(a, b, c)] = true;
                                q.push_back((a, b, c));
                            }
                        };
                        if a > 0 {
                            push(a - 1, b, c);
                        }
                        if a + 1 < px {
                            push(a + 1, b, c);
                        }
                        if b > 0 {
                            push(a, b - 1, c);
                        }
                        if b + 1 < py {
                            push(a, b + 1, c);
                        }
                        if c > 0 {
                            push(a, b, c - 1);
                        }
                        if c + 1 < pz {
                            push(a, b, c + 1);
                        }
                    }
                }
            }
        }
        comps - 1
    }
}

/// `k` copies of `domain` along x separated by `gap` empty voxel layers.
pub fn replicate_domain(domain: &VoxelDomain, k: usize, gap: usize) -> Result<VoxelDomain> {
    if k == 0 {
        return Err(Error::Structural("replication count must be positive".into()));
    }
    if gap == 0 {
        return Err(Error::Structural("replication gap must be positive".into()));
    }
    let [nx, ny, nz] = domain.shape;
    let width = k
        .checked_mul(nx)
        .and_then(|w| w.checked_add((k - 1) * gap))
        .filter(|w| w.checked_mul(ny * nz).is_some())
        .ok_or_else(|| Error::Structural("replicated shape overflows".into()))?;
    VoxelDomain::from_fn([width, ny, nz], domain.h, |i, j, l| {
        let period = nx + gap;
        let (copy, off) = (i / period, i % period);
        copy < k && off < nx && domain.voxel(off, j, l)
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicKind {
    Dirichlet,
    Eps,
    EpsDual,
}

/// A mass-orthonormal basis of one of the harmonic field spaces.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub kind: HarmonicKind,
    pub basis: Subspace,
}

/// The complex X0 --G--> H --Ccirc--> X1 with uniform mass `h^3` on every space.
pub struct GridComplex {
    domain: VoxelDomain,
    node_dof: Vec<usize>,
    edge_dof: [Vec<usize>; 3],
    nodes: Vec<[usize; 3]>,
    edges: Vec<(usize, [usize; 3])>,
    faces: Vec<(usize, [usize; 3])>,
    x0: Space,
    hs: Space,
    x1: Space,
    g_inc: SpMat,
    c_inc: SpMat,
    g: LinearMap,
    ccirc: LinearMap,
    div: LinearMap,
    curl: LinearMap,
    laplacian: OnceLock<std::result::Result<Arc<Solver>, String>>,
    harmonic: OnceLock<HarmonicBasis>,
    hodge: OnceLock<std::result::Result<Arc<Solver>, String>>,
}

impl std::fmt::Debug for GridComplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GridComplex(shape {:?}, X0 {}, H {}, X1 {})", self.domain.shape, self.n0(), self.n1(), self.n2())
    }
}

fn unit(d: usize) -> [usize; 3] {
    let mut e = [0; 3];
    e[d] = 1;
    e
}

fn plus(p: [usize; 3], q: [usize; 3]) -> [usize; 3] {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
}

impl GridComplex {
    pub fn node_grid(&self) -> [usize; 3] {
        let [nx, ny, nz] = self.domain.shape;
        [nx + 1, ny + 1, nz + 1]
    }

    fn node_id(&self, p: [usize; 3]) -> usize {
        let [gx, gy, _] = self.node_grid();
        (p[2] * gy + p[1]) * gx + p[0]
    }

    /// Extent of the edge grid in direction `d`.
    fn edge_grid(shape: [usize; 3], d: usize) -> [usize; 3] {
        let mut g = [shape[0] + 1, shape[1] + 1, shape[2] + 1];
        g[d] -= 1;
        g
    }

    fn edge_id(&self, d: usize, p: [usize; 3]) -> usize {
        let g = Self::edge_grid(self.domain.shape, d);
        (p[2] * g[1] + p[1]) * g[0] + p[0]
    }

    /// Voxels touching the node, edge or face, given as offsets around `p`.
    fn count_occupied(domain: &VoxelDomain, p: [usize; 3], free: [bool; 3]) -> (usize, usize) {
        let mut occ = 0;
        let mut tot = 0;
        let r = |f: bool| if f { 0..=0 } else { -1..=0 };
        for dk in r(free[2]) {
            for dj in r(free[1]) {
                for di in r(free[0]) {
                    tot += 1;
                    if domain.occupied(p[0] as isize + di, p[1] as isize + dj, p[2] as isize + dk) {
                        occ += 1;
                    }
                }
            }
        }
        (occ, tot)
    }

    pub fn build(domain: VoxelDomain) -> Result<Arc<Self>> {
        let shape = domain.shape;
        let [nx, ny, nz] = shape;
        let h = domain.h;
        let w = h * h * h;
        let (gx, gy, gz) = (nx + 1, ny + 1, nz + 1);

        let mut node_dof = vec![NONE; gx * gy * gz];
        let mut nodes = Vec::new();
        for k in 0..gz {
            for j in 0..gy {
                for i in 0..gx {
                    let (occ, tot) = Self::count_occupied(&domain, [i, j, k], [false; 3]);
                    if occ == tot {
                        node_dof[(k * gy + j) * gx + i] = nodes.len();
                        nodes.push([i, j, k]);
                    }
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::DegenerateDomain("no interior nodes".into()));
        }

        let mut edge_dof: [Vec<usize>; 3] = Default::default();
        let mut edges = Vec::new();
        for d in 0..3 {
            let g = Self::edge_grid(shape, d);
            edge_dof[d] = vec![NONE; g[0] * g[1] * g[2]];
            let mut free = [false; 3];
            free[d] = true;
            for k in 0..g[2] {
                for j in 0..g[1] {
                    for i in 0..g[0] {
                        let (occ, tot) = Self::count_occupied(&domain, [i, j, k], free);
                        if occ == tot {
                            edge_dof[d][(k * g[1] + j) * g[0] + i] = edges.len();
                            edges.push((d, [i, j, k]));
                        }
                    }
                }
            }
        }

        let mut faces = Vec::new();
        for d in 0..3 {
            let mut g = [nx, ny, nz];
            g[d] += 1;
            let mut free = [true; 3];
            free[d] = false;
            for k in 0..g[2] {
                for j in 0..g[1] {
                    for i in 0..g[0] {
                        let (occ, tot) = Self::count_occupied(&domain, [i, j, k], free);
                        if occ == tot {
                            faces.push((d, [i, j, k]));
                        }
                    }
                }
            }
        }

        let node_lookup = |p: [usize; 3]| -> usize {
            if p[0] >= gx || p[1] >= gy || p[2] >= gz {
                return NONE;
            }
            node_dof[(p[2] * gy + p[1]) * gx + p[0]]
        };
        let edge_lookup = |d: usize, p: [usize; 3]| -> usize {
            let g = Self::edge_grid(shape, d);
            if p[0] >= g[0] || p[1] >= g[1] || p[2] >= g[2] {
                return NONE;
            }
            edge_dof[d][(p[2] * g[1] + p[1]) * g[0] + p[0]]
        };

        let mut gt = Vec::new();
        for (e, &(d, p)) in edges.iter().enumerate() {
            let a = node_lookup(p);
            let b = node_lookup(plus(p, unit(d)));
            if a != NONE {
                gt.push(Triplet::new(e, a, -1.0));
            }
            if b != NONE {
                gt.push(Triplet::new(e, b, 1.0));
            }
        }
        let mut ct = Vec::new();
        for (f, &(d, p)) in faces.iter().enumerate() {
            let (a, b) = ((d + 1) % 3, (d + 2) % 3);
            let terms = [(a, p, 1.0), (b, plus(p, unit(a)), 1.0), (a, plus(p, unit(b)), -1.0), (b, p, -1.0)];
            for (dir, q, s) in terms {
                let e = edge_lookup(dir, q);
                if e != NONE {
                    ct.push(Triplet::new(f, e, s));
                }
            }
        }
        let (n0, n1, n2) = (nodes.len(), edges.len(), faces.len());
        let g_inc = linalg::from_triplets(n1, n0, &gt);
        let c_inc = linalg::from_triplets(n2, n1, &ct);
        let scale = |m: &SpMat| {
            let t: Vec<_> = linalg::triplets(m).into_iter().map(|t| Triplet::new(t.row, t.col, t.val / h)).collect();
            linalg::from_triplets(m.nrows(), m.ncols(), &t)
        };
        let x0 = HilbertSpace::uniform(n0, w);
        let hs = HilbertSpace::uniform(n1, w);
        let x1 = HilbertSpace::uniform(n2, w);
        let g = LinearMap::sparse(x0.clone(), hs.clone(), scale(&g_inc))?;
        let ccirc = LinearMap::sparse(hs.clone(), x1.clone(), scale(&c_inc))?;
        // uniform masses: adjoints are plain transposes
        let div = crate::operator::adjoint(&g);
        let curl = crate::operator::adjoint(&ccirc);
        Ok(Arc::new(GridComplex {
            domain,
            node_dof,
            edge_dof,
            nodes,
            edges,
            faces,
            x0,
            hs,
            x1,
            g_inc,
            c_inc,
            g,
            ccirc,
            div,
            curl,
            laplacian: OnceLock::new(),
            harmonic: OnceLock::new(),
            hodge: OnceLock::new(),
        }))
    }

    pub fn domain(&self) -> &VoxelDomain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.domain.h
    }

    pub fn n0(&self) -> usize {
        self.nodes.len()
    }

    pub fn n1(&self) -> usize {
        self.edges.len()
    }

    pub fn n2(&self) -> usize {
        self.faces.len()
    }

    pub fn x0(&self) -> &Space {
        &self.x0
    }

    pub fn field_space(&self) -> &Space {
        &self.hs
    }

    pub fn x1(&self) -> &Space {
        &self.x1
    }

    pub fn g(&self) -> &LinearMap {
        &self.g
    }

    pub fn ccirc(&self) -> &LinearMap {
        &self.ccirc
    }

    pub fn div(&self) -> &LinearMap {
        &self.div
    }

    pub fn curl(&self) -> &LinearMap {
        &self.curl
    }

    /// The scaled gradient as a borrowed sparse matrix.
    pub fn g_csc(&self) -> &SpMat {
        self.g.matrix().as_sparse().expect("gradient is sparse")
    }

    pub fn ccirc_csc(&self) -> &SpMat {
        self.ccirc.matrix().as_sparse().expect("curl is sparse")
    }

    pub fn g_sparse(&self) -> SpMat {
        self.g.matrix().to_sparse()
    }

    pub fn ccirc_sparse(&self) -> SpMat {
        self.ccirc.matrix().to_sparse()
    }

    /// Signed integer incidence matrices before the `1/h` scaling.
    pub fn incidence(&self) -> (&SpMat, &SpMat) {
        (&self.g_inc, &self.c_inc)
    }

    pub fn node_position(&self, dof: usize) -> [f64; 3] {
        let p = self.nodes[dof];
        let h = self.h();
        [p[0] as f64 * h, p[1] as f64 * h, p[2] as f64 * h]
    }

    /// Direction and midpoint of a field dof.
    pub fn edge_midpoint(&self, dof: usize) -> (usize, [f64; 3]) {
        let (d, p) = self.edges[dof];
        let h = self.h();
        let mut x = [p[0] as f64 * h, p[1] as f64 * h, p[2] as f64 * h];
        x[d] += 0.5 * h;
        (d, x)
    }

    /// Direction and lattice coordinates of a field dof.
    pub fn edge(&self, dof: usize) -> (usize, [usize; 3]) {
        self.edges[dof]
    }

    /// Field dof of the edge in direction `d` starting at lattice point `p`, if any.
    pub fn edge_lookup(&self, d: usize, p: [isize; 3]) -> Option<usize> {
        let g = Self::edge_grid(self.domain.shape, d);
        if p.iter().zip(g).any(|(&a, b)| a < 0 || a as usize >= b) {
            return None;
        }
        let e = self.edge_dof[d][self.edge_id(d, [p[0] as usize, p[1] as usize, p[2] as usize])];
        (e != NONE).then_some(e)
    }

    pub fn node_lookup(&self, p: [usize; 3]) -> Option<usize> {
        let [gx, gy, gz] = self.node_grid();
        if p[0] >= gx || p[1] >= gy || p[2] >= gz {
            return None;
        }
        let n = self.node_dof[self.node_id(p)];
        (n != NONE).then_some(n)
    }

    pub fn face(&self, dof: usize) -> (usize, [usize; 3]) {
        self.faces[dof]
    }

    /// Cached factorization of the Dirichlet Laplacian `div G` on X0.
    pub fn laplacian_solver(&self) -> Result<Arc<Solver>> {
        self.laplacian
            .get_or_init(|| {
                let g = self.g_sparse();
                let l = linalg::matmul(&linalg::transpose(&g), &g);
                Solver::new(&l).map(Arc::new).map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Solve)
    }

    /// `G (G^T G)^-1 G^T v`: orthogonal projection onto ran(G).
    pub fn project_gradients(&self, v: &Col<f64>) -> Result<Col<f64>> {
        let s = self.laplacian_solver()?;
        let gs = self.g_sparse();
        Ok(linalg::spmv(&gs, &s.solve(&linalg::spmv_t(&gs, v))))
    }

    /// Mass-orthonormal basis of ker(div) ∩ ker(Ccirc), built from boundary-component
    /// potentials.
    pub fn harmonic_dirichlet(&self) -> Result<HarmonicBasis> {
        if let Some(b) = self.harmonic.get() {
            return Ok(b.clone());
        }
        let basis = self.build_harmonic()?;
        Ok(self.harmonic.get_or_init(|| basis).clone())
    }

    fn build_harmonic(&self) -> Result<HarmonicBasis> {
        let [gx, gy, gz] = self.node_grid();
        let total = gx * gy * gz;
        let shape = self.domain.shape;
        let in_closure = |p: [usize; 3]| Self::count_occupied(&self.domain, p, [false; 3]).0 > 0;
        let mut closure = UnionFind::new(total);
        let mut boundary = UnionFind::new(total);
        let mut is_boundary = vec![false; total];
        for k in 0..gz {
            for j in 0..gy {
                for i in 0..gx {
                    let p = [i, j, k];
                    if in_closure(p) && self.node_dof[self.node_id(p)] == NONE {
                        is_boundary[self.node_id(p)] = true;
                    }
                }
            }
        }
        for d in 0..3 {
            let g = Self::edge_grid(shape, d);
            let mut free = [false; 3];
            free[d] = true;
            for k in 0..g[2] {
                for j in 0..g[1] {
                    for i in 0..g[0] {
                        let p = [i, j, k];
                        let (occ, tot) = Self::count_occupied(&self.domain, p, free);
                        if occ == 0 {
                            continue;
                        }
                        let (a, b) = (self.node_id(p), self.node_id(plus(p, unit(d))));
                        closure.union(a, b);
                        if occ < tot {
                            boundary.union(a, b);
                        }
                    }
                }
            }
        }
        // boundary components grouped by closure component
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        let mut sizes: std::collections::HashMap<usize, usize> = Default::default();
        for n in 0..total {
            if is_boundary[n] {
                let r = boundary.find(n);
                *sizes.entry(r).or_default() += 1;
                if sizes[&r] == 1 {
                    groups.entry(closure.find(n)).or_default().push(r);
                }
            }
        }
        let mut potentials: Vec<usize> = Vec::new();
        for roots in groups.values() {
            // drop the largest boundary piece of each component (the outer surface)
            let keep = roots.iter().copied().max_by_key(|r| (sizes[r], std::cmp::Reverse(*r))).unwrap();
            potentials.extend(roots.iter().copied().filter(|&r| r != keep));
        }
        let n1 = self.n1();
        let h = self.h();
        let mut fields = Mat::<f64>::zeros(n1, potentials.len());
        if !potentials.is_empty() {
            let lap = self.laplacian_solver()?;
            let gs = self.g_sparse();
            let piece: Vec<usize> = (0..total).map(|i| if is_boundary[i] { boundary.find(i) } else { usize::MAX }).collect();
            for (c, &root) in potentials.iter().enumerate() {
                let chi = |p: [usize; 3]| -> f64 {
                    let id = self.node_id(p);
                    if piece[id] == root {
                        1.0
                    } else {
                        0.0
                    }
                };
                let b = Col::from_fn(n1, |e| {
                    let (d, p) = self.edges[e];
                    (chi(plus(p, unit(d))) - chi(p)) / h
                });
                let u = lap.solve(&(-linalg::spmv_t(&gs, &b)));
                let field = linalg::spmv(&gs, &u) + &b;
                fields.col_mut(c).copy_from(&field);
            }
        }
        let basis = Subspace::from_spanning(self.hs.clone(), &fields, DEFAULT_RANK_TOL)?;
        Ok(HarmonicBasis { kind: HarmonicKind::Dirichlet, basis })
    }

    /// Factorization of the edge Hodge Laplacian `G G^T + Ccirc^T Ccirc` made definite by
    /// penalizing one pinned edge per harmonic Dirichlet direction.
    pub fn pinned_hodge_solver(&self) -> Result<Arc<Solver>> {
        if let Some(s) = self.hodge.get() {
            return s.clone().map_err(Error::Solve);
        }
        let built = self.build_hodge().map_err(|e| e.to_string());
        self.hodge.get_or_init(|| built).clone().map_err(Error::Solve)
    }

    fn build_hodge(&self) -> Result<Arc<Solver>> {
        let l1 = self.hodge_laplacian();
        let z = self.harmonic_dirichlet()?.basis;
        let pins = pivot_rows(z.basis());
        let scale = 1.0 / (self.h() * self.h());
        let p = linalg::from_triplets(
            self.n1(),
            self.n1(),
            &pins.iter().map(|&i| Triplet::new(i, i, scale)).collect::<Vec<_>>(),
        );
        Ok(Arc::new(Solver::new(&linalg::add(1.0, &l1, 1.0, &p))?))
    }

    /// `G G^T + Ccirc^T Ccirc` (masses are uniform, so adjoints are transposes).
    pub fn hodge_laplacian(&self) -> SpMat {
        let g = self.g_sparse();
        let c = self.ccirc_sparse();
        let a = linalg::matmul(&g, &linalg::transpose(&g));
        let b = linalg::matmul(&linalg::transpose(&c), &c);
        linalg::add(1.0, &a, 1.0, &b)
    }

    /// Solves the edge Hodge Laplacian for a right-hand side orthogonal to H_D; the
    /// returned solution vanishes on the pinned edges.
    pub fn hodge_solve(&self, rhs: &Col<f64>) -> Result<Col<f64>> {
        Ok(self.pinned_hodge_solver()?.solve(rhs))
    }
}

/// Row indices chosen by greedy pivoting so that the selected rows of `z` are invertible.
pub fn pivot_rows(z: &Mat<f64>) -> Vec<usize> {
    let k = z.ncols();
    let mut work = z.clone();
    let mut rows = Vec::with_capacity(k);
    for c in 0..k {
        let mut best = (0, 0.0f64);
        for i in 0..work.nrows() {
            if work[(i, c)].abs() > best.1 && !rows.contains(&i) {
                best = (i, work[(i, c)].abs());
            }
        }
        let r = best.0;
        rows.push(r);
        let piv = work[(r, c)];
        for cc in c + 1..k {
            let f = work[(r, cc)] / piv;
            for i in 0..work.nrows() {
                let v = work[(i, c)];
                work[(i, cc)] -= f * v;
            }
        }
    }
    rows
}

pub fn build_complex(domain: VoxelDomain) -> Result<Arc<GridComplex>> {
    GridComplex::build(domain)
}

pub fn harmonic_dirichlet(complex: &GridComplex) -> Result<HarmonicBasis> {
    complex.harmonic_dirichlet()
}

/// Independent count of harmonic Dirichlet fields: near-zero eigenvalues of the edge Hodge
/// Laplacian found by shift-invert subspace iteration.
pub fn hodge_nullity(complex: &GridComplex) -> Result<usize> {
    let l1 = complex.hodge_laplacian();
    let n = l1.nrows();
    let shift = 1e-3;
    let shifted = linalg::add(1.0, &l1, shift, &linalg::identity(n));
    let solver = Solver::new(&shifted)?;
    let mut p = 6usize.min(n);
    loop {
        let mut x = Mat::from_fn(n, p, |i, j| ((i * 2654435761 + j * 40503) % 10007) as f64 / 10007.0 - 0.5);
        for _ in 0..12 {
            x = solver.solve_mat(&x).qr().compute_thin_Q();
        }
        let mut lx = Mat::<f64>::zeros(n, p);
        for j in 0..p {
            let c = linalg::spmv(&l1, &x.col(j).to_owned());
            lx.col_mut(j).copy_from(&c);
        }
        let ritz = (x.transpose() * lx).self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Solve(format!("{e:?}")))?;
        let zeros = ritz.iter().filter(|&&v| v < 1e-8).count();
        if zeros < p || p == n {
            return Ok(zeros);
        }
        p = (2 * p).min(n);
    }
}
