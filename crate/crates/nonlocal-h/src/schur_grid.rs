//! The four Schur maps of a grid coefficient applied implicitly through the cached solves,
//! for the two canonical splits of the field space:
//! `ran(G) + ker(div)` and `ker(Ccirc) + ran(curl)`.

use std::sync::Arc;

use faer::{Col, Mat};

use crate::block_schur::{gram_schmidt, SchurPairings, TestFamily};
use crate::coeff::Coefficient;
use crate::derham::GridComplex;
use crate::electro::{factorizations, Factorizations};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridSplit {
    /// first part `ran(G)`
    Gradients,
    /// first part `ker(Ccirc) = ran(G) + H_D`
    CurlFree,
}

impl GridSplit {
    pub fn name(&self) -> &'static str {
        match self {
            GridSplit::Gradients => "gradients",
            GridSplit::CurlFree => "curl-free",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurMap {
    /// `eps00^-1`
    Inverse,
    /// `eps00^-1 eps01`
    Right,
    /// `eps10 eps00^-1`
    Left,
    /// `eps11 - eps10 eps00^-1 eps01`
    Schur,
}

pub const ALL_MAPS: [SchurMap; 4] = [SchurMap::Inverse, SchurMap::Right, SchurMap::Left, SchurMap::Schur];

pub struct GridSchurMaps<'a> {
    eps: &'a Coefficient,
    split: GridSplit,
    fac: Arc<Factorizations>,
}

impl<'a> GridSchurMaps<'a> {
    pub fn new(eps: &'a Coefficient, split: GridSplit) -> Result<Self> {
        Ok(GridSchurMaps { eps, split, fac: factorizations(eps)? })
    }

    fn complex(&self) -> &GridComplex {
        self.eps.complex()
    }

    /// Orthogonal projection onto the first part.
    pub fn project_h0(&self, v: &Col<f64>) -> Result<Col<f64>> {
        let c = self.complex();
        let mut p = c.project_gradients(v)?;
        if self.split == GridSplit::CurlFree && self.fac.harmonic_dim() > 0 {
            let z = self.fac.harmonic();
            // Z is mass-orthonormal, so the projection is Z Z^T M
            p += z * (z.transpose() * v) * c.h().powi(3);
        }
        Ok(p)
    }

    fn project_h1(&self, v: &Col<f64>) -> Result<Col<f64>> {
        Ok(v - self.project_h0(v)?)
    }

    /// `i0 eps00^-1 i0* r`.
    fn inverse00(&self, r: &Col<f64>) -> Col<f64> {
        let c = self.complex();
        let g = c.g_csc();
        match self.split {
            GridSplit::Gradients => linalg::spmv(g, &self.fac.solve_a(&linalg::spmv_t(g, r))),
            GridSplit::CurlFree => {
                let z = self.fac.harmonic();
                let (a, cz) = self.fac.bordered_solve(&linalg::spmv_t(g, r), &(z.transpose() * r));
                let mut y = linalg::spmv(g, &a);
                if cz.nrows() > 0 {
                    y += z * &cz;
                }
                y
            }
        }
    }

    /// One of the four maps, embedded in H (zero on the complementary part).
    pub fn apply(&self, map: SchurMap, v: &Col<f64>) -> Result<Col<f64>> {
        let eps = self.eps;
        Ok(match map {
            SchurMap::Inverse => self.inverse00(v),
            SchurMap::Right => self.inverse00(&eps.apply(&self.project_h1(v)?)),
            SchurMap::Left => self.project_h1(&eps.apply(&self.inverse00(v)))?,
            SchurMap::Schur => {
                let p1 = self.project_h1(v)?;
                let ep = eps.apply(&p1);
                let corr = eps.apply(&self.inverse00(&ep));
                self.project_h1(&(ep - corr))?
            }
        })
    }
}

/// Pairings `<t_j, m t_k>` of the four maps on a field test family.
pub fn grid_schur_pairings(eps: &Coefficient, split: GridSplit, family: &TestFamily) -> Result<SchurPairings> {
    let c = eps.complex();
    if family.ambient().as_ref() != c.field_space().as_ref() {
        return Err(Error::Structural("test family does not live in the field space".into()));
    }
    let maps = GridSchurMaps::new(eps, split)?;
    let t = family.len();
    let w = c.h().powi(3);
    let mut out: [Mat<f64>; 4] = std::array::from_fn(|_| Mat::zeros(t, t));
    for k in 0..t {
        let tk = family.vector(k);
        for (m, map) in ALL_MAPS.iter().enumerate() {
            let y = maps.apply(*map, &tk)?;
            let col = family.vectors().transpose() * &y * w;
            out[m].col_mut(k).copy_from(&col);
        }
    }
    Ok(SchurPairings { maps: out })
}

/// Weighted pairing distance between the Schur maps of two coefficients on the same complex.
pub fn grid_schur_distance(a: &Coefficient, b: &Coefficient, split: GridSplit, family: &TestFamily) -> Result<f64> {
    if !Arc::ptr_eq(a.complex(), b.complex()) {
        return Err(Error::Structural("coefficients live on different complexes".into()));
    }
    let pa = grid_schur_pairings(a, split, family)?;
    let pb = grid_schur_pairings(b, split, family)?;
    Ok(pa.distance(&pb, family.weights()))
}

/// Low-frequency sine fields (one component at a time, ordered by total frequency) followed by
/// seeded random fields, mass-orthonormalized in that order with weights `2^-j`.
pub fn field_test_family(complex: &GridComplex, fourier: usize, random: usize, seed: u64) -> Result<TestFamily> {
    let n1 = complex.n1();
    let shape = complex.domain().shape();
    let h = complex.h();
    let mut modes: Vec<(usize, [usize; 3], usize)> = Vec::new();
    for total in 3..=12 {
        for d in 0..3 {
            for kx in 1..=total {
                for ky in 1..=total {
                    let kz = total as isize - kx as isize - ky as isize;
                    if kz >= 1 {
                        modes.push((total, [kx, ky, kz as usize], d));
                    }
                }
            }
        }
    }
    modes.sort_by_key(|m| m.0);
    let take = fourier.min(modes.len());
    let mut raw = Mat::<f64>::zeros(n1, take);
    for (j, &(_, k, d)) in modes.iter().take(take).enumerate() {
        for e in 0..n1 {
            let (dir, x) = complex.edge_midpoint(e);
            if dir != d {
                continue;
            }
            let mut v = 1.0;
            for a in 0..3 {
                v *= (k[a] as f64 * std::f64::consts::PI * x[a] / (shape[a] as f64 * h)).sin();
            }
            raw[(e, j)] = v;
        }
    }
    let ortho = gram_schmidt(complex.field_space(), &raw);
    TestFamily::with_random(complex.field_space().clone(), &ortho, random, seed)
}
