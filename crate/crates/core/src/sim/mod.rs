//! Monte-Carlo emulation of the classical outcomes of a network run and
//! parameter estimation on the simulated data.

pub mod confidence;
mod estimate;
mod io;

pub use estimate::{estimate, estimate_all, estimate_from_moments, EstimateReport, UserEstimate};
pub use io::{read_block, read_block_from, write_block, write_block_to, write_csv, FORMAT_VERSION, MAGIC};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{outcome_covariance, NetworkParams};

/// Symbols per shard; shard `s` draws from a generator seeded with `seed ^ s`.
pub const SHARD_SYMBOLS: u64 = 65_536;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcomes {
    pub y_x: Vec<f64>,
    pub y_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolBlock {
    pub n: u64,
    pub seed: u64,
    pub alice_x: Vec<f64>,
    pub alice_p: Vec<f64>,
    pub outcomes: Vec<UserOutcomes>,
    /// Parameters the block was generated from; absent after loading a file.
    pub params_truth: Option<NetworkParams>,
}

impl SymbolBlock {
    pub fn num_users(&self) -> usize {
        self.outcomes.len()
    }

    /// Raw second moments of `(s, y_1, …, y_M)` per quadrature.
    pub fn moments(&self) -> Moments {
        let m = self.num_users();
        let mut out = Moments::zeros(m);
        let mut row = DVector::zeros(m + 1);
        for i in 0..self.alice_x.len() {
            row[0] = self.alice_x[i];
            for (k, o) in self.outcomes.iter().enumerate() {
                row[k + 1] = o.y_x[i];
            }
            out.x.syger(1.0, &row, &row, 1.0);
            row[0] = self.alice_p[i];
            for (k, o) in self.outcomes.iter().enumerate() {
                row[k + 1] = o.y_p[i];
            }
            out.p.syger(1.0, &row, &row, 1.0);
        }
        out.fill_upper();
        out.n = self.n;
        out
    }
}

/// Sufficient statistics: sums of `v vᵀ` with `v = (s, y_1, …, y_M)`,
/// separately for the x and p quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub x: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl Moments {
    fn zeros(m: usize) -> Self {
        Self {
            n: 0,
            x: DMatrix::zeros(m + 1, m + 1),
            p: DMatrix::zeros(m + 1, m + 1),
        }
    }

    pub fn num_users(&self) -> usize {
        self.x.nrows() - 1
    }

    fn fill_upper(&mut self) {
        self.x.fill_upper_triangle_with_lower_triangle();
        self.p.fill_upper_triangle_with_lower_triangle();
    }

    fn add(mut self, other: &Moments) -> Self {
        self.n += other.n;
        self.x += &other.x;
        self.p += &other.p;
        self
    }

    /// Empirical covariance per quadrature, `x / n` and `p / n`.
    pub fn covariance(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n as f64;
        (&self.x / n, &self.p / n)
    }
}

/// Lower factor `L` with `L Lᵀ = c`; a semidefinite `c` (e.g. `V_M = 0`)
/// falls back to the eigen route.
fn sampling_factor(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = c.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(c.clone());
    let scale = c.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::Model(format!(
            "outcome covariance is not positive semidefinite:\n{c}"
        )));
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

fn shard_count(n: u64) -> u64 {
    n.div_ceil(SHARD_SYMBOLS)
}

fn shard_len(n: u64, s: u64) -> usize {
    (n - s * SHARD_SYMBOLS).min(SHARD_SYMBOLS) as usize
}

/// Draws the shard's symbols, handing each `(x, p)` pair of correlated
/// vectors to `sink`.
fn run_shard(
    factor: &DMatrix<f64>,
    seed: u64,
    shard: u64,
    len: usize,
    mut sink: impl FnMut(&DVector<f64>, &DVector<f64>),
) {
    let dim = factor.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ shard);
    let mut zx = DVector::zeros(dim);
    let mut zp = DVector::zeros(dim);
    let mut vx = DVector::zeros(dim);
    let mut vp = DVector::zeros(dim);
    for _ in 0..len {
        for z in zx.iter_mut().chain(zp.iter_mut()) {
            *z = rng.sample(StandardNormal);
        }
        vx.gemv(1.0, factor, &zx, 0.0);
        vp.gemv(1.0, factor, &zp, 0.0);
        sink(&vx, &vp);
    }
}

fn prepare(params: &NetworkParams, n: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Domain("simulation needs n >= 1".into()));
    }
    params.validate()?;
    sampling_factor(&outcome_covariance(params)?)
}

/// Samples `n` symbols with the exact joint outcome covariance, including
/// the correlations between users. Bit-identical for a given seed whatever
/// the number of worker threads.
pub fn simulate(params: &NetworkParams, n: u64, seed: u64) -> Result<SymbolBlock> {
    let factor = prepare(params, n)?;
    let m = params.num_users();
    let columns = 2 + 2 * m;
    let shards: Vec<Vec<Vec<f64>>> = (0..shard_count(n))
        .into_par_iter()
        .map(|s| {
            let len = shard_len(n, s);
            let mut cols = vec![Vec::with_capacity(len); columns];
            run_shard(&factor, seed, s, len, |vx, vp| {
                cols[0].push(vx[0]);
                cols[1].push(vp[0]);
                for k in 0..m {
                    cols[2 + 2 * k].push(vx[k + 1]);
                    cols[3 + 2 * k].push(vp[k + 1]);
                }
            });
            cols
        })
        .collect();
    let mut cols = vec![Vec::with_capacity(n as usize); columns];
    for shard in shards {
        for (dst, src) in cols.iter_mut().zip(shard) {
            dst.extend(src);
        }
    }
    let mut it = cols.into_iter();
    let alice_x = it.next().unwrap_or_default();
    let alice_p = it.next().unwrap_or_default();
    let mut outcomes = Vec::with_capacity(m);
    while let (Some(y_x), Some(y_p)) = (it.next(), it.next()) {
        outcomes.push(UserOutcomes { y_x, y_p });
    }
    Ok(SymbolBlock {
        n,
        seed,
        alice_x,
        alice_p,
        outcomes,
        params_truth: Some(params.clone()),
    })
}

/// The [`Moments`] of `simulate(params, n, seed)` without storing the
/// symbols.
pub fn simulate_moments(params: &NetworkParams, n: u64, seed: u64) -> Result<Moments> {
    let factor = prepare(params, n)?;
    let m = params.num_users();
    let parts: Vec<Moments> = (0..shard_count(n))
        .into_par_iter()
        .map(|s| {
            let len = shard_len(n, s);
            let mut acc = Moments::zeros(m);
            run_shard(&factor, seed, s, len, |vx, vp| {
                acc.x.syger(1.0, vx, vx, 1.0);
                acc.p.syger(1.0, vp, vp, 1.0);
            });
            acc.n = len as u64;
            acc
        })
        .collect();
    let mut total = parts.iter().fold(Moments::zeros(m), |a, b| a.add(b));
    total.fill_upper();
    Ok(total)
}
