#![allow(dead_code)]

use cvqn::{CovarianceMatrix, NetworkParams, UserLink};
use nalgebra::DMatrix;
use rand::Rng;

pub fn bundled() -> NetworkParams {
    let eta = [0.13, 0.12, 0.11, 0.10];
    let eps = [4.17e-3, 2.96e-3, 5.01e-3, 5.16e-3];
    let nel = [54e-3, 49.8e-3, 60.22e-3, 51.08e-3];
    NetworkParams {
        modulation_variance: 5.04,
        users: (0..4).map(|k| UserLink::new(eta[k], eps[k], nel[k])).collect(),
        detector_efficiency: 0.68,
        beta: 0.95,
        block_size: 1_250_000_000,
        eps_pe: 1e-10,
        splitter_consistency: true,
    }
}

pub fn uniform(m: usize, eta_total: f64, eps: f64, nel: f64) -> NetworkParams {
    NetworkParams {
        modulation_variance: 5.0,
        users: vec![UserLink::new(eta_total / m as f64, eps, nel); m],
        detector_efficiency: 0.68,
        beta: 0.95,
        block_size: 1_000_000_000,
        eps_pe: 1e-10,
        splitter_consistency: true,
    }
}

/// Random network whose links satisfy `Σ η ≤ 1`.
pub fn random_params<R: Rng>(rng: &mut R, m: usize) -> NetworkParams {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum::<f64>() / rng.random_range(0.05..1.0);
    w.iter_mut().for_each(|x| *x /= total);
    NetworkParams {
        modulation_variance: rng.random_range(0.5..20.0),
        users: w
            .iter()
            .map(|&eta| {
                UserLink::new(eta, rng.random_range(0.0..0.05), rng.random_range(0.0..0.1))
            })
            .collect(),
        detector_efficiency: rng.random_range(0.4..1.0),
        beta: rng.random_range(0.85..1.0),
        block_size: 10u64.pow(rng.random_range(7..12)),
        eps_pe: 1e-10,
        splitter_consistency: true,
    }
}

/// Orthogonal symplectic matrix of a beamsplitter with angle `theta`
/// between modes `i` and `j`, written out independently of the library.
pub fn bs(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    for q in 0..2 {
        m[(2 * i + q, 2 * i + q)] = c;
        m[(2 * i + q, 2 * j + q)] = s;
        m[(2 * j + q, 2 * i + q)] = -s;
        m[(2 * j + q, 2 * j + q)] = c;
    }
    m
}

pub fn squeezer(n: usize, i: usize, r: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m[(2 * i, 2 * i)] = r.exp();
    m[(2 * i + 1, 2 * i + 1)] = (-r).exp();
    m
}

pub fn rotation(n: usize, i: usize, phi: f64) -> DMatrix<f64> {
    let (s, c) = phi.sin_cos();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m[(2 * i, 2 * i)] = c;
    m[(2 * i, 2 * i + 1)] = -s;
    m[(2 * i + 1, 2 * i)] = s;
    m[(2 * i + 1, 2 * i + 1)] = c;
    m
}

pub fn random_symplectic<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for _ in 0..3 * n {
        let i = rng.random_range(0..n);
        s = rotation(n, i, rng.random_range(0.0..6.3)) * s;
        s = squeezer(n, i, rng.random_range(-1.0..1.0)) * s;
        if n > 1 {
            let j = (i + rng.random_range(1..n)) % n;
            s = bs(n, i, j, rng.random_range(0.0..1.6)) * s;
        }
    }
    s
}

/// `S diag(ν) Sᵀ` with thermal `ν_i ≥ 1`; also returns the `ν_i`.
pub fn random_physical<R: Rng>(rng: &mut R, n: usize, pure: bool) -> (CovarianceMatrix, Vec<f64>) {
    let nu: Vec<f64> = (0..n)
        .map(|_| if pure { 1.0 } else { rng.random_range(1.0..6.0) })
        .collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        2 * n,
        nu.iter().flat_map(|&v| [v, v]),
    ));
    let s = random_symplectic(rng, n);
    let g = &s * d * s.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let labels: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
    (CovarianceMatrix::new(g, labels).unwrap(), nu)
}
