//! Reference constructions that do not go through the library's own
//! Gaussian operations, for cross-checking it.

use cvqn::{CovarianceMatrix, NetworkParams, UserLink};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Two-mode rotation by `theta` between modes `i` and `j` (both quadratures).
pub fn beamsplitter(n: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
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
            s = beamsplitter(n, i, j, rng.random_range(0.0..1.6)) * s;
        }
    }
    s
}

/// `S diag(ν) Sᵀ` for random symplectic `S`; `ν = 1` everywhere when `pure`.
pub fn random_physical<R: Rng>(rng: &mut R, n: usize, pure: bool) -> CovarianceMatrix {
    let nu = DVector::from_iterator(
        2 * n,
        (0..n).flat_map(|_| {
            let v = if pure { 1.0 } else { rng.random_range(1.0..6.0) };
            [v, v]
        }),
    );
    let s = random_symplectic(rng, n);
    let g = &s * DMatrix::from_diagonal(&nu) * s.transpose();
    let g = (&g + g.transpose()) * 0.5;
    CovarianceMatrix::new(g, (0..n).map(|i| format!("m{i}")).collect()).unwrap()
}

/// Random network with `Σ η ≤ 1`.
pub fn random_network<R: Rng>(rng: &mut R, m: usize) -> NetworkParams {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum::<f64>() / rng.random_range(0.05..1.0);
    w.iter_mut().for_each(|x| *x /= total);
    NetworkParams {
        modulation_variance: rng.random_range(0.5..20.0),
        users: w
            .iter()
            .map(|&eta| UserLink::new(eta, rng.random_range(0.0..0.05), rng.random_range(0.0..0.1)))
            .collect(),
        detector_efficiency: rng.random_range(0.4..1.0),
        beta: rng.random_range(0.85..1.0),
        block_size: 10u64.pow(rng.random_range(7..12)),
        eps_pe: 1e-10,
        splitter_consistency: true,
    }
}

/// Orthogonal matrix whose first column is `v / |v|`.
fn householder_completion(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let mut w = v / v.norm();
    w[0] -= 1.0;
    if w.norm() < 1e-15 {
        return DMatrix::identity(n, n);
    }
    let w = &w / w.norm();
    DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
}

/// Covariance of `(A, B_1, …, B_M)` built by explicit composition: EPR
/// source, fiber loss against an environment vacuum, lossless 1:M splitter
/// with `M − 1` vacua, then per-branch excess noise.
pub fn composed_network_cm(params: &NetworkParams) -> DMatrix<f64> {
    let m = params.num_users();
    let modes = m + 2;
    let dim = 2 * modes;
    let v = params.modulation_variance + 1.0;
    let c = (v * v - 1.0).sqrt();
    let mut g = DMatrix::identity(dim, dim);
    for i in 0..4 {
        g[(i, i)] = v;
    }
    g[(0, 2)] = c;
    g[(2, 0)] = c;
    g[(1, 3)] = -c;
    g[(3, 1)] = -c;

    let eta_f: f64 = params.users.iter().map(|u| u.transmittance).sum();
    let fiber = beamsplitter(modes, 1, modes - 1, eta_f.sqrt().acos());
    let g = &fiber * g * fiber.transpose();

    let ratios = DVector::from_iterator(m, params.users.iter().map(|u| (u.transmittance / eta_f).sqrt()));
    let o = householder_completion(&ratios);
    let mut s = DMatrix::identity(dim, dim);
    for k in 0..m {
        for j in 0..m {
            for q in 0..2 {
                s[(2 * (1 + k) + q, 2 * (1 + j) + q)] = o[(k, j)];
            }
        }
    }
    let mut g = &s * g * s.transpose();
    for (k, u) in params.users.iter().enumerate() {
        g[(2 * (1 + k), 2 * (1 + k))] += u.excess_noise;
        g[(2 * (1 + k) + 1, 2 * (1 + k) + 1)] += u.excess_noise;
    }
    let keep: Vec<usize> = (0..2 * (m + 1)).collect();
    g.select_rows(&keep).select_columns(&keep)
}
