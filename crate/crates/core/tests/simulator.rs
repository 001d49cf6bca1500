mod common;

use cvqn::network::outcome_covariance;
use cvqn::sim::confidence::{confidence_region_with_z, Calibration};
use cvqn::sim::{estimate, estimate_all, estimate_from_moments, simulate, simulate_moments};
use cvqn::{key_rate, NetworkParams, RateMode, TrustModel};

fn calibration(p: &NetworkParams, k: usize) -> Calibration {
    Calibration {
        modulation_variance: p.modulation_variance,
        detector_efficiency: p.detector_efficiency,
        electronic_noise: p.users[k].trusted_noise,
    }
}

fn noises(p: &NetworkParams) -> Vec<f64> {
    p.users.iter().map(|u| u.trusted_noise).collect()
}

#[test]
fn empirical_covariance_within_five_sigma() {
    let p = common::bundled();
    let n = 10_000_000;
    let c = outcome_covariance(&p).unwrap();
    let moments = simulate_moments(&p, n, 2024).unwrap();
    let (cx, cp) = moments.covariance();
    for emp in [cx, cp] {
        for i in 0..5 {
            for j in 0..5 {
                let sd = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / n as f64).sqrt();
                let dev = (emp[(i, j)] - c[(i, j)]).abs();
                assert!(dev < 5.0 * sd, "entry ({i},{j}): {} vs {}", emp[(i, j)], c[(i, j)]);
            }
        }
    }
}

#[test]
fn blocks_do_not_depend_on_thread_count() {
    let p = common::bundled();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&p, 300_001, 77).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.alice_x.iter().zip(&b.alice_x).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a, b);
}

#[test]
fn silent_alice_gives_model_noise() {
    let mut p = common::bundled();
    p.modulation_variance = 0.0;
    let c = outcome_covariance(&p).unwrap();
    let m = simulate_moments(&p, 1_000_000, 1).unwrap();
    let (cx, _) = m.covariance();
    assert_eq!(cx[(0, 0)], 0.0);
    for k in 1..=4 {
        let sd = c[(k, k)] * (2.0 / 1e6f64).sqrt();
        assert!((cx[(k, k)] - c[(k, k)]).abs() < 5.0 * sd);
    }
}

#[test]
fn relaxed_intervals_cover_the_truth() {
    let p = common::bundled();
    let mut misses = 0;
    for seed in 0..100 {
        let m = simulate_moments(&p, 100_000, seed).unwrap();
        for k in 0..4 {
            let cal = calibration(&p, k);
            let e = estimate_from_moments(&m, k, 1e-10, &cal).unwrap();
            let r = confidence_region_with_z(e.gain, e.sigma2, m.n, 3.0, &cal).unwrap();
            let eta = p.users[k].transmittance;
            let eps = p.users[k].excess_noise;
            if !(r.transmittance.0 <= eta && eta <= r.transmittance.1) {
                misses += 1;
            }
            if !(r.excess_noise.0 <= eps && eps <= r.excess_noise.1) {
                misses += 1;
            }
        }
    }
    // 800 intervals at 3σ: the normal model expects about 2 misses
    assert!(misses <= 8, "{misses} misses");
}

#[test]
fn estimated_rates_converge_to_truth() {
    let p = common::bundled();
    let truth = key_rate(&p, TrustModel::Trusted, 0, RateMode::Asymptotic).unwrap().raw_rate;
    let mut gaps = Vec::new();
    for (i, n) in [100_000u64, 1_000_000, 10_000_000].into_iter().enumerate() {
        let mut gap = 0.0;
        for seed in 0..4 {
            let m = simulate_moments(&p, n, 1000 * i as u64 + seed).unwrap();
            let report = estimate_all(&m, p.modulation_variance, p.detector_efficiency, &noises(&p), 1e-10)
                .unwrap();
            let est = report.apply_to(&p).unwrap();
            let worst = key_rate(&est, TrustModel::Trusted, 0, RateMode::Finite).unwrap();
            let ml = key_rate(&est, TrustModel::Trusted, 0, RateMode::Asymptotic).unwrap();
            assert!(worst.raw_rate <= ml.raw_rate);
            gap += (truth - worst.raw_rate).abs();
        }
        gaps.push(gap / 4.0);
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn block_estimate_matches_streamed_estimate() {
    let p = common::bundled();
    let block = simulate(&p, 200_000, 5).unwrap();
    let m = simulate_moments(&p, 200_000, 5).unwrap();
    let cal = calibration(&p, 2);
    let a = estimate(&block, 2, 1e-10, &cal).unwrap();
    let b = estimate_from_moments(&m, 2, 1e-10, &cal).unwrap();
    assert!((a.gain - b.gain).abs() < 1e-12);
    assert!((a.sigma2 - b.sigma2).abs() < 1e-12);
    assert!(a.region.worst_case.transmittance <= a.transmittance);
    assert!(a.region.worst_case.excess_noise >= a.excess_noise);
}

#[test]
fn zero_excess_noise_estimate_is_centred() {
    let mut p = common::bundled();
    for u in &mut p.users {
        u.excess_noise = 0.0;
    }
    let mut sum = 0.0;
    let mut negatives = 0;
    for seed in 0..20 {
        let m = simulate_moments(&p, 200_000, seed).unwrap();
        let e = estimate_from_moments(&m, 0, 1e-10, &calibration(&p, 0)).unwrap();
        sum += e.excess_noise;
        negatives += e.negative_excess_noise as usize;
        assert_eq!(e.negative_excess_noise, e.excess_noise < 0.0);
    }
    assert!((sum / 20.0).abs() < 3e-3);
    assert!(negatives > 0 && negatives < 20);
}
