//! Monte Carlo checks of the maximum-likelihood estimator.

use nalgebra::Complex;
use ris_core::estimation::*;
use ris_core::*;

fn setup(k: usize, r: usize, n: usize, seed: u64) -> (SystemModel, RisProfile, PowerAllocation) {
    let dims = Dimensions::new(k, r, n, n).unwrap();
    let m = generate_channels(dims, &mut Rng::new(seed), 1e-5, false).unwrap();
    let omega = RisProfile::random_phases(r, &mut Rng::new(seed ^ 0xFF));
    (m, omega, PowerAllocation::equal(k, 30.0).unwrap())
}

#[test]
fn covariance_matches_inverse_fim() {
    let (m, omega, p) = setup(2, 4, 4, 1);
    let solver = MleSolver::new(&m, &omega, &p, Receiver::Bob).unwrap();
    let crlb = solver.crlb();
    let theta = default_theta(2, 7);
    let trials = 10_000;
    let root = Rng::new(8);
    let mut errs = Vec::with_capacity(trials);
    for t in 0..trials {
        let y = solver.observe(&theta, &mut root.substream(&[t as u64]));
        errs.push(solver.estimate(&y).unwrap() - &theta);
    }
    let nt = trials as f64;
    // Mean: unbiasedness, per real coordinate.
    for i in 0..2 {
        for part in [|z: Complex<f64>| z.re, |z: Complex<f64>| z.im] {
            let xs: Vec<f64> = errs.iter().map(|e| part(e[i])).collect();
            let mean = xs.iter().sum::<f64>() / nt;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nt - 1.0);
            assert!(mean.abs() <= 3.0 * (var / nt).sqrt(), "bias in component {i}");
        }
    }
    // Second moment E[e e^H] against the CRLB, entrywise.
    for i in 0..2 {
        for j in 0..2 {
            for part in [|z: Complex<f64>| z.re, |z: Complex<f64>| z.im] {
                let xs: Vec<f64> = errs.iter().map(|e| part(e[i] * e[j].conj())).collect();
                let mean = xs.iter().sum::<f64>() / nt;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nt - 1.0);
                let target = part(crlb[(i, j)]);
                assert!(
                    (mean - target).abs() <= 3.0 * (var / nt).sqrt() + 1e-12 * crlb.norm(),
                    "entry ({i},{j}): {mean} vs {target}"
                );
            }
        }
    }
}

#[test]
fn identity_model_returns_observation() {
    let one = CMatrix::identity(2, 2);
    let m = SystemModel {
        dims: Dimensions::new(2, 2, 2, 2).unwrap(),
        h_ar: one.clone(),
        h_rb: one.clone(),
        h_re: one.clone(),
        sigma_b: one.clone(),
        sigma_e: one.clone(),
        h_ab: None,
        h_ae: None,
    };
    let p = PowerAllocation::new(vec![1.0, 1.0], 2.0).unwrap();
    let y = CVector::from_vec(vec![Complex::new(0.3, -1.0), Complex::new(2.0, 0.5)]);
    let est = mle(&m, &RisProfile::ones(2), &p, &y, Receiver::Bob).unwrap();
    assert!((est - y).norm() < 1e-14);
}

#[test]
fn efficiency_over_many_setups() {
    for seed in 0..6 {
        let (m, omega, p) = setup(3, 6, 6, 100 + seed);
        let r = monte_carlo_mse(
            &m,
            &omega,
            &p,
            Receiver::Bob,
            &default_theta(3, seed),
            2000,
            &Rng::new(seed),
        )
        .unwrap();
        assert!(r.efficiency_z().abs() <= 5.0, "seed {seed}: z = {}", r.efficiency_z());
        assert_eq!(r.trials, 2000);
        assert_eq!(r.active_count, 3);
    }
}

#[test]
fn report_is_independent_of_theta() {
    // The estimation error does not depend on θ, so with shared noise the
    // reports agree up to round-off.
    let (m, omega, p) = setup(2, 5, 4, 3);
    let a = monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &default_theta(2, 1), 300, &Rng::new(4)).unwrap();
    let b = monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &default_theta(2, 2), 300, &Rng::new(4)).unwrap();
    assert!((a.avg_mse - b.avg_mse).abs() <= 1e-6 * a.avg_mse);
    assert_eq!(a.crlb_trace, b.crlb_trace);
}

#[test]
fn reports_are_reproducible() {
    let (m, omega, p) = setup(2, 5, 4, 5);
    let th = default_theta(2, 0);
    let a = monte_carlo_mse(&m, &omega, &p, Receiver::Eve, &th, 100, &Rng::new(6)).unwrap();
    let b = monte_carlo_mse(&m, &omega, &p, Receiver::Eve, &th, 100, &Rng::new(6)).unwrap();
    assert_eq!(a, b);
}
