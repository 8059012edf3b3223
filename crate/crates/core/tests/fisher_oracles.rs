//! Fisher-information identities checked against direct evaluation.

use nalgebra::{Complex, DMatrix};
use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
use ris_core::fisher::*;
use ris_core::*;

type C64 = Complex<f64>;

fn random_model(rng: &mut Rng, k: usize, r: usize, los: bool) -> SystemModel {
    generate_channels(Dimensions::protocol(k, r).unwrap(), rng, 1e-5, los).unwrap()
}

fn random_power(rng: &mut Rng, k: usize, budget: f64) -> PowerAllocation {
    let raw: Vec<f64> = (0..k).map(|_| rng.uniform_in(0.05, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    PowerAllocation::new(raw.iter().map(|v| v * budget / s).collect(), budget).unwrap()
}

fn bounded_profile(rng: &mut Rng, r: usize) -> RisProfile {
    let w = CVector::from_fn(r, |_, _| rng.unit_phase() * rng.uniform());
    RisProfile::new(w, Regime::BoundedMagnitude).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn decomposition_matches_direct_trace() {
    let mut rng = Rng::new(21);
    for inst in 0..120 {
        let k = 1 + (inst % 6);
        let r = 1 + (inst * 7 % 12);
        let los = inst % 3 == 0;
        let m = random_model(&mut rng, k, r, los);
        let p = random_power(&mut rng, k, 30.0);
        let forms = build_quadratic_forms(&m, &p).unwrap();
        assert_eq!(forms.has_los(), los);
        for _ in 0..5 {
            let omegas = [RisProfile::random_phases(r, &mut rng), bounded_profile(&mut rng, r)];
            for omega in &omegas {
                for who in [Receiver::Bob, Receiver::Eve] {
                    let direct = fim_trace(&m, omega, &p, who).unwrap();
                    assert!(rel(forms.value(who, &omega.omega), direct) <= 1e-10, "instance {inst}");
                }
            }
        }
    }
}

#[test]
fn los_constant_and_linear_terms() {
    let mut rng = Rng::new(5);
    let m = random_model(&mut rng, 3, 5, true);
    let p = random_power(&mut rng, 3, 10.0);
    let forms = build_quadratic_forms(&m, &p).unwrap();
    let (_, qt, c) = forms.parts(Receiver::Bob);
    let qt = qt.unwrap();

    // ω = 0 leaves only the direct path.
    let zero = RisProfile::new(CVector::zeros(5), Regime::BoundedMagnitude).unwrap();
    let direct_only = fim_trace(&m, &zero, &p, Receiver::Bob).unwrap();
    assert!(rel(c, direct_only) <= 1e-12);

    // The cross term is odd in ω; the quadratic term is even.
    let omega = RisProfile::random_phases(5, &mut rng);
    let neg = RisProfile::new(-omega.omega.clone(), Regime::UnitModulus).unwrap();
    let plus = fim_trace(&m, &omega, &p, Receiver::Bob).unwrap();
    let minus = fim_trace(&m, &neg, &p, Receiver::Bob).unwrap();
    let cross = 2.0 * omega.omega.dot(qt).re;
    assert!(rel(0.5 * (plus - minus), cross) <= 1e-9);
}

#[test]
fn diagonal_forms_match_assembled_matrix() {
    let mut rng = Rng::new(8);
    for los in [false, true] {
        let m = random_model(&mut rng, 4, 6, los);
        let omega = RisProfile::random_phases(6, &mut rng);
        let d = build_diagonal_forms(&m, &omega).unwrap();
        for (who, diag) in [(Receiver::Bob, &d.alpha), (Receiver::Eve, &d.beta)] {
            let (h_r, sigma, h_a) = match who {
                Receiver::Bob => (&m.h_rb, &m.sigma_b, m.h_ab.as_ref()),
                Receiver::Eve => (&m.h_re, &m.sigma_e, m.h_ae.as_ref()),
            };
            let sinv = sigma.clone().try_inverse().unwrap();
            let refl = h_r * CMatrix::from_diagonal(&omega.omega) * &m.h_ar;
            let mut a = refl.adjoint() * &sinv * &refl;
            if let Some(h_a) = h_a {
                a += refl.adjoint() * &sinv * h_a + h_a.adjoint() * &sinv * &refl + h_a.adjoint() * &sinv * h_a;
            }
            for i in 0..4 {
                assert!(a[(i, i)].im.abs() <= 1e-9 * a[(i, i)].re);
                assert!(rel(diag[i], a[(i, i)].re) <= 1e-12);
                assert!(diag[i] >= 0.0);
            }
            let p = random_power(&mut rng, 4, 7.0);
            let lin: f64 = diag.iter().zip(&p.p).map(|(x, y)| x * y).sum();
            assert!(rel(lin, fim_trace(&m, &omega, &p, who).unwrap()) <= 1e-10);
        }
    }
}

#[test]
fn selector_matrices_sum_to_effective_channel() {
    let mut rng = Rng::new(9);
    let m = random_model(&mut rng, 2, 3, false);
    let p = random_power(&mut rng, 2, 3.0);
    let omega = RisProfile::random_phases(3, &mut rng);
    for who in [Receiver::Bob, Receiver::Eve] {
        let mut sum = CMatrix::zeros(4, 2);
        for j in 0..3 {
            let s = build_s(&m, &p, who, j).unwrap();
            let sv = s.clone().singular_values();
            assert!(sv[1] <= 1e-12 * sv[0]);
            sum += s * omega.omega[j];
        }
        let h = effective_channel(&m, &omega, &p, who).unwrap();
        assert!((sum - h).norm() <= 1e-14 * 1.0f64.max(sum_norm(&m)));
    }
    assert!(build_s(&m, &p, Receiver::Bob, 3).is_err());
}

fn sum_norm(m: &SystemModel) -> f64 {
    m.h_ar.norm() * m.h_rb.norm()
}

#[test]
fn quadratic_form_entries_follow_selector_traces() {
    let mut rng = Rng::new(10);
    let m = random_model(&mut rng, 3, 4, false);
    let p = random_power(&mut rng, 3, 5.0);
    let forms = build_quadratic_forms(&m, &p).unwrap();
    let sinv = m.sigma_b.clone().try_inverse().unwrap();
    let s: Vec<CMatrix> = (0..4).map(|j| build_s(&m, &p, Receiver::Bob, j).unwrap()).collect();
    let scale = forms.q_b.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    for j in 0..4 {
        for l in 0..4 {
            let e = (s[j].adjoint() * &sinv * &s[l]).trace();
            assert!((forms.q_b[(j, l)] - e).norm() <= 1e-12 * scale);
        }
    }
    let asym = (&forms.q_b - forms.q_b.adjoint())
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    assert!(asym <= 1e-12 * scale);
    assert!(forms.q_b.clone().symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn mixture_averages_component_traces() {
    let mut rng = Rng::new(12);
    let m = random_model(&mut rng, 3, 5, false);
    let other = random_model(&mut rng, 3, 5, false);
    let mut m2 = m.clone();
    m2.h_re = other.h_re.clone();
    let p = random_power(&mut rng, 3, 30.0);
    let mix = EavesdropperMixture::new(vec![(eve_gram(&m).unwrap(), 0.3), (eve_gram(&m2).unwrap(), 0.7)]).unwrap();
    let q = average_eavesdropper_q(&m, &p, &mix).unwrap();
    for _ in 0..20 {
        let omega = RisProfile::random_phases(5, &mut rng);
        let t1 = fim_trace(&m, &omega, &p, Receiver::Eve).unwrap();
        let t2 = fim_trace(&m2, &omega, &p, Receiver::Eve).unwrap();
        let v = omega.omega.dotc(&(&q * &omega.omega)).re;
        assert!(rel(v, 0.3 * t1 + 0.7 * t2) <= 1e-10);
    }
    let point = average_eavesdropper_q(&m, &p, &EavesdropperMixture::point_mass(&m).unwrap()).unwrap();
    let forms = build_quadratic_forms(&m, &p).unwrap();
    assert!((point - &forms.q_e).norm() <= 1e-12 * forms.q_e.norm());
    let e = eve_gram(&m).unwrap();
    let twin = EavesdropperMixture::new(vec![(e.clone(), 0.5), (e, 0.5)]).unwrap();
    let q_twin = average_eavesdropper_q(&m, &p, &twin).unwrap();
    assert!((q_twin - &forms.q_e).norm() <= 1e-12 * forms.q_e.norm());
    assert!(EavesdropperMixture::new(vec![]).is_err());
}

#[test]
fn remark_bracket_contains_random_profiles() {
    let mut rng = Rng::new(13);
    let m = random_model(&mut rng, 4, 7, false);
    let p = random_power(&mut rng, 4, 30.0);
    let forms = build_quadratic_forms(&m, &p).unwrap();
    let (lo, hi) = eigenvalue_bounds(&forms.q_b);
    for _ in 0..1000 {
        let w = RisProfile::random_phases(7, &mut rng).omega;
        let v = forms.bob(&w);
        assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
    }
    let (a, b) = eigenvalue_bounds(&CMatrix::identity(5, 5));
    assert!((a - 5.0).abs() < 1e-12 && (b - 5.0).abs() < 1e-12);
    let v = CVector::from_fn(4, |_, _| rng.complex_normal(1.0));
    let v = &v / Complex::new(v.norm(), 0.0);
    let (a, b) = eigenvalue_bounds(&(&v * v.adjoint()));
    assert!(a.abs() < 1e-12 && (b - 4.0).abs() < 1e-12);
}

#[test]
fn scalar_identity_case() {
    let one = CMatrix::from_element(1, 1, Complex::new(1.0, 0.0));
    let m = SystemModel {
        dims: Dimensions::new(1, 1, 1, 1).unwrap(),
        h_ar: one.clone(),
        h_rb: one.clone(),
        h_re: one.clone(),
        sigma_b: one.clone() * Complex::new(1e-5, 0.0),
        sigma_e: one.clone(),
        h_ab: None,
        h_ae: None,
    };
    let p = PowerAllocation::new(vec![1.0], 1.0).unwrap();
    let t = fim_trace(&m, &RisProfile::ones(1), &p, Receiver::Bob).unwrap();
    assert!(rel(t, 1e5) <= 1e-12);
    let (f, g) = fim_blocks(&m, &RisProfile::ones(1), &p, Receiver::Eve).unwrap();
    assert!((f[(0, 0)].re - 1.0).abs() < 1e-15 && (g[(0, 0)].re - 1.0).abs() < 1e-15);
    let zero = PowerAllocation::new(vec![0.0], 1.0).unwrap();
    assert_eq!(fim_trace(&m, &RisProfile::ones(1), &zero, Receiver::Bob).unwrap(), 0.0);
}

/// Scalar log-likelihood `-(y - Hθ)^H Σ^{-1} (y - Hθ)` up to constants.
fn log_lik(h: &CMatrix, sinv: &CMatrix, y: &CVector, theta: &CVector) -> f64 {
    let e = y - h * theta;
    -e.dotc(&(sinv * &e)).re
}

/// `∂ℓ/∂θ*` by central differences in the real and imaginary parts.
fn numeric_score(h: &CMatrix, sinv: &CMatrix, y: &CVector, theta: &CVector, step: f64) -> CVector {
    CVector::from_fn(theta.len(), |i, _| {
        let d = |dz: C64| {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += dz;
            tm[i] -= dz;
            (log_lik(h, sinv, y, &tp) - log_lik(h, sinv, y, &tm)) / (2.0 * step)
        };
        let dx = d(Complex::new(step, 0.0));
        let dy = d(Complex::new(0.0, step));
        Complex::new(0.5 * dx, 0.5 * dy)
    })
}

/// Runs the score outer-product Monte Carlo and checks every real
/// coordinate of `E[s s^H]` against `block` and of `E[s s^T]` against zero,
/// within three standard errors.
fn score_oracle(m: &SystemModel, omega: &RisProfile, p: &PowerAllocation, draws: usize, seed: u64) {
    let h = effective_channel(m, omega, p, Receiver::Bob).unwrap();
    let sigma = &m.sigma_b;
    let sinv = sigma.clone().try_inverse().unwrap();
    let l = sigma.clone().cholesky().unwrap().l();
    let (block, conj) = fim_blocks(m, omega, p, Receiver::Bob).unwrap();
    let k = h.ncols();
    let n = h.nrows();
    let theta = CVector::from_fn(k, |i, _| Complex::new(0.3 + i as f64, -0.2));
    let mut rng = Rng::new(seed);
    let coords = 4 * k * k;
    let mut sum = vec![0.0; coords];
    let mut sum_sq = vec![0.0; coords];
    for _ in 0..draws {
        let z = CVector::from_fn(n, |_, _| rng.complex_normal(1.0));
        let y = &h * &theta + &l * z;
        let s = numeric_score(&h, &sinv, &y, &theta, 1e-3);
        let outer = &s * s.adjoint();
        let pseudo = &s * s.transpose();
        let mut idx = 0;
        for mat in [&outer, &pseudo] {
            for z in mat.iter() {
                for v in [z.re, z.im] {
                    sum[idx] += v;
                    sum_sq[idx] += v * v;
                    idx += 1;
                }
            }
        }
    }
    let nd = draws as f64;
    let zero = DMatrix::<C64>::zeros(k, k);
    let mut idx = 0;
    for target in [&block, &zero] {
        for z in target.iter() {
            for v in [z.re, z.im] {
                let mean = sum[idx] / nd;
                let var = (sum_sq[idx] / nd - mean * mean).max(0.0) * nd / (nd - 1.0);
                let se = (var / nd).sqrt();
                assert!(
                    (mean - v).abs() <= 3.0 * se + 1e-12,
                    "coordinate {idx}: {mean} vs {v} (se {se})"
                );
                idx += 1;
            }
        }
    }
    assert!((conj - block.map(|z| z.conj())).norm() == 0.0);
}

#[test]
fn score_outer_product_matches_block_real_covariance() {
    let mut rng = Rng::new(30);
    let mut m = generate_channels(Dimensions::new(2, 3, 3, 3).unwrap(), &mut rng, 1.0, false).unwrap();
    m.h_ar *= Complex::new(10.0, 0.0);
    m.h_rb *= Complex::new(10.0, 0.0);
    let p = random_power(&mut rng, 2, 2.0);
    let omega = RisProfile::random_phases(3, &mut rng);
    score_oracle(&m, &omega, &p, 100_000, 31);
}

#[test]
fn score_outer_product_matches_block_complex_covariance() {
    // With a genuinely complex Σ the score covariance is H^H Σ^{-1} H, not
    // H^H Σ^{-*} H; the Monte Carlo decides between the two.
    let mut rng = Rng::new(40);
    let mut m = generate_channels(Dimensions::new(2, 2, 2, 2).unwrap(), &mut rng, 1.0, false).unwrap();
    m.h_ar *= Complex::new(10.0, 0.0);
    m.h_rb *= Complex::new(10.0, 0.0);
    m.sigma_b = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 0.8),
            Complex::new(0.0, -0.8),
            Complex::new(1.0, 0.0),
        ],
    );
    let p = PowerAllocation::new(vec![1.0, 1.0], 2.0).unwrap();
    let omega = RisProfile::random_phases(2, &mut rng);
    score_oracle(&m, &omega, &p, 100_000, 41);

    let h = effective_channel(&m, &omega, &p, Receiver::Bob).unwrap();
    let sinv = m.sigma_b.clone().try_inverse().unwrap();
    let right = (h.adjoint() * &sinv * &h).trace().re;
    let conj_form = (h.adjoint() * sinv.map(|z| z.conj()) * &h).trace().re;
    assert!(rel(right, fim_trace(&m, &omega, &p, Receiver::Bob).unwrap()) <= 1e-12);
    assert!(rel(conj_form, right) > 1e-3);
}

#[test]
fn conjugation_identity_for_real_covariance() {
    let mut rng = Rng::new(50);
    for _ in 0..20 {
        let m = random_model(&mut rng, 3, 4, false);
        let p = random_power(&mut rng, 3, 30.0);
        let omega = RisProfile::random_phases(4, &mut rng);
        let h = effective_channel(&m, &omega, &p, Receiver::Bob).unwrap();
        let sinv = m.sigma_b.clone().try_inverse().unwrap();
        let a = (h.adjoint() * sinv.map(|z| z.conj()) * &h).trace().re;
        let b = (h.transpose() * &sinv * h.map(|z| z.conj())).trace().re;
        let c = fim_trace(&m, &omega, &p, Receiver::Bob).unwrap();
        assert!(rel(a, c) <= 1e-12 && rel(b, c) <= 1e-12);
    }
}

#[test]
fn degenerate_power_rejected_by_definiteness_check() {
    let mut rng = Rng::new(60);
    let m = random_model(&mut rng, 2, 3, false);
    let p = PowerAllocation::new(vec![0.0, 0.0], 1.0).unwrap();
    assert!(matches!(
        build_quadratic_forms(&m, &p),
        Err(CoreError::NotPositiveDefinite { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn global_phase_leaves_objective_unchanged(seed in any::<u64>(), psi in 0.0f64..std::f64::consts::TAU) {
        let mut rng = Rng::new(seed);
        let m = random_model(&mut rng, 2, 4, false);
        let p = random_power(&mut rng, 2, 30.0);
        let forms = build_quadratic_forms(&m, &p).unwrap();
        let w = RisProfile::random_phases(4, &mut rng).omega;
        let rotated = &w * Complex::from_polar(1.0, psi);
        prop_assert!(rel(forms.bob(&rotated), forms.bob(&w)) <= 1e-12);
        prop_assert!(rel(forms.eve(&rotated), forms.eve(&w)) <= 1e-12);
    }

    #[test]
    fn trace_is_nonnegative(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_model(&mut rng, 2, 3, seed % 2 == 0);
        let p = random_power(&mut rng, 2, 1.0);
        let omega = bounded_profile(&mut rng, 3);
        prop_assert!(fim_trace(&m, &omega, &p, Receiver::Eve).unwrap() >= 0.0);
    }
}
