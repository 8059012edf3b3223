//! Channel sampler statistics and serialization round trips.

use ris_core::*;

#[test]
fn entries_follow_uniform_law() {
    let dims = Dimensions::new(40, 100, 80, 80).unwrap();
    let mut rng = Rng::new(2024);
    let (mut count, mut sum_re, mut sum_sq, mut max_abs) = (0usize, 0.0, 0.0, 0.0f64);
    while count < 1_000_000 {
        let m = generate_channels(dims, &mut rng, 1e-5, true).unwrap();
        let mats = [
            &m.h_ar,
            &m.h_rb,
            &m.h_re,
            m.h_ab.as_ref().unwrap(),
            m.h_ae.as_ref().unwrap(),
        ];
        for z in mats.iter().flat_map(|x| x.iter()) {
            sum_re += z.re;
            sum_sq += z.re * z.re;
            max_abs = max_abs.max(z.re.abs()).max(z.im.abs());
            count += 1;
        }
    }
    let n = count as f64;
    let mean = sum_re / n;
    let var = sum_sq / n - mean * mean;
    assert!(mean.abs() <= 1e-3, "mean {mean}");
    assert!(max_abs <= 0.1);
    // Uniform on [-a, a] has variance a²/3.
    assert!((var - 0.01 / 3.0).abs() <= 0.02 * 0.01 / 3.0, "variance {var}");
}

#[test]
fn protocol_model_has_scaled_identity_noise() {
    let m = generate_channels(Dimensions::protocol(10, 36).unwrap(), &mut Rng::new(1), 1e-5, false).unwrap();
    assert_eq!((m.dims.n_b, m.dims.n_e), (20, 20));
    for s in [&m.sigma_b, &m.sigma_e] {
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { 1e-5 } else { 0.0 };
                assert_eq!(s[(i, j)].re, want);
                assert_eq!(s[(i, j)].im, 0.0);
            }
        }
    }
    assert!(validate_model(&m).is_empty());
}

#[test]
fn same_seed_same_bytes() {
    let dims = Dimensions::protocol(3, 7).unwrap();
    let a = generate_channels(dims, &mut Rng::new(99), 1e-5, true).unwrap();
    let b = generate_channels(dims, &mut Rng::new(99), 1e-5, true).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let back = SystemModel::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn leading_submodel_is_nested() {
    let m = generate_channels(Dimensions::protocol(4, 12).unwrap(), &mut Rng::new(5), 1e-5, false).unwrap();
    let s = m.leading_submodel(5).unwrap();
    assert_eq!(s.dims.r, 5);
    assert_eq!(s.h_ar, m.h_ar.rows(0, 5).into_owned());
    assert_eq!(s.h_rb, m.h_rb.columns(0, 5).into_owned());
    assert_eq!(s.h_re, m.h_re.columns(0, 5).into_owned());
    assert!(m.leading_submodel(13).is_err());
}

#[test]
fn diagnostics_flag_broken_models() {
    let mut m = generate_channels(Dimensions::protocol(2, 3).unwrap(), &mut Rng::new(6), 1e-5, false).unwrap();
    m.sigma_b[(0, 0)] = nalgebra::Complex::new(0.0, 0.0);
    assert!(validate_model(&m).iter().any(|i| i.to_string().contains("definite")));
    let mut m = generate_channels(Dimensions::protocol(2, 3).unwrap(), &mut Rng::new(6), 1e-5, false).unwrap();
    m.h_ab = Some(CMatrix::zeros(4, 2));
    assert!(!validate_model(&m).is_empty());
}
