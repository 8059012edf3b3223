//! Real symmetric embedding of Hermitian matrices.
//!
//! A Hermitian `M = A + iB` maps to the real symmetric
//!
//! ```text
//! [ A  -B ]
//! [ B   A ]
//! ```
//!
//! The map is a `*`-homomorphism up to scaling: `tr(emb(M) emb(N)) =
//! 2 tr(MN)`, eigenvalues are those of `M` with doubled multiplicity, and
//! `M ⪰ 0` iff `emb(M) ⪰ 0`. The image is exactly the set of real symmetric
//! matrices `X` with `X = Jᵀ X J` for `J = [[0, -I], [I, 0]]`.

use nalgebra::{Complex, DMatrix};

use crate::{check_hermitian, CMatrix, ConicError};

/// Embeds a Hermitian matrix into the real symmetric matrices of twice the size.
pub fn hermitian_to_real_embedding(m: &CMatrix) -> Result<DMatrix<f64>, ConicError> {
    check_hermitian(m)?;
    Ok(embed_unchecked(m))
}

pub(crate) fn embed_unchecked(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            // Average with the conjugate transpose so round-off asymmetry in
            // the input never leaks into the real problem.
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// Inverse of the embedding on its image. Off-image components are averaged
/// away, so this is the orthogonal projection onto the image followed by the
/// inverse map.
pub fn real_to_hermitian(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
        let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
        Complex::new(re, im)
    })
}

/// Projects a real symmetric `2n x 2n` matrix onto the embedding image in place.
pub(crate) fn project_onto_image(x: &mut DMatrix<f64>) {
    let n = x.nrows() / 2;
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
            let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
            x[(i, j)] = re;
            x[(n + i, n + j)] = re;
            x[(n + i, j)] = im;
            x[(i, n + j)] = -im;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &g + g.adjoint()
    }

    #[test]
    fn identity_maps_to_identity() {
        let e = hermitian_to_real_embedding(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(e, DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn pure_imaginary_off_diagonal() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        let e = hermitian_to_real_embedding(&m).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            -1.0, 0.0, 0.0, 0.0,
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn trace_of_products_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            let a = random_hermitian(n, &mut rng);
            let b = random_hermitian(n, &mut rng);
            let direct = (&a * &b).trace();
            let embedded = (embed_unchecked(&a) * embed_unchecked(&b)).trace();
            assert!(direct.im.abs() < 1e-12);
            assert!((embedded - 2.0 * direct.re).abs() <= 1e-12 * (1.0 + direct.re.abs()));
        }
    }

    #[test]
    fn round_trip_and_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(4, &mut rng);
        let back = real_to_hermitian(&embed_unchecked(&a));
        assert!((back - &a).norm() < 1e-14);

        let mut x = embed_unchecked(&a);
        x[(0, 5)] += 0.25;
        x[(5, 0)] += 0.25;
        project_onto_image(&mut x);
        assert!((embed_unchecked(&real_to_hermitian(&x)) - x).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            hermitian_to_real_embedding(&m),
            Err(ConicError::NotHermitian { .. })
        ));
    }
}
