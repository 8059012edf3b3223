//! Maximum-likelihood estimation of `θ` under the linear Gaussian model and
//! the Monte Carlo study of its mean squared error.
//!
//! Only parameters with `p_i > 0` are observable; silenced ones are left out
//! of the estimate, of the MSE average and of the CRLB trace.

use nalgebra::{Cholesky, Complex, Dyn};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::fisher::effective_channel;
use crate::model::{CMatrix, CVector, PowerAllocation, Receiver, RisProfile, SystemModel};
use crate::rng::Rng;

const THETA_STREAM: u64 = 0x7E7A;
/// Smallest-to-largest singular value ratio below which the active channel
/// counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Whitened least-squares solver for one `(model, ω, p, receiver)`.
#[derive(Debug, Clone)]
pub struct MleSolver {
    active: Vec<usize>,
    /// Lower Cholesky factor of `Σ`.
    noise_factor: CMatrix,
    /// `L^{-1} H_a`.
    whitened: CMatrix,
    /// Factor of `H_a^H Σ^{-1} H_a`.
    normal: Option<Cholesky<Complex<f64>, Dyn>>,
    /// Full effective channel, inactive columns included.
    channel: CMatrix,
}

impl MleSolver {
    pub fn new(model: &SystemModel, omega: &RisProfile, p: &PowerAllocation, who: Receiver) -> Result<Self> {
        let channel = effective_channel(model, omega, p, who)?;
        let sigma = model.view(who).sigma;
        let n = sigma.nrows();
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| CoreError::SingularCovariance(format!("{n}x{n} Cholesky failed")))?;
        let noise_factor = chol.l();
        let active = p.active();
        let h_a = channel.select_columns(&active);
        let whitened = noise_factor
            .solve_lower_triangular(&h_a)
            .ok_or_else(|| CoreError::SingularCovariance("triangular solve failed".into()))?;
        let normal = if active.is_empty() {
            None
        } else {
            let sv = whitened.clone().singular_values();
            let s_max = sv.max();
            let s_min = sv.min();
            if active.len() > n || !(s_min >= RANK_TOLERANCE * s_max) || s_max == 0.0 {
                return Err(CoreError::RankDeficient {
                    sigma_min: if active.len() > n { 0.0 } else { s_min },
                    sigma_max: s_max,
                });
            }
            let gram = whitened.adjoint() * &whitened;
            let gram = (&gram + gram.adjoint()) * Complex::new(0.5, 0.0);
            Some(
                gram.cholesky()
                    .ok_or_else(|| CoreError::NumericalTrouble("normal equations lost definiteness".into()))?,
            )
        };
        Ok(Self {
            active,
            noise_factor,
            whitened,
            normal,
            channel,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn channel(&self) -> &CMatrix {
        &self.channel
    }

    /// Estimates of the active parameters, in the order of [`Self::active`].
    pub fn estimate(&self, y: &CVector) -> Result<CVector> {
        if y.len() != self.noise_factor.nrows() {
            return Err(CoreError::Shape(format!(
                "observation has {} entries, receiver has {}",
                y.len(),
                self.noise_factor.nrows()
            )));
        }
        let Some(normal) = &self.normal else {
            return Ok(CVector::zeros(0));
        };
        let yw = self
            .noise_factor
            .solve_lower_triangular(y)
            .ok_or_else(|| CoreError::SingularCovariance("triangular solve failed".into()))?;
        Ok(normal.solve(&(self.whitened.adjoint() * yw)))
    }

    /// `(H_a^H Σ^{-1} H_a)^{-1}`, the CRLB over the active parameters.
    pub fn crlb(&self) -> CMatrix {
        match &self.normal {
            Some(c) => c.inverse(),
            None => CMatrix::zeros(0, 0),
        }
    }

    /// One noisy observation `H θ + η` with `η ~ CN(0, Σ)`.
    pub fn observe(&self, theta: &CVector, rng: &mut Rng) -> CVector {
        let n = self.noise_factor.nrows();
        let z = CVector::from_fn(n, |_, _| rng.complex_normal(1.0));
        &self.channel * theta + &self.noise_factor * z
    }
}

/// `(H_a^H Σ^{-1} H_a)^{-1} H_a^H Σ^{-1} y` over the active columns.
pub fn mle(
    model: &SystemModel,
    omega: &RisProfile,
    p: &PowerAllocation,
    y: &CVector,
    who: Receiver,
) -> Result<CVector> {
    MleSolver::new(model, omega, p, who)?.estimate(y)
}

/// Unit-magnitude parameters with random phases.
pub fn default_theta(k: usize, seed: u64) -> CVector {
    let mut rng = Rng::new(seed).substream(&[THETA_STREAM]);
    CVector::from_fn(k, |_, _| rng.unit_phase())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseReport {
    /// Mean over trials of the squared error averaged over active parameters.
    pub avg_mse: f64,
    pub active_count: usize,
    pub trials: usize,
    /// Trace of the CRLB over the active parameters.
    pub crlb_trace: f64,
    /// Standard error of `avg_mse`.
    pub std_error: f64,
    pub theta_true: Vec<[f64; 2]>,
}

impl MseReport {
    /// `avg_mse · active_count - crlb_trace` in units of the scaled standard error.
    pub fn efficiency_z(&self) -> f64 {
        let n = self.active_count as f64;
        let gap = self.avg_mse * n - self.crlb_trace;
        if self.std_error == 0.0 {
            if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            gap / (self.std_error * n)
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Runs `trials` independent noisy estimations. Trial `t` draws its noise
/// from substream `t` of `rng`, so the result does not depend on the order
/// trials are evaluated in.
pub fn monte_carlo_mse(
    model: &SystemModel,
    omega: &RisProfile,
    p: &PowerAllocation,
    who: Receiver,
    theta_true: &CVector,
    trials: usize,
    rng: &Rng,
) -> Result<MseReport> {
    if trials == 0 {
        return Err(CoreError::Invalid("trials must be at least 1".into()));
    }
    if theta_true.len() != model.dims.k {
        return Err(CoreError::Shape(format!(
            "theta has {} entries, model has k = {}",
            theta_true.len(),
            model.dims.k
        )));
    }
    let solver = MleSolver::new(model, omega, p, who)?;
    let active = solver.active().to_vec();
    let m = active.len();
    let truth = theta_true.select_rows(&active);
    let mut sum = Compensated::default();
    let mut sum_sq = Compensated::default();
    if m > 0 {
        for t in 0..trials {
            let mut trial_rng = rng.substream(&[t as u64]);
            let y = solver.observe(theta_true, &mut trial_rng);
            let est = solver.estimate(&y)?;
            let err = (est - &truth).norm_squared() / m as f64;
            sum.add(err);
            sum_sq.add(err * err);
        }
    }
    let n = trials as f64;
    let mean = sum.value() / n;
    let std_error = if trials > 1 {
        let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MseReport {
        avg_mse: mean,
        active_count: m,
        trials,
        crlb_trace: solver.crlb().trace().re,
        std_error,
        theta_true: theta_true.iter().map(|z| [z.re, z.im]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, Dimensions};

    fn setup(seed: u64) -> (SystemModel, RisProfile, PowerAllocation) {
        let dims = Dimensions::protocol(3, 4).unwrap();
        let m = generate_channels(dims, &mut Rng::new(seed), 1e-5, false).unwrap();
        let omega = RisProfile::random_phases(4, &mut Rng::new(seed + 1));
        (m, omega, PowerAllocation::equal(3, 30.0).unwrap())
    }

    #[test]
    fn noiseless_recovery() {
        let (m, omega, p) = setup(1);
        let s = MleSolver::new(&m, &omega, &p, Receiver::Bob).unwrap();
        let theta = default_theta(3, 4);
        let est = s.estimate(&(s.channel() * &theta)).unwrap();
        assert!((est - &theta).norm() <= 1e-10 * theta.norm());
    }

    #[test]
    fn inactive_parameter_excluded() {
        let (m, omega, _) = setup(2);
        let p = PowerAllocation::new(vec![10.0, 0.0, 20.0], 30.0).unwrap();
        let theta = default_theta(3, 1);
        let r = monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &theta, 50, &Rng::new(3)).unwrap();
        assert_eq!(r.active_count, 2);
        let s = MleSolver::new(&m, &omega, &p, Receiver::Bob).unwrap();
        assert_eq!(s.active(), &[0, 2]);
        assert_eq!(s.crlb().nrows(), 2);
    }

    #[test]
    fn vanishing_noise_vanishing_error() {
        let (mut m, omega, p) = setup(3);
        m.sigma_b *= Complex::new(1e-12, 0.0);
        let r = monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &default_theta(3, 0), 20, &Rng::new(0)).unwrap();
        assert!(r.avg_mse < 1e-12);
    }

    #[test]
    fn silenced_transmitter() {
        let (m, omega, _) = setup(4);
        let p = PowerAllocation::new(vec![0.0; 3], 30.0).unwrap();
        let r = monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &default_theta(3, 0), 5, &Rng::new(0)).unwrap();
        assert_eq!((r.active_count, r.avg_mse, r.crlb_trace), (0, 0.0, 0.0));
    }

    #[test]
    fn rank_deficiency_reported() {
        let (mut m, omega, p) = setup(5);
        let col = m.h_ar.column(0).clone_owned();
        m.h_ar.set_column(1, &col);
        let err = MleSolver::new(&m, &omega, &p, Receiver::Bob).unwrap_err();
        assert!(matches!(err, CoreError::RankDeficient { .. }));
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut s = Compensated::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (m, omega, p) = setup(6);
        let theta = default_theta(3, 0);
        assert!(monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &theta, 0, &Rng::new(0)).is_err());
        assert!(monte_carlo_mse(&m, &omega, &p, Receiver::Bob, &default_theta(2, 0), 1, &Rng::new(0)).is_err());
        let s = MleSolver::new(&m, &omega, &p, Receiver::Bob).unwrap();
        assert!(s.estimate(&CVector::zeros(2)).is_err());
    }
}
