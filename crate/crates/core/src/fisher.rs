//! Fisher information of the linear Gaussian measurement model
//! `y = (H_r Ω H_ar + H_a) P θ + η` and the quadratic forms that express its
//! trace as a function of the RIS vector `ω` or of the powers `p`.
//!
//! With `G = H_ar P` and `E = H_r^H Σ^{-1} H_r`, the trace decomposes as
//!
//! ```text
//! tr{H^H Σ^{-1} H} = ω^H Q ω + 2 Re(ω^T q̃) + c,
//! Q   = E ∘ conj(G G^H),
//! q̃_j = [G P H_a^H Σ^{-1} H_r]_jj,
//! c   = Σ_i p_i [H_a^H Σ^{-1} H_a]_ii,
//! ```
//!
//! where the last two vanish without direct paths.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{to_rows, CMatrix, CVector, PowerAllocation, Receiver, RisProfile, SystemModel};

pub const FORMS_SCHEMA: &str = "forms_v1";

/// `Σ^{-1}` through a Cholesky factorization.
pub fn covariance_inverse(sigma: &CMatrix) -> Result<CMatrix> {
    let n = sigma.nrows();
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| CoreError::SingularCovariance(format!("{n}x{n} Cholesky failed")))?;
    Ok(chol.inverse())
}

fn check_inputs(model: &SystemModel, omega: &RisProfile, p: &PowerAllocation) -> Result<()> {
    if omega.len() != model.dims.r {
        return Err(CoreError::Shape(format!(
            "RIS vector has {} entries, model has r = {}",
            omega.len(),
            model.dims.r
        )));
    }
    check_power(model, p)
}

fn check_power(model: &SystemModel, p: &PowerAllocation) -> Result<()> {
    if p.len() != model.dims.k {
        return Err(CoreError::Shape(format!(
            "power vector has {} entries, model has k = {}",
            p.len(),
            model.dims.k
        )));
    }
    Ok(())
}

/// `H_r diag(ω) H_ar (+ H_a)`, before power scaling.
fn cascade(model: &SystemModel, omega: &CVector, who: Receiver) -> CMatrix {
    let v = model.view(who);
    let mut scaled = v.h_r.clone();
    for (j, w) in omega.iter().enumerate() {
        let mut col = scaled.column_mut(j);
        col *= *w;
    }
    let mut m = scaled * &model.h_ar;
    if let Some(direct) = v.h_direct {
        m += direct;
    }
    m
}

fn scale_columns(m: &mut CMatrix, amp: &DVector<f64>) {
    for (j, a) in amp.iter().enumerate() {
        let mut col = m.column_mut(j);
        col *= Complex::new(*a, 0.0);
    }
}

/// `(H_r Ω H_ar + H_a) P` for the chosen receiver.
pub fn effective_channel(
    model: &SystemModel,
    omega: &RisProfile,
    p: &PowerAllocation,
    who: Receiver,
) -> Result<CMatrix> {
    check_inputs(model, omega, p)?;
    let mut h = cascade(model, &omega.omega, who);
    scale_columns(&mut h, &p.amplitudes());
    Ok(h)
}

/// The two diagonal blocks of the FIM for the augmented parameter
/// `[θ; θ*]`. The off-diagonal blocks vanish for circular noise.
///
/// The first block is `H^H Σ^{-1} H` (the expected outer product of the
/// score `∂ℓ/∂θ*`) and the second is its complex conjugate. For real
/// covariances these coincide with `H^H Σ^{-*} H` and `H^T Σ^{-1} H^*`.
pub fn fim_blocks(
    model: &SystemModel,
    omega: &RisProfile,
    p: &PowerAllocation,
    who: Receiver,
) -> Result<(CMatrix, CMatrix)> {
    let h = effective_channel(model, omega, p, who)?;
    let sinv = covariance_inverse(model.view(who).sigma)?;
    let f = h.adjoint() * sinv * &h;
    let f = (&f + f.adjoint()) * Complex::new(0.5, 0.0);
    let conj = f.map(|z| z.conj());
    Ok((f, conj))
}

/// `tr{H^H Σ^{-1} H}` for the chosen receiver, including every
/// line-of-sight term when the model has direct paths.
pub fn fim_trace(model: &SystemModel, omega: &RisProfile, p: &PowerAllocation, who: Receiver) -> Result<f64> {
    let h = effective_channel(model, omega, p, who)?;
    let sinv = covariance_inverse(model.view(who).sigma)?;
    Ok((h.adjoint() * sinv * h).trace().re)
}

/// `S_j = h_j g_j`: column `j` of `H_r` times row `j` of `H_ar P`. The index
/// is zero-based. Summing `ω_j S_j` over `j` gives the reflected part of the
/// effective channel.
pub fn build_s(model: &SystemModel, p: &PowerAllocation, who: Receiver, j: usize) -> Result<CMatrix> {
    check_power(model, p)?;
    if j >= model.dims.r {
        return Err(CoreError::Invalid(format!(
            "element index {j} out of range for r = {}",
            model.dims.r
        )));
    }
    let mut g = model.h_ar.row(j).into_owned();
    for (i, a) in p.amplitudes().iter().enumerate() {
        g[i] *= *a;
    }
    Ok(model.view(who).h_r.column(j) * g)
}

/// Trace forms for both receivers at a fixed power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForms {
    pub q_b: CMatrix,
    pub q_e: CMatrix,
    pub q_tilde_b: Option<CVector>,
    pub q_tilde_e: Option<CVector>,
    pub const_b: f64,
    pub const_e: f64,
    /// Near-singularity notes from the definiteness check.
    pub warnings: Vec<String>,
}

impl QuadraticForms {
    pub fn r(&self) -> usize {
        self.q_b.nrows()
    }

    pub fn has_los(&self) -> bool {
        self.q_tilde_b.is_some()
    }

    pub fn parts(&self, who: Receiver) -> (&CMatrix, Option<&CVector>, f64) {
        match who {
            Receiver::Bob => (&self.q_b, self.q_tilde_b.as_ref(), self.const_b),
            Receiver::Eve => (&self.q_e, self.q_tilde_e.as_ref(), self.const_e),
        }
    }

    /// `ω^H Q ω + 2 Re(ω^T q̃) + c`.
    pub fn value(&self, who: Receiver, omega: &CVector) -> f64 {
        let (q, qt, c) = self.parts(who);
        let mut v = omega.dotc(&(q * omega)).re + c;
        if let Some(qt) = qt {
            v += 2.0 * omega.dot(qt).re;
        }
        v
    }

    pub fn bob(&self, omega: &CVector) -> f64 {
        self.value(Receiver::Bob, omega)
    }

    pub fn eve(&self, omega: &CVector) -> f64 {
        self.value(Receiver::Eve, omega)
    }

    pub fn to_json(&self) -> Result<String> {
        let vec_rows = |v: &CVector| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
        let doc = FormsDoc {
            schema: FORMS_SCHEMA.to_string(),
            q_b: to_rows(&self.q_b),
            q_e: to_rows(&self.q_e),
            q_tilde_b: self.q_tilde_b.as_ref().map(vec_rows),
            q_tilde_e: self.q_tilde_e.as_ref().map(vec_rows),
            const_b: self.const_b,
            const_e: self.const_e,
            warnings: self.warnings.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

#[derive(Serialize, Deserialize)]
struct FormsDoc {
    schema: String,
    q_b: Vec<Vec<[f64; 2]>>,
    q_e: Vec<Vec<[f64; 2]>>,
    q_tilde_b: Option<Vec<[f64; 2]>>,
    q_tilde_e: Option<Vec<[f64; 2]>>,
    const_b: f64,
    const_e: f64,
    warnings: Vec<String>,
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex::new(0.5, 0.0)
}

/// `G = H_ar P`.
fn power_scaled_h_ar(model: &SystemModel, p: &PowerAllocation) -> CMatrix {
    let mut g = model.h_ar.clone();
    scale_columns(&mut g, &p.amplitudes());
    g
}

/// `Q = E ∘ conj(G G^H)` for a receiver Gram matrix `E = H_r^H Σ^{-1} H_r`.
fn q_from_gram(e: &CMatrix, g: &CMatrix) -> CMatrix {
    let ggh = g * g.adjoint();
    let q = e.zip_map(&ggh, |a, b| a * b.conj());
    hermitian_part(&q)
}

struct ReceiverForms {
    q: CMatrix,
    q_tilde: Option<CVector>,
    constant: f64,
}

fn receiver_forms(model: &SystemModel, p: &PowerAllocation, who: Receiver) -> Result<ReceiverForms> {
    let v = model.view(who);
    let sinv = covariance_inverse(v.sigma)?;
    let g = power_scaled_h_ar(model, p);
    let e = hermitian_part(&(v.h_r.adjoint() * &sinv * v.h_r));
    let q = q_from_gram(&e, &g);
    let (q_tilde, constant) = match v.h_direct {
        Some(h_a) => {
            // q̃_j = Σ_c g_{jc} √p_c [H_a^H Σ^{-1} H_r]_{cj}
            let mut a = h_a.clone();
            scale_columns(&mut a, &p.amplitudes());
            let cross = a.adjoint() * &sinv * v.h_r;
            let qt = CVector::from_fn(model.dims.r, |j, _| {
                (0..model.dims.k).map(|c| g[(j, c)] * cross[(c, j)]).sum()
            });
            let constant = (a.adjoint() * &sinv * &a).trace().re;
            (Some(qt), constant)
        }
        None => (None, 0.0),
    };
    Ok(ReceiverForms { q, q_tilde, constant })
}

/// Verifies `λ_min(Q) > 1e-12 tr(Q)/r`. A zero (or non-PSD) matrix is an
/// error; a PSD matrix that is numerically singular only yields a warning.
fn definiteness(q: &CMatrix, name: &str) -> Result<Option<String>> {
    let r = q.nrows() as f64;
    let trace = q.trace().re;
    let min = q.clone().symmetric_eigenvalues().min();
    if !(trace > 0.0) || min < -1e-9 * trace / r {
        return Err(CoreError::NotPositiveDefinite {
            min_eigenvalue: min,
            trace,
        });
    }
    if min <= 1e-12 * trace / r {
        return Ok(Some(format!(
            "{name} is numerically singular (minimum eigenvalue {min:e}, trace {trace:e})"
        )));
    }
    Ok(None)
}

pub fn build_quadratic_forms(model: &SystemModel, p: &PowerAllocation) -> Result<QuadraticForms> {
    check_power(model, p)?;
    let b = receiver_forms(model, p, Receiver::Bob)?;
    let e = receiver_forms(model, p, Receiver::Eve)?;
    let mut warnings = Vec::new();
    warnings.extend(definiteness(&b.q, "Q_b")?);
    warnings.extend(definiteness(&e.q, "Q_e")?);
    for w in &warnings {
        log::debug!("{w}");
    }
    Ok(QuadraticForms {
        q_b: b.q,
        q_e: e.q,
        q_tilde_b: b.q_tilde,
        q_tilde_e: e.q_tilde,
        const_b: b.constant,
        const_e: e.constant,
        warnings,
    })
}

/// Diagonals of `A_i = M_i^H Σ_i^{-1} M_i` with `M_i = H_ri Ω H_ar (+ H_ai)`,
/// so that the trace at receiver `i` equals `Σ_c [A_i]_cc p_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalForms {
    /// Bob's diagonal, `α`.
    pub alpha: Vec<f64>,
    /// Eve's diagonal, `β`.
    pub beta: Vec<f64>,
}

fn gram_diagonal(model: &SystemModel, omega: &CVector, who: Receiver) -> Result<Vec<f64>> {
    let m = cascade(model, omega, who);
    let sinv = covariance_inverse(model.view(who).sigma)?;
    let sm = sinv * &m;
    Ok((0..m.ncols())
        .map(|c| m.column(c).dotc(&sm.column(c)).re.max(0.0))
        .collect())
}

pub fn build_diagonal_forms(model: &SystemModel, omega: &RisProfile) -> Result<DiagonalForms> {
    if omega.len() != model.dims.r {
        return Err(CoreError::Shape(format!(
            "RIS vector has {} entries, model has r = {}",
            omega.len(),
            model.dims.r
        )));
    }
    Ok(DiagonalForms {
        alpha: gram_diagonal(model, &omega.omega, Receiver::Bob)?,
        beta: gram_diagonal(model, &omega.omega, Receiver::Eve)?,
    })
}

/// A discrete distribution over Eve's Gram matrix `E = H_re^H Σ_e^{-1} H_re`.
#[derive(Debug, Clone, PartialEq)]
pub struct EavesdropperMixture {
    components: Vec<(CMatrix, f64)>,
}

impl EavesdropperMixture {
    pub fn new(components: Vec<(CMatrix, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(CoreError::Invalid("empty eavesdropper mixture".into()));
        }
        let n = components[0].0.nrows();
        let mut total = 0.0;
        for (i, (e, w)) in components.iter().enumerate() {
            if e.shape() != (n, n) {
                return Err(CoreError::Shape(format!("mixture component {i} is not {n}x{n}")));
            }
            if !(*w >= 0.0) {
                return Err(CoreError::Invalid(format!("mixture weight {i} is {w}")));
            }
            let scale = e.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            let asym = (e - e.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if asym > 1e-10 * scale {
                return Err(CoreError::Invalid(format!("mixture component {i} is not Hermitian")));
            }
            let min = e.clone().symmetric_eigenvalues().min();
            if min < -1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(CoreError::Invalid(format!(
                    "mixture component {i} is not PSD (eigenvalue {min:e})"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::Invalid(format!("mixture weights sum to {total}")));
        }
        Ok(Self { components })
    }

    /// The point mass at the model's own `E`.
    pub fn point_mass(model: &SystemModel) -> Result<Self> {
        Self::new(vec![(eve_gram(model)?, 1.0)])
    }

    pub fn components(&self) -> &[(CMatrix, f64)] {
        &self.components
    }

    /// `Ē = Σ_j ς_j E_j`.
    pub fn mean(&self) -> CMatrix {
        let n = self.components[0].0.nrows();
        self.components
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, (e, w)| acc + e * Complex::new(*w, 0.0))
    }
}

/// `E = H_re^H Σ_e^{-1} H_re`.
pub fn eve_gram(model: &SystemModel) -> Result<CMatrix> {
    let sinv = covariance_inverse(&model.sigma_e)?;
    Ok(hermitian_part(&(model.h_re.adjoint() * sinv * &model.h_re)))
}

/// Eve's quadratic form averaged over an uncertain Gram matrix. Applies to
/// the reflected path only; direct paths are not averaged.
pub fn average_eavesdropper_q(
    model: &SystemModel,
    p: &PowerAllocation,
    mixture: &EavesdropperMixture,
) -> Result<CMatrix> {
    check_power(model, p)?;
    let e = mixture.mean();
    if e.nrows() != model.dims.r {
        return Err(CoreError::Shape(format!(
            "mixture matrices are {}x{}, model has r = {}",
            e.nrows(),
            e.ncols(),
            model.dims.r
        )));
    }
    Ok(q_from_gram(&e, &power_scaled_h_ar(model, p)))
}

/// `(r λ_min(Q), r λ_max(Q))`, which brackets `ω^H Q ω` over unit-modulus `ω`.
pub fn eigenvalue_bounds(q: &CMatrix) -> (f64, f64) {
    let r = q.nrows() as f64;
    let eig = hermitian_part(q).symmetric_eigenvalues();
    (r * eig.min(), r * eig.max())
}
