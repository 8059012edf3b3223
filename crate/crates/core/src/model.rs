//! Scenario data: dimensions, channels, noise covariances, RIS profiles and
//! power allocations, plus the seeded channel generator.
//!
//! Channel entries are drawn with independent real and imaginary parts,
//! each uniform on `[-0.1, 0.1]`. Draw order is fixed: `H_ar` row-major,
//! then `H_rb`, `H_re`, and (when line-of-sight paths are requested) `H_ab`,
//! `H_ae`, all row-major with the real part of each entry drawn first.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::Rng;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const CHANNEL_HALF_WIDTH: f64 = 0.1;
pub const MODEL_SCHEMA: &str = "model_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub k: usize,
    pub r: usize,
    pub n_b: usize,
    pub n_e: usize,
}

impl Dimensions {
    pub fn new(k: usize, r: usize, n_b: usize, n_e: usize) -> Result<Self> {
        if k == 0 || r == 0 || n_b == 0 || n_e == 0 {
            return Err(CoreError::Invalid(format!(
                "dimensions must be positive (k={k}, r={r}, n_b={n_b}, n_e={n_e})"
            )));
        }
        Ok(Self { k, r, n_b, n_e })
    }

    /// Observation sizes `n_b = n_e = 2k`.
    pub fn protocol(k: usize, r: usize) -> Result<Self> {
        Self::new(k, r, 2 * k, 2 * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    Bob,
    Eve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    UnitModulus,
    BoundedMagnitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub dims: Dimensions,
    /// Alice to RIS, `r x k`.
    pub h_ar: CMatrix,
    /// RIS to Bob, `n_b x r`.
    pub h_rb: CMatrix,
    /// RIS to Eve, `n_e x r`.
    pub h_re: CMatrix,
    pub sigma_b: CMatrix,
    pub sigma_e: CMatrix,
    /// Direct Alice to Bob path, `n_b x k`.
    pub h_ab: Option<CMatrix>,
    /// Direct Alice to Eve path, `n_e x k`.
    pub h_ae: Option<CMatrix>,
}

/// The channels seen by one receiver.
pub struct ReceiverView<'a> {
    pub h_r: &'a CMatrix,
    pub sigma: &'a CMatrix,
    pub h_direct: Option<&'a CMatrix>,
}

impl SystemModel {
    pub fn has_los(&self) -> bool {
        self.h_ab.is_some() && self.h_ae.is_some()
    }

    pub fn view(&self, who: Receiver) -> ReceiverView<'_> {
        match who {
            Receiver::Bob => ReceiverView {
                h_r: &self.h_rb,
                sigma: &self.sigma_b,
                h_direct: self.h_ab.as_ref(),
            },
            Receiver::Eve => ReceiverView {
                h_r: &self.h_re,
                sigma: &self.sigma_e,
                h_direct: self.h_ae.as_ref(),
            },
        }
    }

    /// The model restricted to the first `r` RIS elements. Used for nested
    /// sweeps over the surface size.
    pub fn leading_submodel(&self, r: usize) -> Result<SystemModel> {
        if r == 0 || r > self.dims.r {
            return Err(CoreError::Invalid(format!(
                "cannot take {r} of {} RIS elements",
                self.dims.r
            )));
        }
        Ok(SystemModel {
            dims: Dimensions { r, ..self.dims },
            h_ar: self.h_ar.rows(0, r).into_owned(),
            h_rb: self.h_rb.columns(0, r).into_owned(),
            h_re: self.h_re.columns(0, r).into_owned(),
            sigma_b: self.sigma_b.clone(),
            sigma_e: self.sigma_e.clone(),
            h_ab: self.h_ab.clone(),
            h_ae: self.h_ae.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<SystemModel> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        if doc.schema != MODEL_SCHEMA {
            return Err(CoreError::Invalid(format!("unknown schema {:?}", doc.schema)));
        }
        let m = SystemModel {
            dims: doc.dims,
            h_ar: from_rows(&doc.h_ar)?,
            h_rb: from_rows(&doc.h_rb)?,
            h_re: from_rows(&doc.h_re)?,
            sigma_b: from_rows(&doc.sigma_b)?,
            sigma_e: from_rows(&doc.sigma_e)?,
            h_ab: doc.h_ab.as_deref().map(from_rows).transpose()?,
            h_ae: doc.h_ae.as_deref().map(from_rows).transpose()?,
        };
        let issues = validate_model(&m);
        if let Some(first) = issues.first() {
            return Err(CoreError::Invalid(first.to_string()));
        }
        Ok(m)
    }
}

type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    schema: String,
    dims: Dimensions,
    h_ar: JsonMatrix,
    h_rb: JsonMatrix,
    h_re: JsonMatrix,
    sigma_b: JsonMatrix,
    sigma_e: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_ab: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_ae: Option<JsonMatrix>,
}

impl From<&SystemModel> for ModelDoc {
    fn from(m: &SystemModel) -> Self {
        ModelDoc {
            schema: MODEL_SCHEMA.to_string(),
            dims: m.dims,
            h_ar: to_rows(&m.h_ar),
            h_rb: to_rows(&m.h_rb),
            h_re: to_rows(&m.h_re),
            sigma_b: to_rows(&m.sigma_b),
            sigma_e: to_rows(&m.sigma_e),
            h_ab: m.h_ab.as_ref().map(to_rows),
            h_ae: m.h_ae.as_ref().map(to_rows),
        }
    }
}

pub(crate) fn to_rows(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(CoreError::Shape("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| {
        Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// RIS reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RisProfile {
    pub omega: CVector,
    pub regime: Regime,
}

impl RisProfile {
    pub fn new(omega: CVector, regime: Regime) -> Result<Self> {
        for (i, w) in omega.iter().enumerate() {
            let m = w.norm();
            let ok = match regime {
                Regime::UnitModulus => (m - 1.0).abs() <= 1e-9,
                Regime::BoundedMagnitude => m <= 1.0 + 1e-9,
            };
            if !ok || !m.is_finite() {
                return Err(CoreError::Invalid(format!(
                    "element {i} has modulus {m} which violates {regime:?}"
                )));
            }
        }
        Ok(Self { omega, regime })
    }

    /// Independent phases uniform on `[0, 2π)`.
    pub fn random_phases(r: usize, rng: &mut Rng) -> Self {
        Self {
            omega: CVector::from_fn(r, |_, _| rng.unit_phase()),
            regime: Regime::UnitModulus,
        }
    }

    pub fn ones(r: usize) -> Self {
        Self {
            omega: CVector::from_element(r, Complex::new(1.0, 0.0)),
            regime: Regime::UnitModulus,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    pub budget: f64,
}

impl PowerAllocation {
    pub fn new(p: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(CoreError::Invalid(format!(
                "power budget must be positive, got {budget}"
            )));
        }
        if let Some(i) = p.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(CoreError::Invalid(format!("power {i} is {}", p[i])));
        }
        let total: f64 = p.iter().sum();
        if total > budget * (1.0 + 1e-9) {
            return Err(CoreError::Invalid(format!(
                "total power {total} exceeds budget {budget}"
            )));
        }
        Ok(Self { p, budget })
    }

    /// `P_Σ / k` on every parameter.
    pub fn equal(k: usize, budget: f64) -> Result<Self> {
        Self::new(vec![budget / k as f64; k], budget)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Indices with strictly positive power.
    pub fn active(&self) -> Vec<usize> {
        (0..self.p.len()).filter(|&i| self.p[i] > 0.0).collect()
    }

    /// The amplitudes `√p_i`, i.e. the diagonal of `P`.
    pub fn amplitudes(&self) -> DVector<f64> {
        DVector::from_iterator(self.p.len(), self.p.iter().map(|v| v.sqrt()))
    }
}

fn draw_matrix(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = rng.uniform_in(-CHANNEL_HALF_WIDTH, CHANNEL_HALF_WIDTH);
            let im = rng.uniform_in(-CHANNEL_HALF_WIDTH, CHANNEL_HALF_WIDTH);
            m[(i, j)] = Complex::new(re, im);
        }
    }
    m
}

pub fn generate_channels(
    dims: Dimensions,
    rng: &mut Rng,
    noise_variance: f64,
    include_los: bool,
) -> Result<SystemModel> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(CoreError::Invalid(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    let h_ar = draw_matrix(dims.r, dims.k, rng);
    let h_rb = draw_matrix(dims.n_b, dims.r, rng);
    let h_re = draw_matrix(dims.n_e, dims.r, rng);
    let (h_ab, h_ae) = if include_los {
        let ab = draw_matrix(dims.n_b, dims.k, rng);
        let ae = draw_matrix(dims.n_e, dims.k, rng);
        (Some(ab), Some(ae))
    } else {
        (None, None)
    };
    let noise = Complex::new(noise_variance, 0.0);
    Ok(SystemModel {
        dims,
        h_ar,
        h_rb,
        h_re,
        sigma_b: CMatrix::identity(dims.n_b, dims.n_b) * noise,
        sigma_e: CMatrix::identity(dims.n_e, dims.n_e) * noise,
        h_ab,
        h_ae,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelIssue {
    Shape {
        field: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    NonFinite {
        field: &'static str,
    },
    NotHermitian {
        field: &'static str,
        asymmetry: f64,
    },
    NotPositiveDefinite {
        field: &'static str,
        min_eigenvalue: f64,
    },
    AsymmetricLos,
}

impl std::fmt::Display for ModelIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelIssue::Shape { field, expected, found } => write!(
                f,
                "{field} is {}x{}, expected {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            ModelIssue::NonFinite { field } => write!(f, "{field} has non-finite entries"),
            ModelIssue::NotHermitian { field, asymmetry } => {
                write!(f, "{field} is not Hermitian (asymmetry {asymmetry:e})")
            }
            ModelIssue::NotPositiveDefinite { field, min_eigenvalue } => write!(
                f,
                "{field} is not positive definite (minimum eigenvalue {min_eigenvalue:e})"
            ),
            ModelIssue::AsymmetricLos => {
                write!(f, "line-of-sight channels must be given for both receivers or neither")
            }
        }
    }
}

/// Checks every structural invariant of the model. An empty list means the
/// model is valid.
pub fn validate_model(m: &SystemModel) -> Vec<ModelIssue> {
    let d = m.dims;
    let mut issues = Vec::new();
    let mut shape = |field, mat: &CMatrix, rows, cols| {
        if mat.shape() != (rows, cols) {
            issues.push(ModelIssue::Shape {
                field,
                expected: (rows, cols),
                found: mat.shape(),
            });
            false
        } else if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            issues.push(ModelIssue::NonFinite { field });
            false
        } else {
            true
        }
    };
    shape("H_ar", &m.h_ar, d.r, d.k);
    shape("H_rb", &m.h_rb, d.n_b, d.r);
    shape("H_re", &m.h_re, d.n_e, d.r);
    let sb = shape("Sigma_b", &m.sigma_b, d.n_b, d.n_b);
    let se = shape("Sigma_e", &m.sigma_e, d.n_e, d.n_e);
    match (&m.h_ab, &m.h_ae) {
        (Some(ab), Some(ae)) => {
            shape("H_ab", ab, d.n_b, d.k);
            shape("H_ae", ae, d.n_e, d.k);
        }
        (None, None) => {}
        _ => issues.push(ModelIssue::AsymmetricLos),
    }
    for (ok, field, s) in [(sb, "Sigma_b", &m.sigma_b), (se, "Sigma_e", &m.sigma_e)] {
        if ok {
            if let Some(issue) = covariance_issue(field, s) {
                issues.push(issue);
            }
        }
    }
    issues
}

fn covariance_issue(field: &'static str, s: &CMatrix) -> Option<ModelIssue> {
    let scale = s.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let asymmetry = (s - s.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if asymmetry > 1e-12 * scale {
        return Some(ModelIssue::NotHermitian { field, asymmetry });
    }
    let eig = s.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.min();
    if !(min > 1e-12 * max) {
        return Some(ModelIssue::NotPositiveDefinite {
            field,
            min_eigenvalue: min,
        });
    }
    None
}
