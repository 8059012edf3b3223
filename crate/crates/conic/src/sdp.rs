//! Hermitian semidefinite programs:
//!
//! ```text
//! maximize   tr(C W)
//! s.t.       tr(A_j W)  = b_j        (equalities)
//!            tr(B_j W) <= d_j        (inequalities)
//!            W ⪰ 0,  W Hermitian
//! ```
//!
//! Each problem is mapped to a real SDP over `emb(W)` (see [`crate::embed`])
//! with one nonnegative slack per inequality and handed to the interior-point
//! engine. No explicit coupling constraints are needed: the embedded data are
//! invariant under the symmetry that characterizes the embedding image, the
//! iterates are kept on that image, and `W` is read back from the final
//! iterate.

use nalgebra::Complex;

use crate::embed::{embed_unchecked, real_to_hermitian};
pub use crate::ipm::IterationLog;
use crate::ipm::{self, RealSdp, RealSettings, RealStatus, Row, SymTerm};
use crate::{check_hermitian, CMatrix, ConicError};

/// A Hermitian constraint matrix. Diagonal selectors are kept symbolic so
/// that unit-modulus constraints stay cheap in the Schur complement.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintMatrix {
    Dense(CMatrix),
    /// `E_ii`: picks out `W[i][i]`.
    DiagonalEntry(usize),
}

impl ConstraintMatrix {
    pub fn to_dense(&self, n: usize) -> CMatrix {
        match self {
            ConstraintMatrix::Dense(m) => m.clone(),
            ConstraintMatrix::DiagonalEntry(i) => {
                let mut m = CMatrix::zeros(n, n);
                m[(*i, *i)] = Complex::new(1.0, 0.0);
                m
            }
        }
    }

    /// `tr(self · W)`, real part.
    pub fn inner(&self, w: &CMatrix) -> f64 {
        match self {
            ConstraintMatrix::Dense(m) => (m * w).trace().re,
            ConstraintMatrix::DiagonalEntry(i) => w[(*i, *i)].re,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub matrix: ConstraintMatrix,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(matrix: ConstraintMatrix, rhs: f64) -> Self {
        Self { matrix, rhs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    /// Objective matrix `C` (maximized).
    pub objective: CMatrix,
    pub equalities: Vec<LinearConstraint>,
    pub inequalities: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    /// The objective is unbounded above (dual infeasible).
    Unbounded,
    MaxIter,
    NumericalTrouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub w: CMatrix,
    /// `tr(C W)` at the returned point.
    pub objective: f64,
    /// Dual bound on the maximum (meaningful when the dual iterate is feasible).
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Slack `d_j - tr(B_j W)` of each inequality.
    pub inequality_slack: Vec<f64>,
    pub iterations: usize,
    pub status: SdpStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Threshold on the normalized residual of an infeasibility ray.
    pub infeasibility_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            infeasibility_tol: 1e-8,
        }
    }
}

impl SdpProblem {
    pub fn size(&self) -> usize {
        self.objective.nrows()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.size();
        check_hermitian(&self.objective)?;
        for c in self.equalities.iter().chain(&self.inequalities) {
            if !c.rhs.is_finite() {
                return Err(ConicError::NonFinite);
            }
            match &c.matrix {
                ConstraintMatrix::Dense(m) => {
                    if m.nrows() != n || m.ncols() != n {
                        return Err(ConicError::Shape(format!(
                            "constraint is {}x{}, variable is {n}x{n}",
                            m.nrows(),
                            m.ncols()
                        )));
                    }
                    check_hermitian(m)?;
                }
                ConstraintMatrix::DiagonalEntry(i) if *i >= n => {
                    return Err(ConicError::Shape(format!(
                        "diagonal index {i} out of range for size {n}"
                    )));
                }
                ConstraintMatrix::DiagonalEntry(_) => {}
            }
        }
        Ok(())
    }

    fn to_real(&self) -> RealSdp {
        let n = self.size();
        let term = |m: &ConstraintMatrix| match m {
            ConstraintMatrix::Dense(c) => SymTerm::Dense(embed_unchecked(c)),
            ConstraintMatrix::DiagonalEntry(i) => SymTerm::Sparse(vec![(*i, *i, 1.0), (n + i, n + i, 1.0)]),
        };
        // tr(emb(A) emb(W)) = 2 tr(AW), hence the doubled right-hand sides.
        let mut rows: Vec<Row> = self
            .equalities
            .iter()
            .map(|c| Row {
                mat: Some(term(&c.matrix)),
                lp: vec![],
                rhs: 2.0 * c.rhs,
            })
            .collect();
        rows.extend(self.inequalities.iter().enumerate().map(|(l, c)| Row {
            mat: Some(term(&c.matrix)),
            lp: vec![(l, 1.0)],
            rhs: 2.0 * c.rhs,
        }));
        RealSdp {
            c: -embed_unchecked(&self.objective),
            lp_cost: vec![0.0; self.inequalities.len()],
            rows,
            embedded: true,
        }
    }
}

/// Solves the SDP with the given tolerance and iteration cap.
pub fn solve_sdp(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution, ConicError> {
    let opts = SdpOptions {
        tol,
        max_iter,
        ..SdpOptions::default()
    };
    solve_sdp_with_log(problem, &opts, &mut |_| {})
}

/// Like [`solve_sdp`], reporting every iterate through `log`.
pub fn solve_sdp_with_log(
    problem: &SdpProblem,
    opts: &SdpOptions,
    log: &mut dyn FnMut(&IterationLog),
) -> Result<SdpSolution, ConicError> {
    problem.validate()?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(ConicError::InvalidOption(format!(
            "tol must be positive and max_iter nonzero (got {}, {})",
            opts.tol, opts.max_iter
        )));
    }
    let real = problem.to_real();
    let r = ipm::solve_real(
        &real,
        &RealSettings {
            tol: opts.tol,
            max_iter: opts.max_iter,
            infeasibility_tol: opts.infeasibility_tol,
        },
        log,
    );
    let w = real_to_hermitian(&r.x);
    let objective = (&problem.objective * &w).trace().re;
    let status = match r.status {
        RealStatus::Optimal => SdpStatus::Optimal,
        RealStatus::PrimalInfeasible => SdpStatus::Infeasible,
        RealStatus::DualInfeasible => SdpStatus::Unbounded,
        RealStatus::MaxIter => SdpStatus::MaxIter,
        RealStatus::NumericalTrouble => SdpStatus::NumericalTrouble,
    };
    Ok(SdpSolution {
        w,
        objective,
        // The real problem minimizes -2 tr(CW).
        dual_objective: -0.5 * r.dual_objective,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
        relative_gap: r.relative_gap,
        inequality_slack: r.x_lp.iter().map(|v| 0.5 * v).collect(),
        iterations: r.iterations,
        status,
    })
}
