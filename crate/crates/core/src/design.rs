//! RIS subproblem: for fixed powers, maximize Bob's trace over `ω` subject
//! to Eve's trace staying below `Δ`.
//!
//! The quadratic program is lifted to `W = ωω^H` and the rank constraint
//! dropped. Direct paths add linear terms, which are absorbed by
//! homogenizing with an extra coordinate `t`, `|t| = 1`:
//!
//! ```text
//! [ω; t]^H [[Q, q̃*], [q̃ᵀ, 0]] [ω; t] = ω^H Q ω + 2 Re(ω^T q̃)   at t = 1.
//! ```
//!
//! The relaxation excludes the `ω`-independent constants; Eve's cap becomes
//! `Δ - c_e` there and reported values add them back.
//!
//! A rank-one point is recovered from the relaxed solution by the principal
//! eigenvector (ED) and, if that violates the cap, by Gaussian
//! randomization (GR) around `W`.

use nalgebra::{Complex, DVector};
use ris_conic::{
    solve_sdp_with_log, ConstraintMatrix, LinearConstraint, SdpOptions, SdpProblem, SdpSolution, SdpStatus,
};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::fisher::QuadraticForms;
use crate::model::{CMatrix, CVector, Receiver, Regime, RisProfile};
use crate::rng::Rng;

/// Relative slack allowed on Eve's cap when accepting a candidate.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RisDesignProblem {
    pub forms: QuadraticForms,
    pub delta: f64,
    pub regime: Regime,
    pub los: bool,
}

impl RisDesignProblem {
    pub fn new(forms: QuadraticForms, delta: f64, regime: Regime) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(CoreError::Invalid(format!("delta must be nonnegative, got {delta}")));
        }
        let los = forms.has_los();
        Ok(Self {
            forms,
            delta,
            regime,
            los,
        })
    }

    pub fn r(&self) -> usize {
        self.forms.r()
    }

    pub fn is_feasible(&self, omega: &CVector) -> bool {
        self.forms.eve(omega) <= self.delta * (1.0 + FEASIBILITY_SLACK)
    }
}

fn bordered(q: &CMatrix, q_tilde: &CVector) -> CMatrix {
    let r = q.nrows();
    let mut b = CMatrix::zeros(r + 1, r + 1);
    b.view_mut((0, 0), (r, r)).copy_from(q);
    for j in 0..r {
        b[(j, r)] = q_tilde[j].conj();
        b[(r, j)] = q_tilde[j];
    }
    b
}

fn diagonal_constraints(r: usize, regime: Regime) -> (Vec<LinearConstraint>, Vec<LinearConstraint>) {
    let diag = (0..r)
        .map(|i| LinearConstraint::new(ConstraintMatrix::DiagonalEntry(i), 1.0))
        .collect();
    match regime {
        Regime::UnitModulus => (diag, Vec::new()),
        Regime::BoundedMagnitude => (Vec::new(), diag),
    }
}

/// The homogenized relaxation of size `r + 1` with `W[r][r] = 1`.
pub fn homogenize(forms: &QuadraticForms, delta: f64, regime: Regime) -> Result<SdpProblem> {
    let (Some(qb), Some(qe)) = (&forms.q_tilde_b, &forms.q_tilde_e) else {
        return Err(CoreError::MissingLos);
    };
    let r = forms.r();
    let (mut equalities, mut inequalities) = diagonal_constraints(r, regime);
    equalities.push(LinearConstraint::new(ConstraintMatrix::DiagonalEntry(r), 1.0));
    inequalities.push(LinearConstraint::new(
        ConstraintMatrix::Dense(bordered(&forms.q_e, qe)),
        delta - forms.const_e,
    ));
    Ok(SdpProblem {
        objective: bordered(&forms.q_b, qb),
        equalities,
        inequalities,
    })
}

/// The relaxation of the RIS subproblem for the problem's regime, homogenized
/// when direct paths are present.
pub fn assemble_sdr(problem: &RisDesignProblem) -> Result<SdpProblem> {
    if problem.los {
        return homogenize(&problem.forms, problem.delta, problem.regime);
    }
    let (equalities, mut inequalities) = diagonal_constraints(problem.r(), problem.regime);
    inequalities.push(LinearConstraint::new(
        ConstraintMatrix::Dense(problem.forms.q_e.clone()),
        problem.delta,
    ));
    Ok(SdpProblem {
        objective: problem.forms.q_b.clone(),
        equalities,
        inequalities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMethod {
    /// Principal eigenvector.
    Ed,
    /// Gaussian randomization.
    Gr,
    /// Bounded-magnitude fallback: the ED candidate scaled down until Eve's
    /// cap holds.
    Rescaled,
}

/// How Gaussian randomization picks among its draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GrPolicy {
    /// Stop at the first draw that satisfies Eve's cap.
    #[default]
    FirstFeasible,
    /// Use all draws and keep the feasible one with the largest Bob trace.
    BestFeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneResult {
    pub omega: RisProfile,
    pub bob_value: f64,
    pub eve_value: f64,
    pub method: RankMethod,
    pub gr_draws_used: usize,
    pub feasible: bool,
}

/// `W = U Λ U^H` with eigenvalues clipped at zero, largest first.
struct Factor {
    u: CMatrix,
    sqrt_lambda: DVector<f64>,
}

fn factor(w: &CMatrix) -> Result<Factor> {
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CoreError::NumericalTrouble(
            "relaxed solution has non-finite entries".into(),
        ));
    }
    let scale = w.iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if scale == 0.0 {
        return Err(CoreError::NumericalTrouble(
            "relaxed solution is the zero matrix".into(),
        ));
    }
    let h = (w + w.adjoint()) * Complex::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let n = w.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let u = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let sqrt_lambda = DVector::from_fn(n, |j, _| eig.eigenvalues[order[j]].max(0.0).sqrt());
    Ok(Factor { u, sqrt_lambda })
}

/// Maps a lifted vector to a regime-feasible `ω`: undo the homogenizing
/// coordinate, then project each entry (unit modulus: keep the phase with
/// `angle(0) = 0`; bounded: clip the magnitude at one).
fn to_profile(v: &CVector, r: usize, homogenized: bool, regime: Regime) -> CVector {
    let mut w = v.rows(0, r).into_owned();
    if homogenized {
        let t = v[r];
        if t.norm() > 0.0 {
            w /= t;
        }
    }
    w.map(|z| match regime {
        Regime::UnitModulus => Complex::from_polar(1.0, z.im.atan2(z.re)),
        Regime::BoundedMagnitude => {
            let m = z.norm();
            if m > 1.0 {
                z / m
            } else {
                z
            }
        }
    })
}

/// Largest `s` in `[0, 1]` with Eve's trace at `s ω` within the cap, or
/// `None` when even `ω = 0` leaks too much.
fn feasible_scale(problem: &RisDesignProblem, omega: &CVector) -> Option<f64> {
    let (q, qt, c) = problem.forms.parts(Receiver::Eve);
    let a = omega.dotc(&(q * omega)).re.max(0.0);
    let b = qt.map_or(0.0, |qt| omega.dot(qt).re);
    let room = problem.delta - c;
    if room < -problem.delta * FEASIBILITY_SLACK {
        return None;
    }
    let room = room.max(0.0);
    // a s² + 2 b s <= room
    let s = if a > 0.0 {
        (-b + (b * b + a * room).sqrt()) / a
    } else if b > 0.0 {
        room / (2.0 * b)
    } else {
        1.0
    };
    Some(s.clamp(0.0, 1.0))
}

fn finish(
    problem: &RisDesignProblem,
    omega: CVector,
    method: RankMethod,
    draws: usize,
    feasible: bool,
) -> RankOneResult {
    let bob_value = problem.forms.bob(&omega);
    let eve_value = problem.forms.eve(&omega);
    RankOneResult {
        omega: RisProfile {
            omega,
            regime: problem.regime,
        },
        bob_value,
        eve_value,
        method,
        gr_draws_used: draws,
        feasible,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankReduceOptions {
    /// Gaussian randomization budget `L`.
    pub draws: usize,
    pub policy: GrPolicy,
}

impl RankReduceOptions {
    pub fn first_feasible(draws: usize) -> Self {
        Self {
            draws,
            policy: GrPolicy::FirstFeasible,
        }
    }
}

/// Rank-one recovery with the default first-feasible randomization.
pub fn rank_reduce(w: &CMatrix, problem: &RisDesignProblem, draws: usize, rng: &mut Rng) -> Result<RankOneResult> {
    rank_reduce_with(w, problem, &RankReduceOptions::first_feasible(draws), rng)
}

pub fn rank_reduce_with(
    w: &CMatrix,
    problem: &RisDesignProblem,
    opts: &RankReduceOptions,
    rng: &mut Rng,
) -> Result<RankOneResult> {
    let r = problem.r();
    let lifted = r + usize::from(problem.los);
    if w.shape() != (lifted, lifted) {
        return Err(CoreError::Shape(format!(
            "relaxed solution is {}x{}, expected {lifted}x{lifted}",
            w.nrows(),
            w.ncols()
        )));
    }
    if opts.draws < 2 {
        return Err(CoreError::Invalid(format!(
            "randomization budget must exceed 1, got {}",
            opts.draws
        )));
    }
    let f = factor(w)?;
    let ed_vec = f.u.column(0) * Complex::new(f.sqrt_lambda[0], 0.0);
    let ed = to_profile(&ed_vec, r, problem.los, problem.regime);
    if problem.is_feasible(&ed) {
        return Ok(finish(problem, ed, RankMethod::Ed, 0, true));
    }

    let mut best: Option<(f64, CVector, usize)> = None;
    for l in 1..=opts.draws {
        let g = CVector::from_fn(lifted, |i, _| rng.complex_normal(1.0) * f.sqrt_lambda[i]);
        let cand = to_profile(&(&f.u * g), r, problem.los, problem.regime);
        if problem.is_feasible(&cand) {
            match opts.policy {
                GrPolicy::FirstFeasible => return Ok(finish(problem, cand, RankMethod::Gr, l, true)),
                GrPolicy::BestFeasible => {
                    let v = problem.forms.bob(&cand);
                    if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                        best = Some((v, cand, l));
                    }
                }
            }
        }
    }
    if let Some((_, cand, _)) = best {
        return Ok(finish(problem, cand, RankMethod::Gr, opts.draws, true));
    }
    if problem.regime == Regime::BoundedMagnitude {
        if let Some(s) = feasible_scale(problem, &ed) {
            let mut scaled = &ed * Complex::new(s, 0.0);
            // Guard against the closed-form root landing a hair outside.
            let mut guard = 0;
            while !problem.is_feasible(&scaled) && guard < 60 {
                scaled *= Complex::new(1.0 - 1e-12 * 2f64.powi(guard), 0.0);
                guard += 1;
            }
            if problem.is_feasible(&scaled) {
                return Ok(finish(problem, scaled, RankMethod::Rescaled, opts.draws, true));
            }
        }
    }
    Ok(finish(problem, ed, RankMethod::Gr, opts.draws, false))
}

/// The principal-eigenvector candidate of a relaxed solution, mapped to
/// the problem's regime (the first thing rank reduction tries).
pub fn ed_candidate(w: &CMatrix, problem: &RisDesignProblem) -> Result<CVector> {
    let f = factor(w)?;
    let v = f.u.column(0) * Complex::new(f.sqrt_lambda[0], 0.0);
    Ok(to_profile(&v, problem.r(), problem.los, problem.regime))
}

/// Element-wise ascent on the phases of a feasible unit-modulus profile.
///
/// With every other entry fixed, both traces are sinusoids in one phase,
/// `K + 2|z| cos(φ - arg z)`, so the best phase under Eve's cap has a
/// closed form: the unconstrained maximizer if it is feasible, otherwise
/// the better of the two phases where Eve's sinusoid meets the cap.
/// Updates are accepted only when they raise Bob's trace and stay
/// feasible, so the result is never worse than the input. Sweeps stop when
/// one gains less than `1e-12` relative or after `max_sweeps`.
pub fn phase_ascent(problem: &RisDesignProblem, omega: &CVector, max_sweeps: usize) -> CVector {
    let mut w = omega.clone();
    if problem.regime != Regime::UnitModulus || !problem.is_feasible(&w) {
        return w;
    }
    let (qb, tb, _) = problem.forms.parts(Receiver::Bob);
    let (qe, te, _) = problem.forms.parts(Receiver::Eve);
    let mut yb = qb * &w;
    let mut ye = qe * &w;
    let mut bob = problem.forms.bob(&w);
    let mut eve = problem.forms.eve(&w);
    let cap = problem.delta * (1.0 - 1e-12);
    for _ in 0..max_sweeps {
        let start = bob;
        for j in 0..w.len() {
            let old = w[j];
            // Coefficient of conj(ω_j) in each trace, and the rest.
            let zb = yb[j] - qb[(j, j)] * old + tb.map_or(Complex::new(0.0, 0.0), |t| t[j].conj());
            let ze = ye[j] - qe[(j, j)] * old + te.map_or(Complex::new(0.0, 0.0), |t| t[j].conj());
            let kb = bob - 2.0 * (old.conj() * zb).re;
            let ke = eve - 2.0 * (old.conj() * ze).re;
            let eve_at = |phi: f64| ke + 2.0 * ze.norm() * (phi - ze.arg()).cos();
            let bob_at = |phi: f64| kb + 2.0 * zb.norm() * (phi - zb.arg()).cos();
            let mut best = zb.arg();
            if eve_at(best) > cap {
                let c = (cap - ke) / (2.0 * ze.norm());
                if !(c > -1.0) {
                    continue;
                }
                let a = c.min(1.0).acos();
                let (p1, p2) = (ze.arg() + a, ze.arg() - a);
                best = if bob_at(p1) >= bob_at(p2) { p1 } else { p2 };
            }
            if bob_at(best) <= bob_at(old.arg()) {
                continue;
            }
            let new = Complex::from_polar(1.0, best);
            let d = new - old;
            yb += qb.column(j) * d;
            ye += qe.column(j) * d;
            w[j] = new;
            bob = bob_at(best);
            eve = eve_at(best);
        }
        // Resynchronize against drift in the running values.
        bob = problem.forms.bob(&w);
        eve = problem.forms.eve(&w);
        if bob - start <= 1e-12 * bob.abs() {
            break;
        }
    }
    if problem.is_feasible(&w) && problem.forms.bob(&w) >= problem.forms.bob(omega) {
        w
    } else {
        omega.clone()
    }
}

/// A solved relaxation together with its rank-one recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub sdp: SdpSolution,
    /// Relaxation optimum in trace units (constants re-added).
    pub sdr_value: f64,
    pub rank_one: RankOneResult,
}

/// Solves the relaxation and recovers a rank-one profile.
pub fn solve_design(
    problem: &RisDesignProblem,
    opts: &RankReduceOptions,
    sdp_opts: &SdpOptions,
    rng: &mut Rng,
) -> Result<DesignOutcome> {
    let sdp = solve_sdp_with_log(&assemble_sdr(problem)?, sdp_opts, &mut |_| {})?;
    let sdr_value = sdp.objective + problem.forms.const_b;
    let rank_one = match sdp.status {
        SdpStatus::Infeasible | SdpStatus::Unbounded => {
            // No rank-one point can satisfy a relaxation that has none.
            let ones = CVector::from_element(problem.r(), Complex::new(1.0, 0.0));
            finish(problem, ones, RankMethod::Gr, 0, false)
        }
        _ => rank_reduce_with(&sdp.w, problem, opts, rng)?,
    };
    if rank_one.feasible && sdp.status == SdpStatus::Optimal {
        let slack = 1e-6 * sdr_value.abs().max(1.0);
        if rank_one.bob_value > sdr_value + slack || rank_one.bob_value < -slack {
            log::warn!(
                "rank-one value {} outside [0, {}] from the relaxation",
                rank_one.bob_value,
                sdr_value
            );
        }
    }
    Ok(DesignOutcome {
        sdp,
        sdr_value,
        rank_one,
    })
}

/// Smallest achievable Eve trace over unit-modulus profiles, estimated by
/// the minimization relaxation and randomization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMin {
    /// Best rank-one value found; every `Δ` at or above it is feasible.
    pub delta_min: f64,
    /// Optimum of the relaxation, a lower bound on the true minimum.
    pub sdr_bound: f64,
    pub draws: usize,
}

/// `Δ_min` for the homogeneous form `ω^H Q_e ω`.
pub fn feasibility_delta_min(q_e: &CMatrix, draws: usize, rng: &mut Rng) -> Result<DeltaMin> {
    let r = q_e.nrows();
    let forms = QuadraticForms {
        q_b: CMatrix::zeros(r, r),
        q_e: q_e.clone(),
        q_tilde_b: None,
        q_tilde_e: None,
        const_b: 0.0,
        const_e: 0.0,
        warnings: vec![],
    };
    feasibility_delta_min_forms(&forms, draws, rng)
}

/// `Δ_min` for Eve's full trace form, homogenized when direct paths exist.
pub fn feasibility_delta_min_forms(forms: &QuadraticForms, draws: usize, rng: &mut Rng) -> Result<DeltaMin> {
    if draws < 2 {
        return Err(CoreError::Invalid(format!(
            "randomization budget must exceed 1, got {draws}"
        )));
    }
    let r = forms.r();
    let los = forms.has_los();
    let (mut equalities, _) = diagonal_constraints(r, Regime::UnitModulus);
    let objective = match &forms.q_tilde_e {
        Some(qt) => {
            equalities.push(LinearConstraint::new(ConstraintMatrix::DiagonalEntry(r), 1.0));
            bordered(&forms.q_e, qt)
        }
        None => forms.q_e.clone(),
    };
    let problem = SdpProblem {
        objective: -objective.clone(),
        equalities,
        inequalities: vec![],
    };
    let sol = solve_sdp_with_log(&problem, &SdpOptions::default(), &mut |_| {})?;
    if !matches!(sol.status, SdpStatus::Optimal | SdpStatus::MaxIter) {
        return Err(CoreError::NumericalTrouble(format!(
            "minimization relaxation ended with {:?}",
            sol.status
        )));
    }
    // The dual value bounds the minimum from below; the primal value only
    // approaches it from above.
    let primal = (&objective * &sol.w).trace().re;
    let sdr_bound = primal.min(-sol.dual_objective) + forms.const_e;

    let f = factor(&sol.w)?;
    let lifted = f.u.nrows();
    let ed_vec = f.u.column(0) * Complex::new(f.sqrt_lambda[0], 0.0);
    let mut best = forms.eve(&to_profile(&ed_vec, r, los, Regime::UnitModulus));
    for _ in 0..draws {
        let g = CVector::from_fn(lifted, |i, _| rng.complex_normal(1.0) * f.sqrt_lambda[i]);
        let v = forms.eve(&to_profile(&(&f.u * g), r, los, Regime::UnitModulus));
        if v < best {
            best = v;
        }
    }
    Ok(DeltaMin {
        delta_min: best,
        sdr_bound,
        draws,
    })
}
