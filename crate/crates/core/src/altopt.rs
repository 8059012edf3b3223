//! Alternating optimization of the RIS profile and the powers, and the two
//! single-block benchmarks (RIS design at equal power, power allocation at
//! random phases).
//!
//! Each AO iteration solves the power LP for the current `ω` and then the
//! relaxed RIS subproblem for the new powers. If rank-one recovery finds no
//! point under Eve's cap the previous `ω` is kept; the powers were chosen
//! for it, so the pair stays feasible. Bob's trace after every iteration is
//! recorded in `f_b`. The loop stops once an iteration gains at most `ε` or
//! after `n_max` iterations, and the best recorded iterate is returned.
//!
//! Randomized recovery typically lands strictly inside Eve's cap. With
//! `local_search` on, every recovered unit-modulus profile is refined by
//! element-wise phase ascent, which never lowers Bob's trace and settles on
//! the cap wherever the cap is what stops it.

use ris_conic::SdpOptions;
use serde::Serialize;

use crate::design::{phase_ascent, solve_design, DesignOutcome, GrPolicy, RankReduceOptions, RisDesignProblem};
use crate::error::{CoreError, Result};
use crate::fisher::{build_diagonal_forms, build_quadratic_forms, fim_trace};
use crate::model::{CVector, PowerAllocation, Receiver, Regime, RisProfile, SystemModel};
use crate::power::{optimal_power, PowerProblem};
use crate::rng::Rng;

const INIT_STREAM: u64 = 0x1A17;
const GR_STREAM: u64 = 0x6A55;

pub const AO_RESULT_SCHEMA: &str = "ao_result_v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoConfig {
    /// Convergence threshold on the per-iteration gain in Bob's trace.
    pub epsilon: f64,
    pub n_max: usize,
    /// Gaussian randomization budget `L`.
    pub draws: usize,
    pub gr_policy: GrPolicy,
    pub seed: u64,
    pub regime: Regime,
    pub delta: f64,
    pub budget: f64,
    /// Re-solve the power LP for the selected profile before returning.
    pub polish: bool,
    /// Refine recovered profiles by phase ascent (see the module docs).
    pub local_search: bool,
    #[serde(skip)]
    pub sdp: SdpOptions,
}

impl AoConfig {
    pub fn new(delta: f64, budget: f64, seed: u64) -> Self {
        Self {
            epsilon: 0.1,
            n_max: 20,
            draws: 1000,
            gr_policy: GrPolicy::FirstFeasible,
            seed,
            regime: Regime::UnitModulus,
            delta,
            budget,
            polish: true,
            local_search: true,
            sdp: SdpOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(CoreError::Invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.n_max == 0 {
            return Err(CoreError::Invalid("n_max must be at least 1".into()));
        }
        if self.draws < 2 {
            return Err(CoreError::Invalid(format!("L must exceed 1, got {}", self.draws)));
        }
        if !(self.delta >= 0.0) {
            return Err(CoreError::Invalid(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return Err(CoreError::Invalid(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        Ok(())
    }

    fn rank_options(&self) -> RankReduceOptions {
        RankReduceOptions {
            draws: self.draws,
            policy: self.gr_policy,
        }
    }

    /// The random initial profile shared by AO and the power-only benchmark.
    pub fn initial_profile(&self, r: usize) -> RisProfile {
        RisProfile::random_phases(r, &mut Rng::new(self.seed).substream(&[INIT_STREAM]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    Ao,
    RisOnly,
    PaOnly,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ao => "ao",
            Algorithm::RisOnly => "ris_only",
            Algorithm::PaOnly => "pa_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxIter,
    /// A single-shot benchmark finished.
    SingleStep,
    /// The RIS-only benchmark found no profile under Eve's cap.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoResult {
    pub algorithm: Algorithm,
    pub omega_star: RisProfile,
    pub p_star: PowerAllocation,
    /// Bob's trace after each iteration's RIS step.
    pub f_b_trace: Vec<f64>,
    /// Bob's trace right after each iteration's power step.
    pub after_power_step: Vec<f64>,
    /// `f_b` at the selected iterate.
    pub selected_value: f64,
    /// Bob's trace at the returned `(ω*, p*)`; exceeds `selected_value`
    /// only through the final power re-solve.
    pub bob_value: f64,
    pub eve_value: f64,
    pub iterations_run: usize,
    pub termination: Termination,
    /// RIS steps that kept the previous profile.
    pub infeasible_steps: usize,
    pub feasible: bool,
    pub seed: u64,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct AoDoc<'a> {
    schema: &'static str,
    algorithm: &'static str,
    seed: u64,
    config: &'a AoConfig,
    omega: Vec<[f64; 2]>,
    p: &'a [f64],
    f_b: &'a [f64],
    selected_value: f64,
    bob_value: f64,
    eve_value: f64,
    iterations_run: usize,
    termination: Termination,
    infeasible_steps: usize,
    feasible: bool,
}

impl AoResult {
    pub fn to_json(&self, config: &AoConfig) -> Result<String> {
        let doc = AoDoc {
            schema: AO_RESULT_SCHEMA,
            algorithm: self.algorithm.name(),
            seed: self.seed,
            config,
            omega: self.omega_star.omega.iter().map(|z| [z.re, z.im]).collect(),
            p: &self.p_star.p,
            f_b: &self.f_b_trace,
            selected_value: self.selected_value,
            bob_value: self.bob_value,
            eve_value: self.eve_value,
            iterations_run: self.iterations_run,
            termination: self.termination,
            infeasible_steps: self.infeasible_steps,
            feasible: self.feasible,
        };
        Ok(serde_json::to_string(&doc)?)
    }
}

fn power_step(model: &SystemModel, omega: &RisProfile, config: &AoConfig) -> Result<(PowerAllocation, f64)> {
    let d = build_diagonal_forms(model, omega)?;
    let problem = PowerProblem::new(d.alpha, d.beta, config.delta, config.budget)?;
    let p = optimal_power(&problem)?;
    let value = problem.objective(&p.p);
    Ok((p, value))
}

const ASCENT_SWEEPS: usize = 200;

/// Relaxation, rank-one recovery and, if enabled, phase ascent.
fn design_step(problem: &RisDesignProblem, config: &AoConfig, rng: &mut Rng) -> Result<DesignOutcome> {
    let mut out = solve_design(problem, &config.rank_options(), &config.sdp, rng)?;
    if config.local_search && out.rank_one.feasible {
        let w = phase_ascent(problem, &out.rank_one.omega.omega, ASCENT_SWEEPS);
        out.rank_one.bob_value = problem.forms.bob(&w);
        out.rank_one.eve_value = problem.forms.eve(&w);
        out.rank_one.omega.omega = w;
    }
    Ok(out)
}

enum RisStep {
    Updated(CVector),
    Kept(String),
}

fn ris_step(model: &SystemModel, p: &PowerAllocation, config: &AoConfig, rng: &mut Rng) -> Result<RisStep> {
    let forms = match build_quadratic_forms(model, p) {
        Ok(f) => f,
        // All power silenced (or numerically so): there is nothing to steer.
        Err(CoreError::NotPositiveDefinite { .. }) => return Ok(RisStep::Kept("quadratic form vanished".into())),
        Err(e) => return Err(e),
    };
    let problem = RisDesignProblem::new(forms, config.delta, config.regime)?;
    match design_step(&problem, config, rng) {
        Ok(out) if out.rank_one.feasible => Ok(RisStep::Updated(out.rank_one.omega.omega)),
        Ok(out) => Ok(RisStep::Kept(format!(
            "no feasible rank-one point (relaxation {:?})",
            out.sdp.status
        ))),
        Err(CoreError::NumericalTrouble(msg)) => Ok(RisStep::Kept(msg)),
        Err(e) => Err(e),
    }
}

fn report(
    model: &SystemModel,
    algorithm: Algorithm,
    omega: RisProfile,
    p: PowerAllocation,
    config: &AoConfig,
    feasible: bool,
) -> Result<(RisProfile, PowerAllocation, f64, f64, Algorithm)> {
    let bob = fim_trace(model, &omega, &p, Receiver::Bob)?;
    let eve = fim_trace(model, &omega, &p, Receiver::Eve)?;
    if feasible && eve > config.delta * (1.0 + 1e-9) + 1e-12 {
        log::warn!(
            "{} returned Eve trace {eve} above cap {}",
            algorithm.name(),
            config.delta
        );
    }
    Ok((omega, p, bob, eve, algorithm))
}

/// Joint alternating optimization of `ω` and `p`.
pub fn alternate(model: &SystemModel, config: &AoConfig) -> Result<AoResult> {
    config.validate()?;
    let root = Rng::new(config.seed);
    let mut omega = config.initial_profile(model.dims.r);
    omega.regime = config.regime;

    let mut history: Vec<(RisProfile, PowerAllocation)> = Vec::new();
    let mut f_b = Vec::new();
    let mut after_power_step = Vec::new();
    let mut infeasible_steps = 0;
    let mut warnings = Vec::new();
    let mut n = 0;
    while n < config.n_max {
        let (p, after_p) = power_step(model, &omega, config)?;
        after_power_step.push(after_p);
        let mut rng = root.substream(&[GR_STREAM, n as u64]);
        match ris_step(model, &p, config, &mut rng)? {
            RisStep::Updated(w) => omega.omega = w,
            RisStep::Kept(why) => {
                infeasible_steps += 1;
                warnings.push(format!("iteration {}: {why}", n + 1));
            }
        }
        let d = build_diagonal_forms(model, &omega)?;
        let value: f64 = d.alpha.iter().zip(&p.p).map(|(a, b)| a * b).sum();
        f_b.push(value);
        history.push((omega.clone(), p));
        n += 1;
        if n >= 2 && f_b[n - 1] - f_b[n - 2] <= config.epsilon {
            break;
        }
    }

    let termination = if n == config.n_max {
        Termination::MaxIter
    } else {
        Termination::Converged
    };
    // Best recorded iterate, earliest on ties. A converged run usually ends
    // at its maximum; when its last step lost ground this keeps the peak.
    let mut selected = 0;
    for (i, v) in f_b.iter().enumerate() {
        if *v > f_b[selected] {
            selected = i;
        }
    }
    let (omega_sel, mut p_sel) = history.swap_remove(selected);
    if config.polish {
        p_sel = power_step(model, &omega_sel, config)?.0;
    }
    let (omega_star, p_star, bob_value, eve_value, algorithm) =
        report(model, Algorithm::Ao, omega_sel, p_sel, config, true)?;
    Ok(AoResult {
        algorithm,
        omega_star,
        p_star,
        selected_value: f_b[selected],
        f_b_trace: f_b,
        after_power_step,
        bob_value,
        eve_value,
        iterations_run: n,
        termination,
        infeasible_steps,
        feasible: true,
        seed: config.seed,
        warnings,
    })
}

/// RIS design at equal power `P_Σ / k`.
pub fn ris_only_benchmark(model: &SystemModel, config: &AoConfig) -> Result<AoResult> {
    config.validate()?;
    let p = PowerAllocation::equal(model.dims.k, config.budget)?;
    let forms = build_quadratic_forms(model, &p)?;
    let problem = RisDesignProblem::new(forms, config.delta, config.regime)?;
    let mut rng = Rng::new(config.seed).substream(&[GR_STREAM, 0]);
    let out = design_step(&problem, config, &mut rng)?;
    let feasible = out.rank_one.feasible;
    let omega = out.rank_one.omega;
    let (omega_star, p_star, bob_value, eve_value, algorithm) =
        report(model, Algorithm::RisOnly, omega, p, config, feasible)?;
    let mut warnings = Vec::new();
    if !feasible {
        warnings.push(format!("relaxation {:?}, no feasible rank-one point", out.sdp.status));
    }
    Ok(AoResult {
        algorithm,
        omega_star,
        p_star,
        f_b_trace: vec![bob_value],
        after_power_step: vec![],
        selected_value: bob_value,
        bob_value,
        eve_value,
        iterations_run: 1,
        termination: if feasible {
            Termination::SingleStep
        } else {
            Termination::Infeasible
        },
        infeasible_steps: usize::from(!feasible),
        feasible,
        seed: config.seed,
        warnings,
    })
}

/// Power allocation at the seeded random profile AO starts from.
pub fn pa_only_benchmark(model: &SystemModel, config: &AoConfig) -> Result<AoResult> {
    config.validate()?;
    let omega = config.initial_profile(model.dims.r);
    let (p, value) = power_step(model, &omega, config)?;
    let (omega_star, p_star, bob_value, eve_value, algorithm) =
        report(model, Algorithm::PaOnly, omega, p, config, true)?;
    Ok(AoResult {
        algorithm,
        omega_star,
        p_star,
        f_b_trace: vec![value],
        after_power_step: vec![value],
        selected_value: value,
        bob_value,
        eve_value,
        iterations_run: 1,
        termination: Termination::SingleStep,
        infeasible_steps: 0,
        feasible: true,
        seed: config.seed,
        warnings: vec![],
    })
}

/// Runs one algorithm by tag.
pub fn run_algorithm(algorithm: Algorithm, model: &SystemModel, config: &AoConfig) -> Result<AoResult> {
    match algorithm {
        Algorithm::Ao => alternate(model, config),
        Algorithm::RisOnly => ris_only_benchmark(model, config),
        Algorithm::PaOnly => pa_only_benchmark(model, config),
    }
}
