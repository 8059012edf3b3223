//! Power allocation for a fixed RIS profile.
//!
//! With `α`, `β` the diagonals of Bob's and Eve's `A` matrices the traces
//! are linear in the powers, so the subproblem is the two-row LP
//!
//! ```text
//! maximize  αᵀp   s.t.  βᵀp <= Δ,  1ᵀp <= P_Σ,  p >= 0.
//! ```
//!
//! Its vertex optima have at most two nonzero entries, which the
//! exhaustive [`two_support_oracle`] exploits.

use nalgebra::DMatrix;
use ris_conic::{solve_lp, LpProblem, LpStatus};

use crate::error::{CoreError, Result};
use crate::model::PowerAllocation;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub budget: f64,
}

impl PowerProblem {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, delta: f64, budget: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            delta,
            budget,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.beta.len() || self.alpha.is_empty() {
            return Err(CoreError::Shape(format!(
                "alpha has {} entries and beta has {}",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        let bad = |v: &f64| !(*v >= 0.0) || !v.is_finite();
        if self.alpha.iter().chain(&self.beta).any(bad) {
            return Err(CoreError::Invalid(
                "alpha and beta must be finite and nonnegative".into(),
            ));
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

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// `αᵀp`, Bob's trace.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.alpha.iter().zip(p).map(|(a, b)| a * b).sum()
    }

    /// `βᵀp`, Eve's trace.
    pub fn leakage(&self, p: &[f64]) -> f64 {
        self.beta.iter().zip(p).map(|(a, b)| a * b).sum()
    }
}

/// Zeroes powers below `1e-12 P_Σ`.
fn snap(mut p: Vec<f64>, budget: f64) -> Vec<f64> {
    for v in &mut p {
        if *v < 1e-12 * budget {
            *v = 0.0;
        }
    }
    p
}

/// Pulls a slightly infeasible vertex (from round-off in the tableau) back
/// inside both rows by uniform scaling.
fn restore(mut p: Vec<f64>, problem: &PowerProblem) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    let leak = problem.leakage(&p);
    let mut s = 1.0f64;
    if total > problem.budget {
        s = s.min(problem.budget / total);
    }
    if leak > problem.delta {
        s = s.min(if leak > 0.0 { problem.delta / leak } else { 1.0 });
    }
    if s < 1.0 {
        for v in &mut p {
            *v *= s;
        }
    }
    p
}

/// Exact LP optimum, returned as a vertex with at most two positive powers.
pub fn optimal_power(problem: &PowerProblem) -> Result<PowerAllocation> {
    problem.validate()?;
    let k = problem.k();
    let a = DMatrix::from_fn(2, k, |r, j| if r == 0 { problem.beta[j] } else { 1.0 });
    let lp = LpProblem::new(problem.alpha.clone(), a, vec![problem.delta, problem.budget])?;
    let s = solve_lp(&lp)?;
    if s.status != LpStatus::Optimal {
        return Err(CoreError::NumericalTrouble(format!("power LP returned {:?}", s.status)));
    }
    let p = restore(snap(s.x, problem.budget), problem);
    PowerAllocation::new(p, problem.budget)
}

/// Best basic solution over single indices and index pairs. Single index
/// `i` takes `min(P_Σ, Δ/β_i)`; a pair makes both rows tight. Ties keep
/// the first candidate in enumeration order (singles by index, then pairs
/// lexicographically).
pub fn two_support_oracle(problem: &PowerProblem) -> Result<PowerAllocation> {
    problem.validate()?;
    let k = problem.k();
    if k > 64 {
        return Err(CoreError::Invalid(format!("oracle limited to k <= 64, got {k}")));
    }
    let (d, budget) = (problem.delta, problem.budget);
    let mut best = vec![0.0; k];
    let mut best_value = 0.0;
    let mut consider = |p: Vec<f64>| {
        let v = problem.objective(&p);
        if v > best_value * (1.0 + 1e-12) && v > 0.0 {
            best_value = v;
            best = p;
        }
    };
    for i in 0..k {
        let cap = if problem.beta[i] > 0.0 {
            budget.min(d / problem.beta[i])
        } else {
            budget
        };
        let mut p = vec![0.0; k];
        p[i] = cap;
        consider(p);
    }
    for i in 0..k {
        for j in i + 1..k {
            let (bi, bj) = (problem.beta[i], problem.beta[j]);
            if bi == bj {
                continue;
            }
            // bi x + bj y = Δ, x + y = P_Σ
            let x = (d - bj * budget) / (bi - bj);
            let y = budget - x;
            if x >= 0.0 && y >= 0.0 {
                let mut p = vec![0.0; k];
                p[i] = x;
                p[j] = y;
                consider(p);
            }
        }
    }
    PowerAllocation::new(restore(snap(best, budget), problem), budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(alpha: &[f64], beta: &[f64], delta: f64, budget: f64) -> PowerProblem {
        PowerProblem::new(alpha.to_vec(), beta.to_vec(), delta, budget).unwrap()
    }

    #[test]
    fn budget_binds() {
        let pr = problem(&[3.0, 1.0], &[1.0, 1.0], 5.0, 4.0);
        let p = optimal_power(&pr).unwrap();
        assert_eq!(p.p, vec![4.0, 0.0]);
        assert!((pr.objective(&p.p) - 12.0).abs() < 1e-12);
        assert_eq!(two_support_oracle(&pr).unwrap().p, vec![4.0, 0.0]);
    }

    #[test]
    fn zero_delta_silences() {
        let pr = problem(&[3.0, 1.0, 2.0], &[0.5, 1.0, 2.0], 0.0, 4.0);
        assert_eq!(optimal_power(&pr).unwrap().p, vec![0.0; 3]);
        assert_eq!(two_support_oracle(&pr).unwrap().p, vec![0.0; 3]);
    }

    #[test]
    fn huge_delta_goes_to_first_argmax() {
        let pr = problem(&[1.0, 5.0, 2.0, 5.0], &[1.0, 1.0, 1.0, 1.0], 1e300, 7.0);
        assert_eq!(optimal_power(&pr).unwrap().p, vec![0.0, 7.0, 0.0, 0.0]);
        assert_eq!(two_support_oracle(&pr).unwrap().p, vec![0.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn single_variable_closed_form() {
        let pr = problem(&[2.0], &[4.0], 6.0, 10.0);
        assert!((optimal_power(&pr).unwrap().p[0] - 1.5).abs() < 1e-12);
        assert!((two_support_oracle(&pr).unwrap().p[0] - 1.5).abs() < 1e-12);
        let pr = problem(&[2.0], &[0.0], 0.0, 10.0);
        assert_eq!(two_support_oracle(&pr).unwrap().p, vec![10.0]);
        assert_eq!(optimal_power(&pr).unwrap().p, vec![10.0]);
    }

    #[test]
    fn degenerate_tie() {
        let pr = problem(&[1.0, 1.0], &[1.0, 1.0], 5.0, 3.0);
        let a = optimal_power(&pr).unwrap();
        let b = two_support_oracle(&pr).unwrap();
        assert!((pr.objective(&a.p) - 3.0).abs() < 1e-12);
        assert!((pr.objective(&b.p) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pair_vertex() {
        // Best ratio index is Eve-heavy; mixing with a cheap one fills both rows.
        let pr = problem(&[4.0, 1.0], &[4.0, 0.5], 6.0, 3.0);
        let p = optimal_power(&pr).unwrap();
        let o = two_support_oracle(&pr).unwrap();
        assert!((pr.objective(&p.p) - pr.objective(&o.p)).abs() < 1e-12);
        assert!(p.p.iter().all(|v| *v > 0.0));
        assert!((pr.leakage(&p.p) - 6.0).abs() < 1e-12 && (p.total() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_problems() {
        assert!(PowerProblem::new(vec![1.0], vec![1.0, 2.0], 1.0, 1.0).is_err());
        assert!(PowerProblem::new(vec![-1.0], vec![1.0], 1.0, 1.0).is_err());
        assert!(PowerProblem::new(vec![1.0], vec![1.0], -1.0, 1.0).is_err());
        assert!(PowerProblem::new(vec![1.0], vec![1.0], 1.0, 0.0).is_err());
    }
}
