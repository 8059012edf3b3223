//! Dense two-phase primal simplex for `maximize c·x  s.t.  A x <= b, x >= 0`.
//!
//! The tableau is kept explicitly. Pivoting follows Bland's rule (lowest
//! eligible index enters, lowest basic index leaves on ratio ties), which
//! rules out cycling and makes the returned vertex a deterministic function
//! of the input. Sizes targeted here are tiny (a handful of rows, at most a
//! few dozen columns) so no effort goes into sparsity or factor updates.

use nalgebra::DMatrix;

use crate::ConicError;

/// Linear program in inequality form with implicit `x >= 0` bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Objective coefficients (maximized).
    pub c: Vec<f64>,
    /// Inequality rows, one per constraint.
    pub a_ub: DMatrix<f64>,
    pub b_ub: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: LpStatus,
    pub pivots: usize,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a_ub: DMatrix<f64>, b_ub: Vec<f64>) -> Result<Self, ConicError> {
        let p = Self { c, a_ub, b_ub };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.a_ub.ncols() != self.c.len() {
            return Err(ConicError::Shape(format!(
                "A has {} columns but c has {} entries",
                self.a_ub.ncols(),
                self.c.len()
            )));
        }
        if self.a_ub.nrows() != self.b_ub.len() {
            return Err(ConicError::Shape(format!(
                "A has {} rows but b has {} entries",
                self.a_ub.nrows(),
                self.b_ub.len()
            )));
        }
        let finite =
            self.c.iter().chain(self.b_ub.iter()).all(|v| v.is_finite()) && self.a_ub.iter().all(|v| v.is_finite());
        if !finite {
            return Err(ConicError::NonFinite);
        }
        Ok(())
    }
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    t: DMatrix<f64>,
    /// Reduced costs `d_j = c_j - c_B B^{-1} a_j` and, in the last slot,
    /// the negated objective value.
    d: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.cols)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.t[(row, col)];
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        let f = self.d[col];
        if f != 0.0 {
            for j in 0..width {
                self.d[j] -= f * self.t[(row, j)];
            }
            self.d[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reset reduced costs for the objective `cost` (indexed by column).
    fn price(&mut self, cost: &[f64]) {
        let width = self.cols + 1;
        self.d = vec![0.0; width];
        self.d[..self.cols].copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for j in 0..width {
                    self.d[j] -= cb * self.t[(i, j)];
                }
            }
        }
    }

    /// Runs Bland-rule simplex iterations over the columns allowed by
    /// `eligible`. Returns `false` if the objective is unbounded.
    fn optimize(&mut self, eligible: &dyn Fn(usize) -> bool, d_tol: f64) -> bool {
        let limit = 100 * (self.cols + self.t.nrows() + 1);
        for _ in 0..limit {
            let entering = (0..self.cols).find(|&j| eligible(j) && self.d[j] > d_tol);
            let Some(col) = entering else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                let a = self.t[(i, col)];
                if a > 1e-12 {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
        // Bland's rule cannot cycle; reaching the cap means round-off has
        // made pricing inconsistent. The current basis is still feasible.
        true
    }
}

/// Solves the LP. Returns a basic (vertex) solution when optimal.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, ConicError> {
    problem.validate()?;
    let m = problem.a_ub.nrows();
    let n = problem.c.len();

    let negative_rows: Vec<usize> = (0..m).filter(|&i| problem.b_ub[i] < 0.0).collect();
    let n_art = negative_rows.len();
    let cols = n + m + n_art;

    let mut t = DMatrix::<f64>::zeros(m, cols + 1);
    let mut basis = vec![0usize; m];
    let mut art = 0;
    for i in 0..m {
        let sign = if problem.b_ub[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * problem.a_ub[(i, j)];
        }
        t[(i, n + i)] = sign;
        t[(i, cols)] = sign * problem.b_ub[i];
        if sign < 0.0 {
            t[(i, n + m + art)] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau {
        t,
        d: Vec::new(),
        basis,
        cols,
        pivots: 0,
    };

    let c_scale = problem.c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let d_tol = 1e-11 * c_scale;

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for v in phase1.iter_mut().skip(n + m) {
            *v = -1.0;
        }
        tab.price(&phase1);
        tab.optimize(&|_| true, 1e-11);
        let b_scale = problem.b_ub.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + m)
            .map(|i| tab.rhs(i).abs())
            .sum();
        if infeasibility > 1e-9 * b_scale {
            return Ok(finish(&tab, problem, LpStatus::Infeasible));
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&problem.c);
    tab.price(&cost);
    let bounded = tab.optimize(&|j| j < n + m, d_tol);
    let status = if bounded {
        LpStatus::Optimal
    } else {
        LpStatus::Unbounded
    };
    Ok(finish(&tab, problem, status))
}

fn finish(tab: &Tableau, problem: &LpProblem, status: LpStatus) -> LpSolution {
    let n = problem.c.len();
    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let value = x.iter().zip(&problem.c).map(|(a, b)| a * b).sum();
    LpSolution {
        x,
        value,
        status,
        pivots: tab.pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64]) -> LpProblem {
        let a = DMatrix::from_fn(rows.len(), c.len(), |i, j| rows[i][j]);
        LpProblem::new(c.to_vec(), a, b.to_vec()).unwrap()
    }

    #[test]
    fn budget_row_binds() {
        let s = solve_lp(&lp(&[3.0, 1.0], &[&[1.0, 1.0], &[1.0, 1.0]], &[5.0, 4.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 4.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        assert!((s.value - 12.0).abs() < 1e-12);
    }

    #[test]
    fn two_rows_bind() {
        let s = solve_lp(&lp(&[3.0, 1.0], &[&[2.0, 0.0], &[1.0, 1.0]], &[4.0, 4.0])).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn slack_secrecy_row_is_knapsack() {
        let s = solve_lp(&lp(
            &[2.0, 7.0, 5.0],
            &[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]],
            &[1e12, 30.0],
        ))
        .unwrap();
        assert_eq!(s.x, vec![0.0, 30.0, 0.0]);
        assert!((s.value - 210.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_phase_one() {
        // x1 + x2 <= 1 and -x1 - x2 <= -2
        let s = solve_lp(&lp(&[1.0, 1.0], &[&[1.0, 1.0], &[-1.0, -1.0]], &[1.0, -2.0])).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn negative_rhs_feasible() {
        // maximize -x1 subject to x1 >= 1 and x1 <= 3
        let s = solve_lp(&lp(&[-1.0], &[&[-1.0], &[1.0]], &[-1.0, 3.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_detected() {
        let s = solve_lp(&lp(&[1.0, 1.0], &[&[1.0, -1.0]], &[1.0])).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn shape_errors() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(LpProblem::new(vec![1.0; 2], a.clone(), vec![0.0; 2]).is_err());
        assert!(LpProblem::new(vec![1.0; 3], a, vec![0.0; 1]).is_err());
    }
}
