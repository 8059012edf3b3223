//! Infeasible-start primal-dual interior-point method for real SDPs with one
//! semidefinite block and one nonnegative-orthant block.
//!
//! Primal:  minimize  <C, X> + c_l·x_l
//!          s.t.      <A_i, X> + a_i·x_l = b_i,   X ⪰ 0, x_l ≥ 0
//! Dual:    maximize  b·y
//!          s.t.      Σ y_i A_i + Z = C,  Σ y_i a_i + z_l = c_l,  Z ⪰ 0, z_l ≥ 0
//!
//! Search direction: HKM (H..K..M) with Mehrotra predictor-corrector.
//! Centering: `σ = (μ_aff / μ)^3`. Step length: fraction `γ = 0.9 + 0.09 ·
//! min(α_p, α_d)` of the distance to the cone boundary, separately for primal
//! and dual, with `α` taken from the predictor step. Starting point: scaled
//! identities `X = ξ I`, `Z = η I` with the usual data-dependent `ξ`, `η`.
//! Data are normalized (each constraint row and the objective to unit norm)
//! before iterating.
//!
//! When `embedded` is set the problem is the real embedding of a Hermitian
//! SDP. All data then commute with `J = [[0,-I],[I,0]]`, the HKM direction
//! preserves that structure, and every iterate is re-projected onto the
//! embedding image to stop round-off drift.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::embed::project_onto_image;

#[derive(Debug, Clone)]
pub(crate) enum SymTerm {
    /// Entries `(row, col, value)`; both triangles stored explicitly.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl SymTerm {
    fn dot(&self, m: &DMatrix<f64>) -> f64 {
        match self {
            SymTerm::Sparse(e) => e.iter().map(|&(a, b, v)| v * m[(a, b)]).sum(),
            SymTerm::Dense(a) => a.dot(m),
        }
    }

    fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        match self {
            SymTerm::Sparse(e) => {
                for &(a, b, v) in e {
                    m[(a, b)] += scale * v;
                }
            }
            SymTerm::Dense(a) => *m += a * scale,
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            SymTerm::Sparse(e) => e.iter().map(|&(_, _, v)| v * v).sum(),
            SymTerm::Dense(a) => a.norm_squared(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            SymTerm::Sparse(e) => e.iter_mut().for_each(|t| t.2 *= s),
            SymTerm::Dense(a) => *a *= s,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub mat: Option<SymTerm>,
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub c: DMatrix<f64>,
    pub lp_cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub embedded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RealStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIter,
    NumericalTrouble,
}

/// Per-iteration diagnostics in the solver's normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Objective of the (minimization) primal in normalized units.
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub mu: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RealResult {
    pub x: DMatrix<f64>,
    pub x_lp: Vec<f64>,
    pub status: RealStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    /// Unnormalized primal and dual objectives (minimization sense).
    #[cfg_attr(not(test), allow(dead_code))]
    pub primal_objective: f64,
    pub dual_objective: f64,
}

#[derive(Clone)]
struct Iterate {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: DVector<f64>,
}

struct Measures {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    rdl: Vec<f64>,
    pobj: f64,
    dobj: f64,
    mu: f64,
    relp: f64,
    reld: f64,
    gap: f64,
}

struct Direction {
    dx: DMatrix<f64>,
    dz: DMatrix<f64>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dy: DVector<f64>,
}

pub(crate) struct RealSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub infeasibility_tol: f64,
}

struct Scaled {
    c: DMatrix<f64>,
    cl: Vec<f64>,
    rows: Vec<Row>,
    b: DVector<f64>,
    c_norm: f64,
    n: usize,
    nl: usize,
    embedded: bool,
}

impl Scaled {
    fn new(p: &RealSdp) -> Self {
        let n = p.c.nrows();
        let nl = p.lp_cost.len();
        let mut rows = p.rows.clone();
        let mut b = DVector::zeros(rows.len());
        for (i, row) in rows.iter_mut().enumerate() {
            let mut nsq = row.lp.iter().map(|&(_, v)| v * v).sum::<f64>();
            if let Some(m) = &row.mat {
                nsq += m.norm_sq();
            }
            let norm = if nsq > 0.0 { nsq.sqrt() } else { 1.0 };
            if let Some(m) = row.mat.as_mut() {
                m.scale(1.0 / norm);
            }
            row.lp.iter_mut().for_each(|t| t.1 /= norm);
            row.rhs /= norm;
            b[i] = row.rhs;
        }
        let cn2 = p.c.norm_squared() + p.lp_cost.iter().map(|v| v * v).sum::<f64>();
        let c_norm = if cn2 > 0.0 { cn2.sqrt() } else { 1.0 };
        Self {
            c: &p.c / c_norm,
            cl: p.lp_cost.iter().map(|v| v / c_norm).collect(),
            rows,
            b,
            c_norm,
            n,
            nl,
            embedded: p.embedded,
        }
    }

    fn op(&self, m: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                let mut s = r.mat.as_ref().map_or(0.0, |a| a.dot(m));
                for &(l, w) in &r.lp {
                    s += w * v[l];
                }
                s
            }),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut v = vec![0.0; self.nl];
        for (i, r) in self.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            if let Some(a) = &r.mat {
                a.add_to(&mut m, y[i]);
            }
            for &(l, w) in &r.lp {
                v[l] += y[i] * w;
            }
        }
        (m, v)
    }

    fn measures(&self, it: &Iterate) -> Measures {
        let ax = self.op(&it.x, &it.xl);
        let rp = &self.b - ax;
        let (aty, atyl) = self.adjoint(&it.y);
        let rd = &self.c - aty - &it.z;
        let rdl: Vec<f64> = (0..self.nl).map(|l| self.cl[l] - atyl[l] - it.zl[l]).collect();
        let pobj = self.c.dot(&it.x) + dot(&self.cl, &it.xl);
        let dobj = self.b.dot(&it.y);
        let mu = (it.x.dot(&it.z) + dot(&it.xl, &it.zl)) / (self.n + self.nl) as f64;
        let relp = rp.norm() / (1.0 + self.b.norm());
        let reld = (rd.norm_squared() + rdl.iter().map(|v| v * v).sum::<f64>()).sqrt()
            / (1.0 + (self.c.norm_squared() + dot(&self.cl, &self.cl)).sqrt());
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        Measures {
            rp,
            rd,
            rdl,
            pobj,
            dobj,
            mu,
            relp,
            reld,
            gap,
        }
    }

    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>, ratio: &[f64]) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut schur = DMatrix::zeros(m, m);
        // X A_i Z^{-1} for every dense row.
        let g: Vec<Option<DMatrix<f64>>> = self
            .rows
            .iter()
            .map(|r| match &r.mat {
                Some(SymTerm::Dense(a)) => Some(x * a * zinv),
                _ => None,
            })
            .collect();
        for i in 0..m {
            for j in i..m {
                let v = match (&self.rows[i].mat, &self.rows[j].mat) {
                    (None, _) | (_, None) => 0.0,
                    (Some(_), Some(aj)) if g[i].is_some() => {
                        let gi = g[i].as_ref().unwrap();
                        match aj {
                            SymTerm::Dense(a) => gi.dot(a),
                            SymTerm::Sparse(e) => e.iter().map(|&(c, d, w)| w * gi[(d, c)]).sum(),
                        }
                    }
                    (Some(SymTerm::Sparse(ei)), Some(_)) if g[j].is_some() => {
                        let gj = g[j].as_ref().unwrap();
                        ei.iter().map(|&(c, d, w)| w * gj[(d, c)]).sum()
                    }
                    (Some(SymTerm::Sparse(ei)), Some(SymTerm::Sparse(ej))) => {
                        let mut s = 0.0;
                        for &(a, b, v) in ei {
                            for &(c, d, w) in ej {
                                s += v * w * x[(b, c)] * zinv[(d, a)];
                            }
                        }
                        s
                    }
                    _ => unreachable!("dense rows always have a precomputed product"),
                };
                let mut lp = 0.0;
                for &(l, w) in &self.rows[i].lp {
                    for &(l2, w2) in &self.rows[j].lp {
                        if l == l2 {
                            lp += w * w2 * ratio[l];
                        }
                    }
                }
                schur[(i, j)] = v + lp;
                schur[(j, i)] = v + lp;
            }
        }
        schur
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α` with `X + α dX ⪰ 0`, or infinity.
fn max_step_psd(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let s = sym(&s);
    let lmin = SymmetricEigen::new(s).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Linearization<'a> {
    s: &'a Scaled,
    it: &'a Iterate,
    zinv: DMatrix<f64>,
    schur: Cholesky<f64, Dyn>,
    x_rd_zinv: DMatrix<f64>,
}

impl<'a> Linearization<'a> {
    fn direction(&self, ms: &Measures, sigma_mu: f64, corr: Option<&Direction>) -> Direction {
        let (s, it) = (self.s, self.it);
        let mut rhs_mat = &it.x - &self.zinv * sigma_mu + &self.x_rd_zinv;
        let corr_mat = corr.map(|c| &c.dx * &c.dz * &self.zinv);
        if let Some(cm) = &corr_mat {
            rhs_mat += cm;
        }
        let rhs_lp: Vec<f64> = (0..s.nl)
            .map(|l| {
                let mut v = it.xl[l] - sigma_mu / it.zl[l] + it.xl[l] * ms.rdl[l] / it.zl[l];
                if let Some(c) = corr {
                    v += c.dxl[l] * c.dzl[l] / it.zl[l];
                }
                v
            })
            .collect();
        let rhs = &ms.rp + s.op(&rhs_mat, &rhs_lp);
        let dy = self.schur.solve(&rhs);
        let (aty, atyl) = s.adjoint(&dy);
        let mut dz = &ms.rd - aty;
        symmetrize(&mut dz);
        let dzl: Vec<f64> = (0..s.nl).map(|l| ms.rdl[l] - atyl[l]).collect();
        let mut dx = &self.zinv * sigma_mu - &it.x - sym(&(&it.x * &dz * &self.zinv));
        if let Some(cm) = &corr_mat {
            dx -= sym(cm);
        }
        let dxl: Vec<f64> = (0..s.nl)
            .map(|l| {
                let mut v = sigma_mu / it.zl[l] - it.xl[l] - it.xl[l] * dzl[l] / it.zl[l];
                if let Some(c) = corr {
                    v -= c.dxl[l] * c.dzl[l] / it.zl[l];
                }
                v
            })
            .collect();
        if s.embedded {
            project_onto_image(&mut dx);
            project_onto_image(&mut dz);
        }
        Direction { dx, dz, dxl, dzl, dy }
    }
}

fn step_lengths(it: &Iterate, cx: &Cholesky<f64, Dyn>, cz: &Cholesky<f64, Dyn>, d: &Direction) -> (f64, f64) {
    let ap = max_step_psd(cx, &d.dx).min(max_step_lp(&it.xl, &d.dxl));
    let ad = max_step_psd(cz, &d.dz).min(max_step_lp(&it.zl, &d.dzl));
    (ap, ad)
}

pub(crate) fn solve_real(p: &RealSdp, settings: &RealSettings, log: &mut dyn FnMut(&IterationLog)) -> RealResult {
    let s = Scaled::new(p);
    let n = s.n;
    let nf = n as f64;

    let mut xi: f64 = 10f64.max(nf.sqrt());
    let mut eta: f64 = 10f64.max(nf.sqrt()).max(s.c.norm());
    for (i, r) in s.rows.iter().enumerate() {
        let an = r.mat.as_ref().map_or(0.0, |a| a.norm_sq().sqrt());
        xi = xi.max(nf * (1.0 + s.b[i].abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    let mut it = Iterate {
        x: DMatrix::identity(n, n) * xi,
        z: DMatrix::identity(n, n) * eta,
        xl: vec![xi; s.nl],
        zl: vec![eta; s.nl],
        y: DVector::zeros(s.rows.len()),
    };

    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut stalled = 0usize;
    let (mut last_ap, mut last_ad) = (0.0, 0.0);

    let finish = |it: &Iterate, status: RealStatus, iters: usize, ms: &Measures| RealResult {
        x: it.x.clone(),
        x_lp: it.xl.clone(),
        status,
        iterations: iters,
        primal_residual: ms.relp,
        dual_residual: ms.reld,
        relative_gap: ms.gap,
        primal_objective: ms.pobj * s.c_norm,
        dual_objective: ms.dobj * s.c_norm,
    };

    for iter in 0..=settings.max_iter {
        let ms = s.measures(&it);
        log(&IterationLog {
            iteration: iter,
            primal_objective: ms.pobj,
            dual_objective: ms.dobj,
            primal_residual: ms.relp,
            dual_residual: ms.reld,
            relative_gap: ms.gap,
            mu: ms.mu,
            primal_step: last_ap,
            dual_step: last_ad,
        });
        if !(ms.pobj.is_finite() && ms.dobj.is_finite() && ms.mu.is_finite()) {
            return fallback(&s, best, it, RealStatus::NumericalTrouble, iter, &finish);
        }
        let merit = ms.relp.max(ms.reld).max(ms.gap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, it.clone(), iter));
        }
        if ms.relp <= settings.tol && ms.reld <= settings.tol && ms.gap <= settings.tol {
            return finish(&it, RealStatus::Optimal, iter, &ms);
        }

        // Certificates. A dual ray (y, Z) with b·y > 0 and A*y + Z ≈ 0 proves
        // the primal empty; a primal ray with <C,X> < 0 and A(X) ≈ 0 proves
        // the dual empty.
        if ms.dobj > 0.0 {
            let ray =
                ((&s.c - &ms.rd).norm_squared() + (0..s.nl).map(|l| (s.cl[l] - ms.rdl[l]).powi(2)).sum::<f64>()).sqrt();
            if ray / ms.dobj < settings.infeasibility_tol {
                return finish(&it, RealStatus::PrimalInfeasible, iter, &ms);
            }
        }
        if ms.pobj < 0.0 {
            let ax = (&s.b - &ms.rp).norm();
            if ax / -ms.pobj < settings.infeasibility_tol {
                return finish(&it, RealStatus::DualInfeasible, iter, &ms);
            }
        }
        if iter == settings.max_iter {
            break;
        }

        let (Some(cx), Some(cz)) = (Cholesky::new(it.x.clone()), Cholesky::new(it.z.clone())) else {
            return fallback(&s, best, it, RealStatus::NumericalTrouble, iter, &finish);
        };
        let zinv = cz.inverse();
        let ratio: Vec<f64> = (0..s.nl).map(|l| it.xl[l] / it.zl[l]).collect();
        let mut schur = s.schur(&it.x, &zinv, &ratio);
        let schur_chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let bump = 1e-13 * schur.diagonal().max().max(f64::MIN_POSITIVE);
                for i in 0..schur.nrows() {
                    schur[(i, i)] += bump;
                }
                match Cholesky::new(schur) {
                    Some(c) => c,
                    None => return fallback(&s, best, it, RealStatus::NumericalTrouble, iter, &finish),
                }
            }
        };
        let lin = Linearization {
            s: &s,
            it: &it,
            x_rd_zinv: &it.x * &ms.rd * &zinv,
            zinv,
            schur: schur_chol,
        };

        let pred = lin.direction(&ms, 0.0, None);
        let (ap, ad) = step_lengths(&it, &cx, &cz, &pred);
        let (ap1, ad1) = (ap.min(1.0), ad.min(1.0));
        let x_aff = &it.x + &pred.dx * ap1;
        let z_aff = &it.z + &pred.dz * ad1;
        let lp_aff: f64 = (0..s.nl)
            .map(|l| (it.xl[l] + ap1 * pred.dxl[l]) * (it.zl[l] + ad1 * pred.dzl[l]))
            .sum();
        let mu_aff = (x_aff.dot(&z_aff) + lp_aff) / (n + s.nl) as f64;
        let sigma = (mu_aff.max(0.0) / ms.mu).powi(3).clamp(0.0, 1.0);

        let corr = lin.direction(&ms, sigma * ms.mu, Some(&pred));
        let (ap, ad) = step_lengths(&it, &cx, &cz, &corr);
        let gamma = 0.9 + 0.09 * ap1.min(ad1);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        drop(lin);

        it.x += &corr.dx * ap;
        it.xl.iter_mut().zip(&corr.dxl).for_each(|(v, d)| *v += ap * d);
        it.y += &corr.dy * ad;
        it.z += &corr.dz * ad;
        it.zl.iter_mut().zip(&corr.dzl).for_each(|(v, d)| *v += ad * d);
        symmetrize(&mut it.x);
        symmetrize(&mut it.z);
        if s.embedded {
            project_onto_image(&mut it.x);
            project_onto_image(&mut it.z);
        }
        last_ap = ap;
        last_ad = ad;

        if ap < 1e-9 && ad < 1e-9 {
            stalled += 1;
            if stalled >= 3 {
                return fallback(&s, best, it, RealStatus::NumericalTrouble, iter + 1, &finish);
            }
        } else {
            stalled = 0;
        }
    }
    fallback(&s, best, it, RealStatus::MaxIter, settings.max_iter, &finish)
}

fn fallback(
    s: &Scaled,
    best: Option<(f64, Iterate, usize)>,
    current: Iterate,
    status: RealStatus,
    iters: usize,
    finish: &dyn Fn(&Iterate, RealStatus, usize, &Measures) -> RealResult,
) -> RealResult {
    let it = best.map(|b| b.1).unwrap_or(current);
    let ms = s.measures(&it);
    finish(&it, status, iters, &ms)
}
