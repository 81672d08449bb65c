//! A small primal-dual interior-point solver for linear matrix inequalities.
//!
//! Problems are posed in inequality form:
//!
//! ```text
//! maximize  b'y
//! s.t.      F0_j + sum_k y_k F_kj  >= 0   (PSD, one per block j)
//!           c_r  + sum_k a_rk y_k  >= 0   (scalar rows)
//! ```
//!
//! The solver is an infeasible-start method with the HKM search direction
//! and a Mehrotra predictor-corrector step. It is meant for the modest sizes
//! produced by Lyapunov certificate searches (blocks of tens of rows, up to
//! a few thousand variables).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::linalg::symmetrize;

/// Environment variable overriding the default iteration budget.
pub const BUDGET_ENV: &str = "CKSTAB_SOLVER_BUDGET";

#[derive(Clone, Debug)]
pub struct SdpSettings {
    pub max_iter: usize,
    pub tol: f64,
    /// Stop as soon as a strictly feasible `y` with `b'y >= target` is found.
    pub target: Option<f64>,
}

impl Default for SdpSettings {
    fn default() -> Self {
        let max_iter = std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(200);
        SdpSettings {
            max_iter,
            tol: 1e-9,
            target: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// `b'y >= target` at a strictly feasible point.
    TargetReached,
    /// A nearly feasible primal point proves the optimum is below the target.
    TargetUnreachable,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    pub dual_objective: f64,
    pub primal_objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
struct Block {
    n: usize,
    /// `Z = c - sum_k y_k a_k`
    c: DMatrix<f64>,
    a: Vec<(usize, DMatrix<f64>)>,
}

#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<Block>,
    lp_c: Vec<f64>,
    lp_a: Vec<Vec<(usize, f64)>>,
}

/// An affine symmetric matrix `F0 + sum_k y_k F_k` under construction.
#[derive(Clone, Debug)]
pub struct LmiBuilder {
    constant: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBuilder {
    pub fn new(n: usize) -> Self {
        LmiBuilder {
            constant: DMatrix::zeros(n, n),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn add_constant(&mut self, m: &DMatrix<f64>) {
        self.constant += m;
    }

    /// Adds `y_var * coef`. `coef` must be symmetric.
    pub fn add_term(&mut self, var: usize, coef: &DMatrix<f64>) {
        match self.terms.iter_mut().find(|(k, _)| *k == var) {
            Some((_, m)) => *m += coef,
            None => self.terms.push((var, coef.clone())),
        }
    }

    /// Evaluates the affine matrix at `y`.
    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (k, m) in &self.terms {
            out += m * y[*k];
        }
        out
    }
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        SdpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn add_lmi(&mut self, lmi: LmiBuilder) {
        let n = lmi.size();
        let a = lmi
            .terms
            .into_iter()
            .filter(|(_, m)| m.iter().any(|&v| v != 0.0))
            .map(|(k, m)| (k, -m))
            .collect();
        self.blocks.push(Block {
            n,
            c: lmi.constant,
            a,
        });
    }

    /// Adds the scalar constraint `c + sum a_k y_k >= 0`.
    pub fn add_linear(&mut self, c: f64, terms: &[(usize, f64)]) {
        self.lp_c.push(c);
        self.lp_a
            .push(terms.iter().map(|&(k, v)| (k, -v)).collect());
    }

    fn dual_slack(&self, y: &[f64]) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let z = self
            .blocks
            .iter()
            .map(|b| {
                let mut s = b.c.clone();
                for (k, a) in &b.a {
                    s -= a * y[*k];
                }
                s
            })
            .collect();
        let zl = self
            .lp_c
            .iter()
            .zip(&self.lp_a)
            .map(|(c, row)| c - row.iter().map(|&(k, v)| v * y[k]).sum::<f64>())
            .collect();
        (z, zl)
    }

    fn apply_a(&self, x: &[DMatrix<f64>], xl: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_vars);
        for (b, xb) in self.blocks.iter().zip(x) {
            for (k, a) in &b.a {
                out[*k] += a.dot(xb);
            }
        }
        for (row, xv) in self.lp_a.iter().zip(xl) {
            for &(k, v) in row {
                out[k] += v * xv;
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let z = self
            .blocks
            .iter()
            .map(|b| {
                let mut s = DMatrix::zeros(b.n, b.n);
                for (k, a) in &b.a {
                    s += a * y[*k];
                }
                s
            })
            .collect();
        let zl = self
            .lp_a
            .iter()
            .map(|row| row.iter().map(|&(k, v)| v * y[k]).sum())
            .collect();
        (z, zl)
    }

    fn is_strictly_feasible(&self, y: &[f64]) -> bool {
        let (z, zl) = self.dual_slack(y);
        zl.iter().all(|&v| v > 0.0) && z.into_iter().all(|m| Cholesky::new(m).is_some())
    }

    /// Runs the interior-point iteration.
    pub fn solve(&self, settings: &SdpSettings) -> SdpSolution {
        Solver::new(self).run(settings)
    }
}

struct Solver<'a> {
    p: &'a SdpProblem,
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    y: DVector<f64>,
    b: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dy: DVector<f64>,
}

impl<'a> Solver<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let b = DVector::from_vec(p.objective.clone());
        let bmax = b.amax();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for blk in &p.blocks {
            let n = blk.n as f64;
            let anorm = blk.a.iter().map(|(_, a)| a.norm()).fold(0.0, f64::max);
            let xi = 10f64.max(n.sqrt()).max(n * (1.0 + bmax) / (1.0 + anorm));
            let eta = 10f64.max(n.sqrt()).max(anorm).max(blk.c.norm());
            x.push(DMatrix::identity(blk.n, blk.n) * xi);
            z.push(DMatrix::identity(blk.n, blk.n) * eta);
        }
        let lpn = p.lp_c.len();
        let cmax = p.lp_c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Solver {
            p,
            x,
            z,
            xl: vec![10.0; lpn],
            zl: vec![10f64.max(cmax); lpn],
            y: DVector::zeros(p.num_vars),
            b,
        }
    }

    fn total_dim(&self) -> f64 {
        (self.p.blocks.iter().map(|b| b.n).sum::<usize>() + self.p.lp_c.len()) as f64
    }

    fn mu(&self) -> f64 {
        let s: f64 = self.x.iter().zip(&self.z).map(|(x, z)| x.dot(z)).sum::<f64>()
            + self.xl.iter().zip(&self.zl).map(|(a, b)| a * b).sum::<f64>();
        s / self.total_dim()
    }

    fn primal_objective(&self) -> f64 {
        self.p
            .blocks
            .iter()
            .zip(&self.x)
            .map(|(b, x)| b.c.dot(x))
            .sum::<f64>()
            + self.p.lp_c.iter().zip(&self.xl).map(|(c, x)| c * x).sum::<f64>()
    }

    fn run(mut self, settings: &SdpSettings) -> SdpSolution {
        let n = self.total_dim();
        let bnorm = self.b.norm();
        let cnorm = self
            .p
            .blocks
            .iter()
            .map(|b| b.c.norm_squared())
            .sum::<f64>()
            .sqrt();
        let mut status = SdpStatus::IterationLimit;
        let mut iter = 0;
        while iter < settings.max_iter {
            let dobj = self.b.dot(&self.y);
            let pobj = self.primal_objective();
            let (ay, ayl) = self.p.apply_at(&self.y);
            let rd: Vec<DMatrix<f64>> = self
                .p
                .blocks
                .iter()
                .zip(&ay)
                .zip(&self.z)
                .map(|((b, a), z)| &b.c - a - z)
                .collect();
            let rdl: Vec<f64> = (0..self.xl.len())
                .map(|r| self.p.lp_c[r] - ayl[r] - self.zl[r])
                .collect();
            let rp = &self.b - self.p.apply_a(&self.x, &self.xl);
            let mu = self.mu();

            let pinf = rp.norm() / (1.0 + bnorm);
            let dinf = (rd.iter().map(|m| m.norm_squared()).sum::<f64>()
                + rdl.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
                / (1.0 + cnorm);
            let gap = mu * n / (1.0 + pobj.abs() + dobj.abs());

            if let Some(target) = settings.target {
                if dobj >= target {
                    let y: Vec<f64> = self.y.iter().copied().collect();
                    if self.p.is_strictly_feasible(&y) {
                        status = SdpStatus::TargetReached;
                        break;
                    }
                }
                if pinf < 1e-8 && pobj < target && dinf < 1e-6 {
                    status = SdpStatus::TargetUnreachable;
                    break;
                }
            }
            if pinf < settings.tol && dinf < settings.tol && gap < settings.tol {
                status = SdpStatus::Optimal;
                break;
            }

            let Some(zinv) = self
                .z
                .iter()
                .map(|z| Cholesky::new(z.clone()).map(|c| c.inverse()))
                .collect::<Option<Vec<_>>>()
            else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let Some(schur) = self.schur(&zinv) else {
                status = SdpStatus::NumericalFailure;
                break;
            };

            // predictor
            let rc: Vec<DMatrix<f64>> = self.x.iter().zip(&self.z).map(|(x, z)| -(x * z)).collect();
            let rcl: Vec<f64> = self.xl.iter().zip(&self.zl).map(|(x, z)| -x * z).collect();
            let Some(aff) = self.direction(&schur, &zinv, &rp, &rd, &rdl, &rc, &rcl) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let ap = self.step_length(&self.x, &self.xl, &aff.dx, &aff.dxl);
            let ad = self.step_length(&self.z, &self.zl, &aff.dz, &aff.dzl);
            let mu_aff = {
                let s: f64 = (0..self.x.len())
                    .map(|j| (&self.x[j] + &aff.dx[j] * ap).dot(&(&self.z[j] + &aff.dz[j] * ad)))
                    .sum::<f64>()
                    + (0..self.xl.len())
                        .map(|r| (self.xl[r] + ap * aff.dxl[r]) * (self.zl[r] + ad * aff.dzl[r]))
                        .sum::<f64>();
                s / n
            };
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let rc: Vec<DMatrix<f64>> = (0..self.x.len())
                .map(|j| {
                    let sz = self.x[j].nrows();
                    DMatrix::identity(sz, sz) * (sigma * mu)
                        - &self.x[j] * &self.z[j]
                        - &aff.dx[j] * &aff.dz[j]
                })
                .collect();
            let rcl: Vec<f64> = (0..self.xl.len())
                .map(|r| sigma * mu - self.xl[r] * self.zl[r] - aff.dxl[r] * aff.dzl[r])
                .collect();
            let Some(d) = self.direction(&schur, &zinv, &rp, &rd, &rdl, &rc, &rcl) else {
                status = SdpStatus::NumericalFailure;
                break;
            };
            let ap = (0.95 * self.step_length(&self.x, &self.xl, &d.dx, &d.dxl)).min(1.0);
            let ad = (0.95 * self.step_length(&self.z, &self.zl, &d.dz, &d.dzl)).min(1.0);
            for j in 0..self.x.len() {
                self.x[j] += &d.dx[j] * ap;
                self.z[j] += &d.dz[j] * ad;
            }
            for r in 0..self.xl.len() {
                self.xl[r] += ap * d.dxl[r];
                self.zl[r] += ad * d.dzl[r];
            }
            self.y += &d.dy * ad;
            iter += 1;
            if !self.y.iter().all(|v| v.is_finite()) {
                status = SdpStatus::NumericalFailure;
                break;
            }
        }
        SdpSolution {
            status,
            dual_objective: self.b.dot(&self.y),
            primal_objective: self.primal_objective(),
            y: self.y.iter().copied().collect(),
            iterations: iter,
        }
    }

    /// `M_kl = tr(A_k X A_l Z^-1)` plus the scalar rows' contribution.
    fn schur(&self, zinv: &[DMatrix<f64>]) -> Option<DMatrix<f64>> {
        let m = self.p.num_vars;
        let mut s = DMatrix::zeros(m, m);
        for (j, blk) in self.p.blocks.iter().enumerate() {
            for (k, ak) in &blk.a {
                let g = &self.x[j] * ak * &zinv[j];
                for (l, al) in &blk.a {
                    s[(*k, *l)] += al.dot(&g);
                }
            }
        }
        for (r, row) in self.p.lp_a.iter().enumerate() {
            let w = self.xl[r] / self.zl[r];
            for &(k, vk) in row {
                for &(l, vl) in row {
                    s[(k, l)] += w * vk * vl;
                }
            }
        }
        let s = symmetrize(&s);
        if s.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(s)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        schur: &DMatrix<f64>,
        zinv: &[DMatrix<f64>],
        rp: &DVector<f64>,
        rd: &[DMatrix<f64>],
        rdl: &[f64],
        rc: &[DMatrix<f64>],
        rcl: &[f64],
    ) -> Option<Direction> {
        // rhs = rp - A(Rc Z^-1) + A(X Rd Z^-1)
        let t: Vec<DMatrix<f64>> = (0..self.x.len())
            .map(|j| (&rc[j] - &self.x[j] * &rd[j]) * &zinv[j])
            .collect();
        let tl: Vec<f64> = (0..self.xl.len())
            .map(|r| (rcl[r] - self.xl[r] * rdl[r]) / self.zl[r])
            .collect();
        let rhs = rp - self.p.apply_a(&t, &tl);
        let dy = solve_spd(schur, &rhs)?;
        let (ady, adyl) = self.p.apply_at(&dy);
        let dz: Vec<DMatrix<f64>> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
        let dzl: Vec<f64> = rdl.iter().zip(&adyl).map(|(r, a)| r - a).collect();
        let dx: Vec<DMatrix<f64>> = (0..self.x.len())
            .map(|j| symmetrize(&((&rc[j] - &self.x[j] * &dz[j]) * &zinv[j])))
            .collect();
        let dxl: Vec<f64> = (0..self.xl.len())
            .map(|r| (rcl[r] - self.xl[r] * dzl[r]) / self.zl[r])
            .collect();
        Some(Direction {
            dx,
            dz,
            dxl,
            dzl,
            dy,
        })
    }

    /// Largest step `a` keeping `S + a dS` positive semidefinite (capped).
    fn step_length(
        &self,
        s: &[DMatrix<f64>],
        sl: &[f64],
        ds: &[DMatrix<f64>],
        dsl: &[f64],
    ) -> f64 {
        let mut alpha = f64::INFINITY;
        for (m, dm) in s.iter().zip(ds) {
            let Some(ch) = Cholesky::new(m.clone()) else {
                return 0.0;
            };
            let l = ch.l();
            let Some(linv) = l.clone().try_inverse() else {
                return 0.0;
            };
            let w = symmetrize(&(&linv * dm * linv.transpose()));
            let lmin = SymmetricEigen::new(w).eigenvalues.min();
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        for (v, dv) in sl.iter().zip(dsl) {
            if *dv < 0.0 {
                alpha = alpha.min(-v / dv);
            }
        }
        alpha.min(1e3)
    }
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch.solve(rhs));
    }
    let reg = 1e-12 * m.diagonal().amax().max(1e-300);
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] += reg;
    }
    if let Some(ch) = Cholesky::new(shifted) {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}
