//! Censored and kinked structural VAR models and their canonical form.
//!
//! A model in `p` variables and `k` lags is
//!
//! ```text
//! phi0+ y+_t + phi0- y-_t + Phi0x x_t = c + sum_i [phi_i+ y+_{t-i} + phi_i- y-_{t-i} + Phi_ix x_{t-i}] + u_t
//! ```
//!
//! with `y+ = max(y, b)` and `y- = min(y, b)`. Equations are indexed so that
//! row 0 is the `y` equation and rows `1..p` are the `x` equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::frobenius;

/// Which side of the threshold a coefficient block belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    /// Global sign convention: zero belongs to the `+` regime.
    pub fn of(y: f64) -> Side {
        if y >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Side::Plus => '+',
            Side::Minus => '-',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CksvarModel {
    pub p: usize,
    pub k: usize,
    pub threshold: f64,
    pub phi0_plus: DVector<f64>,
    pub phi0_minus: DVector<f64>,
    /// `p x (p-1)`
    pub phi0_x: DMatrix<f64>,
    pub lag_plus: Vec<DVector<f64>>,
    pub lag_minus: Vec<DVector<f64>>,
    pub lag_x: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Row reordering and sign flip that bring a coherent model into normalized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// `row_order[r]` is the original equation placed at position `r`.
    pub row_order: Vec<usize>,
    pub sign: f64,
}

impl Normalization {
    pub fn identity(p: usize) -> Self {
        Normalization {
            row_order: (0..p).collect(),
            sign: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.sign == 1.0 && self.row_order.iter().enumerate().all(|(i, &r)| i == r)
    }

    /// The `p x p` matrix `S` with `S * (equations) = (normalized equations)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.row_order.len();
        let mut s = DMatrix::zeros(p, p);
        for (r, &orig) in self.row_order.iter().enumerate() {
            s[(r, orig)] = self.sign;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub det_plus: f64,
    pub det_minus: f64,
    pub coherent: bool,
    /// Whether the model as given already has an invertible `x` block and
    /// positive Schur complements.
    pub normalized: bool,
    /// Lexicographically first reordering (plus sign flip) that normalizes the
    /// model; `None` when the model is not coherent.
    pub normalization: Option<Normalization>,
}

impl CksvarModel {
    /// A model whose contemporaneous matrix is already canonical, `Phi0 = [[1,1,0],[0,0,I]]`.
    pub fn canonical_form(
        lag_plus: Vec<DVector<f64>>,
        lag_minus: Vec<DVector<f64>>,
        lag_x: Vec<DMatrix<f64>>,
        intercept: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let p = intercept.len();
        let k = lag_plus.len();
        let (phi0_plus, phi0_minus, phi0_x) = canonical_phi0(p);
        let model = CksvarModel {
            p,
            k,
            threshold: 0.0,
            phi0_plus,
            phi0_minus,
            phi0_x,
            lag_plus,
            lag_minus,
            lag_x,
            intercept,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    /// Univariate model `y_t = c + sum_i (a_i y+_{t-i} + b_i y-_{t-i}) + u_t`.
    pub fn univariate(plus: &[f64], minus: &[f64], c: f64, variance: f64) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(dim_err("univariate lags", plus.len(), minus.len()));
        }
        let one = |x: f64| DVector::from_element(1, x);
        Self::canonical_form(
            plus.iter().map(|&a| one(a)).collect(),
            minus.iter().map(|&b| one(b)).collect(),
            vec![DMatrix::zeros(1, 0); plus.len()],
            one(c),
            DMatrix::from_element(1, 1, variance),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (p, k) = (self.p, self.k);
        if p == 0 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        check_len("phi0_plus", &self.phi0_plus, p)?;
        check_len("phi0_minus", &self.phi0_minus, p)?;
        check_shape("phi0_x", &self.phi0_x, p, p - 1)?;
        check_len("c", &self.intercept, p)?;
        check_shape("sigma", &self.sigma, p, p)?;
        for (name, n) in [
            ("lag_plus", self.lag_plus.len()),
            ("lag_minus", self.lag_minus.len()),
            ("lag_x", self.lag_x.len()),
        ] {
            if n != k {
                return Err(dim_err(name, format!("{k} lags"), format!("{n} lags")));
            }
        }
        for i in 0..k {
            check_len("lag_plus", &self.lag_plus[i], p)?;
            check_len("lag_minus", &self.lag_minus[i], p)?;
            check_shape("lag_x", &self.lag_x[i], p, p - 1)?;
        }
        let finite = self.phi0_matrix().iter().all(|x| x.is_finite())
            && (1..=k).all(|i| self.lag_matrix(i).iter().all(|x| x.is_finite()))
            && self.intercept.iter().all(|x| x.is_finite())
            && self.sigma.iter().all(|x| x.is_finite())
            && self.threshold.is_finite();
        if !finite {
            return Err(Error::NonFinite("model parameters"));
        }
        let asym = (&self.sigma - self.sigma.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + self.sigma.abs().max()) {
            return Err(Error::InvalidParameter("sigma is not symmetric".into()));
        }
        Ok(())
    }

    /// `[phi0+ phi0- Phi0x]`, `p x (p+1)`.
    pub fn phi0_matrix(&self) -> DMatrix<f64> {
        stack_columns(&self.phi0_plus, &self.phi0_minus, &self.phi0_x)
    }

    /// `[phi_i+ phi_i- Phi_ix]` for `i` in `1..=k`.
    pub fn lag_matrix(&self, i: usize) -> DMatrix<f64> {
        stack_columns(
            &self.lag_plus[i - 1],
            &self.lag_minus[i - 1],
            &self.lag_x[i - 1],
        )
    }

    /// `Phi0+ = [phi0+ Phi0x]` or `Phi0- = [phi0- Phi0x]`.
    pub fn impact_matrix(&self, side: Side) -> DMatrix<f64> {
        let col = match side {
            Side::Plus => &self.phi0_plus,
            Side::Minus => &self.phi0_minus,
        };
        let mut m = DMatrix::zeros(self.p, self.p);
        m.set_column(0, col);
        m.view_mut((0, 1), (self.p, self.p - 1)).copy_from(&self.phi0_x);
        m
    }

    pub fn is_linear(&self) -> bool {
        self.phi0_plus == self.phi0_minus
            && self
                .lag_plus
                .iter()
                .zip(&self.lag_minus)
                .all(|(a, b)| a == b)
    }

    /// `phi+(1)` and `phi-(1)`: contemporaneous minus summed lag coefficients.
    pub fn long_run_columns(&self) -> (DVector<f64>, DVector<f64>) {
        let plus = self.lag_plus.iter().fold(self.phi0_plus.clone(), |acc, v| acc - v);
        let minus = self
            .lag_minus
            .iter()
            .fold(self.phi0_minus.clone(), |acc, v| acc - v);
        (plus, minus)
    }

    pub fn check_coherence(&self) -> Result<CoherenceReport> {
        self.validate()?;
        let det_plus = self.impact_matrix(Side::Plus).determinant();
        let det_minus = self.impact_matrix(Side::Minus).determinant();
        let coherent = det_plus != 0.0 && det_minus != 0.0 && det_plus.signum() == det_minus.signum();
        let normalized = match schur_complements(&self.phi0_matrix(), self.p) {
            Some((a, b)) => a > 0.0 && b > 0.0,
            None => false,
        };
        let normalization = if coherent {
            find_normalization(&self.phi0_matrix(), self.p)
        } else {
            None
        };
        Ok(CoherenceReport {
            det_plus,
            det_minus,
            coherent,
            normalized,
            normalization,
        })
    }

    /// Equivalent model with threshold zero; `y` is measured relative to `b`.
    pub fn shift_threshold(&self) -> CksvarModel {
        let mut out = self.clone();
        if self.threshold == 0.0 {
            return out;
        }
        let (plus, minus) = self.long_run_columns();
        out.intercept = &self.intercept - (plus + minus) * self.threshold;
        out.threshold = 0.0;
        out
    }

    /// Premultiply every equation block by `s` (`p x p`); `u` becomes `s u`.
    pub fn transform_equations(&self, s: &DMatrix<f64>) -> CksvarModel {
        CksvarModel {
            p: self.p,
            k: self.k,
            threshold: self.threshold,
            phi0_plus: s * &self.phi0_plus,
            phi0_minus: s * &self.phi0_minus,
            phi0_x: s * &self.phi0_x,
            lag_plus: self.lag_plus.iter().map(|v| s * v).collect(),
            lag_minus: self.lag_minus.iter().map(|v| s * v).collect(),
            lag_x: self.lag_x.iter().map(|m| s * m).collect(),
            intercept: s * &self.intercept,
            sigma: s * &self.sigma * s.transpose(),
        }
    }

    /// Rescale the latent negative part: the new model is written in terms of
    /// `factor * y-`, so every `phi_i-` is divided by `factor`.
    pub fn rescale_negative(&self, factor: f64) -> CksvarModel {
        let mut out = self.clone();
        out.phi0_minus /= factor;
        for v in &mut out.lag_minus {
            *v /= factor;
        }
        out
    }

    /// Reduce to the canonical form in which `Phi0 = [[1,1,0],[0,0,I]]`.
    ///
    /// The threshold is shifted to zero and equations are reordered and
    /// sign-normalized first when required. With `partially_observed`, the
    /// `y` equation and the latent `y-` are rescaled so that both Schur
    /// complements equal one, making the canonical `y` coincide with the
    /// observed one.
    pub fn canonicalize(&self, partially_observed: bool) -> Result<CanonicalModel> {
        let shifted = self.shift_threshold();
        let report = shifted.check_coherence()?;
        if !report.coherent {
            return Err(Error::Incoherent {
                det_plus: report.det_plus,
                det_minus: report.det_minus,
            });
        }
        let normalization = report.normalization.ok_or(Error::SingularXBlock)?;
        let s = normalization.matrix();
        let mut model = shifted.transform_equations(&s);
        let mut equation_transform = s;
        let p = model.p;
        let (phibar_plus, phibar_minus) =
            schur_complements(&model.phi0_matrix(), p).ok_or(Error::SingularXBlock)?;

        let mut minus_scale = 1.0;
        if partially_observed {
            let mut d = DMatrix::identity(p, p);
            d[(0, 0)] = 1.0 / phibar_plus;
            model = model.transform_equations(&d);
            equation_transform = d * equation_transform;
            minus_scale = phibar_minus / phibar_plus;
            model = model.rescale_negative(minus_scale);
        }

        let phi0 = model.phi0_matrix();
        let (bp, bm) = schur_complements(&phi0, p).ok_or(Error::SingularXBlock)?;
        let xx = phi0.view((1, 2), (p - 1, p - 1)).clone_owned();
        let xx_inv = xx
            .clone()
            .try_inverse()
            .ok_or(Error::SingularXBlock)?;

        let mut p_inv = DMatrix::zeros(p + 1, p + 1);
        p_inv[(0, 0)] = bp;
        p_inv[(1, 1)] = bm;
        for r in 1..p {
            p_inv[(r + 1, 0)] = phi0[(r, 0)];
            p_inv[(r + 1, 1)] = phi0[(r, 1)];
            for c in 1..p {
                p_inv[(r + 1, c + 1)] = xx[(r - 1, c - 1)];
            }
        }
        let transform_p = p_inv.clone().try_inverse().ok_or(Error::SingularXBlock)?;

        let mut q = DMatrix::identity(p, p);
        if p > 1 {
            let yx = phi0.view((0, 2), (1, p - 1)).clone_owned();
            let row = -(yx * &xx_inv);
            q.view_mut((0, 1), (1, p - 1)).copy_from(&row);
        }

        let mut lag_plus = Vec::with_capacity(model.k);
        let mut lag_minus = Vec::with_capacity(model.k);
        let mut lag_x = Vec::with_capacity(model.k);
        for i in 1..=model.k {
            let m = &q * model.lag_matrix(i) * &transform_p;
            lag_plus.push(m.column(0).clone_owned());
            lag_minus.push(m.column(1).clone_owned());
            lag_x.push(m.columns(2, p - 1).clone_owned());
        }
        let equation_transform = &q * equation_transform;

        Ok(CanonicalModel {
            p,
            k: model.k,
            lag_plus,
            lag_minus,
            lag_x,
            intercept: &q * &model.intercept,
            transform_p,
            transform_q: q.clone(),
            sigma: &q * &model.sigma * q.transpose(),
            phibar_plus,
            phibar_minus,
            threshold: self.threshold,
            normalization,
            equation_transform,
            minus_scale,
        })
    }
}

/// Reduced model with `Phi0 = [[1,1,0],[0,0,I]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalModel {
    pub p: usize,
    pub k: usize,
    pub lag_plus: Vec<DVector<f64>>,
    pub lag_minus: Vec<DVector<f64>>,
    pub lag_x: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    /// `P`, `(p+1) x (p+1)`: maps canonical `(y+, y-, x)` back to the
    /// (normalized, zero-threshold) source variables.
    pub transform_p: DMatrix<f64>,
    /// `Q` computed on the normalized source model.
    pub transform_q: DMatrix<f64>,
    /// `Q Sigma Q'` in canonical coordinates.
    pub sigma: DMatrix<f64>,
    /// Schur complements of the normalized source model (both positive).
    pub phibar_plus: f64,
    pub phibar_minus: f64,
    /// Threshold `b` of the source model.
    pub threshold: f64,
    pub normalization: Normalization,
    /// Full equation transform `T` (normalization, scaling, then `Q`); the
    /// canonical shocks are `T u_t`.
    pub equation_transform: DMatrix<f64>,
    /// Factor applied to the latent `y-` when partially observed, else 1.
    pub minus_scale: f64,
}

impl CanonicalModel {
    /// Canonical `Phi_i(side) = [phi_i(side) Phi_ix]`, `p x p`.
    pub fn regime_lag(&self, i: usize, side: Side) -> DMatrix<f64> {
        let col = match side {
            Side::Plus => &self.lag_plus[i - 1],
            Side::Minus => &self.lag_minus[i - 1],
        };
        let mut m = DMatrix::zeros(self.p, self.p);
        m.set_column(0, col);
        m.view_mut((0, 1), (self.p, self.p - 1))
            .copy_from(&self.lag_x[i - 1]);
        m
    }

    pub fn is_linear(&self) -> bool {
        self.lag_plus.iter().zip(&self.lag_minus).all(|(a, b)| a == b)
    }

    /// Back to a `CksvarModel` with canonical contemporaneous block.
    pub fn to_model(&self) -> CksvarModel {
        let (phi0_plus, phi0_minus, phi0_x) = canonical_phi0(self.p);
        CksvarModel {
            p: self.p,
            k: self.k,
            threshold: 0.0,
            phi0_plus,
            phi0_minus,
            phi0_x,
            lag_plus: self.lag_plus.clone(),
            lag_minus: self.lag_minus.clone(),
            lag_x: self.lag_x.clone(),
            intercept: self.intercept.clone(),
            sigma: self.sigma.clone(),
        }
    }

    /// Source `(y, x)` to canonical `(y~, x~)`.
    pub fn to_canonical(&self, z: &DVector<f64>) -> DVector<f64> {
        let stacked = split_sides(z[0] - self.threshold, self.minus_scale, z);
        let t = self
            .transform_p
            .clone()
            .try_inverse()
            .expect("P is invertible by construction")
            * stacked;
        merge_sides(&t)
    }

    /// Canonical `(y~, x~)` to source `(y, x)`.
    pub fn from_canonical(&self, z: &DVector<f64>) -> DVector<f64> {
        let stacked = split_sides(z[0], 1.0, z);
        let src = &self.transform_p * stacked;
        let mut out = DVector::zeros(self.p);
        out[0] = src[0] + src[1] / self.minus_scale + self.threshold;
        for r in 1..self.p {
            out[r] = src[r + 1];
        }
        out
    }
}

/// `(y+, scale * y-, x)` from `(y, x)`; `y` given separately.
fn split_sides(y: f64, scale: f64, z: &DVector<f64>) -> DVector<f64> {
    let p = z.len();
    let mut s = DVector::zeros(p + 1);
    s[0] = y.max(0.0);
    s[1] = scale * y.min(0.0);
    for r in 1..p {
        s[r + 1] = z[r];
    }
    s
}

fn merge_sides(s: &DVector<f64>) -> DVector<f64> {
    let p = s.len() - 1;
    let mut z = DVector::zeros(p);
    z[0] = s[0] + s[1];
    for r in 1..p {
        z[r] = s[r + 1];
    }
    z
}

fn canonical_phi0(p: usize) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let mut e1 = DVector::zeros(p);
    e1[0] = 1.0;
    let mut x = DMatrix::zeros(p, p - 1);
    for r in 1..p {
        x[(r, r - 1)] = 1.0;
    }
    (e1.clone(), e1, x)
}

fn stack_columns(plus: &DVector<f64>, minus: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let p = plus.len();
    let mut m = DMatrix::zeros(p, p + 1);
    m.set_column(0, plus);
    m.set_column(1, minus);
    m.view_mut((0, 2), (p, p - 1)).copy_from(x);
    m
}

/// `phi0_yy± - phi0_yx' Phi0_xx^{-1} phi0_xy±`, or `None` if the x block is singular.
fn schur_complements(phi0: &DMatrix<f64>, p: usize) -> Option<(f64, f64)> {
    if p == 1 {
        return Some((phi0[(0, 0)], phi0[(0, 1)]));
    }
    let xx = phi0.view((1, 2), (p - 1, p - 1)).clone_owned();
    let det = xx.determinant();
    if det.abs() <= 1e-12 * frobenius(phi0).max(1.0) {
        return None;
    }
    let inv = xx.try_inverse()?;
    let yx = phi0.view((0, 2), (1, p - 1)).clone_owned();
    let w = yx * inv;
    let sc = |col: usize| {
        let xy = phi0.view((1, col), (p - 1, 1)).clone_owned();
        phi0[(0, col)] - (&w * xy)[(0, 0)]
    };
    Some((sc(0), sc(1)))
}

fn find_normalization(phi0: &DMatrix<f64>, p: usize) -> Option<Normalization> {
    // Only the choice of the leading equation affects invertibility of the x
    // block; the lexicographically first permutation with leading row r is
    // [r, 0, 1, ..] with r removed.
    for lead in 0..p {
        let mut order = vec![lead];
        order.extend((0..p).filter(|&r| r != lead));
        let reordered = DMatrix::from_fn(p, p + 1, |i, j| phi0[(order[i], j)]);
        if let Some((a, b)) = schur_complements(&reordered, p) {
            if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
                continue;
            }
            return Some(Normalization {
                row_order: order,
                sign: a.signum(),
            });
        }
    }
    None
}

fn check_len(what: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(dim_err(what, n, v.len()));
    }
    Ok(())
}

fn check_shape(what: &str, m: &DMatrix<f64>, r: usize, c: usize) -> Result<()> {
    if m.nrows() != r || m.ncols() != c {
        return Err(dim_err(
            what,
            format!("{r}x{c}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// Parameters of the stylised monetary policy model with a lower bound on
/// the policy rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonetaryModelSpec {
    pub chi: f64,
    pub theta: f64,
    #[serde(rename = "gamma")]
    pub gamma_tr: f64,
    pub mu: f64,
    pub psi: f64,
    #[serde(default)]
    pub pi_bar: f64,
    #[serde(default)]
    pub r_bar: f64,
}

impl MonetaryModelSpec {
    /// `(mu, gamma) = (0.5, 1.5)` with zero targets.
    pub fn with_defaults(chi: f64, theta: f64, psi: f64) -> Self {
        MonetaryModelSpec {
            chi,
            theta,
            gamma_tr: 1.5,
            mu: 0.5,
            psi,
            pi_bar: 0.0,
            r_bar: 0.0,
        }
    }

    pub fn kappa_mu(&self) -> f64 {
        1.0 / (1.0 - self.mu * self.theta * self.gamma_tr)
    }

    pub fn kappa_1(&self) -> f64 {
        1.0 / (1.0 - self.theta * self.gamma_tr)
    }

    pub fn tau_mu(&self) -> f64 {
        self.gamma_tr * self.theta * (1.0 - self.mu) * self.kappa_1()
    }

    pub fn i_bar(&self) -> f64 {
        self.r_bar + self.pi_bar
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("monetary model: {msg}")));
        if !(self.gamma_tr > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.theta < 0.0) {
            return bad("theta must be negative");
        }
        if !(0.0..1.0).contains(&self.chi) {
            return bad("chi must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad("mu must lie in [0, 1]");
        }
        if !(self.psi > -1.0 && self.psi < 1.0) {
            return bad("psi must lie in (-1, 1)");
        }
        if !self.pi_bar.is_finite() || !self.r_bar.is_finite() {
            return bad("targets must be finite");
        }
        Ok(())
    }

    /// The model for `(i_t, pi_t)` with identity innovation covariance.
    pub fn build(&self) -> Result<CksvarModel> {
        self.build_with_sigma(DMatrix::identity(2, 2))
    }

    pub fn build_with_sigma(&self, sigma: DMatrix<f64>) -> Result<CksvarModel> {
        self.validate()?;
        let MonetaryModelSpec {
            chi,
            theta,
            gamma_tr: g,
            mu,
            psi,
            pi_bar,
            ..
        } = *self;
        let model = CksvarModel {
            p: 2,
            k: 1,
            threshold: 0.0,
            phi0_plus: DVector::from_vec(vec![1.0, 0.0]),
            phi0_minus: DVector::from_vec(vec![1.0, theta * (1.0 - mu)]),
            phi0_x: DMatrix::from_column_slice(2, 1, &[-g, 1.0 - theta * g]),
            lag_plus: vec![DVector::from_vec(vec![psi, 0.0])],
            lag_minus: vec![DVector::from_vec(vec![psi, 0.0])],
            lag_x: vec![DMatrix::from_column_slice(2, 1, &[-psi * g, chi])],
            intercept: DVector::from_vec(vec![
                (1.0 - psi) * (self.i_bar() - g * pi_bar),
                (1.0 - theta * g - chi) * pi_bar,
            ]),
            sigma,
        };
        model.validate()?;
        Ok(model)
    }
}
