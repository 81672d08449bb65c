//! Stochastic and deterministic simulation, the sampled skeleton scan and
//! the overall ergodicity verdict.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::psd_sqrt;
use crate::lmi::{bound_by_bisection, LmiMode, LyapunovCertificate, MultiplierStructure};
use crate::model::{CanonicalModel, CksvarModel, Side};
use crate::regime::{RegimeSystem, SignPattern};
use crate::spectral::{jsr_lower_bound, jsr_upper_bound_norm, SpectralBound};

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub horizon: usize,
    /// `T x p`, row `t` is `(y_t, x_t)`.
    pub values: DMatrix<f64>,
    /// Sign pattern of `(y_t, ..., y_{t-k+1})` relative to the threshold,
    /// using the initial values for `t < k - 1`.
    pub regimes: Vec<SignPattern>,
    pub seed: Option<u64>,
    /// `T x p` structural shocks `u_t`, when generated or supplied.
    pub shocks: Option<DMatrix<f64>>,
}

impl Trajectory {
    pub fn state_norm(&self, t: usize) -> f64 {
        self.values.row(t).norm()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.horizon).map(|t| self.state_norm(t)).fold(0.0, f64::max)
    }

    /// Number of periods where `y` changes side.
    pub fn sign_changes(&self) -> usize {
        self.regimes
            .windows(2)
            .filter(|w| w[0].0[0] != w[1].0[0])
            .count()
    }

    /// CSV with header `t,y,x1..x{p-1},regime[,u1..up]`.
    pub fn to_csv(&self) -> String {
        crate::io::trajectory_csv(self)
    }
}

/// Where the structural shocks `u_t` come from.
pub enum ShockSource<'a> {
    /// `u_t = Sigma^(1/2) e_t` with standard Gaussian `e_t`.
    Gaussian { seed: u64 },
    /// `T x p` matrix of `u_t`.
    Given(&'a DMatrix<f64>),
    /// `u_t = S(z)^(1/2) e_t`, where `z` stacks `(y, x)` at lags `1..k`.
    StateDependent {
        seed: u64,
        sigma: &'a dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    },
}

/// Simulate with Gaussian shocks; `init` is `k x p`, row `j` holding `(y, x)`
/// at lag `j + 1`. Zeros when absent.
pub fn simulate_cksvar(
    model: &CksvarModel,
    horizon: usize,
    seed: u64,
    init: Option<&DMatrix<f64>>,
) -> Result<Trajectory> {
    simulate_cksvar_with(model, horizon, init, ShockSource::Gaussian { seed })
}

pub fn simulate_cksvar_with(
    model: &CksvarModel,
    horizon: usize,
    init: Option<&DMatrix<f64>>,
    shocks: ShockSource<'_>,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let cm = model.canonicalize(false)?;
    let (p, k) = (model.p, model.k);
    let init = init_rows(init, k, p)?;
    let canon_init: Vec<DVector<f64>> = init.iter().map(|z| cm.to_canonical(z)).collect();

    let (mut rng, seed) = match &shocks {
        ShockSource::Gaussian { seed } | ShockSource::StateDependent { seed, .. } => {
            (Some(ChaCha8Rng::seed_from_u64(*seed)), Some(*seed))
        }
        ShockSource::Given(u) => {
            if u.nrows() != horizon || u.ncols() != p {
                return Err(dim_err(
                    "shocks",
                    format!("{horizon}x{p}"),
                    format!("{}x{}", u.nrows(), u.ncols()),
                ));
            }
            (None, None)
        }
    };
    let root = match &shocks {
        ShockSource::Gaussian { .. } => Some(psd_sqrt(&model.sigma, 1e-12)?),
        _ => None,
    };
    let mut used = DMatrix::zeros(horizon, p);
    // source-coordinate history, most recent first
    let mut history: Vec<DVector<f64>> = init.clone();
    let mut draw = |t: usize, history: &[DVector<f64>]| -> Result<DVector<f64>> {
        let u = match &shocks {
            ShockSource::Given(u) => u.row(t).transpose(),
            ShockSource::Gaussian { .. } => {
                let e = gaussian(rng.as_mut().expect("seeded"), p);
                root.as_ref().expect("computed") * e
            }
            ShockSource::StateDependent { sigma, .. } => {
                let mut z = DVector::zeros(k * p);
                for (j, h) in history.iter().enumerate() {
                    z.rows_mut(j * p, p).copy_from(h);
                }
                let s = sigma(&z);
                if s.nrows() != p || s.ncols() != p {
                    return Err(dim_err(
                        "state-dependent sigma",
                        format!("{p}x{p}"),
                        format!("{}x{}", s.nrows(), s.ncols()),
                    ));
                }
                let e = gaussian(rng.as_mut().expect("seeded"), p);
                psd_sqrt(&s, 1e-12)? * e
            }
        };
        used.set_row(t, &u.transpose());
        Ok(u)
    };

    let mut canon = canon_init;
    let mut values = DMatrix::zeros(horizon, p);
    for t in 0..horizon {
        let u = draw(t, &history)?;
        let next = canonical_step(&cm, &canon, true) + &cm.equation_transform * u;
        let src = cm.from_canonical(&next);
        values.set_row(t, &src.transpose());
        canon.insert(0, next);
        canon.truncate(k);
        history.insert(0, src);
        history.truncate(k);
    }
    let regimes = regimes_of(&values, &init, k, model.threshold);
    Ok(Trajectory {
        horizon,
        values,
        regimes,
        seed,
        shocks: Some(used),
    })
}

/// Deterministic homogeneous recursion of the canonical model; `init` rows
/// are canonical `(y~, x~)` at lags `1..k`.
pub fn simulate_skeleton(
    cm: &CanonicalModel,
    init: &DMatrix<f64>,
    horizon: usize,
) -> Result<Trajectory> {
    let (p, k) = (cm.p, cm.k);
    let init = init_rows(Some(init), k, p)?;
    let mut hist = init.clone();
    let mut values = DMatrix::zeros(horizon, p);
    for t in 0..horizon {
        let next = canonical_step(cm, &hist, false);
        values.set_row(t, &next.transpose());
        hist.insert(0, next);
        hist.truncate(k);
    }
    let regimes = regimes_of(&values, &init, k, 0.0);
    Ok(Trajectory {
        horizon,
        values,
        regimes,
        seed: None,
        shocks: None,
    })
}

/// `c~ + sum_i Phi~_i(side of y~_{t-i}) z~_{t-i}` (intercept optional).
fn canonical_step(cm: &CanonicalModel, hist: &[DVector<f64>], intercept: bool) -> DVector<f64> {
    let mut next = if intercept {
        cm.intercept.clone()
    } else {
        DVector::zeros(cm.p)
    };
    for (i, z) in hist.iter().enumerate() {
        next += cm.regime_lag(i + 1, Side::of(z[0])) * z;
    }
    next
}

fn init_rows(init: Option<&DMatrix<f64>>, k: usize, p: usize) -> Result<Vec<DVector<f64>>> {
    match init {
        None => Ok(vec![DVector::zeros(p); k]),
        Some(m) => {
            if m.nrows() != k || m.ncols() != p {
                return Err(dim_err(
                    "initial values",
                    format!("{k}x{p}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("initial values"));
            }
            Ok(m.row_iter().map(|r| r.transpose()).collect())
        }
    }
}

fn regimes_of(
    values: &DMatrix<f64>,
    init: &[DVector<f64>],
    k: usize,
    threshold: f64,
) -> Vec<SignPattern> {
    let y_at = |t: isize| -> f64 {
        if t >= 0 {
            values[(t as usize, 0)]
        } else {
            init[(-t - 1) as usize][0]
        }
    };
    (0..values.nrows() as isize)
        .map(|t| SignPattern((0..k as isize).map(|j| Side::of(y_at(t - j) - threshold)).collect()))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVerdict {
    Contracting,
    NotContractingAtM,
    Diverging,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityScanReport {
    pub grid_size: usize,
    pub steps: usize,
    pub contraction_ratio: f64,
    /// Points actually iterated (grid plus axis and cone-interior points).
    pub points: usize,
    pub max_terminal_ratio: f64,
    pub verdict: ScanVerdict,
    /// Always true: a finite sample says nothing about the points in between.
    pub heuristic: bool,
}

/// Iterate the skeleton `steps` times from unit-sphere points and report the
/// worst terminal norm. `contracting` iff that ratio is below
/// `contraction_ratio`; `diverging` iff some point ends farther out than it
/// started.
pub fn skeleton_stability_scan(
    sys: &RegimeSystem,
    grid_size: usize,
    steps: usize,
    contraction_ratio: f64,
    seed: u64,
) -> Result<StabilityScanReport> {
    if grid_size == 0 || steps == 0 {
        return Err(Error::InvalidArgument("grid size and step count must be positive".into()));
    }
    if !(contraction_ratio > 0.0 && contraction_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "contraction ratio must lie in (0, 1), got {contraction_ratio}"
        )));
    }
    if sys.layout.is_none() && sys.num_states() > 1 {
        return Err(Error::InvalidArgument(
            "the skeleton needs a state selector; build the system from a model".into(),
        ));
    }
    let points = sphere_points(sys, grid_size, seed);
    let worst = points
        .par_iter()
        .map(|z0| {
            let mut z = z0.clone();
            for _ in 0..steps {
                z = sys.step(&z).expect("selector checked above");
            }
            z.norm() / z0.norm()
        })
        .reduce(|| 0.0, f64::max);
    let verdict = if worst < contraction_ratio {
        ScanVerdict::Contracting
    } else if worst > 1.0 {
        ScanVerdict::Diverging
    } else {
        ScanVerdict::NotContractingAtM
    };
    Ok(StabilityScanReport {
        grid_size,
        steps,
        contraction_ratio,
        points: points.len(),
        max_terminal_ratio: worst,
        verdict,
        heuristic: true,
    })
}

/// Rotated Halton points pushed radially onto the unit sphere, then the
/// `+-` axis points and one interior point per cone.
fn sphere_points(sys: &RegimeSystem, grid_size: usize, seed: u64) -> Vec<DVector<f64>> {
    let d = sys.dim;
    let primes = first_primes(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let mut pts = Vec::with_capacity(grid_size + 2 * d + sys.num_states());
    let mut index = 1u64;
    while pts.len() < grid_size {
        let v = DVector::from_fn(d, |c, _| {
            let u = (radical_inverse(index, primes[c]) + shift[c]).fract();
            2.0 * u - 1.0
        });
        index += 1;
        let n = v.norm();
        if n > 1e-3 {
            pts.push(v / n);
        }
    }
    for c in 0..d {
        for s in [1.0, -1.0] {
            let mut v = DVector::zeros(d);
            v[c] = s;
            pts.push(v);
        }
    }
    for e in &sys.cones {
        if e.nrows() > 0 {
            let v = e.transpose() * DVector::from_element(e.nrows(), 1.0);
            let n = v.norm();
            if n > 0.0 {
                pts.push(v / n);
            }
        }
    }
    pts
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    ErgodicCertified,
    ExplosiveEvidence,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Bound(SpectralBound),
    Scan(StabilityScanReport),
}

/// Everything computed for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: LmiMode,
    pub lower: Option<SpectralBound>,
    pub upper_norm: Option<SpectralBound>,
    pub upper_certified: SpectralBound,
    pub certificate: LyapunovCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub evidence: Vec<Evidence>,
    pub methods: Vec<MethodReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerdictOptions {
    /// Run in the order given; defaults to jsr, cjsr, rjsr.
    pub methods: Vec<LmiMode>,
    pub degree: usize,
    /// Product depth for enumeration bounds.
    pub depth: usize,
    pub tol: f64,
    pub multipliers: MultiplierStructure,
    /// Append a skeleton scan `(grid, steps, ratio, seed)` to the evidence.
    pub scan: Option<(usize, usize, f64, u64)>,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions {
            methods: vec![LmiMode::Jsr, LmiMode::Cjsr, LmiMode::Rjsr],
            degree: 2,
            depth: 8,
            tol: 1e-3,
            multipliers: MultiplierStructure::Full,
            scan: None,
        }
    }
}

/// `ergodic_certified` iff a certified upper bound is below `1 - tol`;
/// otherwise `explosive_evidence` iff a product lower bound exceeds `1 + tol`.
pub fn ergodicity_verdict(model: &CksvarModel, opts: &VerdictOptions) -> Result<Verdict> {
    let cm = model.canonicalize(false)?;
    let sys = RegimeSystem::from_canonical(&cm);
    system_verdict(&sys, opts)
}

pub fn system_verdict(sys: &RegimeSystem, opts: &VerdictOptions) -> Result<Verdict> {
    let mut evidence = Vec::new();
    let mut methods = Vec::new();
    let mut certified = false;
    let mut explosive = false;
    for &mode in &opts.methods {
        let (lower, upper_norm) = match mode {
            LmiMode::Jsr | LmiMode::Cjsr => {
                let constrained = mode == LmiMode::Cjsr;
                (
                    Some(jsr_lower_bound(sys, opts.depth, constrained)?),
                    Some(jsr_upper_bound_norm(sys, opts.depth, constrained)?),
                )
            }
            LmiMode::Rjsr => (None, None),
        };
        let (upper, cert) = bound_by_bisection(sys, mode, opts.degree, opts.tol, opts.multipliers)?;
        if let Some(l) = &lower {
            explosive |= l.value > 1.0 + opts.tol;
            evidence.push(Evidence::Bound(l.clone()));
        }
        if let Some(u) = &upper_norm {
            evidence.push(Evidence::Bound(u.clone()));
        }
        certified |= upper.value < 1.0 - opts.tol;
        evidence.push(Evidence::Bound(upper.clone()));
        methods.push(MethodReport {
            method: mode,
            lower,
            upper_norm,
            upper_certified: upper,
            certificate: cert,
        });
    }
    if let Some((grid, steps, ratio, seed)) = opts.scan {
        evidence.push(Evidence::Scan(skeleton_stability_scan(sys, grid, steps, ratio, seed)?));
    }
    let status = if certified {
        VerdictStatus::ErgodicCertified
    } else if explosive {
        VerdictStatus::ExplosiveEvidence
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict {
        status,
        evidence,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_input_gives_zero_path() {
        let m = CksvarModel::univariate(&[0.5, 0.1], &[0.2, 0.0], 0.0, 0.0).unwrap();
        let tr = simulate_cksvar(&m, 50, 7, None).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seed_determinism() {
        let m = CksvarModel::univariate(&[0.5, 0.1], &[0.2, 0.0], 0.3, 1.0).unwrap();
        let a = simulate_cksvar(&m, 100, 11, None).unwrap();
        let b = simulate_cksvar(&m, 100, 11, None).unwrap();
        let c = simulate_cksvar(&m, 100, 12, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn csv_layout() {
        let m = CksvarModel::univariate(&[0.5, 0.1], &[0.2, 0.0], 0.0, 1.0).unwrap();
        let tr = simulate_cksvar(&m, 3, 1, None).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,y,regime,u1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn scalar_scan_ratio() {
        let sys = RegimeSystem::from_matrices(vec![DMatrix::identity(2, 2) * 0.5]).unwrap();
        let r = skeleton_stability_scan(&sys, 10, 4, 0.5, 0).unwrap();
        assert!((r.max_terminal_ratio - 0.0625).abs() < 1e-15);
        assert_eq!(r.verdict, ScanVerdict::Contracting);
    }

    #[test]
    fn halton_is_low_discrepancy() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn regimes_follow_stored_signs() {
        let m = CksvarModel::univariate(&[0.5, 0.1], &[0.2, 0.0], 0.0, 1.0).unwrap();
        let tr = simulate_cksvar(&m, 200, 3, None).unwrap();
        for t in 1..200 {
            let want = [tr.values[(t, 0)], tr.values[(t - 1, 0)]].map(Side::of);
            assert_eq!(tr.regimes[t].0, want);
        }
        assert!(tr.sign_changes() > 10);
    }
}
