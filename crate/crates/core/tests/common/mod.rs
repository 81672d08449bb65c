#![allow(dead_code)]

use ckstab_core::{CksvarModel, RegimeSystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo..hi)
}

fn uniform_matrix(r: &mut ChaCha8Rng, n: usize, m: usize, a: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| uniform(r, -a, a))
}

/// Coherent model with a nontrivial contemporaneous block, threshold and intercept.
pub fn random_coherent_model(r: &mut ChaCha8Rng, p: usize, k: usize) -> CksvarModel {
    loop {
        let phi0_x = uniform_matrix(r, p, p - 1, 1.0);
        let mut phi0_plus = uniform_matrix(r, p, 1, 1.0).column(0).into_owned();
        let mut phi0_minus = uniform_matrix(r, p, 1, 1.0).column(0).into_owned();
        if p == 1 {
            phi0_plus[0] = uniform(r, 0.5, 2.0);
            phi0_minus[0] = uniform(r, 0.5, 2.0);
        }
        let det = |col: &DVector<f64>| {
            let mut m = DMatrix::zeros(p, p);
            m.set_column(0, col);
            m.columns_mut(1, p - 1).copy_from(&phi0_x);
            m.determinant()
        };
        let (dp, dm) = (det(&phi0_plus), det(&phi0_minus));
        if dp * dm <= 0.0 || dp.abs() < 0.3 || dm.abs() < 0.3 {
            continue;
        }
        if p > 1 && phi0_x.rows(1, p - 1).determinant().abs() < 0.3 {
            continue;
        }
        let l = uniform_matrix(r, p, p, 1.0);
        let model = CksvarModel {
            p,
            k,
            threshold: uniform(r, -1.0, 1.0),
            phi0_plus,
            phi0_minus,
            phi0_x,
            lag_plus: (0..k).map(|_| uniform_matrix(r, p, 1, 0.5).column(0).into_owned()).collect(),
            lag_minus: (0..k).map(|_| uniform_matrix(r, p, 1, 0.5).column(0).into_owned()).collect(),
            lag_x: (0..k).map(|_| uniform_matrix(r, p, p - 1, 0.5)).collect(),
            intercept: uniform_matrix(r, p, 1, 1.0).column(0).into_owned(),
            sigma: &l * l.transpose() + DMatrix::identity(p, p) * 0.1,
        };
        if model.canonicalize(false).is_ok() {
            return model;
        }
    }
}

/// Canonical-form model with lag coefficients of size up to `a`.
pub fn random_canonical_model(r: &mut ChaCha8Rng, p: usize, k: usize, a: f64) -> CksvarModel {
    CksvarModel::canonical_form(
        (0..k).map(|_| uniform_matrix(r, p, 1, a).column(0).into_owned()).collect(),
        (0..k).map(|_| uniform_matrix(r, p, 1, a).column(0).into_owned()).collect(),
        (0..k).map(|_| uniform_matrix(r, p, p - 1, a)).collect(),
        DVector::zeros(p),
        DMatrix::identity(p, p),
    )
    .unwrap()
}

/// Regime system of a random canonical model with `k, p <= 2`.
pub fn random_system(r: &mut ChaCha8Rng) -> RegimeSystem {
    let p = r.random_range(1..=2);
    let k = r.random_range(1..=2);
    let m = random_canonical_model(r, p, k, 0.7);
    RegimeSystem::from_canonical(&m.canonicalize(false).unwrap())
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, a: f64) -> DMatrix<f64> {
    uniform_matrix(r, n, n, a)
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize, a: f64) -> DVector<f64> {
    uniform_matrix(r, n, 1, a).column(0).into_owned()
}

/// Simulate by solving the structural equations directly each period: try
/// `y >= b` with the `+` impact block, otherwise the `-` block.
pub fn structural_simulation(m: &CksvarModel, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, k, b) = (m.p, m.k, m.threshold);
    let horizon = u.nrows();
    let mut hist = vec![DVector::<f64>::zeros(p); k];
    let mut out = DMatrix::zeros(horizon, p);
    let impact = |col: &DVector<f64>| {
        let mut a = DMatrix::zeros(p, p);
        a.set_column(0, col);
        a.columns_mut(1, p - 1).copy_from(&m.phi0_x);
        a
    };
    let a_plus = impact(&m.phi0_plus);
    let a_minus = impact(&m.phi0_minus);
    for t in 0..horizon {
        let mut rhs = m.intercept.clone() + u.row(t).transpose();
        for (i, z) in hist.iter().enumerate() {
            let y = z[0];
            rhs += &m.lag_plus[i] * y.max(b) + &m.lag_minus[i] * y.min(b);
            rhs += &m.lag_x[i] * z.rows(1, p - 1);
        }
        let up = a_plus.clone().lu().solve(&(&rhs - &m.phi0_minus * b)).unwrap();
        let z = if up[0] >= b {
            up
        } else {
            let um = a_minus.clone().lu().solve(&(&rhs - &m.phi0_plus * b)).unwrap();
            assert!(um[0] < b, "coherence gives exactly one branch");
            um
        };
        out.set_row(t, &z.transpose());
        hist.insert(0, z);
        hist.truncate(k);
    }
    out
}

/// `y_t = c + sum_i A_i y_{t-i} + A_0^{-1} u_t` for a model with `phi+ = phi-`.
pub fn linear_var_simulation(m: &CksvarModel, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, k) = (m.p, m.k);
    let mut a0 = DMatrix::zeros(p, p);
    a0.set_column(0, &m.phi0_plus);
    a0.columns_mut(1, p - 1).copy_from(&m.phi0_x);
    let a0inv = a0.try_inverse().unwrap();
    let lags: Vec<DMatrix<f64>> = (0..k)
        .map(|i| {
            let mut a = DMatrix::zeros(p, p);
            a.set_column(0, &m.lag_plus[i]);
            a.columns_mut(1, p - 1).copy_from(&m.lag_x[i]);
            &a0inv * a
        })
        .collect();
    // y+ + y- = y + b, so the threshold only moves the intercept
    let lag_sum = m.lag_plus.iter().fold(DVector::zeros(p), |acc, v| acc + v);
    let c = &a0inv * (&m.intercept + (lag_sum - &m.phi0_plus) * m.threshold);
    let mut hist = vec![DVector::<f64>::zeros(p); k];
    let mut out = DMatrix::zeros(u.nrows(), p);
    for t in 0..u.nrows() {
        let mut z = c.clone() + &a0inv * u.row(t).transpose();
        for (i, h) in hist.iter().enumerate() {
            z += &lags[i] * h;
        }
        out.set_row(t, &z.transpose());
        hist.insert(0, z);
        hist.truncate(k);
    }
    out
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / (1.0 + x.abs().max(y.abs())))
        .fold(0.0, f64::max)
}

// ---- brute-force product enumeration for dimension <= 2 ----

type M2 = [[f64; 2]; 2];

fn to_m2(m: &DMatrix<f64>) -> (usize, M2) {
    let n = m.nrows();
    assert!(n <= 2 && m.ncols() == n);
    let mut a = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = m[(i, j)];
        }
    }
    (n, a)
}

fn mul(n: usize, a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            let mut s = a[i][0] * b[0][j];
            if n == 2 {
                s += a[i][1] * b[1][j];
            }
            c[i][j] = s;
        }
    }
    c
}

fn radius(n: usize, m: &M2) -> f64 {
    if n == 1 {
        return m[0][0].abs();
    }
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) * 0.5).abs().max(((tr - s) * 0.5).abs())
    } else {
        det.abs().sqrt()
    }
}

fn norm2(n: usize, m: &M2) -> f64 {
    if n == 1 {
        return m[0][0].abs();
    }
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    0.5 * ((a + d).hypot(c - b) + (a - d).hypot(b + c))
}

fn admissible(sys: &RegimeSystem, seq: &[usize], constrained: bool) -> bool {
    !constrained || seq.windows(2).all(|w| sys.has_edge(w[0], w[1]))
}

fn least_rotation(seq: &[usize]) -> bool {
    let t = seq.len();
    (1..t).all(|s| {
        let rot: Vec<usize> = (0..t).map(|i| seq[(i + s) % t]).collect();
        seq <= rot.as_slice()
    })
}

fn sequences(n_states: usize, t: usize) -> Vec<Vec<usize>> {
    let total = n_states.pow(t as u32);
    (0..total)
        .map(|mut code| {
            // most significant digit is the first state applied
            let mut s = vec![0; t];
            for i in (0..t).rev() {
                s[i] = code % n_states;
                code /= n_states;
            }
            s
        })
        .collect()
}

fn product(sys: &RegimeSystem, seq: &[usize]) -> (usize, M2) {
    let (n, mut b) = to_m2(&sys.companion[seq[0]]);
    for &s in &seq[1..] {
        b = mul(n, &to_m2(&sys.companion[s]).1, &b);
    }
    (n, b)
}

/// `(lower, upper)` by exhaustive enumeration of every sequence up to `depth`.
pub fn brute_force_bounds(sys: &RegimeSystem, depth: usize, constrained: bool) -> (f64, f64) {
    let mut lower: f64 = -1.0;
    let mut upper = f64::INFINITY;
    for t in 1..=depth {
        let mut level = f64::NEG_INFINITY;
        for seq in sequences(sys.num_states(), t) {
            if !admissible(sys, &seq, constrained) {
                continue;
            }
            let (n, b) = product(sys, &seq);
            let nb = norm2(n, &b).powf(1.0 / t as f64);
            if nb > level {
                level = nb;
            }
            let closes = !constrained || sys.has_edge(seq[t - 1], seq[0]);
            if closes && least_rotation(&seq) {
                let r = radius(n, &b).powf(1.0 / t as f64);
                if r > lower {
                    lower = r;
                }
            }
        }
        if level.is_finite() && level < upper {
            upper = level;
        }
    }
    (lower.max(0.0), upper)
}

/// Two-state systems of dimension at most two.
pub fn two_state_corpus() -> Vec<(String, RegimeSystem)> {
    let mut out = Vec::new();
    let rot = |a: f64, s: f64| DMatrix::from_row_slice(2, 2, &[s * a.cos(), -s * a.sin(), s * a.sin(), s * a.cos()]);
    let pairs: Vec<(&str, DMatrix<f64>, DMatrix<f64>)> = vec![
        ("rotations", rot(0.3, 0.9), rot(-1.1, 0.9)),
        ("jordan", DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 0.5])),
        ("shear", DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])),
        ("nilpotent", DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])),
        ("scalars", DMatrix::from_element(1, 1, 0.7), DMatrix::from_element(1, 1, -1.2)),
    ];
    for (name, a, b) in pairs {
        out.push((name.to_string(), RegimeSystem::from_matrices(vec![a, b]).unwrap()));
    }
    let mut r = rng(2024);
    for i in 0..10 {
        let sys = RegimeSystem::from_matrices(vec![random_matrix(&mut r, 2, 1.0), random_matrix(&mut r, 2, 1.0)]).unwrap();
        out.push((format!("random{i}"), sys));
    }
    // one-lag models: two regimes
    for (i, (a, b)) in [(0.5, -0.9), (1.2, 0.3), (-0.7, 0.7)].into_iter().enumerate() {
        let m = CksvarModel::univariate(&[a], &[b], 0.0, 1.0).unwrap();
        out.push((format!("univariate{i}"), RegimeSystem::from_canonical(&m.canonicalize(false).unwrap())));
    }
    for i in 0..5 {
        let m = random_canonical_model(&mut r, 2, 1, 1.0);
        out.push((format!("bivariate{i}"), RegimeSystem::from_canonical(&m.canonicalize(false).unwrap())));
    }
    out.push((
        "example3_like_2d".into(),
        RegimeSystem::from_canonical(
            &CksvarModel::canonical_form(
                vec![DVector::from_vec(vec![-1.37, 0.79])],
                vec![DVector::zeros(2)],
                vec![DMatrix::from_row_slice(2, 1, &[0.36, -1.33])],
                DVector::zeros(2),
                DMatrix::identity(2, 2),
            )
            .unwrap()
            .canonicalize(false)
            .unwrap(),
        ),
    ));
    out
}
