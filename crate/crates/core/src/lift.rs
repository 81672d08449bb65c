//! Scaled monomial lifts `w -> w^[m]`, with `||w^[m]|| = ||w||^m`.
//!
//! Coordinates are indexed by exponent vectors `alpha` with `|alpha| = m`,
//! in graded-lexicographic order (largest first exponent first). The entry
//! for `alpha` is `sqrt(m! / alpha!) * w^alpha`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Exponent vectors of length `n` summing to `m`, graded-lex descending.
pub fn multi_indices(n: usize, m: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if n == 0 {
        if m == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    let mut cur = vec![0u32; n];
    fill(&mut cur, 0, m as u32, &mut out);
    out
}

fn fill(cur: &mut Vec<u32>, pos: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        fill(cur, pos + 1, left - a, out);
    }
}

/// Number of monomials of degree `m` in `n` variables.
pub fn lift_dim(n: usize, m: usize) -> usize {
    // C(n + m - 1, m)
    let mut num: u128 = 1;
    for i in 0..m as u128 {
        num = num * (n as u128 + i) / (i + 1);
    }
    if n == 0 {
        return usize::from(m == 0);
    }
    num as usize
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `sqrt(m! / alpha!)`.
fn scale(alpha: &[u32]) -> f64 {
    let m: u32 = alpha.iter().sum();
    let denom: f64 = alpha.iter().map(|&a| factorial(a)).product();
    (factorial(m) / denom).sqrt()
}

fn check_degree(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("lift degree must be at least 1".into()));
    }
    Ok(())
}

pub fn m_lift_vector(w: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    check_degree(m)?;
    let idx = multi_indices(w.len(), m);
    Ok(DVector::from_iterator(
        idx.len(),
        idx.iter().map(|alpha| {
            let mono: f64 = alpha
                .iter()
                .zip(w.iter())
                .map(|(&a, &x)| x.powi(a as i32))
                .product();
            scale(alpha) * mono
        }),
    ))
}

/// Coefficients, in the plain monomial basis of degree `m`, of the products
/// `prod_j (l_j . w)^{gamma_j}` for every `gamma` with `|gamma| = m`.
/// Row `r` of the result belongs to the `r`-th `gamma` in graded-lex order.
fn product_forms(l: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = l.ncols();
    let gammas = multi_indices(l.nrows(), m);
    let basis: Vec<Vec<Vec<u32>>> = (0..=m).map(|d| multi_indices(n, d)).collect();
    let lookup: Vec<HashMap<Vec<u32>, usize>> = basis
        .iter()
        .map(|b| b.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect())
        .collect();

    let mut out = DMatrix::zeros(gammas.len(), basis[m].len());
    for (r, gamma) in gammas.iter().enumerate() {
        let mut poly = vec![1.0];
        let mut deg = 0;
        for (j, &g) in gamma.iter().enumerate() {
            for _ in 0..g {
                let mut next = vec![0.0; basis[deg + 1].len()];
                for (t, &c) in poly.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let mut alpha = basis[deg][t].clone();
                    for v in 0..n {
                        let a = l[(j, v)];
                        if a == 0.0 {
                            continue;
                        }
                        alpha[v] += 1;
                        next[lookup[deg + 1][&alpha]] += c * a;
                        alpha[v] -= 1;
                    }
                }
                poly = next;
                deg += 1;
            }
        }
        for (c, v) in poly.into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    out
}

/// The matrix `A^[m]` with `A^[m] w^[m] = (A w)^[m]`.
pub fn m_lift_matrix(a: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    check_degree(m)?;
    if a.nrows() != a.ncols() {
        return Err(crate::error::dim_err(
            "lifted matrix",
            "square".to_string(),
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let mut out = product_forms(a, m);
    let idx = multi_indices(a.ncols(), m);
    let s: Vec<f64> = idx.iter().map(|al| scale(al)).collect();
    for r in 0..out.nrows() {
        for c in 0..out.ncols() {
            out[(r, c)] *= s[r] / s[c];
        }
    }
    Ok(out)
}

/// Lift of a polyhedral cone `{w : E w >= 0}`: one row per multiset of
/// `m` rows of `E`, holding the product of those linear forms expressed in
/// the scaled monomial basis. Every row is nonnegative on the lifted cone.
pub fn lift_cone(e: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    check_degree(m)?;
    let mut out = product_forms(e, m);
    let idx = multi_indices(e.ncols(), m);
    for (c, al) in idx.iter().enumerate() {
        let s = scale(al);
        for r in 0..out.nrows() {
            out[(r, c)] /= s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order_and_count() {
        assert_eq!(multi_indices(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(multi_indices(3, 1), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        for n in 1..5 {
            for m in 1..5 {
                assert_eq!(multi_indices(n, m).len(), lift_dim(n, m));
            }
        }
        assert!(multi_indices(0, 2).is_empty());
    }

    #[test]
    fn lifts_small_vector() {
        let w = DVector::from_vec(vec![1.0, 2.0]);
        let l = m_lift_vector(&w, 2).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-15);
        assert!((l[1] - 8f64.sqrt()).abs() < 1e-15);
        assert!((l[2] - 4.0).abs() < 1e-15);
        assert!((l.norm() - 5.0).abs() < 1e-14);
        assert_eq!(m_lift_vector(&w, 1).unwrap(), w);
        assert!(m_lift_vector(&w, 0).is_err());
    }

    #[test]
    fn matrix_lift_commutes() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.3, 0.0, 1.1, -0.7, 0.2, 0.4]);
        let w = DVector::from_vec(vec![0.3, -1.2, 0.8]);
        for m in 1..5 {
            let lhs = m_lift_matrix(&a, m).unwrap() * m_lift_vector(&w, m).unwrap();
            let rhs = m_lift_vector(&(&a * &w), m).unwrap();
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn cone_lift_is_product_of_forms() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, 0.1]);
        let w = DVector::from_vec(vec![0.5, 2.0]);
        let v = lift_cone(&e, 2).unwrap() * m_lift_vector(&w, 2).unwrap();
        let f = &e * &w;
        let want = [f[0] * f[0], f[0] * f[1], f[1] * f[1]];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(lift_cone(&DMatrix::zeros(0, 2), 2).unwrap().nrows(), 0);
    }
}
