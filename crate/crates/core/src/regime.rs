//! Cone-partitioned switched linear system of a canonical model's skeleton.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CanonicalModel, Side};

/// Sign pattern of `(y_{t-1}, ..., y_{t-k})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignPattern(pub Vec<Side>);

impl SignPattern {
    /// Pattern number `index` in the enumeration order `++..+`, `++..-`, ..., `--..-`.
    pub fn from_index(index: usize, k: usize) -> Self {
        SignPattern(
            (0..k)
                .map(|j| {
                    if index >> (k - 1 - j) & 1 == 0 {
                        Side::Plus
                    } else {
                        Side::Minus
                    }
                })
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, s| (acc << 1) | usize::from(*s == Side::Minus))
    }

    /// Successor pattern after observing a new `y` with sign `s0`.
    pub fn shifted(&self, s0: Side) -> Self {
        let mut v = Vec::with_capacity(self.0.len());
        v.push(s0);
        v.extend_from_slice(&self.0[..self.0.len() - 1]);
        SignPattern(v)
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Some(Side::Plus),
                '-' => Some(Side::Minus),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .map(SignPattern)
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.symbol())?;
        }
        Ok(())
    }
}

/// Where the `y` coordinates sit inside the stacked state of a CKSVAR skeleton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanionLayout {
    pub p: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeSystem {
    pub dim: usize,
    pub labels: Vec<String>,
    /// `F[i]`, `dim x dim`.
    pub companion: Vec<DMatrix<f64>>,
    /// `E_i` with `closure(W_i) = { z : E_i z >= 0 }`; zero rows means the whole space.
    pub cones: Vec<DMatrix<f64>>,
    /// Admissible transitions `(i, j)`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// `E_ij = [E_i ; E_j F[i]]`, aligned with `edges`.
    pub pair_cones: Vec<DMatrix<f64>>,
    pub layout: Option<CompanionLayout>,
}

impl RegimeSystem {
    /// Build the skeleton's switched system from a canonical model.
    pub fn from_canonical(cm: &CanonicalModel) -> Self {
        let (p, k) = (cm.p, cm.k);
        let dim = p * k;
        let n = 1usize << k;
        let patterns: Vec<SignPattern> = (0..n).map(|i| SignPattern::from_index(i, k)).collect();

        let companion: Vec<DMatrix<f64>> = patterns
            .iter()
            .map(|pat| {
                let mut f = DMatrix::zeros(dim, dim);
                for (j, side) in pat.0.iter().enumerate() {
                    f.view_mut((0, j * p), (p, p))
                        .copy_from(&cm.regime_lag(j + 1, *side));
                }
                for j in 1..k {
                    f.view_mut((j * p, (j - 1) * p), (p, p))
                        .fill_with_identity();
                }
                f
            })
            .collect();

        let cones: Vec<DMatrix<f64>> = patterns
            .iter()
            .map(|pat| {
                let mut e = DMatrix::zeros(k, dim);
                for (j, side) in pat.0.iter().enumerate() {
                    e[(j, j * p)] = match side {
                        Side::Plus => 1.0,
                        Side::Minus => -1.0,
                    };
                }
                e
            })
            .collect();

        let mut edges = Vec::with_capacity(2 * n);
        for (i, pat) in patterns.iter().enumerate() {
            for s0 in [Side::Plus, Side::Minus] {
                edges.push((i, pat.shifted(s0).index()));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let labels = patterns.iter().map(|p| p.to_string()).collect();
        let mut sys = RegimeSystem {
            dim,
            labels,
            companion,
            cones,
            edges,
            pair_cones: Vec::new(),
            layout: Some(CompanionLayout { p, k }),
        };
        sys.pair_cones = sys.compute_pair_cones();
        sys
    }

    /// An unconstrained switched system: every matrix is a state, every
    /// transition is admissible and every cone is the whole space.
    pub fn from_matrices(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidArgument("at least one matrix is required".into()))?;
        let dim = first.nrows();
        for m in &matrices {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(crate::error::dim_err(
                    "switched system",
                    format!("{dim}x{dim}"),
                    format!("{}x{}", m.nrows(), m.ncols()),
                ));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("switched system matrix"));
            }
        }
        let n = matrices.len();
        let mut sys = RegimeSystem {
            dim,
            labels: (0..n).map(|i| format!("A{i}")).collect(),
            companion: matrices,
            cones: vec![DMatrix::zeros(0, dim); n],
            edges: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
            pair_cones: Vec::new(),
            layout: None,
        };
        sys.pair_cones = sys.compute_pair_cones();
        Ok(sys)
    }

    fn compute_pair_cones(&self) -> Vec<DMatrix<f64>> {
        self.edges
            .iter()
            .map(|&(i, j)| {
                let img = &self.cones[j] * &self.companion[i];
                let mut e = DMatrix::zeros(self.cones[i].nrows() + img.nrows(), self.dim);
                e.rows_mut(0, self.cones[i].nrows()).copy_from(&self.cones[i]);
                e.rows_mut(self.cones[i].nrows(), img.nrows()).copy_from(&img);
                e
            })
            .collect()
    }

    pub fn num_states(&self) -> usize {
        self.companion.len()
    }

    /// Whether every pair of states is an admissible transition.
    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.num_states() * self.num_states()
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(a, _)| *a == i)
            .map(|&(_, b)| b)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }

    /// State selected by a stacked vector `z`: defined for systems built from
    /// a model, and trivially for single-state systems.
    pub fn state_of(&self, z: &DVector<f64>) -> Option<usize> {
        if self.layout.is_none() && self.num_states() == 1 {
            return Some(0);
        }
        let layout = self.layout?;
        let pat = SignPattern(
            (0..layout.k)
                .map(|j| Side::of(z[j * layout.p]))
                .collect(),
        );
        Some(pat.index())
    }

    /// One skeleton step `z -> F[sigma(z)] z`.
    pub fn step(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        self.state_of(z).map(|i| &self.companion[i] * z)
    }

    /// A copy with every companion matrix multiplied by `c`.
    pub fn scaled(&self, c: f64) -> RegimeSystem {
        let mut out = self.clone();
        for f in &mut out.companion {
            *f *= c;
        }
        out.pair_cones = out.compute_pair_cones();
        out
    }

    /// Largest spectral radius among the individual state matrices.
    pub fn max_state_radius(&self) -> f64 {
        self.companion
            .iter()
            .map(crate::linalg::spectral_radius_unchecked)
            .fold(0.0, f64::max)
    }

    /// Largest operator 2-norm among the state matrices.
    pub fn max_state_norm(&self) -> f64 {
        self.companion
            .iter()
            .map(crate::linalg::op_norm2)
            .fold(0.0, f64::max)
    }
}
