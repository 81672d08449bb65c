//! Lower and upper bounds on the (constrained) joint spectral radius by
//! enumerating matrix products.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{op_norm2, spectral_radius_unchecked};
use crate::regime::RegimeSystem;

/// Maximum number of matrix multiplications per enumeration.
pub const PRODUCT_BUDGET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    JsrLower,
    JsrUpperNorm,
    CjsrLower,
    CjsrUpperNorm,
    SdpJsr,
    SdpCjsr,
    SdpRjsr,
    SosJsr,
    SosCjsr,
    SosRjsr,
}

impl BoundMethod {
    pub fn is_upper(self) -> bool {
        !matches!(self, BoundMethod::JsrLower | BoundMethod::CjsrLower)
    }

    pub fn is_certified(self) -> bool {
        matches!(
            self,
            BoundMethod::SdpJsr
                | BoundMethod::SdpCjsr
                | BoundMethod::SdpRjsr
                | BoundMethod::SosJsr
                | BoundMethod::SosCjsr
                | BoundMethod::SosRjsr
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// State indices in application order: `B = F[s_t] ... F[s_1]`.
    Sequence(Vec<usize>),
    Certificate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBound {
    pub method: BoundMethod,
    pub value: f64,
    pub depth_or_degree: usize,
    pub witness: Option<Witness>,
    /// Set when the product budget ran out before the requested depth.
    #[serde(default)]
    pub truncated: bool,
}

/// Largest `rho(B)^(1/t)` over (admissible, cyclic) products of length at most `max_depth`.
///
/// In the constrained case a sequence counts only when it can repeat
/// forever, i.e. the closing transition `last -> first` is admissible too.
/// Only the lexicographically least rotation of each sequence is evaluated.
pub fn jsr_lower_bound(
    sys: &RegimeSystem,
    max_depth: usize,
    constrained: bool,
) -> Result<SpectralBound> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("product depth must be at least 1".into()));
    }
    let n = sys.num_states();
    let mut search = LowerSearch {
        sys,
        constrained,
        max_depth,
        budget: PRODUCT_BUDGET,
        best: -1.0,
        witness: Vec::new(),
        seq: Vec::with_capacity(max_depth),
        truncated: false,
    };
    for first in 0..n {
        if search.truncated {
            break;
        }
        search.seq.clear();
        search.seq.push(first);
        let start = sys.companion[first].clone();
        search.visit(&start);
    }
    Ok(SpectralBound {
        method: if constrained {
            BoundMethod::CjsrLower
        } else {
            BoundMethod::JsrLower
        },
        value: search.best.max(0.0),
        depth_or_degree: max_depth,
        witness: Some(Witness::Sequence(search.witness)),
        truncated: search.truncated,
    })
}

struct LowerSearch<'a> {
    sys: &'a RegimeSystem,
    constrained: bool,
    max_depth: usize,
    budget: u64,
    best: f64,
    witness: Vec<usize>,
    seq: Vec<usize>,
    truncated: bool,
}

impl LowerSearch<'_> {
    fn visit(&mut self, product: &DMatrix<f64>) {
        let t = self.seq.len();
        let first = self.seq[0];
        let last = self.seq[t - 1];
        let closes = !self.constrained || self.sys.has_edge(last, first);
        if closes && is_least_rotation(&self.seq) {
            let r = spectral_radius_unchecked(product).powf(1.0 / t as f64);
            if r > self.best {
                self.best = r;
                self.witness = self.seq.clone();
            }
        }
        if t == self.max_depth {
            return;
        }
        // A least rotation never contains a state smaller than its first one.
        for next in first..self.sys.num_states() {
            if self.constrained && !self.sys.has_edge(last, next) {
                continue;
            }
            if self.budget == 0 {
                self.truncated = true;
                return;
            }
            self.budget -= 1;
            let extended = &self.sys.companion[next] * product;
            self.seq.push(next);
            self.visit(&extended);
            self.seq.pop();
            if self.truncated {
                return;
            }
        }
    }
}

pub(crate) fn is_least_rotation(seq: &[usize]) -> bool {
    let t = seq.len();
    (1..t).all(|s| {
        for i in 0..t {
            let a = seq[i];
            let b = seq[(i + s) % t];
            if a != b {
                return a < b;
            }
        }
        true
    })
}

/// `min_t max_B ||B||_2^(1/t)` over (admissible) products of length `t <= max_depth`.
pub fn jsr_upper_bound_norm(
    sys: &RegimeSystem,
    max_depth: usize,
    constrained: bool,
) -> Result<SpectralBound> {
    if max_depth == 0 {
        return Err(Error::InvalidArgument("product depth must be at least 1".into()));
    }
    let depth = affordable_depth(sys, max_depth, constrained);
    let mut search = UpperSearch {
        sys,
        constrained,
        max_depth: depth,
        level_max: vec![f64::NEG_INFINITY; depth],
        level_witness: vec![Vec::new(); depth],
        seq: Vec::with_capacity(depth),
    };
    for first in 0..sys.num_states() {
        search.seq.clear();
        search.seq.push(first);
        let start = sys.companion[first].clone();
        search.visit(&start);
    }
    let complete_levels = depth;
    let mut best = f64::INFINITY;
    let mut witness = Vec::new();
    for t in 0..complete_levels {
        let v = search.level_max[t];
        if v.is_finite() && v < best {
            best = v;
            witness = search.level_witness[t].clone();
        }
    }
    Ok(SpectralBound {
        method: if constrained {
            BoundMethod::CjsrUpperNorm
        } else {
            BoundMethod::JsrUpperNorm
        },
        value: best,
        depth_or_degree: max_depth,
        witness: Some(Witness::Sequence(witness)),
        truncated: depth < max_depth,
    })
}

/// Deepest level whose full enumeration fits in the product budget.
fn affordable_depth(sys: &RegimeSystem, max_depth: usize, constrained: bool) -> usize {
    let n = sys.num_states();
    // paths[i] = number of admissible paths of the current length ending in i
    let mut paths = vec![1u64; n];
    let mut spent = 0u64;
    let mut depth = 1;
    while depth < max_depth {
        let mut next = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                if !constrained || sys.has_edge(i, j) {
                    next[j] = next[j].saturating_add(paths[i]);
                }
            }
        }
        let level: u64 = next.iter().fold(0u64, |a, &b| a.saturating_add(b));
        if spent.saturating_add(level) > PRODUCT_BUDGET {
            break;
        }
        spent += level;
        paths = next;
        depth += 1;
    }
    depth
}

struct UpperSearch<'a> {
    sys: &'a RegimeSystem,
    constrained: bool,
    max_depth: usize,
    level_max: Vec<f64>,
    level_witness: Vec<Vec<usize>>,
    seq: Vec<usize>,
}

impl UpperSearch<'_> {
    fn visit(&mut self, product: &DMatrix<f64>) {
        let t = self.seq.len();
        let v = op_norm2(product).powf(1.0 / t as f64);
        if v > self.level_max[t - 1] {
            self.level_max[t - 1] = v;
            self.level_witness[t - 1] = self.seq.clone();
        }
        if t == self.max_depth {
            return;
        }
        let last = self.seq[t - 1];
        for next in 0..self.sys.num_states() {
            if self.constrained && !self.sys.has_edge(last, next) {
                continue;
            }
            let extended = &self.sys.companion[next] * product;
            self.seq.push(next);
            self.visit(&extended);
            self.seq.pop();
        }
    }
}
