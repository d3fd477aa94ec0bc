//! Higher-order chain rule for compositions `theta(x, v(t, x))`.
//!
//! Terms are generated by differentiating symbolically one direction at a
//! time and merging like terms. A term `(beta, [gamma_1, .., gamma_j], c)`
//! stands for `c * (d_y^j d_x^beta theta)(v)[d^gamma_1 v, .., d^gamma_j v]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use crate::error::{QmxError, Result};
use crate::grid::{l2_norm, GridSpec, Vec6};
use crate::material::MaterialLaw;

/// Multi-index `(alpha_0, alpha_1, alpha_2, alpha_3)`; entry 0 counts time
/// derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub [usize; 4]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 4]);

    pub fn time(p: usize) -> Self {
        MultiIndex([p, 0, 0, 0])
    }

    pub fn unit(d: usize) -> Self {
        let mut a = [0; 4];
        a[d] = 1;
        MultiIndex(a)
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(std::array::from_fn(|i| self.0[i] + other.0[i]))
    }

    /// `self - other` if `other <= self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut out = [0; 4];
        for i in 0..4 {
            out[i] = self.0[i].checked_sub(other.0[i])?;
        }
        Some(MultiIndex(out))
    }

    pub fn le(&self, other: &MultiIndex) -> bool {
        (0..4).all(|i| self.0[i] <= other.0[i])
    }

    /// All multi-indices `gamma <= self`, in lexicographic order.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let a = self.0;
        let mut out = Vec::new();
        for i0 in 0..=a[0] {
            for i1 in 0..=a[1] {
                for i2 in 0..=a[2] {
                    for i3 in 0..=a[3] {
                        out.push(MultiIndex([i0, i1, i2, i3]));
                    }
                }
            }
        }
        out
    }

    /// All multi-indices of total order `<= n`.
    pub fn all_up_to(n: usize) -> Vec<MultiIndex> {
        let mut out = MultiIndex([n; 4]).lower_set();
        out.retain(|m| m.order() <= n);
        out.sort_by_key(|m| (m.order(), std::cmp::Reverse(m.0)));
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0;
        write!(f, "({},{},{},{})", a[0], a[1], a[2], a[3])
    }
}

/// One summand of the chain rule with explicit state components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTerm {
    pub beta: MultiIndex,
    pub gammas: Vec<MultiIndex>,
    /// `l_1, .., l_j`, one-based state components paired with `gammas`.
    pub component_indices: Vec<usize>,
    pub coefficient: u64,
}

/// A chain-rule summand with the state directions left as a multilinear form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TensorTerm {
    pub beta: MultiIndex,
    /// Sorted.
    pub gammas: Vec<MultiIndex>,
    pub coefficient: u64,
}

type Key = (MultiIndex, Vec<MultiIndex>);

fn differentiate(terms: &BTreeMap<Key, u64>, d: usize) -> BTreeMap<Key, u64> {
    let e = MultiIndex::unit(d);
    let mut out: BTreeMap<Key, u64> = BTreeMap::new();
    let mut push = |beta: MultiIndex, mut gammas: Vec<MultiIndex>, c: u64| {
        gammas.sort();
        *out.entry((beta, gammas)).or_insert(0) += c;
    };
    for ((beta, gammas), &c) in terms {
        if d > 0 {
            push(beta.add(&e), gammas.clone(), c);
        }
        let mut g = gammas.clone();
        g.push(e);
        push(*beta, g, c);
        for i in 0..gammas.len() {
            let mut g = gammas.clone();
            g[i] = g[i].add(&e);
            push(*beta, g, c);
        }
    }
    out
}

fn build_tensor_terms(alpha: MultiIndex) -> Vec<TensorTerm> {
    let mut terms: BTreeMap<Key, u64> = BTreeMap::new();
    terms.insert((MultiIndex::ZERO, Vec::new()), 1);
    for d in 0..4 {
        for _ in 0..alpha.0[d] {
            terms = differentiate(&terms, d);
        }
    }
    terms
        .into_iter()
        .map(|((beta, gammas), coefficient)| TensorTerm {
            beta,
            gammas,
            coefficient,
        })
        .collect()
}

/// Chain-rule terms of `d^alpha theta(x, v)` in canonical order. Includes the
/// pure spatial term `(d_x^alpha theta)(v)` (no state factors) when
/// `alpha_0 = 0`. Cached per `alpha`.
pub fn tensor_terms(alpha: MultiIndex) -> Result<std::sync::Arc<Vec<TensorTerm>>> {
    if alpha.order() == 0 {
        return Err(QmxError::InvalidMultiIndex("|alpha| = 0 has no chain-rule terms".into()));
    }
    static CACHE: OnceLock<Mutex<HashMap<MultiIndex, std::sync::Arc<Vec<TensorTerm>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&alpha) {
        return Ok(t.clone());
    }
    let t = std::sync::Arc::new(build_tensor_terms(alpha));
    cache.lock().unwrap().insert(alpha, t.clone());
    Ok(t)
}

/// Chain-rule terms with explicit state components `1..=components`.
///
/// Only terms with at least one state factor are listed; the pure spatial
/// term is available through [`tensor_terms`].
pub fn enumerate_terms(alpha: MultiIndex, components: usize) -> Result<Vec<PartitionTerm>> {
    let tensor = tensor_terms(alpha)?;
    let mut merged: BTreeMap<(MultiIndex, Vec<(MultiIndex, usize)>), u64> = BTreeMap::new();
    for t in tensor.iter().filter(|t| !t.gammas.is_empty()) {
        let j = t.gammas.len();
        let mut ls = vec![1usize; j];
        loop {
            let mut pairs: Vec<(MultiIndex, usize)> = t.gammas.iter().copied().zip(ls.iter().copied()).collect();
            pairs.sort();
            *merged.entry((t.beta, pairs)).or_insert(0) += t.coefficient;
            let mut i = 0;
            while i < j && ls[i] == components {
                ls[i] = 1;
                i += 1;
            }
            if i == j {
                break;
            }
            ls[i] += 1;
        }
    }
    Ok(merged
        .into_iter()
        .map(|((beta, pairs), coefficient)| PartitionTerm {
            beta,
            gammas: pairs.iter().map(|p| p.0).collect(),
            component_indices: pairs.iter().map(|p| p.1).collect(),
            coefficient,
        })
        .collect())
}

/// Human-readable term table for `alpha`.
pub fn format_term_table(alpha: MultiIndex) -> Result<String> {
    let terms = tensor_terms(alpha)?;
    let mut s = format!("d^{alpha} theta(x, v): {} terms\n", terms.len());
    s.push_str("coeff  j  beta       gammas\n");
    for t in terms.iter() {
        let g: Vec<String> = t.gammas.iter().map(|g| g.to_string()).collect();
        s.push_str(&format!(
            "{:>5}  {}  {}  [{}]\n",
            t.coefficient,
            t.gammas.len(),
            t.beta,
            g.join(", ")
        ));
    }
    Ok(s)
}

/// Node positions together with `d^gamma v` for a set of multi-indices.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeJet {
    pub positions: Vec<[f64; 3]>,
    pub entries: BTreeMap<MultiIndex, Vec<Vec6>>,
}

impl DerivativeJet {
    pub fn new(positions: Vec<[f64; 3]>) -> Self {
        Self {
            positions,
            entries: BTreeMap::new(),
        }
    }

    pub fn on_grid(grid: &GridSpec) -> Self {
        Self::new(grid.positions())
    }

    /// Fills every `gamma` with `|gamma| <= order` from `f(gamma, x)`.
    pub fn from_fn(positions: Vec<[f64; 3]>, order: usize, f: impl Fn(MultiIndex, [f64; 3]) -> Vec6) -> Self {
        let mut jet = Self::new(positions);
        for g in MultiIndex::all_up_to(order) {
            let vals = jet.positions.iter().map(|&x| f(g, x)).collect();
            jet.entries.insert(g, vals);
        }
        jet
    }

    pub fn insert(&mut self, gamma: MultiIndex, values: Vec<Vec6>) -> Result<()> {
        if values.len() != self.positions.len() {
            return Err(QmxError::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                self.positions.len()
            )));
        }
        self.entries.insert(gamma, values);
        Ok(())
    }

    pub fn get(&self, gamma: &MultiIndex) -> Result<&[Vec6]> {
        self.entries
            .get(gamma)
            .map(|v| v.as_slice())
            .ok_or_else(|| QmxError::MissingJetComponent(gamma.to_string()))
    }
}

/// Evaluates `d^alpha theta(x, v)` at every node by summing the chain-rule
/// terms. `|alpha| = 0` returns `theta(x, v)`.
pub fn compose_derivative(law: &dyn MaterialLaw, jet: &DerivativeJet, alpha: MultiIndex) -> Result<Vec<Vec6>> {
    if alpha.order() > law.max_order() {
        return Err(QmxError::DerivativeOrder {
            requested: alpha.order(),
            max: law.max_order(),
        });
    }
    let v = jet.get(&MultiIndex::ZERO)?;
    if alpha.order() == 0 {
        return Ok(jet.positions.iter().zip(v).map(|(x, y)| law.theta(*x, y)).collect());
    }
    let terms = tensor_terms(alpha)?;
    let mut factors: BTreeMap<MultiIndex, &[Vec6]> = BTreeMap::new();
    for t in terms.iter() {
        for g in &t.gammas {
            if !factors.contains_key(g) {
                factors.insert(*g, jet.get(g)?);
            }
        }
    }
    let mut out = vec![[0.0; 6]; v.len()];
    let mut dirs = Vec::new();
    for (n, (x, y)) in jet.positions.iter().zip(v).enumerate() {
        let mut acc = [0.0; 6];
        for t in terms.iter() {
            dirs.clear();
            dirs.extend(t.gammas.iter().map(|g| factors[g][n]));
            let d = law.theta_derivative(*x, y, t.beta.spatial(), &dirs);
            for c in 0..6 {
                acc[c] += t.coefficient as f64 * d[c];
            }
        }
        out[n] = acc;
    }
    Ok(out)
}

/// Both sides of the composition difference estimate: the left side
/// `||d^alpha theta(v1) - d^alpha theta(v2)||_{L^2}` and, per multi-index
/// `beta` present in both jets with `|beta| <= max(|alpha|, 2)`, the norm
/// `||d^beta v1 - d^beta v2||_{L^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceOracle {
    pub lhs: f64,
    pub rhs_terms: Vec<(MultiIndex, f64)>,
}

impl DifferenceOracle {
    pub fn rhs(&self) -> f64 {
        self.rhs_terms.iter().map(|t| t.1).sum()
    }
}

pub fn difference_norm_oracle(
    law: &dyn MaterialLaw,
    grid: &GridSpec,
    v1: &DerivativeJet,
    v2: &DerivativeJet,
    alpha: MultiIndex,
) -> Result<DifferenceOracle> {
    if v1.positions != v2.positions || v1.positions.len() != grid.node_count() {
        return Err(QmxError::ShapeMismatch("jets live on different grids".into()));
    }
    let a = compose_derivative(law, v1, alpha)?;
    let b = compose_derivative(law, v2, alpha)?;
    let diff: Vec<Vec6> = a.iter().zip(&b).map(|(x, y)| std::array::from_fn(|c| x[c] - y[c])).collect();
    let cap = alpha.order().max(2);
    let mut rhs_terms = Vec::new();
    for (beta, x) in &v1.entries {
        if beta.order() > cap {
            continue;
        }
        if let Some(y) = v2.entries.get(beta) {
            let d: Vec<Vec6> = x.iter().zip(y).map(|(p, q)| std::array::from_fn(|c| p[c] - q[c])).collect();
            rhs_terms.push((*beta, l2_norm(grid, &d)));
        }
    }
    Ok(DifferenceOracle {
        lhs: l2_norm(grid, &diff),
        rhs_terms,
    })
}
