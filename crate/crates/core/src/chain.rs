//! Finite Markov chains with an absorbing target set.
//!
//! A [`MarkovChain`] is a dense row-stochastic matrix over labelled states
//! together with the goal set `G`. Rows of goal states are replaced by
//! self-loops on construction, so the chain is always stopped at `τ_G`.
//! [`SubChain`] holds the restriction `[P]_A` to the transient set and
//! certifies that it is primitive.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sum, vec_mat};

/// Row sums must be within this distance of one; smaller defects are
/// renormalized away.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// The chain-spec interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub states: Vec<String>,
    pub absorbing: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
}

impl ChainSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Initial-law description, either embedded in a chain-spec or parsed from
/// the `--alpha` flag.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Dirac(String),
    /// Uniform over the transient set.
    Uniform,
    /// Uniform over the listed labels.
    UniformSet(Vec<String>),
    /// Explicit weights indexed by the chain's state order.
    Weights(Vec<f64>),
    /// Explicit weights keyed by label; missing labels get zero.
    LabelledWeights(Vec<(String, f64)>),
    /// The quasi-stationary measure of the chain; resolved by the analysis.
    QuasiStationary,
}

#[derive(Serialize, Deserialize)]
struct RawAlpha {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<serde_json::Value>,
}

impl Serialize for AlphaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde_json::json;
        let raw = match self {
            AlphaSpec::Dirac(l) => RawAlpha { kind: "dirac".into(), value: Some(json!(l)) },
            AlphaSpec::Uniform => RawAlpha { kind: "uniform".into(), value: None },
            AlphaSpec::UniformSet(ls) => RawAlpha { kind: "uniform".into(), value: Some(json!(ls)) },
            AlphaSpec::Weights(w) => RawAlpha { kind: "weights".into(), value: Some(json!(w)) },
            AlphaSpec::LabelledWeights(w) => {
                let map: serde_json::Map<String, serde_json::Value> =
                    w.iter().map(|(l, v)| (l.clone(), json!(v))).collect();
                RawAlpha { kind: "weights".into(), value: Some(serde_json::Value::Object(map)) }
            }
            AlphaSpec::QuasiStationary => RawAlpha { kind: "quasi-stationary".into(), value: None },
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawAlpha::deserialize(d)?;
        AlphaSpec::from_raw(raw).map_err(D::Error::custom)
    }
}

impl AlphaSpec {
    fn from_raw(raw: RawAlpha) -> std::result::Result<Self, String> {
        use serde_json::Value;
        match (raw.kind.as_str(), raw.value) {
            ("dirac", Some(Value::String(l))) => Ok(AlphaSpec::Dirac(l)),
            ("uniform", None) | ("uniform", Some(Value::Null)) => Ok(AlphaSpec::Uniform),
            ("uniform", Some(v)) => serde_json::from_value::<Vec<String>>(v)
                .map(AlphaSpec::UniformSet)
                .map_err(|e| format!("uniform value must be a list of labels: {e}")),
            ("weights", Some(v)) => Self::weights_from_value(v),
            ("quasi-stationary", _) => Ok(AlphaSpec::QuasiStationary),
            (kind, value) => Err(format!("unsupported alpha kind '{kind}' with value {value:?}")),
        }
    }

    fn weights_from_value(v: serde_json::Value) -> std::result::Result<Self, String> {
        use serde_json::Value;
        match v {
            Value::Array(_) => serde_json::from_value::<Vec<f64>>(v)
                .map(AlphaSpec::Weights)
                .map_err(|e| format!("weights must be numbers: {e}")),
            Value::Object(map) => map
                .into_iter()
                .map(|(k, v)| {
                    v.as_f64()
                        .map(|x| (k.clone(), x))
                        .ok_or_else(|| format!("weight for '{k}' is not a number"))
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(AlphaSpec::LabelledWeights),
            other => Err(format!("weights must be an array or object, got {other}")),
        }
    }

    /// Parses the CLI grammar `dirac:<label>`, `uniform`,
    /// `uniform-set:<l1,l2,...>`, `weights:<file>` and `mu-star`.
    pub fn parse_flag(flag: &str) -> Result<Self> {
        if flag == "uniform" {
            return Ok(AlphaSpec::Uniform);
        }
        if flag == "mu-star" || flag == "quasi-stationary" {
            return Ok(AlphaSpec::QuasiStationary);
        }
        let (kind, rest) = flag
            .split_once(':')
            .ok_or_else(|| Error::Schema(format!("malformed alpha flag '{flag}'")))?;
        match kind {
            "dirac" => Ok(AlphaSpec::Dirac(rest.to_string())),
            "uniform-set" => Ok(AlphaSpec::UniformSet(
                rest.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            )),
            "weights" => {
                let text = std::fs::read_to_string(rest)?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Schema(format!("weights file: {e}")))?;
                Self::weights_from_value(value).map_err(Error::Schema)
            }
            _ => Err(Error::Schema(format!("unknown alpha kind '{kind}'"))),
        }
    }

    /// Short human-readable tag used in reports.
    pub fn describe(&self) -> String {
        match self {
            AlphaSpec::Dirac(l) => format!("dirac:{l}"),
            AlphaSpec::Uniform => "uniform".into(),
            AlphaSpec::UniformSet(ls) => format!("uniform-set:{}", ls.join(",")),
            AlphaSpec::Weights(_) | AlphaSpec::LabelledWeights(_) => "weights".into(),
            AlphaSpec::QuasiStationary => "mu-star".into(),
        }
    }

    /// Resolves to a distribution over all states of `chain`.
    ///
    /// `QuasiStationary` cannot be resolved here; callers substitute `μ*`.
    pub fn resolve(&self, chain: &MarkovChain) -> Result<Distribution> {
        let n = chain.len();
        let mut w = vec![0.0; n];
        match self {
            AlphaSpec::Dirac(l) => w[chain.index_of(l)?] = 1.0,
            AlphaSpec::Uniform => {
                let share = 1.0 / chain.transient().len() as f64;
                for &x in chain.transient() {
                    w[x] = share;
                }
            }
            AlphaSpec::UniformSet(ls) => {
                if ls.is_empty() {
                    return Err(Error::InvalidDistribution("empty uniform set".into()));
                }
                let idx = ls.iter().map(|l| chain.index_of(l)).collect::<Result<HashSet<_>>>()?;
                let share = 1.0 / idx.len() as f64;
                for x in idx {
                    w[x] = share;
                }
            }
            AlphaSpec::Weights(v) => {
                if v.len() != n {
                    return Err(Error::InvalidDistribution(format!(
                        "weights have length {}, chain has {n} states",
                        v.len()
                    )));
                }
                w.copy_from_slice(v);
            }
            AlphaSpec::LabelledWeights(v) => {
                for (l, x) in v {
                    w[chain.index_of(l)?] += x;
                }
            }
            AlphaSpec::QuasiStationary => {
                return Err(Error::InvalidDistribution(
                    "the quasi-stationary law is only known after the spectral analysis".into(),
                ))
            }
        }
        Distribution::new(w)
    }
}

/// A probability vector over some declared index set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates nonnegativity and unit mass (within [`STOCHASTIC_TOL`]).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {w} is negative or not finite")));
        }
        let total = sum(&weights);
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Distribution(weights))
    }

    /// Normalizes a nonnegative vector to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in &mut weights {
            if !w.is_finite() {
                return Err(Error::InvalidDistribution("non-finite weight".into()));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total = sum(&weights);
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Distribution(weights))
    }

    pub fn dirac(len: usize, at: usize) -> Self {
        let mut w = vec![0.0; len];
        w[at] = 1.0;
        Distribution(w)
    }

    pub fn uniform(len: usize) -> Self {
        Distribution(vec![1.0 / len as f64; len])
    }

    /// Skips validation; for vectors produced by exact evolution.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Distribution(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Finite chain with a nonempty absorbing set `G` and transient set `A`.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    labels: Vec<String>,
    is_goal: Vec<bool>,
    goal: Vec<usize>,
    transient: Vec<usize>,
    p: DMatrix<f64>,
}

impl MarkovChain {
    /// Validates a spec and builds the chain (`load_chain`).
    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        let n = spec.states.len();
        if n == 0 {
            return Err(Error::Schema("no states".into()));
        }
        let mut seen = HashSet::new();
        for l in &spec.states {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let index: HashMap<&str, usize> =
            spec.states.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

        let mut is_goal = vec![false; n];
        for l in &spec.absorbing {
            let i = *index.get(l.as_str()).ok_or_else(|| Error::UnknownLabel(l.clone()))?;
            if is_goal[i] {
                return Err(Error::DuplicateLabel(l.clone()));
            }
            is_goal[i] = true;
        }
        if spec.absorbing.is_empty() {
            return Err(Error::EmptySet("absorbing"));
        }
        if is_goal.iter().all(|g| *g) {
            return Err(Error::EmptySet("transient"));
        }

        if spec.p.len() != n {
            return Err(Error::Schema(format!("P has {} rows, expected {n}", spec.p.len())));
        }
        let mut p = DMatrix::zeros(n, n);
        for (i, row) in spec.p.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Schema(format!("row {i} of P has {} entries, expected {n}", row.len())));
            }
            if is_goal[i] {
                p[(i, i)] = 1.0;
                continue;
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
                return Err(Error::Schema(format!("entry {v} in row {i} is outside [0, 1]")));
            }
            let total = sum(row);
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NonStochasticRow { row: i, label: spec.states[i].clone(), sum: total });
            }
            for (j, v) in row.iter().enumerate() {
                p[(i, j)] = v / total;
            }
        }

        let goal = (0..n).filter(|&i| is_goal[i]).collect();
        let transient = (0..n).filter(|&i| !is_goal[i]).collect();
        Ok(MarkovChain { labels: spec.states.clone(), is_goal, goal, transient, p })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&ChainSpec::from_json(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<(Self, ChainSpec)> {
        let text = std::fs::read_to_string(path)?;
        let spec = ChainSpec::from_json(&text)?;
        Ok((Self::from_spec(&spec)?, spec))
    }

    pub fn to_spec(&self) -> ChainSpec {
        let n = self.len();
        ChainSpec {
            states: self.labels.clone(),
            absorbing: self.goal.iter().map(|&g| self.labels[g].clone()).collect(),
            p: (0..n).map(|i| (0..n).map(|j| self.p[(i, j)]).collect()).collect(),
            alpha: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Indices of the absorbing states, in state order.
    pub fn goal(&self) -> &[usize] {
        &self.goal
    }

    /// Indices of the transient states, in state order.
    pub fn transient(&self) -> &[usize] {
        &self.transient
    }

    pub fn is_goal(&self, i: usize) -> bool {
        self.is_goal[i]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p[(x, y)]
    }

    /// One exact step `μ ↦ μP`.
    pub fn step(&self, mu: &[f64]) -> Vec<f64> {
        vec_mat(mu, &self.p)
    }

    /// Restriction `[P]_A` with primitivity certificate.
    pub fn restrict(&self) -> Result<SubChain> {
        SubChain::new(self)
    }
}

/// `[P]_A` together with the exit block `P|_{A→G}`.
#[derive(Debug, Clone)]
pub struct SubChain {
    transient: Vec<usize>,
    goal: Vec<usize>,
    /// Position in `A` of each chain state, `None` for goal states.
    position: Vec<Option<usize>>,
    matrix: DMatrix<f64>,
    exit: DMatrix<f64>,
    exponent: usize,
}

impl SubChain {
    fn new(chain: &MarkovChain) -> Result<Self> {
        let transient = chain.transient.clone();
        let goal = chain.goal.clone();
        let na = transient.len();
        let matrix = DMatrix::from_fn(na, na, |i, j| chain.p[(transient[i], transient[j])]);
        let exit = DMatrix::from_fn(na, goal.len(), |i, g| chain.p[(transient[i], goal[g])]);
        let mut position = vec![None; chain.len()];
        for (a, &x) in transient.iter().enumerate() {
            position[x] = Some(a);
        }
        let exponent = primitivity_exponent(&matrix, |i| chain.label(transient[i]).to_string())?;
        Ok(SubChain { transient, goal, position, matrix, exit, exponent })
    }

    pub fn len(&self) -> usize {
        self.transient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transient.is_empty()
    }

    pub fn goal_len(&self) -> usize {
        self.goal.len()
    }

    /// Chain index of each transient position.
    pub fn states(&self) -> &[usize] {
        &self.transient
    }

    /// Chain index of each goal position.
    pub fn goal_states(&self) -> &[usize] {
        &self.goal
    }

    pub fn position(&self, state: usize) -> Option<usize> {
        self.position.get(state).copied().flatten()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn exit(&self) -> &DMatrix<f64> {
        &self.exit
    }

    /// Smallest `m` with `([P]_A)^m > 0` entrywise.
    pub fn primitivity_exponent(&self) -> usize {
        self.exponent
    }

    /// Restricts a law over the whole chain to `A`; fails if it charges `G`.
    pub fn restrict_distribution(&self, alpha: &Distribution) -> Result<Distribution> {
        let on_goal: f64 = self.goal.iter().map(|&g| alpha[g]).sum();
        if on_goal > STOCHASTIC_TOL {
            return Err(Error::AlphaInGoal(on_goal));
        }
        Distribution::normalized(self.transient.iter().map(|&x| alpha[x]).collect())
    }

    /// Embeds a law on `A` into the whole state space.
    pub fn lift(&self, alpha: &Distribution, chain_len: usize) -> Distribution {
        let mut w = vec![0.0; chain_len];
        for (a, &x) in self.transient.iter().enumerate() {
            w[x] = alpha[a];
        }
        Distribution::from_raw(w)
    }
}

/// Certifies primitivity of a nonnegative square matrix and returns the
/// smallest exponent with a strictly positive power.
///
/// Irreducibility and the period are read off the support graph first so the
/// error can name the failure; the exponent is then found by boolean powers,
/// which terminate before the Wielandt bound `(n-1)^2 + 1`.
fn primitivity_exponent(m: &DMatrix<f64>, label: impl Fn(usize) -> String) -> Result<usize> {
    let n = m.nrows();
    let succ: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| m[(i, j)] > 0.0).collect()).collect();
    let pred: Vec<Vec<usize>> =
        (0..n).map(|j| (0..n).filter(|&i| m[(i, j)] > 0.0).collect()).collect();

    let forward = bfs_levels(&succ, 0);
    if let Some(j) = forward.iter().position(|l| l.is_none()) {
        return Err(Error::NonPrimitive(format!(
            "reducible: '{}' cannot reach '{}'",
            label(0),
            label(j)
        )));
    }
    if let Some(j) = bfs_levels(&pred, 0).iter().position(|l| l.is_none()) {
        return Err(Error::NonPrimitive(format!(
            "reducible: '{}' cannot reach '{}'",
            label(j),
            label(0)
        )));
    }
    let mut period = 0usize;
    for (i, out) in succ.iter().enumerate() {
        for &j in out {
            let li = forward[i].unwrap() as i64;
            let lj = forward[j].unwrap() as i64;
            period = gcd(period, (li + 1 - lj).unsigned_abs() as usize);
        }
    }
    if period != 1 {
        return Err(Error::NonPrimitive(if period == 0 {
            "no cycles in the transient set".to_string()
        } else {
            format!("periodic with period {period}")
        }));
    }

    let words = n.div_ceil(64);
    let full_row: Vec<u64> = (0..words)
        .map(|w| {
            let bits = (n - w * 64).min(64);
            if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 }
        })
        .collect();
    let mut power: Vec<Vec<u64>> = succ
        .iter()
        .map(|row| {
            let mut bits = vec![0u64; words];
            for &j in row {
                bits[j / 64] |= 1 << (j % 64);
            }
            bits
        })
        .collect();
    let wielandt = (n - 1) * (n - 1) + 1;
    for exponent in 1..=wielandt {
        if power.iter().all(|row| row == &full_row) {
            return Ok(exponent);
        }
        power = succ
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; words];
                for &j in row {
                    for (b, p) in bits.iter_mut().zip(&power[j]) {
                        *b |= p;
                    }
                }
                bits
            })
            .collect();
    }
    Err(Error::NonPrimitive(format!("no positive power up to the Wielandt bound {wielandt}")))
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let next = level[i].unwrap() + 1;
        for &j in &adj[i] {
            if level[j].is_none() {
                level[j] = Some(next);
                queue.push_back(j);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Exact law at time `t`, by repeated vector-matrix products.
pub fn propagate(chain: &MarkovChain, alpha: &Distribution, t: usize) -> Distribution {
    let mut mu = alpha.weights().to_vec();
    for _ in 0..t {
        mu = chain.step(&mu);
    }
    Distribution::from_raw(mu)
}

/// `P(τ_G > t)` for `t = 0..=horizon`, as the transient mass of `μ_t`.
pub fn survival(chain: &MarkovChain, alpha: &Distribution, horizon: usize) -> Vec<f64> {
    let mut mu = alpha.weights().to_vec();
    let mut out = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        if t > 0 {
            mu = chain.step(&mu);
        }
        out.push(chain.transient().iter().map(|&x| mu[x]).sum());
    }
    out
}

/// Exact law of `X_{τ_G}`, indexed like [`MarkovChain::goal`].
///
/// Solves `(I - [P]_A) H = P|_{A→G}` by LU decomposition.
pub fn absorption_profile(chain: &MarkovChain, alpha: &Distribution) -> Result<Distribution> {
    let a = chain.transient();
    let g = chain.goal();
    let system = DMatrix::from_fn(a.len(), a.len(), |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - chain.prob(a[i], a[j])
    });
    let rhs = DMatrix::from_fn(a.len(), g.len(), |i, k| chain.prob(a[i], g[k]));
    let h = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("absorption system is singular".into()))?;
    let profile = (0..g.len())
        .map(|k| alpha[g[k]] + a.iter().enumerate().map(|(i, &x)| alpha[x] * h[(i, k)]).sum::<f64>())
        .collect();
    Ok(Distribution::from_raw(profile))
}
