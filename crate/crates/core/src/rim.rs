//! The rim: a ring of `4^n` states with spokes to a single goal state,
//! tuned so that its principal eigenvalue is a free parameter `λ`.
//!
//! Classes: `𝕋⁰` (multiples of 4, the only states with a spoke), `𝕋¹`
//! (odd states) and `𝕋²` (the rest).

use serde::Serialize;

use crate::chain::{ChainSpec, MarkovChain};
use crate::error::{Error, Result};
use crate::montecarlo::{run_blocks, RowSampler, SampleSet, SimulationConfig, TrajectoryRecord};
use crate::spectral::SpectralTriple;

pub const MAX_N: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RimParams {
    pub n: u32,
    pub lambda: f64,
}

impl RimParams {
    pub fn new(n: u32, lambda: f64) -> Result<Self> {
        if !(1..=MAX_N).contains(&n) {
            return Err(Error::InvalidParameter(format!("rim size n must be in 1..={MAX_N}, got {n}")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameter(format!("rim eigenvalue must lie in (0, 1), got {lambda}")));
        }
        Ok(RimParams { n, lambda })
    }

    /// Ring length `4^n`.
    pub fn modulus(&self) -> usize {
        4usize.pow(self.n)
    }

    /// Index of the goal state.
    pub fn goal(&self) -> usize {
        self.modulus()
    }
}

/// Class of a ring state: 0, 1 or 2.
pub fn class(x: usize) -> usize {
    if x.is_multiple_of(4) {
        0
    } else if x % 2 == 1 {
        1
    } else {
        2
    }
}

/// Nonzero transition probabilities by class.
#[derive(Debug, Clone, Copy)]
struct Rates {
    stay: f64,
    zero_side: f64,
    zero_goal: f64,
    one_to_zero: f64,
    one_to_two: f64,
    two_side: f64,
}

impl Rates {
    fn new(l: f64) -> Self {
        let q = 8.0 - 8.0 * l + l * l;
        Rates {
            stay: l / 2.0,
            zero_side: l * l * (2.0 - l) / (32.0 - 32.0 * l + 4.0 * l * l),
            zero_goal: (8.0 - 12.0 * l + 4.0 * l * l) / q,
            one_to_zero: q / (4.0 * (2.0 - l)),
            one_to_two: l * l / (4.0 * (2.0 - l)),
            two_side: (2.0 - l) / 4.0,
        }
    }

    fn neighbor(self, x: usize, y: usize) -> f64 {
        match class(x) {
            0 => self.zero_side,
            1 => {
                if class(y) == 0 {
                    self.one_to_zero
                } else {
                    self.one_to_two
                }
            }
            _ => self.two_side,
        }
    }
}

pub fn rim_spec(params: &RimParams) -> ChainSpec {
    let m = params.modulus();
    let r = Rates::new(params.lambda);
    let mut p = vec![vec![0.0; m + 1]; m + 1];
    for (x, row) in p.iter_mut().enumerate().take(m) {
        row[x] = r.stay;
        for y in [(x + 1) % m, (x + m - 1) % m] {
            row[y] = r.neighbor(x, y);
        }
        if class(x) == 0 {
            row[m] = r.zero_goal;
        }
    }
    p[m][m] = 1.0;
    let mut states: Vec<String> = (0..m).map(|x| x.to_string()).collect();
    states.push("G".into());
    ChainSpec { states, absorbing: vec!["G".into()], p, alpha: None }
}

pub fn build_rim(params: &RimParams) -> Result<MarkovChain> {
    MarkovChain::from_spec(&rim_spec(params))
}

/// Closed-form `(λ, μ*, γ)` indexed by ring position. Residual fields are
/// left at zero.
pub fn rim_spectral_oracle(params: &RimParams) -> SpectralTriple {
    let l = params.lambda;
    let q = 8.0 - 8.0 * l + l * l;
    let scale = 1.0 / params.modulus() as f64;
    let mu = [scale * q / (2.0 - l), scale * l, scale * l * l / (2.0 - l)];
    let gamma = [(2.0 - l) / q, 1.0 / l, (2.0 - l) / (l * l)];
    let m = params.modulus();
    SpectralTriple {
        lambda: l,
        mu_star: (0..m).map(|x| mu[class(x)]).collect(),
        gamma: (0..m).map(|x| gamma[class(x)]).collect(),
        left_residual: 0.0,
        right_residual: 0.0,
        iterations: 0,
    }
}

/// The chain of classes `{0, 1, 2, G}`.
pub fn rim_projected(lambda: f64) -> Result<MarkovChain> {
    RimParams::new(1, lambda)?;
    let r = Rates::new(lambda);
    let spec = ChainSpec {
        states: ["0", "1", "2", "G"].iter().map(|s| s.to_string()).collect(),
        absorbing: vec!["G".into()],
        p: vec![
            vec![r.stay, 2.0 * r.zero_side, 0.0, r.zero_goal],
            vec![r.one_to_zero, r.stay, r.one_to_two, 0.0],
            vec![0.0, 2.0 * r.two_side, r.stay, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
        alpha: None,
    };
    MarkovChain::from_spec(&spec)
}

/// Nested sets `S_0 = {s0}`, `S_k = {y : y ± 2^{2n−k−1} ∈ S_{k−1}}`.
#[derive(Debug, Clone, Serialize)]
pub struct HaltingSets {
    pub modulus: usize,
    pub s0: usize,
    /// Sorted members of each `S_k`, `k = 0..=2n−1`.
    pub sets: Vec<Vec<usize>>,
    /// `parents[k][i]` is the parent in `S_{k−1}` of `sets[k][i]` (empty for `k = 0`).
    pub parents: Vec<Vec<usize>>,
    pub opposite: usize,
}

impl HaltingSets {
    pub fn levels(&self) -> usize {
        self.sets.len()
    }

    /// Step between a level-`k` state and its parent.
    pub fn step(&self, k: usize) -> usize {
        let two_n = self.sets.len();
        1 << (two_n - k - 1)
    }
}

/// Halting sets from `s0 ∈ 𝕋⁰`. Other starting points first wander to a
/// random `s0`, which only the simulation resolves.
pub fn halting_sets(params: &RimParams, s0: usize) -> Result<HaltingSets> {
    let m = params.modulus();
    if s0 >= m || class(s0) != 0 {
        return Err(Error::InvalidParameter(format!("halting sets start from a multiple of 4, got {s0}")));
    }
    let levels = 2 * params.n as usize;
    let mut sets = vec![vec![s0]];
    let mut parents = vec![Vec::new()];
    for k in 1..levels {
        let d = 1usize << (levels - k - 1);
        let prev = &sets[k - 1];
        let mut next: Vec<(usize, usize)> = Vec::new();
        for &p in prev {
            for y in [(p + d) % m, (p + m - d) % m] {
                next.push((y, p));
            }
        }
        next.sort_unstable();
        next.dedup_by_key(|e| e.0);
        parents.push(next.iter().map(|e| e.1).collect());
        sets.push(next.into_iter().map(|e| e.0).collect());
    }
    Ok(HaltingSets { modulus: m, s0, sets, parents, opposite: (s0 + m / 2) % m })
}

/// Samples of the hitting-sequence stopping time `τ(2n−1) + 1`, with the
/// distribution of the hitting state at every level.
#[derive(Debug, Clone, Serialize)]
pub struct HaltingSample {
    pub samples: SampleSet,
    /// `level_counts[k][i]`: trajectories with `X_{τ(k)} − s0 = sets_from_zero[k][i]`.
    pub level_counts: Vec<Vec<u64>>,
    pub sets_from_zero: HaltingSets,
}

/// Simulates from ring state `x` until `τ(2n−1) + 1` or absorption.
pub fn rim_halting_csqst(params: &RimParams, x: usize, config: &SimulationConfig) -> Result<HaltingSample> {
    let m = params.modulus();
    if x >= m {
        return Err(Error::InvalidParameter(format!("start {x} is not a ring state")));
    }
    let chain = build_rim(params)?;
    let rows = RowSampler::new(&chain);
    let sets = halting_sets(params, 0)?;
    let levels = sets.levels();
    let mut index = vec![vec![usize::MAX; m]; levels];
    for (k, set) in sets.sets.iter().enumerate() {
        for (i, &y) in set.iter().enumerate() {
            index[k][y] = i;
        }
    }
    let goal = params.goal();

    let outcomes = run_blocks(config, |i| {
        let mut rng = config.rng(i);
        let mut rec = TrajectoryRecord { probes: vec![None; config.probe.len()], ..Default::default() };
        let mut hits: Vec<u32> = Vec::with_capacity(levels);
        let mut state = x;
        let mut s0 = None;
        let mut t = 0;
        loop {
            if state == goal {
                rec.absorbed_at = Some(t);
                rec.exit_state = Some(goal);
                break;
            }
            let k = hits.len();
            if k == levels {
                rec.stopped_at = Some(t);
                rec.stopped_state = Some(state);
                break;
            }
            let origin = match s0 {
                Some(o) => Some(o),
                None if class(state) == 0 => {
                    s0 = Some(state);
                    s0
                }
                None => None,
            };
            if let Some(o) = origin {
                let rel = (state + m - o) % m;
                if index[k][rel] != usize::MAX {
                    hits.push(index[k][rel] as u32);
                }
            }
            if t == config.horizon {
                rec.censored = true;
                break;
            }
            state = rows.step(state, &mut rng);
            t += 1;
        }
        (rec, hits)
    });

    let mut level_counts: Vec<Vec<u64>> = sets.sets.iter().map(|s| vec![0; s.len()]).collect();
    let mut records = Vec::with_capacity(outcomes.len());
    for (rec, hits) in outcomes {
        for (k, &h) in hits.iter().enumerate() {
            level_counts[k][h as usize] += 1;
        }
        records.push(rec);
    }
    let samples = SampleSet { config: config.clone(), records };
    if samples.censored_fraction() > crate::montecarlo::MAX_CENSORED {
        return Err(Error::Horizon(format!("halting simulation censored at horizon {}", config.horizon)));
    }
    Ok(HaltingSample { samples, level_counts, sets_from_zero: sets })
}
