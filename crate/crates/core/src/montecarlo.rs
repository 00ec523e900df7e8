//! Seeded simulation of the chain and of the tracking process.
//!
//! Trajectory `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! results do not depend on the block size or the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{Distribution, MarkovChain, SubChain};
use crate::csqst::{jump_probabilities, ControlFunction};
use crate::error::{Error, Result};
use crate::spectral::SeparationTable;

/// Largest tolerated fraction of trajectories still alive at the horizon.
pub const MAX_CENSORED: f64 = 0.01;
/// Per-state z-score threshold of the conditional-law test.
pub const Z_THRESHOLD: f64 = 4.0;
/// Multiplier `c` of the TV threshold `c·sqrt(|A|/N)`.
pub const TV_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub trajectories: usize,
    pub horizon: usize,
    pub block: usize,
    /// Times at which `X_t` is recorded.
    pub probe: Vec<usize>,
}

impl SimulationConfig {
    pub fn new(seed: u64, trajectories: usize, horizon: usize) -> Self {
        SimulationConfig { seed, trajectories, horizon, block: 4096, probe: Vec::new() }
    }

    pub fn with_probe(mut self, probe: Vec<usize>) -> Self {
        self.probe = probe;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trajectories == 0 || self.block == 0 {
            return Err(Error::InvalidParameter("trajectories and block must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One simulated trajectory. State indices refer to the full chain.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TrajectoryRecord {
    /// `τ_G`, or `None` if still in `A` at the horizon.
    pub absorbed_at: Option<usize>,
    pub exit_state: Option<usize>,
    /// Stopping time (`τ_1` or a halting time) when reached strictly before `τ_G`.
    pub stopped_at: Option<usize>,
    pub stopped_state: Option<usize>,
    /// `X_t` at the configured probe times (`None` past censoring).
    pub probes: Vec<Option<usize>>,
    /// The horizon was reached before the simulation could finish.
    pub censored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub config: SimulationConfig,
    pub records: Vec<TrajectoryRecord>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.records.iter().filter(|r| r.censored).count() as f64 / self.len() as f64
    }

    /// Empirical `P(τ_G > t)`.
    pub fn survival(&self, t: usize) -> f64 {
        let alive = self.records.iter().filter(|r| r.absorbed_at.is_none_or(|a| a > t)).count();
        alive as f64 / self.len() as f64
    }

    /// Empirical `P(τ = t < τ_G)` for the recorded stopping time.
    pub fn stopped_pmf(&self, t: usize) -> f64 {
        self.records.iter().filter(|r| r.stopped_at == Some(t)).count() as f64 / self.len() as f64
    }

    pub fn stopped_count(&self) -> usize {
        self.records.iter().filter(|r| r.stopped_at.is_some()).count()
    }

    /// Counts of `X_t` over all states at probe `k`, censored ones excluded.
    pub fn probe_counts(&self, k: usize, n_states: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n_states];
        for r in &self.records {
            if let Some(Some(x)) = r.probes.get(k) {
                counts[*x] += 1;
            }
        }
        counts
    }

    fn check_censoring(self) -> Result<Self> {
        let frac = self.censored_fraction();
        if frac > MAX_CENSORED {
            return Err(Error::Horizon(format!(
                "{:.2}% of trajectories censored at horizon {}",
                100.0 * frac,
                self.config.horizon
            )));
        }
        Ok(self)
    }
}

/// Inverse-CDF tables over the nonzero entries of each row.
#[derive(Debug, Clone)]
pub(crate) struct RowSampler {
    rows: Vec<(Vec<f64>, Vec<usize>)>,
}

impl RowSampler {
    pub(crate) fn new(chain: &MarkovChain) -> Self {
        let n = chain.len();
        let rows = (0..n)
            .map(|x| {
                let mut cum = Vec::new();
                let mut targets = Vec::new();
                let mut acc = 0.0;
                for y in 0..n {
                    let p = chain.prob(x, y);
                    if p > 0.0 {
                        acc += p;
                        cum.push(acc);
                        targets.push(y);
                    }
                }
                (cum, targets)
            })
            .collect();
        RowSampler { rows }
    }

    pub(crate) fn step(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let (cum, targets) = &self.rows[x];
        pick(cum, targets, rng.random::<f64>())
    }
}

fn pick(cum: &[f64], targets: &[usize], u: f64) -> usize {
    let total = *cum.last().expect("rows have positive mass");
    let i = cum.partition_point(|&c| c <= u * total);
    targets[i.min(targets.len() - 1)]
}

/// Inverse-CDF sampler of an initial law over all states.
#[derive(Debug, Clone)]
pub(crate) struct InitialSampler {
    cum: Vec<f64>,
    targets: Vec<usize>,
}

impl InitialSampler {
    pub(crate) fn new(alpha: &Distribution) -> Self {
        let mut cum = Vec::new();
        let mut targets = Vec::new();
        let mut acc = 0.0;
        for (x, &p) in alpha.weights().iter().enumerate() {
            if p > 0.0 {
                acc += p;
                cum.push(acc);
                targets.push(x);
            }
        }
        InitialSampler { cum, targets }
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        pick(&self.cum, &self.targets, rng.random::<f64>())
    }
}

fn worker_count() -> Option<usize> {
    std::env::var("HITLAB_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n: &usize| n > 0)
}

/// Runs `f` on every trajectory index, block by block, and concatenates the
/// results in index order.
pub(crate) fn run_blocks<T, F>(config: &SimulationConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let n = config.trajectories;
    let blocks: Vec<(usize, usize)> =
        (0..n.div_ceil(config.block)).map(|b| (b * config.block, ((b + 1) * config.block).min(n))).collect();
    let run = |&(lo, hi): &(usize, usize)| (lo..hi).map(&f).collect::<Vec<T>>();

    #[cfg(feature = "parallel")]
    let out: Vec<Vec<T>> = {
        use rayon::prelude::*;
        let go = || blocks.par_iter().map(run).collect();
        match worker_count().and_then(|k| rayon::ThreadPoolBuilder::new().num_threads(k).build().ok()) {
            Some(pool) => pool.install(go),
            None => go(),
        }
    };
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Vec<T>> = {
        let _ = worker_count;
        blocks.iter().map(run).collect()
    };
    out.into_iter().flatten().collect()
}

/// Simulates `X_t` from `alpha` (over all states) until absorption or the
/// horizon.
pub fn sample_base(chain: &MarkovChain, alpha: &Distribution, config: &SimulationConfig) -> Result<SampleSet> {
    config.validate()?;
    if alpha.len() != chain.len() {
        return Err(Error::InvalidDistribution("initial law must cover every state".into()));
    }
    let rows = RowSampler::new(chain);
    let init = InitialSampler::new(alpha);
    let records = run_blocks(config, |i| {
        let mut rng = config.rng(i);
        let mut x = init.draw(&mut rng);
        let mut rec = TrajectoryRecord { probes: vec![None; config.probe.len()], ..Default::default() };
        let mut t = 0;
        loop {
            record_probe(&mut rec, &config.probe, t, x);
            if chain.is_goal(x) {
                rec.absorbed_at = Some(t);
                rec.exit_state = Some(x);
                fill_probes(&mut rec, &config.probe, t, x);
                break;
            }
            if t == config.horizon {
                rec.censored = true;
                break;
            }
            x = rows.step(x, &mut rng);
            t += 1;
        }
        rec
    });
    SampleSet { config: config.clone(), records }.check_censoring()
}

fn record_probe(rec: &mut TrajectoryRecord, probe: &[usize], t: usize, x: usize) {
    for (k, &p) in probe.iter().enumerate() {
        if p == t {
            rec.probes[k] = Some(x);
        }
    }
}

/// Absorbed trajectories stay at their goal state.
fn fill_probes(rec: &mut TrajectoryRecord, probe: &[usize], t: usize, x: usize) {
    for (k, &p) in probe.iter().enumerate() {
        if p > t {
            rec.probes[k] = Some(x);
        }
    }
}

/// Simulates the tracking process: on arrival at `z ∈ A` at time `t` the
/// trajectory jumps to layer 1 with probability `J(t, z)`. `alpha` lives on
/// `A`, like the separation table.
pub fn sample_tracking(
    chain: &MarkovChain,
    sub: &SubChain,
    table: &SeparationTable,
    control: &ControlFunction,
    config: &SimulationConfig,
) -> Result<SampleSet> {
    config.validate()?;
    if control.horizon() < config.horizon || table.horizon() < config.horizon {
        return Err(Error::Horizon("control tables must cover the simulation horizon".into()));
    }
    let jumps: Vec<Vec<f64>> =
        (0..=config.horizon).map(|t| jump_probabilities(control, table, t)).collect::<Result<_>>()?;
    let alpha = sub.lift(&Distribution::normalized(table.alpha.clone())?, chain.len());
    let rows = RowSampler::new(chain);
    let init = InitialSampler::new(&alpha);
    let records = run_blocks(config, |i| {
        let mut rng = config.rng(i);
        let mut x = init.draw(&mut rng);
        let mut rec = TrajectoryRecord { probes: vec![None; config.probe.len()], ..Default::default() };
        let mut t = 0;
        loop {
            record_probe(&mut rec, &config.probe, t, x);
            if chain.is_goal(x) {
                rec.absorbed_at = Some(t);
                rec.exit_state = Some(x);
                fill_probes(&mut rec, &config.probe, t, x);
                break;
            }
            if rec.stopped_at.is_none() {
                let pos = sub.position(x).expect("non-goal states are transient");
                let j = jumps[t][pos];
                if j > 0.0 && rng.random::<f64>() < j {
                    rec.stopped_at = Some(t);
                    rec.stopped_state = Some(x);
                }
            }
            if t == config.horizon {
                rec.censored = true;
                break;
            }
            x = rows.step(x, &mut rng);
            t += 1;
        }
        rec
    });
    SampleSet { config: config.clone(), records }.check_censoring()
}

/// Empirical law of the stopped state against `μ*`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalLawTest {
    pub n_cond: usize,
    pub tv: f64,
    pub tv_threshold: f64,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub pass: bool,
}

pub fn conditional_law_test(samples: &SampleSet, sub: &SubChain, mu_star: &[f64]) -> Result<ConditionalLawTest> {
    let mut counts = vec![0u64; sub.len()];
    for r in &samples.records {
        if let Some(x) = r.stopped_state {
            let pos = sub
                .position(x)
                .ok_or_else(|| Error::InvalidParameter(format!("stopped state {x} is not transient")))?;
            counts[pos] += 1;
        }
    }
    let n_cond: u64 = counts.iter().sum();
    if n_cond == 0 {
        return Err(Error::InvalidParameter("no trajectory reached the stopping time".into()));
    }
    let n = n_cond as f64;
    let z_scores: Vec<f64> = counts.iter().zip(mu_star).map(|(&c, &m)| binomial_z(c, n_cond, m)).collect();
    let tv = 0.5 * counts.iter().zip(mu_star).map(|(&c, &m)| (c as f64 / n - m).abs()).sum::<f64>();
    let tv_threshold = TV_FACTOR * (sub.len() as f64 / n).sqrt();
    let max_abs_z = z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max);
    Ok(ConditionalLawTest {
        n_cond: n_cond as usize,
        tv,
        tv_threshold,
        pass: max_abs_z <= Z_THRESHOLD && tv <= tv_threshold,
        z_scores,
        max_abs_z,
    })
}

/// `(count − np)/sqrt(np(1−p))`; zero when `p ∈ {0,1}` and the count agrees.
pub fn binomial_z(count: u64, n: u64, p: f64) -> f64 {
    let n = n as f64;
    let mean = n * p;
    let sd = (n * p * (1.0 - p)).sqrt();
    let diff = count as f64 - mean;
    if sd > 0.0 {
        diff / sd
    } else if diff.abs() < 0.5 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `|p̂ − p| / sqrt(p(1−p)/N)` for a Bernoulli estimate.
pub fn proportion_z(estimate: f64, exact: f64, n: usize) -> f64 {
    binomial_z((estimate * n as f64).round() as u64, n as u64, exact)
}
