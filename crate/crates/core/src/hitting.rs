//! Representation of `P(τ_G > t)`, exit decomposition, metastability
//! time-scales and the exponential bound.

use serde::Serialize;

use crate::chain::{self, Distribution, MarkovChain, SubChain};
use crate::csqst::TrackingTable;
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, powi};
use crate::spectral::{hitting_measure, SeparationTable, Spectral, SpectralTriple};

/// Negative values of `P(τ_{*,G} > t)` above this magnitude are reported as
/// numerical inconsistencies; smaller ones are clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Slack granted to the exponential bound comparison.
pub const BOUND_SLACK: f64 = 1e-12;

/// `P(τ_{*,G} > t) = λ^t (Σ_y w_t(y) − min_y w_t(y)/μ*(y))` for `t ≤ horizon`.
pub fn metastability_survival(table: &SeparationTable) -> Result<Vec<f64>> {
    (0..=table.horizon())
        .map(|t| {
            let v = powi(table.lambda, t) * table.scaled_metastability_survival(t);
            if v < -NEGATIVE_TOL {
                Err(Error::Numerical(format!("P(tau_*G > {t}) = {v:e} is negative")))
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

/// Per-`t` terms of `P(τ_G > t) = λ^{t+δ}(1 − s̃(t)) + P(τ_{*,G} > t)`.
#[derive(Debug, Clone, Serialize)]
pub struct RepresentationReport {
    pub survival: Vec<f64>,
    pub leading: Vec<f64>,
    pub remainder: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
}

impl RepresentationReport {
    pub fn horizon(&self) -> usize {
        self.survival.len() - 1
    }
}

/// Compares the exact survival of the full chain (propagated on all states)
/// with the leading term and remainder read off the separation table.
/// `alpha` is indexed by all states and must vanish on `G`.
pub fn representation(chain: &MarkovChain, spectral: &Spectral, alpha: &Distribution, horizon: usize) -> Result<RepresentationReport> {
    let alpha_a = spectral.sub.restrict_distribution(alpha)?;
    let table = spectral.table(&alpha_a, horizon)?;
    let survival = chain::survival(chain, alpha, horizon);
    representation_from(&table, survival)
}

/// As [`representation`], with the survival series supplied by the caller.
pub fn representation_from(table: &SeparationTable, survival: Vec<f64>) -> Result<RepresentationReport> {
    let horizon = table.horizon().min(survival.len() - 1);
    let remainder = metastability_survival(table)?;
    let leading: Vec<f64> = (0..=horizon).map(|t| table.leading(t)).collect();
    let survival: Vec<f64> = survival[..=horizon].to_vec();
    let residual: Vec<f64> =
        (0..=horizon).map(|t| (survival[t] - leading[t] - remainder[t]).abs()).collect();
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(RepresentationReport { survival, leading, remainder: remainder[..=horizon].to_vec(), residual, max_residual })
}

/// Largest gap between the formula for `P(τ_{*,G} > t)` and the layer-0 mass
/// of a tracking recursion driven by the minimal control.
pub fn remainder_vs_tracking(table: &SeparationTable, tracking: &TrackingTable) -> Result<f64> {
    let formula = metastability_survival(table)?;
    Ok((0..=tracking.horizon().min(table.horizon()))
        .map(|t| (formula[t] - tracking.tau1_survival(t)).abs())
        .fold(0.0, f64::max))
}

/// `P(X_{τ_G} = y) = P(τ_G ≤ τ_*, X_{τ_G} = y) + ω(y) P(τ_* < τ_G)`.
#[derive(Debug, Clone, Serialize)]
pub struct ExitDecomposition {
    pub goal_labels: Vec<String>,
    /// Exact absorption law from the linear solve.
    pub exit_law: Vec<f64>,
    /// Absorbed before the CSQST.
    pub before_csqst: Vec<f64>,
    pub omega: Vec<f64>,
    /// `P(τ_* < τ_G)`.
    pub csqst_first: f64,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// Layer-0 mass left at the horizon, unassigned to either term.
    pub unresolved: f64,
}

pub fn exit_decomposition(
    chain: &MarkovChain,
    spectral: &Spectral,
    alpha: &Distribution,
    tracking: &TrackingTable,
) -> Result<ExitDecomposition> {
    let profile = chain::absorption_profile(chain, alpha)?;
    let goal = spectral.sub.goal_states();
    let exit_law = profile.into_weights();
    let before_csqst = tracking.absorbed_total();
    let omega = hitting_measure(&spectral.sub, &spectral.triple).into_weights();
    let csqst_first = tracking.jumped_total();
    let residual: Vec<f64> = (0..goal.len())
        .map(|i| (exit_law[i] - before_csqst[i] - omega[i] * csqst_first).abs())
        .collect();
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(ExitDecomposition {
        goal_labels: goal.iter().map(|&g| chain.label(g).to_string()).collect(),
        exit_law,
        before_csqst,
        omega,
        csqst_first,
        residual,
        max_residual,
        unresolved: tracking.tau1_survival(tracking.horizon()),
    })
}

/// `P(τ_{*,G}^x > t)` for every Dirac start `x ∈ A` and `t ≤ horizon`.
#[derive(Debug, Clone, Serialize)]
pub struct DiracProfiles {
    /// Indexed `[x][t]`.
    pub series: Vec<Vec<f64>>,
    /// `sup_x P(τ_{*,G}^x > t)`.
    pub sup: Vec<f64>,
}

pub fn dirac_profiles(spectral: &Spectral, horizon: usize) -> Result<DiracProfiles> {
    let n = spectral.sub.len();
    let one = |x: usize| -> Result<Vec<f64>> { metastability_survival(&spectral.dirac_table(x, horizon)?) };
    #[cfg(feature = "parallel")]
    let series: Result<Vec<Vec<f64>>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let series: Result<Vec<Vec<f64>>> = (0..n).map(one).collect();
    let series = series?;
    let sup = (0..=horizon).map(|t| series.iter().map(|s| s[t]).fold(0.0, f64::max)).collect();
    Ok(DiracProfiles { series, sup })
}

impl DiracProfiles {
    pub fn horizon(&self) -> usize {
        self.sup.len() - 1
    }

    /// `max_{u,v ≤ max_uv} [sup(u+v) − sup(u) sup(v)]`; nonpositive under
    /// submultiplicativity.
    pub fn submultiplicativity_excess(&self, max_uv: usize) -> Result<f64> {
        if 2 * max_uv > self.horizon() {
            return Err(Error::Horizon(format!("need horizon {} for the grid", 2 * max_uv)));
        }
        let mut worst = f64::NEG_INFINITY;
        for u in 1..=max_uv {
            for v in 1..=max_uv {
                worst = worst.max(self.sup[u + v] - self.sup[u] * self.sup[v]);
            }
        }
        Ok(worst)
    }
}

/// `R = sup_α Σ_t P(τ_{*,G}^α > t)`, attained at a Dirac start.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanMetastability {
    /// Truncated sum up to the horizon at the maximizing start.
    pub r: f64,
    /// Position in `A` of the maximizing start.
    pub argmax: usize,
    /// Certified bound on the neglected tail; the true `R` lies in
    /// `[r, r + tail_bound]`.
    pub tail_bound: f64,
    pub t0: usize,
    pub q: f64,
}

/// `Σ_{t ≥ h+1} q^{⌊t/t0⌋}`.
fn submultiplicative_tail(q: f64, t0: usize, h: usize) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    let k0 = (h + 1) / t0;
    let c = ((k0 + 1) * t0 - h - 1) as f64;
    c * q.powi(k0 as i32) + t0 as f64 * q.powi(k0 as i32 + 1) / (1.0 - q)
}

pub fn mean_metastability_time(profiles: &DiracProfiles) -> Result<MeanMetastability> {
    let h = profiles.horizon();
    let (argmax, r) = profiles
        .series
        .iter()
        .map(|s| s.iter().sum::<f64>())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (x, v)| if v > best.1 { (x, v) } else { best });
    let mut best: Option<(f64, usize, f64)> = None;
    for t0 in 1..=h.max(1) {
        let q = profiles.sup[t0.min(h)];
        if q >= 1.0 {
            continue;
        }
        let bound = submultiplicative_tail(q, t0, h);
        if best.is_none_or(|b| bound < b.0) {
            best = Some((bound, t0, q));
        }
    }
    let (tail_bound, t0, q) =
        best.ok_or_else(|| Error::Horizon("no t0 within the horizon has sup_x P(tau_*G > t0) < 1".into()))?;
    Ok(MeanMetastability { r, argmax, tail_bound, t0, q })
}

/// `R`, `T = 1/(1 − λ)` and the rate `a` in `R/T = λ^T e^{−a}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetastabilityProfile {
    pub r: f64,
    pub t: f64,
    /// `+∞` when `R = 0`.
    pub rate_a: f64,
    pub ratio: f64,
    pub hypothesis: bool,
}

pub fn metastability_rate(r: f64, t: f64, lambda: f64) -> MetastabilityProfile {
    let ratio = r / (t * lambda.powf(t));
    let rate_a = -ratio.ln();
    MetastabilityProfile { r, t, rate_a, ratio, hypothesis: rate_a > 0.0 }
}

/// One evaluation time of the exponential bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub time: usize,
    /// `|P(τ_G > t)/λ^{t+δ} − 1|`.
    pub lhs: f64,
    /// `e^{−an} λ^{−δ} e^{1/λ} / (1 − e^{−a})`.
    pub bound: f64,
    /// `e^{−an} / (α·γ)`.
    pub proof_bound: f64,
    /// `−s̃(t)`, a lower bound on the signed ratio defect.
    pub lower_ingredient: f64,
    /// `λ^{−t−δ} P(τ_{*,G} > t)`, an upper bound on it.
    pub upper_ingredient: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub rate_a: f64,
    pub skipped: bool,
    /// `e^{−1/λ} ≤ λ^T ≤ e^{−1}`.
    pub relaxation_sanity: bool,
    pub rows: Vec<BoundRow>,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.relaxation_sanity && self.rows.iter().all(|r| r.holds)
    }

    /// Horizon needed to evaluate `n ≤ n_max`.
    pub fn horizon_for(lambda: f64, n_max: usize) -> usize {
        (n_max as f64 / (1.0 - lambda)).ceil() as usize
    }
}

/// Evaluates the bound at `⌊nT⌋` and `⌈nT⌉` for `n = 1..=n_max`. The table
/// must reach `⌈n_max T⌉`.
pub fn exponential_bound_check(table: &SeparationTable, profile: &MetastabilityProfile, n_max: usize) -> Result<BoundCheck> {
    let lambda = table.lambda;
    let t_relax = profile.t;
    let lt = lambda.powf(t_relax);
    let relaxation_sanity = (-1.0 / lambda).exp() <= lt && lt <= (-1.0f64).exp();
    let mut check = BoundCheck { rate_a: profile.rate_a, skipped: !profile.hypothesis, relaxation_sanity, rows: Vec::new() };
    if check.skipped {
        return Ok(check);
    }
    let need = BoundCheck::horizon_for(lambda, n_max);
    if table.horizon() < need {
        return Err(Error::Horizon(format!("bound check needs horizon {need}")));
    }
    let a = profile.rate_a;
    let factor = table.shift.factor;
    for n in 1..=n_max {
        let nt = n as f64 * t_relax;
        let mut times = vec![nt.floor() as usize, nt.ceil() as usize];
        times.dedup();
        for time in times {
            let signed = table.scaled_survival(time) / factor - 1.0;
            let decay = (-a * n as f64).exp();
            let bound = decay * (1.0 / lambda).exp() / (factor * (1.0 - (-a).exp()));
            let lhs = signed.abs();
            check.rows.push(BoundRow {
                n,
                time,
                lhs,
                bound,
                proof_bound: decay / factor,
                lower_ingredient: -table.sep(time as isize),
                upper_ingredient: table.scaled_metastability_survival(time) / factor,
                holds: lhs <= bound + BOUND_SLACK,
            });
        }
    }
    Ok(check)
}

/// `max_{t ≤ t_max} [s̃(t) − λ^{−t−1−δ}P(τ_{*,G}>t) − (1−λ)/λ Σ_{t<u≤H} λ^{−u−δ}P(τ_{*,G}>u)]`.
///
/// The sum is truncated at the table horizon `H`; its terms are nonnegative,
/// so a nonpositive result certifies the untruncated inequality.
pub fn lower_bound_chain_excess(table: &SeparationTable, t_max: usize) -> Result<f64> {
    let h = table.horizon();
    if t_max >= h {
        return Err(Error::Horizon(format!("t_max {t_max} must be below the table horizon {h}")));
    }
    let factor = table.shift.factor;
    let scaled: Vec<f64> = (0..=h).map(|u| table.scaled_metastability_survival(u).max(0.0) / factor).collect();
    let mut tail: f64 = scaled[t_max + 1..].iter().sum();
    let coef = (1.0 - table.lambda) / table.lambda;
    let mut worst = f64::NEG_INFINITY;
    for t in (0..=t_max).rev() {
        worst = worst.max(table.sep(t as isize) - scaled[t] / table.lambda - coef * tail);
        tail += scaled[t];
    }
    Ok(worst)
}

/// `B = {x ∈ A : P(τ_G^x > 2⌈R⌉) > 3/4}`.
#[derive(Debug, Clone, Serialize)]
pub struct Basin {
    pub time: usize,
    /// Positions in `A`.
    pub members: Vec<usize>,
    pub survival: Vec<f64>,
    /// `min_{x∈B} γ(x)`, `+∞` for an empty basin.
    pub min_gamma: f64,
    /// `γ(x) ≥ 1/4` on `B`, hence `α·γ ≥ 1/4` for every `α` supported in `B`.
    pub gamma_bound_holds: bool,
}

pub fn basin(sub: &SubChain, triple: &SpectralTriple, r: f64) -> Basin {
    let time = 2 * r.max(0.0).ceil() as usize;
    let mut v = vec![1.0; sub.len()];
    for _ in 0..time {
        v = mat_vec(sub.matrix(), &v);
    }
    let members: Vec<usize> = (0..sub.len()).filter(|&x| v[x] > 0.75).collect();
    let min_gamma = members.iter().map(|&x| triple.gamma[x]).fold(f64::INFINITY, f64::min);
    Basin { time, members, survival: v, min_gamma, gamma_bound_holds: min_gamma >= 0.25 }
}
