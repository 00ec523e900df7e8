//! Control functions, the tracking process and conditionally-strong
//! quasi-stationary times (CSQST).
//!
//! The tracking process lives on two copies of the state space. Layer 0
//! follows `P` and, on arriving at `z` at time `t`, jumps to layer 1 with
//! probability `J(t,z)` built from a control function `m`. The first jump
//! time `τ_1` is a CSQST. Layer 1 is never materialized: once there, the
//! marginal is `λ`-powers of `μ*`, so only layer 0 is propagated.
//!
//! Layer-0 quantities are stored divided by `λ^t`, like the `w` vectors of
//! [`SeparationTable`].

use serde::Serialize;

use crate::chain::{Distribution, SubChain};
use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, powi, sum, vec_mat};
use crate::spectral::{SeparationTable, SpectralTriple};

/// Increments `m(t−1) − m(t)` at or below this are treated as zero, which
/// realizes the `0/0 = 0` convention of the jump probabilities.
pub const FLAT_TOL: f64 = 1e-15;
/// Slack for monotonicity and dominance of control functions.
pub const CONTROL_TOL: f64 = 1e-13;
/// Per-step mass-conservation tolerance of the recursion.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Layer-0 mass (relative to `α·γ`) below which an ephemeral measure is
/// considered undefined.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// `m(t)` for `t = −1..=horizon`, with `m(−1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlFunction {
    values: Vec<f64>,
}

impl ControlFunction {
    /// `values[0]` is `m(−1)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidControl("needs at least m(-1) and m(0)".into()));
        }
        if values[0] != 1.0 {
            return Err(Error::InvalidControl(format!("m(-1) = {} instead of 1", values[0])));
        }
        for (i, pair) in values.windows(2).enumerate() {
            if !(0.0 - CONTROL_TOL..=1.0 + CONTROL_TOL).contains(&pair[1]) {
                return Err(Error::InvalidControl(format!("m({i}) = {} outside [0, 1]", pair[1])));
            }
            if pair[1] > pair[0] + CONTROL_TOL {
                return Err(Error::InvalidControl(format!("m increases at t = {i}")));
            }
        }
        Ok(ControlFunction { values })
    }

    pub fn at(&self, t: isize) -> f64 {
        self.values[(t + 1) as usize]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 2
    }

    /// Values from `t = 0` on.
    pub fn series(&self) -> &[f64] {
        &self.values[1..]
    }

    /// Checks `m(t) ≥ s̃(t)` on the common horizon.
    pub fn check_dominates(&self, table: &SeparationTable) -> Result<()> {
        if table.horizon() < self.horizon() {
            return Err(Error::Horizon("separation table shorter than control".into()));
        }
        for t in 0..=self.horizon() as isize {
            if self.at(t) + CONTROL_TOL < table.sep(t) {
                return Err(Error::InvalidControl(format!(
                    "m({t}) = {} below the separation {}",
                    self.at(t),
                    table.sep(t)
                )));
            }
        }
        Ok(())
    }

    pub fn is_minimal_for(&self, table: &SeparationTable) -> bool {
        (0..=self.horizon() as isize).all(|t| self.at(t) == table.sep(t))
    }
}

/// `m(t) = s̃(t)`: the control realizing the minimal CSQST.
pub fn control_minimal(table: &SeparationTable) -> ControlFunction {
    let mut values = Vec::with_capacity(table.horizon() + 2);
    values.push(1.0);
    values.extend_from_slice(table.sep_series());
    ControlFunction { values }
}

/// `m(t) = sup_{u ≥ t} max(s̃(u), c ρ^u)`, a non-minimal control for `c ≤ 1`,
/// `ρ ≤ 1`. The supremum only differs from `max(s̃(t), c ρ^t)` where rounding
/// makes the computed `s̃` tick upwards.
pub fn control_dominating(table: &SeparationTable, c: f64, rho: f64) -> Result<ControlFunction> {
    if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("need c, rho in [0, 1], got ({c}, {rho})")));
    }
    let mut values: Vec<f64> = table.sep_series().iter().enumerate().map(|(t, s)| s.max(c * powi(rho, t))).collect();
    for t in (0..values.len().saturating_sub(1)).rev() {
        values[t] = values[t].max(values[t + 1]);
    }
    values.insert(0, 1.0);
    ControlFunction::new(values)
}

/// Jump and stay factors at time `t` on `A`.
///
/// The stay factor `1 − J` is evaluated as
/// `(m(t) − s̃(t,z)) / (m(t−1) − s̃(t,z))` to avoid cancellation when `J ≈ 1`.
fn jump_and_stay(control: &ControlFunction, table: &SeparationTable, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if t > control.horizon() || t > table.horizon() {
        return Err(Error::Horizon(format!("t = {t} beyond control/table horizon")));
    }
    let prev = control.at(t as isize - 1);
    let cur = control.at(t as isize);
    let num = prev - cur;
    let n = table.sep_pointwise(t).len();
    if num <= FLAT_TOL {
        return Ok((vec![0.0; n], vec![1.0; n]));
    }
    let mut jump = Vec::with_capacity(n);
    let mut stay = Vec::with_capacity(n);
    for &s in table.sep_pointwise(t) {
        let den = prev - s;
        if den <= 0.0 {
            return Err(Error::InvalidControl(format!(
                "non-positive jump denominator {den:e} at t = {t}; control does not dominate the separation"
            )));
        }
        jump.push((num / den).clamp(0.0, 1.0));
        stay.push(((cur - s) / den).clamp(0.0, 1.0));
    }
    Ok((jump, stay))
}

/// `J(t,z)` for `z ∈ A`; on `G` the jump probability is identically 1.
pub fn jump_probabilities(control: &ControlFunction, table: &SeparationTable, t: usize) -> Result<Vec<f64>> {
    jump_and_stay(control, table, t).map(|(j, _)| j)
}

/// Exact layer-0 evolution of the tracking process.
#[derive(Debug, Clone)]
pub struct TrackingTable {
    pub lambda: f64,
    pub shift_factor: f64,
    pub control: ControlFunction,
    /// `φ_t / λ^t`.
    scaled_phi: Vec<Vec<f64>>,
    /// Layer-1 entry flux on `A` at time `t`, divided by `λ^t`.
    scaled_flux: Vec<Vec<f64>>,
    /// Mass absorbed into each goal state from layer 0 at time `t`, divided by `λ^t`.
    scaled_absorbed: Vec<Vec<f64>>,
    /// Largest per-step conservation defect, in absolute probability.
    pub max_conservation_error: f64,
}

pub fn tracking_recursion(
    sub: &SubChain,
    table: &SeparationTable,
    control: &ControlFunction,
) -> Result<TrackingTable> {
    control.check_dominates(table)?;
    let horizon = control.horizon();
    let lambda = table.lambda;
    let n_goal = sub.goal_len();

    let (j0, s0) = jump_and_stay(control, table, 0)?;
    let alpha = &table.alpha;
    let mut scaled_phi = vec![alpha.iter().zip(&s0).map(|(a, s)| a * s).collect::<Vec<f64>>()];
    let mut scaled_flux = vec![alpha.iter().zip(&j0).map(|(a, j)| a * j).collect::<Vec<f64>>()];
    let mut scaled_absorbed = vec![vec![0.0; n_goal]];
    let mut max_err = (sum(&scaled_phi[0]) + sum(&scaled_flux[0]) - sum(alpha)).abs();

    for t in 0..horizon {
        let phi = &scaled_phi[t];
        let pre: Vec<f64> = vec_mat(phi, sub.matrix()).into_iter().map(|v| v / lambda).collect();
        let absorbed: Vec<f64> = vec_mat(phi, sub.exit()).into_iter().map(|v| v / lambda).collect();
        let (jump, stay) = jump_and_stay(control, table, t + 1)?;
        let next: Vec<f64> = pre.iter().zip(&stay).map(|(p, s)| p * s).collect();
        let flux: Vec<f64> = pre.iter().zip(&jump).map(|(p, j)| p * j).collect();

        let defect = powi(lambda, t) * (lambda * (sum(&next) + sum(&flux) + sum(&absorbed)) - sum(phi)).abs();
        if !(defect <= CONSERVATION_TOL) {
            return Err(Error::Numerical(format!("mass conservation violated by {defect:e} at t = {}", t + 1)));
        }
        max_err = max_err.max(defect);
        scaled_phi.push(next);
        scaled_flux.push(flux);
        scaled_absorbed.push(absorbed);
    }

    Ok(TrackingTable {
        lambda,
        shift_factor: table.shift.factor,
        control: control.clone(),
        scaled_phi,
        scaled_flux,
        scaled_absorbed,
        max_conservation_error: max_err,
    })
}

impl TrackingTable {
    pub fn horizon(&self) -> usize {
        self.scaled_phi.len() - 1
    }

    fn scale(&self, t: usize) -> f64 {
        powi(self.lambda, t)
    }

    /// Layer-0 sub-probability vector `φ_t`.
    pub fn phi(&self, t: usize) -> Vec<f64> {
        let s = self.scale(t);
        self.scaled_phi[t].iter().map(|v| v * s).collect()
    }

    pub fn scaled_phi(&self, t: usize) -> &[f64] {
        &self.scaled_phi[t]
    }

    /// Layer-1 entry flux `Σ_x φ_{t−1}(x)P(x,y)J(t,y)` (or `α(y)J(0,y)` at 0).
    pub fn entry_flux(&self, t: usize) -> Vec<f64> {
        let s = self.scale(t);
        self.scaled_flux[t].iter().map(|v| v * s).collect()
    }

    pub fn scaled_entry_flux(&self, t: usize) -> &[f64] {
        &self.scaled_flux[t]
    }

    /// `P(τ_1 = t < τ_G)`.
    pub fn tau1_pmf(&self, t: usize) -> f64 {
        self.scale(t) * sum(&self.scaled_flux[t])
    }

    /// `λ^{-t} P(τ_1 = t < τ_G)`.
    pub fn scaled_tau1_pmf(&self, t: usize) -> f64 {
        sum(&self.scaled_flux[t])
    }

    /// `P(τ_1 > t) = Σ_y φ_t(y)`.
    pub fn tau1_survival(&self, t: usize) -> f64 {
        self.scale(t) * sum(&self.scaled_phi[t])
    }

    pub fn scaled_tau1_survival(&self, t: usize) -> f64 {
        sum(&self.scaled_phi[t])
    }

    /// Mass absorbed into each goal state from layer 0 at time `t`.
    pub fn absorbed(&self, t: usize) -> Vec<f64> {
        let s = self.scale(t);
        self.scaled_absorbed[t].iter().map(|v| v * s).collect()
    }

    /// `P(τ_G ≤ τ_1, X_{τ_G} = y)` accumulated up to the horizon.
    pub fn absorbed_total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.scaled_absorbed[0].len()];
        for t in 0..=self.horizon() {
            for (a, v) in acc.iter_mut().zip(self.absorbed(t)) {
                *a += v;
            }
        }
        acc
    }

    /// `P(τ_1 < τ_G)` accumulated up to the horizon.
    pub fn jumped_total(&self) -> f64 {
        (0..=self.horizon()).map(|t| self.tau1_pmf(t)).sum()
    }

    /// `tau1_survival(t) + Σ_{u≤t} pmf(u) + Σ_{u≤t} absorbed(u) − 1`, worst `t`.
    pub fn cumulative_conservation_error(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for t in 0..=self.horizon() {
            acc += self.tau1_pmf(t) + sum(&self.absorbed(t));
            worst = worst.max((self.tau1_survival(t) + acc - 1.0).abs());
        }
        worst
    }

    /// Largest `|pmf_recursion(t) − λ^{t+δ}(m(t−1) − m(t))|` over the horizon.
    pub fn closed_form_deviation(&self) -> f64 {
        (0..=self.horizon())
            .map(|t| {
                let closed =
                    self.shift_factor * (self.control.at(t as isize - 1) - self.control.at(t as isize));
                self.scale(t) * (self.scaled_tau1_pmf(t) - closed).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Deviation of the layer-1 entry flux from the `μ*` shape.
    ///
    /// `resolved_increment` selects the times whose control increment
    /// `m(t−1) − m(t)` is large enough for the relative form to be
    /// meaningful in double precision.
    pub fn defining_property(&self, mu_star: &[f64], resolved_increment: f64) -> DefiningProperty {
        let mut out = DefiningProperty {
            law_relative: 0.0,
            relative_resolved: 0.0,
            relative_all: 0.0,
            scaled_all: 0.0,
            resolved_times: 0,
        };
        let jumped = self.jumped_total();
        for (t, flux) in self.scaled_flux.iter().enumerate() {
            let total = sum(flux);
            if total <= 0.0 {
                continue;
            }
            let spread: f64 = flux.iter().zip(mu_star).map(|(f, m)| (f - m * total).abs()).sum();
            out.law_relative = out.law_relative.max(self.scale(t) * spread / jumped);
            let increment = self.control.at(t as isize - 1) - self.control.at(t as isize);
            let resolved = increment >= resolved_increment;
            if resolved {
                out.resolved_times += 1;
            }
            for (f, m) in flux.iter().zip(mu_star) {
                let rel = (f / (m * total) - 1.0).abs();
                out.relative_all = out.relative_all.max(rel);
                if resolved {
                    out.relative_resolved = out.relative_resolved.max(rel);
                }
                out.scaled_all = out.scaled_all.max((f / m - total).abs() / self.shift_factor);
            }
        }
        out
    }
}

/// See [`TrackingTable::defining_property`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DefiningProperty {
    /// `max_t Σ_y |P(X = y, τ_1 = t) − μ*(y) P(τ_1 = t)| / P(τ_1 < τ_G)`.
    pub law_relative: f64,
    /// Worst `|flux(y) / (μ*(y) Σflux) − 1|` over resolved times.
    pub relative_resolved: f64,
    /// Same over every time with positive flux.
    pub relative_all: f64,
    /// Worst `|flux(y)/μ*(y) − Σflux| / (α·γ)` in `λ^t`-scaled units.
    pub scaled_all: f64,
    pub resolved_times: usize,
}

/// Control increments from which [`TrackingTable::defining_property`]
/// applies the relative form.
pub const RESOLVED_INCREMENT: f64 = 1e-5;

/// Law of `τ_*` on `{τ_* < τ_G}` from the closed form
/// `P(τ_* = t < τ_G) = λ^{t+δ}(m(t−1) − m(t))`.
#[derive(Debug, Clone, Serialize)]
pub struct CsqstDistribution {
    pub lambda: f64,
    pub shift_factor: f64,
    pub control: ControlFunction,
    /// Upper bound on `P(horizon < τ_* < τ_G)`.
    pub tail_bound: f64,
}

impl CsqstDistribution {
    pub fn from_control(table: &SeparationTable, control: &ControlFunction) -> Result<Self> {
        control.check_dominates(table)?;
        let h = control.horizon();
        Ok(CsqstDistribution {
            lambda: table.lambda,
            shift_factor: table.shift.factor,
            control: control.clone(),
            tail_bound: powi(table.lambda, h) * table.shift.factor * control.at(h as isize),
        })
    }

    pub fn horizon(&self) -> usize {
        self.control.horizon()
    }

    pub fn pmf(&self, t: usize) -> f64 {
        powi(self.lambda, t) * self.shift_factor * (self.control.at(t as isize - 1) - self.control.at(t as isize))
    }

    pub fn pmf_series(&self) -> Vec<f64> {
        (0..=self.horizon()).map(|t| self.pmf(t)).collect()
    }

    /// `P(τ_* ≤ t < τ_G) = λ^{t+δ}(1 − m(t))`.
    pub fn cumulative(&self, t: usize) -> f64 {
        powi(self.lambda, t) * self.shift_factor * (1.0 - self.control.at(t as isize))
    }

    /// `Σ_t pmf(t)` over the horizon.
    pub fn total(&self) -> f64 {
        self.pmf_series().iter().sum()
    }

    /// `P(τ_G < τ_*)` estimated as `1 − Σ pmf`; exact up to `tail_bound`.
    pub fn defect(&self) -> f64 {
        1.0 - self.total()
    }
}

/// Minimal CSQST for the initial law of `table`.
pub fn minimal_csqst(table: &SeparationTable) -> CsqstDistribution {
    let control = control_minimal(table);
    CsqstDistribution::from_control(table, &control).expect("minimal control dominates by construction")
}

/// Cumulative inequality `Σ_{u≤t} λ^{t−u} pmf(u) ≤ λ^{t+δ}(1 − s̃(t))` with
/// `pmf` taken from the recursion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CumulativeCheck {
    /// `max_t (cumulative − bound)`; nonpositive when the inequality holds.
    pub max_excess: f64,
    /// `max_t (bound − cumulative)`; zero for the minimal control.
    pub max_gap: f64,
}

pub fn cumulative_check(tracking: &TrackingTable, table: &SeparationTable) -> CumulativeCheck {
    let mut scaled_cum = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_gap: f64 = 0.0;
    for t in 0..=tracking.horizon().min(table.horizon()) {
        scaled_cum += tracking.scaled_tau1_pmf(t);
        let scale = powi(table.lambda, t);
        let diff = scale * (scaled_cum - table.min_ratio(t));
        max_excess = max_excess.max(diff);
        max_gap = max_gap.max(-diff);
    }
    CumulativeCheck { max_excess, max_gap }
}

/// Ephemeral measure `Φ_t = φ_t / Σφ_t`.
pub fn ephemeral(tracking: &TrackingTable, t: usize) -> Result<Distribution> {
    if t > tracking.horizon() {
        return Err(Error::Horizon(format!("t = {t} beyond tracking horizon")));
    }
    let phi = tracking.scaled_phi(t);
    if !(sum(phi) > 0.0) {
        return Err(Error::ZeroMass(t));
    }
    Distribution::normalized(phi.to_vec())
}

/// Residuals of the three semigroup identities of the minimal tracking
/// process at `(t, u)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemigroupReport {
    pub t: usize,
    pub u: usize,
    /// `|P(τ_1^α > t+u) − P(τ_1^α > t) P(τ_1^{Φ_t} > u)|`.
    pub tau1_residual: f64,
    /// `‖Φ_{t+u}^α − Φ_u^{Φ_t}‖∞`, zero when undefined.
    pub ephemeral_residual: f64,
    /// `max_{1≤v≤u, z} |J^α(t+v, z) − J^{Φ_t}(v, z)|`, zero when undefined.
    pub jump_residual: f64,
    /// `Φ_t` (or `Φ_{t+u}`) is undefined because layer 0 is (numerically) empty.
    pub degenerate: bool,
}

impl SemigroupReport {
    pub fn max_residual(&self) -> f64 {
        self.tau1_residual.max(self.ephemeral_residual).max(self.jump_residual)
    }
}

/// Checks `Φ_{t+u}^α = Φ_u^{Φ_t^α}`, `P(τ_1^α>t+u) = P(τ_1^α>t)P(τ_1^{Φ_t}>u)`
/// and `J^α(t+v,·) = J^{Φ_t}(v,·)`, rebuilding every table from `Φ_t`.
///
/// Only the minimal control is used; the identities are not claimed for
/// general controls. `u` must be at least 1: at `u = 0` the restarted
/// process has `J^{Φ_t}(0,·) = 0`, which differs from `J^α(t,·)`.
pub fn verify_semigroup(
    sub: &SubChain,
    triple: &SpectralTriple,
    alpha: &Distribution,
    t: usize,
    u: usize,
) -> Result<SemigroupReport> {
    if u == 0 {
        return Err(Error::InvalidParameter("semigroup check needs u >= 1".into()));
    }
    let table = SeparationTable::new(sub, triple, alpha, t + u)?;
    let control = control_minimal(&table);
    let tracking = tracking_recursion(sub, &table, &control)?;

    let mut report =
        SemigroupReport { t, u, tau1_residual: 0.0, ephemeral_residual: 0.0, jump_residual: 0.0, degenerate: false };

    let alive = |tr: &TrackingTable, s: usize| tr.scaled_tau1_survival(s) > DEGENERATE_MASS * tr.shift_factor;
    if !alive(&tracking, t) {
        report.degenerate = true;
        report.tau1_residual = tracking.tau1_survival(t + u).abs();
        return Ok(report);
    }

    let phi_t = ephemeral(&tracking, t)?;
    let table_phi = SeparationTable::new(sub, triple, &phi_t, u)?;
    let control_phi = control_minimal(&table_phi);
    let tracking_phi = tracking_recursion(sub, &table_phi, &control_phi)?;

    report.tau1_residual =
        (tracking.tau1_survival(t + u) - tracking.tau1_survival(t) * tracking_phi.tau1_survival(u)).abs();

    for v in 1..=u {
        let ja = jump_probabilities(&control, &table, t + v)?;
        let jp = jump_probabilities(&control_phi, &table_phi, v)?;
        report.jump_residual = report.jump_residual.max(max_abs_diff(&ja, &jp));
    }

    if alive(&tracking, t + u) && alive(&tracking_phi, u) {
        let lhs = ephemeral(&tracking, t + u)?;
        let rhs = ephemeral(&tracking_phi, u)?;
        report.ephemeral_residual = max_abs_diff(lhs.weights(), rhs.weights());
    } else {
        report.degenerate = true;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::MarkovChain;
    use crate::spectral::Spectral;

    fn three_state() -> MarkovChain {
        MarkovChain::from_json(
            r#"{"states":["a","b","c","g"],"absorbing":["g"],
               "P":[[0.5,0.3,0.1,0.1],[0.2,0.5,0.3,0.0],[0.1,0.2,0.4,0.3],[0,0,0,1]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn control_validation() {
        assert!(ControlFunction::new(vec![0.9, 0.5]).is_err());
        assert!(ControlFunction::new(vec![1.0, 0.5, 0.7]).is_err());
        assert!(ControlFunction::new(vec![1.0, 0.5, 0.2]).is_ok());
    }

    #[test]
    fn quasi_stationary_start_jumps_immediately() {
        let s = Spectral::analyze(&three_state()).unwrap();
        let table = s.table(&s.triple.mu_star_distribution(), 20).unwrap();
        let m = control_minimal(&table);
        assert_eq!(m.at(-1), 1.0);
        assert!(m.at(0).abs() < 1e-12);
        let j0 = jump_probabilities(&m, &table, 0).unwrap();
        assert!(j0.iter().all(|j| (j - 1.0).abs() < 1e-12));
        let dist = minimal_csqst(&table);
        assert!((dist.pmf(0) - 1.0).abs() < 1e-12);
        assert!(dist.pmf_series()[1..].iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn flat_control_gives_no_jumps() {
        let s = Spectral::analyze(&three_state()).unwrap();
        let table = s.dirac_table(0, 5).unwrap();
        let flat = ControlFunction::new(vec![1.0; 7]).unwrap();
        for t in 0..=5 {
            assert!(jump_probabilities(&flat, &table, t).unwrap().iter().all(|j| *j == 0.0));
        }
    }

    #[test]
    fn non_dominating_control_is_rejected() {
        let s = Spectral::analyze(&three_state()).unwrap();
        let table = s.dirac_table(0, 3).unwrap();
        let low = ControlFunction::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(tracking_recursion(&s.sub, &table, &low).is_err());
    }

    #[test]
    fn recursion_matches_closed_form_and_conserves_mass() {
        let s = Spectral::analyze(&three_state()).unwrap();
        for x in 0..3 {
            let table = s.dirac_table(x, 100).unwrap();
            for control in [control_minimal(&table), control_dominating(&table, 1.0, 0.9).unwrap()] {
                let tr = tracking_recursion(&s.sub, &table, &control).unwrap();
                assert!(tr.closed_form_deviation() < 1e-10);
                assert!(tr.cumulative_conservation_error() < 1e-12);
                let d = tr.defining_property(&s.triple.mu_star, RESOLVED_INCREMENT);
                assert!(d.law_relative < 1e-12 && d.scaled_all < 1e-12, "{d:?}");
                let check = cumulative_check(&tr, &table);
                assert!(check.max_excess < 1e-12);
            }
        }
    }

    #[test]
    fn minimal_control_attains_the_cumulative_bound() {
        let s = Spectral::analyze(&three_state()).unwrap();
        let table = s.table(&Distribution::uniform(3), 60).unwrap();
        let tr = tracking_recursion(&s.sub, &table, &control_minimal(&table)).unwrap();
        assert!(cumulative_check(&tr, &table).max_gap < 1e-12);
        let loose = control_dominating(&table, 1.0, 0.9).unwrap();
        let tr = tracking_recursion(&s.sub, &table, &loose).unwrap();
        assert!(cumulative_check(&tr, &table).max_gap > 1e-3);
    }

    #[test]
    fn ephemeral_at_zero_is_stay_weighted_alpha() {
        let s = Spectral::analyze(&three_state()).unwrap();
        let alpha = Distribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let table = s.table(&alpha, 4).unwrap();
        let control = control_dominating(&table, 1.0, 0.9).unwrap();
        let tr = tracking_recursion(&s.sub, &table, &control).unwrap();
        let j0 = jump_probabilities(&control, &table, 0).unwrap();
        let raw: Vec<f64> = alpha.weights().iter().zip(&j0).map(|(a, j)| a * (1.0 - j)).collect();
        let total: f64 = raw.iter().sum();
        let phi0 = ephemeral(&tr, 0).unwrap();
        for (p, r) in phi0.weights().iter().zip(&raw) {
            assert!((p - r / total).abs() < 1e-14);
        }
    }

    #[test]
    fn semigroup_requires_positive_u() {
        let s = Spectral::analyze(&three_state()).unwrap();
        assert!(verify_semigroup(&s.sub, &s.triple, &Distribution::dirac(3, 0), 2, 0).is_err());
    }

    #[test]
    fn semigroup_identities_hold() {
        let s = Spectral::analyze(&three_state()).unwrap();
        for (t, u) in [(1, 1), (2, 3), (3, 4), (5, 5)] {
            let r = verify_semigroup(&s.sub, &s.triple, &Distribution::dirac(3, 0), t, u).unwrap();
            assert!(r.max_residual() < 1e-10, "{r:?}");
        }
        let r = verify_semigroup(&s.sub, &s.triple, &s.triple.mu_star_distribution(), 2, 2).unwrap();
        assert!(r.degenerate && r.max_residual() < 1e-10);
    }
}
