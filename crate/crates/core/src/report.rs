//! Serializable documents produced by the `hitlab` commands, and their JSON
//! and CSV writers.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::chain::{self, propagate, AlphaSpec, Distribution, MarkovChain};
use crate::csqst::{
    control_minimal, cumulative_check, minimal_csqst, tracking_recursion, verify_semigroup, CsqstDistribution,
    CumulativeCheck, DefiningProperty, TrackingTable, RESOLVED_INCREMENT,
};
use crate::error::{Error, Result};
use crate::hitting::{
    basin, dirac_profiles, exit_decomposition, exponential_bound_check, lower_bound_chain_excess,
    mean_metastability_time, metastability_rate, remainder_vs_tracking, representation_from, Basin, BoundCheck,
    DiracProfiles, ExitDecomposition, MeanMetastability, MetastabilityProfile, RepresentationReport, BOUND_SLACK,
};
use crate::montecarlo::{
    conditional_law_test, proportion_z, sample_base, sample_tracking, ConditionalLawTest, SampleSet,
    SimulationConfig, Z_THRESHOLD,
};
use crate::spectral::{hitting_measure, local_chain, rough_bounds, SeparationTable, Spectral, TimeShift};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Level below which `s̃` and `sup_x P(τ_{*,G}^x > t)` count as vanished.
pub const HORIZON_EPS: f64 = 1e-12;
pub const HORIZON_CAP: usize = 100_000;
pub const BOUND_N_MAX: usize = 10;
pub const SUBMULT_GRID: usize = 50;
pub const SEMIGROUP_PAIRS: [(usize, usize); 4] = [(1, 1), (2, 3), (3, 4), (5, 5)];
/// Survival level defining the default simulation horizon.
pub const SIMULATION_TAIL: f64 = 1e-4;
const HEAD_LEN: usize = 10;

/// One asserted check: passes when `value ≤ threshold`, or as flagged.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value: Some(value), threshold: Some(threshold), pass: value <= threshold }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check { name: name.into(), value: None, threshold: None, pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    pub fn of(checks: &[Check]) -> Self {
        if checks.iter().all(|c| c.pass) {
            Status::Passed
        } else {
            Status::Failed
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub horizon: usize,
    pub tolerance: f64,
    pub slack: f64,
}

impl Provenance {
    fn new(command: &'static str, seed: Option<u64>, horizon: usize, tolerance: f64) -> Self {
        Provenance {
            tool: "hitlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            horizon,
            tolerance,
            slack: BOUND_SLACK,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub states: usize,
    pub transient: Vec<String>,
    pub goal: Vec<String>,
    pub primitivity_exponent: usize,
}

impl ChainSummary {
    pub fn new(chain: &MarkovChain, spectral: &Spectral) -> Self {
        let labels = |idx: &[usize]| idx.iter().map(|&i| chain.label(i).to_string()).collect();
        ChainSummary {
            states: chain.len(),
            transient: labels(spectral.sub.states()),
            goal: labels(spectral.sub.goal_states()),
            primitivity_exponent: spectral.sub.primitivity_exponent(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSection {
    pub lambda: f64,
    /// `T = 1/(1 − λ)`.
    pub relaxation_time: f64,
    pub mu_star: Vec<f64>,
    pub gamma: Vec<f64>,
    pub min_gamma: f64,
    /// Hitting distribution on `G` from `μ*`, in goal order.
    pub omega: Vec<f64>,
    pub left_residual: f64,
    pub right_residual: f64,
    pub normalization_residual: f64,
    pub local_chain_residual: f64,
    pub omega_mass_residual: f64,
    pub iterations: usize,
}

impl SpectralSection {
    pub fn new(spectral: &Spectral) -> Self {
        let triple = &spectral.triple;
        let (left, right) = triple.residuals(&spectral.sub);
        let local = local_chain(&spectral.sub, triple);
        let local_residual = (0..local.len())
            .map(|y| {
                let v: f64 = (0..local.len()).map(|x| local.nu[x] * local.p_tilde[x][y]).sum();
                (v - local.nu[y]).abs()
            })
            .fold(0.0, f64::max);
        let omega = hitting_measure(&spectral.sub, triple).into_weights();
        let norm: f64 = triple.mu_star.iter().zip(&triple.gamma).map(|(m, g)| m * g).sum();
        SpectralSection {
            lambda: triple.lambda,
            relaxation_time: triple.relaxation_time(),
            mu_star: triple.mu_star.clone(),
            gamma: triple.gamma.clone(),
            min_gamma: triple.min_gamma(),
            omega_mass_residual: (omega.iter().sum::<f64>() - 1.0).abs(),
            omega,
            left_residual: left,
            right_residual: right,
            normalization_residual: (norm - 1.0).abs(),
            local_chain_residual: local_residual,
            iterations: triple.iterations,
        }
    }

    fn checks(&self, tol: f64) -> Vec<Check> {
        vec![
            Check::at_most("spectral.left_residual", self.left_residual, tol),
            Check::at_most("spectral.right_residual", self.right_residual, tol),
            Check::at_most("spectral.normalization", self.normalization_residual, tol),
            Check::at_most("spectral.local_chain_stationarity", self.local_chain_residual, tol),
            Check::at_most("spectral.omega_mass", self.omega_mass_residual, tol),
        ]
    }
}

/// Summary of the minimal CSQST law on `{τ_* < τ_G}`.
#[derive(Debug, Clone, Serialize)]
pub struct CsqstSummary {
    /// `P(τ_* < τ_G)` within the horizon.
    pub total: f64,
    /// Mass of `{τ_* ∧ τ_G > horizon}`.
    pub defect: f64,
    /// Certified bound on the mass beyond the horizon.
    pub tail_bound: f64,
    /// First and last times with `pmf > tolerance`.
    pub support: Option<(usize, usize)>,
    /// Set when a single time carries all but `tolerance` of the mass.
    pub deterministic_at: Option<usize>,
    pub pmf_head: Vec<f64>,
    /// `max_t |recursion − closed form|`.
    pub closed_form_deviation: f64,
    pub conservation_error: f64,
    pub defining_property: DefiningProperty,
    pub cumulative: CumulativeCheck,
}

impl CsqstSummary {
    fn new(law: &CsqstDistribution, tracking: &TrackingTable, table: &SeparationTable, mu_star: &[f64], tol: f64) -> Self {
        let pmf = law.pmf_series();
        let above: Vec<usize> = (0..pmf.len()).filter(|&t| pmf[t] > tol).collect();
        let total = law.total();
        CsqstSummary {
            total,
            defect: law.defect(),
            tail_bound: law.tail_bound,
            support: above.first().map(|&a| (a, *above.last().expect("nonempty"))),
            deterministic_at: (0..pmf.len()).find(|&t| (pmf[t] - 1.0).abs() <= tol),
            pmf_head: pmf.iter().take(HEAD_LEN).copied().collect(),
            closed_form_deviation: tracking.closed_form_deviation(),
            conservation_error: tracking.max_conservation_error,
            defining_property: tracking.defining_property(mu_star, RESOLVED_INCREMENT),
            cumulative: cumulative_check(tracking, table),
        }
    }
}

/// Sandwich of `P(τ_G > t)` between the rough separation bounds, and the
/// lower-bound chain on `s̃`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoughBoundSummary {
    /// `max_t max(lower − survival, survival − upper)`.
    pub sandwich_excess: f64,
    /// `max_t [λ^{t+δ}(1 − s̃(t)) − 1]`.
    pub leading_excess: f64,
    pub lower_chain_excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasinSection {
    pub time: usize,
    pub members: Vec<String>,
    pub min_gamma: f64,
    pub gamma_bound_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSection {
    pub alpha: String,
    pub weights: Vec<f64>,
    pub shift: TimeShift,
    pub csqst: CsqstSummary,
    pub representation_max_residual: f64,
    /// `max_t |remainder − tracking-recursion remainder|`.
    pub remainder_cross_check: f64,
    pub rough_bounds: RoughBoundSummary,
    pub metastability: MetastabilityProfile,
    pub bound_check: BoundCheck,
    pub exit: ExitDecomposition,
}

/// Per-time series written to CSV.
#[derive(Debug, Clone)]
pub struct AlphaSeries {
    pub tag: String,
    pub representation: RepresentationReport,
    pub pmf: Vec<f64>,
    pub tau1_survival: Vec<f64>,
    pub absorbed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub status: Status,
    pub chain: ChainSummary,
    pub spectral: SpectralSection,
    pub mean_metastability: MeanMetastability,
    pub basin: BasinSection,
    pub alphas: Vec<AlphaSection>,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub series: Vec<AlphaSeries>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub alphas: Vec<AlphaSpec>,
    pub horizon: Option<usize>,
    pub tolerance: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { alphas: Vec::new(), horizon: None, tolerance: DEFAULT_TOLERANCE }
    }
}

/// Initial law over all states; `μ*` is lifted from `A`.
pub fn resolve_alpha(spec: &AlphaSpec, chain: &MarkovChain, spectral: &Spectral) -> Result<Distribution> {
    match spec {
        AlphaSpec::QuasiStationary => Ok(spectral.sub.lift(&spectral.triple.mu_star_distribution(), chain.len())),
        other => other.resolve(chain),
    }
}

/// Smallest `t` with `s̃(t) < 1e-12` for every law in `alphas` (on `A`) and
/// `sup_x P(τ_{*,G}^x > t) < 1e-12`, capped at [`HORIZON_CAP`].
pub fn default_horizon(spectral: &Spectral, alphas: &[Distribution]) -> Result<usize> {
    let mut h = 64;
    loop {
        let profiles = dirac_profiles(spectral, h)?;
        let tables = alphas.iter().map(|a| spectral.table(a, h)).collect::<Result<Vec<_>>>()?;
        let found = (0..=h).find(|&t| {
            profiles.sup[t] < HORIZON_EPS && tables.iter().all(|tab| tab.sep(t as isize) < HORIZON_EPS)
        });
        if let Some(t) = found {
            return Ok(t.max(1));
        }
        if h >= HORIZON_CAP {
            return Ok(HORIZON_CAP);
        }
        h = (2 * h).min(HORIZON_CAP);
    }
}

/// Chain-level quantities shared by every initial law.
struct ChainContext {
    profiles: DiracProfiles,
    mean: MeanMetastability,
    basin: Basin,
    work_horizon: usize,
}

fn chain_context(spectral: &Spectral, horizon: usize) -> Result<ChainContext> {
    let lambda = spectral.triple.lambda;
    let work_horizon = (horizon + 1).max(BoundCheck::horizon_for(lambda, BOUND_N_MAX)).max(2 * SUBMULT_GRID);
    let profiles = dirac_profiles(spectral, work_horizon)?;
    let mean = mean_metastability_time(&profiles)?;
    let basin = basin(&spectral.sub, &spectral.triple, mean.r + mean.tail_bound);
    Ok(ChainContext { profiles, mean, basin, work_horizon })
}

struct AlphaRun {
    section: AlphaSection,
    series: AlphaSeries,
    table: SeparationTable,
}

fn analyze_alpha(
    chain: &MarkovChain,
    spectral: &Spectral,
    ctx: &ChainContext,
    spec: &AlphaSpec,
    horizon: usize,
    tol: f64,
) -> Result<AlphaRun> {
    let alpha_full = resolve_alpha(spec, chain, spectral)?;
    let alpha = spectral.sub.restrict_distribution(&alpha_full)?;
    let table = spectral.table(&alpha, ctx.work_horizon)?;
    let control = control_minimal(&table);
    let tracking = tracking_recursion(&spectral.sub, &table, &control)?;
    let law = minimal_csqst(&table);

    let survival = chain::survival(chain, &alpha_full, horizon);
    let rep = representation_from(&table, survival.clone())?;
    let remainder_cross_check = remainder_vs_tracking(&table, &tracking)?;

    let mut sandwich_excess = f64::NEG_INFINITY;
    let mut leading_excess = f64::NEG_INFINITY;
    for (t, &s) in survival.iter().enumerate() {
        let b = rough_bounds(&table, &spectral.triple, t)?;
        sandwich_excess = sandwich_excess.max(b.lower - s).max(s - b.upper);
        leading_excess = leading_excess.max(table.leading(t) - 1.0);
    }
    let rough = RoughBoundSummary {
        sandwich_excess,
        leading_excess,
        lower_chain_excess: lower_bound_chain_excess(&table, horizon)?,
    };

    let profile = metastability_rate(ctx.mean.r, spectral.triple.relaxation_time(), spectral.triple.lambda);
    let bound_check = exponential_bound_check(&table, &profile, BOUND_N_MAX)?;
    let exit = exit_decomposition(chain, spectral, &alpha_full, &tracking)?;

    let h = horizon.min(tracking.horizon());
    let series = AlphaSeries {
        tag: spec.describe(),
        representation: rep.clone(),
        pmf: (0..=h).map(|t| tracking.tau1_pmf(t)).collect(),
        tau1_survival: (0..=h).map(|t| tracking.tau1_survival(t)).collect(),
        absorbed: {
            let mut acc = 0.0;
            (0..=h)
                .map(|t| {
                    acc += tracking.absorbed(t).iter().sum::<f64>();
                    acc
                })
                .collect()
        },
    };
    let section = AlphaSection {
        alpha: spec.describe(),
        weights: alpha.weights().to_vec(),
        shift: table.shift,
        csqst: CsqstSummary::new(&law, &tracking, &table, &spectral.triple.mu_star, tol),
        representation_max_residual: rep.max_residual,
        remainder_cross_check,
        rough_bounds: rough,
        metastability: profile,
        bound_check,
        exit,
    };
    Ok(AlphaRun { section, series, table })
}

fn alpha_checks(s: &AlphaSection, tol: f64) -> Vec<Check> {
    let tag = &s.alpha;
    let mut out = vec![
        Check::at_most(format!("representation[{tag}]"), s.representation_max_residual, tol),
        Check::at_most(format!("remainder_cross_check[{tag}]"), s.remainder_cross_check, tol),
        Check::at_most(format!("csqst.closed_form[{tag}]"), s.csqst.closed_form_deviation, tol),
        Check::at_most(format!("csqst.conservation[{tag}]"), s.csqst.conservation_error, tol),
        Check::at_most(format!("csqst.defining_property[{tag}]"), s.csqst.defining_property.law_relative, tol),
        Check::at_most(format!("csqst.cumulative[{tag}]"), s.csqst.cumulative.max_excess, BOUND_SLACK),
        Check::at_most(format!("rough_bounds.sandwich[{tag}]"), s.rough_bounds.sandwich_excess, BOUND_SLACK),
        Check::at_most(format!("rough_bounds.leading[{tag}]"), s.rough_bounds.leading_excess, BOUND_SLACK),
        Check::at_most(format!("rough_bounds.lower_chain[{tag}]"), s.rough_bounds.lower_chain_excess, BOUND_SLACK),
        Check::at_most(format!("exit_decomposition[{tag}]"), s.exit.max_residual, tol),
    ];
    if !s.bound_check.skipped {
        out.push(Check::flag(format!("exponential_bound[{tag}]"), s.bound_check.holds()));
    }
    out
}

fn basin_section(chain: &MarkovChain, spectral: &Spectral, b: &Basin) -> BasinSection {
    BasinSection {
        time: b.time,
        members: b.members.iter().map(|&x| chain.label(spectral.sub.states()[x]).to_string()).collect(),
        min_gamma: b.min_gamma,
        gamma_bound_holds: b.gamma_bound_holds,
    }
}

fn chain_checks(spectral_section: &SpectralSection, ctx: &ChainContext, tol: f64) -> Result<Vec<Check>> {
    let mut checks = spectral_section.checks(tol);
    checks.push(Check::at_most("mean_metastability.tail_bound", ctx.mean.tail_bound, tol));
    checks.push(Check::at_most(
        "submultiplicativity",
        ctx.profiles.submultiplicativity_excess(SUBMULT_GRID)?,
        BOUND_SLACK,
    ));
    if !ctx.basin.members.is_empty() {
        checks.push(Check::flag("basin.gamma_bound", ctx.basin.gamma_bound_holds));
    }
    Ok(checks)
}

/// Runs the full exact analysis of `chain` for the requested initial laws
/// (uniform on `A` when none is given).
pub fn analyze(chain: &MarkovChain, options: &AnalysisOptions) -> Result<Analysis> {
    let spectral = Spectral::analyze(chain)?;
    let tol = options.tolerance;
    let specs = if options.alphas.is_empty() { vec![AlphaSpec::Uniform] } else { options.alphas.clone() };
    let horizon = match options.horizon {
        Some(h) => h,
        None => {
            let laws = specs
                .iter()
                .map(|s| spectral.sub.restrict_distribution(&resolve_alpha(s, chain, &spectral)?))
                .collect::<Result<Vec<_>>>()?;
            default_horizon(&spectral, &laws)?
        }
    };
    let ctx = chain_context(&spectral, horizon)?;
    let spectral_section = SpectralSection::new(&spectral);
    let mut checks = chain_checks(&spectral_section, &ctx, tol)?;

    let mut alphas = Vec::new();
    let mut series = Vec::new();
    for spec in &specs {
        let run = analyze_alpha(chain, &spectral, &ctx, spec, horizon, tol)?;
        checks.extend(alpha_checks(&run.section, tol));
        alphas.push(run.section);
        series.push(run.series);
    }

    let report = AnalysisReport {
        status: Status::of(&checks),
        chain: ChainSummary::new(chain, &spectral),
        spectral: spectral_section,
        mean_metastability: ctx.mean,
        basin: basin_section(chain, &spectral, &ctx.basin),
        alphas,
        checks,
        provenance: Provenance::new("analyze", None, horizon, tol),
    };
    Ok(Analysis { report, series })
}

/// One empirical-versus-exact comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub t: Option<usize>,
    pub empirical: f64,
    pub exact: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub status: Status,
    pub alpha: String,
    pub trajectories: usize,
    pub horizon: usize,
    pub censored_fraction: f64,
    pub tracking_censored_fraction: f64,
    pub stopped_fraction: f64,
    pub comparisons: Vec<Comparison>,
    pub conditional_law: ConditionalLawTest,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub report: SimulationReport,
    /// Trajectories of the chain itself.
    pub base: SampleSet,
    /// Trajectories of the tracking process.
    pub tracked: SampleSet,
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub alpha: Option<AlphaSpec>,
    pub seed: u64,
    pub trajectories: usize,
    pub horizon: Option<usize>,
}

/// Smallest `t` with `P(τ_G > t) < SIMULATION_TAIL`, capped at [`HORIZON_CAP`].
pub fn simulation_horizon(chain: &MarkovChain, alpha: &Distribution) -> usize {
    let mut mu = alpha.weights().to_vec();
    let transient = chain.transient();
    for t in 0..HORIZON_CAP {
        let alive: f64 = transient.iter().map(|&x| mu[x]).sum();
        if alive < SIMULATION_TAIL {
            return t.max(1);
        }
        mu = chain.step(&mu);
    }
    HORIZON_CAP
}

fn comparison_times(horizon: usize, t_relax: f64) -> Vec<usize> {
    let mut times: Vec<usize> = (1..=5).collect();
    times.extend((1..=5).map(|k| (k as f64 * t_relax).ceil() as usize));
    times.retain(|&t| t <= horizon);
    times.sort_unstable();
    times.dedup();
    times
}

/// Simulates the chain and the minimal tracking process and compares
/// empirical survival, exit law, `τ_1` law and the law of `X_{τ_1}` with
/// their exact values.
pub fn simulate(chain: &MarkovChain, options: &SimulationOptions) -> Result<SimulationRun> {
    let spectral = Spectral::analyze(chain)?;
    let spec = options.alpha.clone().unwrap_or(AlphaSpec::Uniform);
    let alpha_full = resolve_alpha(&spec, chain, &spectral)?;
    let alpha = spectral.sub.restrict_distribution(&alpha_full)?;
    let horizon = options.horizon.unwrap_or_else(|| simulation_horizon(chain, &alpha_full));
    let n = options.trajectories;

    let config = SimulationConfig::new(options.seed, n, horizon);
    let base = sample_base(chain, &alpha_full, &config)?;
    let table = spectral.table(&alpha, horizon)?;
    let control = control_minimal(&table);
    let tracking = tracking_recursion(&spectral.sub, &table, &control)?;
    let tracking_config = SimulationConfig::new(options.seed.wrapping_add(1), n, horizon);
    let tracked = sample_tracking(chain, &spectral.sub, &table, &control, &tracking_config)?;

    let mut comparisons = Vec::new();
    let exact_survival = chain::survival(chain, &alpha_full, horizon);
    for t in comparison_times(horizon, spectral.triple.relaxation_time()) {
        let empirical = base.survival(t);
        comparisons.push(Comparison {
            quantity: "survival".into(),
            t: Some(t),
            empirical,
            exact: exact_survival[t],
            z: proportion_z(empirical, exact_survival[t], n),
        });
    }
    let at_horizon = propagate(chain, &alpha_full, horizon);
    for &g in spectral.sub.goal_states() {
        let count = base.records.iter().filter(|r| r.exit_state == Some(g)).count();
        let empirical = count as f64 / n as f64;
        let exact = at_horizon.weights()[g];
        comparisons.push(Comparison {
            quantity: format!("exit:{}", chain.label(g)),
            t: Some(horizon),
            empirical,
            exact,
            z: proportion_z(empirical, exact, n),
        });
    }
    for t in 0..=horizon.min(HEAD_LEN) {
        let empirical = tracked.stopped_pmf(t);
        let exact = tracking.tau1_pmf(t);
        comparisons.push(Comparison {
            quantity: "tau1_pmf".into(),
            t: Some(t),
            empirical,
            exact,
            z: proportion_z(empirical, exact, n),
        });
    }
    let conditional_law = conditional_law_test(&tracked, &spectral.sub, &spectral.triple.mu_star)?;

    let mut checks: Vec<Check> = comparisons
        .iter()
        .map(|c| {
            let name = match c.t {
                Some(t) => format!("{}[t={t}]", c.quantity),
                None => c.quantity.clone(),
            };
            Check::at_most(name, c.z.abs(), Z_THRESHOLD)
        })
        .collect();
    checks.push(Check::flag("conditional_law", conditional_law.pass));

    let report = SimulationReport {
        status: Status::of(&checks),
        alpha: spec.describe(),
        trajectories: n,
        horizon,
        censored_fraction: base.censored_fraction(),
        tracking_censored_fraction: tracked.censored_fraction(),
        stopped_fraction: tracked.stopped_count() as f64 / n as f64,
        comparisons,
        conditional_law,
        checks,
        provenance: Provenance::new("simulate", Some(options.seed), horizon, Z_THRESHOLD),
    };
    Ok(SimulationRun { report, base, tracked })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub status: Status,
    pub chain: ChainSummary,
    pub alphas: Vec<String>,
    pub checks: Vec<Check>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub horizon: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Trajectories of the Monte Carlo conditional-law check; 0 skips it.
    pub trajectories: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { horizon: 200, tolerance: DEFAULT_TOLERANCE, seed: 0, trajectories: 100_000 }
    }
}

/// Every exact invariant for each Dirac start, the uniform law and `μ*`,
/// plus a Monte Carlo conditional-law test from the uniform law.
pub fn verify(chain: &MarkovChain, options: &VerifyOptions) -> Result<VerifyReport> {
    let spectral = Spectral::analyze(chain)?;
    let tol = options.tolerance;
    let horizon = options.horizon.max(1);
    let ctx = chain_context(&spectral, horizon)?;
    let spectral_section = SpectralSection::new(&spectral);
    let mut checks = chain_checks(&spectral_section, &ctx, tol)?;

    let mut specs: Vec<AlphaSpec> =
        spectral.sub.states().iter().map(|&x| AlphaSpec::Dirac(chain.label(x).to_string())).collect();
    specs.push(AlphaSpec::Uniform);
    specs.push(AlphaSpec::QuasiStationary);

    for spec in &specs {
        let run = analyze_alpha(chain, &spectral, &ctx, spec, horizon, tol)?;
        checks.extend(alpha_checks(&run.section, tol));
        let alpha = Distribution::normalized(run.table.alpha.clone())?;
        let mut worst = 0.0f64;
        for (t, u) in SEMIGROUP_PAIRS {
            worst = worst.max(verify_semigroup(&spectral.sub, &spectral.triple, &alpha, t, u)?.max_residual());
        }
        checks.push(Check::at_most(format!("semigroup[{}]", spec.describe()), worst, tol));
    }
    for &x in &ctx.basin.members {
        let factor = spectral.triple.gamma[x];
        checks.push(Check::at_most(
            format!("basin.alpha_gamma[{}]", chain.label(spectral.sub.states()[x])),
            0.25 - factor,
            0.0,
        ));
    }

    if options.trajectories > 0 {
        let uniform = Distribution::uniform(spectral.sub.len());
        let sim_horizon = simulation_horizon(chain, &spectral.sub.lift(&uniform, chain.len()));
        let table = spectral.table(&uniform, sim_horizon)?;
        let control = control_minimal(&table);
        let config = SimulationConfig::new(options.seed, options.trajectories, sim_horizon);
        let tracked = sample_tracking(chain, &spectral.sub, &table, &control, &config)?;
        let test = conditional_law_test(&tracked, &spectral.sub, &spectral.triple.mu_star)?;
        checks.push(Check::at_most("montecarlo.conditional_law.max_abs_z", test.max_abs_z, Z_THRESHOLD));
        checks.push(Check::at_most("montecarlo.conditional_law.tv", test.tv, test.tv_threshold));
    }

    Ok(VerifyReport {
        status: Status::of(&checks),
        chain: ChainSummary::new(chain, &spectral),
        alphas: specs.iter().map(|s| s.describe()).collect(),
        checks,
        provenance: Provenance::new("verify", Some(options.seed), horizon, tol),
    })
}

/// JSON formatter writing every float with 17 significant digits and
/// non-finite values as `null`.
struct Sig17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, Sig17(serde_json::ser::PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// CSV number with 12 significant digits.
pub fn csv_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        String::new()
    }
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `alpha<i>_representation.csv` and `alpha<i>_csqst.csv` for every
/// initial law of `analysis` into `dir`.
pub fn write_analysis_csv(analysis: &Analysis, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (i, s) in analysis.series.iter().enumerate() {
        let rep = &s.representation;
        let path = dir.join(format!("alpha{i}_representation.csv"));
        write_csv(
            &path,
            "t,survival,leading,remainder,residual",
            (0..rep.survival.len()).map(|t| {
                let mut row = vec![t.to_string()];
                row.extend(
                    [rep.survival[t], rep.leading[t], rep.remainder[t], rep.residual[t]].map(csv_number),
                );
                row
            }),
        )?;
        written.push(path);
        let path = dir.join(format!("alpha{i}_csqst.csv"));
        write_csv(
            &path,
            "t,pmf,survival,absorbed",
            (0..s.pmf.len()).map(|t| {
                let mut row = vec![t.to_string()];
                row.extend([s.pmf[t], s.tau1_survival[t], s.absorbed[t]].map(csv_number));
                row
            }),
        )?;
        written.push(path);
    }
    Ok(written)
}

/// One row per trajectory; empty cells for events that did not happen.
pub fn write_samples_csv(samples: &SampleSet, chain: &MarkovChain, path: &Path) -> Result<()> {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let label = |v: Option<usize>| v.map(|x| chain.label(x).to_string()).unwrap_or_default();
    write_csv(
        path,
        "trajectory,absorbed_at,exit_state,stopped_at,stopped_state,censored",
        samples.records.iter().enumerate().map(|(i, r)| {
            vec![
                i.to_string(),
                opt(r.absorbed_at),
                label(r.exit_state),
                opt(r.stopped_at),
                label(r.stopped_state),
                r.censored.to_string(),
            ]
        }),
    )
}

pub fn parse_back(json: &str) -> Result<serde_json::Value> {
    serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random4_spec, two_state_spec};

    #[test]
    fn json_uses_17_digits() {
        let s = to_json(&vec![0.5, 1.0 / 3.0, f64::INFINITY]).unwrap();
        assert!(s.contains("5.0000000000000000e-1"));
        assert!(s.contains("3.3333333333333331e-1"));
        assert!(s.contains("null"));
        let v = parse_back(&s).unwrap();
        assert_eq!(v[1].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn csv_uses_12_digits() {
        assert_eq!(csv_number(0.125), "1.25000000000e-1");
    }

    #[test]
    fn two_state_analysis_passes() {
        let chain = MarkovChain::from_spec(&two_state_spec()).unwrap();
        let opts = AnalysisOptions { alphas: vec![AlphaSpec::Dirac("s0".into())], ..Default::default() };
        let a = analyze(&chain, &opts).unwrap();
        assert_eq!(a.report.status, Status::Passed, "{:?}", a.report.checks);
        assert!((a.report.spectral.lambda - 0.5).abs() < 1e-15);
        assert!(a.report.alphas[0].representation_max_residual <= 1e-10);
    }

    #[test]
    fn random4_default_horizon_and_status() {
        let chain = MarkovChain::from_spec(&random4_spec()).unwrap();
        let a = analyze(&chain, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.report.status, Status::Passed, "{:?}", a.report.checks);
        let h = a.report.provenance.horizon;
        assert!(h > 1 && h < HORIZON_CAP);
    }
}
