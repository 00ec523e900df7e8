//! Browser bindings. Every export returns a JSON string, or an error
//! message that surfaces as a thrown exception on the JavaScript side.

use hitlab::chain::AlphaSpec;
use hitlab::montecarlo::{conditional_law_test, SimulationConfig};
use hitlab::report::{analyze, AnalysisOptions};
use hitlab::rim::{build_rim, rim_halting_csqst, rim_spec, RimParams};
use hitlab::spectral::Spectral;
use hitlab::{ChainSpec, MarkovChain};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_HORIZON: usize = 5000;
const MAX_TRAJECTORIES: usize = 1_000_000;

fn text(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn decomposition(chain: &MarkovChain, alpha: AlphaSpec, horizon: usize) -> Result<Value, String> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(format!("horizon must be in 1..={MAX_HORIZON}"));
    }
    let mut options = AnalysisOptions { alphas: vec![alpha], ..Default::default() };
    let mut analysis = analyze(chain, &options).map_err(text)?;
    if analysis.series[0].pmf.len() <= horizon {
        options.horizon = Some(horizon);
        analysis = analyze(chain, &options).map_err(text)?;
    }
    let report = &analysis.report;
    let section = &report.alphas[0];
    let series = &analysis.series[0];
    let shown = |v: &[f64]| v[..=horizon].to_vec();
    Ok(json!({
        "status": report.status,
        "alpha": section.alpha,
        "lambda": report.spectral.lambda,
        "relaxation_time": report.spectral.relaxation_time,
        "delta": section.shift.delta,
        "shift_factor": section.shift.factor,
        "mean_metastability": section.metastability.r,
        "rate_a": section.metastability.rate_a,
        "hypothesis": section.metastability.hypothesis,
        "csqst_total": section.csqst.total,
        "residual": section.representation_max_residual,
        "survival": shown(&series.representation.survival),
        "leading": shown(&series.representation.leading),
        "remainder": shown(&series.representation.remainder),
        "pmf": shown(&series.pmf),
        "transient": report.chain.transient,
        "mu_star": report.spectral.mu_star,
    }))
}

/// Survival split into leading term and remainder for a chain-spec document.
/// The analysis runs to its automatic horizon; `horizon` only limits the
/// returned series.
#[wasm_bindgen]
pub fn chain_decomposition(spec_json: &str, alpha: &str, horizon: usize) -> Result<String, String> {
    let spec = ChainSpec::from_json(spec_json).map_err(text)?;
    let chain = MarkovChain::from_spec(&spec).map_err(text)?;
    let alpha = AlphaSpec::parse_flag(alpha).map_err(text)?;
    decomposition(&chain, alpha, horizon).map(|v| v.to_string())
}

/// The same decomposition for the ring model.
#[wasm_bindgen]
pub fn rim_decomposition(n: u32, lambda: f64, alpha: &str, horizon: usize) -> Result<String, String> {
    let params = RimParams::new(n, lambda).map_err(text)?;
    let chain = build_rim(&params).map_err(text)?;
    let alpha = AlphaSpec::parse_flag(alpha).map_err(text)?;
    decomposition(&chain, alpha, horizon).map(|v| v.to_string())
}

/// Chain-spec document of the ring model.
#[wasm_bindgen]
pub fn rim_chain(n: u32, lambda: f64) -> Result<String, String> {
    let params = RimParams::new(n, lambda).map_err(text)?;
    rim_spec(&params).to_json().map_err(text)
}

/// Empirical law of the state at the hitting-sequence stopping time,
/// against `μ*`, from ring state `start`.
#[wasm_bindgen]
pub fn rim_halting_law(n: u32, lambda: f64, start: usize, trajectories: usize, seed: u32) -> Result<String, String> {
    if trajectories == 0 || trajectories > MAX_TRAJECTORIES {
        return Err(format!("trajectories must be in 1..={MAX_TRAJECTORIES}"));
    }
    let params = RimParams::new(n, lambda).map_err(text)?;
    let chain = build_rim(&params).map_err(text)?;
    let spectral = Spectral::analyze(&chain).map_err(text)?;
    let config = SimulationConfig::new(seed as u64, trajectories, 100_000);
    let sample = rim_halting_csqst(&params, start, &config).map_err(text)?;
    let mut counts = vec![0u64; params.modulus()];
    for r in &sample.samples.records {
        if let Some(x) = r.stopped_state {
            counts[x] += 1;
        }
    }
    let stopped: u64 = counts.iter().sum();
    let test = if stopped > 0 {
        Some(conditional_law_test(&sample.samples, &spectral.sub, &spectral.triple.mu_star).map_err(text)?)
    } else {
        None
    };
    let mean_stop = if stopped > 0 {
        let total: usize = sample.samples.records.iter().filter_map(|r| r.stopped_at).sum();
        total as f64 / stopped as f64
    } else {
        f64::NAN
    };
    Ok(json!({
        "trajectories": trajectories,
        "stopped": stopped,
        "mean_stopping_time": mean_stop,
        "counts": counts,
        "mu_star": spectral.triple.mu_star,
        "test": test,
    })
    .to_string())
}
