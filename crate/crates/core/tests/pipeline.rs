mod common;

use common::fixture_file;
use hitlab::chain::{propagate, AlphaSpec, Distribution};
use hitlab::csqst::control_minimal;
use hitlab::fixtures::{random4_spec, two_state_spec};
use hitlab::montecarlo::{binomial_z, sample_base, sample_tracking, SimulationConfig};
use hitlab::report::{analyze, parse_back, simulate, to_json, verify, write_analysis_csv, AnalysisOptions, SimulationOptions, Status, VerifyOptions};
use hitlab::rim::{rim_spec, RimParams};
use hitlab::spectral::Spectral;
use hitlab::{ChainSpec, MarkovChain};

fn load(name: &str) -> MarkovChain {
    MarkovChain::from_file(fixture_file(name)).unwrap().0
}

#[test]
fn fixture_files_match_their_generators() {
    let rim = |n| rim_spec(&RimParams::new(n, 0.5).unwrap());
    for (name, spec) in [
        ("two_state.json", two_state_spec()),
        ("random4.json", random4_spec()),
        ("rim_n1.json", rim(1)),
        ("rim_n2.json", rim(2)),
    ] {
        let text = std::fs::read_to_string(fixture_file(name)).unwrap();
        assert_eq!(text, spec.to_json().unwrap() + "\n", "{name}");
        assert_eq!(ChainSpec::from_json(&text).unwrap(), spec, "{name}");
    }
}

#[test]
fn tracking_marginals_match_exact_propagation() {
    let chain = load("random4.json");
    let s = Spectral::analyze(&chain).unwrap();
    let alpha = Distribution::dirac(4, 3);
    let table = s.table(&alpha, 400).unwrap();
    let control = control_minimal(&table);
    let probe = vec![1, 2, 5, 10, 20];
    let n = 200_000;
    let config = SimulationConfig::new(17, n, 400).with_probe(probe.clone());
    let samples = sample_tracking(&chain, &s.sub, &table, &control, &config).unwrap();
    let full = s.sub.lift(&alpha, chain.len());
    for (k, &t) in probe.iter().enumerate() {
        let exact = propagate(&chain, &full, t);
        let counts = samples.probe_counts(k, chain.len());
        assert_eq!(counts.iter().sum::<u64>(), n as u64);
        for (x, &c) in counts.iter().enumerate() {
            let z = binomial_z(c, n as u64, exact.weights()[x]);
            assert!(z.abs() <= 4.0, "t={t} x={x} z={z}");
        }
    }
}

#[test]
fn samples_do_not_depend_on_block_size() {
    let chain = load("random4.json");
    let alpha = AlphaSpec::Uniform.resolve(&chain).unwrap();
    let mut config = SimulationConfig::new(3, 10_000, 2000).with_probe(vec![4]);
    let reference = sample_base(&chain, &alpha, &config).unwrap();
    for block in [1, 7, 1000, 20_000] {
        config.block = block;
        let again = sample_base(&chain, &alpha, &config).unwrap();
        assert_eq!(again.records, reference.records, "block {block}");
    }
}

#[test]
fn uniform_on_odd_rim_states_stops_at_one() {
    let chain = load("rim_n1.json");
    let options = AnalysisOptions {
        alphas: vec![AlphaSpec::parse_flag("uniform-set:1,3").unwrap()],
        horizon: Some(200),
        ..Default::default()
    };
    let analysis = analyze(&chain, &options).unwrap();
    let a = &analysis.report.alphas[0];
    assert!((a.shift.delta + 1.0).abs() <= 1e-12);
    assert_eq!(a.csqst.deterministic_at, Some(1));
    assert_eq!(analysis.report.status, Status::Passed);
}

#[test]
fn two_state_dirac_report() {
    let chain = load("two_state.json");
    let options = AnalysisOptions { alphas: vec![AlphaSpec::parse_flag("dirac:s0").unwrap()], ..Default::default() };
    let analysis = analyze(&chain, &options).unwrap();
    assert!((analysis.report.spectral.lambda - 0.5).abs() <= 1e-15);
    assert!(analysis.report.alphas[0].representation_max_residual <= 1e-10);
    assert_eq!(analysis.report.status, Status::Passed);
}

#[test]
fn random4_report_passes_and_serializes() {
    let analysis = analyze(&load("random4.json"), &AnalysisOptions::default()).unwrap();
    assert_eq!(analysis.report.status, Status::Passed);
    let json = to_json(&analysis.report).unwrap();
    assert_eq!(json, to_json(&analysis.report).unwrap());
    let value = parse_back(&json).unwrap();
    assert_eq!(value["status"], "PASSED");
    assert_eq!(value["alphas"][0]["alpha"], "uniform");

    let dir = tempdir();
    let files = write_analysis_csv(&analysis, &dir).unwrap();
    assert_eq!(files.len(), 2);
    let rep = std::fs::read_to_string(&files[0]).unwrap();
    assert!(rep.starts_with("t,survival,leading,remainder,residual\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn two_state_simulation_matches_geometric_survival() {
    let chain = load("two_state.json");
    let options = SimulationOptions { alpha: None, seed: 42, trajectories: 100_000, horizon: None };
    let run = simulate(&chain, &options).unwrap();
    let c = run
        .report
        .comparisons
        .iter()
        .find(|c| c.quantity == "survival" && c.t == Some(3))
        .unwrap();
    assert_eq!(c.exact, 0.125);
    assert!(c.z.abs() <= 3.0, "{c:?}");
    let failed: Vec<_> = run.report.checks.iter().filter(|c| !c.pass).collect();
    assert_eq!(run.report.status, Status::Passed, "{failed:?} {:?}", run.report.conditional_law);

    let again = simulate(&chain, &options).unwrap();
    assert_eq!(to_json(&run.report).unwrap(), to_json(&again.report).unwrap());
}

#[test]
fn verify_passes_on_fixtures() {
    let options = VerifyOptions { trajectories: 20_000, ..Default::default() };
    for name in ["two_state.json", "random4.json", "rim_n2.json"] {
        let report = verify(&load(name), &options).unwrap();
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        assert_eq!(report.status, Status::Passed, "{name}: {failed:?}");
    }
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hitlab-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
