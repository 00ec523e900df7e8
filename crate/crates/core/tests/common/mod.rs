#![allow(dead_code)]

use hitlab::chain::AlphaSpec;
use hitlab::fixtures::standard_fixtures;
use hitlab::report::resolve_alpha;
use hitlab::spectral::Spectral;
use hitlab::{Distribution, MarkovChain};

pub struct Fixture {
    pub name: String,
    pub chain: MarkovChain,
    pub spectral: Spectral,
}

impl Fixture {
    /// Each Dirac start on `A`, the uniform law and `μ*`, over all states.
    pub fn laws(&self) -> Vec<(String, Distribution)> {
        let mut specs: Vec<AlphaSpec> = self
            .spectral
            .sub
            .states()
            .iter()
            .map(|&x| AlphaSpec::Dirac(self.chain.label(x).to_string()))
            .collect();
        specs.push(AlphaSpec::Uniform);
        specs.push(AlphaSpec::QuasiStationary);
        specs
            .into_iter()
            .map(|s| (s.describe(), resolve_alpha(&s, &self.chain, &self.spectral).unwrap()))
            .collect()
    }

    pub fn on_transient(&self, alpha: &Distribution) -> Distribution {
        self.spectral.sub.restrict_distribution(alpha).unwrap()
    }
}

pub fn fixtures() -> Vec<Fixture> {
    standard_fixtures()
        .into_iter()
        .map(|(name, spec)| {
            let chain = MarkovChain::from_spec(&spec).unwrap();
            let spectral = Spectral::analyze(&chain).unwrap();
            Fixture { name, chain, spectral }
        })
        .collect()
}

pub fn fixture_file(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
