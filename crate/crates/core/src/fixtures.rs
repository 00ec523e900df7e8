//! Reproducible test chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::ChainSpec;
use crate::rim::{rim_spec, RimParams};

/// Seed of the checked-in `random4.json` fixture.
pub const RANDOM4_SEED: u64 = 2024;

pub fn two_state_spec() -> ChainSpec {
    ChainSpec {
        states: vec!["s0".into(), "s1".into()],
        absorbing: vec!["s1".into()],
        p: vec![vec![0.5, 0.5], vec![0.0, 1.0]],
        alpha: None,
    }
}

/// Random chain on `n_transient` states `x0..` and `n_goal` goal states
/// `g0..`.
///
/// Every transient state has a self-loop and an edge to its successor on a
/// ring, so `[P]_A` is primitive. A few extra edges are added at random.
/// Goal `k` is always reachable from state `k mod n_transient`; other exits
/// appear with probability 1/3 and carry little weight, which keeps the
/// principal eigenvalue away from 0.
pub fn random_spec(seed: u64, n_transient: usize, n_goal: usize) -> ChainSpec {
    assert!(n_transient >= 1 && n_goal >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_transient + n_goal;
    let mut p = vec![vec![0.0; n]; n];
    for x in 0..n_transient {
        let row = &mut p[x];
        row[x] += rng.random_range(0.2..1.0);
        row[(x + 1) % n_transient] += rng.random_range(0.2..1.0);
        for _ in 0..rng.random_range(0..3usize) {
            let y = rng.random_range(0..n_transient);
            row[y] += rng.random_range(0.0..1.0);
        }
        for g in 0..n_goal {
            if g % n_transient == x || rng.random_bool(1.0 / 3.0) {
                row[n_transient + g] += rng.random_range(0.02..0.25);
            }
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    for g in 0..n_goal {
        p[n_transient + g][n_transient + g] = 1.0;
    }
    let mut states: Vec<String> = (0..n_transient).map(|x| format!("x{x}")).collect();
    let absorbing: Vec<String> = (0..n_goal).map(|g| format!("g{g}")).collect();
    states.extend(absorbing.iter().cloned());
    ChainSpec { states, absorbing, p, alpha: None }
}

/// [`random_spec`] with the first transient state sending 0.9 to `g0`.
pub fn fast_exit_spec(seed: u64, n_transient: usize) -> ChainSpec {
    let mut spec = random_spec(seed, n_transient, 1);
    let row = &mut spec.p[0];
    let kept: f64 = row[..n_transient].iter().sum();
    row[..n_transient].iter_mut().for_each(|v| *v *= 0.1 / kept);
    row[n_transient] = 0.9;
    spec
}

pub fn random4_spec() -> ChainSpec {
    random_spec(RANDOM4_SEED, 4, 2)
}

/// Named chains covering the regimes exercised by the test suites: the
/// two-state chain, rims with `n ∈ {1,2}` and `λ ∈ {0.3,0.5,0.9}`, and ten
/// random chains with `|A| ≤ 20`, `|G| ≤ 3`.
pub fn standard_fixtures() -> Vec<(String, ChainSpec)> {
    let mut out = vec![("two_state".to_string(), two_state_spec())];
    for n in [1, 2] {
        for lambda in [0.3, 0.5, 0.9] {
            let params = RimParams::new(n, lambda).expect("valid rim parameters");
            out.push((format!("rim_n{n}_l{lambda}"), rim_spec(&params)));
        }
    }
    let shapes = [(4, 2), (3, 1), (5, 2), (6, 3), (8, 2), (10, 1), (12, 2), (15, 3), (18, 2), (20, 3)];
    for (i, &(a, g)) in shapes.iter().enumerate() {
        out.push((format!("random{}_a{a}_g{g}", i + 1), random_spec(RANDOM4_SEED + i as u64, a, g)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::MarkovChain;

    #[test]
    fn generator_is_deterministic_and_valid() {
        let a = random_spec(5, 7, 2);
        assert_eq!(a.p, random_spec(5, 7, 2).p);
        let c = MarkovChain::from_spec(&a).unwrap();
        assert!(c.restrict().is_ok());
    }

    #[test]
    fn fast_exit_row() {
        let spec = fast_exit_spec(9, 5);
        assert_eq!(spec.p[0][5], 0.9);
        assert!((spec.p[0].iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(MarkovChain::from_spec(&spec).is_ok());
    }

    #[test]
    fn standard_fixtures_load() {
        for (name, spec) in standard_fixtures() {
            let c = MarkovChain::from_spec(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
            c.restrict().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
