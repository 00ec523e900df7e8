use hitlab::chain::{survival, Distribution};
use hitlab::hitting::metastability_survival;
use hitlab::montecarlo::{conditional_law_test, SimulationConfig, Z_THRESHOLD};
use hitlab::rim::{build_rim, class, halting_sets, rim_halting_csqst, rim_projected, rim_spec, rim_spectral_oracle, RimParams};
use hitlab::spectral::{local_chain, Spectral};
use hitlab::MarkovChain;

const PARAMS: [(u32, f64); 6] = [(1, 0.3), (1, 0.5), (1, 0.9), (2, 0.3), (2, 0.5), (2, 0.9)];

fn params(n: u32, lambda: f64) -> RimParams {
    RimParams::new(n, lambda).unwrap()
}

#[test]
fn rows_are_invariant_under_rotation_by_four() {
    let p = params(2, 0.5);
    let c = build_rim(&p).unwrap();
    let m = p.modulus();
    assert_eq!(c.len(), 17);
    for x in 0..m {
        for y in 0..=m {
            let (rx, ry) = ((x + 4) % m, if y == m { m } else { (y + 4) % m });
            assert_eq!(c.prob(x, y), c.prob(rx, ry), "({x}, {y})");
        }
    }
}

#[test]
fn oracle_is_normalized() {
    for (n, l) in PARAMS {
        let o = rim_spectral_oracle(&params(n, l));
        let sum: f64 = o.mu_star.iter().sum();
        let dot: f64 = o.mu_star.iter().zip(&o.gamma).map(|(m, g)| m * g).sum();
        assert!((sum - 1.0).abs() <= 1e-14 && (dot - 1.0).abs() <= 1e-14, "n={n} λ={l}");
    }
}

#[test]
fn oracle_vectors_are_eigenvectors() {
    let p = params(2, 0.3);
    let c = build_rim(&p).unwrap();
    let o = rim_spectral_oracle(&p);
    let m = p.modulus();
    for y in 0..m {
        let left: f64 = (0..m).map(|x| o.mu_star[x] * c.prob(x, y)).sum();
        assert!((left - 0.3 * o.mu_star[y]).abs() <= 1e-12);
    }
    for x in 0..m {
        let right: f64 = (0..m).map(|y| c.prob(x, y) * o.gamma[y]).sum();
        assert!((right - 0.3 * o.gamma[x]).abs() <= 1e-12);
    }
}

#[test]
fn principal_eigenvalue_is_the_parameter() {
    for (n, l) in PARAMS {
        let s = Spectral::analyze(&build_rim(&params(n, l)).unwrap()).unwrap();
        assert!((s.triple.lambda - l).abs() <= 1e-10, "n={n} λ={l}");
    }
}

#[test]
fn local_chain_is_a_lazy_walk() {
    for (n, l) in PARAMS {
        let p = params(n, l);
        let s = Spectral::analyze(&build_rim(&p).unwrap()).unwrap();
        let local = local_chain(&s.sub, &s.triple);
        let m = p.modulus();
        for x in 0..m {
            for y in 0..m {
                let expected = if y == x {
                    0.5
                } else if y == (x + 1) % m || y == (x + m - 1) % m {
                    0.25
                } else {
                    0.0
                };
                assert!((local.p_tilde[x][y] - expected).abs() <= 1e-10, "n={n} λ={l} ({x},{y})");
            }
        }
    }
}

#[test]
fn one_step_from_uniform_on_odd_states_is_quasi_stationary() {
    for (n, l) in PARAMS {
        let p = params(n, l);
        let c = build_rim(&p).unwrap();
        let m = p.modulus();
        let odd: Vec<f64> = (0..=m).map(|x| if x < m && class(x) == 1 { 2.0 / m as f64 } else { 0.0 }).collect();
        let next = c.step(&odd);
        let o = rim_spectral_oracle(&p);
        assert_eq!(next[m], 0.0);
        for x in 0..m {
            assert!((next[x] - o.mu_star[x]).abs() <= 1e-14, "n={n} λ={l} x={x}");
        }
    }
}

#[test]
fn projected_rows_and_class_one_survival() {
    let proj = rim_projected(0.5).unwrap();
    let row0 = [0.25, 0.0441176, 0.0, 0.7058824];
    for (y, &v) in row0.iter().enumerate() {
        assert!((proj.prob(0, y) - v).abs() < 5e-8);
    }
    for l in [0.3, 0.5, 0.9] {
        let proj = rim_projected(l).unwrap();
        let s = survival(&proj, &Distribution::dirac(4, 1), 100);
        for (t, &p) in s.iter().enumerate().skip(1) {
            assert!((p - l.powi(t as i32 - 1)).abs() <= 1e-12, "λ={l} t={t}");
        }
    }
}

#[test]
fn projected_quasi_stationary_law_is_the_class_sum() {
    for (n, l) in PARAMS {
        let p = params(n, l);
        let o = rim_spectral_oracle(&p);
        let proj = Spectral::analyze(&rim_projected(l).unwrap()).unwrap();
        let mut sums = [0.0; 3];
        for (x, &m) in o.mu_star.iter().enumerate() {
            sums[class(x)] += m;
        }
        assert!((proj.triple.lambda - l).abs() <= 1e-10);
        for k in 0..3 {
            assert!((proj.triple.mu_star[k] - sums[k]).abs() <= 1e-12, "n={n} λ={l} class {k}");
        }
    }
}

#[test]
fn projected_survival_uses_matrix_powers() {
    let proj = rim_projected(0.5).unwrap();
    let s = survival(&proj, &Distribution::dirac(4, 0), 2);
    assert!((s[2] - 0.1176471).abs() < 5e-8);
    let two_steps: f64 = (0..3)
        .flat_map(|y| (0..3).map(move |z| (y, z)))
        .map(|(y, z)| proj.prob(0, y) * proj.prob(y, z))
        .sum();
    assert!((s[2] - two_steps).abs() <= 1e-15);
}

#[test]
fn halting_sets_double_and_end_on_odd_states() {
    for n in 1..=4 {
        let p = params(n, 0.5);
        let m = p.modulus();
        for s0 in [0, 4 % m, m - 4] {
            let h = halting_sets(&p, s0).unwrap();
            assert_eq!(h.levels(), 2 * n as usize);
            for k in 0..h.levels() {
                assert_eq!(h.sets[k].len(), 1 << k);
            }
            for k in 1..h.levels() {
                for (&y, &g) in h.sets[k].iter().zip(&h.parents[k]) {
                    let d = (y + m - g) % m;
                    assert!(d == h.step(k) || m - d == h.step(k));
                    assert!(h.sets[k - 1].contains(&g));
                }
            }
            let last = h.sets.last().unwrap();
            assert_eq!(*last, (0..m).filter(|&y| class(y) == 1).collect::<Vec<_>>());
            assert_eq!(h.opposite, (s0 + m / 2) % m);
        }
    }
}

#[test]
fn halting_from_a_non_spoke_state_resolves_its_origin() {
    let p = params(2, 0.9);
    let c = build_rim(&p).unwrap();
    let s = Spectral::analyze(&c).unwrap();
    let sample = rim_halting_csqst(&p, 5, &SimulationConfig::new(21, 200_000, 100_000)).unwrap();
    let test = conditional_law_test(&sample.samples, &s.sub, &s.triple.mu_star).unwrap();
    assert!(test.pass, "{test:?}");
}

/// The hitting-sequence time never beats the minimal one in the sense of
/// `E[τ ∧ τ_G]`.
#[test]
fn halting_time_is_not_minimal() {
    let p = params(2, 0.5);
    let c: MarkovChain = build_rim(&p).unwrap();
    let s = Spectral::analyze(&c).unwrap();
    let table = s.dirac_table(0, 2000).unwrap();
    let minimal: f64 = metastability_survival(&table).unwrap().iter().sum();

    let n = 100_000;
    let sample = rim_halting_csqst(&p, 0, &SimulationConfig::new(5, n, 100_000)).unwrap();
    let ends: Vec<f64> = sample
        .samples
        .records
        .iter()
        .map(|r| r.stopped_at.or(r.absorbed_at).unwrap() as f64)
        .collect();
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(mean + Z_THRESHOLD * se >= minimal, "{mean} ± {se} vs {minimal}");
    assert!(mean > minimal, "{mean} vs {minimal}");
}

#[test]
fn emitted_spec_round_trips() {
    let spec = rim_spec(&params(1, 0.5));
    let again = hitlab::ChainSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(spec, again);
}
