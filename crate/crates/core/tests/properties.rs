use hitlab::chain::{propagate, survival, absorption_profile, Distribution, MarkovChain};
use hitlab::csqst::{control_dominating, control_minimal, cumulative_check, tracking_recursion, CsqstDistribution};
use hitlab::fixtures::random_spec;
use hitlab::hitting::{dirac_profiles, lower_bound_chain_excess, metastability_rate, representation};
use hitlab::rim::{rim_spec, RimParams};
use hitlab::spectral::{local_chain, Spectral};
use proptest::prelude::*;

#[derive(Debug)]
struct Case {
    chain: MarkovChain,
    spectral: Spectral,
    alpha: Distribution,
}

fn case(seed: u64, n_transient: usize, n_goal: usize, raw: &[f64]) -> Case {
    let chain = MarkovChain::from_spec(&random_spec(seed, n_transient, n_goal)).unwrap();
    let spectral = Spectral::analyze(&chain).unwrap();
    let w: Vec<f64> = (0..n_transient).map(|i| raw[i % raw.len()]).collect();
    let alpha = Distribution::normalized(w).unwrap();
    Case { chain, spectral, alpha }
}

fn cases() -> impl Strategy<Value = Case> {
    (any::<u64>(), 1usize..=8, 1usize..=3, prop::collection::vec(0.01f64..1.0, 1..8))
        .prop_map(|(seed, a, g, raw)| case(seed, a, g, &raw))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagation_is_a_semigroup(c in cases(), t in 0usize..20, u in 0usize..20) {
        let full = c.spectral.sub.lift(&c.alpha, c.chain.len());
        let once = propagate(&c.chain, &full, t + u);
        let twice = propagate(&c.chain, &propagate(&c.chain, &full, t), u);
        for (a, b) in once.weights().iter().zip(twice.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!((once.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn survival_is_a_nonincreasing_probability(c in cases()) {
        let full = c.spectral.sub.lift(&c.alpha, c.chain.len());
        let s = survival(&c.chain, &full, 100);
        prop_assert!(s.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        prop_assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn absorption_profile_is_the_limit_law(c in cases()) {
        let full = c.spectral.sub.lift(&c.alpha, c.chain.len());
        let exit = absorption_profile(&c.chain, &full).unwrap().into_weights();
        let t = 400;
        let mu = propagate(&c.chain, &full, t);
        let bound = c.spectral.triple.lambda.powi(t as i32) * c.spectral.sub.len() as f64 + 1e-12;
        for (j, &g) in c.chain.goal().iter().enumerate() {
            prop_assert!((exit[j] - mu.weights()[g]).abs() <= bound);
        }
    }

    #[test]
    fn spectral_triple_invariants(c in cases()) {
        let tr = &c.spectral.triple;
        let (left, right) = tr.residuals(&c.spectral.sub);
        prop_assert!(left <= 1e-10 && right <= 1e-10);
        prop_assert!(tr.lambda > 0.0 && tr.lambda < 1.0);
        prop_assert!((tr.mu_star.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let norm: f64 = tr.mu_star.iter().zip(&tr.gamma).map(|(m, g)| m * g).sum();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
        prop_assert!(tr.mu_star.iter().chain(&tr.gamma).all(|&v| v > 0.0));
    }

    #[test]
    fn local_chain_invariants(c in cases()) {
        let tr = &c.spectral.triple;
        let local = local_chain(&c.spectral.sub, tr);
        let m = c.spectral.sub.matrix();
        let n = local.len();
        for x in 0..n {
            prop_assert!((local.p_tilde[x].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!((local.nu[x] - tr.mu_star[x] * tr.gamma[x]).abs() <= 1e-15);
            for y in 0..n {
                let expected = tr.gamma[y] * m[(x, y)] / (tr.gamma[x] * tr.lambda);
                prop_assert!((local.p_tilde[x][y] - expected).abs() <= 1e-12);
            }
        }
        for y in 0..n {
            let v: f64 = (0..n).map(|x| local.nu[x] * local.p_tilde[x][y]).sum();
            prop_assert!((v - local.nu[y]).abs() <= 1e-10);
        }
        for t in [1usize, 2, 5] {
            let pt = local.power(t);
            let mt = m.pow(t as u32);
            for x in 0..n {
                for y in 0..n {
                    let expected = tr.gamma[y] * mt[(x, y)] / (tr.gamma[x] * tr.lambda.powi(t as i32));
                    prop_assert!((pt[x][y] - expected).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn separation_invariants(c in cases()) {
        let table = c.spectral.table(&c.alpha, 200).unwrap();
        let tr = &c.spectral.triple;
        let full = c.spectral.sub.lift(&c.alpha, c.chain.len());
        for t in 0..=200usize {
            let s = table.sep(t as isize);
            let drift = 1e-13 * (t + 1) as f64;
            prop_assert!((-drift..=1.0).contains(&s), "s({t}) = {s}");
            prop_assert!(s <= table.sep(t as isize - 1) + 1e-12);
            prop_assert!(table.leading(t) <= 1.0 + 1e-12);
            let pointwise = table.sep_pointwise(t);
            for (y, &sy) in pointwise.iter().enumerate() {
                let direct = 1.0 - table.w(t)[y] / (table.shift.factor * tr.mu_star[y]);
                prop_assert!((sy - direct).abs() <= 1e-15);
            }
            prop_assert!((table.min_ratio(t) - table.shift.factor * (1.0 - s)).abs() <= 1e-12 * table.shift.factor);
            if t <= 30 {
                let mu = propagate(&c.chain, &full, t);
                let scale = tr.lambda.powi(t as i32);
                for (i, &x) in c.spectral.sub.states().iter().enumerate() {
                    prop_assert!((mu.weights()[x] / scale - table.w(t)[i]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn minimal_tracking_invariants(c in cases()) {
        let table = c.spectral.table(&c.alpha, 150).unwrap();
        let control = control_minimal(&table);
        prop_assert_eq!(control.at(-1), 1.0);
        prop_assert!(control.series().windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let tracking = tracking_recursion(&c.spectral.sub, &table, &control).unwrap();

        let j0 = hitlab::csqst::jump_probabilities(&control, &table, 0).unwrap();
        for (x, &a) in table.alpha.iter().enumerate() {
            prop_assert!((tracking.phi(0)[x] - a * (1.0 - j0[x])).abs() <= 1e-15);
        }
        let mut acc = 0.0;
        for t in 0..=150 {
            let pmf = tracking.tau1_pmf(t);
            prop_assert!(pmf >= 0.0);
            acc += pmf + tracking.absorbed(t).iter().sum::<f64>();
            prop_assert!((tracking.tau1_survival(t) + acc - 1.0).abs() <= 1e-12);
        }
        let cum = cumulative_check(&tracking, &table);
        prop_assert!(cum.max_excess <= 1e-12 && cum.max_gap <= 1e-12);
        prop_assert!(tracking.closed_form_deviation() <= 1e-10);
    }

    #[test]
    fn dominating_controls_satisfy_the_inequality(c in cases(), k in 0.0f64..=1.0, rho in 0.5f64..=1.0) {
        let table = c.spectral.table(&c.alpha, 100).unwrap();
        let control = control_dominating(&table, k, rho).unwrap();
        control.check_dominates(&table).unwrap();
        let tracking = tracking_recursion(&c.spectral.sub, &table, &control).unwrap();
        let cum = cumulative_check(&tracking, &table);
        prop_assert!(cum.max_excess <= 1e-12);
        let law = CsqstDistribution::from_control(&table, &control).unwrap();
        for t in 0..=100 {
            prop_assert!((tracking.tau1_pmf(t) - law.pmf(t)).abs() <= 1e-10);
            prop_assert!(law.pmf(t) >= 0.0, "pmf({t}) = {}", law.pmf(t));
        }
    }

    #[test]
    fn representation_terms(c in cases()) {
        let full = c.spectral.sub.lift(&c.alpha, c.chain.len());
        let rep = representation(&c.chain, &c.spectral, &full, 200).unwrap();
        prop_assert!(rep.max_residual <= 1e-10);
        for t in 0..=200 {
            for v in [rep.survival[t], rep.leading[t], rep.remainder[t]] {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
        let table = c.spectral.table(&c.alpha, 4000).unwrap();
        let excess = lower_bound_chain_excess(&table, 30).unwrap();
        prop_assert!(excess <= 1e-12, "excess {excess}, lambda {}", c.spectral.triple.lambda);
    }

    #[test]
    fn submultiplicative_on_a_small_grid(c in cases()) {
        let profiles = dirac_profiles(&c.spectral, 40).unwrap();
        prop_assert!(profiles.submultiplicativity_excess(20).unwrap() <= 1e-12);
    }

    #[test]
    fn metastability_profile_invariants(r in 0.0f64..100.0, lambda in 0.01f64..0.999) {
        let t = 1.0 / (1.0 - lambda);
        let p = metastability_rate(r, t, lambda);
        prop_assert!(p.t > 1.0);
        prop_assert_eq!(p.hypothesis, p.ratio < 1.0);
        prop_assert_eq!(p.rate_a.is_finite(), p.ratio > 0.0 && p.ratio.is_finite());
    }

    #[test]
    fn rim_rates_are_probabilities(n in 1u32..=3, lambda in 1e-6f64..(1.0 - 1e-6)) {
        let spec = rim_spec(&RimParams::new(n, lambda).unwrap());
        for row in &spec.p {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_distributions_sum_to_one(w in prop::collection::vec(0.0f64..10.0, 1..30)) {
        prop_assume!(w.iter().sum::<f64>() > 0.0);
        let d = Distribution::normalized(w).unwrap();
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(d.weights().iter().all(|&p| p >= 0.0));
    }
}
