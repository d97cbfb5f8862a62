use std::collections::BTreeSet;
use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, Discrete};

use lclt_lab::combinatorics::{
    connected_graph_sum, connected_graph_sum_by_definition, pair_index, ursell_hardcore, ursell_hardcore_by_definition,
};
use lclt_lab::exact::ExactEngine;
use lclt_lab::model::*;
use lclt_lab::montecarlo::{sample_sums, ChainSpec};
use lclt_lab::polymer::*;
use lclt_lab::verifier::*;

fn spins_strategy() -> impl Strategy<Value = SpinInterval> {
    (-2i64..=1, 1i64..=3).prop_map(|(lo, width)| SpinInterval::new(lo, lo + width).unwrap())
}

fn chain_model(spins: SpinInterval, strength: f64, radius: i64, r0: i64, boundary: i64) -> GibbsModel {
    let boundary = if spins.contains(boundary) {
        BoundaryCondition::Constant(boundary)
    } else {
        BoundaryCondition::Zero
    };
    GibbsModel::new(
        LatticeBox::new(1, radius, r0).unwrap(),
        spins,
        Coupling::NearestNeighbor { strength },
        boundary,
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pmf_is_normalized_and_matches_char_fn(
        spins in spins_strategy(),
        strength in -0.4f64..0.4,
        radius in 1i64..=3,
        boundary in -2i64..=2,
        t in -PI..PI,
    ) {
        let model = chain_model(spins, strength, radius, 1, boundary);
        let sys = model.local_system(Region::Full, &Omega::boundary()).unwrap();
        let engine = ExactEngine::default();
        let pmf = engine.pmf(&sys).unwrap();
        prop_assert!((pmf.total() - 1.0).abs() < 1e-12);
        let direct = engine.char_fn(&sys, t).unwrap();
        prop_assert!((pmf.char_fn(t) - direct).norm() < 1e-12);
        prop_assert!(direct.norm() <= 1.0 + 1e-12);
        let st = engine.statistics(&sys).unwrap();
        let n = sys.len() as f64;
        let (lo, hi) = (spins.values()[0] as f64, *spins.values().last().unwrap() as f64);
        prop_assert!(st.mean_s >= lo * n - 1e-9 && st.mean_s <= hi * n + 1e-9);
        prop_assert!(st.variance_s >= 0.0);
    }

    #[test]
    fn free_two_valued_spins_are_binomial(n in 1usize..=12, field in -1.0f64..1.0) {
        let sys = LocalSystem::free(SpinInterval::new(0, 1).unwrap(), vec![field; n]);
        let pmf = ExactEngine::default().pmf(&sys).unwrap();
        let p = field.exp() / (1.0 + field.exp());
        let law = Binomial::new(p, n as u64).unwrap();
        for &(k, q) in &pmf.probabilities {
            prop_assert!((q - law.pmf(k as u64)).abs() < 1e-13);
        }
    }

    #[test]
    fn partition_function_is_even_in_the_coupling(
        strength in -0.4f64..0.4,
        radius in 1i64..=3,
    ) {
        // s_x ↦ (−1)^x s_x maps J to −J on a chain with zero exterior
        let engine = ExactEngine::default();
        let spins = SpinInterval::new(-1, 1).unwrap();
        let a = chain_model(spins, strength, radius, 1, 0).local_system(Region::Full, &Omega::boundary()).unwrap();
        let b = chain_model(spins, -strength, radius, 1, 0).local_system(Region::Full, &Omega::boundary()).unwrap();
        let za = engine.partition_function(&a).unwrap();
        let zb = engine.partition_function(&b).unwrap();
        prop_assert!((za - zb).abs() <= 1e-12 * za);
    }

    #[test]
    fn connected_graph_sum_matches_definition(
        k in 1usize..=5,
        raw in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let mut f = vec![0.0; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                f[i * k + j] = raw[pair_index(k, i, j)];
                f[j * k + i] = f[i * k + j];
            }
        }
        let fast = connected_graph_sum(k, &f);
        let slow = connected_graph_sum_by_definition(k, &f).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
    }

    #[test]
    fn ursell_coefficient_matches_definition(
        sets in prop::collection::vec(prop::collection::btree_set(0u8..5, 1..3), 1..=5),
    ) {
        let fast = ursell_hardcore(&sets).unwrap();
        let slow = ursell_hardcore_by_definition(&sets).unwrap();
        prop_assert_eq!(fast, slow);
        let copies: Vec<BTreeSet<u8>> = vec![BTreeSet::from([0]); sets.len()];
        let k = sets.len();
        let factorial: f64 = (1..k).map(|i| i as f64).product();
        prop_assert_eq!(ursell_hardcore(&copies).unwrap().abs(), factorial);
    }

    #[test]
    fn polymer_gas_reproduces_the_partition_function(seed in any::<u64>(), t in 0.0f64..PI) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng).unwrap();
        let r = identity_check(&s.system, t, &s.label).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn single_spin_bound_holds_with_proved_constant(
        spins in spins_strategy(),
        strength in -0.3f64..0.3,
        radius in 2i64..=5,
        r0 in 1i64..=2,
    ) {
        let model = chain_model(spins, strength, radius, r0, 0);
        let delta = constants(&model, CVariant::Proved).delta;
        let opts = LemmaOptions { omega_samples: 4, ..LemmaOptions::default() };
        let r = check_single_spin_cf(&model, &prop1_grid(delta, 32), CVariant::Proved, &opts).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn activities_vanish_for_decoupled_pairs(
        spins in spins_strategy(),
        fields in prop::collection::vec(-0.5f64..0.5, 2),
        t in 0.0f64..0.1,
    ) {
        let sys = LocalSystem::free(spins, fields);
        let pair = Polymer::new([0, 1]).unwrap();
        let xi = activity(&sys, &ActivityParams::full(t), &pair).unwrap();
        prop_assert!(xi.norm() < 1e-15);
    }

    #[test]
    fn model_spec_round_trips(
        lo in -2i64..=0,
        width in 1i64..=3,
        strength in -1.0f64..1.0,
        radius in 1i64..=4,
    ) {
        let spec = ModelSpec {
            dimension: 1,
            radius,
            spin: SpinSpec { lo, hi: lo + width, step: 1 },
            coupling: CouplingSpec {
                kind: CouplingKind::NearestNeighbor,
                strength: Some(strength),
                exponent: None,
                pairs: None,
            },
            boundary: BoundarySpec { kind: BoundaryKind::Zero, value: None, assignments: None },
            r0: 1,
            truncation_radius: None,
        };
        let back = ModelSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(&back, &spec);
        let full = |m: GibbsModel| m.local_system(Region::Full, &Omega::boundary()).unwrap();
        prop_assert_eq!(full(back.build().unwrap()), full(spec.build().unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chains_are_reproducible_and_stay_in_range(seed in any::<u64>(), spins in spins_strategy()) {
        let model = chain_model(spins, 0.2, 2, 1, 0);
        let sys = model.local_system(Region::Full, &Omega::boundary()).unwrap();
        let spec = ChainSpec { seed, burn_in: 10, samples: 200, thinning: 1, chains: 2 };
        let a = sample_sums(&sys, &spec).unwrap();
        prop_assert_eq!(&a, &sample_sums(&sys, &spec).unwrap());
        let n = sys.len() as i64;
        let (lo, hi) = (spins.values()[0], *spins.values().last().unwrap());
        prop_assert!(a.iter().flatten().all(|&s| s >= lo * n && s <= hi * n));
    }
}
