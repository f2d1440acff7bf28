use proptest::prelude::*;
use rtrl_core::agents::{polyak_update, ReplayMemory, ReplayRecord};
use rtrl_core::algebra::{contains, StateTransformation};
use rtrl_core::augment::{lift_to_turn_states, rtmdp, tbmdp, RtmdpConfig};
use rtrl_core::mdp::{compose_rtmrp, compose_tbmrp, mrp_equal};
use rtrl_core::nn::policy::policy_sample;
use rtrl_core::nn::{Architecture, Layout, Matrix, Network, NetworkSpec, ParameterVector, PopArt};
use rtrl_core::rng::seeded;
use rtrl_core::suites::finite_instance;
use rtrl_core::values::{verify_lemma1, verify_lemma2};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn real_time_reward_process_matches_turn_based(seed in 0u64..1_000_000) {
        let (env, pi, _) = finite_instance(seed);
        let a = compose_rtmrp(&env, &pi, 0).unwrap();
        let b = compose_tbmrp(&rtmdp(&env, &RtmdpConfig::default()), &pi.over_augmented_states()).unwrap();
        let cmp = mrp_equal(&a, &b, 1e-12, None).unwrap();
        prop_assert!(cmp.equal, "{}", cmp.max_discrepancy);
    }

    #[test]
    fn turn_based_process_is_contained(seed in 0u64..1_000_000) {
        let (env, _, pi) = finite_instance(seed);
        let psi = compose_rtmrp(&tbmdp(&env), &lift_to_turn_states(&pi), 0).unwrap();
        let omega = compose_tbmrp(&env, &pi).unwrap();
        let f = StateTransformation::drop_turn_and_action(env.n_states(), env.n_actions());
        prop_assert!(contains(&psi, &omega, 2, &f, 1e-12).unwrap().contained);
    }

    #[test]
    fn value_identities_hold_for_any_discount(seed in 0u64..1_000_000, gamma in 0.0f64..0.99) {
        let (env, pi, _) = finite_instance(seed);
        prop_assert!(verify_lemma1(&env, &pi, gamma).unwrap() <= 1e-10);
        prop_assert!(verify_lemma2(&env, &pi, gamma).unwrap() <= 1e-10);
    }

    #[test]
    fn squashed_actions_stay_in_the_box(
        mean in prop::collection::vec(-50.0f64..50.0, 1..4),
        log_std in -40.0f64..10.0,
        noise in -8.0f64..8.0,
    ) {
        let d = mean.len();
        let s = policy_sample(&mean, &vec![log_std; d], &vec![noise; d]);
        prop_assert!(s.action.iter().all(|a| a.abs() < 1.0));
        prop_assert!(s.log_density.is_finite());
    }

    #[test]
    fn normalization_update_preserves_outputs(
        seed in any::<u64>(),
        targets in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 1..8), 1..20),
        separate in any::<bool>(),
    ) {
        let arch = if separate { Architecture::Separate } else { Architecture::Merged };
        let net = Network::new(NetworkSpec { input_dim: 3, action_dim: 1, hidden: vec![6], architecture: arch });
        let mut rng = seeded(seed);
        let mut theta = net.init(&mut rng);
        let heads = net.value_heads();
        let probes = Matrix::from_vec(5, 3, (0..15).map(|i| (i as f64 * 0.37).sin()).collect());
        let mut pa = PopArt::new(0.1);
        for batch in &targets {
            let before = net.forward(&theta, &probes, &pa).unwrap().denormalized;
            pa.update(batch, &heads, &mut [&mut theta.values]);
            let after = net.forward(&theta, &probes, &pa).unwrap().denormalized;
            for (b, a) in before.data.iter().zip(&after.data) {
                prop_assert!((b - a).abs() <= 1e-8 * (1.0 + b.abs()), "{} vs {}", b, a);
            }
        }
    }

    #[test]
    fn polyak_moves_target_toward_online(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..12),
        tau in 0.0f64..=1.0,
    ) {
        let layout = Layout::from_shapes(&[(1, pairs.len())]);
        let (t, o): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut target = ParameterVector::from_values(layout.clone(), t.clone()).unwrap();
        let online = ParameterVector::from_values(layout, o.clone()).unwrap();
        polyak_update(&mut target, &online, tau).unwrap();
        for i in 0..t.len() {
            let expected = (1.0 - tau) * t[i] + tau * o[i];
            prop_assert!((target.values[i] - expected).abs() <= 1e-14);
        }
    }

    #[test]
    fn replay_keeps_the_most_recent_records(capacity in 1usize..20, pushes in 0usize..60) {
        let mut memory = ReplayMemory::new(capacity, 1, 1);
        for i in 0..pushes {
            let x = i as f64;
            memory.push(ReplayRecord { state: vec![x], action: vec![x], reward: x, next_state: vec![x], terminal: false });
        }
        prop_assert_eq!(memory.len(), pushes.min(capacity));
        let mut rewards: Vec<f64> = (0..memory.len()).map(|i| memory.get(i).reward).collect();
        rewards.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (pushes.saturating_sub(capacity)..pushes).map(|i| i as f64).collect();
        prop_assert_eq!(rewards, expected);
    }
}
