use std::collections::HashMap;

use madrl::advisors::{AdvisorId, QTable};
use madrl::aggregator::{aggregate, greedy_action, select_action, Recommendation};
use madrl::env::{toy_attractor_mdp, Action, FruitGridState, MazeLayout, PacBoy, GRID_CELLS};
use madrl::harness::ExperimentConfig;
use madrl::mdp::{QFunction, TieRule};
use madrl::approx::Mlp;
use madrl::targets::{decode, ego_target, encode, rl_target, tsp_target};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_state() -> impl Strategy<Value = FruitGridState> {
    (0..GRID_CELLS, proptest::collection::btree_set(0..GRID_CELLS, 0..7))
        .prop_map(|(agent, fruits)| {
            let fruits: Vec<usize> = fruits.into_iter().filter(|&c| c != agent).collect();
            FruitGridState::new(agent, &fruits)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aggregation_is_weighted_sum(qs in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, 4), 1..6),
                                   ws in proptest::collection::vec(0.1..3.0f64, 6)) {
        let recs: Vec<Recommendation> =
            qs.iter().enumerate().map(|(i, q)| Recommendation { advisor: AdvisorId::Custom(i), q: q.clone() }).collect();
        let weights: HashMap<AdvisorId, f64> = (0..qs.len()).map(|i| (AdvisorId::Custom(i), ws[i])).collect();
        let out = aggregate(&recs, &weights, 4).unwrap();
        for a in 0..4 {
            let expect: f64 = qs.iter().zip(&ws).map(|(q, w)| w * q[a]).sum();
            prop_assert!((out[a] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_picks_a_maximum(q in proptest::collection::vec(-3i32..3, 1..8), seed in any::<u64>()) {
        let q: Vec<f64> = q.into_iter().map(f64::from).collect();
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let low = greedy_action(&q, TieRule::LowestIndex, &mut rng);
        prop_assert_eq!(low, q.iter().position(|&v| v == best).unwrap());
        prop_assert_eq!(q[greedy_action(&q, TieRule::UniformRandom, &mut rng)], best);
        prop_assert_eq!(select_action(&q, 0.0, TieRule::LowestIndex, &mut rng), low);
        prop_assert!(select_action(&q, 1.0, TieRule::LowestIndex, &mut rng) < q.len());
    }

    #[test]
    fn target_invariants(s in grid_state(), g in 0.05..0.99f64) {
        let (sum, vec) = ego_target(&s, g);
        prop_assert!((sum - vec.iter().sum::<f64>()).abs() < 1e-12);
        for c in 0..GRID_CELLS {
            if !s.has_fruit(c) {
                prop_assert_eq!(vec[c], 0.0);
            }
        }
        let rl = rl_target(&s, g).unwrap();
        prop_assert!(sum >= rl - 1e-12);
        prop_assert!(rl <= s.fruit_count() as f64 * g + 1e-12);
        let tsp = tsp_target(&s).unwrap();
        prop_assert!(tsp <= 0.0);
        prop_assert!(-tsp >= s.fruit_count() as f64);
        prop_assert_eq!(decode(&encode(&s)), Some(s));
    }

    #[test]
    fn pacboy_rewards_decompose(seed in any::<u64>(), moves in proptest::collection::vec(0usize..4, 1..60)) {
        let env = PacBoy::new(MazeLayout::pacboy_small());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = env.reset(&mut rng);
        let start = state.fruit_count();
        let mut score = 0.0;
        for m in moves {
            if env.is_done(&state) {
                break;
            }
            let out = env.step(&state, Action::ALL[m], &mut rng).unwrap();
            let parts: f64 = out.advisor_rewards.iter().map(|(_, r)| r).sum();
            prop_assert_eq!(parts, out.global_reward);
            prop_assert_eq!(out.global_reward, out.eaten.len() as f64 - 10.0 * out.collisions.len() as f64);
            score += out.global_reward;
            state = out.next_state;
        }
        prop_assert!(score <= start as f64);
    }

    #[test]
    fn toy_detectors_agree(r1 in 0.1..4.0f64, r2 in 0.1..4.0f64, g in 0.01..0.99f64) {
        use madrl::advisors::Projection;
        use madrl::attractor::{candidate_actions, is_attractor, noop_preference_check, EgoAdvisor};
        use madrl::mdp::value_iteration;
        let toy = toy_attractor_mdp(r1, r2, g).unwrap();
        let qs: Vec<QFunction> = toy.advisors.iter().map(|m| value_iteration(m, 1e-13).unwrap()).collect();
        let id = Projection::Identity;
        let adv: Vec<EgoAdvisor> = qs.iter().zip(&toy.advisors)
            .map(|(q, m)| EgoAdvisor { weight: 1.0, q, model: m, projection: &id }).collect();
        let actions = candidate_actions(&toy.global, 0);
        prop_assert_eq!(
            is_attractor(0, &adv, &actions, g).unwrap().is_attractor,
            noop_preference_check(0, &adv, &actions, g).unwrap()
        );
    }

    #[test]
    fn qtable_csv_round_trip(values in proptest::collection::vec(-1e6..1e6f64, 12)) {
        let table = QTable::from_q(QFunction::from_values(4, 3, values));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = QTable::read_csv(&buf[..], 4, 3).unwrap();
        prop_assert_eq!(back.q(), table.q());
    }

    #[test]
    fn config_text_round_trip(gamma in 0.0..0.999f64, alpha in 0.001..1.0f64, eps in 0.0..1.0f64,
                              sigma in 0.0..1.0f64, epochs in 0usize..100, seed in any::<u64>(),
                              method in prop_oneof!["egocentric", "agnostic", "empathic", "linear"]) {
        let mut cfg = ExperimentConfig::desk_preset();
        cfg.gamma = gamma;
        cfg.alpha = alpha;
        cfg.epsilon = eps;
        cfg.noise_sigma = sigma;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.set("method", &method).unwrap();
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn adam_ignores_zero_gradient(seed in any::<u64>(), steps in 1usize..5) {
        let mut m = Mlp::new(&[4, 3, 2], seed);
        let before = m.params().to_vec();
        let zero = vec![0.0; m.param_count()];
        for _ in 0..steps {
            m.adam_step(&zero, &Default::default());
        }
        prop_assert_eq!(m.params(), &before[..]);
        prop_assert!(m.params().iter().all(|p| p.is_finite()));
    }
}
