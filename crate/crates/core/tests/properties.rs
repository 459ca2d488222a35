use proptest::prelude::*;
use tta_bandit_core::dueling::{combine_predictions, preference_rewards};
use tta_bandit_core::environment::{collaborative_adapt, Collaboration, DuelFeedback};
use tta_bandit_core::feedback::{make_preference, preference_to_rewards, span_f1};
use tta_bandit_core::metrics::mab_regret;
use tta_bandit_core::{
    AdaptRule, ArmId, DuelLedger, ExperimentConfig, MabLedger, PairId, PolicyKind, Span, SyntheticModel,
};

fn rel_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn span() -> impl Strategy<Value = Span> {
    (0usize..60, 0usize..60).prop_map(|(a, b)| Span::ordered(a, b))
}

fn mab_updates() -> impl Strategy<Value = (usize, Vec<(usize, Vec<u8>)>)> {
    (1usize..6).prop_flat_map(|k| {
        let update = (0..k, prop::collection::vec(0u8..=1, 1..20));
        (Just(k), prop::collection::vec(update, 0..60))
    })
}

fn duel_updates() -> impl Strategy<Value = (usize, Vec<(usize, usize, Vec<u8>)>)> {
    (2usize..6).prop_flat_map(|k| {
        // each instance: 0 = tie, 1 = i wins, 2 = j wins
        let update = (0..k, 0..k, prop::collection::vec(0u8..3, 1..20));
        (Just(k), prop::collection::vec(update, 0..60))
    })
}

fn split(outcomes: &[u8]) -> (Vec<u8>, Vec<u8>) {
    outcomes.iter().map(|&o| (u8::from(o == 1), u8::from(o == 2))).unzip()
}

proptest! {
    #[test]
    fn mab_ledger_matches_replay((k, updates) in mab_updates()) {
        let mut ledger = MabLedger::new(k).unwrap();
        let mut hits = vec![0u64; k];
        let mut pulls = vec![0u64; k];
        for (arm, batch) in &updates {
            ledger.update_binary(ArmId(*arm), batch).unwrap();
            hits[*arm] += batch.iter().map(|&r| u64::from(r)).sum::<u64>();
            pulls[*arm] += batch.len() as u64;
        }
        prop_assert_eq!(ledger.total_count(), pulls.iter().sum::<u64>());
        for a in 0..k {
            prop_assert_eq!(ledger.pull_count(ArmId(a)), pulls[a]);
            let want = if pulls[a] == 0 { 0.0 } else { hits[a] as f64 / pulls[a] as f64 };
            prop_assert!(rel_close(ledger.mean_reward(ArmId(a)), want));
        }
    }

    #[test]
    fn selection_ignores_a_common_shift(
        means in prop::collection::vec(0.0f64..0.5, 1..8),
        counts in prop::collection::vec(1u64..1000, 8),
        shift in 0.0f64..0.5,
    ) {
        let counts = counts[..means.len()].to_vec();
        let base = MabLedger::from_state(means.clone(), counts.clone()).unwrap();
        let shifted = MabLedger::from_state(means.iter().map(|m| m + shift).collect(), counts).unwrap();
        let a = base.select_arm();
        let b = shifted.select_arm();
        // shifting can only reorder indices that were within rounding of each other
        let (ia, ib) = (base.ucb_index(a).unwrap(), base.ucb_index(b).unwrap());
        prop_assert!(a == b || (ia - ib).abs() < 1e-12);
    }

    #[test]
    fn first_k_pulls_explore_every_arm(k in 1usize..20, rewards in prop::collection::vec(0u8..=1, 20)) {
        let mut ledger = MabLedger::new(k).unwrap();
        for &r in &rewards[..k] {
            let arm = ledger.select_arm();
            ledger.update_binary(arm, &[r]).unwrap();
        }
        prop_assert!(ledger.pull_counts().iter().all(|&n| n == 1));
    }

    #[test]
    fn duel_ledger_bookkeeping((k, updates) in duel_updates()) {
        let mut ledger = DuelLedger::new(k).unwrap();
        let mut hits = vec![0u64; k];
        let mut seen = vec![0u64; k];
        let mut pairs = vec![vec![0u64; k]; k];
        for (a, b, outcomes) in &updates {
            if a == b {
                continue;
            }
            let (i, j) = (*a.min(b), *a.max(b));
            let (ri, rj) = split(outcomes);
            ledger.update_pair(PairId::new(ArmId(i), ArmId(j)).unwrap(), &ri, &rj).unwrap();
            hits[i] += ri.iter().map(|&r| u64::from(r)).sum::<u64>();
            hits[j] += rj.iter().map(|&r| u64::from(r)).sum::<u64>();
            seen[i] += outcomes.len() as u64;
            seen[j] += outcomes.len() as u64;
            pairs[i][j] += outcomes.len() as u64;
            pairs[j][i] += outcomes.len() as u64;
        }
        let mut upper = 0;
        for a in 0..k {
            prop_assert_eq!(ledger.pair_count(ArmId(a), ArmId(a)), 0);
            for b in 0..k {
                prop_assert_eq!(ledger.pair_count(ArmId(a), ArmId(b)), pairs[a][b]);
                prop_assert_eq!(ledger.pair_count(ArmId(a), ArmId(b)), ledger.pair_count(ArmId(b), ArmId(a)));
                if a < b {
                    upper += pairs[a][b];
                }
            }
            prop_assert_eq!(ledger.row_count(ArmId(a)), seen[a]);
            let want = if seen[a] == 0 { 0.0 } else { hits[a] as f64 / seen[a] as f64 };
            prop_assert!(rel_close(ledger.mean_duel_reward(ArmId(a)), want));
        }
        prop_assert_eq!(ledger.total_count(), upper);
        // the ledger is fully determined by counts and reward sums
        let rebuilt = DuelLedger::from_state(pairs, hits).unwrap();
        for a in 0..k {
            prop_assert!(rel_close(rebuilt.mean_duel_reward(ArmId(a)), ledger.mean_duel_reward(ArmId(a))));
        }
    }

    #[test]
    fn mirrored_duels_mirror_the_means(outcomes in prop::collection::vec(0u8..3, 1..40)) {
        // arm 0 winning against 1 must look exactly like arm 1 winning against 0
        let (r0, r1) = split(&outcomes);
        let pair = PairId::new(ArmId(0), ArmId(1)).unwrap();
        let mut a = DuelLedger::new(3).unwrap();
        let mut b = DuelLedger::new(3).unwrap();
        a.update_pair(pair, &r0, &r1).unwrap();
        b.update_pair(pair, &r1, &r0).unwrap();
        prop_assert_eq!(a.mean_duel_reward(ArmId(0)), b.mean_duel_reward(ArmId(1)));
        prop_assert_eq!(a.mean_duel_reward(ArmId(1)), b.mean_duel_reward(ArmId(0)));
        prop_assert_eq!(a.total_count(), b.total_count());
    }

    #[test]
    fn f1_is_symmetric_and_bounded(p in span(), g in span()) {
        let f = span_f1(&p, &g);
        prop_assert_eq!(f, span_f1(&g, &p));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f == 1.0, p == g);
    }

    #[test]
    fn preference_rewards_are_one_hot_and_compose(a in 0.0f64..1.0, b in 0.0f64..1.0, p in span(), q in span()) {
        let (ra, rb) = preference_rewards(a, b);
        prop_assert_eq!((ra, rb), preference_to_rewards(make_preference(a, b)));
        prop_assert!(ra + rb <= 1);
        prop_assert_eq!(ra + rb == 0, a == b);
        let combined = combine_predictions(p, q, ra, rb).unwrap();
        prop_assert_eq!(combined.is_some(), ra + rb == 1);
        if ra == 1 {
            prop_assert_eq!(combined, Some(p));
        }
        if rb == 1 {
            prop_assert_eq!(combined, Some(q));
        }
    }

    #[test]
    fn gold_labels_never_lower_skill(
        skill in 0.0f64..=1.0,
        gain in 0.001f64..0.5,
        batch in 1usize..64,
        frac in 0.0f64..=1.0,
    ) {
        let k = (frac * batch as f64) as usize;
        let mut m = SyntheticModel::new(skill, gain, 3, 0.5).unwrap();
        m.adapt(k, batch).unwrap();
        prop_assert!(m.skill() >= skill && m.skill() <= 1.0);
        let mut w = SyntheticModel::new(skill, gain, 3, 0.5).unwrap();
        w.adapt_with_teacher(0, k, batch).unwrap();
        prop_assert!(w.skill() <= skill && w.skill() >= 0.0);
    }

    #[test]
    fn ties_never_move_skills(skills in (0.0f64..=1.0, 0.0f64..=1.0), n in 1usize..32, joint in any::<bool>()) {
        let mut a = SyntheticModel::new(skills.0, 0.1, 3, 0.5).unwrap();
        let mut b = SyntheticModel::new(skills.1, 0.1, 3, 0.5).unwrap();
        let zeros = vec![0u8; n];
        let gold = vec![true; n];
        let mode = if joint { Collaboration::Joint } else { Collaboration::OwnWinsOnly };
        let fb = DuelFeedback { rewards_i: &zeros, rewards_j: &zeros, teacher_is_gold: &gold };
        collaborative_adapt(&mut a, &mut b, fb, mode, AdaptRule::TeacherAware).unwrap();
        prop_assert_eq!((a.skill(), b.skill()), skills);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn run_regret_is_nonnegative_and_additive(seed in any::<u64>(), dueling in any::<bool>(), noise in 0.0f64..0.8) {
        let mut c = ExperimentConfig {
            policy: if dueling { PolicyKind::CoUcb } else { PolicyKind::Ucb },
            ..ExperimentConfig::default()
        };
        c.profile.seed = seed;
        c.profile.stream_length = 1_600;
        c.noise.noise_rate = noise;
        c.preference_samples = 2_000;
        c.probe_every = 0;
        let run = tta_bandit_core::run_experiment(&c).unwrap();
        prop_assert!(run.steps.iter().all(|s| s.static_regret >= 0.0));
        prop_assert!(run.steps.iter().all(|s| s.dynamic_regret.unwrap() >= 0.0));
        if !dueling {
            let rows = run.static_expectations();
            let total = mab_regret(&run.steps, &rows).unwrap();
            let cut = run.steps.len() / 3;
            let head = mab_regret(&run.steps[..cut], &rows[..cut]).unwrap();
            let tail = mab_regret(&run.steps[cut..], &rows[cut..]).unwrap();
            prop_assert!((total - head - tail).abs() < 1e-9);
            prop_assert!((total - run.static_regret()).abs() < 1e-9);
            let dynamic = mab_regret(&run.steps, &run.dynamic_expectations()).unwrap();
            prop_assert!((dynamic - run.dynamic_regret().unwrap()).abs() < 1e-9);
        }
    }
}
