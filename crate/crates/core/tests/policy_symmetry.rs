mod common;

use learncut::env::{CutEnv, CutEnvState, RolloutConfig};
use learncut::instances::gen_packing;
use learncut::policy::PolicyParams;
use proptest::prelude::*;
use rand::Rng;

fn state(seed: u64, steps: usize) -> Option<CutEnvState> {
    let inst = gen_packing(6, 4, seed).unwrap();
    let mut env = CutEnv::reset(&inst, &RolloutConfig::train(steps)).unwrap();
    let mut r = common::rng(seed ^ 0xA5);
    while !env.is_done() {
        let k = env.state().candidates.len();
        env.step(r.random_range(0..k)).unwrap();
    }
    let st = env.into_state();
    (!st.candidates.is_empty()).then_some(st)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_ignore_constraint_order(seed in 0u64..10_000, steps in 0usize..6, wseed in 0u64..1000) {
        let Some(st) = state(seed, steps) else { return Ok(()) };
        let p = PolicyParams::attention(6, wseed);
        let base = p.score_candidates(&st).unwrap();
        let mut shuffled = st.clone();
        let perm = common::permutation(st.lp.constraints.len(), &mut common::rng(wseed));
        shuffled.lp.constraints = perm.iter().map(|&i| st.lp.constraints[i].clone()).collect();
        let s = p.score_candidates(&shuffled).unwrap();
        for (a, b) in base.iter().zip(&s) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn scores_follow_candidate_order(seed in 0u64..10_000, steps in 0usize..6, wseed in 0u64..1000) {
        let Some(st) = state(seed, steps) else { return Ok(()) };
        let p = PolicyParams::attention(6, wseed);
        let base = p.score_candidates(&st).unwrap();
        let mut shuffled = st.clone();
        let perm = common::permutation(st.candidates.len(), &mut common::rng(wseed + 1));
        shuffled.candidates.cuts = perm.iter().map(|&i| st.candidates.cuts[i].clone()).collect();
        shuffled.candidates.source_rows = perm.iter().map(|&i| st.candidates.source_rows[i]).collect();
        let s = p.score_candidates(&shuffled).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((s[k] - base[i]).abs() <= 1e-9 * (1.0 + base[i].abs()));
        }
    }

    #[test]
    fn lstm_scores_ignore_constraint_order(seed in 0u64..10_000, steps in 0usize..4) {
        let Some(st) = state(seed, steps) else { return Ok(()) };
        let p = PolicyParams::lstm(4, seed);
        let base = p.score_candidates(&st).unwrap();
        let mut rev = st.clone();
        rev.lp.constraints.reverse();
        let s = p.score_candidates(&rev).unwrap();
        for (a, b) in base.iter().zip(&s) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
