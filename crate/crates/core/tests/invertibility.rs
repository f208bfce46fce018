//! Applying a rewrite and then its inverse restores the original tree.

use buglab::pipeline::functions_from_source;
use buglab::rewrite::apply;
use buglab::synth::{random_function, RandomProgramConfig};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn apply_then_inverse_is_identity(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RandomProgramConfig { max_branch_points: 3, max_statements: 10, max_depth: 3 };
        let src = random_function(&mut rng, cfg);
        let f = functions_from_source("p.py", &src).unwrap().remove(0);
        let cands = f.candidates();
        prop_assume!(!cands.is_empty());
        let pr = pick.get(&cands);
        let (buggy, repair) = f.inject(pr).unwrap();
        let repair = repair.unwrap();
        prop_assert!(buggy.tree().without_spans() != f.tree().without_spans(), "{} left {} unchanged", pr, src);
        let restored = apply(buggy.tree(), &repair).unwrap();
        prop_assert_eq!(restored.without_spans(), f.tree().without_spans(), "{} on\n{}", pr, src);
        // the repair is also what the detector is trained to predict
        let g = f.buggy_graph(pr).unwrap();
        prop_assert!(g.target_index().is_some());
    }
}
