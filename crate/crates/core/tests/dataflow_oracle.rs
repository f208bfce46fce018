//! Dataflow edges against brute-force enumeration of execution paths.

mod common;

use buglab::synth::{random_function, RandomProgramConfig};
use common::dataflow_mismatch;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hand_written_programs() {
    for src in [
        "def f(n):\n  i = 0\n  while i < n:\n    i += 1\n  return i\n",
        "def f(c, x):\n  if c:\n    x = 1\n  else:\n    return x\n  return x\n",
        "def f(a):\n  while a:\n    if a.ok():\n      return a\n    a = a.next\n  return None\n",
    ] {
        assert_eq!(dataflow_mismatch(src), None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 250, ..ProptestConfig::default() })]

    #[test]
    fn generated_programs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RandomProgramConfig { max_branch_points: 2, max_statements: 9, max_depth: 2 };
        let src = random_function(&mut rng, cfg);
        prop_assert_eq!(dataflow_mismatch(&src), None);
    }
}
