use std::cell::Cell;

use hyclone_core::prompt::parse_generated_inputs;
use hyclone_core::{
    classify, collect_valid_inputs, compute_metrics, flip_rate, outputs_match,
    parse_screen_response, score_pair, CandidateSource, CollectError, ConfusionMatrix,
    CrossExecution, Decision, ExecutionOutcome, InputRunner, MatchConfig, OutcomeKind, Origin,
    ParseConfidence, TestInput, UndecidablePolicy,
};
use proptest::prelude::*;
use serde_json::{json, Value};

fn arb_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        (-3i64..3).prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<u64>().prop_map(Value::from),
        prop::num::f64::NORMAL.prop_map(|f| json!(f)),
        (-3.0f64..3.0).prop_map(|f| json!(f)),
        "[ab]{0,2}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 20, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            prop::collection::vec(prop::num::f64::NORMAL, 1..4).prop_map(|v| json!(v)),
            prop::collection::btree_map("[ab]", inner, 0..3)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn ok(v: Value) -> ExecutionOutcome {
    ExecutionOutcome::ok(v, 0.0)
}

fn inputs(n: usize, origin: Origin) -> Vec<TestInput> {
    (0..n).map(|i| TestInput::new(vec![json!(i)], origin, 1)).collect()
}

fn arb_cross() -> impl Strategy<Value = CrossExecution> {
    (1usize..10).prop_flat_map(|n| {
        let outs = move || prop::collection::vec(arb_value().prop_map(ok), n);
        let cross = move || {
            prop::collection::vec(
                prop_oneof![
                    3 => arb_value().prop_map(ok),
                    1 => Just(ExecutionOutcome::failure(OutcomeKind::RuntimeError, "E", "", 0.0)),
                ],
                n,
            )
        };
        (outs(), cross(), cross(), outs(), prop::collection::vec(any::<bool>(), n)).prop_map(
            move |(a_on_a, a_on_b, mut b_on_a, b_on_b, copy)| {
                for i in 0..n {
                    if copy[i] {
                        b_on_a[i] = a_on_a[i].clone();
                    }
                }
                CrossExecution {
                    inputs_a: inputs(n, Origin::FromA),
                    inputs_b: inputs(n, Origin::FromB),
                    a_on_a,
                    a_on_b,
                    b_on_a,
                    b_on_b,
                }
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn match_is_symmetric_and_reflexive(a in arb_value(), b in arb_value()) {
        let cfg = MatchConfig::default();
        prop_assert_eq!(outputs_match(&a, &b, &cfg), outputs_match(&b, &a, &cfg));
        prop_assert!(outputs_match(&a, &a, &cfg));
    }

    #[test]
    fn scores_swap(cross in arb_cross()) {
        let cfg = MatchConfig::default();
        let s = score_pair(&cross, &cfg).unwrap();
        let t = score_pair(&cross.swapped(), &cfg).unwrap();
        prop_assert_eq!((s.s_a, s.s_b), (t.s_b, t.s_a));
        prop_assert_eq!(s.per_input_matches.len(), 2 * s.n);
        prop_assert!((0.0..=1.0).contains(&s.s_a) && (0.0..=1.0).contains(&s.s_b));
        prop_assert_eq!(classify(&s, 0.8), classify(&t, 0.8));
    }

    #[test]
    fn prefix_scores_match_direct_scores(cross in arb_cross(), k in 1usize..10) {
        let k = k.min(cross.inputs_a.len());
        let cfg = MatchConfig::default();
        let full = score_pair(&cross, &cfg).unwrap();
        let pre = score_pair(&cross.prefix(k), &cfg).unwrap();
        let expect_a = full.per_input_matches[..k].iter().filter(|m| m.matched).count();
        prop_assert_eq!(pre.matches_a(), expect_a);
        prop_assert_eq!(pre.n, k);
    }

    #[test]
    fn metrics_invariant_under_permutation(
        rows in prop::collection::vec((0u8..3, any::<bool>()), 1..60),
        seed in any::<u64>(),
    ) {
        let to_decision = |d: u8| match d {
            0 => Decision::Clone,
            1 => Decision::NonClone,
            _ => Decision::Undecidable,
        };
        let decisions: Vec<Decision> = rows.iter().map(|r| to_decision(r.0)).collect();
        let labels: Vec<Option<bool>> = rows.iter().map(|r| Some(r.1)).collect();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        // Fisher-Yates with a tiny LCG so the shuffle is part of the case
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pd: Vec<Decision> = order.iter().map(|i| decisions[*i]).collect();
        let pl: Vec<Option<bool>> = order.iter().map(|i| labels[*i]).collect();
        for policy in [UndecidablePolicy::AsNegative, UndecidablePolicy::Exclude] {
            prop_assert_eq!(
                compute_metrics(&decisions, &labels, policy).unwrap(),
                compute_metrics(&pd, &pl, policy).unwrap()
            );
        }
    }

    #[test]
    fn reconstruction_round_trips(tp in 0u64..=130, tn in 0u64..=621) {
        let cm = ConfusionMatrix::new(tp, 621 - tn, 130 - tp, tn);
        prop_assert_eq!(ConfusionMatrix::reconstruct(&cm.metrics().into(), 751, 130), cm);
    }

    #[test]
    fn flip_rate_symmetric(a in prop::collection::vec(any::<bool>(), 0..50), seed in any::<u64>()) {
        let b: Vec<bool> = a.iter().enumerate().map(|(i, x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
        prop_assert_eq!(flip_rate(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(flip_rate(&a, &b).unwrap(), flip_rate(&b, &a).unwrap());
    }

    #[test]
    fn screen_parser_is_total(s in any::<String>()) {
        let v = parse_screen_response(&s);
        prop_assert_eq!(v.raw_response, s);
        if v.parse_confidence == ParseConfidence::Defaulted {
            prop_assert!(!v.is_clone);
        }
    }

    #[test]
    fn input_parser_is_total(s in any::<String>(), arity in 0usize..4) {
        for args in parse_generated_inputs(&s, arity) {
            prop_assert_eq!(args.len(), arity);
        }
    }

    #[test]
    fn collection_terminates(
        n in 1usize..8,
        max_rounds in 1u32..5,
        pool in prop::collection::vec(0i64..6, 0..12),
        bad in 0i64..6,
    ) {
        struct Pool(Vec<i64>, usize);
        impl CandidateSource for Pool {
            type Error = ();
            fn candidates(&mut self, _: u32, want: usize, _: &[Vec<Value>]) -> Result<Vec<Vec<Value>>, ()> {
                let out: Vec<_> = self.0.iter().cycle().skip(self.1).take(want + 2).map(|x| vec![json!(x)]).collect();
                self.1 += want;
                Ok(out)
            }
        }
        struct Runner<'a>(i64, &'a Cell<usize>);
        impl InputRunner for Runner<'_> {
            fn run_batch(&mut self, batch: &[Vec<Value>]) -> Vec<ExecutionOutcome> {
                self.1.set(self.1.get() + batch.len());
                batch.iter().map(|a| if a[0] == json!(self.0) {
                    ExecutionOutcome::failure(OutcomeKind::RuntimeError, "ValueError", "", 0.0)
                } else {
                    ok(a[0].clone())
                }).collect()
            }
        }
        let runs = Cell::new(0);
        match collect_valid_inputs(n, max_rounds, Origin::FromA, &mut Pool(pool, 0), &mut Runner(bad, &runs)) {
            Ok(c) => {
                prop_assert_eq!(c.valid.len(), n);
                prop_assert!(c.rounds <= max_rounds);
                prop_assert_eq!(c.executions(), runs.get());
                let mut seen: Vec<_> = c.inputs().into_iter().map(|t| t.args).collect();
                seen.dedup();
                prop_assert_eq!(seen.len(), n);
            }
            Err(CollectError::InsufficientValidInputs { valid_count, partial }) => {
                prop_assert!(valid_count < n);
                prop_assert_eq!(partial.rounds, max_rounds);
            }
            Err(e) => prop_assert!(false, "unexpected {:?}", e),
        }
    }
}
