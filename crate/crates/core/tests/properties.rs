//! Property tests over generated expressions and specifications.

mod common;

use common::{random_spec, Limits};
use grafcet_core::ingest::{parse_condition, parse_spec, to_json};
use grafcet_core::invariants::{incidence, Count};
use grafcet_core::model::{BoolRef, CmpOp, Condition, StepRef, Sum, SumTerm, Term};
use grafcet_core::pipeline::{analyze, report_json, Options, ReportOptions};
use grafcet_core::reachconc::{reach_analysis, reach_analysis_scheduled};
use grafcet_core::varapprox::{int_interval, WriteEffect};
use num_bigint::BigInt;
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bool_ref() -> impl Strategy<Value = BoolRef> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "flag"]).prop_map(|v| BoolRef::Var(v.to_owned())),
        (prop::sample::select(vec!["G1", "Main"]), 1u32..30)
            .prop_map(|(p, s)| BoolRef::Step(StepRef::new(p, s.to_string()))),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    prop_oneof![
        (0i64..1000).prop_map(Term::Const),
        prop::sample::select(vec!["k", "n"]).prop_map(|v| Term::Var(v.to_owned())),
        (2i64..9, prop::sample::select(vec!["k", "n"])).prop_map(|(c, v)| Term::Scaled(c, v.to_owned())),
    ]
}

fn sum() -> impl Strategy<Value = Sum> {
    prop::collection::vec((any::<bool>(), term()), 1..4)
        .prop_map(|ts| Sum(ts.into_iter().map(|(negated, term)| SumTerm { negated, term }).collect()))
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

fn condition() -> impl Strategy<Value = Condition> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Condition::Const),
        bool_ref().prop_map(Condition::Ref),
        bool_ref().prop_map(Condition::Rising),
        bool_ref().prop_map(Condition::Falling),
        (cmp_op(), sum(), sum()).prop_map(|(op, a, b)| Condition::Compare(op, a, b)),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Condition::Not(Box::new(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Condition::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Condition::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn spec_from_seed(seed: u64) -> grafcet_core::model::GrafcetSpec {
    random_spec(&mut ChaCha8Rng::seed_from_u64(seed), Limits::default())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn printed_conditions_parse_back(c in condition()) {
        let text = c.to_string();
        let parsed = parse_condition(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(parsed, c);
    }

    #[test]
    fn parser_rejects_garbage_without_panicking(text in "[a-zX0-9 ()!&|<>=+*.-]{0,40}") {
        let _ = parse_condition(&text);
    }

    #[test]
    fn spec_documents_round_trip(seed in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let again = parse_spec(&to_json(&spec)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(again, spec);
    }

    #[test]
    fn fixpoint_ignores_worklist_order(seed in any::<u64>()) {
        let a = analyze(&spec_from_seed(seed), &Options::default());
        prop_assume!(a.complete);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        for (p, sits) in a.situations.iter().enumerate() {
            for (i, sit) in sits.iter().enumerate() {
                let fifo = &a.results[p][i];
                for _ in 0..5 {
                    let r = reach_analysis_scheduled(&a.topologies[p], sit, &mut |len| rng.gen_range(0..len));
                    prop_assert_eq!(&r.reachable, &fifo.reachable);
                    prop_assert_eq!(&r.concurrency, &fifo.concurrency);
                    prop_assert_eq!(&r.self_concurrent, &fifo.self_concurrent);
                }
            }
        }
    }

    #[test]
    fn concurrency_is_symmetric_and_irreflexive(seed in any::<u64>()) {
        let a = analyze(&spec_from_seed(seed), &Options::default());
        prop_assume!(a.complete);
        for (p, sits) in a.situations.iter().enumerate() {
            for sit in sits {
                let r = reach_analysis(&a.topologies[p], sit);
                for (s, cs) in r.concurrency.iter().enumerate() {
                    prop_assert!(!cs.contains(&s));
                    prop_assert!(r.is_reachable(s) || cs.is_empty());
                    for &x in cs {
                        prop_assert!(r.concurrency[x].contains(&s));
                        prop_assert!(r.is_reachable(x));
                    }
                }
                for &s in &sit.steps {
                    prop_assert!(r.is_reachable(s));
                }
            }
        }
        for &(x, y) in &a.global.pairs {
            prop_assert!(x < y);
            prop_assert!(a.global.is_reachable(x) && a.global.is_reachable(y));
        }
    }

    #[test]
    fn invariants_annihilate_the_incidence_matrix(seed in any::<u64>()) {
        let a = analyze(&spec_from_seed(seed), &Options::default());
        prop_assume!(a.complete);
        for (p, inv) in a.invariants.iter().enumerate() {
            let n = incidence(&a.topologies[p]);
            for y in &inv.s_invariants {
                for t in 0..n.transitions {
                    let dot: BigInt = (0..n.steps()).map(|s| &y[s] * BigInt::from(n.entries[s][t])).sum();
                    prop_assert!(dot.is_zero());
                }
            }
            for x in &inv.t_invariants {
                for s in 0..n.steps() {
                    let dot: BigInt = (0..n.transitions).map(|t| &x[t] * BigInt::from(n.entries[s][t])).sum();
                    prop_assert!(dot.is_zero());
                }
            }
        }
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>()) {
        let spec = spec_from_seed(seed);
        let opts = ReportOptions { dump_invariants: true, timings: false };
        let one = report_json(&analyze(&spec, &Options { jobs: 1, ..Options::default() }), opts, None);
        let two = report_json(&analyze(&spec, &Options { jobs: 4, ..Options::default() }), opts, None);
        prop_assert_eq!(one.to_string(), two.to_string());
    }

    #[test]
    fn intervals_grow_with_execution_counts(
        init in -5i64..5,
        writers in prop::collection::vec((prop_oneof![
            (-4i64..5).prop_map(WriteEffect::Constant),
            (-3i64..4).prop_map(WriteEffect::Shift),
        ], 0u64..4, 0u64..3), 0..4),
    ) {
        let small: Vec<(WriteEffect, Count)> = writers.iter().map(|&(e, c, _)| (e, Count::Finite(c))).collect();
        let large: Vec<(WriteEffect, Count)> = writers.iter().map(|&(e, c, d)| (e, Count::Finite(c + d))).collect();
        let unbounded: Vec<(WriteEffect, Count)> = writers.iter().map(|&(e, _, _)| (e, Count::Infinite)).collect();
        let (a, b, c) = (int_interval(init, &small), int_interval(init, &large), int_interval(init, &unbounded));
        prop_assert!(b.contains_interval(&a), "{} within {}", a, b);
        prop_assert!(c.contains_interval(&b), "{} within {}", b, c);
        prop_assert!(a.contains(0) && a.contains(init));
    }
}
