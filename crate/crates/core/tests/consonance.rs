use proptest::prelude::*;

use multifisher::closed::{AltSpec, ClosedProcedure, LocalRule, MethodKind, MethodSpec};
use multifisher::model::Margins;

mod common;
use common::*;

fn margins(k: usize) -> impl Strategy<Value = (Margins, &'static str)> {
    (
        prop::collection::vec(0u64..5, 1 << k),
        prop::sample::select(vec!["0.025", "0.05", "0.1", "0.2"]),
    )
        .prop_filter_map("need both groups", move |(m, a)| {
            let total: u64 = m.iter().sum();
            (total >= 2).then(|| (Margins::new(k, m, total / 2).unwrap(), a))
        })
}

fn sweep(m: &Margins, alpha: &str) -> Result<(), TestCaseError> {
    let alpha = alpha.parse().unwrap();
    for spec in supported_specs(m.k).into_iter().filter(|s| s.consonant) {
        let bad = dissonant_points(m, &spec, &alpha);
        prop_assert!(
            bad.is_empty(),
            "{} rejects only the global hypothesis at {:?}",
            spec.label(),
            bad
        );
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_endpoint_consonant_modes_are_consonant((m, alpha) in margins(2)) {
        sweep(&m, alpha)?;
    }

    #[test]
    fn three_endpoint_consonant_bonferroni_is_consonant((m, alpha) in margins(3)) {
        sweep(&m, alpha)?;
    }

    #[test]
    fn consonance_leaves_global_bonferroni_boundaries_alone(
        (m, alpha) in (2usize..=3).prop_flat_map(margins)
    ) {
        let alpha = alpha.parse().unwrap();
        for kind in [MethodKind::BonfOptimalAlpha, MethodKind::BonfOptimalPower] {
            let alt = AltSpec { p_trt: vec![0.6; m.k], p_ctr: vec![0.2; m.k], rho: 0.0 };
            let plain = ClosedProcedure::build(&m, &MethodSpec::new(kind).with_alt(alt.clone()), &alpha).unwrap();
            let cons = ClosedProcedure::build(&m, &MethodSpec::new(kind).with_alt(alt).consonant(true), &alpha).unwrap();
            match (&plain.locals[0].rule, &cons.locals[0].rule) {
                (LocalRule::Boundaries(a), LocalRule::Boundaries(b)) => prop_assert_eq!(&a.c, &b.c),
                _ => prop_assert!(false, "expected boundaries"),
            }
        }
    }
}
