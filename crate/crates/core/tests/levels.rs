use proptest::prelude::*;

use multifisher::closed::ClosedProcedure;
use multifisher::model::{Alpha, Margins};
use multifisher::power::{simulate_power, Scenario};

mod common;
use common::*;

const LEVELS: [&str; 4] = ["0.025", "0.05", "0.1", "0.3"];

fn margins() -> impl Strategy<Value = (Margins, Alpha)> {
    (1usize..=3)
        .prop_flat_map(|k| {
            (
                Just(k),
                prop::collection::vec(0u64..4, 1 << k),
                0..LEVELS.len(),
            )
        })
        .prop_filter_map("need both groups", |(k, m, a)| {
            let total: u64 = m.iter().sum();
            if total < 2 {
                return None;
            }
            Some((Margins::new(k, m, total / 2).ok()?, LEVELS[a].parse().ok()?))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_local_test_has_level_alpha((m, alpha) in margins()) {
        for spec in supported_specs(m.k) {
            let procedure = ClosedProcedure::build(&m, &spec, &alpha).unwrap();
            for local in &procedure.locals {
                let (rejected, total) = recount_level(&m, local);
                prop_assert!(
                    rejected <= alpha.capacity(&total),
                    "{} on {:?}: {rejected}/{total} exceeds {alpha}",
                    spec.label(), local.endpoints.indices()
                );
            }
        }
    }
}

fn null_scenarios() -> [Scenario; 2] {
    [
        Scenario {
            k: 2,
            n: 15,
            p_trt: vec![0.5, 0.3],
            p_ctr: vec![0.5, 0.3],
            rho: 0.3,
            alpha: "0.05".into(),
        },
        Scenario {
            k: 3,
            n: 8,
            p_trt: vec![0.4, 0.5, 0.6],
            p_ctr: vec![0.4, 0.5, 0.6],
            rho: 0.2,
            alpha: "0.1".into(),
        },
    ]
}

#[test]
fn simulated_familywise_error_stays_near_alpha() {
    for s in null_scenarios() {
        let alpha: f64 = s.alpha.parse().unwrap();
        let se = (alpha * (1.0 - alpha) / 10_000f64).sqrt();
        for spec in supported_specs(s.k) {
            let r = simulate_power(&s, &spec, 10_000, 2024).unwrap();
            assert!(
                r.any <= alpha + 3.0 * se,
                "{}: FWER {} (alpha {alpha})",
                spec.label(),
                r.any
            );
        }
    }
}
