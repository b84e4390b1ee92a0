use pram_core::dp::{build_constraint_system, certify, is_feasible};
use pram_core::inference::{estimate_p_em, EmOptions};
use pram_core::info::mutual_information;
use pram_core::mechanism::{build_matrix, privatize};
use pram_core::optimizer::{local_search, optimize, OptimizeOptions, Strategy as Search};
use pram_core::polytope::{enumerate_vertices_prop2, prop2_threshold};
use pram_core::{CategoricalDistribution, MicrodataColumn, PrivacyLevel};
use proptest::prelude::*;

fn simplex(size: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, size).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimum_is_feasible_and_beats_every_vertex(p in simplex(7), frac in 0.0f64..1.0) {
        let alpha = PrivacyLevel::new(frac * prop2_threshold(7).unwrap()).unwrap();
        let p = CategoricalDistribution::new(p).unwrap();
        let r = optimize(&p, alpha, &OptimizeOptions::default()).unwrap();
        let sys = build_constraint_system(7, alpha).unwrap();
        prop_assert!(is_feasible(&r.q_star, &sys, 1e-9).unwrap());
        prop_assert!(certify(&build_matrix(r.q_star.clone()).unwrap(), alpha, 1e-9).pass);
        for v in enumerate_vertices_prop2(7, alpha).unwrap() {
            prop_assert!(mutual_information(&p, &v.q).unwrap().value() <= r.mi_nats.value() + 1e-12);
        }
    }

    #[test]
    fn local_search_never_beats_exhaustive(p in simplex(9), frac in 0.05f64..1.0, seed in any::<u64>()) {
        let alpha = PrivacyLevel::new(frac * prop2_threshold(9).unwrap()).unwrap();
        let p = CategoricalDistribution::new(p).unwrap();
        let ex = optimize(&p, alpha, &OptimizeOptions { strategy: Search::Exhaustive, ..Default::default() }).unwrap();
        let ls = local_search(&p, alpha, 8, seed).unwrap();
        prop_assert!(ls.mi_nats.value() <= ex.mi_nats.value() + 1e-12);
    }
}

#[test]
fn optimize_privatize_estimate() {
    let p = CategoricalDistribution::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let alpha = PrivacyLevel::new(0.0).unwrap();
    // at alpha = 0 the only private mechanism releases pure noise
    let r = optimize(&p, alpha, &OptimizeOptions::default()).unwrap();
    assert!(r.mi_nats.value() < 1e-12);

    let p = CategoricalDistribution::new(vec![0.3, 0.1, 0.2, 0.08, 0.02, 0.04, 0.06, 0.1, 0.01, 0.09]).unwrap();
    let alpha = PrivacyLevel::new(2.0).unwrap();
    let r = optimize(&p, alpha, &OptimizeOptions::default()).unwrap();
    let m = build_matrix(r.q_star).unwrap();
    let mut records = Vec::new();
    for (k, pk) in p.probs().iter().enumerate() {
        records.extend(std::iter::repeat_n(k as u32 + 1, (pk * 50_000.0) as usize));
    }
    let x = MicrodataColumn::new(records, 10).unwrap();
    let z = privatize(&x, &m, 8).unwrap();
    let est = estimate_p_em(&z, &m, EmOptions::default()).unwrap();
    assert!(est.p_hat.total_variation(&p).unwrap() < 0.03);
}
