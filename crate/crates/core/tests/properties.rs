mod common;

use std::collections::BTreeMap;

use common::{random_network, t};
use netbenefit::dca::{self, best_strategy, Axis, SweepSpec, ThresholdAxis};
use netbenefit::format::sig6;
use netbenefit::net_benefit::nb_difference;
use netbenefit::sim_oracle::{simulate_trials, SimConfig};
use netbenefit::strategy::{recommend_treatment, Recommender};
use netbenefit::synthesis::{pool_pairwise, study_contrasts};
use netbenefit::trial_data::{aggregate_to_arms, PatientDataset};
use netbenefit::{Evaluator, Model, Strategy, SynthesisOptions, ThresholdVector, TreatmentId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ACTIVES: [&str; 3] = ["a", "b", "c"];

fn risk_and_thresholds() -> impl proptest::strategy::Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0.0..=1.0f64, 4), prop::collection::vec(0.0..=0.5f64, 3))
}

fn tv(th: &[f64]) -> ThresholdVector {
    ThresholdVector::new(&t("p"), ACTIVES.iter().zip(th).map(|(a, v)| (t(a), *v))).unwrap()
}

proptest! {
    #[test]
    fn recommendation_is_eligible_and_maximal((risks, th) in risk_and_thresholds()) {
        let map: BTreeMap<TreatmentId, f64> =
            ["p", "a", "b", "c"].iter().zip(&risks).map(|(k, v)| (t(k), *v)).collect();
        let pick = recommend_treatment(&map, &tv(&th), &t("p")).unwrap();
        let margin = |j: usize| risks[0] - risks[j + 1] - th[j];
        let eligible: Vec<usize> = (0..3).filter(|&j| risks[0] - risks[j + 1] > 0.0 && margin(j) >= 0.0).collect();
        if eligible.is_empty() {
            prop_assert_eq!(pick.as_str(), "p");
        } else {
            let j = ACTIVES.iter().position(|a| *a == pick.as_str()).unwrap();
            prop_assert!(eligible.contains(&j));
            prop_assert!(eligible.iter().all(|&k| margin(k) <= margin(j)));
        }
    }

    #[test]
    fn raising_a_threshold_never_adds_that_treatment((risks, th) in risk_and_thresholds(), bump in 0.0..0.5f64) {
        let order: Vec<TreatmentId> = ["p", "a", "b", "c"].iter().map(|x| t(x)).collect();
        let before = Recommender::new(&order, &t("p"), &tv(&th)).unwrap().recommend(&risks);
        let mut raised = th.clone();
        raised[0] += bump;
        let after = Recommender::new(&order, &t("p"), &tv(&raised)).unwrap().recommend(&risks);
        if before != 1 {
            prop_assert_ne!(after, 1);
        }
    }

    #[test]
    fn pairwise_is_antisymmetric(seed in 0u64..10_000, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_network(&mut rng, &["p", "a"], k);
        let c = study_contrasts(&data, 0.5);
        for model in [Model::Fixed, Model::Random] {
            let ab = pool_pairwise(&c, &t("a"), &t("p"), model).unwrap();
            let ba = pool_pairwise(&c, &t("p"), &t("a"), model).unwrap();
            prop_assert!((ab.log_rr + ba.log_rr).abs() < 1e-12);
            prop_assert!((ab.se - ba.se).abs() < 1e-12);
        }
    }

    #[test]
    fn nb_difference_is_antisymmetric(seed in 0u64..10_000, th in prop::collection::vec(0.0..=0.5f64, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_network(&mut rng, &["p", "a", "b", "c"], 4);
        prop_assume!(netbenefit::trial_data::check_connectivity(&data).is_connected() && data.treatments().len() == 4);
        let ev = Evaluator::new(Some(&data), None, None, SynthesisOptions::default()).unwrap();
        let x = ev.evaluate(&Strategy::TreatAll(t("a")), &tv(&th)).unwrap();
        let y = ev.evaluate(&Strategy::TreatAll(t("b")), &tv(&th)).unwrap();
        prop_assert_eq!(nb_difference(&x, &y).unwrap(), -nb_difference(&y, &x).unwrap());
    }

    #[test]
    fn sig6_keeps_six_digits(x in -1e8..1e8f64) {
        let back: f64 = sig6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs().max(1e-300));
    }
}

fn simulated(seed: u64) -> PatientDataset {
    simulate_trials(&SimConfig::rrms_like(seed, 150)).unwrap().0
}

fn spec(n: Axis, shared: Axis, ev: &Evaluator<'_>) -> SweepSpec {
    SweepSpec {
        primary: ThresholdAxis { treatments: vec![t("n")], range: n },
        shared: ThresholdAxis { treatments: vec![t("df"), t("ga")], range: shared },
        strategies: ev.default_strategies(),
    }
}

#[test]
fn heatmap_cells_are_consistent() {
    let patients = simulated(31);
    let arms = aggregate_to_arms(&patients).unwrap();
    let ev = Evaluator::new(Some(&arms), Some(&patients), None, SynthesisOptions::default()).unwrap();
    let grid = dca::heatmap_grid(
        &ev,
        &spec(Axis::new(0.0, 0.4, 0.05).unwrap(), Axis::new(0.0, 0.3, 0.05).unwrap(), &ev),
    )
    .unwrap();
    let mut all_estimable = 0;
    for p in grid.iter().flatten() {
        assert_eq!(p.nb_of(&Strategy::TreatNone), Some(0.0));
        assert_eq!(p.best, best_strategy(&p.nb).map(|b| b.0));
        if p.nb.iter().all(|(_, v)| v.is_some()) {
            all_estimable += 1;
            assert!(p.margin.unwrap() >= 0.0);
        }
        // Agrees with a direct evaluation.
        for (s, v) in &p.nb {
            let direct = ev.evaluate(s, &p.thresholds).ok().map(|r| r.nb);
            assert_eq!(*v, direct, "{s} at {:?}", p.thresholds);
        }
    }
    assert!(all_estimable > 0);
}

#[test]
fn sub_grid_reproduces_sub_matrix() {
    let patients = simulated(32);
    let arms = aggregate_to_arms(&patients).unwrap();
    let ev = Evaluator::new(Some(&arms), Some(&patients), None, SynthesisOptions::default()).unwrap();
    let full = dca::heatmap_grid(&ev, &spec(Axis::new(0.19, 0.40, 0.01).unwrap(), Axis::new(0.04, 0.25, 0.01).unwrap(), &ev)).unwrap();
    let sub = dca::heatmap_grid(&ev, &spec(Axis::new(0.25, 0.30, 0.01).unwrap(), Axis::new(0.10, 0.12, 0.01).unwrap(), &ev)).unwrap();
    for (i, row) in sub.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            assert_eq!(cell, &full[6 + i][6 + j]);
        }
    }
}

#[test]
fn single_point_curve_equals_direct_evaluation() {
    let patients = simulated(33);
    let arms = aggregate_to_arms(&patients).unwrap();
    let ev = Evaluator::new(Some(&arms), Some(&patients), None, SynthesisOptions::default()).unwrap();
    let points = dca::decision_curve(&ev, &spec(Axis::fixed(0.2).unwrap(), Axis::fixed(0.1).unwrap(), &ev)).unwrap();
    assert_eq!(points.len(), 1);
    let th = ThresholdVector::new(&t("placebo"), [(t("n"), 0.2), (t("df"), 0.1), (t("ga"), 0.1)]).unwrap();
    for (s, v) in &points[0].nb {
        assert_eq!(*v, ev.evaluate(s, &th).ok().map(|r| r.nb));
    }
}

// Zero thresholds and one treatment better for every patient: the model
// recommends it to everyone, so the model cannot beat treat-all with it.
#[test]
fn dominant_treatment_ties_or_beats_model() {
    let r: &[f64] = &[0.6, 0.3, 0.5];
    let patients = common::patients(
        &["placebo", "a", "b"],
        &[
            ("S1", "placebo", true, r),
            ("S1", "placebo", false, r),
            ("S1", "a", true, r),
            ("S1", "a", false, r),
        ],
    );
    let arms = aggregate_to_arms(&patients).unwrap();
    let ev = Evaluator::new(Some(&arms), Some(&patients), None, SynthesisOptions::default()).unwrap();
    let spec = SweepSpec {
        primary: ThresholdAxis { treatments: vec![t("a")], range: Axis::fixed(0.0).unwrap() },
        shared: ThresholdAxis { treatments: vec![t("b")], range: Axis::fixed(0.0).unwrap() },
        strategies: ev.default_strategies(),
    };
    let p = &dca::heatmap_grid(&ev, &spec).unwrap()[0][0];
    let all_a = p.nb_of(&Strategy::TreatAll(t("a"))).unwrap();
    let model = p.nb_of(&Strategy::ModelBased).unwrap();
    assert!(all_a >= model);
    // By hand: eps0 = 1/2 and RR = 1 give 0; the model's congruent data are
    // the two patients on a, one event, also 0.
    assert_eq!((all_a, model), (0.0, 0.0));
}
