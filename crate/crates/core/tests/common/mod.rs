#![allow(dead_code)]

use netbenefit::trial_data::{ArmRecord, PatientDataset, PatientRecord, TreatmentId, TrialDataset};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn t(s: &str) -> TreatmentId {
    TreatmentId::new(s)
}

pub fn arm<R: Rng>(rng: &mut R, study: &str, treatment: &TreatmentId) -> ArmRecord {
    let total = rng.random_range(20..400u64);
    let events = rng.random_range(0..=total);
    ArmRecord::new(study, treatment.clone(), events, total)
}

/// Random arm-level network over `names` (first is the control). Study 1
/// always contains the control; the rest draw random subsets of size >= 2.
pub fn random_network<R: Rng>(rng: &mut R, names: &[&str], n_studies: usize) -> TrialDataset {
    let ids: Vec<TreatmentId> = names.iter().map(|n| t(n)).collect();
    let mut arms = Vec::new();
    for s in 0..n_studies {
        let study = format!("S{}", s + 1);
        let k = rng.random_range(2..=ids.len());
        let mut chosen: Vec<&TreatmentId> = ids.choose_multiple(rng, k).collect();
        if s == 0 && !chosen.contains(&&ids[0]) {
            chosen[0] = &ids[0];
        }
        for x in chosen {
            arms.push(arm(rng, &study, x));
        }
    }
    TrialDataset::new(arms, ids[0].clone()).unwrap()
}

/// Patients with hand-set risks; `rows` are (study, assigned, event, risks).
pub fn patients(treatments: &[&str], rows: &[(&str, &str, bool, &[f64])]) -> PatientDataset {
    PatientDataset::new(
        treatments.iter().map(|x| t(x)).collect(),
        t(treatments[0]),
        rows.iter()
            .enumerate()
            .map(|(i, (s, a, e, r))| PatientRecord {
                patient_id: format!("p{i}"),
                study_id: s.to_string(),
                assigned: t(a),
                event: *e,
                risks: r.to_vec(),
            })
            .collect(),
    )
    .unwrap()
}

/// Two placebo-controlled trials whose congruent dataset under the model
/// strategy keeps only the active arm of each: S1 patients benefit from `a`
/// alone, S2 patients from `b` alone.
pub fn single_arm_congruent_fixture() -> PatientDataset {
    let s1: &[f64] = &[0.6, 0.2, 0.6];
    let s2: &[f64] = &[0.6, 0.6, 0.2];
    patients(
        &["placebo", "a", "b"],
        &[
            ("S1", "placebo", true, s1),
            ("S1", "placebo", false, s1),
            ("S1", "a", false, s1),
            ("S1", "a", true, s1),
            ("S2", "placebo", true, s2),
            ("S2", "placebo", true, s2),
            ("S2", "b", false, s2),
            ("S2", "b", false, s2),
        ],
    )
}
