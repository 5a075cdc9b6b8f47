//! Treatment strategies, the threshold-based recommendation rule, congruent
//! datasets and treatment shares.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::trial_data::{PatientDataset, TreatmentId};

/// A treatment strategy. Model-based thresholds are supplied at evaluation
/// time so one strategy value can be swept over a threshold grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    TreatNone,
    TreatAll(TreatmentId),
    ModelBased,
}

const TREAT_ALL_PREFIX: &str = "treat_all_";

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::TreatNone => "treat_none".into(),
            Strategy::TreatAll(t) => format!("{TREAT_ALL_PREFIX}{t}"),
            Strategy::ModelBased => "model".into(),
        }
    }

    /// Treat-none, treat-all with each active treatment, then the model.
    pub fn default_set(treatments: &[TreatmentId], control: &TreatmentId) -> Vec<Strategy> {
        let mut out = vec![Strategy::TreatNone];
        out.extend(
            treatments
                .iter()
                .filter(|t| *t != control)
                .map(|t| Strategy::TreatAll(t.clone())),
        );
        out.push(Strategy::ModelBased);
        out
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "treat_none" | "none" => Ok(Strategy::TreatNone),
            "model" | "model_based" => Ok(Strategy::ModelBased),
            _ => {
                let t = s
                    .strip_prefix(TREAT_ALL_PREFIX)
                    .or_else(|| s.strip_prefix("treat_all:"))
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| {
                        Error::Argument(format!(
                            "unknown strategy '{s}' (treat_none, treat_all_<treatment>, model)"
                        ))
                    })?;
                Ok(Strategy::TreatAll(TreatmentId::new(t)))
            }
        }
    }
}

/// Minimum worthwhile risk reduction per treatment; the control is pinned
/// to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    control: TreatmentId,
    values: BTreeMap<TreatmentId, f64>,
}

fn check_threshold(t: &TreatmentId, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Argument(format!("threshold for {t} = {v} outside [0,1]")));
    }
    Ok(())
}

impl ThresholdVector {
    pub fn new(control: &TreatmentId, actives: impl IntoIterator<Item = (TreatmentId, f64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        values.insert(control.clone(), 0.0);
        for (t, v) in actives {
            if &t == control {
                if v != 0.0 {
                    return Err(Error::Argument(format!(
                        "threshold for the control {t} must be 0, got {v}"
                    )));
                }
                continue;
            }
            check_threshold(&t, v)?;
            values.insert(t, v);
        }
        Ok(ThresholdVector {
            control: control.clone(),
            values,
        })
    }

    pub fn control(&self) -> &TreatmentId {
        &self.control
    }

    pub fn get(&self, t: &TreatmentId) -> Option<f64> {
        self.values.get(t).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TreatmentId, f64)> {
        self.values.iter().map(|(t, v)| (t, *v))
    }

    /// Active treatments and their thresholds.
    pub fn actives(&self) -> impl Iterator<Item = (&TreatmentId, f64)> {
        self.iter().filter(move |(t, _)| *t != &self.control)
    }

    pub fn max(&self) -> f64 {
        self.values.values().copied().fold(0.0, f64::max)
    }

    /// Copy with `t` set to `value`.
    pub fn with(&self, t: &TreatmentId, value: f64) -> Result<Self> {
        if t == &self.control {
            return Err(Error::Argument("cannot set a threshold on the control".into()));
        }
        check_threshold(t, value)?;
        let mut out = self.clone();
        out.values.insert(t.clone(), value);
        Ok(out)
    }

    /// Errors unless every active treatment in `treatments` has a threshold.
    pub fn require(&self, treatments: &[TreatmentId]) -> Result<()> {
        let missing: Vec<&str> = treatments
            .iter()
            .filter(|t| !self.values.contains_key(*t))
            .map(|t| t.as_str())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(format!("no threshold for {}", missing.join(", "))))
        }
    }
}

/// Index-based form of the recommendation rule for a fixed treatment order.
///
/// A treatment is eligible when its risk reduction versus control is
/// strictly positive and at least its threshold. Among eligible treatments
/// the largest margin `RD - T` wins; ties go to the smaller threshold, then
/// to the smaller id. With nothing eligible the control is recommended.
#[derive(Debug, Clone)]
pub struct Recommender {
    control: usize,
    /// `(index, threshold)` of active treatments in tie-break order.
    candidates: Vec<(usize, f64)>,
}

impl Recommender {
    pub fn new(treatments: &[TreatmentId], control: &TreatmentId, thresholds: &ThresholdVector) -> Result<Self> {
        let c = treatments
            .iter()
            .position(|t| t == control)
            .ok_or_else(|| Error::Argument(format!("control {control} not among treatments")))?;
        thresholds.require(treatments)?;
        let mut candidates: Vec<(usize, f64)> = treatments
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != c)
            .map(|(i, t)| (i, thresholds.get(t).expect("checked by require")))
            .collect();
        candidates.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then_with(|| treatments[a.0].cmp(&treatments[b.0]))
        });
        Ok(Recommender {
            control: c,
            candidates,
        })
    }

    pub fn recommend(&self, risks: &[f64]) -> usize {
        let base = risks[self.control];
        let mut best = self.control;
        let mut best_margin = f64::NEG_INFINITY;
        for &(j, t) in &self.candidates {
            let rd = base - risks[j];
            if rd > 0.0 && rd >= t {
                let margin = rd - t;
                if margin > best_margin {
                    best = j;
                    best_margin = margin;
                }
            }
        }
        best
    }

    /// Recommendation for every patient, computed in parallel.
    pub fn recommend_all(&self, patients: &PatientDataset) -> Vec<usize> {
        patients
            .patients()
            .par_iter()
            .map(|p| self.recommend(&p.risks))
            .collect()
    }
}

/// Recommended treatment for one patient's predicted risks.
pub fn recommend_treatment(
    risks: &BTreeMap<TreatmentId, f64>,
    thresholds: &ThresholdVector,
    control: &TreatmentId,
) -> Result<TreatmentId> {
    let treatments: Vec<TreatmentId> = thresholds.iter().map(|(t, _)| t.clone()).collect();
    let mut values = Vec::with_capacity(treatments.len());
    for t in &treatments {
        let r = risks
            .get(t)
            .ok_or_else(|| Error::Argument(format!("no predicted risk for {t}")))?;
        values.push(*r);
    }
    let rec = Recommender::new(&treatments, control, thresholds)?;
    Ok(treatments[rec.recommend(&values)].clone())
}

/// Indices of patients whose assigned treatment is the one `strategy` would
/// give them.
pub fn congruent_indices(patients: &PatientDataset, strategy: &Strategy, thresholds: &ThresholdVector) -> Result<Vec<usize>> {
    let assigned = patients.assigned_indices();
    let target: Box<dyn Fn(usize) -> Option<usize>> = match strategy {
        Strategy::TreatNone => {
            let c = patients.control_index();
            Box::new(move |_| Some(c))
        }
        Strategy::TreatAll(x) => {
            let x = patients.index_of(x);
            Box::new(move |_| x)
        }
        Strategy::ModelBased => {
            let recs = Recommender::new(patients.treatments(), patients.control(), thresholds)?
                .recommend_all(patients);
            Box::new(move |i| Some(recs[i]))
        }
    };
    Ok((0..patients.len())
        .filter(|&i| target(i) == Some(assigned[i]))
        .collect())
}

/// Patients whose randomized treatment coincides with the strategy's
/// recommendation. May be empty.
pub fn congruent_subset(patients: &PatientDataset, strategy: &Strategy, thresholds: &ThresholdVector) -> Result<PatientDataset> {
    Ok(patients.subset(&congruent_indices(patients, strategy, thresholds)?))
}

/// Proportion of patients on each treatment under a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentShares {
    pub shares: BTreeMap<TreatmentId, f64>,
    /// Size of the congruent dataset the shares were counted in; zero when
    /// the shares are fixed by the strategy or supplied directly.
    pub n: usize,
}

impl TreatmentShares {
    /// Everyone on `x`.
    pub fn all_on(x: &TreatmentId, treatments: &[TreatmentId]) -> Self {
        let mut shares: BTreeMap<TreatmentId, f64> =
            treatments.iter().map(|t| (t.clone(), 0.0)).collect();
        shares.insert(x.clone(), 1.0);
        TreatmentShares { shares, n: 0 }
    }

    /// Shares given directly, e.g. published intermediates. They must be
    /// non-negative and sum to one within 1e-6 (published values are rounded).
    pub fn from_proportions(shares: BTreeMap<TreatmentId, f64>, n: usize) -> Result<Self> {
        if let Some((t, v)) = shares.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Argument(format!("share for {t} = {v} outside [0,1]")));
        }
        let sum: f64 = shares.values().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Argument(format!("shares sum to {sum}, not 1")));
        }
        Ok(TreatmentShares { shares, n })
    }

    pub fn get(&self, t: &TreatmentId) -> f64 {
        self.shares.get(t).copied().unwrap_or(0.0)
    }

    pub fn positive(&self) -> impl Iterator<Item = (&TreatmentId, f64)> {
        self.shares.iter().filter(|(_, v)| **v > 0.0).map(|(t, v)| (t, *v))
    }
}

pub fn treatment_shares(congruent: &PatientDataset, treatments: &[TreatmentId]) -> Result<TreatmentShares> {
    if congruent.is_empty() {
        return Err(Error::Estimation("congruent dataset empty".into()));
    }
    let mut counts: BTreeMap<TreatmentId, usize> = treatments.iter().map(|t| (t.clone(), 0)).collect();
    for p in congruent.patients() {
        *counts.entry(p.assigned.clone()).or_insert(0) += 1;
    }
    let n = congruent.len();
    Ok(TreatmentShares {
        shares: counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 / n as f64))
            .collect(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_data::PatientRecord;

    fn ids(names: &[&str]) -> Vec<TreatmentId> {
        names.iter().map(|n| TreatmentId::new(*n)).collect()
    }

    fn risks(pairs: &[(&str, f64)]) -> BTreeMap<TreatmentId, f64> {
        pairs.iter().map(|(t, r)| (TreatmentId::new(*t), *r)).collect()
    }

    fn thresholds(pairs: &[(&str, f64)]) -> ThresholdVector {
        ThresholdVector::new(&"placebo".into(), pairs.iter().map(|(t, v)| (TreatmentId::new(*t), *v))).unwrap()
    }

    #[test]
    fn table_one_recommends_dimethyl_fumarate() {
        let r = risks(&[("placebo", 0.75), ("ga", 0.60), ("df", 0.52), ("n", 0.44)]);
        let t = thresholds(&[("ga", 0.19), ("df", 0.19), ("n", 0.28)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "df");
    }

    #[test]
    fn equal_risks_give_control() {
        let r = risks(&[("placebo", 0.4), ("a", 0.4), ("b", 0.4)]);
        let t = thresholds(&[("a", 0.05), ("b", 0.0)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "placebo");
    }

    #[test]
    fn larger_margin_wins() {
        let r = risks(&[("placebo", 0.5), ("a", 0.3), ("b", 0.35)]);
        let t = thresholds(&[("a", 0.1), ("b", 0.1)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "a");
    }

    #[test]
    fn ties_prefer_smaller_threshold_then_id() {
        // dyadic inputs: both margins are exactly 0.125
        let r = risks(&[("placebo", 0.5), ("a", 0.25), ("b", 0.375)]);
        let t = thresholds(&[("a", 0.125), ("b", 0.0)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "b");
        let r = risks(&[("placebo", 0.5), ("y", 0.25), ("x", 0.25)]);
        let t = thresholds(&[("x", 0.125), ("y", 0.125)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "x");
    }

    #[test]
    fn zero_margin_is_eligible() {
        let r = risks(&[("placebo", 0.5), ("a", 0.25)]);
        let t = thresholds(&[("a", 0.25)]);
        assert_eq!(recommend_treatment(&r, &t, &"placebo".into()).unwrap().as_str(), "a");
    }

    #[test]
    fn missing_risk_is_argument_error() {
        let r = risks(&[("placebo", 0.5)]);
        let t = thresholds(&[("a", 0.25)]);
        assert!(matches!(recommend_treatment(&r, &t, &"placebo".into()), Err(Error::Argument(_))));
    }

    #[test]
    fn threshold_vector_rules() {
        assert!(ThresholdVector::new(&"p".into(), [(TreatmentId::new("a"), 1.5)]).is_err());
        assert!(ThresholdVector::new(&"p".into(), [(TreatmentId::new("p"), 0.1)]).is_err());
        let t = ThresholdVector::new(&"p".into(), [(TreatmentId::new("a"), 0.2)]).unwrap();
        assert_eq!(t.get(&"p".into()), Some(0.0));
        assert!(t.require(&ids(&["p", "a", "b"])).is_err());
        assert_eq!(t.with(&"a".into(), 0.3).unwrap().get(&"a".into()), Some(0.3));
    }

    #[test]
    fn strategy_labels_round_trip() {
        for s in [Strategy::TreatNone, Strategy::TreatAll("dimethyl_fumarate".into()), Strategy::ModelBased] {
            assert_eq!(s.label().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    fn dataset(rows: &[(&str, &str, [f64; 3])]) -> PatientDataset {
        PatientDataset::new(
            ids(&["placebo", "a", "b"]),
            "placebo".into(),
            rows.iter()
                .enumerate()
                .map(|(i, (study, assigned, r))| PatientRecord {
                    patient_id: format!("p{i}"),
                    study_id: study.to_string(),
                    assigned: TreatmentId::new(*assigned),
                    event: i % 2 == 0,
                    risks: r.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn congruence_filters() {
        let d = dataset(&[
            ("S1", "placebo", [0.5, 0.2, 0.45]),
            ("S1", "a", [0.5, 0.2, 0.45]),
            ("S1", "b", [0.5, 0.45, 0.2]),
            ("S1", "placebo", [0.1, 0.09, 0.09]),
        ]);
        let t = ThresholdVector::new(&"placebo".into(), [("a".into(), 0.1), ("b".into(), 0.1)]).unwrap();
        let c = congruent_subset(&d, &Strategy::ModelBased, &t).unwrap();
        let got: Vec<&str> = c.patients().iter().map(|p| p.patient_id.as_str()).collect();
        assert_eq!(got, vec!["p1", "p2", "p3"]);

        let none = congruent_subset(&d, &Strategy::TreatAll("zzz".into()), &t).unwrap();
        assert!(none.is_empty());

        let strict = ThresholdVector::new(&"placebo".into(), [("a".into(), 1.0), ("b".into(), 1.0)]).unwrap();
        let c = congruent_subset(&d, &Strategy::ModelBased, &strict).unwrap();
        assert!(c.patients().iter().all(|p| p.assigned.as_str() == "placebo"));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn shares_count_assignments() {
        let d = dataset(&[
            ("S1", "a", [0.5, 0.2, 0.45]),
            ("S1", "a", [0.5, 0.2, 0.45]),
            ("S1", "b", [0.5, 0.45, 0.2]),
            ("S1", "b", [0.1, 0.09, 0.09]),
        ]);
        let s = treatment_shares(&d, d.treatments()).unwrap();
        assert_eq!(s.get(&"a".into()), 0.5);
        assert_eq!(s.get(&"b".into()), 0.5);
        assert_eq!(s.get(&"placebo".into()), 0.0);

        let one = d.subset(&[0, 1]);
        let s = treatment_shares(&one, d.treatments()).unwrap();
        assert_eq!(s.get(&"a".into()), 1.0);

        let empty = d.subset(&[]);
        let err = treatment_shares(&empty, d.treatments()).unwrap_err();
        assert!(err.to_string().contains("congruent dataset empty"));
    }
}
