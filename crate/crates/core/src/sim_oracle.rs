//! Synthetic trial networks with known counterfactual risks.
//!
//! Every simulated patient has a baseline score and a true event risk under
//! every treatment, so the net benefit of any strategy can be computed
//! exactly and compared with what the estimation pipeline recovers from the
//! observed trial data alone.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::format::sig6;
use crate::strategy::{Recommender, Strategy, ThresholdVector};
use crate::trial_data::{PatientDataset, PatientRecord, TreatmentId};

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `risk = expit(intercept + slope * logit(score))`; intercept 0 and slope 1
/// return the score itself.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct LogisticRisk {
    pub intercept: f64,
    pub slope: f64,
}

impl LogisticRisk {
    pub fn risk(&self, score: f64) -> f64 {
        expit(self.intercept + self.slope * logit(score))
    }
}

/// How the emitted predicted risks relate to the true ones.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Perfect,
    /// `predicted = expit(shift + scale * logit(true))`.
    Miscalibrated { shift: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StudyDesign {
    pub id: String,
    pub arms: Vec<TreatmentId>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub control: TreatmentId,
    pub studies: Vec<StudyDesign>,
    pub patients_per_arm: usize,
    pub risk_model: BTreeMap<TreatmentId, LogisticRisk>,
    /// Beta(alpha, beta) distribution of the baseline score.
    pub score_alpha: f64,
    pub score_beta: f64,
    #[serde(default)]
    pub regime: Regime,
}

impl SimConfig {
    /// Three studies shaped like a typical relapsing-remitting MS network:
    /// two placebo-controlled trials and one three-arm trial. Risk curves
    /// are monotone in the score; those of `df` and `n` cross at 0.25.
    pub fn rrms_like(seed: u64, patients_per_arm: usize) -> Self {
        let t = TreatmentId::new;
        SimConfig {
            seed,
            control: t("placebo"),
            studies: vec![
                StudyDesign { id: "S1".into(), arms: vec![t("placebo"), t("n")] },
                StudyDesign { id: "S2".into(), arms: vec![t("placebo"), t("df")] },
                StudyDesign { id: "S3".into(), arms: vec![t("placebo"), t("df"), t("ga")] },
            ],
            patients_per_arm,
            risk_model: BTreeMap::from([
                (t("placebo"), LogisticRisk { intercept: 0.0, slope: 1.0 }),
                (t("ga"), LogisticRisk { intercept: -0.5, slope: 1.0 }),
                (t("df"), LogisticRisk { intercept: -1.0, slope: 1.0 }),
                (t("n"), LogisticRisk { intercept: -1.3296, slope: 0.7 }),
            ]),
            score_alpha: 6.0,
            score_beta: 4.0,
            regime: Regime::Perfect,
        }
    }

    /// Control first, then treatments in order of first appearance.
    pub fn treatments(&self) -> Vec<TreatmentId> {
        let mut out = vec![self.control.clone()];
        for s in &self.studies {
            for a in &s.arms {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.studies.is_empty() {
            return bad("simulation needs at least one study".into());
        }
        if self.patients_per_arm == 0 {
            return bad("patients_per_arm must be positive".into());
        }
        if !(self.score_alpha > 0.0 && self.score_beta > 0.0 && self.score_alpha.is_finite() && self.score_beta.is_finite()) {
            return bad("score distribution parameters must be positive".into());
        }
        for s in &self.studies {
            if s.arms.is_empty() {
                return bad(format!("study {} has no arms", s.id));
            }
            for (i, a) in s.arms.iter().enumerate() {
                if s.arms[..i].contains(a) {
                    return bad(format!("study {} lists {a} twice", s.id));
                }
            }
        }
        for t in self.treatments() {
            let Some(m) = self.risk_model.get(&t) else {
                return bad(format!("no risk model for treatment {t}"));
            };
            if !(m.intercept.is_finite() && m.slope.is_finite()) {
                return bad(format!("risk model for {t} is not finite"));
            }
        }
        if let Regime::Miscalibrated { shift, scale } = self.regime {
            if !(shift.is_finite() && scale.is_finite()) {
                return bad("miscalibration parameters must be finite".into());
            }
        }
        Ok(())
    }
}

/// One simulated patient. Risks are aligned with
/// [`Counterfactuals::treatments`].
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualRecord {
    pub patient_id: String,
    pub study_id: String,
    pub assigned: TreatmentId,
    pub baseline_score: f64,
    pub true_risk: Vec<f64>,
    /// What the prediction model reports; equal to `true_risk` in the
    /// perfect regime.
    pub predicted_risk: Vec<f64>,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactuals {
    pub treatments: Vec<TreatmentId>,
    pub control: TreatmentId,
    pub records: Vec<CounterfactualRecord>,
}

impl Counterfactuals {
    pub fn index_of(&self, t: &TreatmentId) -> Option<usize> {
        self.treatments.iter().position(|x| x == t)
    }

    /// `patient_id,true_risk_<treatment>...`
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("patient_id");
        for t in &self.treatments {
            out.push_str(&format!(",true_risk_{t}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.patient_id);
            for v in &r.true_risk {
                out.push(',');
                out.push_str(&sig6(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn check_probability(p: f64, what: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::Config(format!("{what} produced risk {p} outside [0,1]")))
    }
}

/// Simulates the trial network. Arms within a study are block-randomized,
/// so each arm gets exactly `patients_per_arm` patients.
pub fn simulate_trials(config: &SimConfig) -> Result<(PatientDataset, Counterfactuals)> {
    config.validate()?;
    let treatments = config.treatments();
    let models: Vec<LogisticRisk> = treatments.iter().map(|t| config.risk_model[t]).collect();
    let score_dist = Beta::new(config.score_alpha, config.score_beta)
        .map_err(|e| Error::Config(format!("score distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut records = Vec::new();
    for study in &config.studies {
        let mut allocation: Vec<&TreatmentId> = study
            .arms
            .iter()
            .flat_map(|a| std::iter::repeat_n(a, config.patients_per_arm))
            .collect();
        allocation.shuffle(&mut rng);
        for (k, assigned) in allocation.into_iter().enumerate() {
            // Keep logit(score) finite.
            let score = score_dist.sample(&mut rng).clamp(1e-12, 1.0 - 1e-12);
            let true_risk: Vec<f64> = models
                .iter()
                .zip(&treatments)
                .map(|(m, t)| check_probability(m.risk(score), &format!("risk model for {t}")))
                .collect::<Result<_>>()?;
            let predicted_risk = match config.regime {
                Regime::Perfect => true_risk.clone(),
                Regime::Miscalibrated { shift, scale } => true_risk
                    .iter()
                    .map(|&r| {
                        let r = r.clamp(1e-12, 1.0 - 1e-12);
                        check_probability(expit(shift + scale * logit(r)), "miscalibration")
                    })
                    .collect::<Result<_>>()?,
            };
            let a = treatments.iter().position(|t| t == assigned).expect("arm is a treatment");
            let event = rng.random::<f64>() < true_risk[a];
            records.push(CounterfactualRecord {
                patient_id: format!("{}-{:06}", study.id, k + 1),
                study_id: study.id.clone(),
                assigned: assigned.clone(),
                baseline_score: score,
                true_risk,
                predicted_risk,
                event,
            });
        }
    }

    let patients = PatientDataset::new(
        treatments.clone(),
        config.control.clone(),
        records
            .iter()
            .map(|r| PatientRecord {
                patient_id: r.patient_id.clone(),
                study_id: r.study_id.clone(),
                assigned: r.assigned.clone(),
                event: r.event,
                risks: r.predicted_risk.clone(),
            })
            .collect(),
    )?;
    Ok((
        patients,
        Counterfactuals {
            treatments,
            control: config.control.clone(),
            records,
        },
    ))
}

/// Exact net benefit from known counterfactual risks: recommendations use
/// the predicted risks, outcomes the true ones, and no congruence filtering
/// is needed.
pub fn true_net_benefit(cf: &Counterfactuals, strategy: &Strategy, thresholds: &ThresholdVector) -> Result<f64> {
    if cf.records.is_empty() {
        return Err(Error::Argument("no counterfactual records".into()));
    }
    thresholds.require(&cf.treatments)?;
    let control = cf
        .index_of(&cf.control)
        .ok_or_else(|| Error::Argument(format!("control {} has no risks", cf.control)))?;
    let n = cf.records.len() as f64;
    let t_of: Vec<f64> = cf
        .treatments
        .iter()
        .map(|t| if *t == cf.control { 0.0 } else { thresholds.get(t).unwrap_or(0.0) })
        .collect();

    let picks: Vec<usize> = match strategy {
        Strategy::TreatNone => vec![control; cf.records.len()],
        Strategy::TreatAll(x) => {
            let i = cf
                .index_of(x)
                .ok_or_else(|| Error::Argument(format!("unknown treatment {x}")))?;
            vec![i; cf.records.len()]
        }
        Strategy::ModelBased => {
            let rec = Recommender::new(&cf.treatments, &cf.control, thresholds)?;
            cf.records.iter().map(|r| rec.recommend(&r.predicted_risk)).collect()
        }
    };

    let eps0 = cf.records.iter().map(|r| r.true_risk[control]).sum::<f64>() / n;
    let eps_s = cf.records.iter().zip(&picks).map(|(r, &j)| r.true_risk[j]).sum::<f64>() / n;
    let mut counts = vec![0usize; cf.treatments.len()];
    picks.iter().for_each(|&j| counts[j] += 1);
    let cost: f64 = counts.iter().zip(&t_of).map(|(&c, t)| c as f64 / n * t).sum();
    Ok(eps0 - eps_s - cost)
}
