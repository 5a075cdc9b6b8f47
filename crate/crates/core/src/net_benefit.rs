//! Strategy-specific event-rate estimation and net benefit.
//!
//! Net benefit of a strategy `s` against treating nobody is
//!
//! ```text
//! NB_s = ε0 - Σ_j π_sj ε_sj - Σ_j π_sj T_j
//! ```
//!
//! where `ε0` is the control event rate over all trials, `π_sj` the share of
//! patients on treatment `j` under `s`, `ε_sj` their event rate and `T_j` the
//! treatment's threshold (zero for the control).
//!
//! Event rates are estimated without ever pooling raw arms across trials:
//! proportions are meta-analysed and relative effects come from within-trial
//! contrasts.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::intermediates::Intermediates;
use crate::strategy::{congruent_indices, treatment_shares, Strategy, ThresholdVector, TreatmentShares};
use crate::synthesis::{nma_pooled_rr, pool_event_rate, PooledRate, SynthesisOptions};
use crate::trial_data::{aggregate_to_arms, check_connectivity, PatientDataset, TreatmentId, TrialDataset};

/// Which estimation route produced the strategy's event rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimationCase {
    /// Congruent data from one trial: observed proportions.
    SingleRct,
    /// Pooled control rate times network risk ratios versus control.
    NmaWithControl,
    /// No control arm in the congruent data: another treatment serves as
    /// reference.
    NmaAltReference,
    /// Only one treatment in the congruent data: its arms are pooled directly.
    SingleTreatmentPool,
    /// Treat everyone with one drug: `ε0 × RR` from all trials.
    TreatAll,
    TreatNone,
}

impl EstimationCase {
    pub fn label(&self) -> &'static str {
        match self {
            EstimationCase::SingleRct => "single_rct",
            EstimationCase::NmaWithControl => "nma_with_control",
            EstimationCase::NmaAltReference => "nma_alt_reference",
            EstimationCase::SingleTreatmentPool => "single_treatment_pool",
            EstimationCase::TreatAll => "treat_all",
            EstimationCase::TreatNone => "treat_none",
        }
    }
}

impl fmt::Display for EstimationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRateBundle {
    pub eps0: f64,
    /// Pooling details behind `eps0`, absent when it was supplied directly.
    pub eps0_pool: Option<PooledRate>,
    pub per_treatment: BTreeMap<TreatmentId, f64>,
    pub case_used: EstimationCase,
    pub reference_used: TreatmentId,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetBenefitResult {
    pub strategy: Strategy,
    pub nb: f64,
    pub eps0: f64,
    /// Share-weighted event rate under the strategy.
    pub eps_s: f64,
    pub rates: BTreeMap<TreatmentId, f64>,
    pub shares: TreatmentShares,
    pub thresholds: ThresholdVector,
    pub case_used: EstimationCase,
    pub reference_used: TreatmentId,
    /// Size of the congruent dataset (model-based strategies only).
    pub congruent_n: Option<usize>,
    pub diagnostics: Vec<String>,
}

/// Control event rate over all trials: the observed proportion when there is
/// a single trial, otherwise a meta-analysis of the control arms.
pub fn estimate_eps0(data: &TrialDataset, opts: &SynthesisOptions) -> Result<PooledRate> {
    let control = data.control();
    let arms: Vec<(u64, u64)> = data.arms_of(control).map(|a| (a.events, a.total)).collect();
    if arms.is_empty() {
        return Err(Error::Estimation(format!("no {control} arm in the data")));
    }
    if data.n_studies() == 1 {
        let (e, n) = arms[0];
        let mut single = pool_event_rate(&arms, opts)?;
        single.estimate = e as f64 / n as f64;
        return Ok(single);
    }
    pool_event_rate(&arms, opts)
}

fn clamp_rate(t: &TreatmentId, rate: f64, diagnostics: &mut Vec<String>) -> f64 {
    if rate > 1.0 {
        diagnostics.push(format!("event rate for {t} estimated at {rate:.6}; clamped to 1"));
        1.0
    } else {
        rate.max(0.0)
    }
}

/// Per-treatment rates, the case used, the reference and diagnostics.
pub type CongruentRates = (BTreeMap<TreatmentId, f64>, EstimationCase, TreatmentId, Vec<String>);

/// Event rates for the treatments present in a model strategy's congruent
/// dataset.
pub fn congruent_event_rates(congruent: &TrialDataset, opts: &SynthesisOptions) -> Result<CongruentRates> {
    if congruent.is_empty() {
        return Err(Error::NotEstimable("congruent dataset empty".into()));
    }
    let control = congruent.control();
    let present = congruent.treatments();
    let mut diagnostics = Vec::new();

    if congruent.n_studies() == 1 {
        let rates = congruent
            .arms()
            .iter()
            .map(|a| (a.treatment.clone(), a.proportion()))
            .collect();
        let reference = if present.contains(control) { control.clone() } else { present[0].clone() };
        return Ok((rates, EstimationCase::SingleRct, reference, diagnostics));
    }

    if present.len() == 1 {
        let only = &present[0];
        let arms: Vec<(u64, u64)> = congruent.arms_of(only).map(|a| (a.events, a.total)).collect();
        let rate = pool_event_rate(&arms, opts)?.estimate;
        return Ok((
            BTreeMap::from([(only.clone(), rate)]),
            EstimationCase::SingleTreatmentPool,
            only.clone(),
            diagnostics,
        ));
    }

    let multi = congruent.multi_arm_only();
    if multi.is_empty() {
        return Err(Error::NotEstimable(
            "congruent dataset has only single-arm studies".into(),
        ));
    }
    let conn = check_connectivity(&multi);
    let first = conn.component_of(&present[0]);
    let stranded: Vec<&str> = present
        .iter()
        .filter(|t| first.is_none() || conn.component_of(t) != first)
        .map(|t| t.as_str())
        .collect();
    if !stranded.is_empty() {
        return Err(Error::NotEstimable(format!(
            "treatments not connected through multi-arm congruent studies: {}",
            stranded.join(", ")
        )));
    }

    let (reference, case) = if present.contains(control) {
        (control.clone(), EstimationCase::NmaWithControl)
    } else {
        let counts = congruent.patients_per_treatment();
        let x = present
            .iter()
            .max_by(|a, b| counts[*a].cmp(&counts[*b]).then_with(|| b.cmp(a)))
            .expect("at least two treatments present")
            .clone();
        (x, EstimationCase::NmaAltReference)
    };
    let ref_arms: Vec<(u64, u64)> = congruent.arms_of(&reference).map(|a| (a.events, a.total)).collect();
    let ref_rate = pool_event_rate(&ref_arms, opts)?.estimate;
    let effects = nma_pooled_rr(&multi, &reference, opts)?;
    let mut rates = BTreeMap::new();
    for t in &present {
        let rr = effects.rr(t).expect("connected treatment has an estimate");
        rates.insert(t.clone(), clamp_rate(t, ref_rate * rr, &mut diagnostics));
    }
    Ok((rates, case, reference, diagnostics))
}

/// Event rates behind a strategy, estimated from scratch.
///
/// `congruent` is the arm-level congruent dataset and is required for the
/// model-based strategy only.
pub fn strategy_event_rates(
    data: &TrialDataset,
    strategy: &Strategy,
    congruent: Option<&TrialDataset>,
    opts: &SynthesisOptions,
) -> Result<EventRateBundle> {
    let pool = estimate_eps0(data, opts)?;
    let eps0 = pool.estimate;
    let control = data.control().clone();
    let mut diagnostics = Vec::new();
    let (per_treatment, case_used, reference_used) = match strategy {
        Strategy::TreatNone => (
            BTreeMap::from([(control.clone(), eps0)]),
            EstimationCase::TreatNone,
            control,
        ),
        Strategy::TreatAll(x) => {
            let rate = if *x == control {
                eps0
            } else {
                let effects = nma_pooled_rr(data, &control, opts)?;
                let rr = effects
                    .rr(x)
                    .ok_or_else(|| Error::Argument(format!("treatment {x} is not in the data")))?;
                clamp_rate(x, eps0 * rr, &mut diagnostics)
            };
            (BTreeMap::from([(x.clone(), rate)]), EstimationCase::TreatAll, control)
        }
        Strategy::ModelBased => {
            let congruent = congruent.ok_or_else(|| {
                Error::Argument("model-based strategy needs the congruent dataset".into())
            })?;
            let (rates, case, reference, diag) = congruent_event_rates(congruent, opts)?;
            diagnostics = diag;
            (rates, case, reference)
        }
    };
    Ok(EventRateBundle {
        eps0,
        eps0_pool: Some(pool),
        per_treatment,
        case_used,
        reference_used,
        diagnostics,
    })
}

/// Net benefit of `strategy` from estimated rates and shares. For treat-all
/// strategies the shares are fixed by the strategy (everyone on one drug).
pub fn net_benefit(
    strategy: &Strategy,
    eps0: f64,
    rates: &EventRateBundle,
    shares: &TreatmentShares,
    thresholds: &ThresholdVector,
) -> Result<NetBenefitResult> {
    let control = thresholds.control().clone();
    let (shares, nb, eps_s, congruent_n) = match strategy {
        Strategy::TreatNone => {
            let keys: Vec<TreatmentId> = shares.shares.keys().cloned().collect();
            (TreatmentShares::all_on(&control, &keys), 0.0, eps0, None)
        }
        _ => {
            let shares = match strategy {
                Strategy::TreatAll(x) => {
                    let keys: Vec<TreatmentId> = shares.shares.keys().cloned().collect();
                    TreatmentShares::all_on(x, &keys)
                }
                _ => shares.clone(),
            };
            let mut eps_s = 0.0;
            let mut burden = 0.0;
            for (t, share) in shares.positive() {
                let rate = rates.per_treatment.get(t).ok_or_else(|| {
                    Error::Estimation(format!("share {share} on {t} but no estimable event rate"))
                })?;
                let threshold = thresholds
                    .get(t)
                    .ok_or_else(|| Error::Argument(format!("no threshold for {t}")))?;
                eps_s += share * rate;
                burden += share * threshold;
            }
            let n = match strategy {
                Strategy::ModelBased => Some(shares.n),
                _ => None,
            };
            (shares, eps0 - eps_s - burden, eps_s, n)
        }
    };
    Ok(NetBenefitResult {
        strategy: strategy.clone(),
        nb,
        eps0,
        eps_s,
        rates: rates.per_treatment.clone(),
        shares,
        thresholds: thresholds.clone(),
        case_used: rates.case_used,
        reference_used: rates.reference_used.clone(),
        congruent_n,
        diagnostics: rates.diagnostics.clone(),
    })
}

/// Events avoided by strategy `w` relative to `m` at equal treatment burden.
pub fn nb_difference(w: &NetBenefitResult, m: &NetBenefitResult) -> Result<f64> {
    if w.thresholds != m.thresholds {
        return Err(Error::Argument(
            "net benefits were computed under different thresholds".into(),
        ));
    }
    Ok(w.nb - m.nb)
}

/// Rates and shares of the model strategy for one congruent dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelComponents {
    pub rates: EventRateBundle,
    pub shares: TreatmentShares,
}

/// Evaluates strategies against fixed inputs, computing the full-data
/// quantities (control rate, network risk ratios) once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    control: TreatmentId,
    treatments: Vec<TreatmentId>,
    patients: Option<&'a PatientDataset>,
    overrides: Option<&'a Intermediates>,
    opts: SynthesisOptions,
    eps0: Result<f64>,
    eps0_pool: Option<PooledRate>,
    /// Risk ratio versus control over all trials.
    full_rr: Result<BTreeMap<TreatmentId, f64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        data: Option<&'a TrialDataset>,
        patients: Option<&'a PatientDataset>,
        overrides: Option<&'a Intermediates>,
        opts: SynthesisOptions,
    ) -> Result<Self> {
        let controls: Vec<&TreatmentId> = [
            data.map(|d| d.control()),
            patients.map(|p| p.control()),
            overrides.and_then(|o| o.control.as_ref()),
        ]
        .into_iter()
        .flatten()
        .collect();
        let control = (*controls
            .first()
            .ok_or_else(|| Error::Config("no input data or intermediates given".into()))?)
        .clone();
        if let Some(other) = controls.iter().find(|c| ***c != control) {
            return Err(Error::Config(format!(
                "inputs disagree on the control: {control} vs {other}"
            )));
        }

        let mut treatments: Vec<TreatmentId> = vec![control.clone()];
        let mut add = |ts: &[TreatmentId]| {
            for t in ts {
                if !treatments.contains(t) {
                    treatments.push(t.clone());
                }
            }
        };
        if let Some(p) = patients {
            add(p.treatments());
        }
        if let Some(d) = data {
            add(&d.treatments());
        }
        if let Some(o) = overrides {
            add(&o.treatments());
        }

        let (eps0, eps0_pool) = match (overrides.and_then(|o| o.eps0), data) {
            (Some(v), _) => (Ok(v), None),
            (None, Some(d)) => match estimate_eps0(d, &opts) {
                Ok(p) => (Ok(p.estimate), Some(p)),
                Err(e) => (Err(e), None),
            },
            (None, None) => (
                Err(Error::Config("control event rate needs arm data or an eps0 override".into())),
                None,
            ),
        };

        let overridden: BTreeMap<TreatmentId, f64> = overrides.map(|o| o.rr.clone()).unwrap_or_default();
        let full_rr = match data {
            Some(d) if treatments.iter().any(|t| *t != control && !overridden.contains_key(t)) => {
                nma_pooled_rr(d, &control, &opts).map(|e| {
                    let mut rr: BTreeMap<TreatmentId, f64> =
                        e.log_rr.iter().map(|(t, l)| (t.clone(), l.exp())).collect();
                    rr.extend(overridden.clone());
                    rr
                })
            }
            _ => Ok(overridden),
        };

        Ok(Evaluator {
            control,
            treatments,
            patients,
            overrides,
            opts,
            eps0,
            eps0_pool,
            full_rr,
        })
    }

    pub fn control(&self) -> &TreatmentId {
        &self.control
    }

    /// Control first, then the remaining treatments in input order.
    pub fn treatments(&self) -> &[TreatmentId] {
        &self.treatments
    }

    pub fn patients(&self) -> Option<&'a PatientDataset> {
        self.patients
    }

    pub fn options(&self) -> &SynthesisOptions {
        &self.opts
    }

    pub fn eps0(&self) -> Result<f64> {
        self.eps0.clone()
    }

    pub fn default_strategies(&self) -> Vec<Strategy> {
        Strategy::default_set(&self.treatments, &self.control)
    }

    /// True when model-based rates come from supplied intermediates rather
    /// than patient data.
    pub fn model_overridden(&self) -> bool {
        self.overrides.is_some_and(|o| o.has_model())
    }

    fn bundle(&self, per_treatment: BTreeMap<TreatmentId, f64>, case_used: EstimationCase, reference_used: TreatmentId, diagnostics: Vec<String>) -> Result<EventRateBundle> {
        Ok(EventRateBundle {
            eps0: self.eps0()?,
            eps0_pool: self.eps0_pool,
            per_treatment,
            case_used,
            reference_used,
            diagnostics,
        })
    }

    fn treat_all_rates(&self, x: &TreatmentId) -> Result<EventRateBundle> {
        let eps0 = self.eps0()?;
        if *x == self.control {
            return self.bundle(BTreeMap::from([(x.clone(), eps0)]), EstimationCase::TreatAll, self.control.clone(), vec![]);
        }
        let rr = self.full_rr.clone()?;
        let rr = rr
            .get(x)
            .ok_or_else(|| Error::Estimation(format!("no risk ratio available for {x}")))?;
        let mut diagnostics = Vec::new();
        let rate = clamp_rate(x, eps0 * rr, &mut diagnostics);
        self.bundle(BTreeMap::from([(x.clone(), rate)]), EstimationCase::TreatAll, self.control.clone(), diagnostics)
    }

    fn overridden_model(&self, o: &Intermediates) -> Result<ModelComponents> {
        let (reference, ref_rate) = o
            .model_reference
            .clone()
            .ok_or_else(|| Error::Config("model intermediates lack a reference rate".into()))?;
        let mut shares: BTreeMap<TreatmentId, f64> =
            self.treatments.iter().map(|t| (t.clone(), 0.0)).collect();
        shares.extend(o.model_shares.clone());
        let shares = TreatmentShares::from_proportions(shares, o.model_n.unwrap_or(0))?;
        let mut diagnostics = Vec::new();
        let mut rates = BTreeMap::from([(reference.clone(), ref_rate)]);
        for (t, rr) in &o.model_rr {
            rates.insert(t.clone(), clamp_rate(t, ref_rate * rr, &mut diagnostics));
        }
        let case = if reference == self.control {
            EstimationCase::NmaWithControl
        } else {
            EstimationCase::NmaAltReference
        };
        Ok(ModelComponents {
            rates: self.bundle(rates, case, reference, diagnostics)?,
            shares,
        })
    }

    /// Model-strategy rates and shares for the patients at `congruent`
    /// (indices into the patient dataset).
    pub fn model_components(&self, congruent: &[usize]) -> Result<ModelComponents> {
        if let Some(o) = self.overrides.filter(|o| o.has_model()) {
            return self.overridden_model(o);
        }
        let patients = self
            .patients
            .ok_or_else(|| Error::Config("model-based strategy needs patient data".into()))?;
        if congruent.is_empty() {
            return Err(Error::NotEstimable("congruent dataset empty".into()));
        }
        let subset = patients.subset(congruent);
        let shares = treatment_shares(&subset, &self.treatments)?;
        let arms = aggregate_to_arms(&subset)?;
        let (rates, case, reference, diagnostics) = congruent_event_rates(&arms, &self.opts)?;
        Ok(ModelComponents {
            rates: self.bundle(rates, case, reference, diagnostics)?,
            shares,
        })
    }

    /// Net benefit of the model strategy from precomputed components.
    pub fn model_net_benefit(&self, components: &ModelComponents, thresholds: &ThresholdVector) -> Result<NetBenefitResult> {
        net_benefit(&Strategy::ModelBased, self.eps0()?, &components.rates, &components.shares, thresholds)
    }

    pub fn evaluate(&self, strategy: &Strategy, thresholds: &ThresholdVector) -> Result<NetBenefitResult> {
        if thresholds.control() != &self.control {
            return Err(Error::Argument(format!(
                "thresholds use control {} but the data use {}",
                thresholds.control(),
                self.control
            )));
        }
        thresholds.require(&self.treatments)?;
        let empty = TreatmentShares {
            shares: self.treatments.iter().map(|t| (t.clone(), 0.0)).collect(),
            n: 0,
        };
        match strategy {
            Strategy::TreatNone => {
                let rates = self.bundle(
                    BTreeMap::from([(self.control.clone(), self.eps0()?)]),
                    EstimationCase::TreatNone,
                    self.control.clone(),
                    vec![],
                )?;
                net_benefit(strategy, rates.eps0, &rates, &empty, thresholds)
            }
            Strategy::TreatAll(x) => {
                if !self.treatments.contains(x) {
                    return Err(Error::Argument(format!("unknown treatment {x}")));
                }
                let rates = self.treat_all_rates(x)?;
                net_benefit(strategy, rates.eps0, &rates, &empty, thresholds)
            }
            Strategy::ModelBased => {
                let indices = match (self.model_overridden(), self.patients) {
                    (true, _) => Vec::new(),
                    (false, Some(p)) => congruent_indices(p, strategy, thresholds)?,
                    (false, None) => {
                        return Err(Error::Config("model-based strategy needs patient data".into()))
                    }
                };
                let components = self.model_components(&indices)?;
                self.model_net_benefit(&components, thresholds)
            }
        }
    }
}
