//! Net-benefit evaluation of personalized treatment-recommendation models
//! against networks of randomized trials.
//!
//! The crate covers the whole pipeline: arm- and patient-level trial data,
//! evidence synthesis (meta-analysis of proportions, pairwise and network
//! meta-analysis of risk ratios), the multi-treatment recommendation rule,
//! strategy-specific event-rate estimation, net benefit, threshold sweeps
//! and a counterfactual simulator used as a ground-truth oracle.
//!
//! ```
//! use netbenefit::strategy::{recommend_treatment, ThresholdVector};
//! use netbenefit::trial_data::TreatmentId;
//! use std::collections::BTreeMap;
//!
//! let control = TreatmentId::new("placebo");
//! let risks: BTreeMap<_, _> = [("placebo", 0.75), ("ga", 0.60), ("df", 0.52), ("n", 0.44)]
//!     .into_iter()
//!     .map(|(t, r)| (TreatmentId::new(t), r))
//!     .collect();
//! let thresholds = ThresholdVector::new(
//!     &control,
//!     [("ga", 0.19), ("df", 0.19), ("n", 0.28)]
//!         .into_iter()
//!         .map(|(t, v)| (TreatmentId::new(t), v)),
//! )
//! .unwrap();
//! let pick = recommend_treatment(&risks, &thresholds, &control).unwrap();
//! assert_eq!(pick.as_str(), "df");
//! ```

pub mod cli;
pub mod dca;
pub mod error;
pub mod format;
pub mod intermediates;
pub mod net_benefit;
pub mod sim_oracle;
pub mod strategy;
pub mod svg;
pub mod synthesis;
pub mod trial_data;

pub use error::{Error, Result};
pub use net_benefit::{EstimationCase, Evaluator, NetBenefitResult};
pub use strategy::{Strategy, ThresholdVector, TreatmentShares};
pub use synthesis::{Model, SynthesisOptions};
pub use trial_data::{ArmRecord, PatientDataset, PatientRecord, TreatmentId, TrialDataset};
