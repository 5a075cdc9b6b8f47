//! Arm-level and patient-level trial data: types, CSV ingestion, validation,
//! aggregation and network connectivity.
//!
//! Arm-level files look like
//!
//! ```text
//! #control=placebo
//! study,treatment,events,total
//! AFFIRM,placebo,120,300
//! AFFIRM,natalizumab,80,600
//! ```
//!
//! and patient-level files carry one `risk_<treatment>` column per treatment:
//!
//! ```text
//! #control=placebo
//! patient_id,study,assigned,event,risk_placebo,risk_natalizumab
//! p1,AFFIRM,placebo,1,0.61,0.33
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig6;

const CONTROL_DIRECTIVE: &str = "#control=";
const ARM_HEADER: [&str; 4] = ["study", "treatment", "events", "total"];
const PATIENT_HEADER: [&str; 4] = ["patient_id", "study", "assigned", "event"];
const RISK_PREFIX: &str = "risk_";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentId(String);

impl TreatmentId {
    pub fn new(id: impl Into<String>) -> Self {
        TreatmentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TreatmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TreatmentId {
    fn from(s: &str) -> Self {
        TreatmentId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmRecord {
    pub study_id: String,
    pub treatment: TreatmentId,
    pub events: u64,
    pub total: u64,
}

impl ArmRecord {
    pub fn new(study_id: impl Into<String>, treatment: impl Into<TreatmentId>, events: u64, total: u64) -> Self {
        ArmRecord {
            study_id: study_id.into(),
            treatment: treatment.into(),
            events,
            total,
        }
    }

    pub fn proportion(&self) -> f64 {
        self.events as f64 / self.total as f64
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.study_id.is_empty() {
            return Err("empty study id".into());
        }
        if self.treatment.as_str().is_empty() {
            return Err("empty treatment id".into());
        }
        if self.total == 0 {
            return Err(format!(
                "arm ({}, {}) has total = 0",
                self.study_id, self.treatment
            ));
        }
        if self.events > self.total {
            return Err(format!(
                "arm ({}, {}) has events {} > total {}",
                self.study_id, self.treatment, self.events, self.total
            ));
        }
        Ok(())
    }
}

impl From<String> for TreatmentId {
    fn from(s: String) -> Self {
        TreatmentId(s)
    }
}

/// A study and its arms, borrowed from a [`TrialDataset`].
#[derive(Debug, Clone)]
pub struct Study<'a> {
    pub id: &'a str,
    pub arms: Vec<&'a ArmRecord>,
}

/// Arm-level evidence network. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    arms: Vec<ArmRecord>,
    control: TreatmentId,
}

impl TrialDataset {
    pub fn new(arms: Vec<ArmRecord>, control: TreatmentId) -> Result<Self> {
        if control.as_str().is_empty() {
            return Err(Error::Config("control treatment id is empty".into()));
        }
        let mut seen = HashSet::new();
        for arm in &arms {
            arm.check().map_err(Error::Validation)?;
            if !seen.insert((arm.study_id.as_str(), arm.treatment.as_str())) {
                return Err(Error::Validation(format!(
                    "duplicate arm ({}, {})",
                    arm.study_id, arm.treatment
                )));
            }
        }
        Ok(TrialDataset { arms, control })
    }

    pub fn arms(&self) -> &[ArmRecord] {
        &self.arms
    }

    pub fn control(&self) -> &TreatmentId {
        &self.control
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    /// Studies in order of first appearance.
    pub fn studies(&self) -> Vec<Study<'_>> {
        let mut order: Vec<Study<'_>> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for arm in &self.arms {
            let i = *index.entry(arm.study_id.as_str()).or_insert_with(|| {
                order.push(Study {
                    id: arm.study_id.as_str(),
                    arms: Vec::new(),
                });
                order.len() - 1
            });
            order[i].arms.push(arm);
        }
        order
    }

    pub fn n_studies(&self) -> usize {
        self.arms
            .iter()
            .map(|a| a.study_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Treatments present in the arms: control first (if present), then in
    /// order of first appearance.
    pub fn treatments(&self) -> Vec<TreatmentId> {
        let mut out: Vec<TreatmentId> = Vec::new();
        if self.arms.iter().any(|a| a.treatment == self.control) {
            out.push(self.control.clone());
        }
        for arm in &self.arms {
            if !out.contains(&arm.treatment) {
                out.push(arm.treatment.clone());
            }
        }
        out
    }

    pub fn arms_of<'a>(&'a self, treatment: &'a TreatmentId) -> impl Iterator<Item = &'a ArmRecord> + 'a {
        self.arms.iter().filter(move |a| &a.treatment == treatment)
    }

    /// Randomized patients per treatment.
    pub fn patients_per_treatment(&self) -> BTreeMap<TreatmentId, u64> {
        let mut out = BTreeMap::new();
        for arm in &self.arms {
            *out.entry(arm.treatment.clone()).or_insert(0) += arm.total;
        }
        out
    }

    /// Ids of studies contributing a single arm. These are kept in the
    /// dataset but take no part in contrast-based synthesis.
    pub fn single_arm_studies(&self) -> Vec<&str> {
        self.studies()
            .into_iter()
            .filter(|s| s.arms.len() == 1)
            .map(|s| s.id)
            .collect()
    }

    /// The sub-network made of studies with at least two arms.
    pub fn multi_arm_only(&self) -> TrialDataset {
        let keep: HashSet<&str> = self
            .studies()
            .into_iter()
            .filter(|s| s.arms.len() >= 2)
            .map(|s| s.id)
            .collect();
        TrialDataset {
            arms: self
                .arms
                .iter()
                .filter(|a| keep.contains(a.study_id.as_str()))
                .cloned()
                .collect(),
            control: self.control.clone(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{}{}\n{}\n", CONTROL_DIRECTIVE, self.control, ARM_HEADER.join(","));
        for arm in &self.arms {
            out.push_str(&format!(
                "{},{},{},{}\n",
                arm.study_id, arm.treatment, arm.events, arm.total
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::format::write_atomic(path, self.to_csv_string().as_bytes())
    }
}

/// Splits off an optional leading `#control=` directive. Returns the
/// directive value, the remaining text and the number of lines consumed.
fn split_directive(text: &str) -> Result<(Option<TreatmentId>, &str, usize)> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let first_line_end = text.find('\n').map(|i| i + 1).unwrap_or(text.len());
    let first = text[..first_line_end].trim();
    if let Some(rest) = first.strip_prefix(CONTROL_DIRECTIVE) {
        let name = rest.trim();
        if name.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty #control= directive".into(),
            });
        }
        Ok((Some(TreatmentId::new(name)), &text[first_line_end..], 1))
    } else if first.starts_with('#') {
        Err(Error::Parse {
            line: 1,
            message: format!("unknown directive '{first}'"),
        })
    } else {
        Ok((None, text, 0))
    }
}

fn resolve_control(directive: Option<TreatmentId>, flag: Option<&TreatmentId>) -> Result<TreatmentId> {
    match (flag, directive) {
        (Some(f), _) => Ok(f.clone()),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::Config(
            "no control treatment designated (use a #control= directive or --control)".into(),
        )),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord, offset: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0) + offset
}

fn csv_error(e: csv::Error, offset: usize) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0) + offset;
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Parses arm-level CSV text. `control` overrides any `#control=` directive.
pub fn parse_arm_csv(text: &str, control: Option<&TreatmentId>) -> Result<TrialDataset> {
    let (directive, body, offset) = split_directive(text)?;
    let control = resolve_control(directive, control)?;
    let mut reader = csv_reader(body);
    let header = reader.headers().map_err(|e| csv_error(e, offset))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != ARM_HEADER {
        return Err(Error::Schema(format!(
            "expected header '{}', found '{}'",
            ARM_HEADER.join(","),
            found.join(",")
        )));
    }
    let mut arms = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(e, offset))?;
        let line = record_line(&rec, offset);
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let parse_count = |field: &str, name: &str| -> Result<u64> {
            field.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("{name} '{field}' is not a non-negative integer"),
            })
        };
        let arm = ArmRecord::new(
            &rec[0],
            &rec[1],
            parse_count(&rec[2], "events")?,
            parse_count(&rec[3], "total")?,
        );
        arm.check()
            .map_err(|m| Error::Validation(format!("line {line}: {m}")))?;
        let key = (arm.study_id.clone(), arm.treatment.as_str().to_string());
        if let Some(prev) = seen.insert(key, line) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate arm ({}, {}) first seen on line {prev}",
                arm.study_id, arm.treatment
            )));
        }
        arms.push(arm);
    }
    TrialDataset::new(arms, control)
}

pub fn load_arm_data(path: &Path, control: Option<&TreatmentId>) -> Result<TrialDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arm_csv(&text, control)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub study_id: String,
    pub assigned: TreatmentId,
    pub event: bool,
    /// Predicted risk under each treatment, aligned with
    /// [`PatientDataset::treatments`].
    pub risks: Vec<f64>,
}

/// Individual patient records with predicted risks under every treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientDataset {
    treatments: Vec<TreatmentId>,
    control: TreatmentId,
    patients: Vec<PatientRecord>,
    assigned_index: Vec<usize>,
}

impl PatientDataset {
    /// `treatments` fixes the column order of every record's `risks`; it must
    /// include the control.
    pub fn new(treatments: Vec<TreatmentId>, control: TreatmentId, patients: Vec<PatientRecord>) -> Result<Self> {
        let index: HashMap<&TreatmentId, usize> =
            treatments.iter().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != treatments.len() {
            return Err(Error::Schema("duplicate treatment in risk columns".into()));
        }
        if treatments.iter().any(|t| t.as_str().is_empty()) {
            return Err(Error::Schema("empty treatment id".into()));
        }
        if !index.contains_key(&control) {
            return Err(Error::Schema(format!(
                "missing column {RISK_PREFIX}{control} for the control"
            )));
        }
        let mut ids = HashSet::new();
        let mut assigned_index = Vec::with_capacity(patients.len());
        for p in &patients {
            if !ids.insert(p.patient_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate patient_id '{}'",
                    p.patient_id
                )));
            }
            let Some(&a) = index.get(&p.assigned) else {
                return Err(Error::Schema(format!(
                    "missing column {RISK_PREFIX}{} (assigned to patient '{}')",
                    p.assigned, p.patient_id
                )));
            };
            if p.risks.len() != treatments.len() {
                return Err(Error::Schema(format!(
                    "patient '{}' has {} risks for {} treatments",
                    p.patient_id,
                    p.risks.len(),
                    treatments.len()
                )));
            }
            if let Some(r) = p.risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Validation(format!(
                    "patient '{}' has predicted risk {r} outside [0,1]",
                    p.patient_id
                )));
            }
            assigned_index.push(a);
        }
        Ok(PatientDataset {
            treatments,
            control,
            patients,
            assigned_index,
        })
    }

    pub fn treatments(&self) -> &[TreatmentId] {
        &self.treatments
    }

    pub fn control(&self) -> &TreatmentId {
        &self.control
    }

    pub fn control_index(&self) -> usize {
        self.index_of(&self.control).expect("control validated at construction")
    }

    pub fn patients(&self) -> &[PatientRecord] {
        &self.patients
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn index_of(&self, t: &TreatmentId) -> Option<usize> {
        self.treatments.iter().position(|x| x == t)
    }

    /// Index into [`treatments`](Self::treatments) of each patient's
    /// assigned treatment.
    pub fn assigned_indices(&self) -> &[usize] {
        &self.assigned_index
    }

    pub fn risk_map(&self, patient: &PatientRecord) -> BTreeMap<TreatmentId, f64> {
        self.treatments
            .iter()
            .cloned()
            .zip(patient.risks.iter().copied())
            .collect()
    }

    /// Keeps the patients at `indices`, preserving their relative order.
    pub fn subset(&self, indices: &[usize]) -> PatientDataset {
        PatientDataset {
            treatments: self.treatments.clone(),
            control: self.control.clone(),
            patients: indices.iter().map(|&i| self.patients[i].clone()).collect(),
            assigned_index: indices.iter().map(|&i| self.assigned_index[i]).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{}{}\n{}", CONTROL_DIRECTIVE, self.control, PATIENT_HEADER.join(","));
        for t in &self.treatments {
            out.push_str(&format!(",{RISK_PREFIX}{t}"));
        }
        out.push('\n');
        for p in &self.patients {
            out.push_str(&format!(
                "{},{},{},{}",
                p.patient_id,
                p.study_id,
                p.assigned,
                u8::from(p.event)
            ));
            for r in &p.risks {
                out.push(',');
                out.push_str(&sig6(*r));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses patient-level CSV text. `control` overrides any `#control=` directive.
pub fn parse_patient_csv(text: &str, control: Option<&TreatmentId>) -> Result<PatientDataset> {
    let (directive, body, offset) = split_directive(text)?;
    let control = resolve_control(directive, control)?;
    let mut reader = csv_reader(body);
    let header = reader.headers().map_err(|e| csv_error(e, offset))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < PATIENT_HEADER.len() || cols[..PATIENT_HEADER.len()] != PATIENT_HEADER {
        return Err(Error::Schema(format!(
            "expected header starting '{}', found '{}'",
            PATIENT_HEADER.join(","),
            cols.join(",")
        )));
    }
    let mut treatments = Vec::new();
    for c in &cols[PATIENT_HEADER.len()..] {
        match c.strip_prefix(RISK_PREFIX) {
            Some(t) if !t.is_empty() => treatments.push(TreatmentId::new(t)),
            _ => {
                return Err(Error::Schema(format!(
                    "unexpected column '{c}' (risk columns are named {RISK_PREFIX}<treatment>)"
                )))
            }
        }
    }
    // control goes first
    if let Some(i) = treatments.iter().position(|t| *t == control) {
        let c = treatments.remove(i);
        treatments.insert(0, c);
    }
    let column_of: Vec<usize> = treatments
        .iter()
        .map(|t| {
            cols.iter()
                .position(|c| c.strip_prefix(RISK_PREFIX) == Some(t.as_str()))
                .expect("treatment taken from header")
        })
        .collect();

    let mut patients = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    if !treatments.contains(&control) {
        missing.push(format!("{RISK_PREFIX}{control}"));
    }
    let mut seen_ids: HashMap<String, usize> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(e, offset))?;
        let line = record_line(&rec, offset);
        if rec.len() != cols.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.len(), rec.len()),
            });
        }
        let event = match &rec[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("event '{other}' must be 0 or 1"),
                })
            }
        };
        let mut risks = Vec::with_capacity(treatments.len());
        for (t, &c) in treatments.iter().zip(&column_of) {
            let r: f64 = rec[c].parse().map_err(|_| Error::Parse {
                line,
                message: format!("{RISK_PREFIX}{t} '{}' is not a number", &rec[c]),
            })?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Validation(format!(
                    "line {line}: {RISK_PREFIX}{t} = {r} outside [0,1]"
                )));
            }
            risks.push(r);
        }
        let patient_id = rec[0].to_string();
        if let Some(prev) = seen_ids.insert(patient_id.clone(), line) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate patient_id '{patient_id}' first seen on line {prev}"
            )));
        }
        let assigned = TreatmentId::new(&rec[2]);
        if !treatments.contains(&assigned) {
            let col = format!("{RISK_PREFIX}{assigned}");
            if !missing.contains(&col) {
                missing.push(col);
            }
        }
        patients.push(PatientRecord {
            patient_id,
            study_id: rec[1].to_string(),
            assigned,
            event,
            risks,
        });
    }
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing risk column(s): {}", missing.join(", "))));
    }
    PatientDataset::new(treatments, control, patients)
}

pub fn load_patient_data(path: &Path, control: Option<&TreatmentId>) -> Result<PatientDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_patient_csv(&text, control)
}

/// Collapses patients into one arm per (study, assigned treatment), in order
/// of first appearance.
pub fn aggregate_to_arms(patients: &PatientDataset) -> Result<TrialDataset> {
    if patients.is_empty() {
        return Err(Error::Estimation("cannot aggregate an empty patient dataset".into()));
    }
    let mut arms: Vec<ArmRecord> = Vec::new();
    let mut index: HashMap<(&str, usize), usize> = HashMap::new();
    for (p, &a) in patients.patients().iter().zip(patients.assigned_indices()) {
        let i = *index.entry((p.study_id.as_str(), a)).or_insert_with(|| {
            arms.push(ArmRecord::new(p.study_id.as_str(), p.assigned.clone(), 0, 0));
            arms.len() - 1
        });
        arms[i].total += 1;
        arms[i].events += u64::from(p.event);
    }
    TrialDataset::new(arms, patients.control().clone())
}

/// Connected components of the treatment graph, where an edge joins two
/// treatments randomized against each other in some study.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    /// Each component sorted by id; components ordered by their first id.
    pub components: Vec<Vec<TreatmentId>>,
}

impl Connectivity {
    pub fn is_connected(&self) -> bool {
        self.components.len() <= 1
    }

    pub fn component_of(&self, t: &TreatmentId) -> Option<usize> {
        self.components.iter().position(|c| c.contains(t))
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.components
            .iter()
            .map(|c| c.iter().map(|t| t.to_string()).collect())
            .collect()
    }
}

pub fn check_connectivity(data: &TrialDataset) -> Connectivity {
    let mut treatments = data.treatments();
    treatments.sort();
    let index: HashMap<&TreatmentId, usize> =
        treatments.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut uf = UnionFind::<usize>::new(treatments.len());
    for study in data.studies() {
        if let Some((first, rest)) = study.arms.split_first() {
            for arm in rest {
                uf.union(index[&first.treatment], index[&arm.treatment]);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<TreatmentId>> = BTreeMap::new();
    for (i, t) in treatments.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(t.clone());
    }
    let mut components: Vec<Vec<TreatmentId>> = groups.into_values().collect();
    components.sort();
    Connectivity { components }
}
