//! Published intermediate quantities supplied in place of estimation.
//!
//! Useful when only summary numbers are available (the control event rate,
//! risk ratios, treatment shares) but not the underlying patient data. The
//! file is a three-column CSV:
//!
//! ```text
//! #control=placebo
//! quantity,treatment,value
//! eps0,,0.53
//! rr,natalizumab,0.52
//! model_share,natalizumab,0.353
//! model_reference_rate,placebo,0.75
//! model_rr,natalizumab,0.40
//! model_n,,652
//! ```
//!
//! `rr` is relative to the control over all trials; `model_rr` is relative
//! to the treatment named on the `model_reference_rate` row within the
//! congruent dataset of the model strategy.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trial_data::TreatmentId;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intermediates {
    pub control: Option<TreatmentId>,
    pub eps0: Option<f64>,
    pub rr: BTreeMap<TreatmentId, f64>,
    pub model_shares: BTreeMap<TreatmentId, f64>,
    pub model_reference: Option<(TreatmentId, f64)>,
    pub model_rr: BTreeMap<TreatmentId, f64>,
    pub model_n: Option<usize>,
}

impl Intermediates {
    pub fn has_model(&self) -> bool {
        !self.model_shares.is_empty()
    }

    pub fn treatments(&self) -> Vec<TreatmentId> {
        let mut out: Vec<TreatmentId> = Vec::new();
        let mut push = |t: &TreatmentId| {
            if !out.contains(t) {
                out.push(t.clone());
            }
        };
        if let Some(c) = &self.control {
            push(c);
        }
        self.rr.keys().for_each(&mut push);
        self.model_shares.keys().for_each(&mut push);
        if let Some((t, _)) = &self.model_reference {
            push(t);
        }
        self.model_rr.keys().for_each(&mut push);
        out
    }
}

pub fn parse_intermediates_csv(text: &str, control: Option<&TreatmentId>) -> Result<Intermediates> {
    let mut out = Intermediates {
        control: control.cloned(),
        ..Default::default()
    };
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim().trim_start_matches('\u{feff}');
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix("#control=") {
            if out.control.is_none() {
                out.control = Some(TreatmentId::new(c.trim()));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields != ["quantity", "treatment", "value"] {
                return Err(Error::Schema(format!(
                    "expected header 'quantity,treatment,value', found '{line}'"
                )));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("value '{}' is not a number", fields[2]),
        })?;
        let treatment = || -> Result<TreatmentId> {
            if fields[1].is_empty() {
                Err(Error::Parse {
                    line: line_no,
                    message: format!("{} needs a treatment", fields[0]),
                })
            } else {
                Ok(TreatmentId::new(fields[1]))
            }
        };
        let probability = |v: f64| -> Result<f64> {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(Error::Validation(format!("line {line_no}: {v} outside [0,1]")))
            }
        };
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Validation(format!("line {line_no}: risk ratio {v} must be positive")))
            }
        };
        match fields[0] {
            "eps0" => out.eps0 = Some(probability(value)?),
            "rr" => {
                out.rr.insert(treatment()?, positive(value)?);
            }
            "model_share" => {
                out.model_shares.insert(treatment()?, probability(value)?);
            }
            "model_reference_rate" => out.model_reference = Some((treatment()?, probability(value)?)),
            "model_rr" => {
                out.model_rr.insert(treatment()?, positive(value)?);
            }
            "model_n" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Validation(format!("line {line_no}: model_n must be a count")));
                }
                out.model_n = Some(value as usize);
            }
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown quantity '{other}'"),
                })
            }
        }
    }
    if !header_seen {
        return Err(Error::Schema("missing header 'quantity,treatment,value'".into()));
    }
    if out.control.is_none() {
        return Err(Error::Config("no control treatment designated for intermediates".into()));
    }
    if out.has_model() && out.model_reference.is_none() {
        return Err(Error::Schema("model_share rows need a model_reference_rate row".into()));
    }
    Ok(out)
}

pub fn load_intermediates(path: &Path, control: Option<&TreatmentId>) -> Result<Intermediates> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intermediates_csv(&text, control)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_quantities() {
        let text = "#control=placebo\nquantity,treatment,value\neps0,,0.53\nrr,n,0.52\nmodel_share,n,1\nmodel_reference_rate,placebo,0.75\nmodel_rr,n,0.4\nmodel_n,,652\n";
        let i = parse_intermediates_csv(text, None).unwrap();
        assert_eq!(i.eps0, Some(0.53));
        assert_eq!(i.rr[&TreatmentId::new("n")], 0.52);
        assert_eq!(i.model_n, Some(652));
        assert_eq!(i.treatments().len(), 2);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_intermediates_csv("#control=p\nquantity,treatment,value\neps0,,1.5\n", None).is_err());
        assert!(parse_intermediates_csv("#control=p\nquantity,treatment,value\nrr,,0.5\n", None).is_err());
        assert!(parse_intermediates_csv("#control=p\nquantity,treatment,value\nfoo,a,0.5\n", None).is_err());
        assert!(parse_intermediates_csv("quantity,treatment,value\neps0,,0.5\n", None).is_err());
        assert!(parse_intermediates_csv("#control=p\nquantity,treatment,value\nmodel_share,p,1\n", None).is_err());
    }
}
