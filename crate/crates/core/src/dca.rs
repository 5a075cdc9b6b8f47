//! Threshold sweeps: decision curves over one threshold axis and best-strategy
//! heat maps over two.
//!
//! Active treatments are split between a primary axis and a shared axis; all
//! treatments on one axis take the same threshold. Cells whose congruent
//! dataset cannot support synthesis are kept and marked not estimable.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::sig6;
use crate::net_benefit::{Evaluator, ModelComponents};
use crate::strategy::{Recommender, Strategy, ThresholdVector};
use crate::trial_data::TreatmentId;

pub const NOT_ESTIMABLE: &str = "NOT_ESTIMABLE";

/// Inclusive grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

pub const DEFAULT_STEP: f64 = 0.01;

impl Axis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi && step > 0.0 && step.is_finite();
        if !ok {
            return Err(Error::Argument(format!(
                "invalid axis {lo}:{hi}:{step} (need 0 <= lo <= hi <= 1, step > 0)"
            )));
        }
        Ok(Axis { lo, hi, step })
    }

    pub fn fixed(value: f64) -> Result<Self> {
        Axis::new(value, value, DEFAULT_STEP)
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }

    /// Grid values, snapped to 1e-12 so that a value is bit-identical
    /// whichever grid it was reached from.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `value`, `lo:hi` or `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Argument(format!("bad axis value '{p}' in '{s}'")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [v] => Axis::fixed(v),
            [lo, hi] => Axis::new(lo, hi, DEFAULT_STEP),
            [lo, hi, step] => Axis::new(lo, hi, step),
            _ => Err(Error::Argument(format!("bad axis '{s}'"))),
        }
    }
}

/// Treatments sharing one threshold, and the range it sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdAxis {
    pub treatments: Vec<TreatmentId>,
    pub range: Axis,
}

impl FromStr for ThresholdAxis {
    type Err = Error;

    /// `a,b=lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let (names, range) = s
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("axis '{s}' must look like treatment[,treatment]=lo:hi[:step]")))?;
        let treatments: Vec<TreatmentId> = names
            .split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(TreatmentId::new)
            .collect();
        if treatments.is_empty() {
            return Err(Error::Argument(format!("axis '{s}' names no treatment")));
        }
        Ok(ThresholdAxis {
            treatments,
            range: range.parse()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub primary: ThresholdAxis,
    pub shared: ThresholdAxis,
    pub strategies: Vec<Strategy>,
}

impl SweepSpec {
    fn check(&self, ev: &Evaluator<'_>) -> Result<()> {
        let control = ev.control();
        let mut seen: Vec<&TreatmentId> = Vec::new();
        for t in self.primary.treatments.iter().chain(&self.shared.treatments) {
            if t == control {
                return Err(Error::Argument(format!("the control {t} cannot be on a threshold axis")));
            }
            if !ev.treatments().contains(t) {
                return Err(Error::Argument(format!("unknown treatment {t} on a threshold axis")));
            }
            if seen.contains(&t) {
                return Err(Error::Argument(format!("treatment {t} appears on both axes")));
            }
            seen.push(t);
        }
        let missing: Vec<&str> = ev
            .treatments()
            .iter()
            .filter(|t| *t != control && !seen.contains(t))
            .map(|t| t.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Argument(format!("no threshold axis for {}", missing.join(", "))));
        }
        if self.strategies.is_empty() {
            return Err(Error::Argument("no strategies to sweep".into()));
        }
        Ok(())
    }

    fn thresholds(&self, ev: &Evaluator<'_>, primary: f64, shared: f64) -> Result<ThresholdVector> {
        ThresholdVector::new(
            ev.control(),
            self.primary
                .treatments
                .iter()
                .map(|t| (t.clone(), primary))
                .chain(self.shared.treatments.iter().map(|t| (t.clone(), shared))),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub t_primary: f64,
    pub t_shared: f64,
    pub thresholds: ThresholdVector,
    /// One entry per swept strategy, in spec order; `None` when not estimable.
    pub nb: Vec<(Strategy, Option<f64>)>,
    pub best: Option<Strategy>,
    pub margin: Option<f64>,
    /// Why entries are missing.
    pub notes: Vec<String>,
}

impl CurvePoint {
    pub fn nb_of(&self, s: &Strategy) -> Option<f64> {
        self.nb.iter().find(|(x, _)| x == s).and_then(|(_, v)| *v)
    }
}

fn tie_rank(s: &Strategy) -> (u8, String) {
    match s {
        Strategy::TreatNone => (0, String::new()),
        other => (1, other.label()),
    }
}

/// Best strategy among estimable entries. Exact ties prefer treat-none, then
/// the lexicographically smaller label.
pub fn best_strategy(nb: &[(Strategy, Option<f64>)]) -> Option<(Strategy, f64)> {
    let mut best: Option<(&Strategy, f64)> = None;
    for (s, v) in nb {
        let Some(v) = *v else { continue };
        best = match best {
            None => Some((s, v)),
            Some((b, bv)) if v > bv || (v == bv && tie_rank(s) < tie_rank(b)) => Some((s, v)),
            keep => keep,
        };
    }
    best.map(|(s, v)| (s.clone(), v))
}

/// Heat-map margin: when the model is best, its lead over the runner-up;
/// otherwise how far the best strategy is ahead of the model.
pub fn margin(nb: &[(Strategy, Option<f64>)], best: &(Strategy, f64)) -> Option<f64> {
    let model = nb
        .iter()
        .find(|(s, _)| *s == Strategy::ModelBased)
        .and_then(|(_, v)| *v)?;
    if best.0 == Strategy::ModelBased {
        let runner_up = nb
            .iter()
            .filter(|(s, _)| *s != Strategy::ModelBased)
            .filter_map(|(_, v)| *v)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))?;
        Some(model - runner_up)
    } else {
        Some(best.1 - model)
    }
}

fn capture(e: Error) -> Result<String> {
    match e {
        Error::NotEstimable(_) | Error::Estimation(_) | Error::Disconnected { .. } => Ok(e.to_string()),
        other => Err(other),
    }
}

fn sweep(ev: &Evaluator<'_>, spec: &SweepSpec, cells: &[(f64, f64)]) -> Result<Vec<CurvePoint>> {
    spec.check(ev)?;
    let thresholds: Vec<ThresholdVector> = cells
        .iter()
        .map(|&(p, s)| spec.thresholds(ev, p, s))
        .collect::<Result<_>>()?;

    // Congruent datasets keyed by the full recommendation map; many cells
    // share one.
    let wants_model = spec.strategies.contains(&Strategy::ModelBased);
    let mut group_of_cell: Vec<usize> = vec![0; cells.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if wants_model {
        match ev.patients() {
            Some(patients) if !ev.model_overridden() => {
                let assigned = patients.assigned_indices();
                let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
                for (c, th) in thresholds.iter().enumerate() {
                    let recs: Vec<u32> = Recommender::new(patients.treatments(), patients.control(), th)?
                        .recommend_all(patients)
                        .into_iter()
                        .map(|r| r as u32)
                        .collect();
                    let next = groups.len();
                    let g = *seen.entry(recs).or_insert_with_key(|recs| {
                        groups.push(
                            recs.iter()
                                .zip(assigned)
                                .enumerate()
                                .filter(|(_, (r, a))| **r as usize == **a)
                                .map(|(i, _)| i)
                                .collect(),
                        );
                        next
                    });
                    group_of_cell[c] = g;
                }
            }
            _ => groups.push(Vec::new()),
        }
    }
    let components: Vec<std::result::Result<ModelComponents, Error>> =
        groups.par_iter().map(|idx| ev.model_components(idx)).collect();

    cells
        .par_iter()
        .zip(thresholds.par_iter())
        .enumerate()
        .map(|(c, (&(t_primary, t_shared), th))| {
            let mut nb = Vec::with_capacity(spec.strategies.len());
            let mut notes = Vec::new();
            for s in &spec.strategies {
                let r = match s {
                    Strategy::ModelBased => match &components[group_of_cell[c]] {
                        Ok(comp) => ev.model_net_benefit(comp, th),
                        Err(e) => Err(e.clone()),
                    },
                    _ => ev.evaluate(s, th),
                };
                match r {
                    Ok(r) => nb.push((s.clone(), Some(r.nb))),
                    Err(e) => {
                        notes.push(format!("{}: {}", s.label(), capture(e)?));
                        nb.push((s.clone(), None));
                    }
                }
            }
            let best = best_strategy(&nb);
            let margin = best.as_ref().and_then(|b| margin(&nb, b));
            Ok(CurvePoint {
                t_primary,
                t_shared,
                thresholds: th.clone(),
                nb,
                best: best.map(|b| b.0),
                margin,
                notes,
            })
        })
        .collect()
}

/// Net benefit of every strategy along the primary axis, with the shared
/// axis held at a single value.
pub fn decision_curve(ev: &Evaluator<'_>, spec: &SweepSpec) -> Result<Vec<CurvePoint>> {
    if !spec.shared.range.is_fixed() {
        return Err(Error::Argument("a decision curve needs a fixed shared threshold".into()));
    }
    let shared = spec.shared.range.lo;
    let cells: Vec<(f64, f64)> = spec.primary.range.values().into_iter().map(|p| (p, shared)).collect();
    sweep(ev, spec, &cells)
}

/// Full cross product of both axes; rows follow the primary axis.
pub fn heatmap_grid(ev: &Evaluator<'_>, spec: &SweepSpec) -> Result<Vec<Vec<CurvePoint>>> {
    let primary = spec.primary.range.values();
    let shared = spec.shared.range.values();
    let cells: Vec<(f64, f64)> = primary
        .iter()
        .flat_map(|&p| shared.iter().map(move |&s| (p, s)))
        .collect();
    let flat = sweep(ev, spec, &cells)?;
    Ok(flat.chunks(shared.len()).map(|c| c.to_vec()).collect())
}

fn nb_cell(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| NOT_ESTIMABLE.to_string())
}

/// `t_axis,strategy,nb,estimable`, one row per point and strategy.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("t_axis,strategy,nb,estimable\n");
    for p in points {
        for (s, v) in &p.nb {
            out.push_str(&format!(
                "{},{},{},{}\n",
                sig6(p.t_primary),
                s.label(),
                nb_cell(*v),
                u8::from(v.is_some())
            ));
        }
    }
    out
}

/// `t_n,t_shared,best,margin,<strategy>...`, one row per cell.
pub fn heatmap_csv(grid: &[Vec<CurvePoint>]) -> String {
    let strategies: Vec<String> = grid
        .first()
        .and_then(|r| r.first())
        .map(|p| p.nb.iter().map(|(s, _)| s.label()).collect())
        .unwrap_or_default();
    let mut out = String::from("t_n,t_shared,best,margin");
    for s in &strategies {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for p in grid.iter().flatten() {
        out.push_str(&format!(
            "{},{},{},{}",
            sig6(p.t_primary),
            sig6(p.t_shared),
            p.best.as_ref().map(|b| b.label()).unwrap_or_else(|| NOT_ESTIMABLE.to_string()),
            p.margin.map(sig6).unwrap_or_else(|| "NA".to_string())
        ));
        for (_, v) in &p.nb {
            out.push(',');
            out.push_str(&nb_cell(*v));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_are_grid_stable() {
        let a = Axis::new(0.19, 0.40, 0.01).unwrap().values();
        assert_eq!(a.len(), 22);
        assert_eq!(a[0], 0.19);
        assert_eq!(a[21], 0.40);
        let b = Axis::new(0.25, 0.30, 0.01).unwrap().values();
        assert_eq!(&a[6..12], &b[..]);
        assert_eq!(Axis::fixed(0.1).unwrap().values(), vec![0.1]);
        assert!(Axis::new(0.3, 0.2, 0.01).is_err());
        assert!(Axis::new(0.1, 0.2, 0.0).is_err());
    }

    #[test]
    fn axis_parsing() {
        let a: ThresholdAxis = "df,ga=0.04:0.25".parse().unwrap();
        assert_eq!(a.treatments.len(), 2);
        assert_eq!(a.range.values().len(), 22);
        assert!("df".parse::<ThresholdAxis>().is_err());
        assert!("n=0.1:0.2:0.01:3".parse::<ThresholdAxis>().is_err());
    }

    #[test]
    fn best_and_margin_rules() {
        let nb = vec![
            (Strategy::TreatNone, Some(0.0)),
            (Strategy::TreatAll("a".into()), Some(0.1)),
            (Strategy::ModelBased, Some(0.15)),
        ];
        let b = best_strategy(&nb).unwrap();
        assert_eq!(b.0, Strategy::ModelBased);
        assert!((margin(&nb, &b).unwrap() - 0.05).abs() < 1e-15);

        let nb = vec![
            (Strategy::TreatNone, Some(0.0)),
            (Strategy::TreatAll("a".into()), Some(0.2)),
            (Strategy::ModelBased, Some(0.15)),
        ];
        let b = best_strategy(&nb).unwrap();
        assert_eq!(b.0, Strategy::TreatAll("a".into()));
        assert!((margin(&nb, &b).unwrap() - 0.05).abs() < 1e-15);

        let tie = vec![
            (Strategy::TreatAll("a".into()), Some(0.0)),
            (Strategy::ModelBased, Some(0.0)),
            (Strategy::TreatNone, Some(0.0)),
        ];
        assert_eq!(best_strategy(&tie).unwrap().0, Strategy::TreatNone);

        let missing_model = vec![(Strategy::TreatNone, Some(0.0)), (Strategy::ModelBased, None)];
        let b = best_strategy(&missing_model).unwrap();
        assert_eq!(b.0, Strategy::TreatNone);
        assert_eq!(margin(&missing_model, &b), None);
    }
}
