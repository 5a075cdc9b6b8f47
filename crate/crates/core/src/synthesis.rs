//! Evidence synthesis: random-effects pooling of event proportions on the
//! logit scale, pairwise meta-analysis of log risk ratios and a
//! graph-theoretic network meta-analysis.
//!
//! The network model is weighted least squares on the treatment graph. With
//! incidence matrix `B` (one row per contrast, `+1` at the first treatment and
//! `-1` at the second), contrast weights `W` and observed log risk ratios `y`,
//! the treatment effects are `theta = L⁺ Bᵀ W y` with `L = Bᵀ W B` the
//! weighted Laplacian and `L⁺` its Moore–Penrose pseudoinverse. Every
//! reported contrast is a difference of `theta` entries, so the estimates are
//! consistent around every cycle by construction.
//!
//! Multi-arm studies enter with reduced weights: the study's pairwise
//! variances are read as resistance distances on a complete graph, turned
//! into the study Laplacian pseudoinverse `-½ P R P` (`P` the centring
//! matrix) and inverted back into edge weights. An `m`-arm study then carries
//! `m - 1` independent pieces of information instead of `m(m-1)/2`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial_data::{check_connectivity, TreatmentId, TrialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Fixed,
    #[default]
    Random,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(Model::Fixed),
            "random" => Ok(Model::Random),
            other => Err(Error::Argument(format!("unknown model '{other}' (fixed|random)"))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Fixed => "fixed",
            Model::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub model: Model,
    /// Added to the event count of any arm with zero or all events; twice
    /// this is added to its total.
    pub continuity: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            model: Model::Random,
            continuity: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRate {
    pub estimate: f64,
    pub se_logit: f64,
    pub tau2: f64,
    pub n_arms: usize,
}

/// Arm counts after continuity correction, as floats.
fn corrected(events: u64, total: u64, continuity: f64) -> (f64, f64) {
    if events == 0 || events == total {
        (events as f64 + continuity, total as f64 + 2.0 * continuity)
    } else {
        (events as f64, total as f64)
    }
}

/// Inverse-variance pooling; the random model adds the DerSimonian–Laird
/// between-study variance. Returns `(mean, se, tau2)`.
fn inverse_variance(ys: &[f64], vs: &[f64], model: Model) -> (f64, f64, f64) {
    let w: Vec<f64> = vs.iter().map(|v| 1.0 / v).collect();
    let sw: f64 = w.iter().sum();
    let fixed = w.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let tau2 = match model {
        Model::Fixed => 0.0,
        Model::Random if ys.len() < 2 => 0.0,
        Model::Random => {
            let q: f64 = w.iter().zip(ys).map(|(w, y)| w * (y - fixed).powi(2)).sum();
            let c = sw - w.iter().map(|w| w * w).sum::<f64>() / sw;
            if c > 0.0 {
                ((q - (ys.len() as f64 - 1.0)) / c).max(0.0)
            } else {
                0.0
            }
        }
    };
    if tau2 == 0.0 {
        return (fixed, (1.0 / sw).sqrt(), 0.0);
    }
    let wr: Vec<f64> = vs.iter().map(|v| 1.0 / (v + tau2)).collect();
    let swr: f64 = wr.iter().sum();
    let mean = wr.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>() / swr;
    (mean, (1.0 / swr).sqrt(), tau2)
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pools arm event proportions `(events, total)` on the logit scale.
pub fn pool_event_rate(arms: &[(u64, u64)], opts: &SynthesisOptions) -> Result<PooledRate> {
    if arms.is_empty() {
        return Err(Error::Estimation("no arms to pool".into()));
    }
    let mut ys = Vec::with_capacity(arms.len());
    let mut vs = Vec::with_capacity(arms.len());
    for &(events, total) in arms {
        if total == 0 || events > total {
            return Err(Error::Argument(format!("invalid arm {events}/{total}")));
        }
        let (e, n) = corrected(events, total, opts.continuity);
        ys.push((e / (n - e)).ln());
        vs.push(1.0 / e + 1.0 / (n - e));
    }
    let (mean, se, tau2) = inverse_variance(&ys, &vs, opts.model);
    Ok(PooledRate {
        estimate: expit(mean),
        se_logit: se,
        tau2,
        n_arms: arms.len(),
    })
}

/// Within-study log risk ratio of `treat_a` versus `treat_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub study_id: String,
    pub treat_a: TreatmentId,
    pub treat_b: TreatmentId,
    pub log_rr: f64,
    pub variance: f64,
}

/// All pairwise contrasts of every multi-arm study. If any arm of a study
/// has zero or all events, every arm of that study is corrected, which keeps
/// the study's contrasts mutually consistent.
pub fn study_contrasts(data: &TrialDataset, continuity: f64) -> Vec<Contrast> {
    let mut out = Vec::new();
    for study in data.studies() {
        if study.arms.len() < 2 {
            continue;
        }
        let needs = study
            .arms
            .iter()
            .any(|a| a.events == 0 || a.events == a.total);
        let counts: Vec<(f64, f64)> = study
            .arms
            .iter()
            .map(|a| {
                if needs {
                    (a.events as f64 + continuity, a.total as f64 + 2.0 * continuity)
                } else {
                    (a.events as f64, a.total as f64)
                }
            })
            .collect();
        for i in 0..study.arms.len() {
            for j in i + 1..study.arms.len() {
                let (ea, na) = counts[i];
                let (eb, nb) = counts[j];
                out.push(Contrast {
                    study_id: study.id.to_string(),
                    treat_a: study.arms[i].treatment.clone(),
                    treat_b: study.arms[j].treatment.clone(),
                    log_rr: ((ea / na) / (eb / nb)).ln(),
                    variance: 1.0 / ea - 1.0 / na + 1.0 / eb - 1.0 / nb,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseEstimate {
    pub log_rr: f64,
    pub se: f64,
    pub tau2: f64,
    pub n_studies: usize,
}

/// Pairwise meta-analysis of the log risk ratio of `a` versus `b`. Contrasts
/// recorded as `b` versus `a` are flipped.
pub fn pool_pairwise(contrasts: &[Contrast], a: &TreatmentId, b: &TreatmentId, model: Model) -> Result<PairwiseEstimate> {
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    for c in contrasts {
        if &c.treat_a == a && &c.treat_b == b {
            ys.push(c.log_rr);
        } else if &c.treat_a == b && &c.treat_b == a {
            ys.push(-c.log_rr);
        } else {
            continue;
        }
        if c.variance.is_nan() || c.variance <= 0.0 {
            return Err(Error::Estimation(format!(
                "contrast in study {} has non-positive variance",
                c.study_id
            )));
        }
        vs.push(c.variance);
    }
    if ys.is_empty() {
        return Err(Error::Estimation(format!("no contrasts between {a} and {b}")));
    }
    let (log_rr, se, tau2) = inverse_variance(&ys, &vs, model);
    Ok(PairwiseEstimate {
        log_rr,
        se,
        tau2,
        n_studies: ys.len(),
    })
}

/// Network estimates of every treatment relative to `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEffects {
    pub reference: TreatmentId,
    pub log_rr: BTreeMap<TreatmentId, f64>,
    pub se: BTreeMap<TreatmentId, f64>,
    pub tau2: f64,
    pub model: Model,
    /// Fixed-effect heterogeneity statistic and its degrees of freedom.
    pub q: f64,
    pub df: usize,
}

impl PooledEffects {
    pub fn rr(&self, t: &TreatmentId) -> Option<f64> {
        self.log_rr.get(t).map(|l| l.exp())
    }

    /// log RR of `a` versus `b`.
    pub fn log_rr_between(&self, a: &TreatmentId, b: &TreatmentId) -> Option<f64> {
        Some(self.log_rr.get(a)? - self.log_rr.get(b)?)
    }
}

/// Moore–Penrose pseudoinverse of a Laplacian-like symmetric matrix whose
/// null space is exactly the constant vector: `(M + J/n)⁻¹ - J/n`.
pub(crate) fn laplacian_pinv(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let shifted = m + &j;
    let inv = match shifted.clone().cholesky() {
        Some(c) => c.inverse(),
        None => shifted.try_inverse()?,
    };
    Some(inv - j)
}

struct StudyBlock {
    /// Network index of each arm.
    nodes: Vec<usize>,
    /// `(i, j, y, v)` over local arm positions, y = log RR of arm i vs arm j.
    pairs: Vec<(usize, usize, f64, f64)>,
}

struct Edge {
    a: usize,
    b: usize,
    y: f64,
    w: f64,
    study: usize,
}

struct Fit {
    theta: DVector<f64>,
    lplus: DMatrix<f64>,
    edges: Vec<Edge>,
    q: f64,
}

/// Edge weights of one study, with `tau2` added to every pairwise variance.
fn study_weights(block: &StudyBlock, tau2: f64) -> Result<Vec<f64>> {
    let k = block.nodes.len();
    if k == 2 {
        let v = block.pairs[0].3 + tau2;
        return Ok(vec![1.0 / v]);
    }
    let mut r = DMatrix::zeros(k, k);
    for &(i, j, _, v) in &block.pairs {
        r[(i, j)] = v + tau2;
        r[(j, i)] = v + tau2;
    }
    let p = DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64);
    let lplus = (&p * r * &p) * -0.5;
    let l = laplacian_pinv(&lplus)
        .ok_or_else(|| Error::Estimation("singular multi-arm variance structure".into()))?;
    Ok(block.pairs.iter().map(|&(i, j, _, _)| -l[(i, j)]).collect())
}

fn fit_network(blocks: &[StudyBlock], n: usize, tau2: f64) -> Result<Fit> {
    let mut edges = Vec::new();
    for (s, block) in blocks.iter().enumerate() {
        let weights = study_weights(block, tau2)?;
        for (&(i, j, y, _), w) in block.pairs.iter().zip(weights) {
            edges.push(Edge {
                a: block.nodes[i],
                b: block.nodes[j],
                y,
                w,
                study: s,
            });
        }
    }
    let mut lap = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for e in &edges {
        lap[(e.a, e.a)] += e.w;
        lap[(e.b, e.b)] += e.w;
        lap[(e.a, e.b)] -= e.w;
        lap[(e.b, e.a)] -= e.w;
        rhs[e.a] += e.w * e.y;
        rhs[e.b] -= e.w * e.y;
    }
    let lplus = laplacian_pinv(&lap)
        .ok_or_else(|| Error::Estimation("network Laplacian is singular".into()))?;
    let theta = &lplus * rhs;
    let q = edges
        .iter()
        .map(|e| e.w * (e.y - (theta[e.a] - theta[e.b])).powi(2))
        .sum();
    Ok(Fit {
        theta,
        lplus,
        edges,
        q,
    })
}

/// Denominator of the generalized method-of-moments τ² estimator:
/// `tr((I - H) (B Bᵀ ∘ E / 2) W)` with `H = B L⁺ Bᵀ W` and `E` marking
/// contrasts from the same study.
fn tau2_denominator(fit: &Fit, n: usize) -> f64 {
    let m = fit.edges.len();
    let mut b = DMatrix::zeros(m, n);
    for (r, e) in fit.edges.iter().enumerate() {
        b[(r, e.a)] = 1.0;
        b[(r, e.b)] = -1.0;
    }
    let w = DMatrix::from_diagonal(&DVector::from_iterator(m, fit.edges.iter().map(|e| e.w)));
    let h = &b * &fit.lplus * b.transpose() * &w;
    let bbt = &b * b.transpose();
    let mut shared = DMatrix::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            if fit.edges[r].study == fit.edges[c].study {
                shared[(r, c)] = bbt[(r, c)] / 2.0;
            }
        }
    }
    ((DMatrix::identity(m, m) - h) * shared * w).trace()
}

/// Network meta-analysis of log risk ratios against `reference`.
pub fn nma_pooled_rr(data: &TrialDataset, reference: &TreatmentId, opts: &SynthesisOptions) -> Result<PooledEffects> {
    let treatments = data.treatments();
    if !treatments.contains(reference) {
        return Err(Error::Argument(format!("reference {reference} is not in the network")));
    }
    let conn = check_connectivity(data);
    if !conn.is_connected() {
        return Err(Error::Disconnected {
            components: conn.to_strings(),
        });
    }
    let n = treatments.len();
    let index: HashMap<&TreatmentId, usize> =
        treatments.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let r = index[reference];

    let contrasts = study_contrasts(data, opts.continuity);
    let mut blocks: Vec<StudyBlock> = Vec::new();
    let mut by_study: HashMap<&str, usize> = HashMap::new();
    for c in &contrasts {
        let s = *by_study.entry(c.study_id.as_str()).or_insert_with(|| {
            blocks.push(StudyBlock {
                nodes: Vec::new(),
                pairs: Vec::new(),
            });
            blocks.len() - 1
        });
        let block = &mut blocks[s];
        let mut local = |t: &TreatmentId| -> usize {
            let g = index[t];
            match block.nodes.iter().position(|&x| x == g) {
                Some(p) => p,
                None => {
                    block.nodes.push(g);
                    block.nodes.len() - 1
                }
            }
        };
        let i = local(&c.treat_a);
        let j = local(&c.treat_b);
        if c.variance.is_nan() || c.variance <= 0.0 {
            return Err(Error::Estimation(format!(
                "contrast in study {} has non-positive variance",
                c.study_id
            )));
        }
        block.pairs.push((i, j, c.log_rr, c.variance));
    }

    if n == 1 {
        return Ok(PooledEffects {
            reference: reference.clone(),
            log_rr: BTreeMap::from([(reference.clone(), 0.0)]),
            se: BTreeMap::from([(reference.clone(), 0.0)]),
            tau2: 0.0,
            model: opts.model,
            q: 0.0,
            df: 0,
        });
    }

    let fixed = fit_network(&blocks, n, 0.0)?;
    let informative: usize = blocks.iter().map(|b| b.nodes.len() - 1).sum();
    let df = informative.saturating_sub(n - 1);
    let q = fixed.q;
    let (fit, tau2) = match opts.model {
        Model::Random if df > 0 => {
            let denom = tau2_denominator(&fixed, n);
            let tau2 = if denom > 0.0 {
                ((q - df as f64) / denom).max(0.0)
            } else {
                0.0
            };
            if tau2 > 0.0 {
                (fit_network(&blocks, n, tau2)?, tau2)
            } else {
                (fixed, 0.0)
            }
        }
        _ => (fixed, 0.0),
    };

    let mut log_rr = BTreeMap::new();
    let mut se = BTreeMap::new();
    for (i, t) in treatments.iter().enumerate() {
        log_rr.insert(t.clone(), fit.theta[i] - fit.theta[r]);
        let var = fit.lplus[(i, i)] + fit.lplus[(r, r)] - 2.0 * fit.lplus[(i, r)];
        se.insert(t.clone(), var.max(0.0).sqrt());
    }
    log_rr.insert(reference.clone(), 0.0);
    se.insert(reference.clone(), 0.0);
    Ok(PooledEffects {
        reference: reference.clone(),
        log_rr,
        se,
        tau2,
        model: opts.model,
        q,
        df,
    })
}
