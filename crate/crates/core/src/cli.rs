//! Command-line interface.
//!
//! Every option can come from a TOML config file (`--config`) and be
//! overridden on the command line. Relative paths in the config file are
//! resolved against the file's directory.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::dca::{self, SweepSpec, ThresholdAxis, NOT_ESTIMABLE};
use crate::error::{Error, Result};
use crate::format::{sig6, write_atomic};
use crate::intermediates::{load_intermediates, Intermediates};
use crate::net_benefit::Evaluator;
use crate::sim_oracle::{self, LogisticRisk, Regime, SimConfig, StudyDesign};
use crate::strategy::{Recommender, Strategy, ThresholdVector};
use crate::svg;
use crate::synthesis::{Model, SynthesisOptions};
use crate::trial_data::{
    aggregate_to_arms, check_connectivity, load_arm_data, load_patient_data, PatientDataset, TreatmentId, TrialDataset,
};

#[derive(Debug, Parser)]
#[command(name = "netbenefit", version, about = "Net-benefit evaluation of treatment-recommendation models over trial networks")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Control treatment id (overrides any `#control=` directive).
    #[arg(long, global = true)]
    pub control: Option<String>,
    /// Meta-analysis model: fixed or random.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Continuity correction for zero or full event counts.
    #[arg(long, global = true)]
    pub continuity: Option<f64>,
    /// Output directory. Without it, tables go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts next to the CSV output.
    #[arg(long, global = true)]
    pub svg: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Inputs {
    /// Arm-level CSV: study,treatment,events,total.
    #[arg(long)]
    pub arms: Option<PathBuf>,
    /// Patient-level CSV with predicted risks.
    #[arg(long)]
    pub patients: Option<PathBuf>,
    /// Published intermediates used instead of estimation.
    #[arg(long)]
    pub intermediates: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Selection {
    /// Thresholds as treatment=value, repeatable or comma-separated.
    #[arg(short = 't', long = "threshold")]
    pub thresholds: Vec<String>,
    /// Strategies to evaluate (treat_none, treat_all_<id>, model).
    #[arg(short = 's', long = "strategy")]
    pub strategies: Vec<String>,
}

#[derive(Debug, Args, Default)]
pub struct Sweep {
    /// Swept axis, e.g. `n=0.19:0.40:0.01`.
    #[arg(long)]
    pub axis: Option<String>,
    /// Shared axis, e.g. `df,ga=0.10` or `df,ga=0.04:0.25`.
    #[arg(long)]
    pub shared: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check input files: schema, connectivity, per-study arms.
    Validate(#[command(flatten)] Inputs),
    /// Recommended treatment per patient, or for one risk profile.
    Recommend {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        selection: Selection,
        /// One risk profile, e.g. `placebo=0.75,df=0.52`.
        #[arg(long)]
        risks: Option<String>,
    },
    /// Net benefit of each strategy at fixed thresholds.
    Nb {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        selection: Selection,
    },
    /// Decision curve over one threshold axis.
    Curve {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        selection: Selection,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Best strategy over a grid of two threshold axes.
    Heatmap {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        selection: Selection,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Simulate a trial network with known counterfactual risks.
    Simulate {
        #[arg(long)]
        patients_per_arm: Option<usize>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    control: Option<String>,
    model: Option<String>,
    continuity: Option<f64>,
    out: Option<PathBuf>,
    svg: Option<bool>,
    seed: Option<u64>,
    #[serde(default)]
    inputs: FileInputs,
    #[serde(default)]
    thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    strategies: Vec<String>,
    #[serde(default)]
    sweep: FileSweep,
    #[serde(default)]
    simulate: FileSimulate,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInputs {
    arms: Option<PathBuf>,
    patients: Option<PathBuf>,
    intermediates: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSweep {
    axis: Option<String>,
    shared: Option<String>,
}

/// Overrides applied on top of the built-in simulation design.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSimulate {
    patients_per_arm: Option<usize>,
    studies: Option<Vec<StudyDesign>>,
    risk_model: Option<BTreeMap<TreatmentId, LogisticRisk>>,
    score_alpha: Option<f64>,
    score_beta: Option<f64>,
    regime: Option<Regime>,
}

/// Effective settings after merging the config file and flags.
#[derive(Debug)]
struct Settings {
    control: Option<TreatmentId>,
    opts: SynthesisOptions,
    out: Option<PathBuf>,
    svg: bool,
    seed: u64,
    arms: Option<PathBuf>,
    patients: Option<PathBuf>,
    intermediates: Option<PathBuf>,
    thresholds: Vec<(TreatmentId, f64)>,
    strategies: Vec<Strategy>,
    axis: Option<String>,
    shared: Option<String>,
    simulate: FileSimulate,
}

fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: FileConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(x) = p.as_mut() {
            if x.is_relative() {
                *x = base.join(&*x);
            }
        }
    };
    rebase(&mut cfg.inputs.arms);
    rebase(&mut cfg.inputs.patients);
    rebase(&mut cfg.inputs.intermediates);
    rebase(&mut cfg.out);
    Ok(cfg)
}

fn parse_assignments(items: &[String]) -> Result<Vec<(TreatmentId, f64)>> {
    let mut out = Vec::new();
    for item in items.iter().flat_map(|s| s.split(',')) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (t, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("expected treatment=value, got '{item}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("'{v}' is not a number in '{item}'")))?;
        out.push((TreatmentId::new(t.trim()), v));
    }
    Ok(out)
}

fn settings(cli: &Cli, inputs: Option<&Inputs>, selection: Option<&Selection>, sweep: Option<&Sweep>) -> Result<Settings> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let model = match cli.model.as_ref().or(file.model.as_ref()) {
        Some(m) => m.parse::<Model>()?,
        None => Model::default(),
    };
    let continuity = cli.continuity.or(file.continuity).unwrap_or(SynthesisOptions::default().continuity);
    if !(continuity > 0.0 && continuity.is_finite()) {
        return Err(Error::Argument(format!("continuity correction must be positive, got {continuity}")));
    }
    let pick = |flag: Option<&PathBuf>, file: Option<PathBuf>| flag.cloned().or(file);
    let thresholds = match selection.filter(|s| !s.thresholds.is_empty()) {
        Some(s) => parse_assignments(&s.thresholds)?,
        None => file.thresholds.iter().map(|(t, v)| (TreatmentId::new(t), *v)).collect(),
    };
    let strategy_names = match selection.filter(|s| !s.strategies.is_empty()) {
        Some(s) => s.strategies.iter().flat_map(|x| x.split(',')).map(str::to_string).collect(),
        None => file.strategies.clone(),
    };
    let strategies = strategy_names
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Strategy>())
        .collect::<Result<Vec<_>>>()?;
    Ok(Settings {
        control: cli.control.clone().or(file.control).map(TreatmentId::new),
        opts: SynthesisOptions { model, continuity },
        out: cli.out.clone().or(file.out),
        svg: cli.svg || file.svg.unwrap_or(false),
        seed: cli.seed.or(file.seed).unwrap_or(1),
        arms: pick(inputs.and_then(|i| i.arms.as_ref()), file.inputs.arms),
        patients: pick(inputs.and_then(|i| i.patients.as_ref()), file.inputs.patients),
        intermediates: pick(inputs.and_then(|i| i.intermediates.as_ref()), file.inputs.intermediates),
        thresholds,
        strategies,
        axis: sweep.and_then(|s| s.axis.clone()).or(file.sweep.axis),
        shared: sweep.and_then(|s| s.shared.clone()).or(file.sweep.shared),
        simulate: file.simulate,
    })
}

struct Loaded {
    arms: Option<TrialDataset>,
    patients: Option<PatientDataset>,
    intermediates: Option<Intermediates>,
}

fn load_inputs(s: &Settings) -> Result<Loaded> {
    let control = s.control.as_ref();
    let patients = s.patients.as_deref().map(|p| load_patient_data(p, control)).transpose()?;
    let arms = match s.arms.as_deref() {
        Some(p) => Some(load_arm_data(p, control)?),
        // Patient data alone still defines the trial network.
        None => patients.as_ref().map(aggregate_to_arms).transpose()?,
    };
    let intermediates = s
        .intermediates
        .as_deref()
        .map(|p| load_intermediates(p, control))
        .transpose()?;
    if arms.is_none() && intermediates.is_none() {
        return Err(Error::Config("no input data: give --arms, --patients or --intermediates".into()));
    }
    Ok(Loaded {
        arms,
        patients,
        intermediates,
    })
}

fn evaluator<'a>(s: &Settings, l: &'a Loaded) -> Result<Evaluator<'a>> {
    Evaluator::new(l.arms.as_ref(), l.patients.as_ref(), l.intermediates.as_ref(), s.opts)
}

/// Requested strategies, or the default set minus the model when nothing
/// could evaluate it.
fn strategies(s: &Settings, ev: &Evaluator<'_>) -> Vec<Strategy> {
    if !s.strategies.is_empty() {
        return s.strategies.clone();
    }
    let model_possible = ev.patients().is_some() || ev.model_overridden();
    ev.default_strategies()
        .into_iter()
        .filter(|x| model_possible || *x != Strategy::ModelBased)
        .collect()
}

fn thresholds(s: &Settings, ev: &Evaluator<'_>) -> Result<ThresholdVector> {
    let tv = ThresholdVector::new(ev.control(), s.thresholds.iter().cloned())?;
    if let Some((t, _)) = s.thresholds.iter().find(|(t, _)| !ev.treatments().contains(t)) {
        return Err(Error::Argument(format!("threshold given for unknown treatment {t}")));
    }
    tv.require(ev.treatments())?;
    Ok(tv)
}

/// Sends a table to `<out>/<name>` when an output directory is set, else to
/// stdout.
fn emit(s: &Settings, name: &str, contents: &str, stdout: &mut dyn Write) -> Result<()> {
    match &s.out {
        Some(dir) => {
            let path = dir.join(name);
            write_atomic(&path, contents.as_bytes())?;
            writeln!(stdout, "wrote {}", path.display()).map_err(|e| Error::io("<stdout>", e))
        }
        None => stdout.write_all(contents.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit_svg(s: &Settings, name: &str, contents: &str, stdout: &mut dyn Write) -> Result<()> {
    if !s.svg {
        return Ok(());
    }
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes())?;
    writeln!(stdout, "wrote {}", path.display()).map_err(|e| Error::io("<stdout>", e))
}

fn say(w: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(w, "{}", line.as_ref()).map_err(|e| Error::io("<output>", e))
}

fn cmd_validate(s: &Settings, stdout: &mut dyn Write) -> Result<()> {
    let l = load_inputs(s)?;
    if let Some(p) = &l.patients {
        say(stdout, format!("patients: {} records, treatments {}", p.len(), join_ids(p.treatments())))?;
    }
    if let Some(i) = &l.intermediates {
        say(stdout, format!("intermediates: ok, treatments {}", join_ids(&i.treatments())))?;
    }
    if let Some(d) = &l.arms {
        say(
            stdout,
            format!(
                "schema: ok ({} arms, {} studies, {} treatments, control {})",
                d.arms().len(),
                d.n_studies(),
                d.treatments().len(),
                d.control()
            ),
        )?;
        for st in d.studies() {
            let arms: Vec<String> = st
                .arms
                .iter()
                .map(|a| format!("{} {}/{}", a.treatment, a.events, a.total))
                .collect();
            say(stdout, format!("study {}: {}", st.id, arms.join(", ")))?;
        }
        let conn = check_connectivity(d);
        if conn.is_connected() {
            say(stdout, "connectivity: 1 connected component")?;
        } else {
            say(stdout, format!("connectivity: {} connected components", conn.components.len()))?;
            return Err(Error::Disconnected {
                components: conn.to_strings(),
            });
        }
    }
    Ok(())
}

fn join_ids(ts: &[TreatmentId]) -> String {
    ts.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
}

fn cmd_recommend(s: &Settings, risks: Option<&str>, stdout: &mut dyn Write) -> Result<()> {
    if let Some(r) = risks {
        let risks = parse_assignments(&[r.to_string()])?;
        let control = s
            .control
            .clone()
            .ok_or_else(|| Error::Config("--control is required with --risks".into()))?;
        let treatments: Vec<TreatmentId> = risks.iter().map(|(t, _)| t.clone()).collect();
        let values: Vec<f64> = risks.iter().map(|(_, v)| *v).collect();
        let c = treatments
            .iter()
            .position(|t| *t == control)
            .ok_or_else(|| Error::Argument(format!("no risk given for the control {control}")))?;
        let tv = ThresholdVector::new(&control, s.thresholds.iter().cloned())?;
        let pick = Recommender::new(&treatments, &control, &tv)?.recommend(&values);
        let mut out = String::from("treatment,risk,risk_difference,threshold,margin\n");
        for (i, t) in treatments.iter().enumerate() {
            let rd = values[c] - values[i];
            let th = tv.get(t).unwrap_or(0.0);
            out.push_str(&format!("{t},{},{},{},{}\n", sig6(values[i]), sig6(rd), sig6(th), sig6(rd - th)));
        }
        out.push_str(&format!("recommended,{},,,\n", treatments[pick]));
        return emit(s, "recommendation.csv", &out, stdout);
    }
    let path = s
        .patients
        .as_deref()
        .ok_or_else(|| Error::Config("recommend needs --patients or --risks".into()))?;
    let patients = load_patient_data(path, s.control.as_ref())?;
    let tv = ThresholdVector::new(patients.control(), s.thresholds.iter().cloned())?;
    let recs = Recommender::new(patients.treatments(), patients.control(), &tv)?.recommend_all(&patients);
    let mut out = String::from("patient_id,assigned,recommended,congruent\n");
    for (p, (&r, &a)) in patients.patients().iter().zip(recs.iter().zip(patients.assigned_indices())) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.patient_id,
            p.assigned,
            patients.treatments()[r],
            u8::from(r == a)
        ));
    }
    emit(s, "recommendations.csv", &out, stdout)
}

/// Prefixes the message with the strategy it concerns, keeping the kind.
fn named(e: Error, label: &str) -> Error {
    match e {
        Error::Estimation(m) => Error::Estimation(format!("{label}: {m}")),
        Error::Argument(m) => Error::Argument(format!("{label}: {m}")),
        Error::Config(m) => Error::Config(format!("{label}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{label}: {m}")),
        other => other,
    }
}

fn cmd_nb(s: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let l = load_inputs(s)?;
    let ev = evaluator(s, &l)?;
    let tv = thresholds(s, &ev)?;
    let strategies = strategies(s, &ev);
    let treatments = ev.treatments().to_vec();

    let mut out = String::from("strategy,nb,eps0,eps_s,case,reference,congruent_n");
    for t in &treatments {
        out.push_str(&format!(",share_{t}"));
    }
    out.push('\n');
    for st in &strategies {
        let label = st.label();
        match ev.evaluate(st, &tv) {
            Ok(r) => {
                for d in &r.diagnostics {
                    say(stderr, format!("warning: {label}: {d}"))?;
                }
                out.push_str(&format!(
                    "{label},{},{},{},{},{},{}",
                    sig6(r.nb),
                    sig6(r.eps0),
                    sig6(r.eps_s),
                    r.case_used.label(),
                    r.reference_used,
                    r.congruent_n.map(|n| n.to_string()).unwrap_or_default()
                ));
                for t in &treatments {
                    out.push_str(&format!(",{}", sig6(r.shares.get(t))));
                }
                out.push('\n');
            }
            Err(e @ (Error::NotEstimable(_) | Error::Disconnected { .. })) => {
                say(stderr, format!("warning: {label}: {e}"))?;
                let eps0 = ev.eps0().map(sig6).unwrap_or_default();
                out.push_str(&format!("{label},{NOT_ESTIMABLE},{eps0},,,,"));
                out.push_str(&",".repeat(treatments.len()));
                out.push('\n');
            }
            Err(e) => return Err(named(e, &label)),
        }
    }
    emit(s, "nb.csv", &out, stdout)
}

fn sweep_spec(s: &Settings, ev: &Evaluator<'_>) -> Result<SweepSpec> {
    let primary: ThresholdAxis = s
        .axis
        .as_deref()
        .ok_or_else(|| Error::Config("no sweep axis: give --axis treatment=lo:hi[:step]".into()))?
        .parse()?;
    let shared = match s.shared.as_deref() {
        Some(x) => x.parse()?,
        None => {
            // Everything not on the primary axis at its fixed threshold.
            let rest: Vec<TreatmentId> = ev
                .treatments()
                .iter()
                .filter(|t| *t != ev.control() && !primary.treatments.contains(t))
                .cloned()
                .collect();
            if !rest.is_empty() {
                return Err(Error::Config(format!("no shared axis for {}", join_ids(&rest))));
            }
            ThresholdAxis {
                treatments: rest,
                range: dca::Axis::fixed(0.0)?,
            }
        }
    };
    Ok(SweepSpec {
        primary,
        shared,
        strategies: strategies(s, ev),
    })
}

fn warn_points<'p>(points: impl Iterator<Item = &'p dca::CurvePoint>, stderr: &mut dyn Write) -> Result<()> {
    let missing = points.filter(|p| !p.notes.is_empty()).count();
    if missing > 0 {
        say(stderr, format!("warning: {missing} grid points have non-estimable strategies"))?;
    }
    Ok(())
}

fn axis_label(a: &ThresholdAxis) -> String {
    format!("threshold {}", join_ids(&a.treatments))
}

fn cmd_curve(s: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let l = load_inputs(s)?;
    let ev = evaluator(s, &l)?;
    let spec = sweep_spec(s, &ev)?;
    let points = dca::decision_curve(&ev, &spec)?;
    warn_points(points.iter(), stderr)?;
    emit(s, "curve.csv", &dca::curve_csv(&points), stdout)?;
    emit_svg(s, "curve.svg", &svg::curve_svg(&points, &axis_label(&spec.primary)), stdout)
}

fn cmd_heatmap(s: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let l = load_inputs(s)?;
    let ev = evaluator(s, &l)?;
    let spec = sweep_spec(s, &ev)?;
    let grid = dca::heatmap_grid(&ev, &spec)?;
    warn_points(grid.iter().flatten(), stderr)?;
    emit(s, "heatmap.csv", &dca::heatmap_csv(&grid), stdout)?;
    emit_svg(
        s,
        "heatmap.svg",
        &svg::heatmap_svg(&grid, &axis_label(&spec.primary), &axis_label(&spec.shared)),
        stdout,
    )
}

fn sim_config(s: &Settings, patients_per_arm: Option<usize>) -> SimConfig {
    let f = &s.simulate;
    let mut c = SimConfig::rrms_like(s.seed, patients_per_arm.or(f.patients_per_arm).unwrap_or(500));
    if let Some(control) = &s.control {
        c.control = control.clone();
    }
    if let Some(x) = &f.studies {
        c.studies = x.clone();
    }
    if let Some(x) = &f.risk_model {
        c.risk_model = x.clone();
    }
    c.score_alpha = f.score_alpha.unwrap_or(c.score_alpha);
    c.score_beta = f.score_beta.unwrap_or(c.score_beta);
    c.regime = f.regime.unwrap_or(c.regime);
    c
}

fn cmd_simulate(s: &Settings, patients_per_arm: Option<usize>, stdout: &mut dyn Write) -> Result<()> {
    let config = sim_config(s, patients_per_arm);
    let (patients, cf) = sim_oracle::simulate_trials(&config)?;
    let arms = aggregate_to_arms(&patients)?;
    let dir = s.out.clone().unwrap_or_else(|| PathBuf::from("."));
    for (name, body) in [
        ("patients.csv", patients.to_csv_string()),
        ("arms.csv", arms.to_csv_string()),
        ("counterfactuals.csv", cf.to_csv_string()),
    ] {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        say(stdout, format!("wrote {}", path.display()))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Validate(inputs) => cmd_validate(&settings(cli, Some(inputs), None, None)?, stdout),
        Command::Recommend { inputs, selection, risks } => {
            cmd_recommend(&settings(cli, Some(inputs), Some(selection), None)?, risks.as_deref(), stdout)
        }
        Command::Nb { inputs, selection } => cmd_nb(&settings(cli, Some(inputs), Some(selection), None)?, stdout, stderr),
        Command::Curve { inputs, selection, sweep } => {
            cmd_curve(&settings(cli, Some(inputs), Some(selection), Some(sweep))?, stdout, stderr)
        }
        Command::Heatmap { inputs, selection, sweep } => {
            cmd_heatmap(&settings(cli, Some(inputs), Some(selection), Some(sweep))?, stdout, stderr)
        }
        Command::Simulate { patients_per_arm } => cmd_simulate(&settings(cli, None, None, None)?, *patients_per_arm, stdout),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code: 0 success, 1 validation, 2 estimation, 3 I/O.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.kind());
            e.exit_code()
        }
    }
}
