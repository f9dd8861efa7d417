use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rodplan::estimation::{fit_traces, DEFAULT_CYCLES};
use rodplan::eval::{monte_carlo_eval, sample_trajectories, EvalReport, Policy};
use rodplan::instance::{load_instance, Instance, Traces};
use rodplan::oracle::{exact_full, exact_q, random_first_stage};
use rodplan::rod::{inner_loop, solve_baseline, Baseline, RodConfig, RodResult};
use rodplan::scenario::{generate, ScenarioConfig, SetKind, TopologyConfig};
use rodplan::uncertainty::{Candidate, SusSpec, UncertaintySpec, DEFAULT_CANDIDATE_CAP};

use crate::settings::Common;

/// Static deviation used for the static-set models when the instance carries
/// a dynamic set and no `--alpha` is given.
pub const DEFAULT_ALPHA: f64 = 0.3;

pub const ALL_MODELS: [Baseline; 4] = [Baseline::Det, Baseline::Saro, Baseline::DaroSus, Baseline::DaroDus];

pub fn model_name(m: Baseline) -> &'static str {
    match m {
        Baseline::Det => "det",
        Baseline::Saro => "saro",
        Baseline::DaroSus => "daro-sus",
        Baseline::DaroDus => "daro-dus",
    }
}

fn writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// `out.json` -> `out.<suffix>`
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Uncertainty set a model is solved against.
pub fn spec_for(inst: &Instance, model: Baseline, opts: &Common) -> anyhow::Result<UncertaintySpec> {
    let budget = opts.gamma.unwrap_or_else(|| inst.uncertainty.budget());
    let spec = match (model, &inst.uncertainty, opts.alpha) {
        (Baseline::DaroDus, UncertaintySpec::Sus(_), _) => {
            return Err(rodplan::Error::Unsupported("daro-dus needs an instance with a dynamic set".into()).into())
        }
        (Baseline::Det | Baseline::DaroDus, s, _) | (_, s @ UncertaintySpec::Sus(_), None) => s.with_budget(budget),
        (_, _, alpha) => {
            UncertaintySpec::Sus(SusSpec::from_alpha(&inst.forecast, alpha.unwrap_or(DEFAULT_ALPHA), budget))
        }
    };
    let bad = spec.violations(inst.ap_count(), inst.horizon);
    if !bad.is_empty() {
        return Err(rodplan::Error::Validation(bad).into());
    }
    Ok(spec)
}

fn parse_model(opts: &Common) -> anyhow::Result<Baseline> {
    let name = opts.model.as_deref().unwrap_or("daro-dus");
    Ok(name.parse()?)
}

pub struct GenerateArgs {
    pub ap: usize,
    pub en: usize,
    pub horizon: usize,
    pub lag: usize,
    pub kind: SetKind,
    pub nodes: Option<usize>,
    pub history: usize,
    pub traces_out: Option<PathBuf>,
    pub truth_out: Option<PathBuf>,
}

pub fn cmd_generate(args: GenerateArgs, opts: &Common) -> anyhow::Result<()> {
    let defaults = ScenarioConfig::default();
    let cfg = ScenarioConfig {
        ap_count: args.ap,
        en_count: args.en,
        horizon: args.horizon,
        lag: args.lag,
        budget: opts.gamma.unwrap_or(defaults.budget.min(args.ap)),
        kind: args.kind,
        alpha: opts.alpha.unwrap_or(defaults.alpha),
        history: args.history,
        topology: TopologyConfig {
            node_count: args.nodes.unwrap_or(defaults.topology.node_count.max(args.ap + args.en + 2)),
            ..TopologyConfig::default()
        },
        seed: opts.seed.unwrap_or(0),
        ..defaults
    };
    let generated = generate(&cfg)?;
    write_json(opts.out.as_deref(), &generated.instance)?;
    if let Some(p) = &args.traces_out {
        generated.traces.save(p)?;
    }
    if let Some(p) = &args.truth_out {
        write_json(Some(p), &generated.truth)?;
    }
    Ok(())
}

pub fn cmd_fit(traces: &Path, lag: usize, opts: &Common) -> anyhow::Result<()> {
    let traces = Traces::load(traces)?;
    let (seasonal, ar) = fit_traces(&traces, lag, &DEFAULT_CYCLES)?;
    if !seasonal.flagged.is_empty() {
        log::warn!("rank-deficient seasonal design for areas {:?}", seasonal.flagged);
    }
    write_json(opts.out.as_deref(), &ar)
}

pub fn solve_one(inst: &Instance, model: Baseline, opts: &Common, cfg: &RodConfig) -> anyhow::Result<RodResult> {
    let spec = spec_for(inst, model, opts)?;
    let inst = inst.with_uncertainty(spec.clone());
    Ok(solve_baseline(&inst, model, &spec, cfg)?)
}

pub fn cmd_solve(log_path: Option<&Path>, opts: &Common) -> anyhow::Result<()> {
    let inst = load_instance(opts.instance_path()?)?;
    let model = parse_model(opts)?;
    let cfg = opts.rod_config()?;
    let result = solve_one(&inst, model, opts, &cfg)?;
    info!("{} objective {:.6} gap {:.3e} in {:.0} ms", result.model, result.objective, result.gap, result.wall_ms);
    write_json(opts.out.as_deref(), &result)?;
    let log_path = log_path.map(Path::to_path_buf).or_else(|| opts.out.as_deref().map(|o| sibling(o, "log.jsonl")));
    if let Some(p) = log_path {
        let mut w = writer(Some(&p))?;
        for line in result.iteration_log() {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InnerCheck {
    point: usize,
    inner: f64,
    exact: f64,
    abs_diff: f64,
    ok: bool,
}

#[derive(Serialize)]
struct OracleReport {
    candidates: usize,
    rod: f64,
    exact: f64,
    rel_diff: f64,
    tolerance: f64,
    inner_tolerance: f64,
    inner: Vec<InnerCheck>,
    pass: bool,
}

/// Adaptive model matching the set kind.
pub fn adaptive_for(spec: &UncertaintySpec) -> Baseline {
    match spec {
        UncertaintySpec::Sus(_) => Baseline::DaroSus,
        UncertaintySpec::Dus(_) => Baseline::DaroDus,
    }
}

/// Returns whether every comparison is within tolerance.
pub fn cmd_oracle_check(points: usize, opts: &Common) -> anyhow::Result<bool> {
    let inst = load_instance(opts.instance_path()?)?;
    let model = match &opts.model {
        Some(_) => parse_model(opts)?,
        None => adaptive_for(&inst.uncertainty),
    };
    if !matches!(model, Baseline::DaroSus | Baseline::DaroDus) {
        bail!("oracle-check covers the adaptive models only");
    }
    let spec = spec_for(&inst, model, opts)?;
    let inst = inst.with_uncertainty(spec.clone());
    let cfg = opts.rod_config()?;
    let tol = cfg.eps_outer.max(1e-6);
    let inner_tol = cfg.eps_inner.max(1e-6);

    let rod = solve_baseline(&inst, model, &spec, &cfg)?;
    let full = exact_full(&inst, &spec, DEFAULT_CANDIDATE_CAP, &cfg.solver)?;
    let rel_diff = (rod.objective - full.objective).abs() / full.objective.abs().max(1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.unwrap_or(0));
    let start = Candidate::zeros(inst.ap_count(), inst.horizon);
    let mut inner = Vec::new();
    for k in 0..points {
        let fs = random_first_stage(&inst, &mut rng);
        let run = inner_loop(&inst, &fs, &spec, &start, &cfg)?;
        let q = exact_q(&inst, &fs, &spec, DEFAULT_CANDIDATE_CAP, &cfg.solver)?;
        let abs_diff = (run.value() - q.value).abs();
        let ok = abs_diff <= inner_tol;
        inner.push(InnerCheck { point: k, inner: run.value(), exact: q.value, abs_diff, ok });
    }
    let pass = rel_diff <= tol && inner.iter().all(|c| c.ok);
    let report = OracleReport {
        candidates: full.candidates,
        rod: rod.objective,
        exact: full.objective,
        rel_diff,
        tolerance: tol,
        inner_tolerance: inner_tol,
        inner,
        pass,
    };
    write_json(opts.out.as_deref(), &report)?;
    Ok(pass)
}

pub fn parse_models(list: Option<&str>, inst: &Instance) -> anyhow::Result<Vec<Baseline>> {
    match list {
        Some(l) => l.split(',').map(|s| Ok(s.trim().parse()?)).collect(),
        None => Ok(ALL_MODELS
            .into_iter()
            .filter(|m| *m != Baseline::DaroDus || matches!(inst.uncertainty, UncertaintySpec::Dus(_)))
            .collect()),
    }
}

pub fn cmd_evaluate(models: Option<&str>, trajectories: usize, samples: Option<&Path>, opts: &Common) -> anyhow::Result<()> {
    let inst = load_instance(opts.instance_path()?)?;
    let cfg = opts.rod_config()?;
    let seed = opts.seed.unwrap_or(0);
    let truth_spec = inst.uncertainty.with_budget(opts.gamma.unwrap_or_else(|| inst.uncertainty.budget()));
    let draws = sample_trajectories(&truth_spec, &inst.forecast, trajectories, seed)?;
    let mut policies = Vec::new();
    for model in parse_models(models, &inst)? {
        let result = solve_one(&inst, model, opts, &cfg).with_context(|| format!("solving {}", model_name(model)))?;
        let report = monte_carlo_eval(&inst, model_name(model), &Policy::of(&result), &draws, &cfg.solver)?;
        info!("{}: expected total {:.6}", report.policy, report.expected_total);
        policies.push(report);
    }
    let report = EvalReport { seed, trajectories, policies };
    write_json(opts.out.as_deref(), &report)?;
    let samples = samples.map(Path::to_path_buf).or_else(|| opts.out.as_deref().map(|o| sibling(o, "samples.csv")));
    if let Some(p) = samples {
        report.write_samples_csv(File::create(&p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    Ok(())
}
