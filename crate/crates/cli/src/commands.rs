use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tcpure_core::aggregate::{compare, family_stats};
use tcpure_core::config::RunConfig;
use tcpure_core::corpus::{load_generations, load_prompts, load_scores, save_generations, save_scores, ScoreRecord};
use tcpure_core::dpo::{build_pairs, write_pairs};
use tcpure_core::render::{render_comparison_csv, render_evaluation_csv, render_markdown};
use tcpure_core::{score_batch, AggregateReport, Comparison};
use tcpure_runner::{EndpointSpec, Runner};

use crate::error::CliError;
use crate::{
    AggregateArgs, BuildDpoArgs, Cli, Command, CompareArgs, Format, PolicyArgs, ReportArgs, RunBenchArgs, ScoreArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Score(a) => score(config, a),
        Command::Aggregate(a) => aggregate(config, a),
        Command::Compare(a) => compare_cmd(a),
        Command::RunBench(a) => run_bench(config, a),
        Command::BuildDpo(a) => build_dpo(config, a),
        Command::Report(a) => report(a),
    }
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

/// Flag value, else the config file's, else a usage error.
fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| CliError::user("usage", format!("missing --{name} (not set in the config file either)")))
}

fn apply_policy_flag(config: &mut RunConfig, flag: &PolicyArgs) {
    if let Some(p) = &flag.policy {
        config.policy.preset = p.clone();
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::user("io", msg)
        } else {
            CliError::internal("io", msg)
        }
    })
}

/// A closed pipe (`| head`) is not an error.
fn to_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::internal("io", format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal("serialize", e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData) {
            CliError::user("io", msg)
        } else {
            CliError::internal("io", msg)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::user("malformed", format!("{}: {e}", path.display())))
}

fn score(mut config: RunConfig, args: ScoreArgs) -> Result<()> {
    apply_policy_flag(&mut config, &args.policy);
    let input = required(args.generations, &config.paths.generations, "generations")?;
    let out = required(args.out, &config.paths.scores, "out")?;
    let policy = config.policy.resolve()?;
    let generations = load_generations(&input)?;
    if generations.is_empty() {
        warn(format!(
            "{} holds no generations; writing an empty scores file",
            input.display()
        ));
    }
    let scored = score_batch(&generations, &policy)?;
    let records: Vec<ScoreRecord> = scored
        .iter()
        .map(|(key, s)| ScoreRecord::new(key.clone(), s, policy.name()))
        .collect();
    let degenerate = records.iter().filter(|r| r.degenerate).count();
    if degenerate > 0 {
        warn(format!(
            "{degenerate} generation(s) are empty after normalization and score as OLR 1.0"
        ));
    }
    save_scores(&out, &records)?;
    log::info!(
        "scored {} generations under `{}` -> {}",
        records.len(),
        policy.name(),
        out.display()
    );
    Ok(())
}

fn aggregate(config: RunConfig, args: AggregateArgs) -> Result<()> {
    let scores_path = required(args.scores, &config.paths.scores, "scores")?;
    let prompts_path = required(args.prompts, &config.paths.prompts, "prompts")?;
    let out = required(args.out, &config.paths.report, "out")?;
    let manifest = config.manifest();

    let pool = load_prompts(&prompts_path, &manifest)?;
    let scores: Vec<ScoreRecord> = load_scores(&scores_path)?
        .into_iter()
        .filter(|s| args.model.as_ref().is_none_or(|m| &s.model_id == m))
        .filter(|s| args.run_id.as_ref().is_none_or(|r| &s.run_id == r))
        .collect();

    let runs: BTreeSet<(&str, &str)> = scores
        .iter()
        .map(|s| (s.model_id.as_str(), s.run_id.as_str()))
        .collect();
    let (model_id, run_id) = match runs.len() {
        0 => {
            return Err(CliError::user(
                "aggregate",
                format!("no matching scores in {}", scores_path.display()),
            ))
        }
        1 => *runs.iter().next().unwrap(),
        _ => {
            let list: Vec<String> = runs.iter().map(|(m, r)| format!("{m}/{r}")).collect();
            return Err(CliError::user(
                "aggregate",
                format!(
                    "scores hold several model/run pairs ({}); pick one with --model/--run-id",
                    list.join(", ")
                ),
            ));
        }
    };
    let presets: BTreeSet<&str> = scores.iter().map(|s| s.policy_preset.as_str()).collect();
    if presets.len() > 1 {
        let list: Vec<&str> = presets.into_iter().collect();
        return Err(CliError::user(
            "aggregate",
            format!("scores mix policy presets: {}", list.join(", ")),
        ));
    }
    let policy_preset = presets.into_iter().next().unwrap().to_string();

    let families = pool.family_index();
    let mut pairs = Vec::with_capacity(scores.len());
    for s in &scores {
        let family = families
            .get(s.prompt_id.as_str())
            .ok_or_else(|| tcpure_core::Error::UnknownPrompt(s.prompt_id.clone()))?;
        pairs.push((*family, s));
    }
    let outcome = family_stats(pairs.iter().map(|(f, s)| (*f, *s)), &manifest)?;
    for w in &outcome.warnings {
        warn(w);
    }

    let mut config = config;
    if let Some(d) = args.decoding {
        config.decoding.preset = d;
    }
    let (decoding_preset, _) = config.decoding.resolve()?;
    let resolved = config.resolved_json()?;
    if resolved["policy"]["name"].as_str() != Some(policy_preset.as_str()) {
        warn(format!(
            "scores were produced under `{policy_preset}`, the configuration names `{}`",
            resolved["policy"]["name"].as_str().unwrap_or("?")
        ));
    }
    let mut report = AggregateReport::new(model_id, run_id, &policy_preset, &decoding_preset, outcome.stats)?;
    report.config = Some(resolved);
    write_json(&out, &report)?;
    log::info!(
        "{model_id}/{run_id}: macro OLR {:.4}, micro OLR {:.4} -> {}",
        report.macro_olr,
        report.micro_olr,
        out.display()
    );
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let ours: AggregateReport = read_json(&args.ours)?;
    let baseline: AggregateReport = read_json(&args.baseline)?;
    let cmp = compare(&ours, &baseline)?;
    match args.out {
        Some(out) => write_json(&out, &cmp),
        None => {
            let mut text =
                serde_json::to_string_pretty(&cmp).map_err(|e| CliError::internal("serialize", e.to_string()))?;
            text.push('\n');
            to_stdout(&text)
        }
    }
}

fn run_bench(mut config: RunConfig, args: RunBenchArgs) -> Result<()> {
    let prompts_path = required(args.prompts, &config.paths.prompts, "prompts")?;
    let out = required(args.out, &config.paths.generations, "out")?;
    let endpoint_cfg = config.endpoint.clone();
    let base_url = args
        .endpoint
        .or_else(|| endpoint_cfg.as_ref().map(|e| e.base_url.clone()))
        .ok_or_else(|| CliError::user("usage", "missing --endpoint (not set in the config file either)"))?;
    let model = args
        .model
        .or_else(|| endpoint_cfg.as_ref().map(|e| e.model.clone()))
        .ok_or_else(|| CliError::user("usage", "missing --model (not set in the config file either)"))?;

    let mut spec = EndpointSpec::new(&base_url, &model);
    spec.api_key = args.api_key;
    if let Some(e) = &endpoint_cfg {
        if let Some(t) = e.timeout_secs {
            spec.timeout = Duration::from_secs(t);
        }
        if let Some(n) = e.max_in_flight {
            spec.max_in_flight = n;
        }
        if let Some(n) = e.max_retries {
            spec.max_retries = n;
        }
        if let Some(p) = &e.penalty_field {
            spec.penalty_field = p.parse()?;
        }
    }
    if let Some(t) = args.timeout_secs {
        spec.timeout = Duration::from_secs(t);
    }
    if let Some(n) = args.concurrency {
        spec.max_in_flight = n;
    }
    if let Some(n) = args.max_retries {
        spec.max_retries = n;
    }
    if let Some(p) = &args.penalty_field {
        spec.penalty_field = p.parse()?;
    }
    if let Some(d) = args.decoding {
        config.decoding.preset = d;
    }
    let (decoding_name, decoding) = config.decoding.resolve()?;
    let run_id = args
        .run_id
        .unwrap_or_else(|| chrono::Utc::now().format("run-%Y%m%dT%H%M%SZ").to_string());

    let pool = load_prompts(&prompts_path, &config.manifest())?;
    for w in &pool.warnings {
        warn(w);
    }
    let runner = Runner::new(spec)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal("runtime", e.to_string()))?;
    log::info!(
        "running {} prompts against {base_url} ({model}), decoding `{decoding_name}`, run {run_id}",
        pool.records.len()
    );
    let records = rt.block_on(runner.run_benchmark(&pool.records, &decoding, &run_id))?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        warn(format!(
            "{failed} of {} prompts failed and were recorded with empty text",
            records.len()
        ));
    }
    save_generations(&out, &records)?;
    Ok(())
}

fn build_dpo(mut config: RunConfig, args: BuildDpoArgs) -> Result<()> {
    apply_policy_flag(&mut config, &args.policy);
    let prompts_path = required(args.prompts, &config.paths.prompts, "prompts")?;
    let out = required(args.out, &config.paths.out, "out")?;
    let policy = config.policy.resolve()?;
    let mut thresholds = config.dpo_thresholds();
    if let Some(v) = args.chosen_max_olr {
        thresholds.chosen_max_olr = v;
    }
    if let Some(v) = args.rejected_min_olr {
        thresholds.rejected_min_olr = v;
    }
    let pool = load_prompts(&prompts_path, &config.manifest())?;
    let preferred = load_generations(&args.preferred)?;
    let candidates = load_generations(&args.candidates)?;
    let build = build_pairs(&pool.records, &preferred, &candidates, &policy, thresholds)?;
    let sidecar = write_pairs(&out, &build.triplets, policy.name())?;
    let s = &build.summary;
    eprintln!(
        "built {} pairs from {} prompts (skipped: {} without preferred, {} with impure preferred, {} without candidate); metadata in {}",
        s.emitted,
        s.prompts,
        s.skipped_no_preferred,
        s.skipped_preferred_impure,
        s.skipped_no_candidate,
        sidecar.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    if args.reports.is_empty() && args.comparisons.is_empty() {
        return Err(CliError::user("usage", "give at least one --report or --comparison"));
    }
    let reports: Vec<AggregateReport> = args.reports.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let comparisons: Vec<Comparison> = args.comparisons.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let report_refs: Vec<&AggregateReport> = reports.iter().collect();
    let cmp_refs: Vec<&Comparison> = comparisons.iter().collect();
    let text = match args.format {
        Format::Markdown => render_markdown(&report_refs, &cmp_refs),
        Format::Csv => {
            let mut parts = Vec::new();
            if !report_refs.is_empty() {
                parts.push(render_evaluation_csv(&report_refs));
            }
            if !cmp_refs.is_empty() {
                parts.push(render_comparison_csv(&cmp_refs));
            }
            parts.join("\n")
        }
    };
    match args.out {
        Some(out) => write_text(&out, &text),
        None => to_stdout(&text),
    }
}
