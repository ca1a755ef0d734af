use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use grounding_reward::config::Config;
use grounding_reward::interval::SegmentSet;
use grounding_reward::metrics::{
    evaluate_single, multi_segment_f1, record_f1_mean, record_iou, write_scores_csv, EvalRecord,
    RecordScore,
};
use grounding_reward::parser::parse_output;
use grounding_reward::schedule::{compute_reward, RewardBreakdown};
use grounding_reward::sim::run_simulation;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{EvalKind, RewardArgs};

/// Window, in steps, for the simulation summary.
const SUMMARY_WINDOW: usize = 100;

fn load_config(path: Option<&Path>, overrides: &RewardArgs) -> Result<Config> {
    let mut config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let r = &mut config.reward;
    if let Some(v) = overrides.alpha {
        r.alpha = v;
    }
    if let Some(v) = overrides.beta {
        r.beta = v;
    }
    if let Some(v) = overrides.strategy {
        r.strategy = v.into();
    }
    if let Some(v) = overrides.phase_switch {
        r.phase_switch_step = v;
    }
    if let Some(v) = overrides.tolerance {
        r.timestamp_tolerance = v;
    }
    config.validate()?;
    Ok(config)
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("failed to read standard input")?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))
}

/// Non-blank lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Decodes one JSON line. On failure returns the record id, when readable,
/// with the error text.
fn decode<T: for<'de> Deserialize<'de>>(line: &str) -> Result<T, (Option<String>, String)> {
    let value: Value = serde_json::from_str(line).map_err(|e| (None, e.to_string()))?;
    let id = value.get("id").and_then(Value::as_str).map(str::to_owned);
    serde_json::from_value(value).map_err(|e| (id, e.to_string()))
}

#[derive(Deserialize)]
struct ScoreRecord {
    id: String,
    gt: SegmentSet,
    raw_output: String,
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
}

#[derive(Serialize)]
struct ErrorLine {
    line: usize,
    id: Option<String>,
    error: String,
}

#[derive(Serialize)]
struct ScoreSummary {
    records: usize,
    errors: usize,
    mean_r_global: Option<f64>,
    mean_r_match: Option<f64>,
    mean_r_timestamp: Option<f64>,
    mean_r_format: Option<f64>,
    mean_total: Option<f64>,
}

#[derive(Serialize)]
struct Footer {
    summary: ScoreSummary,
}

pub fn score(
    config: Option<&Path>,
    overrides: &RewardArgs,
    input: &Path,
    step: u64,
) -> Result<ExitCode> {
    let cfg = load_config(config, overrides)?.reward;
    let text = read_input(input)?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut scored: Vec<RewardBreakdown> = Vec::new();
    let mut errors = 0;

    for (line, body) in records(&text) {
        match decode::<ScoreRecord>(body) {
            Ok(rec) => {
                let breakdown = compute_reward(&rec.gt, &rec.raw_output, step, &cfg);
                serde_json::to_writer(
                    &mut out,
                    &ScoreLine {
                        id: &rec.id,
                        breakdown,
                    },
                )?;
                scored.push(breakdown);
            }
            Err((id, error)) => {
                errors += 1;
                serde_json::to_writer(&mut out, &ErrorLine { line, id, error })?;
            }
        }
        writeln!(out)?;
    }

    let mean = |f: fn(&RewardBreakdown) -> f64| {
        (!scored.is_empty()).then(|| scored.iter().map(f).sum::<f64>() / scored.len() as f64)
    };
    let summary = ScoreSummary {
        records: scored.len() + errors,
        errors,
        mean_r_global: mean(|b| b.r_global),
        mean_r_match: mean(|b| b.r_match),
        mean_r_timestamp: mean(|b| b.r_timestamp),
        mean_r_format: mean(|b| b.r_format),
        mean_total: mean(|b| b.total),
    };
    serde_json::to_writer(&mut out, &Footer { summary })?;
    writeln!(out)?;
    out.flush()?;
    Ok(if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn eval(input: &Path, kind: EvalKind, csv_out: Option<&Path>) -> Result<ExitCode> {
    let text = read_input(input)?;
    let mut recs: Vec<EvalRecord> = Vec::new();
    let mut seen = HashSet::new();
    let mut errors = 0;
    for (line, body) in records(&text) {
        match decode::<EvalRecord>(body) {
            Ok(rec) if !seen.insert(rec.id.clone()) => {
                errors += 1;
                eprintln!("line {line}: duplicate id {:?}", rec.id);
            }
            Ok(rec) => recs.push(rec),
            Err((id, error)) => {
                errors += 1;
                match id {
                    Some(id) => eprintln!("line {line} ({id}): {error}"),
                    None => eprintln!("line {line}: {error}"),
                }
            }
        }
    }
    if recs.is_empty() {
        bail!("no valid evaluation records in {}", input.display());
    }

    let (report, per_record): (_, fn(&EvalRecord) -> f64) = match kind {
        EvalKind::Single => (evaluate_single(&recs)?, record_iou),
        EvalKind::Multi => (multi_segment_f1(&recs)?, record_f1_mean),
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string_pretty(&report)?);

    if let Some(path) = csv_out {
        let scores: Vec<RecordScore> = recs
            .iter()
            .map(|r| RecordScore {
                id: r.id.clone(),
                score: per_record(r),
            })
            .collect();
        let file =
            File::create(path).with_context(|| format!("failed to create {}", path.display()))?;
        write_scores_csv(BufWriter::new(file), &scores)?;
    }
    Ok(if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Serialize)]
struct SimSummary {
    seed: u64,
    steps: usize,
    window: usize,
    initial_mean_r_match: f64,
    final_mean_r_match: f64,
    final_mean_r_timestamp: f64,
    final_mean_count_gap: f64,
}

pub fn simulate(
    config: Option<&Path>,
    overrides: &RewardArgs,
    seed: u64,
    steps: Option<u64>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let mut config = load_config(config, overrides)?;
    if let Some(steps) = steps {
        config.simulation.steps = steps;
    }
    let log = run_simulation(&config.reward, &config.simulation, seed)?;

    let window = SUMMARY_WINDOW.min(log.len());
    let summary = SimSummary {
        seed,
        steps: log.len(),
        window,
        initial_mean_r_match: log.initial_mean_r_match(window),
        final_mean_r_match: log.final_mean_r_match(window),
        final_mean_r_timestamp: log.final_mean_r_timestamp(window),
        final_mean_count_gap: log.final_mean_count_gap(window),
    };
    let summary = serde_json::to_string(&summary)?;
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("failed to create {}", path.display()))?;
            log.write_csv(BufWriter::new(file))?;
            println!("{summary}");
        }
        None => {
            log.write_csv(io::stdout().lock())?;
            eprintln!("{summary}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Always succeeds: malformed text is a valid parse result.
pub fn parse(text: Option<String>) -> Result<ExitCode> {
    let text = match text {
        Some(t) => t,
        None => {
            let mut bytes = Vec::new();
            // an unreadable stdin parses like empty input
            let _ = io::stdin().read_to_end(&mut bytes);
            String::from_utf8_lossy(&bytes).into_owned()
        }
    };
    println!("{}", serde_json::to_string_pretty(&parse_output(&text))?);
    Ok(ExitCode::SUCCESS)
}
