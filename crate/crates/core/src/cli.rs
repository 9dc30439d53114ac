//! The `l2t` command line: validate, mask, synth, eval and stats.
//!
//! Exit status is 0 on success, 1 when a module reports an error and 2 for
//! usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{bucket_report, Axis};
use crate::counterfactual::{
    build_header_pool, synthesize_dataset, Ratio, Strategy, SynthesisConfig,
};
use crate::dataset_io::{encode_samples, load_dataset, read_predictions, write_atomic, Sample};
use crate::logic_form::{parse_str, OperatorRegistry};
use crate::logic_graph::{attention_mask, KeyedMask, MaskPolicy};
use crate::metrics::{
    bleu_stats, corpus_mtr, corpus_score, ConsistencyMode, MtrOptions, OperatorLexicon,
};

#[derive(Debug, Parser)]
#[command(
    name = "l2t",
    version,
    about = "Logical-form toolkit for Logic2Text data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that every record loads and its form parses.
    Validate(ValidateArgs),
    /// Export attention masks for one form or a whole dataset.
    Mask(MaskArgs),
    /// Synthesize counterfactual samples by header replacement.
    Synth(SynthArgs),
    /// Score predictions against a gold dataset.
    Eval(EvalArgs),
    /// Complexity-bucketed sample counts and MTR.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Report every bad line instead of stopping at the first.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["form", "data"]))]
struct MaskArgs {
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// children-only or parent-and-children
    #[arg(long, default_value = "children-only")]
    policy: MaskPolicy,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    data: PathBuf,
    /// random, disturb or mix
    #[arg(long)]
    strategy: Strategy,
    /// Ratio of synthetic to original samples: an integer, a decimal, a/b or inf.
    #[arg(long)]
    ratio: Ratio,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Number of samples to emit when the ratio is inf (default: dataset size).
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Blec,
    BlecStar,
    Mtr,
    Bleu,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// One prediction per line, aligned with the gold records.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum)]
    metric: Metric,
    /// JSON keyword lexicon replacing the built-in one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Write the machine-readable report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Count operator tokens with missing keywords in MTR.
    #[arg(long)]
    count_operators: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    pred: Option<PathBuf>,
    /// depth or nodes
    #[arg(long)]
    by: Axis,
    #[arg(long, default_value_t = 1)]
    width: usize,
    /// Write the plot-ready JSON record here.
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Run the CLI on `argv` (program name first) and return the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                let _ = write!(stderr, "{}", err.render());
                2
            } else {
                let _ = write!(stdout, "{}", err.render());
                0
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate(args) => validate(args, stdout, stderr),
        Command::Mask(args) => mask(args, stdout),
        Command::Synth(args) => synth(args, stdout),
        Command::Eval(args) => eval(args, stdout),
        Command::Stats(args) => stats(args, stdout),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err:#}");
            1
        }
    }
}

fn load_strict(path: &Path) -> Result<Vec<Sample>> {
    Ok(load_dataset(path, true)
        .with_context(|| format!("loading {}", path.display()))?
        .into_samples())
}

fn load_predictions(path: &Path, expected: usize) -> Result<Vec<String>> {
    let preds = read_predictions(path).with_context(|| format!("reading {}", path.display()))?;
    if preds.len() != expected {
        bail!(
            "{} has {} predictions but the dataset has {expected} samples",
            path.display(),
            preds.len()
        );
    }
    Ok(preds)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn validate(args: ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let file = load_dataset(&args.data, !args.lenient)
        .with_context(|| format!("loading {}", args.data.display()))?;
    for err in &file.errors {
        writeln!(stderr, "error: {err}")?;
    }
    let registry = OperatorRegistry::default();
    for record in &file.records {
        let tree = record.sample.tree()?;
        let unknown = registry.unknown_operators(&tree);
        if !unknown.is_empty() {
            writeln!(
                stderr,
                "warning: line {}: unknown operators {}",
                record.line,
                unknown.join(", ")
            )?;
        }
    }
    if file.errors.is_empty() {
        writeln!(stdout, "ok: {} samples", file.len())?;
        Ok(0)
    } else {
        writeln!(
            stdout,
            "invalid: {} samples loaded, {} bad lines",
            file.len(),
            file.errors.len()
        )?;
        Ok(1)
    }
}

fn mask(args: MaskArgs, stdout: &mut dyn Write) -> Result<i32> {
    let mut text = String::new();
    if let Some(form) = &args.form {
        let tree = parse_str(form)?;
        text.push_str(&serde_json::to_string(&attention_mask(&tree, args.policy))?);
        text.push('\n');
    } else if let Some(data) = &args.data {
        let file =
            load_dataset(data, true).with_context(|| format!("loading {}", data.display()))?;
        for record in &file.records {
            let keyed = KeyedMask {
                id: record.line.to_string(),
                mask: attention_mask(&record.sample.tree()?, args.policy),
            };
            text.push_str(&serde_json::to_string(&keyed)?);
            text.push('\n');
        }
    }
    match &args.out {
        Some(path) => {
            write_output(path, &text)?;
            writeln!(stdout, "wrote {} ({})", path.display(), args.policy)?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn synth(args: SynthArgs, stdout: &mut dyn Write) -> Result<i32> {
    let seed = args.seed.unwrap_or(0);
    let data = load_strict(&args.data)?;
    let pool = build_header_pool(&data)?;
    let mut config = SynthesisConfig::new(args.strategy, args.ratio, seed);
    config.infinite_count = args.count;
    let synthesis = synthesize_dataset(&data, &config, &pool)?;
    write_output(
        &args.out,
        &encode_samples(synthesis.samples.iter().map(|c| &c.sample)),
    )?;
    writeln!(
        stdout,
        "wrote {} samples to {} (seed {seed}, {} eligible of {}, {} disturb fallbacks)",
        synthesis.samples.len(),
        args.out.display(),
        synthesis.eligible,
        data.len(),
        synthesis.fallbacks
    )?;
    Ok(0)
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let gold = load_strict(&args.gold)?;
    let preds = load_predictions(&args.pred, gold.len())?;
    let lexicon = match &args.lexicon {
        Some(path) => OperatorLexicon::load(path)?,
        None => OperatorLexicon::default(),
    };
    let (name, score, failed, record) = match args.metric {
        Metric::Blec | Metric::BlecStar => {
            let mode = if args.metric == Metric::Blec {
                ConsistencyMode::Blec
            } else {
                ConsistencyMode::BlecStar
            };
            let report = corpus_score(&gold, &preds, mode, &lexicon)?;
            (
                report.metric.clone(),
                format!("{:.2}", report.score),
                report.failures.len().to_string(),
                to_json(&report),
            )
        }
        Metric::Mtr => {
            let options = MtrOptions {
                count_operators: args.count_operators,
            };
            let report = corpus_mtr(&gold, &preds, options, &lexicon)?;
            let nonzero = report.rates.iter().filter(|&&r| r > 0.0).count();
            (
                "MTR".to_string(),
                format!("{:.4}", report.mean),
                nonzero.to_string(),
                to_json(&report),
            )
        }
        Metric::Bleu => {
            let refs: Vec<String> = gold.iter().map(|s| s.sent.clone()).collect();
            let stats = bleu_stats(&refs, &preds)?;
            (
                "BLEU-4".to_string(),
                format!("{:.2}", stats.score),
                "-".to_string(),
                to_json(&stats),
            )
        }
    };
    let samples = gold.len().to_string();
    let w = [name.len().max(6), score.len().max(5), samples.len().max(7)];
    writeln!(
        stdout,
        "{:<a$}  {:>b$}  {:>c$}  failed",
        "metric",
        "score",
        "samples",
        a = w[0],
        b = w[1],
        c = w[2]
    )?;
    writeln!(
        stdout,
        "{:<a$}  {:>b$}  {:>c$}  {failed:>6}",
        name,
        score,
        samples,
        a = w[0],
        b = w[1],
        c = w[2]
    )?;
    if let Some(path) = &args.report {
        write_output(path, &record)?;
    }
    Ok(0)
}

fn stats(args: StatsArgs, stdout: &mut dyn Write) -> Result<i32> {
    let data = load_strict(&args.data)?;
    let preds = match &args.pred {
        Some(path) => Some(load_predictions(path, data.len())?),
        None => None,
    };
    let report = bucket_report(&data, preds.as_deref(), args.by, args.width)?;
    stdout.write_all(report.render_table().as_bytes())?;
    if let Some(path) = &args.json {
        write_output(path, &to_json(&report))?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("l2t").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&[]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["validate", "--bogus"]).0, 2);
        assert_eq!(
            run_capture(&["mask", "--form", "x", "--policy", "all"]).0,
            2
        );
        assert_eq!(run_capture(&["mask"]).0, 2);
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("synth"));
    }

    #[test]
    fn mask_prints_argmax_row() {
        let (code, out, _) = run_capture(&[
            "mask",
            "--form",
            "hop { argmax { all_rows ; attendance } ; date }",
            "--policy",
            "children-only",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["policy"], "children_only");
        assert_eq!(
            v["mask"][2],
            serde_json::json!([0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0])
        );
    }

    #[test]
    fn module_errors_exit_one() {
        let (code, _, err) = run_capture(&["mask", "--form", "hop { a"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
        let (code, _, err) = run_capture(&["validate", "--data", "/nonexistent/x.jsonl"]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/x.jsonl"));
    }
}
