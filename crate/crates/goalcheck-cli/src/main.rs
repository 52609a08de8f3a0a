//! Command-line interface to the conformance engine: rule validation,
//! sequence checking, metric scoring, benchmark generation,
//! meta-evaluation, and planner-output scoring.
//!
//! Exit codes compose in shell pipelines: 0 means valid (or success), 1
//! invalid, 2 a parse or input failure, 3 an unknown phase, 4 an
//! unsatisfiable generation request.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use goalcheck::benchgen::{self, BenchmarkSpec, Label};
use goalcheck::checker;
use goalcheck::judge::{JudgeClient, JudgeConfig, PlanJudge};
use goalcheck::metaeval::{
    render_report, run_metaeval, EvaluatorId, MetaEvalOptions, ReportFormat,
};
use goalcheck::metrics::{score_against_reference, MetricConfig};
use goalcheck::model::{StepSequence, Vocabulary};
use goalcheck::planeval::{aggregate, read_records, render_plan_report, score_record, PlanScore};
use goalcheck::rules::{
    canonical_reference, parse_rules, parse_rules_with_vocab, validate_ruleset, RuleSet,
};

const EXIT_INVALID: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_UNKNOWN_PHASE: u8 = 3;
const EXIT_UNSATISFIABLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "goalcheck",
    version,
    about = "Goal-satisfiability conformance checking and evaluator meta-evaluation for phase-structured procedural plans"
)]
struct Cli {
    /// Rule specification file (.rules DSL)
    #[arg(long, global = true, value_name = "FILE")]
    rules: Option<PathBuf>,

    /// Vocabulary JSON merged into the rules file's declarations
    #[arg(long, global = true, value_name = "FILE")]
    vocab: Option<PathBuf>,

    /// JSON config file supplying defaults for the other flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Similarity threshold for binary metric decisions
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Seed for all randomness
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Report format: json, csv, or markdown
    #[arg(long, global = true)]
    format: Option<String>,

    /// Judge configuration file (enables judge evaluator columns)
    #[arg(long, global = true, value_name = "FILE")]
    judge_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a step sequence against a phase's rules
    Check {
        /// Target phase code
        #[arg(long)]
        phase: String,
        /// Comma-separated step codes, e.g. S22,S23,S24,S25
        #[arg(long)]
        seq: String,
    },
    /// Parse the rule file and report validation diagnostics
    Validate,
    /// Score a sequence against the phase's canonical reference with every metric
    Score {
        #[arg(long)]
        phase: String,
        #[arg(long)]
        seq: String,
    },
    /// Generate a labeled benchmark as JSONL
    Gen {
        /// Number of rule-valid items
        #[arg(long)]
        valid: Option<usize>,
        /// Number of order-error items
        #[arg(long)]
        oe: Option<usize>,
        /// Number of content-error items
        #[arg(long)]
        ce: Option<usize>,
        /// Number of both-error items
        #[arg(long)]
        be: Option<usize>,
        /// Ancillary insertions per valid item, at most
        #[arg(long)]
        max_insertions: Option<usize>,
        /// Maximum sequence length
        #[arg(long)]
        max_len: Option<usize>,
        /// Output JSONL path
        #[arg(long)]
        out: PathBuf,
    },
    /// Meta-evaluate evaluators against a labeled benchmark
    Metaeval {
        /// Benchmark JSONL produced by `gen`
        #[arg(long)]
        benchmark: PathBuf,
        /// Comma-separated evaluators: ned, jis, roa, rule, judge[:<name>]
        #[arg(long)]
        evaluators: Option<String>,
        /// Report output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score planner outputs from a JSONL of model records
    Planeval {
        /// Model output records JSONL
        #[arg(long)]
        outputs: PathBuf,
        /// Report output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A subcommand failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    fn unknown_phase(phase: &str) -> Self {
        Failure {
            code: EXIT_UNKNOWN_PHASE,
            message: format!("phase {phase} has no rule specification"),
        }
    }

    fn unsatisfiable(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_UNSATISFIABLE,
            message: message.into(),
        }
    }
}

/// Config-file counterpart of the global flags.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    rules: Option<PathBuf>,
    vocab: Option<PathBuf>,
    threshold: Option<f64>,
    seed: Option<u64>,
    format: Option<String>,
    judge_config: Option<PathBuf>,
}

/// Fully resolved configuration: flags override config-file values override
/// defaults. Echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct EffectiveConfig {
    rules: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    vocab: Option<String>,
    threshold: f64,
    seed: u64,
    format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    judge_config: Option<String>,
}

struct Resolved {
    rules: PathBuf,
    vocab: Option<PathBuf>,
    threshold: f64,
    seed: u64,
    format: ReportFormat,
    judge_config: Option<PathBuf>,
    echo: EffectiveConfig,
}

fn resolve_config(cli: &Cli) -> Result<Resolved, Failure> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::parse(format!("config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::parse(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let rules = cli
        .rules
        .clone()
        .or(file.rules)
        .ok_or_else(|| Failure::parse("no rules file: pass --rules or set it in --config"))?;
    let vocab = cli.vocab.clone().or(file.vocab);
    let threshold = cli.threshold.or(file.threshold).unwrap_or(0.7);
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let format_name = cli
        .format
        .clone()
        .or(file.format)
        .unwrap_or_else(|| "markdown".to_string());
    let format: ReportFormat = format_name.parse().map_err(|e: String| Failure::parse(e))?;
    let judge_config = cli.judge_config.clone().or(file.judge_config);

    let echo = EffectiveConfig {
        rules: rules.display().to_string(),
        vocab: vocab.as_ref().map(|p| p.display().to_string()),
        threshold,
        seed,
        format: format_name,
        judge_config: judge_config.as_ref().map(|p| p.display().to_string()),
    };
    Ok(Resolved {
        rules,
        vocab,
        threshold,
        seed,
        format,
        judge_config,
        echo,
    })
}

fn load_ruleset(cfg: &Resolved) -> Result<RuleSet, Failure> {
    let source = fs::read_to_string(&cfg.rules)
        .map_err(|e| Failure::parse(format!("rules {}: {e}", cfg.rules.display())))?;
    let parsed = match &cfg.vocab {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::parse(format!("vocab {}: {e}", path.display())))?;
            let vocab = Vocabulary::from_json(&text)
                .map_err(|e| Failure::parse(format!("vocab {}: {e}", path.display())))?;
            parse_rules_with_vocab(&source, &vocab)
        }
        None => parse_rules(&source),
    };
    parsed.map_err(|e| Failure::parse(format!("{}:{e}", cfg.rules.display())))
}

/// Adds the effective config to a rendered report: a `config` key for JSON,
/// leading comment lines for CSV, a trailing line for markdown.
fn with_config_echo(rendered: String, format: ReportFormat, echo: &EffectiveConfig) -> String {
    match format {
        ReportFormat::Json => {
            let mut value: serde_json::Value =
                serde_json::from_str(&rendered).expect("rendered report is JSON");
            value
                .as_object_mut()
                .expect("rendered report is an object")
                .insert(
                    "config".to_string(),
                    serde_json::to_value(echo).expect("config serializes"),
                );
            let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
            text.push('\n');
            text
        }
        ReportFormat::Csv => {
            format!(
                "# rules: {}\n# format: {}\n{rendered}",
                echo.rules, echo.format
            )
        }
        ReportFormat::Markdown => {
            format!(
                "{rendered}config: rules={}; threshold={}; seed={}\n",
                echo.rules, echo.threshold, echo.seed
            )
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::parse(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_check(cfg: &Resolved, phase: &str, seq_text: &str) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let seq = StepSequence::parse(seq_text);
    let verdict = checker::check(&seq, phase, &rs).map_err(|_| Failure::unknown_phase(phase))?;
    println!("{}", verdict.to_json());
    Ok(if verdict.valid { 0 } else { EXIT_INVALID })
}

fn cmd_validate(cfg: &Resolved) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let diagnostics = validate_ruleset(&rs);
    println!(
        "{}",
        serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize")
    );
    Ok(if diagnostics.is_empty() {
        0
    } else {
        EXIT_INVALID
    })
}

fn cmd_score(cfg: &Resolved, phase: &str, seq_text: &str) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let spec = rs
        .spec(phase)
        .ok_or_else(|| Failure::unknown_phase(phase))?;
    let reference = canonical_reference(spec).map_err(|e| Failure::parse(e.to_string()))?;
    let metric_cfg =
        MetricConfig::with_threshold(cfg.threshold).map_err(|e| Failure::parse(e.to_string()))?;
    let seq = StepSequence::parse(seq_text);
    let scores = score_against_reference(&seq, phase, &rs, &metric_cfg)
        .map_err(|e| Failure::parse(e.to_string()))?;
    let output = serde_json::json!({
        "config": &cfg.echo,
        "phase": phase,
        "canonical_reference": reference.codes(),
        "scores": scores,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("scores serialize")
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    cfg: &Resolved,
    valid: Option<usize>,
    oe: Option<usize>,
    ce: Option<usize>,
    be: Option<usize>,
    max_insertions: Option<usize>,
    max_len: Option<usize>,
    out: &Path,
) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let defaults = BenchmarkSpec::default();
    let bspec = BenchmarkSpec {
        valid: valid.unwrap_or(defaults.valid),
        order: oe.unwrap_or(defaults.order),
        content: ce.unwrap_or(defaults.content),
        both: be.unwrap_or(defaults.both),
        seed: cfg.seed,
        max_insertions: max_insertions.unwrap_or(defaults.max_insertions),
        max_len: max_len.unwrap_or(defaults.max_len),
    };
    let items = benchgen::build_benchmark(&rs, &bspec).map_err(|e| match e {
        benchgen::GenError::Unsatisfiable { .. }
        | benchgen::GenError::NoApplicableMutation(_)
        | benchgen::GenError::NoForeignStep(_) => Failure::unsatisfiable(e.to_string()),
        other => Failure::parse(other.to_string()),
    })?;
    fs::write(out, benchgen::write_jsonl(&items))
        .map_err(|e| Failure::parse(format!("writing {}: {e}", out.display())))?;

    let count = |label: Label| items.iter().filter(|i| i.label == label).count();
    let summary = serde_json::json!({
        "config": &cfg.echo,
        "out": out.display().to_string(),
        "items": items.len(),
        "counts": {
            "Valid": count(Label::Valid),
            "OE": count(Label::Order),
            "CE": count(Label::Content),
            "BE": count(Label::Both),
        },
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(0)
}

fn cmd_metaeval(
    cfg: &Resolved,
    benchmark: &Path,
    evaluators: Option<&str>,
    out: &Option<PathBuf>,
) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let text = fs::read_to_string(benchmark)
        .map_err(|e| Failure::parse(format!("benchmark {}: {e}", benchmark.display())))?;
    let items = benchgen::read_jsonl(&text)
        .map_err(|e| Failure::parse(format!("benchmark {}: {e}", benchmark.display())))?;

    let judge_client: Option<JudgeClient> = match &cfg.judge_config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::parse(format!("judge config {}: {e}", path.display())))?;
            let config = JudgeConfig::from_json(&text)
                .map_err(|e| Failure::parse(format!("judge config {}: {e}", path.display())))?;
            Some(JudgeClient::new(config).map_err(|e| Failure::parse(e.to_string()))?)
        }
        None => None,
    };

    let tokens: Vec<String> = match evaluators {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
        None => ["ned", "jis", "roa", "rule"]
            .into_iter()
            .map(str::to_string)
            .collect(),
    };
    let mut ids = Vec::new();
    for token in &tokens {
        if token.eq_ignore_ascii_case("judge") {
            let client = judge_client
                .as_ref()
                .ok_or_else(|| Failure::parse("evaluator \"judge\" requires --judge-config"))?;
            ids.push(EvaluatorId::Judge(client.name().to_string()));
        } else {
            ids.push(token.parse().map_err(|e: String| Failure::parse(e))?);
        }
    }
    if ids.iter().any(|id| matches!(id, EvaluatorId::Judge(_))) && judge_client.is_none() {
        return Err(Failure::parse("judge evaluators require --judge-config"));
    }

    let metric_cfg =
        MetricConfig::with_threshold(cfg.threshold).map_err(|e| Failure::parse(e.to_string()))?;
    let opts = MetaEvalOptions {
        metric_cfg,
        evaluators: ids,
        max_in_flight: judge_client
            .as_ref()
            .map(|c| c.config().max_in_flight)
            .unwrap_or(4),
        seed: Some(cfg.seed),
    };
    let judges: Vec<&dyn PlanJudge> = judge_client
        .as_ref()
        .map(|c| vec![c as &dyn PlanJudge])
        .unwrap_or_default();
    let report =
        run_metaeval(&items, &rs, &opts, &judges).map_err(|e| Failure::parse(e.to_string()))?;

    let rendered = with_config_echo(render_report(&report, cfg.format), cfg.format, &cfg.echo);
    emit(out, &rendered)?;
    Ok(if report.all_available() {
        0
    } else {
        EXIT_PARSE
    })
}

fn cmd_planeval(cfg: &Resolved, outputs: &Path, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let rs = load_ruleset(cfg)?;
    let text = fs::read_to_string(outputs)
        .map_err(|e| Failure::parse(format!("outputs {}: {e}", outputs.display())))?;
    let (records, errors) = read_records(&text);
    for err in &errors {
        eprintln!("skipping record at line {}: {}", err.line, err.message);
    }
    let scores: Vec<PlanScore> = records.iter().map(|r| score_record(r, &rs)).collect();
    let report = aggregate(&scores, errors.len());
    let rendered = with_config_echo(
        render_plan_report(&report, cfg.format),
        cfg.format,
        &cfg.echo,
    );
    emit(out, &rendered)?;
    Ok(if errors.is_empty() { 0 } else { EXIT_PARSE })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Check { phase, seq } => cmd_check(&cfg, phase, seq),
        Command::Validate => cmd_validate(&cfg),
        Command::Score { phase, seq } => cmd_score(&cfg, phase, seq),
        Command::Gen {
            valid,
            oe,
            ce,
            be,
            max_insertions,
            max_len,
            out,
        } => cmd_gen(&cfg, *valid, *oe, *ce, *be, *max_insertions, *max_len, out),
        Command::Metaeval {
            benchmark,
            evaluators,
            out,
        } => cmd_metaeval(&cfg, benchmark, evaluators.as_deref(), out),
        Command::Planeval { outputs, out } => cmd_planeval(&cfg, outputs, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
