//! Command-line surface. Exit codes: 0 success, 1 user error (bad flags,
//! invalid plan, unreadable inputs), 2 runtime error (all cells failed,
//! audit mismatch, report failures).

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use lenfid_core::metrics::StdMode;
use lenfid_core::prompt::{PromptFamily, PromptVariant, TaskKind, TaskSpec};
use lenfid_core::wordcount;

use crate::client::build_client;
use crate::ingest;
use crate::judge::evaluate_quality;
use crate::plan::ExperimentPlan;
use crate::report;
use crate::runner;
use crate::store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser)]
#[command(
    name = "lenfid",
    version,
    about = "Length-fidelity harness: run prompt-variant grids against LLM endpoints, count words deterministically, and analyze adherence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a prompt variant for a target word count.
    Render {
        /// Built-in variant name (vanilla-v1, vanilla-v2, thinking-v1,
        /// thinking-v2, story-vanilla, story-thinking), or any name when
        /// --template-file is given.
        #[arg(long)]
        variant: String,
        /// Target word count substituted into the template.
        #[arg(long)]
        target: u32,
        /// Custom template file containing a {target_words} placeholder.
        #[arg(long)]
        template_file: Option<PathBuf>,
        /// Parsing family of the custom template (required with --template-file).
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
    },
    /// Count words in a file (or stdin when no file is given).
    Count {
        /// Input file; reads stdin when omitted.
        file: Option<PathBuf>,
        /// Also print one token per line with a countable marker.
        #[arg(long)]
        tokens: bool,
    },
    /// Execute an experiment plan.
    Run {
        /// Plan file (TOML).
        #[arg(long)]
        plan: PathBuf,
        /// Continue into an existing store, issuing only missing cells.
        #[arg(long)]
        resume: bool,
        /// Override the plan's fallback seed for mock endpoints.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Resume an interrupted run (same as `run --resume`).
    Resume {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute all analysis artifacts from a record store.
    Analyze {
        #[arg(long)]
        store: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
        /// Seed for Monte Carlo significance sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Resamples when a test has too many pairs for exact enumeration.
        #[arg(long, default_value_t = 10_000)]
        resamples: u32,
        /// Use sample (n-1) standard deviation instead of population.
        #[arg(long)]
        sample_std: bool,
    },
    /// Score stored generations with a judge model (one call per quality
    /// dimension).
    Judge {
        #[arg(long)]
        store: PathBuf,
        /// Endpoint file (TOML, one endpoint table) describing the judge.
        #[arg(long)]
        judge: PathBuf,
        /// Source document the summaries are judged against.
        #[arg(long)]
        document: PathBuf,
        /// Scores file to write (default: <store>.scores.jsonl).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fallback seed for mock judges.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export one report artifact from a store.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sample_std: bool,
    },
    /// Recount every stored record and verify word counts and metrics.
    Audit {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Vanilla,
    Thinking,
}

impl From<FamilyArg> for PromptFamily {
    fn from(value: FamilyArg) -> Self {
        match value {
            FamilyArg::Vanilla => PromptFamily::Vanilla,
            FamilyArg::Thinking => PromptFamily::Thinking,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Mapd,
    Fidelity,
    Cost,
    Improvement,
    Records,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Jsonl,
}

enum CliError {
    User(anyhow::Error),
    Runtime(anyhow::Error),
}

trait IntoCliError<T> {
    fn user(self) -> Result<T, CliError>;
    fn runtime(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> IntoCliError<T> for Result<T, E> {
    fn user(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::User(e.into()))
    }

    fn runtime(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USER,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::User(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USER
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Render {
            variant,
            target,
            template_file,
            family,
        } => render_cmd(&variant, target, template_file.as_deref(), family),
        Command::Count { file, tokens } => count_cmd(file.as_deref(), tokens),
        Command::Run { plan, resume, seed } => run_cmd(&plan, resume, seed),
        Command::Resume { plan, seed } => run_cmd(&plan, true, seed),
        Command::Analyze {
            store,
            out,
            seed,
            resamples,
            sample_std,
        } => analyze_cmd(&store, &out, seed, resamples, std_mode(sample_std)),
        Command::Judge {
            store,
            judge,
            document,
            out,
            seed,
        } => judge_cmd(&store, &judge, &document, out, seed),
        Command::Report {
            store,
            kind,
            format,
            out,
            sample_std,
        } => report_cmd(&store, kind, format, out.as_deref(), std_mode(sample_std)),
        Command::Audit { store } => audit_cmd(&store),
    }
}

fn std_mode(sample_std: bool) -> StdMode {
    if sample_std {
        StdMode::Sample
    } else {
        StdMode::Population
    }
}

fn render_cmd(
    variant_name: &str,
    target: u32,
    template_file: Option<&Path>,
    family: Option<FamilyArg>,
) -> Result<i32, CliError> {
    let variant = match template_file {
        Some(path) => {
            let family = family
                .ok_or_else(|| anyhow!("--family is required with --template-file"))
                .user()?;
            let template = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .user()?;
            PromptVariant::custom(variant_name, family.into(), template).user()?
        }
        None => PromptVariant::builtin(variant_name)
            .ok_or_else(|| anyhow!("unknown variant {variant_name} (and no --template-file given)"))
            .user()?,
    };
    // The prompt text never embeds the document, so rendering only needs a
    // stand-in that satisfies the task-kind invariant.
    let task = match variant.task_kind() {
        Some(TaskKind::Story) => TaskSpec::story(target),
        _ => TaskSpec::summarize("(document attached separately)", target),
    };
    let rendered = variant.render(&task).user()?;
    println!("{}", rendered.text);
    Ok(EXIT_OK)
}

fn count_cmd(file: Option<&Path>, tokens: bool) -> Result<i32, CliError> {
    let text = match file {
        Some(path) => ingest::load_document(path).user()?.text,
        None => {
            let mut buffer = String::new();
            std::io::stdin()
                .read_to_string(&mut buffer)
                .context("reading stdin")
                .user()?;
            buffer
        }
    };
    if tokens {
        for token in wordcount::tokenize(&text) {
            let marker = if wordcount::is_countable(&token) {
                "w"
            } else {
                "-"
            };
            println!("{marker} {token}");
        }
    }
    println!("{}", wordcount::count_words(&text));
    Ok(EXIT_OK)
}

fn run_cmd(plan_path: &Path, resume: bool, seed: Option<u64>) -> Result<i32, CliError> {
    let mut plan = ExperimentPlan::load(plan_path).user()?;
    if let Some(seed) = seed {
        plan.seed = seed;
    }
    plan.validate().user()?;

    let summary = runner::run(&plan, resume).user()?;
    if summary.completed == 0 && summary.failed == 0 && summary.skipped > 0 {
        println!("0 completed (nothing to do), {} skipped", summary.skipped);
        return Ok(EXIT_OK);
    }
    println!(
        "{} completed, {} failed{}",
        summary.completed,
        summary.failed,
        if summary.skipped > 0 {
            format!(", {} skipped", summary.skipped)
        } else {
            String::new()
        }
    );
    if summary.completed == 0 && summary.failed > 0 {
        return Err(CliError::Runtime(anyhow!(
            "all {} issued cells failed; see {}",
            summary.failed,
            plan.output_path.display()
        )));
    }
    Ok(EXIT_OK)
}

fn analyze_cmd(
    store_path: &Path,
    out_dir: &Path,
    seed: u64,
    resamples: u32,
    mode: StdMode,
) -> Result<i32, CliError> {
    let loaded = store::load_store(store_path).user()?;
    for warning in &loaded.warnings {
        eprintln!("warning: {warning}");
    }
    let records: Vec<_> = loaded.effective().into_values().cloned().collect();

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .user()?;

    let table = report::mapd_table(&records, mode).user()?;
    report::write_text(&out_dir.join("mapd.md"), &table.to_markdown()).runtime()?;
    table.write_csv(&out_dir.join("mapd.csv")).runtime()?;

    let (points, overlay) = report::fidelity_points(&records).runtime()?;
    report::write_fidelity_csv(&points, &out_dir.join("fidelity_points.csv")).runtime()?;
    report::write_overlay_csv(&overlay, &out_dir.join("fidelity_overlay.csv")).runtime()?;

    let improvement = report::improvement_summary(&records, mode).runtime()?;
    let significance = report::significance_rows(&records, mode, resamples, seed).runtime()?;
    report::write_significance_csv(&significance, &out_dir.join("significance.csv")).runtime()?;

    match report::cost_table(&records) {
        Ok(cost) => {
            report::write_text(&out_dir.join("cost.md"), &cost.to_markdown()).runtime()?;
        }
        Err(report::ReportError::MissingFamily(f)) => {
            eprintln!("note: cost table skipped (no successful {f:?}-family records)");
        }
        Err(e) => return Err(CliError::Runtime(e.into())),
    }

    // Best-variant-per-endpoint summary on stdout.
    for row in &table.rows {
        let best: Vec<&str> = table
            .column_labels
            .iter()
            .zip(&row.best)
            .filter(|(_, b)| **b)
            .map(|(v, _)| v.as_str())
            .collect();
        println!("{}: best {}", row.label, best.join(", "));
    }
    for imp in &improvement.rows {
        println!(
            "{}: {} {:.3} vs {} {:.3} — improvement {:.1}%",
            imp.endpoint_id,
            imp.best_thinking_variant,
            imp.best_thinking_mean,
            imp.best_vanilla_variant,
            imp.best_vanilla_mean,
            imp.improvement_pct
        );
    }
    for sig in &significance {
        println!(
            "{}: {} vs {} p = {:.4} ({} pairs, {})",
            sig.endpoint_id,
            sig.thinking_variant,
            sig.vanilla_variant,
            sig.result.p_value,
            sig.result.n_pairs,
            if sig.result.exact {
                "exact"
            } else {
                "monte-carlo"
            }
        );
    }
    println!("artifacts written to {}", out_dir.display());
    Ok(EXIT_OK)
}

fn judge_cmd(
    store_path: &Path,
    judge_path: &Path,
    document_path: &Path,
    out: Option<PathBuf>,
    seed: u64,
) -> Result<i32, CliError> {
    #[derive(serde::Deserialize)]
    struct JudgeFile {
        endpoint: crate::client::ModelEndpoint,
    }

    let loaded = store::load_store(store_path).user()?;
    let mut judge_config: JudgeFile = toml::from_str(
        &std::fs::read_to_string(judge_path)
            .with_context(|| format!("reading {}", judge_path.display()))
            .user()?,
    )
    .map_err(|e| anyhow!("invalid judge endpoint file: {e}"))
    .user()?;
    // Judges default to temperature 0 for repeatability.
    judge_config.endpoint.temperature.get_or_insert(0.0);
    let document = ingest::load_document(document_path).user()?;
    let client = build_client(&judge_config.endpoint, seed).user()?;

    let out_path = out.unwrap_or_else(|| {
        let mut p = store_path.as_os_str().to_owned();
        p.push(".scores.jsonl");
        PathBuf::from(p)
    });
    let mut out_file = std::fs::File::create(&out_path)
        .with_context(|| format!("creating {}", out_path.display()))
        .user()?;

    let records: Vec<_> = loaded.effective().into_values().cloned().collect();
    let mut scores = Vec::new();
    let mut judged = 0usize;
    for record in &records {
        let Some(final_text) = record.final_text.as_deref() else {
            continue;
        };
        let quality = evaluate_quality(
            &record.record_id,
            final_text,
            &document.text,
            client.as_ref(),
            &judge_config.endpoint.id,
        );
        use std::io::Write as _;
        writeln!(
            out_file,
            "{}",
            serde_json::to_string(&quality).expect("scores serialize")
        )
        .with_context(|| format!("writing {}", out_path.display()))
        .runtime()?;
        scores.push(quality);
        judged += 1;
    }
    if judged == 0 {
        return Err(CliError::Runtime(anyhow!(
            "store has no successful records to judge"
        )));
    }

    println!(
        "{judged} records judged, scores written to {}",
        out_path.display()
    );
    print!("{}", report::quality_table(&records, &scores).to_markdown());
    Ok(EXIT_OK)
}

fn report_cmd(
    store_path: &Path,
    kind: ReportKind,
    format: FormatArg,
    out: Option<&Path>,
    mode: StdMode,
) -> Result<i32, CliError> {
    let loaded = store::load_store(store_path).user()?;
    let records: Vec<_> = loaded.effective().into_values().cloned().collect();

    let emit = |content: String| -> Result<i32, CliError> {
        match out {
            Some(path) => report::write_text(path, &content).runtime()?,
            None => print!("{content}"),
        }
        Ok(EXIT_OK)
    };

    match (kind, format) {
        (ReportKind::Mapd, FormatArg::Markdown) => {
            emit(report::mapd_table(&records, mode).user()?.to_markdown())
        }
        (ReportKind::Mapd, FormatArg::Csv) => {
            let path = out
                .ok_or_else(|| anyhow!("--out is required for CSV output"))
                .user()?;
            report::mapd_table(&records, mode).user()?.write_csv(path).runtime()?;
            Ok(EXIT_OK)
        }
        (ReportKind::Fidelity, FormatArg::Csv) => {
            let path = out
                .ok_or_else(|| anyhow!("--out is required for CSV output"))
                .user()?;
            let (points, _) = report::fidelity_points(&records).user()?;
            report::write_fidelity_csv(&points, path).runtime()?;
            Ok(EXIT_OK)
        }
        (ReportKind::Cost, FormatArg::Markdown) => {
            emit(report::cost_table(&records).user()?.to_markdown())
        }
        (ReportKind::Improvement, FormatArg::Markdown) => {
            let summary = report::improvement_summary(&records, mode).user()?;
            let mut content = String::from("| Endpoint | Best thinking | Best vanilla | Improvement |\n|---|---|---|---|\n");
            for row in &summary.rows {
                content.push_str(&format!(
                    "| {} | {} ({:.3}) | {} ({:.3}) | {:.1}% |\n",
                    row.endpoint_id,
                    row.best_thinking_variant,
                    row.best_thinking_mean,
                    row.best_vanilla_variant,
                    row.best_vanilla_mean,
                    row.improvement_pct
                ));
            }
            for (endpoint, family) in &summary.skipped {
                content.push_str(&format!("| {endpoint} | — missing {family:?} family — | | |\n"));
            }
            emit(content)
        }
        (ReportKind::Records, FormatArg::Jsonl) => {
            let path = out
                .ok_or_else(|| anyhow!("--out is required for JSONL output"))
                .user()?;
            report::write_records_jsonl(&records, path).runtime()?;
            Ok(EXIT_OK)
        }
        _ => Err(CliError::User(anyhow!(
            "unsupported kind/format combination (mapd: markdown|csv, fidelity: csv, cost: markdown, improvement: markdown, records: jsonl)"
        ))),
    }
}

fn audit_cmd(store_path: &Path) -> Result<i32, CliError> {
    let loaded = store::load_store(store_path).user()?;
    let report = store::audit(&loaded);
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    for mismatch in &report.mismatches {
        println!("mismatch: {mismatch}");
    }
    println!(
        "{} records checked, {} mismatches",
        report.records_checked,
        report.mismatches.len()
    );
    if report.is_clean() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Runtime(anyhow!(
            "audit found {} mismatches",
            report.mismatches.len()
        )))
    }
}
