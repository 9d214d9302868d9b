//! Analysis artifacts computed from a record store: the MAPD table
//! (endpoints x variants, mean ± std of per-record APD), fidelity scatter
//! data with per-target overlays, family cost ratios, best-variant
//! improvement summaries, and paired significance tests.
//!
//! Everything here is recomputable from the store alone, and every export
//! is byte-deterministic: groups iterate in key order and floats print with
//! Rust's shortest round-trip formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lenfid_core::metrics::{
    aggregate, paired_significance, relative_improvement, AggregateStats, MetricsError,
    SignificanceResult, StdMode,
};
use lenfid_core::prompt::PromptFamily;

use crate::judge::{Dimension, QualityScores};
use crate::store::GenerationRecord;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("store has no successful records")]
    EmptyStore,
    #[error("cost table needs at least one successful record per family; missing {0:?}")]
    MissingFamily(PromptFamily),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Successful records only; analysis never mixes failures into statistics.
fn successes(records: &[GenerationRecord]) -> Vec<&GenerationRecord> {
    records.iter().filter(|r| r.is_success()).collect()
}

// ---------------------------------------------------------------------------
// MAPD table

/// One table of mean ± std cells with a best-per-row marker. Rows are
/// endpoints, columns are variants; a missing cell means that
/// (endpoint, variant) pair has no successful records.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub caption: String,
    pub column_labels: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Option<AggregateStats>>,
    /// True for every cell tied for the row's lowest mean.
    pub best: Vec<bool>,
}

pub fn mapd_table(records: &[GenerationRecord], mode: StdMode) -> Result<ReportTable, ReportError> {
    let ok = successes(records);
    if ok.is_empty() {
        return Err(ReportError::EmptyStore);
    }

    let pairs = ok.iter().map(|r| {
        (
            (r.endpoint_id.clone(), r.variant_id.as_str().to_string()),
            r.metrics.expect("successful records carry metrics").apd,
        )
    });
    let grouped = aggregate(pairs, mode);

    let mut endpoints = BTreeSet::new();
    let mut variants = BTreeSet::new();
    for (endpoint, variant) in grouped.keys() {
        endpoints.insert(endpoint.clone());
        variants.insert(variant.clone());
    }
    let column_labels: Vec<String> = variants.into_iter().collect();

    let mut rows = Vec::new();
    for endpoint in endpoints {
        let cells: Vec<Option<AggregateStats>> = column_labels
            .iter()
            .map(|v| grouped.get(&(endpoint.clone(), v.clone())).copied())
            .collect();
        let best_mean = cells
            .iter()
            .flatten()
            .map(|s| s.mean)
            .fold(f64::INFINITY, f64::min);
        let best = cells
            .iter()
            .map(|c| c.is_some_and(|s| s.mean == best_mean))
            .collect();
        rows.push(TableRow {
            label: endpoint,
            cells,
            best,
        });
    }

    let std_label = match mode {
        StdMode::Population => "population std",
        StdMode::Sample => "sample std",
    };
    Ok(ReportTable {
        caption: format!(
            "Mean absolute percentage deviation (mean ± {std_label}) by endpoint and variant; best per row in bold"
        ),
        column_labels,
        rows,
    })
}

impl ReportTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("_{}_\n\n", self.caption));
        out.push_str("| Endpoint |");
        for label in &self.column_labels {
            out.push_str(&format!(" {label} |"));
        }
        out.push('\n');
        out.push_str("|---|");
        out.push_str(&"---|".repeat(self.column_labels.len()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("| {} |", row.label));
            for (cell, best) in row.cells.iter().zip(&row.best) {
                match cell {
                    Some(stats) => {
                        let text = format!("{:.3} ± {:.3}", stats.mean, stats.std);
                        if *best {
                            out.push_str(&format!(" **{text}** |"));
                        } else {
                            out.push_str(&format!(" {text} |"));
                        }
                    }
                    None => out.push_str(" — |"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long-form CSV: one line per non-empty cell.
    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["endpoint", "variant", "mean_apd", "std_apd", "n", "best"])?;
        for row in &self.rows {
            for ((variant, cell), best) in self.column_labels.iter().zip(&row.cells).zip(&row.best)
            {
                if let Some(stats) = cell {
                    writer.write_record([
                        row.label.as_str(),
                        variant.as_str(),
                        &stats.mean.to_string(),
                        &stats.std.to_string(),
                        &stats.n.to_string(),
                        if *best { "1" } else { "0" },
                    ])?;
                }
            }
        }
        writer.flush().map_err(io_err(path))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Fidelity scatter data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverUnder {
    Over,
    Under,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub endpoint_id: String,
    pub variant_id: String,
    pub target_words: u32,
    pub attempt: u32,
    pub ratio: f64,
    pub class: OverUnder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityOverlay {
    pub endpoint_id: String,
    pub target_words: u32,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    pub n: usize,
}

/// One point per successful record plus a per-(endpoint, target) mean/std
/// overlay, both in deterministic order.
pub fn fidelity_points(
    records: &[GenerationRecord],
) -> Result<(Vec<FidelityPoint>, Vec<FidelityOverlay>), ReportError> {
    let ok = successes(records);
    if ok.is_empty() {
        return Err(ReportError::EmptyStore);
    }

    let mut points: Vec<FidelityPoint> = ok
        .iter()
        .map(|r| {
            let metrics = r.metrics.expect("successful records carry metrics");
            let class = match metrics.generated_words.cmp(&metrics.target_words) {
                std::cmp::Ordering::Greater => OverUnder::Over,
                std::cmp::Ordering::Less => OverUnder::Under,
                std::cmp::Ordering::Equal => OverUnder::Exact,
            };
            FidelityPoint {
                endpoint_id: r.endpoint_id.clone(),
                variant_id: r.variant_id.as_str().to_string(),
                target_words: r.target_words,
                attempt: r.attempt,
                ratio: metrics.ratio,
                class,
            }
        })
        .collect();
    points.sort_by(|a, b| {
        (&a.endpoint_id, &a.variant_id, a.target_words, a.attempt).cmp(&(
            &b.endpoint_id,
            &b.variant_id,
            b.target_words,
            b.attempt,
        ))
    });

    let overlay_stats = aggregate(
        points
            .iter()
            .map(|p| ((p.endpoint_id.clone(), p.target_words), p.ratio)),
        StdMode::Population,
    );
    let overlay = overlay_stats
        .into_iter()
        .map(|((endpoint_id, target_words), stats)| FidelityOverlay {
            endpoint_id,
            target_words,
            mean_ratio: stats.mean,
            std_ratio: stats.std,
            n: stats.n,
        })
        .collect();

    Ok((points, overlay))
}

pub fn write_fidelity_csv(points: &[FidelityPoint], path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["endpoint", "variant", "target", "attempt", "ratio", "class"])?;
    for p in points {
        let class = match p.class {
            OverUnder::Over => "over",
            OverUnder::Under => "under",
            OverUnder::Exact => "exact",
        };
        writer.write_record([
            p.endpoint_id.as_str(),
            p.variant_id.as_str(),
            &p.target_words.to_string(),
            &p.attempt.to_string(),
            &p.ratio.to_string(),
            class,
        ])?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Re-import fidelity points written by [`write_fidelity_csv`]. Ratios
/// round-trip exactly (shortest round-trip float formatting).
pub fn read_fidelity_csv(path: &Path) -> Result<Vec<FidelityPoint>, ReportError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for row in reader.deserialize::<(String, String, u32, u32, f64, String)>() {
        let (endpoint_id, variant_id, target_words, attempt, ratio, class) = row?;
        let class = match class.as_str() {
            "over" => OverUnder::Over,
            "under" => OverUnder::Under,
            _ => OverUnder::Exact,
        };
        points.push(FidelityPoint {
            endpoint_id,
            variant_id,
            target_words,
            attempt,
            ratio,
            class,
        });
    }
    Ok(points)
}

pub fn write_overlay_csv(overlay: &[FidelityOverlay], path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["endpoint", "target", "mean_ratio", "std_ratio", "n"])?;
    for o in overlay {
        writer.write_record([
            o.endpoint_id.as_str(),
            &o.target_words.to_string(),
            &o.mean_ratio.to_string(),
            &o.std_ratio.to_string(),
            &o.n.to_string(),
        ])?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Cost table

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyCost {
    pub avg_tokens: f64,
    pub avg_latency_ms: f64,
    pub n: usize,
}

/// Per-family averages (total tokens and latency per generation) and the
/// thinking/vanilla ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTable {
    pub vanilla: FamilyCost,
    pub thinking: FamilyCost,
    pub token_ratio: f64,
    pub latency_ratio: f64,
}

pub fn cost_table(records: &[GenerationRecord]) -> Result<CostTable, ReportError> {
    let ok = successes(records);
    if ok.is_empty() {
        return Err(ReportError::EmptyStore);
    }
    let family_cost = |family: PromptFamily| -> Result<FamilyCost, ReportError> {
        let rows: Vec<&&GenerationRecord> = ok.iter().filter(|r| r.family == family).collect();
        if rows.is_empty() {
            return Err(ReportError::MissingFamily(family));
        }
        let n = rows.len() as f64;
        let tokens: f64 = rows
            .iter()
            .map(|r| (r.input_tokens + r.output_tokens) as f64)
            .sum();
        let latency: f64 = rows.iter().map(|r| r.latency_ms).sum();
        Ok(FamilyCost {
            avg_tokens: tokens / n,
            avg_latency_ms: latency / n,
            n: rows.len(),
        })
    };
    let vanilla = family_cost(PromptFamily::Vanilla)?;
    let thinking = family_cost(PromptFamily::Thinking)?;
    Ok(CostTable {
        vanilla,
        thinking,
        token_ratio: thinking.avg_tokens / vanilla.avg_tokens,
        latency_ratio: thinking.avg_latency_ms / vanilla.avg_latency_ms,
    })
}

impl CostTable {
    /// Ratios as printed: two decimals with a multiplication sign.
    pub fn token_ratio_label(&self) -> String {
        ratio_label(self.token_ratio)
    }

    pub fn latency_ratio_label(&self) -> String {
        ratio_label(self.latency_ratio)
    }

    pub fn to_markdown(&self) -> String {
        format!(
            "| Metric | Vanilla | Thinking |\n|---|---|---|\n\
             | Average tokens | {} | {} ({}) |\n\
             | Average latency | {} ms | {} ms ({}) |\n",
            thousands(self.vanilla.avg_tokens, 0),
            thousands(self.thinking.avg_tokens, 0),
            self.token_ratio_label(),
            thousands(self.vanilla.avg_latency_ms, 1),
            thousands(self.thinking.avg_latency_ms, 1),
            self.latency_ratio_label(),
        )
    }
}

/// A 0/0 ratio (for example two all-mock families with zero latency) is
/// undefined, not 1.00x.
fn ratio_label(ratio: f64) -> String {
    if ratio.is_finite() {
        format!("{ratio:.2}×")
    } else {
        "—".to_string()
    }
}

/// Fixed-precision decimal with thousands separators: 8046.0 -> "8,046",
/// 1573.84 -> "1,573.8" at one decimal.
fn thousands(value: f64, decimals: usize) -> String {
    let formatted = format!("{value:.decimals$}");
    let (int_part, frac_part) = match formatted.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (formatted.as_str(), None),
    };
    let (sign, digits) = match int_part.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", int_part),
    };
    let mut grouped = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    match frac_part {
        Some(f) => format!("{sign}{grouped}.{f}"),
        None => format!("{sign}{grouped}"),
    }
}

// ---------------------------------------------------------------------------
// Improvement summary and significance

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementRow {
    pub endpoint_id: String,
    pub best_thinking_variant: String,
    pub best_thinking_mean: f64,
    pub best_vanilla_variant: String,
    pub best_vanilla_mean: f64,
    /// Percentage improvement of best thinking over best vanilla
    /// (positive means thinking is better).
    pub improvement_pct: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ImprovementSummary {
    pub rows: Vec<ImprovementRow>,
    /// Endpoints skipped because one family had no successful records.
    pub skipped: Vec<(String, PromptFamily)>,
}

pub fn improvement_summary(
    records: &[GenerationRecord],
    mode: StdMode,
) -> Result<ImprovementSummary, ReportError> {
    let table = mapd_table(records, mode)?;
    let ok = successes(records);
    let family_of: BTreeMap<String, PromptFamily> = ok
        .iter()
        .map(|r| (r.variant_id.as_str().to_string(), r.family))
        .collect();

    let mut summary = ImprovementSummary::default();
    for row in &table.rows {
        let mut best: BTreeMap<PromptFamily, (String, f64)> = BTreeMap::new();
        for (variant, cell) in table.column_labels.iter().zip(&row.cells) {
            let Some(stats) = cell else { continue };
            let family = family_of[variant];
            match best.get(&family) {
                Some((_, mean)) if *mean <= stats.mean => {}
                _ => {
                    best.insert(family, (variant.clone(), stats.mean));
                }
            }
        }
        match (
            best.get(&PromptFamily::Thinking),
            best.get(&PromptFamily::Vanilla),
        ) {
            (Some((tv, tm)), Some((vv, vm))) => {
                // A zero baseline cannot improve; a tie at zero is 0%.
                let improvement_pct = if *vm <= 0.0 {
                    if *tm <= 0.0 {
                        0.0
                    } else {
                        continue;
                    }
                } else {
                    relative_improvement(*tm, *vm)?
                };
                summary.rows.push(ImprovementRow {
                    endpoint_id: row.label.clone(),
                    best_thinking_variant: tv.clone(),
                    best_thinking_mean: *tm,
                    best_vanilla_variant: vv.clone(),
                    best_vanilla_mean: *vm,
                    improvement_pct,
                });
            }
            (None, _) => summary
                .skipped
                .push((row.label.clone(), PromptFamily::Thinking)),
            (_, None) => summary
                .skipped
                .push((row.label.clone(), PromptFamily::Vanilla)),
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub endpoint_id: String,
    pub thinking_variant: String,
    pub vanilla_variant: String,
    #[serde(flatten)]
    pub result: SignificanceResult,
}

/// For each endpoint with both families present: a paired sign-flip test of
/// best-thinking APD against best-vanilla APD, paired by (target, attempt).
/// Endpoints with fewer than two common pairs are skipped.
pub fn significance_rows(
    records: &[GenerationRecord],
    mode: StdMode,
    n_resamples: u32,
    seed: u64,
) -> Result<Vec<SignificanceRow>, ReportError> {
    let summary = improvement_summary(records, mode)?;
    let ok = successes(records);

    let mut rows = Vec::new();
    for improvement in &summary.rows {
        let apds_for = |variant: &str| -> BTreeMap<(u32, u32), f64> {
            ok.iter()
                .filter(|r| {
                    r.endpoint_id == improvement.endpoint_id && r.variant_id.as_str() == variant
                })
                .map(|r| {
                    (
                        (r.target_words, r.attempt),
                        r.metrics.expect("successful records carry metrics").apd,
                    )
                })
                .collect()
        };
        let thinking = apds_for(&improvement.best_thinking_variant);
        let vanilla = apds_for(&improvement.best_vanilla_variant);

        let mut a = Vec::new();
        let mut b = Vec::new();
        for (key, t_apd) in &thinking {
            if let Some(v_apd) = vanilla.get(key) {
                a.push(*t_apd);
                b.push(*v_apd);
            }
        }
        if a.len() < 2 {
            continue;
        }
        let result = paired_significance(&a, &b, n_resamples, seed)?;
        rows.push(SignificanceRow {
            endpoint_id: improvement.endpoint_id.clone(),
            thinking_variant: improvement.best_thinking_variant.clone(),
            vanilla_variant: improvement.best_vanilla_variant.clone(),
            result,
        });
    }
    Ok(rows)
}

pub fn write_significance_csv(rows: &[SignificanceRow], path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "endpoint",
        "thinking_variant",
        "vanilla_variant",
        "statistic",
        "p_value",
        "n_pairs",
        "n_resamples",
        "seed",
        "exact",
    ])?;
    for row in rows {
        writer.write_record([
            row.endpoint_id.as_str(),
            row.thinking_variant.as_str(),
            row.vanilla_variant.as_str(),
            &row.result.statistic.to_string(),
            &row.result.p_value.to_string(),
            &row.result.n_pairs.to_string(),
            &row.result.n_resamples.to_string(),
            &row.result.seed.to_string(),
            &row.result.exact.to_string(),
        ])?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Quality table (judge scores by strategy)

#[derive(Debug, Clone, PartialEq)]
pub struct QualityTable {
    /// variant -> per-dimension (mean, n) in `Dimension::ALL` order.
    pub rows: BTreeMap<String, [(Option<f64>, usize); 4]>,
}

/// Strategy-level quality means: scores joined to records by record id,
/// grouped by variant, averaged per dimension over present scores.
pub fn quality_table(records: &[GenerationRecord], scores: &[QualityScores]) -> QualityTable {
    let variant_of: BTreeMap<&str, String> = records
        .iter()
        .map(|r| (r.record_id.as_str(), r.variant_id.as_str().to_string()))
        .collect();

    let mut sums: BTreeMap<String, [(f64, usize); 4]> = BTreeMap::new();
    for score in scores {
        let Some(variant) = variant_of.get(score.record_id.as_str()) else {
            continue;
        };
        let entry = sums.entry(variant.clone()).or_insert([(0.0, 0); 4]);
        for (i, dimension) in Dimension::ALL.iter().enumerate() {
            if let Some(s) = score.dimension(*dimension).score {
                entry[i].0 += s;
                entry[i].1 += 1;
            }
        }
    }

    let rows = sums
        .into_iter()
        .map(|(variant, cells)| {
            let means = cells.map(|(sum, n)| {
                if n == 0 {
                    (None, 0)
                } else {
                    (Some(sum / n as f64), n)
                }
            });
            (variant, means)
        })
        .collect();
    QualityTable { rows }
}

impl QualityTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Strategy |");
        for d in Dimension::ALL {
            out.push_str(&format!(" {} |", d.name()));
        }
        out.push('\n');
        out.push_str("|---|");
        out.push_str(&"---|".repeat(4));
        out.push('\n');
        for (variant, cells) in &self.rows {
            out.push_str(&format!("| {variant} |"));
            for (mean, _) in cells {
                match mean {
                    Some(m) => out.push_str(&format!(" {m:.2} |")),
                    None => out.push_str(" — |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Whole-file writers

pub fn write_text(path: &Path, content: &str) -> Result<(), ReportError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(content.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// Export effective records as JSON lines (the store schema, minus the
/// header and any superseded duplicates).
pub fn write_records_jsonl(records: &[GenerationRecord], path: &Path) -> Result<(), ReportError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    write_text(path, &out)
}
