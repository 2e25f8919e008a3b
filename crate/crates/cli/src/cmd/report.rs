use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wmseg_core::tractometry::SHAPE_METRICS;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{open_file, write_text, OutputLayout};
use crate::svg::{box_plot, heatmap, BoxGroup};

use super::compare::{read_effect_sizes, read_table, EFFECT_SIZES_FILE};
use super::evaluate::{COMPARISON_FILE, METRICS_B_FILE, METRICS_FILE};

pub const BOXPLOT_FILE: &str = "boxplot.svg";
pub const HEATMAP_FILE: &str = "effect_sizes.svg";

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    pub metrics: Option<PathBuf>,
    pub metrics_b: Option<PathBuf>,
    pub comparison: Option<PathBuf>,
    pub effect_sizes: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub boxplot: PathBuf,
    pub boxes: usize,
    pub starred: Vec<String>,
    pub heatmap: Option<PathBuf>,
    pub heatmap_cells: usize,
}

/// Adjusted p-values from a comparison CSV, keyed by `(bundle, metric)`.
pub fn read_adjusted_p(path: &Path) -> Result<BTreeMap<(String, String), Option<f64>>> {
    let mut r = csv::Reader::from_reader(open_file(path)?);
    let header = r.headers().map_err(|e| CliError::parse(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::parse(path, format!("missing column `{name}`")))
    };
    let (cb, cm, cp) = (col("bundle")?, col("metric")?, col("p_adjusted")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        let p = match rec.get(cp).unwrap_or("") {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|e| CliError::parse(path, format!("p_adjusted `{s}`: {e}")))?,
            ),
        };
        let key = (
            rec.get(cb).unwrap_or("").to_string(),
            rec.get(cm).unwrap_or("").to_string(),
        );
        out.insert(key, p);
    }
    Ok(out)
}

fn existing(given: &Option<PathBuf>, candidates: &[PathBuf]) -> Option<PathBuf> {
    match given {
        Some(p) => Some(p.clone()),
        None => candidates.iter().find(|p| p.is_file()).cloned(),
    }
}

/// Box plot of the configured metric per bundle, starred where the adjusted
/// p-value is below alpha, and a heatmap of |d| over the four shape metrics.
pub fn report(cfg: &PipelineConfig, args: &ReportArgs) -> Result<ReportSummary> {
    let out = OutputLayout::new(&cfg.paths.output_root);
    let (eval, stats) = (out.eval(), out.stats());
    let metric = cfg.report.box_metric.as_str();

    let a = read_table(
        &args
            .metrics
            .clone()
            .unwrap_or_else(|| eval.join(METRICS_FILE)),
    )?;
    if a.is_empty() {
        return Err(CliError::Usage(
            "metrics table is empty; nothing to report".into(),
        ));
    }
    if !a.metrics().iter().any(|m| m == metric) {
        return Err(CliError::Config(format!(
            "report.box_metric `{metric}` is not a column of the metrics table"
        )));
    }
    let b = match existing(&args.metrics_b, &[eval.join(METRICS_B_FILE)]) {
        Some(p) => Some(read_table(&p)?),
        None => None,
    };
    let p_adj = match existing(
        &args.comparison,
        &[stats.join(COMPARISON_FILE), eval.join(COMPARISON_FILE)],
    ) {
        Some(p) => read_adjusted_p(&p)?,
        None => BTreeMap::new(),
    };

    let alpha = cfg.evaluation.alpha;
    let mut series_names = vec!["method A".to_string()];
    if b.is_some() {
        series_names.push("method B".into());
    }
    let groups: Vec<BoxGroup> = a
        .bundles()
        .into_iter()
        .map(|bundle| {
            let mut series = vec![a.column(&bundle, metric)];
            if let Some(b) = &b {
                series.push(b.column(&bundle, metric));
            }
            let star = p_adj
                .get(&(bundle.clone(), metric.to_string()))
                .copied()
                .flatten()
                .is_some_and(|p| p < alpha);
            BoxGroup {
                bundle,
                series,
                star,
            }
        })
        .collect();
    let boxes = groups
        .iter()
        .flat_map(|g| &g.series)
        .filter(|s| s.iter().any(|v| v.is_finite()))
        .count();
    let starred = groups
        .iter()
        .filter(|g| g.star)
        .map(|g| g.bundle.clone())
        .collect();
    let boxplot = out.report().join(BOXPLOT_FILE);
    write_text(
        &boxplot,
        &box_plot(&cfg.report.title, metric, &series_names, &groups),
    )?;

    let (heatmap_path, heatmap_cells) =
        match existing(&args.effect_sizes, &[stats.join(EFFECT_SIZES_FILE)]) {
            None => (None, 0),
            Some(p) => {
                let rows = read_effect_sizes(&p)?;
                let columns: Vec<String> = SHAPE_METRICS.iter().map(|s| s.to_string()).collect();
                let mut bundles: Vec<String> = Vec::new();
                for r in rows.iter().filter(|r| columns.contains(&r.metric)) {
                    if !bundles.contains(&r.bundle) {
                        bundles.push(r.bundle.clone());
                    }
                }
                let values: Vec<Vec<Option<f64>>> = bundles
                    .iter()
                    .map(|bundle| {
                        columns
                            .iter()
                            .map(|m| {
                                rows.iter()
                                    .find(|r| &r.bundle == bundle && &r.metric == m)
                                    .and_then(|r| r.d)
                                    .map(f64::abs)
                            })
                            .collect()
                    })
                    .collect();
                let path = out.report().join(HEATMAP_FILE);
                let title = format!("{}: |Cohen's d| of shape metrics", cfg.report.title);
                write_text(&path, &heatmap(&title, &bundles, &columns, &values))?;
                (Some(path), bundles.len() * columns.len())
            }
        };

    Ok(ReportSummary {
        boxplot,
        boxes,
        starred,
        heatmap: heatmap_path,
        heatmap_cells,
    })
}
