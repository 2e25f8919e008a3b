use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wmseg_core::bundles::{exclusion_filter, BundleCatalog, ExclusionOptions, ExclusionReport};
use wmseg_core::metrics::{comparisons_to_table, evaluate_cohort, write_cohort_csv};
use wmseg_core::stats::{compare_methods, write_comparison_csv, MetricTable};
use wmseg_core::tractometry::{bundle_shape, read_streamlines, SHAPE_METRICS};
use wmseg_core::BundleMaskSet;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{create_file, open_file, write_text, OutputLayout, SubjectDir};
use crate::subjects::load_references;

pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_B_FILE: &str = "metrics_b.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const SHAPE_FILE: &str = "shape.csv";
pub const SHAPE_B_FILE: &str = "shape_b.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.json";

#[derive(Debug, Clone, Default)]
pub struct EvaluateArgs {
    /// Predicted masks; defaults to the cross-validation predictions.
    pub predictions: Option<PathBuf>,
    /// Reference masks; defaults to the preprocessed cohort, else the data root.
    pub references: Option<PathBuf>,
    /// Second method's masks, compared against the first.
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub rows: usize,
    pub reported_bundles: Vec<String>,
    pub exclusions: ExclusionReport,
    pub shape_rows: usize,
    /// `(tests, significant)` in two-method mode.
    pub comparison: Option<(usize, usize)>,
}

/// Reference directory used when none is given.
pub fn default_references(cfg: &PipelineConfig) -> PathBuf {
    let pre = OutputLayout::new(&cfg.paths.output_root).preprocessed();
    if pre.is_dir() {
        pre
    } else {
        cfg.paths.data_root.clone()
    }
}

fn bundle_order(refs: &BTreeMap<String, BundleMaskSet>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in refs.values() {
        for c in m.channels() {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
    }
    out
}

/// Shape table of predicted masks. Rows need a valid reference and a streamline
/// file for the bundle under the data root.
fn shape_table(
    preds: &BTreeMap<String, BundleMaskSet>,
    refs: &BTreeMap<String, BundleMaskSet>,
    bundles: &[String],
    data_root: &Path,
) -> Result<MetricTable> {
    let mut table = MetricTable::new(SHAPE_METRICS.iter().map(|s| s.to_string()).collect());
    for (subject, reference) in refs {
        let Some(pred) = preds.get(subject) else {
            continue;
        };
        let sd = SubjectDir::new(data_root, subject);
        for bundle in bundles {
            let valid_ref = reference
                .channel_index(bundle)
                .is_some_and(|c| reference.is_valid(c));
            let path = sd.streamlines(bundle);
            let Some(pc) = pred.channel_index(bundle) else {
                continue;
            };
            if !valid_ref || !path.is_file() {
                continue;
            }
            let lines = read_streamlines(open_file(&path)?)?;
            let shape = bundle_shape(pred.channel(pc), pred.grid(), &lines)?;
            table.insert(subject, bundle, shape.values().to_vec())?;
        }
    }
    Ok(table)
}

fn write_table(table: &MetricTable, path: &Path) -> Result<()> {
    Ok(table.write_csv(create_file(path)?)?)
}

/// Score predictions against references after applying bundle exclusions; in
/// two-method mode also score the second method on the bundles both can produce
/// and test the paired differences.
pub fn evaluate(cfg: &PipelineConfig, args: &EvaluateArgs) -> Result<EvaluateSummary> {
    let out = OutputLayout::new(&cfg.paths.output_root);
    let pred_dir = args
        .predictions
        .clone()
        .unwrap_or_else(|| out.predictions());
    let ref_dir = args
        .references
        .clone()
        .unwrap_or_else(|| default_references(cfg));
    let preds = load_references(&pred_dir)?;
    let mut refs = load_references(&ref_dir)?;
    if preds.keys().ne(refs.keys()) {
        let only_pred: Vec<_> = preds.keys().filter(|k| !refs.contains_key(*k)).collect();
        let only_ref: Vec<_> = refs.keys().filter(|k| !preds.contains_key(*k)).collect();
        return Err(CliError::Usage(format!(
            "prediction and reference subjects differ: only predicted {only_pred:?}, only referenced {only_ref:?}"
        )));
    }

    let catalog = BundleCatalog::builtin();
    let bundles = bundle_order(&refs);
    let report = exclusion_filter(
        &refs,
        &bundles,
        &catalog.comparable_bundles(),
        ExclusionOptions {
            cohort_fraction: cfg.evaluation.cohort_exclusion_fraction,
        },
    );
    report.mark_missing_invalid(&mut refs);
    let reported: Vec<String> = bundles
        .iter()
        .filter(|b| report.is_reportable(b))
        .cloned()
        .collect();

    let eval_dir = out.eval();
    write_text(
        &eval_dir.join(EXCLUSIONS_FILE),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let radius = cfg.evaluation.adjacency_radius;
    let rows = evaluate_cohort(&preds, &refs, &reported, radius)?;
    write_cohort_csv(&rows, create_file(&eval_dir.join(METRICS_FILE))?)?;
    let shapes = shape_table(&preds, &refs, &reported, &cfg.paths.data_root)?;
    if !shapes.is_empty() {
        write_table(&shapes, &eval_dir.join(SHAPE_FILE))?;
    }

    let comparison = match &args.compare {
        None => None,
        Some(dir) => {
            let preds_b = load_references(dir)?;
            let comparable: Vec<String> = reported
                .iter()
                .filter(|b| report.is_comparable(b))
                .cloned()
                .collect();
            let rows_a = evaluate_cohort(&preds, &refs, &comparable, radius)?;
            let rows_b = evaluate_cohort(&preds_b, &refs, &comparable, radius)
                .map_err(|e| CliError::Usage(format!("second method {}: {e}", dir.display())))?;
            write_cohort_csv(&rows_b, create_file(&eval_dir.join(METRICS_B_FILE))?)?;
            let tests = compare_methods(
                &comparisons_to_table(&rows_a),
                &comparisons_to_table(&rows_b),
                cfg.evaluation.compare_options(),
            )?;
            write_comparison_csv(&tests, create_file(&eval_dir.join(COMPARISON_FILE))?)?;
            let shapes_b = shape_table(&preds_b, &refs, &comparable, &cfg.paths.data_root)?;
            if !shapes_b.is_empty() {
                write_table(&shapes_b, &eval_dir.join(SHAPE_B_FILE))?;
            }
            Some((
                tests.len(),
                tests.iter().filter(|t| t.significant()).count(),
            ))
        }
    };

    Ok(EvaluateSummary {
        rows: rows.len(),
        reported_bundles: reported,
        exclusions: report,
        shape_rows: shapes.len(),
        comparison,
    })
}
