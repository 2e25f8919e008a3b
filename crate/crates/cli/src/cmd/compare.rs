use std::path::{Path, PathBuf};

use serde::Serialize;
use wmseg_core::stats::{
    compare_methods, effect_sizes, write_comparison_csv, EffectSizeRow, MetricTable,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{create_file, open_file, OutputLayout};

use super::evaluate::{COMPARISON_FILE, METRICS_B_FILE, METRICS_FILE, SHAPE_B_FILE, SHAPE_FILE};

pub const EFFECT_SIZES_FILE: &str = "effect_sizes.csv";

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    /// Metric tables of the two methods; default to the evaluate outputs.
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    /// Tables for effect sizes; default to the shape tables, else the metric tables.
    pub effect_a: Option<PathBuf>,
    pub effect_b: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub tests: usize,
    pub significant: usize,
    pub effect_sizes: usize,
}

pub fn read_table(path: &Path) -> Result<MetricTable> {
    MetricTable::read_csv(open_file(path)?).map_err(|e| CliError::parse(path, e))
}

/// `bundle,metric,d,abs_d,label` with empty cells where `d` is undefined.
pub fn write_effect_sizes(rows: &[EffectSizeRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let err = |e: csv::Error| CliError::io(path, e.into());
    w.write_record(["bundle", "metric", "d", "abs_d", "label"])
        .map_err(err)?;
    for r in rows {
        let (d, abs, label) = match r.d {
            Some(d) => (
                d.to_string(),
                d.abs().to_string(),
                wmseg_core::stats::effect_size_label(d).to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([r.bundle.as_str(), r.metric.as_str(), &d, &abs, &label])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `(bundle, metric) → d` from an effect-size CSV; undefined cells map to `None`.
pub fn read_effect_sizes(path: &Path) -> Result<Vec<EffectSizeRow>> {
    let mut r = csv::Reader::from_reader(open_file(path)?);
    let err = |e: String| CliError::parse(path, e);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let d = match field(2).as_str() {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad d `{s}`: {e}")))?,
            ),
        };
        out.push(EffectSizeRow {
            bundle: field(0),
            metric: field(1),
            d,
        });
    }
    Ok(out)
}

fn pick(given: &Option<PathBuf>, dir: &Path, preferred: &str, fallback: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| {
        let p = dir.join(preferred);
        if p.is_file() {
            p
        } else {
            dir.join(fallback)
        }
    })
}

/// Paired Wilcoxon tests with BH-FDR between two metric tables, plus Cohen's d
/// between two (shape) tables, written under `<output>/stats`.
pub fn compare_stats(cfg: &PipelineConfig, args: &CompareArgs) -> Result<CompareSummary> {
    let out = OutputLayout::new(&cfg.paths.output_root);
    let eval = out.eval();
    let a = read_table(&args.a.clone().unwrap_or_else(|| eval.join(METRICS_FILE)))?;
    let b = read_table(&args.b.clone().unwrap_or_else(|| eval.join(METRICS_B_FILE)))?;
    let tests = compare_methods(&a, &b, cfg.evaluation.compare_options())?;
    write_comparison_csv(&tests, create_file(&out.stats().join(COMPARISON_FILE))?)?;

    let ea = read_table(&pick(&args.effect_a, &eval, SHAPE_FILE, METRICS_FILE))?;
    let eb = read_table(&pick(&args.effect_b, &eval, SHAPE_B_FILE, METRICS_B_FILE))?;
    let d = effect_sizes(&ea, &eb);
    write_effect_sizes(&d, &out.stats().join(EFFECT_SIZES_FILE))?;
    Ok(CompareSummary {
        tests: tests.len(),
        significant: tests.iter().filter(|t| t.significant()).count(),
        effect_sizes: d.len(),
    })
}
