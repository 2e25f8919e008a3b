//! Paired method comparison: Wilcoxon signed-rank, Benjamini-Hochberg FDR and
//! Cohen's d.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Largest number of nonzero differences for which the exact null distribution is
/// used; above it the tie-corrected normal approximation takes over.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApproximation,
}

/// How to pick between the exact and approximate p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Force(Method),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    /// `min(W+, W-)` for two-sided tests, `W+` otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: Method,
}

/// Rank `|d|` ascending with mid-ranks for ties. Ranks are returned doubled so that
/// half ranks stay integral.
fn doubled_midranks(abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, doubled: (i+1 + j+1)
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    (ranks, tie_sizes)
}

/// Number of sign assignments giving each doubled `W+`, by subset-sum counting.
fn null_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are discarded. Returns `Ok(None)` when no nonzero difference
/// remains.
pub fn wilcoxon_signed_rank(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<Option<TestResult>> {
    wilcoxon_signed_rank_with(a, b, alternative, MethodChoice::Auto)
}

pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    choice: MethodChoice,
) -> Result<Option<TestResult>> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Invalid(
            "Wilcoxon test needs at least one pair".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid(
            "paired samples contain non-finite values".into(),
        ));
    }
    let d: Vec<f64> = d.into_iter().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(None);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks2, ties) = doubled_midranks(&abs);
    let total2: u64 = ranks2.iter().sum();
    let wplus2: u64 = d
        .iter()
        .zip(&ranks2)
        .filter(|(x, _)| **x > 0.0)
        .map(|(_, r)| r)
        .sum();
    let wminus2 = total2 - wplus2;

    let method = match choice {
        MethodChoice::Force(m) => m,
        MethodChoice::Auto if n <= EXACT_MAX_N => Method::Exact,
        MethodChoice::Auto => Method::NormalApproximation,
    };
    let statistic2 = match alternative {
        Alternative::TwoSided => wplus2.min(wminus2),
        _ => wplus2,
    };

    let p = match method {
        Method::Exact => {
            if n > 62 {
                return Err(Error::Invalid(format!(
                    "exact test is limited to 62 pairs, got {n}"
                )));
            }
            let counts = null_counts(&ranks2);
            let total = (1u64 << n) as f64;
            let le = |t: u64| counts[..=t as usize].iter().sum::<u64>();
            let ge = |t: u64| counts[t as usize..].iter().sum::<u64>();
            match alternative {
                Alternative::TwoSided => (2.0 * le(statistic2) as f64 / total).min(1.0),
                Alternative::Greater => ge(wplus2) as f64 / total,
                Alternative::Less => le(wplus2) as f64 / total,
            }
        }
        Method::NormalApproximation => {
            let nf = n as f64;
            let mean = nf * (nf + 1.0) / 4.0;
            let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
            let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
            let dev = wplus2 as f64 / 2.0 - mean;
            match alternative {
                Alternative::TwoSided => {
                    let z = (dev.abs() - 0.5).max(0.0) / sd;
                    (2.0 * normal_sf(z)).min(1.0)
                }
                Alternative::Greater => normal_sf((dev - 0.5) / sd),
                Alternative::Less => 1.0 - normal_sf((dev + 0.5) / sd),
            }
        }
    };

    Ok(Some(TestResult {
        statistic: statistic2 as f64 / 2.0,
        p_value: p,
        n_effective: n,
        method,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrResult {
    pub rejected: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure. Outputs are in input order.
pub fn fdr_bh(p_values: &[f64], alpha: f64) -> Result<FdrResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let cutoff = (0..m)
        .rev()
        .find(|&i| p_values[order[i]] <= (i + 1) as f64 * alpha / m as f64);
    let mut rejected = vec![false; m];
    if let Some(k) = cutoff {
        for &idx in &order[..=k] {
            rejected[idx] = true;
        }
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for i in (0..m).rev() {
        let idx = order[i];
        running = running.min(m as f64 * p_values[idx] / (i + 1) as f64);
        adjusted[idx] = running.min(1.0);
    }
    Ok(FdrResult { rejected, adjusted })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Cohen's d with pooled sample standard deviation. `Ok(None)` when the pooled
/// variance is zero.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Invalid(format!(
            "Cohen's d needs at least two values per sample, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let pooled = (((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0)).sqrt();
    if !(pooled > 0.0) || !pooled.is_finite() {
        return Ok(None);
    }
    Ok(Some((mx - my) / pooled))
}

/// Per-`(subject, bundle)` values of several named metrics; `None` marks undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricTable {
    metrics: Vec<String>,
    rows: BTreeMap<(String, String), Vec<Option<f64>>>,
}

impl MetricTable {
    pub fn new(metrics: Vec<String>) -> Self {
        MetricTable {
            metrics,
            rows: BTreeMap::new(),
        }
    }

    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, subject: &str, bundle: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.metrics.len() {
            return Err(Error::Invalid(format!(
                "{} values for {} metrics",
                values.len(),
                self.metrics.len()
            )));
        }
        let key = (subject.to_string(), bundle.to_string());
        if self.rows.insert(key, values).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate row ({subject}, {bundle})"
            )));
        }
        Ok(())
    }

    pub fn get(&self, subject: &str, bundle: &str, metric: &str) -> Option<f64> {
        let m = self.metrics.iter().position(|x| x == metric)?;
        self.rows
            .get(&(subject.to_string(), bundle.to_string()))
            .and_then(|v| v[m])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, &[Option<f64>])> {
        self.rows
            .iter()
            .map(|((s, b), v)| (s.as_str(), b.as_str(), v.as_slice()))
    }

    /// Bundles in first-seen subject/bundle key order, deduplicated and sorted.
    pub fn bundles(&self) -> Vec<String> {
        self.rows
            .keys()
            .map(|(_, b)| b.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Defined values of a metric for one bundle.
    pub fn column(&self, bundle: &str, metric: &str) -> Vec<f64> {
        let Some(m) = self.metrics.iter().position(|x| x == metric) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|((_, b), _)| b == bundle)
            .filter_map(|(_, v)| v[m])
            .collect()
    }

    /// CSV with a `subject,bundle,<metrics...>` header and empty undefined cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["subject".to_string(), "bundle".to_string()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for ((s, b), vals) in &self.rows {
            let mut rec = vec![s.clone(), b.clone()];
            rec.extend(
                vals.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::format("metric table", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<MetricTable> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 2 || &header[0] != "subject" || &header[1] != "bundle" {
            return Err(Error::format(
                "metric table",
                "header must start with `subject,bundle`",
            ));
        }
        let metrics: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut table = MetricTable::new(metrics);
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != header.len() {
                return Err(Error::format("metric table", "ragged row"));
            }
            let vals = rec
                .iter()
                .skip(2)
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        return Ok(None);
                    }
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::format("metric table", format!("bad number `{cell}`"))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::format(
                            "metric table",
                            format!("non-finite value `{cell}`"),
                        ));
                    }
                    Ok(Some(v))
                })
                .collect::<Result<Vec<_>>>()?;
            table.insert(&rec[0], &rec[1], vals)?;
        }
        Ok(table)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::format("metric table", e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdrFamily {
    /// All bundles of one metric form a family.
    PerMetric,
    /// Every test is in one family.
    Global,
}

#[derive(Debug, Clone, Copy)]
pub struct CompareOptions {
    pub alpha: f64,
    pub family: FdrFamily,
    pub alternative: Alternative,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            alpha: 0.05,
            family: FdrFamily::PerMetric,
            alternative: Alternative::TwoSided,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonOutcome {
    Tested {
        result: TestResult,
        p_adjusted: f64,
        significant: bool,
    },
    /// Every paired difference was zero.
    Undefined,
    /// No `(subject, bundle)` pair had a defined value in both tables.
    Untestable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub bundle: String,
    pub metric: String,
    pub n_pairs: usize,
    pub n_dropped: usize,
    pub outcome: ComparisonOutcome,
}

impl ComparisonRow {
    pub fn significant(&self) -> bool {
        matches!(
            self.outcome,
            ComparisonOutcome::Tested {
                significant: true,
                ..
            }
        )
    }

    pub fn p_adjusted(&self) -> Option<f64> {
        match &self.outcome {
            ComparisonOutcome::Tested { p_adjusted, .. } => Some(*p_adjusted),
            _ => None,
        }
    }
}

/// One Wilcoxon test per `(bundle, metric)` on `a - b`, with BH-FDR across each
/// family. Pairs undefined in either table are dropped and counted.
pub fn compare_methods(
    a: &MetricTable,
    b: &MetricTable,
    opts: CompareOptions,
) -> Result<Vec<ComparisonRow>> {
    let metrics: Vec<&String> = a.metrics.iter().filter(|m| b.metrics.contains(m)).collect();
    if metrics.is_empty() {
        return Err(Error::Invalid("tables share no metric".into()));
    }
    let bundles: BTreeSet<&String> = a
        .rows
        .keys()
        .chain(b.rows.keys())
        .map(|(_, bd)| bd)
        .collect();

    let mut rows = Vec::new();
    for metric in &metrics {
        let (ma, mb) = (
            a.metrics.iter().position(|x| x == *metric).unwrap(),
            b.metrics.iter().position(|x| x == *metric).unwrap(),
        );
        for &bundle in &bundles {
            let keys: BTreeSet<&(String, String)> = a
                .rows
                .keys()
                .chain(b.rows.keys())
                .filter(|(_, bd)| bd == bundle)
                .collect();
            let mut xa = Vec::new();
            let mut xb = Vec::new();
            for key in &keys {
                let va = a.rows.get(*key).and_then(|v| v[ma]);
                let vb = b.rows.get(*key).and_then(|v| v[mb]);
                if let (Some(va), Some(vb)) = (va, vb) {
                    xa.push(va);
                    xb.push(vb);
                }
            }
            let n_pairs = xa.len();
            let outcome = if n_pairs == 0 {
                ComparisonOutcome::Untestable
            } else {
                match wilcoxon_signed_rank(&xa, &xb, opts.alternative)? {
                    Some(result) => ComparisonOutcome::Tested {
                        p_adjusted: result.p_value,
                        result,
                        significant: false,
                    },
                    None => ComparisonOutcome::Undefined,
                }
            };
            rows.push(ComparisonRow {
                bundle: bundle.clone(),
                metric: (*metric).clone(),
                n_pairs,
                n_dropped: keys.len() - n_pairs,
                outcome,
            });
        }
    }

    let families: Vec<Vec<usize>> = match opts.family {
        FdrFamily::Global => vec![(0..rows.len()).collect()],
        FdrFamily::PerMetric => metrics
            .iter()
            .map(|m| (0..rows.len()).filter(|&i| &rows[i].metric == *m).collect())
            .collect(),
    };
    for family in families {
        let tested: Vec<usize> = family
            .into_iter()
            .filter(|&i| matches!(rows[i].outcome, ComparisonOutcome::Tested { .. }))
            .collect();
        if tested.is_empty() {
            continue;
        }
        let raw: Vec<f64> = tested
            .iter()
            .map(|&i| match &rows[i].outcome {
                ComparisonOutcome::Tested { result, .. } => result.p_value,
                _ => unreachable!(),
            })
            .collect();
        let fdr = fdr_bh(&raw, opts.alpha)?;
        for (k, &i) in tested.iter().enumerate() {
            if let ComparisonOutcome::Tested {
                p_adjusted,
                significant,
                ..
            } = &mut rows[i].outcome
            {
                *p_adjusted = fdr.adjusted[k];
                *significant = fdr.adjusted[k] < opts.alpha;
            }
        }
    }
    Ok(rows)
}

/// Results CSV: `bundle,metric,W,p_raw,p_adjusted,n_effective,significant` followed
/// by `method,n_pairs,n_dropped,status`. Undefined cells are empty.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "bundle",
        "metric",
        "W",
        "p_raw",
        "p_adjusted",
        "n_effective",
        "significant",
        "method",
        "n_pairs",
        "n_dropped",
        "status",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let (stat, raw, adj, neff, sig, method, status) = match &r.outcome {
            ComparisonOutcome::Tested {
                result,
                p_adjusted,
                significant,
            } => (
                result.statistic.to_string(),
                result.p_value.to_string(),
                p_adjusted.to_string(),
                result.n_effective.to_string(),
                significant.to_string(),
                match result.method {
                    Method::Exact => "exact",
                    Method::NormalApproximation => "normal",
                }
                .to_string(),
                "tested",
            ),
            ComparisonOutcome::Undefined => Default::default(),
            ComparisonOutcome::Untestable => Default::default(),
        };
        let status = match &r.outcome {
            ComparisonOutcome::Tested { .. } => status,
            ComparisonOutcome::Undefined => "undefined",
            ComparisonOutcome::Untestable => "untestable",
        };
        w.write_record([
            r.bundle.as_str(),
            r.metric.as_str(),
            &stat,
            &raw,
            &adj,
            &neff,
            &sig,
            &method,
            &r.n_pairs.to_string(),
            &r.n_dropped.to_string(),
            status,
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::format("comparison table", e))?;
    Ok(())
}

/// Significance flags read back from a results CSV, keyed by `(bundle, metric)`.
pub fn read_significance<R: Read>(input: R) -> Result<BTreeMap<(String, String), bool>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format("comparison table", format!("missing column `{name}`")))
    };
    let (cb, cm, cs) = (col("bundle")?, col("metric")?, col("significant")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        out.insert(
            (get(cb).to_string(), get(cm).to_string()),
            get(cs) == "true",
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSizeRow {
    pub bundle: String,
    pub metric: String,
    pub d: Option<f64>,
}

/// Cohen's d of `a` against `b` for every bundle and shared metric, using all
/// defined values in each table.
pub fn effect_sizes(a: &MetricTable, b: &MetricTable) -> Vec<EffectSizeRow> {
    let metrics: Vec<&String> = a.metrics.iter().filter(|m| b.metrics.contains(m)).collect();
    let bundles: BTreeSet<String> = a.bundles().into_iter().chain(b.bundles()).collect();
    let mut out = Vec::new();
    for bundle in &bundles {
        for metric in &metrics {
            let x = a.column(bundle, metric);
            let y = b.column(bundle, metric);
            let d = cohens_d(&x, &y).ok().flatten();
            out.push(EffectSizeRow {
                bundle: bundle.clone(),
                metric: (*metric).clone(),
                d,
            });
        }
    }
    out
}

/// Conventional reading of `|d|`: 0.2 small, 0.5 medium, 0.8 large.
pub fn effect_size_label(d: f64) -> &'static str {
    let d = d.abs();
    if d >= 0.8 {
        "large"
    } else if d >= 0.5 {
        "medium"
    } else if d >= 0.2 {
        "small"
    } else {
        "negligible"
    }
}
