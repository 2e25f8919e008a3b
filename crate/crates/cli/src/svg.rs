//! Static SVG figures: per-bundle box plots and an effect-size heatmap.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\"";
const SERIES_COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

/// Tukey summary: quartiles by linear interpolation, whiskers at the most extreme
/// values within 1.5 IQR of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub low: f64,
    pub high: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

impl BoxStats {
    /// `None` for an empty sample. Non-finite values are ignored.
    pub fn new(values: &[f64]) -> Option<BoxStats> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let fence = 1.5 * (q3 - q1);
        let low = v.iter().copied().find(|&x| x >= q1 - fence).unwrap_or(q1);
        let high = v
            .iter()
            .rev()
            .copied()
            .find(|&x| x <= q3 + fence)
            .unwrap_or(q3);
        Some(BoxStats {
            q1,
            median,
            q3,
            low,
            high,
        })
    }
}

/// One bundle's boxes, one per method.
#[derive(Debug, Clone)]
pub struct BoxGroup {
    pub bundle: String,
    pub series: Vec<Vec<f64>>,
    pub star: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Box plot on a fixed `[0, 1]` axis. Each box is a `rect` with class `box`; each
/// significance marker is a `text` with class `star`.
pub fn box_plot(
    title: &str,
    y_label: &str,
    series_names: &[String],
    groups: &[BoxGroup],
) -> String {
    let n_series = series_names.len().max(1);
    let group_w = 24.0 * n_series as f64 + 28.0;
    let (left, top, plot_h, bottom) = (60.0, 50.0, 300.0, 110.0);
    let width = left + group_w * groups.len().max(1) as f64 + 30.0;
    let height = top + plot_h + bottom;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" {FONT}>{}</text>",
        width / 2.0,
        escape(title)
    );
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\" {FONT}>{v:.1}</text>",
            width - 30.0,
            y(v),
            y(v),
            left - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text transform=\"translate(16 {:.1}) rotate(-90)\" text-anchor=\"middle\" font-size=\"12\" {FONT}>{}</text>",
        top + plot_h / 2.0,
        escape(y_label)
    );
    for (g, group) in groups.iter().enumerate() {
        let x0 = left + g as f64 * group_w + 14.0;
        for (k, values) in group.series.iter().enumerate() {
            let Some(b) = BoxStats::new(values) else {
                continue;
            };
            let (x, color) = (x0 + 24.0 * k as f64, SERIES_COLORS[k % SERIES_COLORS.len()]);
            let cx = x + 9.0;
            let _ = writeln!(
                s,
                "<line x1=\"{cx:.1}\" x2=\"{cx:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                y(b.low),
                y(b.high)
            );
            let _ = writeln!(
                s,
                "<rect class=\"box\" x=\"{x:.1}\" y=\"{:.1}\" width=\"18\" height=\"{:.1}\" fill=\"{color}\" stroke=\"black\"/>",
                y(b.q3),
                (y(b.q1) - y(b.q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                "<line x1=\"{x:.1}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
                x + 18.0,
                y(b.median),
                y(b.median)
            );
            for &v in values.iter().filter(|&&v| v < b.low || v > b.high) {
                let _ = writeln!(s, "<circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>", y(v));
            }
        }
        let mid = x0 + 12.0 * n_series as f64 - 3.0;
        if group.star {
            let _ = writeln!(
                s,
                "<text class=\"star\" x=\"{mid:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"18\" {FONT}>*</text>",
                top - 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text transform=\"translate({mid:.1} {:.1}) rotate(-45)\" text-anchor=\"end\" font-size=\"11\" {FONT}>{}</text>",
            top + plot_h + 14.0,
            escape(&group.bundle)
        );
    }
    if series_names.len() > 1 {
        for (k, name) in series_names.iter().enumerate() {
            let lx = left + 120.0 * k as f64;
            let ly = height - 14.0;
            let _ = writeln!(
                s,
                "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.1}\" y=\"{ly:.1}\" font-size=\"11\" {FONT}>{}</text>",
                ly - 9.0,
                SERIES_COLORS[k % SERIES_COLORS.len()],
                lx + 14.0,
                escape(name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// White to red by `value / scale`; light gray for undefined cells.
fn heat_color(value: Option<f64>, scale: f64) -> String {
    match value {
        None => "#d9d9d9".into(),
        Some(v) => {
            let t = (v / scale).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - t)).round() as u8;
            format!("#ff{g:02x}{g:02x}")
        }
    }
}

/// Heatmap with one `rect` of class `cell` per `(row, column)`; values are
/// printed inside, undefined cells read `n/a`.
pub fn heatmap(
    title: &str,
    rows: &[String],
    columns: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    let (cell_w, cell_h, left, top) = (90.0, 26.0, 130.0, 70.0);
    let width = left + cell_w * columns.len() as f64 + 20.0;
    let height = top + cell_h * rows.len() as f64 + 40.0;
    let scale = values
        .iter()
        .flatten()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(1.0_f64, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" {FONT}>{}</text>",
        width / 2.0,
        escape(title)
    );
    for (j, col) in columns.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\" {FONT}>{}</text>",
            left + cell_w * (j as f64 + 0.5),
            top - 8.0,
            escape(col)
        );
    }
    for (i, row) in rows.iter().enumerate() {
        let ry = top + cell_h * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\" {FONT}>{}</text>",
            left - 8.0,
            ry + cell_h * 0.65,
            escape(row)
        );
        for j in 0..columns.len() {
            let v = values.get(i).and_then(|r| r.get(j)).copied().flatten();
            let x = left + cell_w * j as f64;
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{x:.1}\" y=\"{ry:.1}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{}\" stroke=\"white\"/>",
                heat_color(v, scale)
            );
            let label = v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\" {FONT}>{label}</text>",
                x + cell_w / 2.0,
                ry + cell_h * 0.65
            );
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{left}\" y=\"{:.1}\" font-size=\"11\" {FONT}>|d|, color scale 0 to {scale:.2}</text>",
        height - 12.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_stats_of_known_sample() {
        let b = BoxStats::new(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.q1, b.median, b.q3), (2.0, 3.0, 4.0));
        assert_eq!((b.low, b.high), (1.0, 5.0));
        let o = BoxStats::new(&[1.0, 1.1, 1.2, 1.3, 9.0]).unwrap();
        assert_eq!(o.high, 1.3);
        assert!(BoxStats::new(&[]).is_none());
    }

    #[test]
    fn one_box_per_bundle_and_series_and_stars_as_flagged() {
        let groups = vec![
            BoxGroup {
                bundle: "CC_Body".into(),
                series: vec![vec![0.8, 0.9], vec![0.6, 0.7]],
                star: true,
            },
            BoxGroup {
                bundle: "Fornix".into(),
                series: vec![vec![0.5], vec![0.4]],
                star: false,
            },
        ];
        let svg = box_plot("t", "dice", &["a".into(), "b".into()], &groups);
        assert_eq!(svg.matches("class=\"box\"").count(), 4);
        assert_eq!(svg.matches("class=\"star\"").count(), 1);
    }

    #[test]
    fn heatmap_has_a_cell_for_every_pair() {
        let rows = vec!["A".to_string(), "B".into(), "C".into()];
        let cols: Vec<String> = ["w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let vals = vec![vec![Some(0.1), None, Some(2.0), Some(0.5)]];
        let svg = heatmap("t", &rows, &cols, &vals);
        assert_eq!(svg.matches("class=\"cell\"").count(), 12);
        assert!(svg.contains("n/a"));
    }

    #[test]
    fn labels_are_escaped() {
        let svg = heatmap("a<b", &["x&y".into()], &["m".into()], &[vec![Some(1.0)]]);
        assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y"));
    }
}
