//! Report generation: versioned CSV tables and dependency-free SVG line
//! charts. Every plotted point is also present in a CSV; plots are derived
//! artifacts. Schema headers are pinned by golden tests.

use crate::proxies::Fig2Point;
use crate::search::LogRow;

pub const SCORE_TABLE_SCHEMA: &str = "# score_table v1";
pub const CONVERGENCE_SCHEMA: &str = "# convergence v1";
pub const FIG2_SCHEMA: &str = "# fig2 v1";
pub const THEOREM1_SCHEMA: &str = "# theorem1 v1";
pub const KENDALL_SCHEMA: &str = "# kendall v1";

/// One row of the score table emitted by the scoring and corpus commands.
#[derive(Clone, Debug)]
pub struct ScoreRow {
    pub arch_id: String,
    pub proxy: String,
    pub value: f64,
    pub std_error: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn sanitize(field: &str) -> String {
    field.replace([',', '\n', '\r'], "_")
}

pub fn score_table_csv(rows: &[ScoreRow]) -> String {
    let mut out = String::new();
    out.push_str(SCORE_TABLE_SCHEMA);
    out.push_str("\narch_id,proxy,value,std_error,wall_time,seed\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sanitize(&r.arch_id),
            sanitize(&r.proxy),
            fmt_f64(r.value),
            fmt_f64(r.std_error),
            fmt_f64(r.wall_time_s),
            r.seed
        ));
    }
    out
}

pub fn convergence_csv(log: &[LogRow]) -> String {
    let mut out = String::new();
    out.push_str(CONVERGENCE_SCHEMA);
    out.push_str("\niteration,best_score_so_far,population_min,population_mean,wall_time\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration,
            fmt_f64(r.best_score_so_far),
            fmt_f64(r.population_min),
            fmt_f64(r.population_mean),
            fmt_f64(r.wall_time_s)
        ));
    }
    out
}

pub fn fig2_csv(family: &str, with_bn: bool, points: &[Fig2Point]) -> String {
    let mut out = String::new();
    out.push_str(FIG2_SCHEMA);
    out.push_str("\nfamily,with_bn,x,proxy,value,std_error,overflowed\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},phi,{},{},{}\n",
            family,
            with_bn,
            p.x,
            fmt_f64(p.phi.value),
            fmt_f64(p.phi.std_error),
            p.phi.overflowed
        ));
        if let Some(zen) = &p.zen {
            out.push_str(&format!(
                "{},{},{},zen,{},{},{}\n",
                family,
                with_bn,
                p.x,
                fmt_f64(zen.value),
                fmt_f64(zen.std_error),
                zen.overflowed
            ));
        }
    }
    out
}

/// `(depth, bhw, ratio, |ratio - 1|, seeds)` rows.
pub fn theorem1_csv(rows: &[(u32, u64, f64, f64, usize)]) -> String {
    let mut out = String::new();
    out.push_str(THEOREM1_SCHEMA);
    out.push_str("\ndepth,bhw,ratio,abs_deviation,seeds\n");
    for (depth, bhw, ratio, dev, seeds) in rows {
        out.push_str(&format!("{},{},{},{},{}\n", depth, bhw, fmt_f64(*ratio), fmt_f64(*dev), seeds));
    }
    out
}

pub fn kendall_csv(rows: &[(String, String, f64)]) -> String {
    let mut out = String::new();
    out.push_str(KENDALL_SCHEMA);
    out.push_str("\nproxy_a,proxy_b,tau\n");
    for (a, b, tau) in rows {
        out.push_str(&format!("{},{},{}\n", sanitize(a), sanitize(b), fmt_f64(*tau)));
    }
    out
}

/// Kendall's tau-b between two rankings (tie-aware, so tau(x, x) = 1 even
/// with tied values).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_a = 0i64;
    let mut ties_b = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].partial_cmp(&a[j]).unwrap_or(std::cmp::Ordering::Equal);
            let db = b[i].partial_cmp(&b[j]).unwrap_or(std::cmp::Ordering::Equal);
            match (da, db) {
                (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => {
                    ties_a += 1;
                    ties_b += 1;
                }
                (std::cmp::Ordering::Equal, _) => ties_a += 1,
                (_, std::cmp::Ordering::Equal) => ties_b += 1,
                (x, y) if x == y => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - ties_a) as f64) * ((n0 - ties_b) as f64)).sqrt();
    if denom == 0.0 {
        return 1.0;
    }
    (concordant - discordant) as f64 / denom
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 1.0;
    }
    cov / (va * vb).sqrt()
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in points {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

// ---------------------------------------------------------------------------
// SVG line charts
// ---------------------------------------------------------------------------

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Render a line chart as a standalone SVG document. Non-finite points are
/// skipped (they remain visible in the CSV next to the plot).
pub fn svg_line_chart(spec: &ChartSpec) -> String {
    let (w, h) = (800.0, 500.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 55.0);
    let finite: Vec<(f64, f64)> = spec
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .copied()
        .collect();
    let (x_min, x_max, y_min, y_max) = if finite.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        let x_min = finite.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_max = finite.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let y_min = finite.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let y_max = finite.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let pad = |lo: f64, hi: f64| if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        (x_min, x_max, y_min, y_max)
    };
    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        xml_escape(&spec.title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!("<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n", h - mb));
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.4}</text>\n",
            sx(fx),
            h - mb + 18.0,
            fx
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
            ml - 6.0,
            sy(fy) + 4.0,
            fy
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0,
        xml_escape(&spec.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        xml_escape(&spec.y_label)
    ));
    for (i, series) in spec.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                color,
                pts.join(" ")
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            w - mr - 160.0,
            mt + 16.0 * i as f64 + 4.0,
            color,
            xml_escape(&series.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_table_header_is_pinned() {
        let csv = score_table_csv(&[]);
        assert_eq!(csv, "# score_table v1\narch_id,proxy,value,std_error,wall_time,seed\n");
    }

    #[test]
    fn convergence_header_is_pinned() {
        let csv = convergence_csv(&[]);
        assert_eq!(csv, "# convergence v1\niteration,best_score_so_far,population_min,population_mean,wall_time\n");
    }

    #[test]
    fn fig2_and_theorem1_headers_are_pinned() {
        assert!(fig2_csv("p", false, &[]).starts_with("# fig2 v1\nfamily,with_bn,x,proxy,value,std_error,overflowed\n"));
        assert!(theorem1_csv(&[]).starts_with("# theorem1 v1\ndepth,bhw,ratio,abs_deviation,seeds\n"));
        assert!(kendall_csv(&[]).starts_with("# kendall v1\nproxy_a,proxy_b,tau\n"));
    }

    #[test]
    fn infinities_render_as_words_not_numbers() {
        let rows = vec![ScoreRow {
            arch_id: "x".into(),
            proxy: "naswot".into(),
            value: f64::NEG_INFINITY,
            std_error: 0.0,
            wall_time_s: 0.1,
            seed: 3,
        }];
        let csv = score_table_csv(&rows);
        assert!(csv.contains("x,naswot,-inf,0,0.1,3"));
    }

    #[test]
    fn kendall_tau_self_is_one_and_reverse_is_minus_one() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau(&a, &a), 1.0);
        assert_eq!(kendall_tau(&a, &b), -1.0);
        let tied = vec![1.0, 1.0, 2.0, 3.0];
        assert_eq!(kendall_tau(&tied, &tied), 1.0);
    }

    #[test]
    fn spearman_handles_monotone_and_ties() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b = vec![10.0, 20.0, 30.0, 40.0, 50.0];
        assert!((spearman_rho(&a, &b) - 1.0).abs() < 1e-12);
        let c = vec![5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&a, &c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_a_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svg_is_structurally_sound_and_skips_nonfinite_points() {
        let spec = ChartSpec {
            title: "t < 1 & 2".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, f64::INFINITY), (2.0, 3.0)],
            }],
        };
        let svg = svg_line_chart(&spec);
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("&lt;")); // escaped title
        assert!(!svg.contains("inf"));
        // balanced tag count
        assert_eq!(svg.matches("<svg").count(), 1);
        assert_eq!(svg.matches("</svg>").count(), 1);
    }
}
