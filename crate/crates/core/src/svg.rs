//! Minimal static SVG line chart of mean AUC against iteration.

use std::fmt::Write as _;

use crate::eval::ExperimentReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per method through its mean AUC at each iteration of
/// `experiment`. The y axis spans the observed range padded to tenths.
pub fn auc_line_chart(report: &ExperimentReport, experiment: &str) -> String {
    let summary: Vec<_> = report
        .summary()
        .into_iter()
        .filter(|s| s.experiment == experiment)
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle">{} mean AUC by iteration</text>"#,
        WIDTH / 2.0,
        escape(experiment)
    );
    if summary.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let it_min = summary.iter().map(|s| s.iteration).min().unwrap_or(1) as f64;
    let it_max = summary.iter().map(|s| s.iteration).max().unwrap_or(1) as f64;
    let lo = summary.iter().map(|s| s.mean).fold(f64::INFINITY, f64::min);
    let hi = summary.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = ((lo * 10.0).floor() / 10.0).max(0.0);
    let y_hi = ((hi * 10.0).ceil() / 10.0).min(1.0).max(y_lo + 0.1);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x = |it: f64| {
        let span = (it_max - it_min).max(1.0);
        MARGIN_L + (it - it_min) / span * plot_w
    };
    let y = |v: f64| MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    let ticks = ((y_hi - y_lo) * 10.0).round() as usize;
    for t in 0..=ticks {
        let v = y_lo + t as f64 / 10.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#,
            MARGIN_L - 6.0,
            y(v) + 4.0
        );
    }
    for it in (it_min as usize)..=(it_max as usize) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{it}</text>"#,
            x(it as f64),
            HEIGHT - MARGIN_B + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">iteration</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    );

    for (m, method) in report.methods().iter().enumerate() {
        let pts: Vec<String> = summary
            .iter()
            .filter(|s| &s.method == method)
            .map(|s| format!("{:.1},{:.1}", x(s.iteration as f64), y(s.mean)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let colour = PALETTE[m % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_T + 10.0 + 18.0 * m as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(method)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ReportRow;

    #[test]
    fn one_polyline_per_method() {
        let mut r = ExperimentReport::new(vec!["A".into(), "B<".into()]);
        for it in 1..=3 {
            for (m, base) in [("A", 0.7), ("B<", 0.8)] {
                r.push(ReportRow {
                    experiment: "EX1".into(),
                    iteration: it,
                    repetition: 1,
                    method: m.into(),
                    auc: base + 0.05 * it as f64,
                })
                .unwrap();
            }
        }
        let svg = auc_line_chart(&r, "EX1");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("B&lt;"));
        assert_eq!(auc_line_chart(&r, "EX9").matches("<polyline").count(), 0);
    }
}
