//! Minimal self-contained SVG rendering for risk-coverage curves.

use std::fmt::Write as _;

use crate::eval::RiskCoverageCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn x_pixel(coverage: f64) -> f64 {
    MARGIN + coverage * (WIDTH - 2.0 * MARGIN)
}

fn y_pixel(risk: f64) -> f64 {
    HEIGHT - MARGIN - risk * (HEIGHT - 2.0 * MARGIN)
}

/// Render a risk-coverage curve as a standalone SVG document. Output is
/// byte-deterministic for a given curve.
pub fn render_rc_curve_svg(curve: &RiskCoverageCurve, title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

    // axes
    let x0 = x_pixel(0.0);
    let x1 = x_pixel(1.0);
    let y0 = y_pixel(0.0);
    let y1 = y_pixel(1.0);
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>"
    );

    // ticks and grid every 0.2
    for i in 0..=5 {
        let v = i as f64 * 0.2;
        let xp = x_pixel(v);
        let yp = y_pixel(v);
        let _ = writeln!(
            svg,
            "  <line x1=\"{xp:.1}\" y1=\"{y0:.1}\" x2=\"{xp:.1}\" y2=\"{y1:.1}\" \
             stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{x0:.1}\" y1=\"{yp:.1}\" x2=\"{x1:.1}\" y2=\"{yp:.1}\" \
             stroke=\"#dddddd\"/>"
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{xp:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{v:.1}</text>",
            y0 + 18.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{v:.1}</text>",
            x0 - 8.0,
            yp + 4.0
        );
    }

    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\">coverage</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">risk (1 - F1)</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut path = String::new();
    for p in &curve.points {
        let _ = write!(path, "{:.2},{:.2} ", x_pixel(p.coverage), y_pixel(p.risk));
    }
    let _ = writeln!(
        svg,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>",
        path.trim_end()
    );

    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\">{} (AURC = {:.4})</text>",
        x0 + 8.0,
        y1 - 10.0,
        title,
        curve.aurc
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RcPoint;

    #[test]
    fn svg_contains_curve_and_is_deterministic() {
        let curve = RiskCoverageCurve::from_points(vec![
            RcPoint { threshold: 1.0, coverage: 0.0, risk: 0.0 },
            RcPoint { threshold: 0.5, coverage: 0.5, risk: 0.1 },
            RcPoint { threshold: 0.0, coverage: 1.0, risk: 0.3 },
        ])
        .unwrap();
        let a = render_rc_curve_svg(&curve, "test");
        let b = render_rc_curve_svg(&curve, "test");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("<polyline"));
        assert!(a.contains("AURC"));
    }
}
