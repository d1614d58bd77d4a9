//! Minimal hand-rolled SVG line charts: steps-to-stop and SFO complexity
//! against batch size, log2 x-axis and log10 y-axis. The measured critical
//! batch is marked with a double circle; an externally estimated one with a
//! square.

use crate::error::{Error, Result};
use crate::harness::sweep::BatchAggregate;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

struct ChartSpec<'a> {
    title: &'a str,
    y_label: &'a str,
    /// (batch size, value); both strictly positive.
    points: Vec<(f64, f64)>,
    /// Double-circle marker, placed on the curve at this batch size.
    measured_b: Option<f64>,
    /// Square marker, placed on the curve at this batch size.
    estimated_b: Option<f64>,
}

/// Steps-to-stop versus batch size.
pub fn steps_chart(
    aggregates: &[BatchAggregate],
    measured: Option<(f64, f64)>,
    estimated_b: Option<f64>,
) -> Result<String> {
    line_chart(ChartSpec {
        title: "steps to stop threshold vs batch size",
        y_label: "steps N",
        points: aggregates.iter().map(|a| (a.b as f64, a.mean_steps)).collect(),
        measured_b: measured.map(|(b, _)| b),
        estimated_b,
    })
}

/// SFO complexity (steps x batch) versus batch size.
pub fn sfo_chart(
    aggregates: &[BatchAggregate],
    measured: Option<(f64, f64)>,
    estimated_b: Option<f64>,
) -> Result<String> {
    line_chart(ChartSpec {
        title: "SFO complexity vs batch size",
        y_label: "SFO = N x b",
        points: aggregates.iter().map(|a| (a.b as f64, a.sfo)).collect(),
        measured_b: measured.map(|(b, _)| b),
        estimated_b,
    })
}

fn line_chart(spec: ChartSpec<'_>) -> Result<String> {
    if spec.points.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    for &(b, y) in &spec.points {
        if !(b > 0.0) || !(y > 0.0) || !y.is_finite() {
            return Err(Error::Csv(format!("chart point ({b}, {y}) not positive finite")));
        }
    }
    let mut points = spec.points.clone();
    points.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    let (x_min, x_max) = span(points.iter().map(|p| p.0.log2()));
    let (y_min, y_max) = span(points.iter().map(|p| p.1.log10()));
    // Pad degenerate ranges so a single point still renders.
    let (x_min, x_max) = pad(x_min, x_max, 0.5);
    let (y_min, y_max) = pad(y_min, y_max, 0.5);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_x = |b: f64| MARGIN_LEFT + (b.log2() - x_min) / (x_max - x_min) * plot_w;
    let to_y = |v: f64| MARGIN_TOP + (y_max - v.log10()) / (y_max - y_min) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        spec.title
    ));

    // Axes.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    s.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">batch size b (log2)</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{} (log10)</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        spec.y_label
    ));

    // X ticks at each sampled batch size.
    for &(b, _) in &points {
        let x = to_x(b);
        s.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y0}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 18.0,
            fmt_tick(b)
        ));
    }
    // Y ticks at the powers of ten inside the range.
    let mut p = y_min.ceil() as i64;
    while (p as f64) <= y_max {
        let v = 10f64.powi(p as i32);
        let y = to_y(v);
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{x0}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{p}</text>\n",
            x0 - 8.0,
            y + 4.0
        ));
        p += 1;
    }

    // The data polyline and its point markers.
    let path: Vec<String> = points
        .iter()
        .map(|&(b, v)| format!("{:.2},{:.2}", to_x(b), to_y(v)))
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
        path.join(" ")
    ));
    for &(b, v) in &points {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"steelblue\"/>\n",
            to_x(b),
            to_y(v)
        ));
    }

    // Critical-batch markers, placed on the interpolated curve.
    if let Some(b) = spec.measured_b {
        if let Some(v) = interpolate(&points, b) {
            let (x, y) = (to_x(b), to_y(v));
            s.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\"/>\n"
            ));
            s.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"9\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\"/>\n"
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"crimson\">measured b*={}</text>\n",
                x + 12.0,
                y - 10.0,
                fmt_tick(b)
            ));
        }
    }
    if let Some(b) = spec.estimated_b {
        if let Some(v) = interpolate(&points, b) {
            let (x, y) = (to_x(b), to_y(v));
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"none\" stroke=\"darkorange\" stroke-width=\"1.5\"/>\n",
                x - 6.0,
                y - 6.0
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"darkorange\">estimated b*={}</text>\n",
                x + 12.0,
                y + 16.0,
                fmt_tick(b)
            ));
        }
    }

    s.push_str("</svg>\n");
    Ok(s)
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn pad(lo: f64, hi: f64, eps: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - eps, hi + eps)
    } else {
        (lo, hi)
    }
}

/// Piecewise log-log interpolation on the sorted curve; None outside its
/// batch range.
fn interpolate(points: &[(f64, f64)], b: f64) -> Option<f64> {
    if !(b > 0.0) {
        return None;
    }
    let lb = b.log2();
    for w in points.windows(2) {
        let (b0, v0) = w[0];
        let (b1, v1) = w[1];
        if (b0.log2()..=b1.log2()).contains(&lb) {
            let t = if b1 > b0 { (lb - b0.log2()) / (b1.log2() - b0.log2()) } else { 0.0 };
            return Some(10f64.powf(v0.log10() + t * (v1.log10() - v0.log10())));
        }
    }
    if points.len() == 1 && (points[0].0 - b).abs() < 1e-12 {
        return Some(points[0].1);
    }
    None
}

fn fmt_tick(b: f64) -> String {
    if b == b.trunc() {
        format!("{}", b as i64)
    } else {
        format!("{b:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aggs(table: &[(usize, f64)]) -> Vec<BatchAggregate> {
        table
            .iter()
            .map(|&(b, mean)| BatchAggregate {
                b,
                n_seeds: 5,
                mean_steps: mean,
                min_steps: mean as u64,
                max_steps: mean as u64,
                sfo: mean * b as f64,
            })
            .collect()
    }

    #[test]
    fn sfo_chart_marks_the_measured_minimum() {
        // N(b) table with its SFO minimum at b = 8.
        let a = aggs(&[(1, 1000.0), (2, 480.0), (4, 230.0), (8, 100.0), (16, 70.0), (32, 60.0)]);
        let samples: Vec<(f64, f64)> = a.iter().map(|x| (x.b as f64, x.mean_steps)).collect();
        let measured = crate::theory::measured_critical_batch(&samples).unwrap();
        assert_eq!(measured.0, 8.0);
        let svg = sfo_chart(&a, Some(measured), None).unwrap();
        assert!(svg.contains("measured b*=8"));
        // Two concentric circles at the marker.
        assert_eq!(svg.matches("stroke=\"crimson\"").count(), 2);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn estimated_marker_is_a_square() {
        let a = aggs(&[(1, 700.0), (4, 220.0), (16, 90.0)]);
        let svg = steps_chart(&a, None, Some(8.0)).unwrap();
        assert!(svg.contains("<rect") && svg.contains("estimated b*=8"));
        assert!(!svg.contains("crimson"));
    }

    #[test]
    fn charts_reject_empty_or_nonpositive_input() {
        assert!(steps_chart(&[], None, None).is_err());
        let mut a = aggs(&[(1, 10.0)]);
        a[0].mean_steps = 0.0;
        assert!(steps_chart(&a, None, None).is_err());
    }

    #[test]
    fn single_point_series_still_renders() {
        let a = aggs(&[(8, 100.0)]);
        let svg = steps_chart(&a, Some((8.0, 800.0)), None).unwrap();
        assert!(svg.contains("measured b*=8"));
    }

    #[test]
    fn interpolation_hits_the_nodes_and_midpoints() {
        let pts = vec![(2.0, 100.0), (8.0, 10.0)];
        assert!((interpolate(&pts, 2.0).unwrap() - 100.0).abs() < 1e-9);
        assert!((interpolate(&pts, 8.0).unwrap() - 10.0).abs() < 1e-9);
        // Log-log midpoint: b = 4 is halfway in log2, value sqrt(100*10).
        let mid = interpolate(&pts, 4.0).unwrap();
        assert!((mid - 1000f64.sqrt()).abs() < 1e-9);
        assert!(interpolate(&pts, 16.0).is_none());
    }
}
