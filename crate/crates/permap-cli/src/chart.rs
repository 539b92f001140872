//! Minimal self-contained SVG line charts.
//!
//! One chart per metric, one polyline per method, optional horizontal
//! reference lines (the chi-square consistency band on the NEES chart). The
//! output embeds no external resources.

use permap_core::metrics::chi2_band;

use crate::batch::BatchOutcome;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;

const PALETTE: [&str; 6] = [
    "#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66", "#77bedb",
];

/// One polyline: a label and its `(x, y)` points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A labeled horizontal reference line.
#[derive(Debug, Clone)]
pub struct ReferenceLine {
    pub value: f64,
    pub label: String,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Trimmed decimal label for an axis tick.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let text = format!("{v:.3}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    text.to_string()
}

/// Largest "nice" step (1, 2, 2.5, or 5 times a power of ten) giving at most
/// `max_ticks` intervals over `span`.
fn nice_step(span: f64, max_ticks: usize) -> f64 {
    let raw = span / max_ticks as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 2.5, 5.0, 10.0] {
        let step = mult * magnitude;
        if span / step <= max_ticks as f64 {
            return step;
        }
    }
    10.0 * magnitude
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * w
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        HEIGHT - MARGIN_BOTTOM - (v - self.y_min) / (self.y_max - self.y_min) * h
    }
}

/// Render a line chart to an SVG document string.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    references: &[ReferenceLine],
) -> String {
    let points = || series.iter().flat_map(|s| s.points.iter().copied());
    let mut x_min = points().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut x_max = points().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut y_min = points()
        .map(|p| p.1)
        .chain(references.iter().map(|r| r.value))
        .fold(f64::INFINITY, f64::min);
    let mut y_max = points()
        .map(|p| p.1)
        .chain(references.iter().map(|r| r.value))
        .fold(f64::NEG_INFINITY, f64::max);
    let empty = !x_min.is_finite();
    if empty {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = (y_max - y_min) * 0.06;
    let frame = Frame {
        x_min,
        x_max,
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!("  <title>{}</title>\n", escape(title)));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"26\" font-size=\"17\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        escape(title)
    ));

    let plot_left = MARGIN_LEFT;
    let plot_right = WIDTH - MARGIN_RIGHT;
    let plot_top = MARGIN_TOP;
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;

    // Gridlines and ticks.
    let y_step = nice_step(frame.y_max - frame.y_min, 6);
    let mut tick = (frame.y_min / y_step).ceil() * y_step;
    while tick <= frame.y_max + 1e-12 {
        let y = frame.y(tick);
        svg.push_str(&format!(
            "  <line x1=\"{plot_left:.1}\" y1=\"{y:.1}\" x2=\"{plot_right:.1}\" y2=\"{y:.1}\" \
             stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            plot_left - 8.0,
            y + 4.0,
            tick_label(tick)
        ));
        tick += y_step;
    }
    let x_step = nice_step(frame.x_max - frame.x_min, 8);
    let mut tick = (frame.x_min / x_step).ceil() * x_step;
    while tick <= frame.x_max + 1e-12 {
        let x = frame.x(tick);
        svg.push_str(&format!(
            "  <line x1=\"{x:.1}\" y1=\"{plot_bottom:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" \
             stroke=\"#404040\" stroke-width=\"1\"/>\n",
            plot_bottom + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            plot_bottom + 20.0,
            tick_label(tick)
        ));
        tick += x_step;
    }

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{plot_left:.1}\" y1=\"{plot_top:.1}\" x2=\"{plot_left:.1}\" \
         y2=\"{plot_bottom:.1}\" stroke=\"#404040\" stroke-width=\"1.5\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{plot_left:.1}\" y1=\"{plot_bottom:.1}\" x2=\"{plot_right:.1}\" \
         y2=\"{plot_bottom:.1}\" stroke=\"#404040\" stroke-width=\"1.5\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (plot_left + plot_right) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        (plot_top + plot_bottom) / 2.0,
        (plot_top + plot_bottom) / 2.0,
        escape(y_label)
    ));

    // Reference lines.
    for reference in references {
        let y = frame.y(reference.value);
        svg.push_str(&format!(
            "  <line x1=\"{plot_left:.1}\" y1=\"{y:.1}\" x2=\"{plot_right:.1}\" y2=\"{y:.1}\" \
             stroke=\"#808080\" stroke-width=\"1.2\" stroke-dasharray=\"7 4\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#606060\">{}</text>\n",
            plot_right + 6.0,
            y + 4.0,
            escape(&reference.label)
        ));
    }

    // Series and legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.points.is_empty() {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
                .collect();
            svg.push_str(&format!(
                "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" \
                 points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        let ly = plot_top + 16.0 + i as f64 * 22.0;
        svg.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>\n",
            plot_right + 14.0,
            plot_right + 40.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            plot_right + 46.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    if empty {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"14\" text-anchor=\"middle\" \
             fill=\"#808080\">no data</text>\n",
            (plot_left + plot_right) / 2.0,
            (plot_top + plot_bottom) / 2.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn metric_series(
    outcome: &BatchOutcome,
    pick: impl Fn(&crate::batch::AggregateRow) -> Option<f64>,
) -> Vec<Series> {
    outcome
        .methods
        .iter()
        .map(|&method| Series {
            label: method.as_str().to_string(),
            points: outcome
                .aggregates
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| pick(r).map(|v| (r.step as f64, v)))
                .collect(),
        })
        .collect()
}

/// The chart files for a batch: `(file name, svg text)` pairs.
pub fn batch_charts(outcome: &BatchOutcome) -> Vec<(String, String)> {
    use permap_core::mission::Task;
    let mut charts = Vec::new();
    match outcome.task {
        Task::Metric => {
            let pooled = outcome.seeds.len() * outcome.experiment.world.num_targets;
            let references = match chi2_band(2, pooled.max(1), 0.05) {
                Ok((lo, hi)) => vec![
                    ReferenceLine {
                        value: lo,
                        label: format!("band low {:.3}", lo),
                    },
                    ReferenceLine {
                        value: hi,
                        label: format!("band high {:.3}", hi),
                    },
                ],
                Err(_) => Vec::new(),
            };
            charts.push((
                "nees.svg".to_string(),
                line_chart(
                    "Average NEES by step",
                    "step",
                    "average NEES",
                    &metric_series(outcome, |r| r.nees.mean),
                    &references,
                ),
            ));
            charts.push((
                "rmse.svg".to_string(),
                line_chart(
                    "Position RMSE by step",
                    "step",
                    "RMSE [m]",
                    &metric_series(outcome, |r| r.rmse.mean),
                    &[],
                ),
            ));
        }
        Task::Semantic => {
            charts.push((
                "confidence.svg".to_string(),
                line_chart(
                    "True-class confidence by step",
                    "step",
                    "mean confidence",
                    &metric_series(outcome, |r| r.confidence.mean),
                    &[],
                ),
            ));
            charts.push((
                "accuracy.svg".to_string(),
                line_chart(
                    "Classification accuracy by step",
                    "step",
                    "accuracy",
                    &metric_series(outcome, |r| r.accuracy.mean),
                    &[],
                ),
            ));
        }
    }
    charts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_series() -> Vec<Series> {
        vec![
            Series {
                label: "basic".into(),
                points: (1..=20).map(|i| (i as f64, 2.0 + (i as f64).sqrt())).collect(),
            },
            Series {
                label: "complete".into(),
                points: (1..=20).map(|i| (i as f64, 2.0 / i as f64)).collect(),
            },
        ]
    }

    #[test]
    fn chart_is_well_formed_xml() {
        let svg = line_chart(
            "NEES <check> & band",
            "step",
            "NEES",
            &sample_series(),
            &[ReferenceLine {
                value: 2.4,
                label: "upper".into(),
            }],
        );
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let root = doc.root_element();
        assert_eq!(root.tag_name().name(), "svg");
        assert_eq!(
            root.tag_name().namespace(),
            Some("http://www.w3.org/2000/svg")
        );
        let polylines = doc
            .descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count();
        assert_eq!(polylines, 2);
    }

    #[test]
    fn empty_chart_is_still_valid() {
        let svg = line_chart("empty", "x", "y", &[], &[]);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert!(svg.contains("no data"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }

    #[test]
    fn nice_steps_cover_common_ranges() {
        assert_eq!(nice_step(10.0, 5), 2.0);
        assert_eq!(nice_step(50.0, 8), 10.0);
        assert_eq!(nice_step(1.0, 6), 0.2);
        assert!(nice_step(0.003, 6) > 0.0);
    }

    #[test]
    fn reference_lines_extend_the_y_range() {
        let svg = line_chart(
            "banded",
            "x",
            "y",
            &sample_series(),
            &[ReferenceLine {
                value: 50.0,
                label: "far above the data".into(),
            }],
        );
        // The reference line must be drawn inside the plot, not clipped out.
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let dashed = doc
            .descendants()
            .filter(|n| n.has_tag_name("line"))
            .filter(|n| n.attribute("stroke-dasharray").is_some())
            .count();
        assert_eq!(dashed, 1);
    }
}
