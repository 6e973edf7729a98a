//! Minimal SVG renderer for output-uncertainty band plots.
//!
//! One plot per method and country: the bootstrap mean of the calibrated
//! crisis probability with its confidence tube, the mean optimized threshold
//! with its tube, shaded vulnerable quarters, and hollow markers on quarters
//! where the probability is not significantly separated from the threshold.

use std::fmt::Write;

use ews_core::uncertainty::OutputBand;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 300.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

struct Axes {
    n: usize,
}

impl Axes {
    fn x(&self, i: usize) -> f64 {
        let span = WIDTH - MARGIN_L - MARGIN_R;
        let step = if self.n > 1 { span / (self.n - 1) as f64 } else { 0.0 };
        MARGIN_L + step * i as f64
    }

    fn y(&self, v: f64) -> f64 {
        let span = HEIGHT - MARGIN_T - MARGIN_B;
        HEIGHT - MARGIN_B - v.clamp(0.0, 1.0) * span
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn polyline(axes: &Axes, points: &[(usize, f64)]) -> String {
    points
        .iter()
        .map(|(i, v)| format!("{},{}", fmt(axes.x(*i)), fmt(axes.y(*v))))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Closed polygon tracing the upper bound left to right, then the lower
/// bound right to left.
fn tube(axes: &Axes, points: &[(usize, f64, f64)]) -> String {
    let mut coords = Vec::with_capacity(points.len() * 2);
    for (i, _, hi) in points {
        coords.push(format!("{},{}", fmt(axes.x(*i)), fmt(axes.y(*hi))));
    }
    for (i, lo, _) in points.iter().rev() {
        coords.push(format!("{},{}", fmt(axes.x(*i)), fmt(axes.y(*lo))));
    }
    coords.join(" ")
}

/// Renders the band plot for one method and one country. `bands` holds the
/// country's targets in quarter order; gaps (quarters without bootstrap
/// coverage) break the drawn lines.
pub fn band_plot(method: &str, country: &str, bands: &[Option<&OutputBand>]) -> String {
    let axes = Axes { n: bands.len().max(2) };
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"18\" font-family=\"monospace\" font-size=\"13\">{} / {}</text>\n",
        fmt(MARGIN_L),
        xml_escape(method),
        xml_escape(country)
    );

    // Shade vulnerable quarters.
    for (i, band) in bands.iter().enumerate() {
        let Some(b) = band else { continue };
        if b.label {
            let half = if axes.n > 1 {
                (WIDTH - MARGIN_L - MARGIN_R) / (axes.n - 1) as f64 / 2.0
            } else {
                4.0
            };
            let _ = write!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#f3e3c3\"/>\n",
                fmt(axes.x(i) - half),
                fmt(MARGIN_T),
                fmt(half * 2.0),
                fmt(HEIGHT - MARGIN_T - MARGIN_B)
            );
        }
    }

    // Axis frame and gridlines.
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = axes.y(tick);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            fmt(MARGIN_L),
            fmt(y),
            fmt(WIDTH - MARGIN_R),
            fmt(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 6.0),
            fmt(y + 3.0),
            fmt(tick)
        );
    }

    // Quarter labels on a sparse grid.
    let label_step = (bands.len() / 8).max(1);
    for (i, band) in bands.iter().enumerate() {
        if i % label_step != 0 {
            continue;
        }
        let Some(b) = band else { continue };
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" \
             text-anchor=\"middle\">{}</text>\n",
            fmt(axes.x(i)),
            fmt(HEIGHT - MARGIN_B + 16.0),
            b.quarter
        );
    }

    // Contiguous segments of covered quarters.
    let mut segments: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (i, band) in bands.iter().enumerate() {
        if band.is_some() {
            current.push(i);
        } else if !current.is_empty() {
            segments.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }

    for seg in &segments {
        let tau_tube: Vec<(usize, f64, f64)> = seg
            .iter()
            .map(|&i| {
                let b = bands[i].unwrap();
                (i, b.threshold.ci_lo, b.threshold.ci_hi)
            })
            .collect();
        let prob_tube: Vec<(usize, f64, f64)> = seg
            .iter()
            .map(|&i| {
                let b = bands[i].unwrap();
                (i, b.prob.ci_lo, b.prob.ci_hi)
            })
            .collect();
        let tau_line: Vec<(usize, f64)> = seg
            .iter()
            .map(|&i| (i, bands[i].unwrap().threshold.mean))
            .collect();
        let prob_line: Vec<(usize, f64)> = seg
            .iter()
            .map(|&i| (i, bands[i].unwrap().prob.mean))
            .collect();

        let _ = write!(
            svg,
            "<polygon points=\"{}\" fill=\"#f5b7b1\" fill-opacity=\"0.6\"/>\n",
            tube(&axes, &tau_tube)
        );
        let _ = write!(
            svg,
            "<polygon points=\"{}\" fill=\"#aed6f1\" fill-opacity=\"0.6\"/>\n",
            tube(&axes, &prob_tube)
        );
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" \
             stroke-dasharray=\"5,3\"/>\n",
            polyline(&axes, &tau_line)
        );
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#21618c\" stroke-width=\"1.5\"/>\n",
            polyline(&axes, &prob_line)
        );
    }

    // Hollow markers where probability and threshold are not separated.
    for (i, band) in bands.iter().enumerate() {
        let Some(b) = band else { continue };
        if !b.flag.is_significant() {
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"none\" stroke=\"#616a6b\"/>\n",
                fmt(axes.x(i)),
                fmt(axes.y(b.prob.mean))
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
