//! Minimal deterministic SVG writer for log-log study plots.
//!
//! No plotting crate: the output must be byte-stable across runs and
//! builds, so everything is formatted with fixed precision from plain
//! f64 arithmetic. Only strictly positive points can appear on log axes;
//! others are skipped.

/// A labeled polyline.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders series on log-log axes with decade ticks and a legend.
pub fn loglog_plot(series: &[Series], x_label: &str, y_label: &str) -> String {
    let mut logs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for s in series {
        logs.push(
            s.points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0)
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect(),
        );
    }

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let flat: Vec<(f64, f64)> = logs.iter().flatten().copied().collect();
    if flat.is_empty() {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no positive data</text>\n</svg>\n",
            fmt(WIDTH / 2.0),
            fmt(HEIGHT / 2.0)
        ));
        return out;
    }

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &flat {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    // Degenerate ranges still need a visible span.
    if x_max - x_min < 1e-9 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad_x = 0.03 * (x_max - x_min);
    let pad_y = 0.06 * (y_max - y_min);
    x_min -= pad_x;
    x_max += pad_x;
    y_min -= pad_y;
    y_max += pad_y;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |lx: f64| MARGIN_LEFT + (lx - x_min) / (x_max - x_min) * plot_w;
    let sy = |ly: f64| MARGIN_TOP + (y_max - ly) / (y_max - y_min) * plot_h;

    // Frame.
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(plot_w),
        fmt(plot_h)
    ));

    // Decade ticks: one per integer exponent inside the range.
    let mut e = x_min.ceil() as i64;
    while (e as f64) <= x_max {
        let px = sx(e as f64);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#cccccc\"/>\n",
            x = fmt(px),
            y1 = fmt(MARGIN_TOP),
            y2 = fmt(MARGIN_TOP + plot_h)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">1e{}</text>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h + 18.0),
            e
        ));
        e += 1;
    }
    let mut e = y_min.ceil() as i64;
    while (e as f64) <= y_max {
        let py = sy(e as f64);
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#cccccc\"/>\n",
            y = fmt(py),
            x1 = fmt(MARGIN_LEFT),
            x2 = fmt(MARGIN_LEFT + plot_w)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{}</text>\n",
            fmt(MARGIN_LEFT - 6.0),
            fmt(py + 4.0),
            e
        ));
        e += 1;
    }

    // Axis labels.
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 14.0),
        x_label
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        y_label
    ));

    // Series polylines and markers.
    for (si, pts) in logs.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|(lx, ly)| format!("{},{}", fmt(sx(*lx)), fmt(sy(*ly))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            coords.join(" "),
            color
        ));
        for (lx, ly) in pts {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n",
                fmt(sx(*lx)),
                fmt(sy(*ly)),
                color
            ));
        }
    }

    // Legend, top-right inside the frame.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let ly = MARGIN_TOP + 16.0 + 16.0 * si as f64;
        let lx = MARGIN_LEFT + plot_w - 130.0;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            fmt(lx),
            fmt(ly - 4.0),
            fmt(lx + 22.0),
            fmt(ly - 4.0),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(lx + 28.0),
            fmt(ly),
            s.label
        ));
    }

    out.push_str("</svg>\n");
    out
}
