//! Minimal deterministic SVG line plots.
//!
//! Output is a pure function of the input data: coordinates are rounded
//! to two decimals, palettes and layout are fixed, and nothing depends on
//! locale, time, or thread count. Good enough for the four figures this
//! tool produces; not a general plotting library.

use std::fmt::Write as _;

/// Fixed series palette.
pub const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

/// Muted grey for reference curves and null paths.
pub const GREY: &str = "#999999";

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub dashed: bool,
    pub markers: bool,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    /// Data ranges; None derives them from the series with 5% padding.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

const MARGIN_LEFT: f64 = 58.0;
const MARGIN_RIGHT: f64 = 14.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 46.0;
const FONT: &str = "font-family=\"Helvetica,Arial,sans-serif\"";

/// Render panels side by side into one standalone SVG document.
pub fn render(panels: &[Panel], panel_w: f64, panel_h: f64) -> String {
    let width = panels.len() as f64 * panel_w;
    let height = panel_h;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" \
         height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n\
         <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>\n"
    );
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut out, panel, i as f64 * panel_w, panel_w, panel_h);
    }
    out.push_str("</svg>\n");
    out
}

fn render_panel(out: &mut String, panel: &Panel, x0: f64, w: f64, h: f64) {
    let plot_x = x0 + MARGIN_LEFT;
    let plot_y = MARGIN_TOP;
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;

    // Transform data into axis space (log10 where requested).
    let tx = |v: f64| if panel.log_x { v.log10() } else { v };
    let ty = |v: f64| if panel.log_y { v.log10() } else { v };
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in &panel.series {
        for &(x, y) in &s.points {
            if usable(x, panel.log_x) && usable(y, panel.log_y) {
                xs.push(tx(x));
                ys.push(ty(y));
            }
        }
    }
    let (x_lo, x_hi) = axis_range(panel.x_range.map(|(a, b)| (tx(a), tx(b))), &xs);
    let (y_lo, y_hi) = axis_range(panel.y_range.map(|(a, b)| (ty(a), ty(b))), &ys);

    let sx = move |v: f64| plot_x + (tx(v) - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |v: f64| plot_y + plot_h - (ty(v) - y_lo) / (y_hi - y_lo) * plot_h;

    // Frame and title.
    let _ = write!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
        plot_x, plot_y, plot_w, plot_h
    );
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        plot_x + plot_w / 2.0,
        plot_y - 10.0,
        escape(&panel.title)
    );

    // Ticks with light grid lines.
    for t in ticks(x_lo, x_hi, panel.log_x) {
        let px = plot_x + (t - x_lo) / (x_hi - x_lo) * plot_w;
        let _ = write!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"0.7\"/>\n",
            plot_y,
            plot_y + plot_h
        );
        let label = tick_label(t, panel.log_x);
        let _ = write!(
            out,
            "<text x=\"{px:.2}\" y=\"{:.2}\" {FONT} font-size=\"10\" \
             text-anchor=\"middle\">{label}</text>\n",
            plot_y + plot_h + 14.0
        );
    }
    for t in ticks(y_lo, y_hi, panel.log_y) {
        let py = plot_y + plot_h - (t - y_lo) / (y_hi - y_lo) * plot_h;
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"0.7\"/>\n",
            plot_x,
            plot_x + plot_w
        );
        let label = tick_label(t, panel.log_y);
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"10\" \
             text-anchor=\"end\">{label}</text>\n",
            plot_x - 5.0,
            py + 3.5
        );
    }

    // Axis labels.
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"11\" \
         text-anchor=\"middle\">{}</text>\n",
        plot_x + plot_w / 2.0,
        plot_y + plot_h + 32.0,
        escape(&panel.x_label)
    );
    let _ = write!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"11\" \
         text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">{}</text>\n",
        x0 + 14.0,
        plot_y + plot_h / 2.0,
        x0 + 14.0,
        plot_y + plot_h / 2.0,
        escape(&panel.y_label)
    );

    // Series, clipped to the frame.
    let clip_id = format!("clip{:.0}", x0);
    let _ = write!(
        out,
        "<clipPath id=\"{clip_id}\"><rect x=\"{:.2}\" y=\"{:.2}\" \
         width=\"{:.2}\" height=\"{:.2}\"/></clipPath>\n",
        plot_x, plot_y, plot_w, plot_h
    );
    let _ = write!(out, "<g clip-path=\"url(#{clip_id})\">\n");
    for s in &panel.series {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|&&(x, y)| usable(x, panel.log_x) && usable(y, panel.log_y))
            .map(|&(x, y)| (sx(x), sy(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        if pts.len() > 1 {
            let path: Vec<String> =
                pts.iter().map(|&(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = write!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" \
                 stroke-width=\"1.6\"{dash}/>\n",
                path.join(" "),
                s.color
            );
        }
        if s.markers {
            for &(x, y) in &pts {
                let _ = write!(
                    out,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.6\" fill=\"{}\"/>\n",
                    s.color
                );
            }
        }
    }
    out.push_str("</g>\n");

    // Legend, top-left inside the frame, labelled series only.
    let mut row = 0;
    for s in panel.series.iter().filter(|s| !s.label.is_empty()) {
        let ly = plot_y + 14.0 + row as f64 * 14.0;
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = write!(
            out,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{}\" stroke-width=\"1.6\"{dash}/>\n",
            plot_x + 8.0,
            plot_x + 26.0,
            s.color
        );
        let _ = write!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} font-size=\"10\">{}</text>\n",
            plot_x + 30.0,
            ly + 3.5,
            escape(&s.label)
        );
        row += 1;
    }
}

/// Range in transformed axis units, padded 5% when derived from data.
fn axis_range(given: Option<(f64, f64)>, values: &[f64]) -> (f64, f64) {
    if let Some((lo, hi)) = given {
        if hi > lo {
            return (lo, hi);
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Tick positions in transformed axis units.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        // Decades, refined with 2x and 5x when fewer than two fit.
        let mut t: Vec<f64> = (lo.ceil() as i64..=hi.floor() as i64)
            .map(|d| d as f64)
            .collect();
        if t.len() < 2 {
            let lg2 = 2f64.log10();
            let lg5 = 5f64.log10();
            let mut fine = Vec::new();
            for d in (lo.floor() as i64 - 1)..=(hi.ceil() as i64) {
                for frac in [0.0, lg2, lg5] {
                    let v = d as f64 + frac;
                    if v >= lo - 1e-9 && v <= hi + 1e-9 {
                        fine.push(v);
                    }
                }
            }
            t = fine;
        }
        t
    } else {
        nice_ticks(lo, hi, 5)
    }
}

/// Classic 1-2-5 tick selection.
fn nice_ticks(lo: f64, hi: f64, want: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / want as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm <= 1.0 {
        mag
    } else if norm <= 2.0 {
        2.0 * mag
    } else if norm <= 5.0 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut t = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + 1e-9 * step {
        // Snap near-zero ticks produced by rounding.
        t.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    t
}

/// Human label for a tick in transformed units.
fn tick_label(t: f64, log: bool) -> String {
    let v = if log { 10f64.powf(t) } else { t };
    if log {
        // Show clean powers as plain numbers, others in short form.
        if (t - t.round()).abs() < 1e-9 && (-4.0..=6.0).contains(&t) {
            return trim_num(10f64.powi(t.round() as i32));
        }
    }
    trim_num(v)
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(0.001..1e6).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
