//! Hand-rolled SVG plots with deterministic bytes.
//!
//! The renderer uses a fixed 800x500 viewBox, rounds every coordinate to
//! three decimals with '.' as the separator, and draws elements in a fixed
//! order, so the same input always produces the same file on any platform.

use adjsurv::{AdjustedSurv, EffectEstimate};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 640.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 445.0;

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#2e933c", "#8d6a9f", "#c77b1e", "#3aa6a6", "#7f3b08", "#5558aa",
];

pub struct PlotStyle {
    pub cif: bool,
    pub censor_ticks: bool,
    pub median_lines: bool,
    pub title: Option<String>,
}

struct Scale {
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Scale {
    fn x(&self, t: f64) -> f64 {
        PLOT_LEFT + (t / self.xmax) * (PLOT_RIGHT - PLOT_LEFT)
    }

    fn y(&self, v: f64) -> f64 {
        PLOT_BOTTOM - (v - self.ymin) / (self.ymax - self.ymin) * (PLOT_BOTTOM - PLOT_TOP)
    }
}

fn c(v: f64) -> String {
    format!("{v:.3}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Step polyline through (0, init) and every jump, extended to the right edge.
fn step_points(grid: &[f64], values: &[f64], init: f64, xmax: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(0.0, init)];
    let mut prev = init;
    for (&t, &v) in grid.iter().zip(values) {
        if t > 0.0 {
            pts.push((t, prev));
        }
        pts.push((t, v));
        prev = v;
    }
    if pts.last().map(|p| p.0 < xmax).unwrap_or(true) {
        pts.push((xmax, prev));
    }
    pts
}

fn path_data(pts: &[(f64, f64)], sc: &Scale) -> String {
    let mut d = String::new();
    for (i, (t, v)) in pts.iter().enumerate() {
        d.push_str(if i == 0 { "M" } else { " L" });
        d.push(' ');
        d.push_str(&c(sc.x(*t)));
        d.push(' ');
        d.push_str(&c(sc.y(*v)));
    }
    d
}

/// Closed region between an upper and a lower step curve.
fn ribbon_data(upper: &[(f64, f64)], lower: &[(f64, f64)], sc: &Scale) -> String {
    let mut d = path_data(upper, sc);
    for (t, v) in lower.iter().rev() {
        d.push_str(" L ");
        d.push_str(&c(sc.x(*t)));
        d.push(' ');
        d.push_str(&c(sc.y(*v)));
    }
    d.push_str(" Z");
    d
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0] {
        if raw <= m * mag * (1.0 + 1e-12) {
            return m * mag;
        }
    }
    10.0 * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    format!("{v:.decimals$}")
}

fn header(out: &mut String) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>\n",
        c(x1),
        c(y1),
        c(x2),
        c(y2)
    ));
}

fn text(out: &mut String, x: f64, y: f64, attrs: &str, body: &str) {
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" {attrs}>{}</text>\n",
        c(x),
        c(y),
        esc(body)
    ));
}

fn frame_and_x_axis(out: &mut String, sc: &Scale, x_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n",
        c(PLOT_LEFT),
        c(PLOT_TOP),
        c(PLOT_RIGHT - PLOT_LEFT),
        c(PLOT_BOTTOM - PLOT_TOP)
    ));
    let step = nice_step(sc.xmax);
    let mut t = 0.0;
    while t <= sc.xmax * (1.0 + 1e-9) {
        let x = sc.x(t);
        line(out, x, PLOT_BOTTOM, x, PLOT_BOTTOM + 5.0, "stroke=\"#444444\" stroke-width=\"1\"");
        text(
            out,
            x,
            PLOT_BOTTOM + 20.0,
            "font-size=\"12\" fill=\"#333333\" text-anchor=\"middle\"",
            &tick_label(t, step),
        );
        t += step;
    }
    text(
        out,
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        PLOT_BOTTOM + 42.0,
        "font-size=\"14\" fill=\"#333333\" text-anchor=\"middle\"",
        x_label,
    );
}

fn y_axis(out: &mut String, sc: &Scale, ticks: &[f64], label: &str) {
    for &v in ticks {
        let y = sc.y(v);
        line(out, PLOT_LEFT - 5.0, y, PLOT_LEFT, y, "stroke=\"#444444\" stroke-width=\"1\"");
        line(
            out,
            PLOT_LEFT,
            y,
            PLOT_RIGHT,
            y,
            "stroke=\"#dddddd\" stroke-width=\"1\"",
        );
        text(
            out,
            PLOT_LEFT - 9.0,
            y + 4.0,
            "font-size=\"12\" fill=\"#333333\" text-anchor=\"end\"",
            &format!("{v:.2}"),
        );
    }
    let cy = (PLOT_TOP + PLOT_BOTTOM) / 2.0;
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"14\" fill=\"#333333\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        c(cy),
        c(cy),
        esc(label)
    ));
}

fn title(out: &mut String, style: &PlotStyle) {
    if let Some(t) = &style.title {
        text(
            out,
            (PLOT_LEFT + PLOT_RIGHT) / 2.0,
            24.0,
            "font-size=\"16\" fill=\"#111111\" text-anchor=\"middle\"",
            t,
        );
    }
}

pub fn curves_svg(adj: &AdjustedSurv, style: &PlotStyle) -> String {
    let mut xmax = adj.eval_times.last().copied().unwrap_or(0.0);
    for curve in &adj.curves {
        xmax = xmax.max(curve.max_time);
        for &tc in &curve.censor_times {
            xmax = xmax.max(tc);
        }
    }
    if !(xmax > 0.0) {
        xmax = 1.0;
    }
    let sc = Scale { xmax, ymin: 0.0, ymax: 1.0 };
    let show = |v: f64| if style.cif { 1.0 - v } else { v };
    let init = show(1.0);

    let mut out = String::new();
    header(&mut out);
    y_axis(
        &mut out,
        &sc,
        &[0.0, 0.25, 0.5, 0.75, 1.0],
        if style.cif { "cumulative incidence" } else { "survival probability" },
    );
    frame_and_x_axis(&mut out, &sc, "time");

    for (i, curve) in adj.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let (Some(lo), Some(hi)) = (&curve.ci_lower, &curve.ci_upper) {
            let lo_show: Vec<f64> = lo.iter().map(|&v| show(v)).collect();
            let hi_show: Vec<f64> = hi.iter().map(|&v| show(v)).collect();
            let upper = step_points(&adj.eval_times, &hi_show, init, xmax);
            let lower = step_points(&adj.eval_times, &lo_show, init, xmax);
            out.push_str(&format!(
                "<path d=\"{}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
                ribbon_data(&upper, &lower, &sc)
            ));
        }
        let values: Vec<f64> = curve.curve.values.iter().map(|&v| show(v)).collect();
        let pts = step_points(&adj.eval_times, &values, init, xmax);
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            path_data(&pts, &sc)
        ));
        if style.censor_ticks {
            for &tc in &curve.censor_times {
                let x = sc.x(tc);
                let y = sc.y(show(curve.curve.eval(tc)));
                line(&mut out, x, y - 4.0, x, y + 4.0, &format!("stroke=\"{color}\" stroke-width=\"1.2\""));
            }
        }
    }

    if style.median_lines {
        // Median guides: horizontal reference at probability one half, then a
        // drop line at each curve's first crossing.
        let mut crossings = Vec::new();
        for curve in &adj.curves {
            if let Some(j) = curve.curve.values.iter().position(|&v| v <= 0.5) {
                crossings.push(curve.curve.times[j]);
            }
        }
        let dash = "stroke=\"#666666\" stroke-width=\"1\" stroke-dasharray=\"4 3\"";
        let y_half = sc.y(0.5);
        let reach = crossings.iter().cloned().fold(0.0f64, f64::max);
        if !crossings.is_empty() {
            line(&mut out, PLOT_LEFT, y_half, sc.x(reach), y_half, dash);
            for t in crossings {
                line(&mut out, sc.x(t), y_half, sc.x(t), PLOT_BOTTOM, dash);
            }
        }
    }

    let lx = PLOT_RIGHT + 14.0;
    for (i, curve) in adj.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = PLOT_TOP + 12.0 + 22.0 * i as f64;
        line(&mut out, lx, ly, lx + 22.0, ly, &format!("stroke=\"{color}\" stroke-width=\"2\""));
        text(
            &mut out,
            lx + 28.0,
            ly + 4.0,
            "font-size=\"13\" fill=\"#333333\"",
            &curve.group,
        );
    }

    title(&mut out, style);
    out.push_str("</svg>\n");
    out
}

pub fn diff_svg(effects: &[EffectEstimate], style: &PlotStyle) -> String {
    let mut pts: Vec<(f64, f64, Option<f64>, Option<f64>)> = effects
        .iter()
        .filter_map(|e| e.estimate.map(|v| (e.at, v, e.ci_lower, e.ci_upper)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut m = 0.1f64;
    for (_, v, lo, hi) in &pts {
        m = m.max(v.abs());
        if let Some(l) = lo {
            m = m.max(l.abs());
        }
        if let Some(h) = hi {
            m = m.max(h.abs());
        }
    }
    let m = ((m * 10.0).ceil() / 10.0).min(1.0);
    let xmax = pts.last().map(|p| p.0).filter(|&t| t > 0.0).unwrap_or(1.0);
    let sc = Scale { xmax, ymin: -m, ymax: m };

    let grid: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let values: Vec<f64> = pts.iter().map(|p| p.1).collect();

    let mut out = String::new();
    header(&mut out);
    y_axis(
        &mut out,
        &sc,
        &[-m, -m / 2.0, 0.0, m / 2.0, m],
        "survival difference",
    );
    frame_and_x_axis(&mut out, &sc, "time");
    line(
        &mut out,
        PLOT_LEFT,
        sc.y(0.0),
        PLOT_RIGHT,
        sc.y(0.0),
        "stroke=\"#999999\" stroke-width=\"1\"",
    );

    if pts.iter().all(|p| p.2.is_some() && p.3.is_some()) && !pts.is_empty() {
        let lo: Vec<f64> = pts.iter().map(|p| p.2.unwrap()).collect();
        let hi: Vec<f64> = pts.iter().map(|p| p.3.unwrap()).collect();
        let upper = step_points(&grid, &hi, 0.0, xmax);
        let lower = step_points(&grid, &lo, 0.0, xmax);
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
            ribbon_data(&upper, &lower, &sc),
            PALETTE[0]
        ));
    }
    let curve = step_points(&grid, &values, 0.0, xmax);
    out.push_str(&format!(
        "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
        path_data(&curve, &sc),
        PALETTE[0]
    ));

    title(&mut out, style);
    out.push_str("</svg>\n");
    out
}
