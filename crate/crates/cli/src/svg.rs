//! Hand-rolled SVG export: no templates, no external assets, deterministic
//! output. Two plots are produced: a spatial view of the plan (effector
//! trajectories, belief particle clouds per horizon, task overlay) and a
//! per-step curve view of variance gain, contact fraction, and variance.

use nalgebra::Vector2;
use push_core::optimizer::Task;
use push_core::receding::PlanLog;

use crate::artifacts::GainsRow;

#[derive(Debug, Clone, Copy)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { width: 720.0, height: 540.0, margin: 48.0 }
    }
}

/// World-to-pixel mapping with uniform scale and a flipped y axis.
struct Frame {
    scale: f64,
    world_center: Vector2<f64>,
    px_center: (f64, f64),
}

impl Frame {
    fn fit(lo: Vector2<f64>, hi: Vector2<f64>, style: &PlotStyle) -> Self {
        let span = hi - lo;
        let inner_w = style.width - 2.0 * style.margin;
        let inner_h = style.height - 2.0 * style.margin;
        let scale = (inner_w / span.x.max(1e-9)).min(inner_h / span.y.max(1e-9));
        Self {
            scale,
            world_center: (lo + hi) * 0.5,
            px_center: (style.width * 0.5, style.height * 0.5),
        }
    }

    fn map(&self, p: &Vector2<f64>) -> (f64, f64) {
        let d = p - self.world_center;
        (self.px_center.0 + d.x * self.scale, self.px_center.1 - d.y * self.scale)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.1}")
}

/// Tick spacing of the form {1, 2, 5} * 10^k giving at most ~6 ticks.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    for m in [1.0, 2.0, 5.0] {
        if m * mag >= raw {
            return m * mag;
        }
    }
    10.0 * mag
}

fn axes(lo: Vector2<f64>, hi: Vector2<f64>, frame: &Frame) -> String {
    let mut s = String::from("<g id=\"axes\" stroke=\"#888\" stroke-width=\"1\" fill=\"none\">\n");
    let (x0, y0) = frame.map(&lo);
    let (x1, y1) = frame.map(&hi);
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
        fmt(x1.min(x0)),
        fmt(y1.min(y0)),
        fmt((x1 - x0).abs()),
        fmt((y1 - y0).abs())
    ));
    let step = nice_step((hi.x - lo.x).max(hi.y - lo.y));
    let mut x = (lo.x / step).ceil() * step;
    while x <= hi.x + 1e-12 {
        let (px, py) = frame.map(&Vector2::new(x, lo.y));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n",
            fmt(px),
            fmt(py),
            fmt(py + 5.0)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" fill=\"#555\" stroke=\"none\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(py + 16.0),
            trim_tick(x)
        ));
        x += step;
    }
    let mut y = (lo.y / step).ceil() * step;
    while y <= hi.y + 1e-12 {
        let (px, py) = frame.map(&Vector2::new(lo.x, y));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n",
            fmt(px),
            fmt(py),
            fmt(px - 5.0)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" fill=\"#555\" stroke=\"none\" text-anchor=\"end\">{}</text>\n",
            fmt(px - 8.0),
            fmt(py + 3.0),
            trim_tick(y)
        ));
        y += step;
    }
    s.push_str("</g>\n");
    s
}

/// Tick label without float noise (0.30000000000000004 -> 0.3).
fn trim_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Cloud color ramp from early (light) to late (dark) horizons.
fn cloud_color(i: usize, n: usize) -> String {
    let t = if n <= 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(158.0, 8.0), lerp(202.0, 81.0), lerp(225.0, 156.0))
}

const TRAJ_COLORS: [&str; 4] = ["#e6550d", "#31a354", "#756bb1", "#636363"];

/// Spatial plan view. An empty log (no commands, no horizons) renders the
/// axes and nothing else.
pub fn export_plan_svg(log: &PlanLog, task: Option<&Task>, style: &PlotStyle) -> String {
    let empty = log.commands.is_empty() && log.horizons.is_empty();

    // Window: everything drawn, padded 10%; fixed fallback for empty logs.
    let mut points: Vec<Vector2<f64>> = Vec::new();
    if !empty {
        points.extend(log.initial_belief.particles.iter().map(|p| p.position));
        for h in &log.horizons {
            points.extend(h.belief_out.particles.iter().map(|p| p.position));
        }
        for c in &log.commands {
            points.extend(c.effectors.iter().map(|e| e.position));
        }
        match task {
            Some(Task::Target { position }) => points.push(*position),
            Some(Task::Path(path)) => {
                points.push(path.center + Vector2::new(path.radius, path.radius));
                points.push(path.center - Vector2::new(path.radius, path.radius));
            }
            None => {}
        }
    }
    let (mut lo, mut hi) = if points.is_empty() {
        (Vector2::new(-0.3, -0.3), Vector2::new(0.3, 0.3))
    } else {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in &points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    };
    let pad = ((hi - lo) * 0.1).add_scalar(0.01);
    lo -= pad;
    hi += pad;
    let frame = Frame::fit(lo, hi, style);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
        style.width, style.height
    );
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        style.width, style.height
    ));
    svg.push_str(&axes(lo, hi, &frame));
    if empty {
        svg.push_str("</svg>\n");
        return svg;
    }

    // Task overlay first so data draws on top of it.
    svg.push_str("<g id=\"overlay\" fill=\"none\">\n");
    match task {
        Some(Task::Target { position }) => {
            let (px, py) = frame.map(position);
            svg.push_str(&format!(
                "<path d=\"M {} {} l 12 0 m -6 -6 l 0 12\" stroke=\"#d62728\" stroke-width=\"2\" transform=\"translate(-6,0)\"/>\n",
                fmt(px),
                fmt(py)
            ));
        }
        Some(Task::Path(path)) => {
            let (cx, cy) = frame.map(&path.center);
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n",
                fmt(cx),
                fmt(cy),
                fmt(path.radius * frame.scale)
            ));
        }
        None => {}
    }
    svg.push_str("</g>\n");

    // Belief clouds: prior in gray, then one color per horizon.
    svg.push_str("<g id=\"clouds\" stroke=\"none\">\n");
    let cloud =
        |b: &push_core::belief::ParticleBelief, color: &str, svg: &mut String| {
            for p in &b.particles {
                let (px, py) = frame.map(&p.position);
                svg.push_str(&format!(
                    "<circle class=\"particle\" cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.5\"/>\n",
                    fmt(px),
                    fmt(py),
                    color
                ));
            }
        };
    cloud(&log.initial_belief, "#bdbdbd", &mut svg);
    let n = log.horizons.len();
    for (i, h) in log.horizons.iter().enumerate() {
        cloud(&h.belief_out, &cloud_color(i, n), &mut svg);
    }
    svg.push_str("</g>\n");

    // One polyline per effector through the commanded positions.
    let n_eff = log.commands.first().map(|c| c.effectors.len()).unwrap_or(0);
    svg.push_str("<g id=\"trajectories\" fill=\"none\" stroke-width=\"1.5\">\n");
    for e in 0..n_eff {
        let pts: Vec<String> = log
            .commands
            .iter()
            .map(|c| {
                let (px, py) = frame.map(&c.effectors[e].position);
                format!("{},{}", fmt(px), fmt(py))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline class=\"trajectory\" points=\"{}\" stroke=\"{}\"/>\n",
            pts.join(" "),
            TRAJ_COLORS[e % TRAJ_COLORS.len()]
        ));
    }
    svg.push_str("</g>\n");

    svg.push_str(&format!(
        "<g id=\"legend\" font-family=\"monospace\" font-size=\"11\" fill=\"#333\">\n\
         <text x=\"{x}\" y=\"20\">particles: {np}</text>\n\
         <text x=\"{x}\" y=\"34\">horizons: {nh}</text>\n\
         <text x=\"{x}\" y=\"48\">steps: {nc}</text>\n\
         </g>\n",
        x = fmt(style.width - style.margin - 110.0),
        np = log.initial_belief.particles.len(),
        nh = log.horizons.len(),
        nc = log.commands.len(),
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Per-step curves: variance gain (left scale, with the gamma = 1 line),
/// belief variance (normalized), and contact fraction.
pub fn export_gains_svg(rows: &[GainsRow], style: &PlotStyle) -> String {
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
        style.width, style.height
    );
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        style.width, style.height
    ));
    let inner_w = style.width - 2.0 * style.margin;
    let inner_h = style.height - 2.0 * style.margin;
    svg.push_str(&format!(
        "<g id=\"axes\" stroke=\"#888\" fill=\"none\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></g>\n",
        fmt(style.margin),
        fmt(style.margin),
        fmt(inner_w),
        fmt(inner_h)
    ));
    if rows.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let gamma_max = rows.iter().map(|r| r.gamma).fold(1.0f64, f64::max) * 1.1;
    let var_max = rows.iter().map(|r| r.variance).fold(f64::MIN_POSITIVE, f64::max) * 1.1;
    let x_of = |i: usize| {
        style.margin + inner_w * (i as f64) / ((rows.len() - 1).max(1) as f64)
    };
    let y_of = |v: f64, v_max: f64| style.margin + inner_h * (1.0 - (v / v_max).clamp(0.0, 1.0));

    let y1 = y_of(1.0, gamma_max);
    svg.push_str(&format!(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#d62728\" stroke-dasharray=\"4 4\"/>\n",
        fmt(style.margin),
        fmt(y1),
        fmt(style.margin + inner_w)
    ));

    let series = |f: &dyn Fn(&GainsRow) -> f64, v_max: f64, color: &str, svg: &mut String| {
        let pts: Vec<String> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{},{}", fmt(x_of(i)), fmt(y_of(f(r), v_max))))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            color
        ));
    };
    series(&|r| r.gamma, gamma_max, "#1f77b4", &mut svg);
    series(&|r| r.variance, var_max, "#2ca02c", &mut svg);
    series(&|r| r.contact_fraction, 1.1, "#ff7f0e", &mut svg);

    svg.push_str(&format!(
        "<g id=\"legend\" font-family=\"monospace\" font-size=\"11\">\n\
         <text x=\"{x}\" y=\"20\" fill=\"#1f77b4\">gamma (max {gmax:.3})</text>\n\
         <text x=\"{x}\" y=\"34\" fill=\"#2ca02c\">variance (max {vmax:.2e})</text>\n\
         <text x=\"{x}\" y=\"48\" fill=\"#ff7f0e\">contact fraction</text>\n\
         </g>\n",
        x = fmt(style.width - style.margin - 170.0),
        gmax = gamma_max / 1.1,
        vmax = var_max / 1.1,
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Closed-loop object trace: the true path (dots joined by a polyline), the
/// target with its tolerance ball, and a start marker.
pub fn export_trace_svg(
    trace: &[Vector2<f64>],
    target: Vector2<f64>,
    tolerance: f64,
    style: &PlotStyle,
) -> String {
    let mut lo = target - Vector2::new(tolerance, tolerance);
    let mut hi = target + Vector2::new(tolerance, tolerance);
    for p in trace {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let pad = ((hi - lo) * 0.1).add_scalar(0.01);
    lo -= pad;
    hi += pad;
    let frame = Frame::fit(lo, hi, style);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
        style.width, style.height
    );
    svg.push_str(&format!(
        "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        style.width, style.height
    ));
    svg.push_str(&axes(lo, hi, &frame));
    let (tx, ty) = frame.map(&target);
    svg.push_str(&format!(
        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n",
        fmt(tx),
        fmt(ty),
        fmt(tolerance * frame.scale)
    ));
    if !trace.is_empty() {
        let pts: Vec<String> = trace
            .iter()
            .map(|p| {
                let (px, py) = frame.map(p);
                format!("{},{}", fmt(px), fmt(py))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline id=\"object-trace\" points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        let (sx, sy) = frame.map(&trace[0]);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#1f77b4\"/>\n",
            fmt(sx),
            fmt(sy)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
