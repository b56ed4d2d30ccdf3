//! Minimal SVG line plots: voltage against time above, the displacement /
//! voltage loop below with ground truth dashed red and prediction solid black.

use std::fmt::Write;

pub const WIDTH: f64 = 480.0;
pub const HEIGHT: f64 = 640.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const TITLE_BAND: f64 = 32.0;
const PANEL_GAP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 40.0;

pub struct PlotSeries<'a> {
    pub t: &'a [f64],
    pub v: &'a [f64],
    pub d_true: &'a [f64],
    pub d_pred: &'a [f64],
}

/// Affine map from a data range onto a pixel range.
#[derive(Clone, Copy, Debug)]
pub struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    /// Range covering `values` with 5% padding; degenerate ranges widen to
    /// +-1 around their value.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 0.0);
        }
        let span = hi - lo;
        if span <= 1e-12 * lo.abs().max(1.0) {
            (lo, hi) = (lo - 1.0, hi + 1.0);
        } else {
            (lo, hi) = (lo - 0.05 * span, hi + 0.05 * span);
        }
        Self { lo, hi, px_lo, px_hi }
    }

    pub fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

struct Panel {
    x: Axis,
    y: Axis,
    top: f64,
    bottom: f64,
}

fn polyline(out: &mut String, panel: &Panel, xs: &[f64], ys: &[f64], style: &str) {
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(pts, "{:.2},{:.2} ", panel.x.map(*x), panel.y.map(*y));
        }
    }
    let _ = writeln!(
        out,
        r#"<polyline fill="none" {style} points="{}"/>"#,
        pts.trim_end()
    );
}

fn frame(out: &mut String, panel: &Panel, xlabel: &str, ylabel: &str) {
    let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let _ = writeln!(
        out,
        r##"<rect x="{l:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444" stroke-width="1"/>"##,
        panel.top,
        r - l,
        panel.bottom - panel.top
    );
    let text = |out: &mut String, x: f64, y: f64, anchor: &str, s: &str| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{s}</text>"#
        );
    };
    text(out, l, panel.bottom + 14.0, "start", &format!("{:.3}", panel.x.lo));
    text(out, r, panel.bottom + 14.0, "end", &format!("{:.3}", panel.x.hi));
    text(out, (l + r) / 2.0, panel.bottom + 28.0, "middle", xlabel);
    text(out, l - 4.0, panel.bottom, "end", &format!("{:.3}", panel.y.lo));
    text(out, l - 4.0, panel.top + 10.0, "end", &format!("{:.3}", panel.y.hi));
    text(out, l - 4.0, (panel.top + panel.bottom) / 2.0, "end", ylabel);
}

/// Render the two-panel figure. Output depends only on the inputs.
pub fn loop_plot(title: &str, series: &[PlotSeries]) -> String {
    let (l, r) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let panel_h = (HEIGHT - TITLE_BAND - PANEL_GAP - MARGIN_BOTTOM) / 2.0;
    let top_panel = (TITLE_BAND, TITLE_BAND + panel_h);
    let bottom_panel = (top_panel.1 + PANEL_GAP, top_panel.1 + PANEL_GAP + panel_h);

    let all_t = series.iter().flat_map(|s| s.t.iter());
    let all_v = || series.iter().flat_map(|s| s.v.iter());
    let all_d = series.iter().flat_map(|s| s.d_true.iter().chain(s.d_pred.iter()));
    let upper = Panel {
        x: Axis::fit(all_t, l, r),
        y: Axis::fit(all_v(), top_panel.1, top_panel.0),
        top: top_panel.0,
        bottom: top_panel.1,
    };
    let lower = Panel {
        x: Axis::fit(all_v(), l, r),
        y: Axis::fit(all_d, bottom_panel.1, bottom_panel.0),
        top: bottom_panel.0,
        bottom: bottom_panel.1,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    frame(&mut out, &upper, "t", "v");
    frame(&mut out, &lower, "v", "d");
    for s in series {
        polyline(&mut out, &upper, s.t, s.v, r##"stroke="#1f5fbf" stroke-width="1.5""##);
    }
    for s in series {
        polyline(
            &mut out,
            &lower,
            s.v,
            s.d_true,
            r##"stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4""##,
        );
        polyline(&mut out, &lower, s.v, s.d_pred, r##"stroke="black" stroke-width="1.2""##);
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
