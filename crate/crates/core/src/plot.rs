//! Static SVG figures. Plots are convenience artifacts; the CSV output is
//! the source of truth.

use std::fmt::Write as _;

use crate::fmt::sig;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Viridis-like ramp sampled at five stops.
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Labels shared by every plot kind.
#[derive(Debug, Clone)]
pub struct Labels<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
    pub params_hash: &'a str,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn open(labels: &Labels) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        esc(labels.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w() / 2.0,
        HEIGHT - 28.0,
        esc(labels.x)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(22 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h() / 2.0,
        esc(labels.y)
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="end" font-size="10" fill="#555">params {}</text>"##,
        WIDTH - 8.0,
        HEIGHT - 8.0,
        esc(labels.params_hash)
    );
    s
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn frame(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        plot_w(),
        plot_h()
    );
}

fn y_axis(s: &mut String, lo: f64, hi: f64, right: bool) {
    let x = if right { LEFT + plot_w() } else { LEFT };
    let (dx, anchor) = if right { (6.0, "start") } else { (-6.0, "end") };
    for t in ticks(lo, hi) {
        let y = TOP + plot_h() * (1.0 - (t - lo) / (hi - lo));
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            x - dx / 2.0,
            x + dx,
            y + 4.0,
            sig(t, 6)
        );
    }
}

/// Colour map of `values[i * xs.len() + j]` at `(xs[j], ys[i])`; absent
/// cells are drawn grey.
pub fn heatmap(labels: &Labels, value_label: &str, xs: &[f64], ys: &[f64], values: &[Option<f64>]) -> String {
    let mut s = open(labels);
    let (lo, hi) = extent(values.iter().flatten().copied()).unwrap_or((0.0, 1.0));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (cw, ch) = (plot_w() / xs.len().max(1) as f64, plot_h() / ys.len().max(1) as f64);
    for (i, _) in ys.iter().enumerate() {
        for (j, _) in xs.iter().enumerate() {
            let fill = match values.get(i * xs.len() + j).copied().flatten() {
                Some(v) if v.is_finite() => ramp((v - lo) / span),
                _ => "#bbbbbb".to_string(),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                LEFT + j as f64 * cw,
                TOP + plot_h() - (i + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    frame(&mut s);
    // Label at most ~8 categories per axis.
    let every = |n: usize| n.div_ceil(8).max(1);
    for (j, x) in xs.iter().enumerate().step_by(every(xs.len())) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + (j as f64 + 0.5) * cw,
            TOP + plot_h() + 18.0,
            sig(*x, 6)
        );
    }
    for (i, y) in ys.iter().enumerate().step_by(every(ys.len())) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + plot_h() - (i as f64 + 0.5) * ch + 4.0,
            sig(*y, 6)
        );
    }
    // Colour bar.
    let bx = LEFT + plot_w() + 20.0;
    let steps = 32;
    for k in 0..steps {
        let h = plot_h() / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            TOP + plot_h() - (k + 1) as f64 * h,
            h + 0.05,
            ramp(k as f64 / (steps - 1) as f64)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">{}</text><text x="{}" y="{}">{}</text><text x="{bx}" y="{}" font-size="11">{}</text>"#,
        bx + 20.0,
        TOP + 10.0,
        sig(hi, 4),
        bx + 20.0,
        TOP + plot_h(),
        sig(lo, 4),
        TOP - 8.0,
        esc(value_label)
    );
    close(s)
}

/// Grouped bars on the left axis with one ratio curve per group on the
/// right axis. `bars[g][k]` is bar `k` in group `g`; `ratio[g][k]` is the
/// curve value drawn above that bar (absent entries are skipped).
pub struct BarChart<'a> {
    pub groups: &'a [String],
    pub series: &'a [String],
    pub bars: &'a [Vec<Option<f64>>],
    pub ratio: &'a [Vec<Option<f64>>],
    pub ratio_label: &'a str,
}

pub fn grouped_bars(labels: &Labels, chart: &BarChart) -> String {
    let mut s = open(labels);
    let hi = extent(chart.bars.iter().flatten().flatten().copied())
        .map(|(_, h)| h.max(0.0))
        .filter(|h| *h > 0.0)
        .unwrap_or(1.0);
    let r_hi = extent(chart.ratio.iter().flatten().flatten().copied())
        .map(|(_, h)| h.max(100.0))
        .unwrap_or(100.0);
    let gw = plot_w() / chart.groups.len().max(1) as f64;
    let nb = chart.series.len().max(1) as f64;
    let bw = gw * 0.8 / nb;
    for (g, name) in chart.groups.iter().enumerate() {
        let gx = LEFT + g as f64 * gw + gw * 0.1;
        let mut curve = Vec::new();
        for (k, v) in chart.bars[g].iter().enumerate() {
            let cx = gx + (k as f64 + 0.5) * bw;
            if let Some(v) = v.filter(|v| v.is_finite()) {
                let h = plot_h() * v.max(0.0) / hi;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"/>"#,
                    gx + k as f64 * bw,
                    TOP + plot_h() - h,
                    bw * 0.9,
                    PALETTE[k % PALETTE.len()]
                );
            }
            if let Some(r) = chart.ratio[g].get(k).copied().flatten() {
                curve.push(format!("{cx:.2},{:.2}", TOP + plot_h() * (1.0 - r / r_hi)));
            }
        }
        if !curve.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                curve.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + (g as f64 + 0.5) * gw,
            TOP + plot_h() + 18.0,
            esc(name)
        );
    }
    frame(&mut s);
    y_axis(&mut s, 0.0, hi, false);
    y_axis(&mut s, 0.0, r_hi, true);
    let _ = writeln!(
        s,
        r#"<text transform="translate({} {}) rotate(90)" text-anchor="middle">{}</text>"#,
        WIDTH - 30.0,
        TOP + plot_h() / 2.0,
        esc(chart.ratio_label)
    );
    legend(&mut s, chart.series);
    close(s)
}

fn legend(s: &mut String, names: &[String]) {
    for (k, name) in names.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            LEFT + 8.0,
            y - 9.0,
            PALETTE[k % PALETTE.len()],
            LEFT + 22.0,
            y,
            esc(name)
        );
    }
}

/// One polyline per series; non-finite points break nothing, they are skipped.
pub fn line_plot(labels: &Labels, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = open(labels);
    let pts = || {
        series
            .iter()
            .flat_map(|(_, p)| p.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    };
    let (xlo, xhi) = extent(pts().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let (ylo, yhi) = extent(pts().map(|p| p.1)).unwrap_or((0.0, 1.0));
    let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let (xlo, xhi) = pad(xlo, xhi);
    let (ylo, yhi) = pad(ylo - 0.05 * (yhi - ylo), yhi + 0.05 * (yhi - ylo));
    let px = |x: f64| LEFT + plot_w() * (x - xlo) / (xhi - xlo);
    let py = |y: f64| TOP + plot_h() * (1.0 - (y - ylo) / (yhi - ylo));
    for (k, (_, points)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (x, y) = c.split_once(',').expect("formatted pair");
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{colour}"/>"#);
        }
    }
    frame(&mut s);
    y_axis(&mut s, ylo, yhi, false);
    for t in ticks(xlo, xhi) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            TOP + plot_h() + 18.0,
            sig(t, 6)
        );
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut s, &names);
    close(s)
}
