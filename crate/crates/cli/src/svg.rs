//! Static SVG renderings of the plot data.

use std::fmt::Write as _;

use levytopic::levy::DensityGrid;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Marker {
    pub label: String,
    pub at: (f64, f64),
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;

impl Frame {
    fn around(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let px = ((x1 - x0) * 0.08).max(0.05);
        let py = ((y1 - y0) * 0.08).max(0.05);
        Frame {
            x0: x0 - px,
            x1: x1 + px,
            y0: y0 - py,
            y1: y1 + py,
        }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD),
            H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD),
        )
    }
}

fn polyline(points: &[(f64, f64)], f: &Frame) -> String {
    points
        .iter()
        .map(|&p| {
            let (x, y) = f.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fitted (mu, sigma) paths with an optional contour and reference markers.
pub fn flow_plot(curves: &[Curve], contour: Option<&[(f64, f64)]>, markers: &[Marker]) -> String {
    let all = curves
        .iter()
        .flat_map(|c| c.points.iter().copied())
        .chain(contour.into_iter().flatten().copied())
        .chain(markers.iter().map(|m| m.at));
    let f = Frame::around(all);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="white"/>"##);
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (x, _) = f.map((xv, f.y0));
        let (_, y) = f.map((f.x0, yv));
        let _ = writeln!(
            s,
            r##"<text x="{x:.1}" y="{}" text-anchor="middle">{xv:.2}</text>"##,
            H - PAD + 16.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{y:.1}" text-anchor="end">{yv:.2}</text>"##,
            PAD - 6.0
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" text-anchor="middle">mu</text>"##,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r##"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">sigma</text>"##,
        H / 2.0,
        H / 2.0
    );
    if let Some(c) = contour {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#555" stroke-dasharray="5,4"/>"##,
            polyline(c, &f)
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
            polyline(&c.points, &f)
        );
        for &p in &c.points {
            let (x, y) = f.map(p);
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"##
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" fill="{color}">{}</text>"##,
            PAD + 8.0,
            PAD + 16.0 + 14.0 * i as f64,
            escape(&c.label)
        );
    }
    for m in markers {
        let (x, y) = f.map(m.at);
        let _ = writeln!(
            s,
            r##"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="black" stroke-width="2"/>"##,
            x - 5.0,
            y - 5.0,
            x + 5.0,
            y + 5.0,
            x - 5.0,
            y + 5.0,
            x + 5.0,
            y - 5.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}">{}</text>"##,
            x + 7.0,
            y - 7.0,
            escape(&m.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Viridis-like ramp for `t` in [0, 1].
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let u = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

/// Density field on the triangle, coloured by log density.
pub fn density_plot(grid: &DensityGrid, v_prev: Option<[f64; 3]>) -> String {
    let size = 480.0;
    let corner = |x: [f64; 3]| {
        // Vertices: topic 1 bottom left, topic 2 top, topic 3 bottom right.
        let px = 40.0 + (x[1] * 0.5 + x[2]) * (size - 80.0);
        let py = size - 40.0 - x[1] * (size - 80.0) * 0.866;
        (px, py)
    };
    let logs: Vec<f64> = grid.cells.iter().map(|c| c.1.max(1e-300).ln()).collect();
    let mut sorted = logs.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[sorted.len() / 100];
    let hi = sorted[sorted.len() - 1];
    let r = 0.62 * (size - 80.0) / grid.resolution as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(
        s,
        r##"<rect width="{size}" height="{size}" fill="white"/>"##
    );
    for ((x, _), l) in grid.cells.iter().zip(&logs) {
        let (px, py) = corner(*x);
        let t = if hi > lo { (l - lo) / (hi - lo) } else { 0.5 };
        let _ = writeln!(
            s,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="{r:.2}" fill="{}"/>"##,
            ramp(t)
        );
    }
    if let Some(v) = v_prev {
        let (px, py) = corner(v);
        let _ = writeln!(
            s,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"##
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{}" y="20" text-anchor="middle">lambda = {}</text>"##,
        size / 2.0,
        grid.lambda
    );
    s.push_str("</svg>\n");
    s
}
