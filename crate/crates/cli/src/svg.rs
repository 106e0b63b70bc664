//! Minimal SVG figure emitter — lines, scatter, quiver arrows, reference
//! lines, axis ticks, and a legend. Fidelity target is inspection, not
//! publication; there is deliberately no plotting dependency.

use std::fmt::Write as _;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

const W: f64 = 720.0;
const H: f64 = 480.0;
const ML: f64 = 62.0; // left margin
const MR: f64 = 18.0;
const MT: f64 = 34.0;
const MB: f64 = 50.0;

pub struct Figure {
    title: String,
    xlab: String,
    ylab: String,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    shapes: String,
    legend: Vec<(String, String)>,
}

/// (min, max) over the values, padded 5% (and widened if degenerate).
pub fn range_of(vals: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s.is_empty() || s == "-" { "0".to_string() } else { s.to_string() }
    }
}

impl Figure {
    pub fn new(title: &str, xlab: &str, ylab: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Figure {
            title: title.to_string(),
            xlab: xlab.to_string(),
            ylab: ylab.to_string(),
            x0: x_range.0,
            x1: x_range.1,
            y0: y_range.0,
            y1: y_range.1,
            shapes: String::new(),
            legend: Vec::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, self.px(*x), self.py(*y));
        }
        let _ = write!(
            self.shapes,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
            d.trim_end()
        );
    }

    pub fn scatter(&mut self, pts: &[(f64, f64)], radius: f64, color: &str, opacity: f64) {
        for (x, y) in pts {
            let _ = write!(
                self.shapes,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{color}\" fill-opacity=\"{opacity}\"/>\n",
                self.px(*x),
                self.py(*y)
            );
        }
    }

    /// Quiver arrow from `from` toward `from + dir` (data units), drawn with
    /// a small head.
    pub fn arrow(&mut self, from: (f64, f64), dir: (f64, f64), color: &str) {
        let (x1, y1) = (self.px(from.0), self.py(from.1));
        let (x2, y2) = (self.px(from.0 + dir.0), self.py(from.1 + dir.1));
        let (dx, dy) = (x2 - x1, y2 - y1);
        let len = (dx * dx + dy * dy).sqrt();
        if len < 0.5 {
            let _ = write!(
                self.shapes,
                "<circle cx=\"{x1:.2}\" cy=\"{y1:.2}\" r=\"1\" fill=\"{color}\"/>\n"
            );
            return;
        }
        let (ux, uy) = (dx / len, dy / len);
        let head = (3.0f64).min(0.4 * len);
        let (hx, hy) = (x2 - head * ux, y2 - head * uy);
        let (px, py) = (-uy, ux);
        let _ = write!(
            self.shapes,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{color}\" stroke-width=\"1\"/>\n\
             <polygon points=\"{x2:.2},{y2:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"{color}\"/>\n",
            hx + 0.5 * head * px,
            hy + 0.5 * head * py,
            hx - 0.5 * head * px,
            hy - 0.5 * head * py,
        );
    }

    pub fn hline(&mut self, y: f64, color: &str) {
        let yy = self.py(y);
        let _ = write!(
            self.shapes,
            "<line x1=\"{ML}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"{color}\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n",
            W - MR
        );
    }

    pub fn vline(&mut self, x: f64, color: &str) {
        let xx = self.px(x);
        let _ = write!(
            self.shapes,
            "<line x1=\"{xx:.2}\" y1=\"{MT}\" x2=\"{xx:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n",
            H - MB
        );
    }

    pub fn legend_entry(&mut self, label: &str, color: &str) {
        self.legend.push((label.to_string(), color.to_string()));
    }

    pub fn render(self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        );
        // axes box
        let _ = write!(
            s,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
            W - ML - MR,
            H - MT - MB
        );
        // ticks: 6 per axis
        for i in 0..6 {
            let f = i as f64 / 5.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let xp = self.px(xv);
            let yp = self.py(yv);
            let _ = write!(
                s,
                "<line x1=\"{xp:.2}\" y1=\"{:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n\
                 <text x=\"{xp:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">{}</text>\n",
                H - MB,
                H - MB + 5.0,
                H - MB + 18.0,
                fmt_tick(xv)
            );
            let _ = write!(
                s,
                "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{ML}\" y2=\"{yp:.2}\" stroke=\"#333\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#333\">{}</text>\n",
                ML - 5.0,
                ML - 8.0,
                yp + 4.0,
                fmt_tick(yv)
            );
        }
        // labels and title
        let _ = write!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#111\">{}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\">{}</text>\n\
             <text x=\"14\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
            0.5 * W,
            MT - 12.0,
            xml_escape(&self.title),
            ML + 0.5 * (W - ML - MR),
            H - 12.0,
            xml_escape(&self.xlab),
            0.5 * H,
            0.5 * H,
            xml_escape(&self.ylab),
        );
        // clipped shape layer
        let _ = write!(
            s,
            "<clipPath id=\"plot\"><rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\"/></clipPath>\n\
             <g clip-path=\"url(#plot)\">\n{}</g>\n",
            W - ML - MR,
            H - MT - MB,
            self.shapes
        );
        // legend, top-right inside the box
        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = MT + 16.0 + 16.0 * i as f64;
            let _ = write!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#111\">{}</text>\n",
                W - MR - 150.0,
                y - 3.0,
                W - MR - 131.0,
                y + 2.0,
                xml_escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
