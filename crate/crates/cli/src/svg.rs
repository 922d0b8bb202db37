//! Minimal line plot: one sampled curve against a step function.

use std::fmt::Write;

pub struct Plot<'a> {
    pub title: &'a str,
    pub curve: &'a [(f64, f64)],
    /// `(t_start, t_end, value)` segments.
    pub steps: &'a [(f64, f64, f64)],
    /// Plot `log₂(1 + y)` instead of `y`, for orbits that explode.
    pub log_scale: bool,
}

const W: f64 = 800.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;

impl Plot<'_> {
    fn y(&self, v: f64) -> f64 {
        if self.log_scale {
            (1.0 + v.max(0.0)).log2()
        } else {
            v
        }
    }

    pub fn render(&self) -> String {
        let xs = self.curve.iter().map(|p| p.0).chain(self.steps.iter().flat_map(|s| [s.0, s.1]));
        let ys = self.curve.iter().map(|p| self.y(p.1)).chain(self.steps.iter().map(|s| self.y(s.2)));
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, self.title);
        let _ = writeln!(
            out,
            r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black" stroke-width="1"/>"#,
            H - PAD,
            W - PAD
        );
        for i in 0..=4 {
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let _ = writeln!(out, r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, PAD - 6.0, sy(fy) + 4.0, tick(fy));
            let _ = writeln!(out, r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, sx(fx), H - PAD + 18.0, tick(fx));
        }
        let mut d = String::new();
        for &(a, b, v) in self.steps {
            let _ = write!(d, "M{:.2},{:.2} H{:.2} ", sx(a), sy(self.y(v)), sx(b));
        }
        let _ = writeln!(out, r##"<path d="{}" fill="none" stroke="#c0392b" stroke-width="2" stroke-dasharray="6 4"/>"##, d.trim_end());
        let mut d = String::new();
        for (i, &(x, y)) in self.curve.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(self.y(y)));
        }
        let _ = writeln!(out, r##"<path d="{}" fill="none" stroke="#2c3e50" stroke-width="1.5"/>"##, d.trim_end());
        let label = if self.log_scale { "log2(1 + z2)" } else { "z2" };
        let _ = writeln!(out, r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{label}</text>"#, H / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        out
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}
