//! Phase-plane plots as self-contained SVG.

use std::fmt::Write;

use crate::domain::Domain;
use crate::par::Exec;
use crate::sim::{ClosedLoop, Trajectory};
use crate::verify::nelder_mead;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;
const MAX_VERTICES: usize = 2000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
];

/// Points where the closed-loop running cost vanishes (to 1e-8), found by
/// polishing the grid's local minima with Nelder–Mead. At most `limit`
/// points, deduplicated to 1e-3.
pub fn minimizers(cl: &ClosedLoop, domain: &Domain, limit: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let res = if n == 2 { 41 } else { 15 };
    let pts = domain.grid(res);
    let vals = Exec::Parallel.map(&pts, |x| cl.running_cost(x));
    let stride: Vec<usize> = (0..n).map(|i| res.pow((n - 1 - i) as u32)).collect();
    let mut seeds = Vec::new();
    for (idx, x) in pts.iter().enumerate() {
        let v = vals[idx];
        let is_min = (0..n).all(|i| {
            let k = (idx / stride[i]) % res;
            let lower = k == 0 || vals[idx - stride[i]] >= v;
            let upper = k + 1 == res || vals[idx + stride[i]] >= v;
            lower && upper
        });
        if is_min {
            seeds.push(x.clone());
        }
    }
    let step = domain
        .bounds()
        .iter()
        .map(|(lo, hi)| (hi - lo) / (res - 1) as f64)
        .fold(f64::INFINITY, f64::min);
    let polished = Exec::Parallel.map(&seeds, |s| {
        nelder_mead(|y| cl.running_cost(y), s, 0.5 * step, 1e-20, 4000)
    });
    let slack = domain.scale(1.05);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (x, v) in polished {
        if v > 1e-8 || !slack.contains(&x) {
            continue;
        }
        let dup = out.iter().any(|p| {
            p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < 1e-3
        });
        if !dup {
            out.push(x);
            if out.len() == limit {
                break;
            }
        }
    }
    out
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
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

/// `x1` against `x2` for every trajectory (the first two coordinates in
/// higher order), with start points as circles and `marks` as crosses. The
/// view covers `view` when given, otherwise the data.
pub fn phase_svg(trajs: &[Trajectory], marks: &[Vec<f64>], view: Option<&Domain>) -> String {
    let (x, y) = match view {
        Some(d) => (d.bounds()[0], d.bounds()[1]),
        None => {
            let all = trajs.iter().flat_map(|t| t.states.iter()).chain(marks);
            let mut bx = (f64::INFINITY, f64::NEG_INFINITY);
            let mut by = bx;
            for s in all {
                bx = (bx.0.min(s[0]), bx.1.max(s[0]));
                by = (by.0.min(s[1]), by.1.max(s[1]));
            }
            if !bx.0.is_finite() {
                bx = (-1.0, 1.0);
                by = (-1.0, 1.0);
            }
            (padded(bx.0, bx.1), padded(by.0, by.1))
        }
    };
    let fr = Frame { x, y };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for t in ticks(fr.x.0, fr.x.1) {
        let p = fr.px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{p:.2}" y1="{:.2}" x2="{p:.2}" y2="{:.2}" stroke="#ddd"/><text x="{p:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(fr.y.0, fr.y.1) {
        let p = fr.py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{p:.2}" x2="{:.2}" y2="{p:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            p + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x1</text><text x="14" y="{:.2}" text-anchor="middle">x2</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}"/></clipPath><g clip-path="url(#plot)">"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (i, t) in trajs.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let every = t.len().div_ceil(MAX_VERTICES).max(1);
        let last = t.len().saturating_sub(1);
        let pts: Vec<String> = (0..t.len())
            .filter(|&k| k % every == 0 || k == last)
            .map(|k| format!("{:.2},{:.2}", fr.px(t.states[k][0]), fr.py(t.states[k][1])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        if let Some(x0) = t.states.first() {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                fr.px(x0[0]),
                fr.py(x0[1])
            );
        }
    }
    for m in marks {
        let (cx, cy) = (fr.px(m[0]), fr.py(m[1]));
        let _ = writeln!(
            s,
            r##"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="#d62728" stroke-width="2"/>"##,
            cx - 4.0,
            cy - 4.0,
            cx + 4.0,
            cy + 4.0,
            cx - 4.0,
            cy + 4.0,
            cx + 4.0,
            cy - 4.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::{SecondOrderSystem, System};
    use crate::sim::{integrate, SimConfig};

    fn unicycle() -> ClosedLoop {
        let sys = System::Second(
            SecondOrderSystem::new(parse("sin(x2)").unwrap(), parse("0").unwrap(), 1.0, 1.0).unwrap(),
        );
        ClosedLoop::new(
            &sys,
            &parse("-x1 - x2 - sin(x2)").unwrap(),
            &parse("(x1 + x2)^2 + sin(x2)^2").unwrap(),
        )
    }

    #[test]
    fn unicycle_minimizers_sit_on_the_lattice() {
        let m = minimizers(&unicycle(), &Domain::cube(2, 7.0), 50);
        assert_eq!(m.len(), 5, "{m:?}");
        for p in &m {
            let n = (p[1] / std::f64::consts::PI).round();
            assert!((p[1] - n * std::f64::consts::PI).abs() < 1e-3, "{p:?}");
            assert!((p[0] + p[1]).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let cl = unicycle();
        let cfg = SimConfig {
            t_max: 2.0,
            ..SimConfig::default()
        };
        let t = integrate(&cl, &[1.0, 1.0], &cfg).unwrap();
        let a = phase_svg(std::slice::from_ref(&t), &[vec![0.0, 0.0]], None);
        let b = phase_svg(&[t], &[vec![0.0, 0.0]], None);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 1);
    }
}
