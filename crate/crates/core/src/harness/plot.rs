//! SVG output: position traces over the road outline, and sweep timings.

use std::fmt::Write;

use crate::dynamics::idx;
use crate::geometry::IntersectionLayout;
use crate::scenario::CrossingSolution;

pub const VIEWPORT: f64 = 1000.0;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{v}" height="{v}" viewBox="0 0 {v} {v}">"#,
        v = VIEWPORT
    );
    let _ = writeln!(out, r##"<rect width="{v}" height="{v}" fill="#ffffff"/>"##, v = VIEWPORT);
}

/// Position traces of every vehicle, with start and goal markers and the
/// body outline every second.
pub fn trajectory_svg(sol: &CrossingSolution, layout: &IntersectionLayout, body: &[(f64, f64)]) -> String {
    let e = layout.extent() * 1.05;
    let scale = VIEWPORT / (2.0 * e);
    let px = |x: f64, y: f64| ((x + e) * scale, (e - y) * scale);
    let mut s = String::new();
    header(&mut s);
    let outline: Vec<String> = layout
        .road_outline()
        .iter()
        .map(|p| {
            let (a, b) = px(p[0], p[1]);
            format!("{a:.2},{b:.2}")
        })
        .collect();
    let _ = writeln!(s, r##"<polygon points="{}" fill="#eeeeee" stroke="#444444" stroke-width="2"/>"##, outline.join(" "));
    for (i, cav) in sol.cavs.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = cav
            .states
            .iter()
            .map(|st| {
                let (a, b) = px(st[idx::X], st[idx::Y]);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
        let (hl, hw) = body.get(i).copied().unwrap_or((2.3, 1.0));
        let mut next = sol.t0;
        for (k, t) in sol.times.iter().enumerate() {
            if *t + 1e-9 < next && k + 1 != sol.times.len() {
                continue;
            }
            next += 1.0;
            let st = cav.states[k];
            let (c, sn) = (st[idx::THETA].cos(), st[idx::THETA].sin());
            let corners: Vec<String> = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
                .iter()
                .map(|(a, b)| {
                    let (u, v) = px(st[idx::X] + a * c - b * sn, st[idx::Y] + a * sn + b * c);
                    format!("{u:.2},{v:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1"/>"#,
                corners.join(" ")
            );
        }
        if let (Some(first), Some(last)) = (cav.states.first(), cav.states.last()) {
            let (a, b) = px(first[idx::X], first[idx::Y]);
            let _ = writeln!(s, r#"<circle cx="{a:.2}" cy="{b:.2}" r="5" fill="{color}"/>"#);
            let (a, b) = px(last[idx::X], last[idx::Y]);
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, a - 5.0, b - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="16" fill="{color}">{}</text>"#, a + 8.0, b - 8.0, cav.id);
        }
    }
    let _ = writeln!(
        s,
        r##"<text x="20" y="30" font-size="20" fill="#000000">t_f - t0 = {:.3} s</text>"##,
        sol.t_f - sol.t0
    );
    s.push_str("</svg>\n");
    s
}

/// Mean wall time against vehicle count on a log axis, with one-sigma
/// bars and the fitted exponential.
pub fn timing_svg(points: &[(usize, f64, f64)], fit: Option<(f64, f64)>) -> String {
    let mut s = String::new();
    header(&mut s);
    let (m, left, top) = (VIEWPORT - 140.0, 100.0, 60.0);
    let positive: Vec<&(usize, f64, f64)> = points.iter().filter(|p| p.1 > 0.0).collect();
    if positive.is_empty() {
        s.push_str(r#"<text x="100" y="100" font-size="20">no successful runs</text>"#);
        s.push_str("\n</svg>\n");
        return s;
    }
    let n_min = positive.iter().map(|p| p.0).min().unwrap() as f64;
    let n_max = (positive.iter().map(|p| p.0).max().unwrap() as f64).max(n_min + 1.0);
    let lo = positive.iter().map(|p| (p.1 - p.2).max(p.1 * 0.5)).fold(f64::INFINITY, f64::min).log10().floor();
    let hi = positive.iter().map(|p| p.1 + p.2).fold(0.0, f64::max).log10().ceil().max(lo + 1.0);
    let px = |n: f64, t: f64| (left + (n - n_min) / (n_max - n_min) * m, top + (hi - t.log10()) / (hi - lo) * m);
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{m}" height="{m}" fill="none" stroke="#444444"/>"##);
    for dec in lo as i32..=hi as i32 {
        let (_, y) = px(n_min, 10f64.powi(dec));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, left + m);
        let _ = writeln!(s, r#"<text x="20" y="{:.2}" font-size="16">1e{dec} s</text>"#, y + 5.0);
    }
    for p in &positive {
        let (x, y) = px(p.0 as f64, p.1);
        let (_, y_hi) = px(p.0 as f64, p.1 + p.2);
        let (_, y_lo) = px(p.0 as f64, (p.1 - p.2).max(p.1 * 0.5));
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{y_lo:.2}" x2="{x:.2}" y2="{y_hi:.2}" stroke="#1f77b4"/>"##);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="#1f77b4"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="16" text-anchor="middle">N={}</text>"#, top + m + 25.0, p.0);
    }
    if let Some((slope, intercept)) = fit {
        let (x1, y1) = px(n_min, (intercept + slope * n_min).exp());
        let (x2, y2) = px(n_max, (intercept + slope * n_max).exp());
        let _ = writeln!(
            s,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#d62728" stroke-dasharray="6,4"/>"##
        );
        let _ = writeln!(s, r##"<text x="{left}" y="40" font-size="20" fill="#d62728">time ~ exp({slope:.3} N)</text>"##);
    }
    s.push_str("</svg>\n");
    s
}
