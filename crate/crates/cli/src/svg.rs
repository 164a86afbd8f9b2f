//! Minimal standalone SVG line charts.

use std::fmt::Write as _;

use dlab_core::experiments::TeacherSweep;
use dlab_core::LearningCurve;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 280.0;
const MARGIN: f64 = 50.0;

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One panel at horizontal offset `x0`, axes scaled to the data.
fn panel(out: &mut String, x0: f64, title: &str, x_label: &str, series: &[Series<'_>]) {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    if ymax <= ymin {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| x0 + MARGIN + (x - xmin) / (xmax - xmin) * (PANEL_W - 1.5 * MARGIN);
    let sy = |y: f64| MARGIN + (1.0 - (y - ymin) / (ymax - ymin)) * (PANEL_H - 2.0 * MARGIN);
    let (left, right) = (sx(xmin), sx(xmax));
    let (top, bottom) = (sy(ymax), sy(ymin));
    let _ = writeln!(
        out,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        top - 12.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        (left + right) / 2.0,
        bottom + 30.0,
        escape(x_label)
    );
    for (v, anchor, x, y) in [
        (xmin, "middle", left, bottom + 14.0),
        (xmax, "middle", right, bottom + 14.0),
        (ymin, "end", left - 4.0, bottom),
        (ymax, "end", left - 4.0, top + 4.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="10">{}</text>"#,
            trim(v)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-size="10" fill="{color}">{}</text>"#,
            right - 6.0,
            escape(s.name)
        );
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn document(body: &str) -> String {
    let w = 2.0 * PANEL_W + MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{PANEL_H}\" viewBox=\"0 0 {w} {PANEL_H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Mean test accuracy and cost against training step, one line per curve.
pub fn learning_chart(title: &str, curves: &[&LearningCurve]) -> String {
    let pick = |f: fn(&LearningCurve) -> &Vec<f64>| -> Vec<Series<'_>> {
        curves
            .iter()
            .map(|c| Series {
                name: &c.label,
                points: c.steps.iter().map(|&s| s as f64).zip(f(c).iter().copied()).collect(),
            })
            .collect()
    };
    let mut body = String::new();
    panel(&mut body, 0.0, &format!("{title}: accuracy"), "step", &pick(|c| &c.acc_mean));
    panel(&mut body, PANEL_W, &format!("{title}: cost"), "step", &pick(|c| &c.cost_mean));
    document(&body)
}

/// Teacher accuracy and cost against training-set size, one line per `λ`.
pub fn sweep_chart(figure: u32, sweep: &TeacherSweep) -> String {
    let mut lambdas: Vec<f64> = Vec::new();
    for r in &sweep.rows {
        if !lambdas.contains(&r.lambda) {
            lambdas.push(r.lambda);
        }
    }
    let names: Vec<String> = lambdas.iter().map(|l| format!("lambda={l}")).collect();
    let build = |acc: bool| -> Vec<Series<'_>> {
        lambdas
            .iter()
            .zip(&names)
            .map(|(&l, name)| Series {
                name,
                points: sweep
                    .rows
                    .iter()
                    .filter(|r| r.lambda == l)
                    .map(|r| (r.size as f64, if acc { r.acc_mean } else { r.cost_mean }))
                    .collect(),
            })
            .collect()
    };
    let mut body = String::new();
    panel(&mut body, 0.0, &format!("Figure {figure}: teacher accuracy"), "training samples", &build(true));
    panel(&mut body, PANEL_W, &format!("Figure {figure}: teacher cost"), "training samples", &build(false));
    document(&body)
}
