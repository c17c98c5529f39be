//! Minimal SVG rendering of a trace: `vo` and `iL` on a shared time axis,
//! the gate signal as a step trace underneath.
//!
//! Each panel is a nested `<svg>` whose viewBox x axis is the tick index, so
//! point x-coordinates are the ticks themselves.

use std::fmt::Write as _;

use buckcpn::trace::Trace;

const WIDTH: f64 = 900.0;
const PLOT_W: f64 = 800.0;
const LEFT: f64 = 70.0;
const ANALOG_TOP: f64 = 40.0;
const ANALOG_H: f64 = 320.0;
const GATE_TOP: f64 = 400.0;
const GATE_H: f64 = 80.0;
const HEIGHT: f64 = 530.0;
/// Vertical resolution of the panel viewBoxes.
const Y_SPAN: f64 = 1000.0;
/// Analog series are thinned to about this many points.
const MAX_POINTS: usize = 4000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn analog_points(trace: &Trace, value: impl Fn(usize) -> f64, lo: f64, hi: f64) -> String {
    let n = trace.records.len();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    let mut out = String::new();
    for i in idx {
        let y = Y_SPAN * (hi - value(i)) / (hi - lo);
        let _ = write!(out, "{},{:.3} ", trace.records[i].k, y);
    }
    out.pop();
    out
}

/// Step trace: each level is held from its tick to the next; a change at
/// tick k is drawn from `k - 0.01` so x stays strictly increasing.
fn gate_points(trace: &Trace) -> String {
    let level = |u: u8| if u == 1 { 100.0 } else { 900.0 };
    let recs = &trace.records;
    let mut out = format!("{},{}", recs[0].k, level(recs[0].gate));
    for w in recs.windows(2) {
        if w[1].gate != w[0].gate {
            let _ = write!(
                out,
                " {},{} {},{}",
                w[1].k as f64 - 0.01,
                level(w[0].gate),
                w[1].k,
                level(w[1].gate)
            );
        }
    }
    let last = recs[recs.len() - 1];
    let _ = write!(out, " {},{}", last.k + 1, level(last.gate));
    out
}

fn panel_open(out: &mut String, top: f64, height: f64, k0: u64, k1: u64) {
    let _ = writeln!(
        out,
        r##"    <rect x="{LEFT}" y="{top}" width="{PLOT_W}" height="{height}" fill="none" stroke="#888"/>"##
    );
    let _ = writeln!(
        out,
        r#"    <svg x="{LEFT}" y="{top}" width="{PLOT_W}" height="{height}" viewBox="{k0} 0 {} {Y_SPAN}" preserveAspectRatio="none">"#,
        k1 - k0
    );
}

/// Renders a non-empty trace; callers get `TraceError::NoData` from the reader
/// before an empty trace can reach this point.
pub fn render_svg(trace: &Trace) -> String {
    assert!(!trace.records.is_empty(), "render_svg needs at least one record");
    let recs = &trace.records;
    let k0 = recs[0].k;
    let k1 = recs[recs.len() - 1].k + 1;
    let (vo_lo, vo_hi) = range(recs.iter().map(|r| r.output_voltage));
    let (il_lo, il_hi) = range(recs.iter().map(|r| r.inductor_current));
    let (t0, t1) = (recs[0].t, recs[recs.len() - 1].t);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "  <title>{}</title>", escape(&trace.scenario));
    let _ = writeln!(
        out,
        r#"  <text x="{LEFT}" y="20">{} ({} ticks)</text>"#,
        escape(&trace.scenario),
        recs.len()
    );

    let _ = writeln!(out, r#"  <g id="analog">"#);
    panel_open(&mut out, ANALOG_TOP, ANALOG_H, k0, k1);
    let _ = writeln!(
        out,
        r##"      <polyline id="vo" fill="none" stroke="#1f77b4" vector-effect="non-scaling-stroke" points="{}"/>"##,
        analog_points(trace, |i| recs[i].output_voltage, vo_lo, vo_hi)
    );
    let _ = writeln!(
        out,
        r##"      <polyline id="iL" fill="none" stroke="#d62728" vector-effect="non-scaling-stroke" points="{}"/>"##,
        analog_points(trace, |i| recs[i].inductor_current, il_lo, il_hi)
    );
    let _ = writeln!(out, "    </svg>");
    let legend_y = ANALOG_TOP + ANALOG_H + 16.0;
    let _ = writeln!(
        out,
        r##"    <text x="{LEFT}" y="{legend_y}" fill="#1f77b4">vo [{vo_lo:.4e}, {vo_hi:.4e}] V</text>"##
    );
    let _ = writeln!(
        out,
        r##"    <text x="{}" y="{legend_y}" fill="#d62728">iL [{il_lo:.4e}, {il_hi:.4e}] A</text>"##,
        LEFT + PLOT_W / 2.0
    );
    let _ = writeln!(out, "  </g>");

    let _ = writeln!(out, r#"  <g id="gate">"#);
    panel_open(&mut out, GATE_TOP, GATE_H, k0, k1);
    let _ = writeln!(
        out,
        r#"      <polyline id="u" fill="none" stroke="black" vector-effect="non-scaling-stroke" points="{}"/>"#,
        gate_points(trace)
    );
    let _ = writeln!(out, "    </svg>");
    let _ = writeln!(
        out,
        r#"    <text x="{}" y="{}">u</text>"#,
        LEFT - 20.0,
        GATE_TOP + GATE_H / 2.0
    );
    let axis_y = GATE_TOP + GATE_H + 16.0;
    let _ = writeln!(out, r#"    <text x="{LEFT}" y="{axis_y}">t = {t0:.4e} s</text>"#);
    let _ = writeln!(
        out,
        r#"    <text x="{}" y="{axis_y}" text-anchor="end">t = {t1:.4e} s</text>"#,
        LEFT + PLOT_W
    );
    let _ = writeln!(out, "  </g>");
    let _ = writeln!(out, "</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use buckcpn::TraceRecord;

    fn trace(gates: &[u8]) -> Trace {
        Trace {
            scenario: "a<b".into(),
            digest: "0".into(),
            records: gates
                .iter()
                .enumerate()
                .map(|(k, &u)| TraceRecord {
                    k: k as u64,
                    t: k as f64 * 5e-8,
                    inductor_current: k as f64 * 0.1,
                    output_voltage: 1.0,
                    gate: u,
                })
                .collect(),
        }
    }

    #[test]
    fn gate_steps_are_strictly_increasing() {
        let pts = gate_points(&trace(&[1, 1, 0, 1, 0, 0]));
        assert_eq!(pts, "0,100 1.99,100 2,900 2.99,900 3,100 3.99,100 4,900 6,900");
    }

    #[test]
    fn constant_series_gets_a_range() {
        assert_eq!(range([2.0, 2.0].into_iter()), (1.5, 2.5));
    }

    #[test]
    fn names_are_escaped() {
        let svg = render_svg(&trace(&[1, 0]));
        assert!(svg.contains("<title>a&lt;b</title>"));
    }
}
