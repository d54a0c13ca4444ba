//! Reliability diagram as a standalone SVG document.

use std::fmt::Write as _;

use crate::metrics::ReliabilityBins;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// One `rect.bar` per bin (height = bin accuracy, zero for empty bins), a
/// confidence marker for each nonempty bin, and the identity diagonal.
pub fn reliability_svg(bins: &ReliabilityBins, title: &str) -> String {
    let m = bins.num_bins();
    let plot = SIZE - 2.0 * MARGIN;
    let width = plot / m as f64;
    let y_of = |v: f64| MARGIN + plot * (1.0 - v);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        out,
        r#"  <text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        SIZE / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"  <path class="frame" d="M{MARGIN} {MARGIN} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = MARGIN + plot,
        r = MARGIN + plot
    );
    for (i, bin) in bins.bins().iter().enumerate() {
        let acc = bin.accuracy().unwrap_or(0.0);
        let x = MARGIN + width * i as f64;
        let _ = writeln!(
            out,
            r#"  <rect class="bar" x="{x:.3}" y="{:.3}" width="{width:.3}" height="{:.3}" fill="steelblue" stroke="white" data-count="{}"/>"#,
            y_of(acc),
            plot * acc,
            bin.count
        );
        if let Some(conf) = bin.confidence() {
            let _ = writeln!(
                out,
                r#"  <line class="confidence" x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="crimson" stroke-width="2"/>"#,
                x + width,
                y = y_of(conf)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"  <line class="identity" x1="{MARGIN}" y1="{b}" x2="{r}" y2="{MARGIN}" stroke="gray" stroke-dasharray="4 4"/>"#,
        b = MARGIN + plot,
        r = MARGIN + plot
    );
    let _ = writeln!(
        out,
        r#"  <text x="{}" y="{}" text-anchor="middle" font-size="12">confidence</text>"#,
        SIZE / 2.0,
        SIZE - MARGIN / 4.0
    );
    let _ = writeln!(
        out,
        r#"  <text x="{x}" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 {x} {y})">accuracy</text>"#,
        x = MARGIN / 2.0,
        y = SIZE / 2.0
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
