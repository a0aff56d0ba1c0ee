//! Minimal SVG emission for report bar charts. No styling machinery, just
//! deterministic text output suitable for dropping next to the CSV tables.

/// Horizontal bar chart. Values may be any finite reals; bars are scaled to
/// the maximum absolute value.
pub fn bar_chart(title: &str, rows: &[(String, f64)]) -> String {
    const BAR_HEIGHT: usize = 22;
    const GAP: usize = 8;
    const LABEL_WIDTH: usize = 220;
    const CHART_WIDTH: usize = 420;
    const TOP: usize = 40;
    let height = TOP + rows.len() * (BAR_HEIGHT + GAP) + 20;
    let width = LABEL_WIDTH + CHART_WIDTH + 100;
    let max_abs = rows
        .iter()
        .map(|(_, v)| v.abs())
        .fold(f64::EPSILON, f64::max);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "  <text x=\"10\" y=\"24\" font-size=\"15\">{}</text>\n",
        escape(title)
    ));
    for (i, (label, value)) in rows.iter().enumerate() {
        let y = TOP + i * (BAR_HEIGHT + GAP);
        let bar = (value.abs() / max_abs * CHART_WIDTH as f64).round() as usize;
        let fill = if *value >= 0.0 { "#4878a8" } else { "#a85048" };
        out.push_str(&format!(
            "  <text x=\"10\" y=\"{}\">{}</text>\n",
            y + BAR_HEIGHT - 6,
            escape(label)
        ));
        out.push_str(&format!(
            "  <rect x=\"{LABEL_WIDTH}\" y=\"{y}\" width=\"{bar}\" height=\"{BAR_HEIGHT}\" \
             fill=\"{fill}\"/>\n"
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\">{:.4}</text>\n",
            LABEL_WIDTH + bar + 8,
            y + BAR_HEIGHT - 6,
            value
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
