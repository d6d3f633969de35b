//! Minimal line-plot SVG writer.

use hsrecon::provenance::Provenance;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// XML comments may not contain `--`.
fn comment_safe(s: &str) -> String {
    s.replace("--", "- -")
}

/// One polyline per series over the shared x axis.
pub fn spectra_plot(x: &[f64], series: &[(&str, &[f64])], prov: &Provenance) -> String {
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let y1 = series.iter().flat_map(|(_, ys)| ys.iter()).fold(0.0f64, |a, &v| a.max(v)).max(1e-12) * 1.05;
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |v: f64| MARGIN + (v - x0) / xspan * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - v / y1 * (H - 2.0 * MARGIN);

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    for line in prov.lines() {
        out.push_str(&format!("<!-- {} -->\n", comment_safe(&line)));
    }
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    out.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    out.push_str(&format!(
        "<path d=\"M{l} {t} L{l} {b} L{r} {b}\" stroke=\"black\" fill=\"none\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">wavelength (nm): {x0:.0} to {x1:.0}</text>\n",
        W / 2.0,
        H - 15.0
    ));
    out.push_str(&format!(
        "<text x=\"15\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">mean reflectance (max {:.3})</text>\n",
        H / 2.0,
        H / 2.0,
        y1
    ));
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = x.iter().zip(ys.iter()).map(|(&a, &v)| format!("{:.2},{:.2}", px(a), py(v))).collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
        let ly = MARGIN + 16.0 * i as f64;
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{ly}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            W - MARGIN - 120.0,
            escape(name)
        ));
    }
    out.push_str("</svg>\n");
    out
}
