//! Minimal SVG emission: line plots and heatmaps.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        xml_escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(y_label)
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render one or more named line series over a shared x axis.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
) -> String {
    let (x_lo, x_hi) = axis_range(x.iter().cloned());
    let (y_lo, y_hi) = axis_range(series.iter().flat_map(|(_, ys)| ys.iter().cloned()));
    let sx = |v: f64| MARGIN + (v - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut out = header(title);
    out.push_str(&axes(x_label, y_label));
    for (idx, (name, ys)) in series.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let points: Vec<String> = x
            .iter()
            .zip(ys.iter())
            .filter(|(xv, yv)| xv.is_finite() && yv.is_finite())
            .map(|(&xv, &yv)| format!("{:.2},{:.2}", sx(xv), sy(yv)))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 18.0 * (idx as f64 + 1.0),
            xml_escape(name)
        ));
    }
    // Range annotations.
    out.push_str(&format!(
        "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{:.4}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"end\">{:.4}</text>\n",
        HEIGHT - MARGIN + 16.0,
        x_lo,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 16.0,
        x_hi
    ));
    out.push_str("</svg>\n");
    out
}

/// Render a heatmap of `values[(i, j)]` over axes `x` (columns) and `y`
/// (rows); values are mapped onto a blue-to-red ramp.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    y: &[f64],
    values: &ndarray::Array2<f64>,
) -> String {
    let (lo, hi) = axis_range(values.iter().cloned());
    let n_x = x.len().max(1);
    let n_y = y.len().max(1);
    let cell_w = (WIDTH - 2.0 * MARGIN) / n_x as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / n_y as f64;

    let mut out = header(title);
    out.push_str(&axes(x_label, y_label));
    for i in 0..n_y {
        for j in 0..n_x {
            let v = values[(i, j)];
            let t = if v.is_finite() && hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            let r = (255.0 * t) as u8;
            let b = (255.0 * (1.0 - t)) as u8;
            let g = (96.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
            out.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"rgb({r},{g},{b})\"/>\n",
                MARGIN + j as f64 * cell_w,
                HEIGHT - MARGIN - (i as f64 + 1.0) * cell_h,
                cell_w + 0.5,
                cell_h + 0.5,
            ));
        }
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">range \
         [{lo:.4}, {hi:.4}]</text>\n",
        MARGIN,
        MARGIN - 8.0
    ));
    out.push_str("</svg>\n");
    out
}

/// Write an SVG document to disk.
pub fn write_svg(path: &std::path::Path, svg: &str) -> crate::error::CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}
