//! Minimal SVG emitter for line plots, polygons and heat maps.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn palette(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Blue-to-yellow ramp for t in [0, 1].
pub fn ramp(t: f64) -> String {
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (stops.len() - 1) as f64;
    let i = (x.floor() as usize).min(stops.len() - 2);
    let w = x - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |p: f64, q: f64| (p + w * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Line {
        points: Vec<(f64, f64)>,
        color: String,
        width: f64,
        label: Option<String>,
    },
    Points {
        points: Vec<(f64, f64)>,
        color: String,
        radius: f64,
        label: Option<String>,
    },
    Polygon {
        points: Vec<(f64, f64)>,
        fill: String,
        label: Option<String>,
    },
    /// Cell (i, j) spans x_edges[i..=i+1] by y_edges[j..=j+1]; values[j][i].
    Heat {
        x_edges: Vec<f64>,
        y_edges: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Text {
        at: (f64, f64),
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub width: f64,
    pub height: f64,
    pub layers: Vec<Layer>,
}

const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0);

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(x: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    if x.abs() >= 1e5 || (x != 0.0 && x.abs() < 1e-3) {
        format!("{x:.1e}")
    } else {
        format!("{x:.digits$}")
    }
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: None,
            y_range: None,
            width: 640.0,
            height: 480.0,
            layers: Vec::new(),
        }
    }

    pub fn ranges(mut self, x: (f64, f64), y: (f64, f64)) -> Self {
        self.x_range = Some(x);
        self.y_range = Some(y);
        self
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, color: &str, label: Option<&str>) {
        self.layers.push(Layer::Line { points, color: color.into(), width: 1.5, label: label.map(Into::into) });
    }

    pub fn points(&mut self, points: Vec<(f64, f64)>, color: &str, label: Option<&str>) {
        self.layers.push(Layer::Points { points, color: color.into(), radius: 3.0, label: label.map(Into::into) });
    }

    pub fn polygon(&mut self, points: Vec<(f64, f64)>, fill: &str, label: Option<&str>) {
        self.layers.push(Layer::Polygon { points, fill: fill.into(), label: label.map(Into::into) });
    }

    pub fn heat(&mut self, x_edges: Vec<f64>, y_edges: Vec<f64>, values: Vec<Vec<f64>>) {
        self.layers.push(Layer::Heat { x_edges, y_edges, values });
    }

    pub fn text(&mut self, at: (f64, f64), text: &str) {
        self.layers.push(Layer::Text { at, text: text.into() });
    }

    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(y), ys.1.max(y));
            }
        };
        for l in &self.layers {
            match l {
                Layer::Line { points, .. } | Layer::Points { points, .. } | Layer::Polygon { points, .. } => {
                    points.iter().for_each(|&(x, y)| add(x, y))
                }
                Layer::Heat { x_edges, y_edges, .. } => {
                    if let (Some(&x0), Some(&x1), Some(&y0), Some(&y1)) = (x_edges.first(), x_edges.last(), y_edges.first(), y_edges.last())
                    {
                        add(x0, y0);
                        add(x1, y1);
                    }
                }
                Layer::Text { at, .. } => add(at.0, at.1),
            }
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 <= 0.0 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        (self.x_range.unwrap_or(pad(xs)), self.y_range.unwrap_or(pad(ys)))
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.data_bounds();
        let (ml, mr, mt, mb) = MARGIN;
        let (pw, ph) = (self.width - ml - mr, self.height - mt - mb);
        let sx = |x: f64| ml + (x - xr.0) / (xr.1 - xr.0) * pw;
        let sy = |y: f64| mt + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
        let pt = |(x, y): (f64, f64)| format!("{:.2},{:.2}", sx(x), sy(y));

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        let mut legend = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Heat { x_edges, y_edges, values } => {
                    let (lo, hi) = values
                        .iter()
                        .flatten()
                        .filter(|v| v.is_finite())
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
                    let span = if hi > lo { hi - lo } else { 1.0 };
                    for (j, row) in values.iter().enumerate() {
                        for (i, &v) in row.iter().enumerate() {
                            let (x0, x1, y0, y1) = (sx(x_edges[i]), sx(x_edges[i + 1]), sy(y_edges[j]), sy(y_edges[j + 1]));
                            let fill = if v.is_finite() { ramp((v - lo) / span) } else { "#cccccc".into() };
                            let _ = writeln!(
                                s,
                                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                                x0.min(x1),
                                y0.min(y1),
                                (x1 - x0).abs(),
                                (y1 - y0).abs()
                            );
                        }
                    }
                }
                Layer::Polygon { points, fill, label } => {
                    let p: Vec<String> = points.iter().map(|&q| pt(q)).collect();
                    let _ = writeln!(
                        s,
                        r##"<polygon points="{}" fill="{fill}" fill-opacity="0.45" stroke="#444" stroke-width="0.5"/>"##,
                        p.join(" ")
                    );
                    if let Some(t) = label {
                        let n = points.len().max(1) as f64;
                        let c = points.iter().fold((0.0, 0.0), |a, q| (a.0 + q.0 / n, a.1 + q.1 / n));
                        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, sx(c.0), sy(c.1), esc(t));
                    }
                }
                Layer::Line { points, color, width, label } => {
                    for run in points.split(|p| !(p.0.is_finite() && p.1.is_finite())).filter(|r| r.len() > 1) {
                        let p: Vec<String> = run.iter().map(|&q| pt(q)).collect();
                        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#, p.join(" "));
                    }
                    if let Some(t) = label {
                        legend.push((color.clone(), t.clone()));
                    }
                }
                Layer::Points { points, color, radius, label } => {
                    for &q in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}"/>"#, sx(q.0), sy(q.1));
                    }
                    if let Some(t) = label {
                        legend.push((color.clone(), t.clone()));
                    }
                }
                Layer::Text { at, text } => {
                    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, sx(at.0), sy(at.1), esc(text));
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r##"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##);
        for (axis, r) in [(0, xr), (1, yr)] {
            let step = nice_step(r.1 - r.0, 6);
            let mut v = (r.0 / step).ceil() * step;
            while v <= r.1 + 1e-9 * step {
                let lab = tick_label(v, step);
                if axis == 0 {
                    let x = sx(v);
                    let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, mt + ph, mt + ph + 5.0);
                    let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{lab}</text>"#, mt + ph + 18.0);
                } else {
                    let y = sy(v);
                    let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="#000"/>"##, ml - 5.0);
                    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{lab}</text>"#, ml - 8.0, y + 4.0);
                }
                v += step;
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            self.height - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            mt + ph / 2.0,
            esc(&self.y_label)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, ml + pw / 2.0, esc(&self.title));
        for (i, (color, t)) in legend.iter().enumerate() {
            let y = mt + 14.0 + 16.0 * i as f64;
            let x = ml + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#,
                y - 4.0,
                x + 18.0,
                y - 4.0
            );
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x + 24.0, esc(t));
        }
        s.push_str("</svg>\n");
        s
    }
}
