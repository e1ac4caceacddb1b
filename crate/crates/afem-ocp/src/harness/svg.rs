//! Minimal log-log SVG plotting: fixed 800x600 canvas, decade grid lines,
//! one polyline per series, a reference-slope guide line and a legend.
//! No plotting dependency; the axis mapping is exposed so tests can parse
//! coordinates back out of the rendered markup.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const PLOT_X: f64 = 70.0;
const PLOT_Y: f64 = 40.0;
const PLOT_W: f64 = 560.0;
const PLOT_H: f64 = 500.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    /// Strictly positive (x, y) pairs.
    pub points: Vec<(f64, f64)>,
}

/// Straight reference line in log-log coordinates through a given point.
#[derive(Debug, Clone, Copy)]
pub struct Guide {
    pub slope: f64,
    pub through: (f64, f64),
    /// Horizontal extent, in decades, drawn to the left of the anchor.
    pub decades: f64,
}

impl Guide {
    fn endpoints(&self) -> [(f64, f64); 2] {
        let (x1, y1) = self.through;
        let x0 = x1 / 10f64.powf(self.decades);
        let y0 = y1 * (x0 / x1).powf(self.slope);
        [(x0, y0), (x1, y1)]
    }
}

/// Affine map between log10 data coordinates and pixels.
#[derive(Debug, Clone, Copy)]
pub struct AxisMap {
    pub lx0: f64,
    pub lx1: f64,
    pub ly0: f64,
    pub ly1: f64,
}

impl AxisMap {
    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x.log10() - self.lx0) / (self.lx1 - self.lx0);
        let fy = (y.log10() - self.ly0) / (self.ly1 - self.ly0);
        (PLOT_X + fx * PLOT_W, PLOT_Y + PLOT_H - fy * PLOT_H)
    }

    pub fn from_px(&self, px: f64, py: f64) -> (f64, f64) {
        let fx = (px - PLOT_X) / PLOT_W;
        let fy = (PLOT_Y + PLOT_H - py) / PLOT_H;
        (
            10f64.powf(self.lx0 + fx * (self.lx1 - self.lx0)),
            10f64.powf(self.ly0 + fy * (self.ly1 - self.ly0)),
        )
    }
}

#[derive(Debug, Clone)]
pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub guide: Option<Guide>,
}

impl LogLogPlot {
    /// Data-to-pixel mapping used by [`LogLogPlot::render`].
    pub fn axis_map(&self) -> AxisMap {
        let mut lx = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ly = (f64::INFINITY, f64::NEG_INFINITY);
        let mut feed = |x: f64, y: f64| {
            if x > 0.0 && y > 0.0 {
                lx = (lx.0.min(x.log10()), lx.1.max(x.log10()));
                ly = (ly.0.min(y.log10()), ly.1.max(y.log10()));
            }
        };
        for s in &self.series {
            for &(x, y) in &s.points {
                feed(x, y);
            }
        }
        if let Some(g) = self.guide {
            for (x, y) in g.endpoints() {
                feed(x, y);
            }
        }
        if !lx.0.is_finite() {
            lx = (0.0, 1.0);
            ly = (0.0, 1.0);
        }
        let pad = |range: (f64, f64)| {
            let span = (range.1 - range.0).max(0.5);
            (range.0 - 0.05 * span, range.1 + 0.05 * span)
        };
        let (lx0, lx1) = pad(lx);
        let (ly0, ly1) = pad(ly);
        AxisMap { lx0, lx1, ly0, ly1 }
    }

    pub fn render(&self) -> String {
        let map = self.axis_map();
        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            PLOT_X + PLOT_W / 2.0,
            self.title
        ));
        out.push_str(&format!(
            "<rect x=\"{PLOT_X}\" y=\"{PLOT_Y}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"none\" stroke=\"black\"/>\n"
        ));

        // Decade grid lines and labels.
        for k in (map.lx0.ceil() as i64)..=(map.lx1.floor() as i64) {
            let (px, _) = map.to_px(10f64.powi(k as i32), 10f64.powf(map.ly0));
            out.push_str(&format!(
                "<line x1=\"{px:.2}\" y1=\"{PLOT_Y}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
                PLOT_Y + PLOT_H
            ));
            out.push_str(&format!(
                "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">1e{k}</text>\n",
                PLOT_Y + PLOT_H + 18.0
            ));
        }
        for k in (map.ly0.ceil() as i64)..=(map.ly1.floor() as i64) {
            let (_, py) = map.to_px(10f64.powf(map.lx0), 10f64.powi(k as i32));
            out.push_str(&format!(
                "<line x1=\"{PLOT_X}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#dddddd\"/>\n",
                PLOT_X + PLOT_W
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{py:.2}\" font-size=\"12\" text-anchor=\"end\">1e{k}</text>\n",
                PLOT_X - 6.0
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            PLOT_X + PLOT_W / 2.0,
            HEIGHT - 10.0,
            self.x_label
        ));
        out.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            PLOT_Y + PLOT_H / 2.0,
            PLOT_Y + PLOT_H / 2.0,
            self.y_label
        ));

        for s in &self.series {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = map.to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            out.push_str(&format!(
                "<polyline id=\"series-{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                s.name,
                pts.join(" "),
                s.color
            ));
            for &(x, y) in &s.points {
                let (px, py) = map.to_px(x, y);
                out.push_str(&format!(
                    "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.4\" fill=\"{}\"/>\n",
                    s.color
                ));
            }
        }

        if let Some(g) = self.guide {
            let pts: Vec<String> = g
                .endpoints()
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = map.to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            out.push_str(&format!(
                "<polyline id=\"guide\" points=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-dasharray=\"6 4\" stroke-width=\"1.2\"/>\n",
                pts.join(" ")
            ));
        }

        // Legend block.
        let lx = PLOT_X + PLOT_W + 14.0;
        let mut ly = PLOT_Y + 16.0;
        for s in &self.series {
            out.push_str(&format!(
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                lx + 22.0,
                s.color
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
                lx + 28.0,
                ly + 4.0,
                s.name
            ));
            ly += 20.0;
        }
        if let Some(g) = self.guide {
            out.push_str(&format!(
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>\n",
                lx + 22.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\">slope {}</text>\n",
                lx + 28.0,
                ly + 4.0,
                g.slope
            ));
        }

        out.push_str("</svg>\n");
        out
    }
}

/// Extract the pixel coordinates of the polyline with the given id.
pub fn parse_polyline_points(svg: &str, id: &str) -> Option<Vec<(f64, f64)>> {
    let tag = format!("id=\"{id}\"");
    let at = svg.find(&tag)?;
    let rest = &svg[at..];
    let pts_at = rest.find("points=\"")? + "points=\"".len();
    let end = rest[pts_at..].find('"')? + pts_at;
    let body = &rest[pts_at..end];
    let mut out = Vec::new();
    for pair in body.split_whitespace() {
        let (x, y) = pair.split_once(',')?;
        out.push((x.parse().ok()?, y.parse().ok()?));
    }
    Some(out)
}
