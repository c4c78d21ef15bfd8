//! Nearest-neighbour overlays for 2-D layouts.
//!
//! Edges come from cosine distances in the original high-dimensional space;
//! the layout only decides where they are drawn. Rendering colours each edge
//! by linear interpolation between a near colour (shortest edge in the
//! graph) and a far colour (longest edge).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{par, Error, Matrix, Result};

pub const DEFAULT_K: usize = 3;
const VIEWBOX: f64 = 1000.0;
const MARGIN: f64 = 0.05;
const POINT_RADIUS: f64 = 6.0;

/// Fill colours cycled over labels in first-appearance order.
const LABEL_COLOURS: &[&str] = &[
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
    "#17becf", "#bcbd22", "#8c564b", "#9467bd", "#2ca02c", "#ff7f0e",
];
const UNLABELED_FILL: &str = "#808080";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let mix = |a: u8, b: u8| (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8;
        Rgb(mix(self.0, other.0), mix(self.1, other.1), mix(self.2, other.2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub near: Rgb,
    pub far: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            near: Rgb(255, 0, 0),
            far: Rgb(0, 0, 255),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxigramPoint {
    pub context_id: String,
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub hd_distance: f64,
    /// 1 for the nearest neighbour.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxigramGraph {
    pub k: usize,
    pub points: Vec<ProxigramPoint>,
    pub edges: Vec<Edge>,
}

impl ProxigramGraph {
    /// Neighbour indices of point `i`, nearest first.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.from == i).map(|e| e.to).collect()
    }

    /// Share of edges joining points with different labels.
    pub fn between_label_fraction(&self) -> Option<f64> {
        if self.edges.is_empty() {
            return None;
        }
        let mut between = 0usize;
        for e in &self.edges {
            let (a, b) = (&self.points[e.from].label, &self.points[e.to].label);
            match (a, b) {
                (Some(a), Some(b)) if a != b => between += 1,
                (Some(_), Some(_)) => {}
                _ => return None,
            }
        }
        Some(between as f64 / self.edges.len() as f64)
    }
}

/// Builds the `k`-nearest-neighbour graph (cosine distance in `x_hd`) over the
/// points of `layout`. `k` is clamped to `n - 1`; ties go to the lower index.
pub fn knn_graph(
    x_hd: &Matrix,
    layout: &Matrix,
    k: usize,
    context_ids: &[String],
    labels: Option<&[String]>,
) -> Result<ProxigramGraph> {
    let n = x_hd.rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("proxigram needs at least 2 points, got {n}")));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be positive".into()));
    }
    if layout.rows() != n || layout.cols() != 2 || context_ids.len() != n {
        return Err(Error::Shape(format!(
            "{n} high-dimensional rows, {}x{} layout, {} ids",
            layout.rows(),
            layout.cols(),
            context_ids.len()
        )));
    }
    if labels.is_some_and(|l| l.len() != n) {
        return Err(Error::Shape("label count does not match point count".into()));
    }
    let norms: Vec<f64> = x_hd.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::Domain(format!("row {i} has zero norm")));
    }
    let k = k.min(n - 1);
    let per_point = par::map_range(n, |i| {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dot: f64 = x_hd.row(i).iter().zip(x_hd.row(j)).map(|(a, b)| a * b).sum();
                let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                (1.0 - cos, j)
            })
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand.into_iter()
            .enumerate()
            .map(|(r, (d, j))| Edge {
                from: i,
                to: j,
                hd_distance: d.max(0.0),
                rank: r + 1,
            })
            .collect::<Vec<_>>()
    });
    let points = (0..n)
        .map(|i| ProxigramPoint {
            context_id: context_ids[i].clone(),
            x: layout.get(i, 0),
            y: layout.get(i, 1),
            label: labels.map(|l| l[i].clone()),
        })
        .collect();
    Ok(ProxigramGraph {
        k,
        points,
        edges: per_point.into_iter().flatten().collect(),
    })
}

/// Stroke colour for every edge, in edge order. A zero distance range maps
/// every edge to the near colour.
pub fn edge_colours(graph: &ProxigramGraph, palette: Palette) -> Vec<Rgb> {
    let (lo, hi) = graph
        .edges
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.hd_distance), hi.max(e.hd_distance))
        });
    graph
        .edges
        .iter()
        .map(|e| {
            let t = if hi > lo { (e.hd_distance - lo) / (hi - lo) } else { 0.0 };
            palette.near.lerp(palette.far, t)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Affine map of one layout axis into the viewbox minus a 5% margin.
fn axis_map(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let (start, span) = (VIEWBOX * MARGIN, VIEWBOX * (1.0 - 2.0 * MARGIN));
    move |v| {
        if hi > lo {
            start + (v - lo) / (hi - lo) * span
        } else {
            VIEWBOX / 2.0
        }
    }
}

/// Renders the graph as an SVG 1.1 document: edges first, then one circle per
/// point carrying its context id in a `<title>`.
pub fn render_proxigram(graph: &ProxigramGraph, palette: Palette) -> Result<String> {
    if graph.points.is_empty() {
        return Err(Error::InsufficientData("cannot render an empty graph".into()));
    }
    let fx = axis_map(graph.points.iter().map(|p| p.x));
    let fy_raw = axis_map(graph.points.iter().map(|p| p.y));
    // SVG y grows downwards
    let fy = |v: f64| VIEWBOX - fy_raw(v);

    let mut label_order: Vec<&str> = Vec::new();
    for p in &graph.points {
        if let Some(l) = &p.label {
            if !label_order.contains(&l.as_str()) {
                label_order.push(l);
            }
        }
    }

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{v}" height="{v}" viewBox="0 0 {v} {v}">"#,
        v = VIEWBOX
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{v}" height="{v}" fill="white"/>"#, v = VIEWBOX);
    let _ = writeln!(svg, r#"<g id="edges" stroke-width="1.5" stroke-opacity="0.8">"#);
    for (e, c) in graph.edges.iter().zip(edge_colours(graph, palette)) {
        let (a, b) = (&graph.points[e.from], &graph.points[e.to]);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}"/>"#,
            fx(a.x),
            fy(a.y),
            fx(b.x),
            fy(b.y),
            c.hex()
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g id="points" stroke="black" stroke-width="0.5">"#);
    for p in &graph.points {
        let fill = match &p.label {
            Some(l) => {
                let idx = label_order.iter().position(|x| x == l).unwrap_or(0);
                LABEL_COLOURS[idx % LABEL_COLOURS.len()]
            }
            None => UNLABELED_FILL,
        };
        let title = match &p.label {
            Some(l) => format!("{} [{}]", escape(&p.context_id), escape(l)),
            None => escape(&p.context_id),
        };
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{POINT_RADIUS}" fill="{fill}"><title>{title}</title></circle>"#,
            fx(p.x),
            fy(p.y),
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
