//! Artifact writers: JSON with fixed float formatting, CSV tables, OBJ meshes and SVG plots.
//!
//! Every float is written as `{:.16e}` (17 significant digits), so equal
//! inputs produce byte-identical files.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use crate::flat_curves::PlanarCurveSolution;
use crate::graph_solver::{GraphSolution, NodeKind};
use crate::rotational::ProfileCurve;
use crate::stability::surface::{DiscreteSurface, Layout};
use crate::Result;

/// Formats a float with 17 significant digits; non-finite values become `NaN`/`inf`/`-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", f64::from(v))
    }
}

/// Pretty-enough JSON (one line) with fixed float formatting. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Writes a CSV table of floats with a header row.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// `s, theta, x, y` samples of a planar curve.
pub fn curve_csv<W: Write>(w: W, sol: &PlanarCurveSolution) -> io::Result<()> {
    let rows = (0..sol.s_samples.len()).map(|i| vec![sol.s_samples[i], sol.theta[i], sol.points[i].x, sol.points[i].y]);
    write_csv(w, &["s", "theta", "x", "y"], rows)
}

/// `s, x, z, theta, dtheta` samples of a meridian profile.
pub fn profile_csv<W: Write>(w: W, p: &ProfileCurve) -> io::Result<()> {
    let rows = (0..p.s.len()).map(|i| vec![p.s[i], p.x[i], p.z[i], p.theta[i], p.dtheta[i]]);
    write_csv(w, &["s", "x", "z", "theta", "dtheta"], rows)
}

/// Nodal dump of a graph solution over active nodes. `kind` is 1 for interior, 2 for boundary.
pub fn graph_csv<W: Write>(w: W, sol: &GraphSolution) -> io::Result<()> {
    let d = &sol.domain;
    let rows = (0..d.kind.len()).filter(|&k| d.is_active(k)).map(|k| {
        let (x, y) = d.position(k);
        let kind = if d.kind[k] == NodeKind::Interior { 1.0 } else { 2.0 };
        vec![
            (k % d.nx) as f64,
            (k / d.nx) as f64,
            x,
            y,
            kind,
            sol.u[k],
            sol.residual[k],
            sol.mean_curvature[k],
            sol.sigma_norm[k],
            sol.gauss_curvature[k],
        ]
    });
    write_csv(w, &["i", "j", "x", "y", "kind", "u", "residual", "mean_curvature", "sigma_norm", "gauss_curvature"], rows)
}

/// Per-vertex CSV: index, position, normal, geometry flags and any extra named fields.
pub fn surface_csv<W: Write>(w: W, s: &DiscreteSurface, extra: &[(&str, &[f64])]) -> io::Result<()> {
    let mut header = vec![
        "vertex", "x", "y", "z", "nx", "ny", "nz", "interior", "boundary", "mean_curvature", "gauss_curvature",
        "sigma_norm2", "area",
    ];
    header.extend(extra.iter().map(|(n, _)| *n));
    let rows = (0..s.len()).map(|v| {
        let (p, n) = (s.position[v], s.normal[v]);
        let mut row = vec![
            v as f64,
            p.x,
            p.y,
            p.z,
            n.x,
            n.y,
            n.z,
            f64::from(u8::from(s.interior[v])),
            f64::from(u8::from(s.boundary[v])),
            s.mean_curvature[v],
            s.gauss_curvature[v],
            s.sigma_norm2[v],
            s.area[v],
        ];
        row.extend(extra.iter().map(|(_, f)| f[v]));
        row
    });
    write_csv(w, &header, rows)
}

/// Wavefront OBJ of the parametric grid. Revolved surfaces get polygonal caps
/// over the pole holes; normals are written where geometry is known.
pub fn write_obj<W: Write>(mut w: W, s: &DiscreteSurface) -> io::Result<()> {
    for p in &s.position {
        writeln!(w, "v {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z))?;
    }
    let with_normals = s.has_geometry.iter().all(|b| *b);
    if with_normals {
        for n in &s.normal {
            writeln!(w, "vn {} {} {}", fmt_f64(n.x), fmt_f64(n.y), fmt_f64(n.z))?;
        }
    }
    let face = |w: &mut W, idx: &[usize]| -> io::Result<()> {
        let parts: Vec<String> =
            idx.iter().map(|i| if with_normals { format!("{0}//{0}", i + 1) } else { (i + 1).to_string() }).collect();
        writeln!(w, "f {}", parts.join(" "))
    };
    for q in s.quads() {
        face(&mut w, &q)?;
    }
    if let Layout::Revolved { n_s, n_phi, closed, .. } = s.layout {
        // pole caps, oriented consistently with the quads
        let first: Vec<usize> = (0..n_phi).collect();
        face(&mut w, &first)?;
        if closed {
            let last: Vec<usize> = ((n_s - 1) * n_phi..n_s * n_phi).rev().collect();
            face(&mut w, &last)?;
        }
    }
    Ok(())
}

/// One labelled polyline for [`svg_plot`].
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a line.
    pub markers: bool,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Standalone SVG plot of the given series. `equal_aspect` keeps unit lengths equal on both axes.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], equal_aspect: bool) -> String {
    let (w, h, m) = (640.0, 480.0, 56.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| if b - a > 0.0 { (b - a) * 0.05 } else { 0.5 };
    let (px, py) = (pad(x0, x1), pad(y0, y1));
    (x0, x1, y0, y1) = (x0 - px, x1 + px, y0 - py, y1 + py);
    let (mut sx, mut sy) = ((w - 2.0 * m) / (x1 - x0), (h - 2.0 * m) / (y1 - y0));
    if equal_aspect {
        sx = sx.min(sy);
        sy = sx;
    }
    let map = |x: f64, y: f64| (m + (x - x0) * sx, h - m - (y - y0) * sy);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let (bx0, by0) = map(x0, y0);
    let (bx1, by1) = map(x1, y1);
    let _ = writeln!(
        out,
        r##"<rect x="{bx0:.2}" y="{by1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        bx1 - bx0,
        by0 - by1
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (bx0 + bx1) / 2.0, h - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (by0 + by1) / 2.0,
        (by0 + by1) / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", bx0, by0 + 16.0),
        (x1, "end", bx1, by0 + 16.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (v, y) in [(y0, by0), (y1, by1 + 10.0)] {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{v:.4}</text>"#, bx0 - 4.0);
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<(f64, f64)> =
            s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| map(x, y)).collect();
        if s.markers {
            for (x, y) in &coords {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
        } else {
            let pts: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = 44.0 + 16.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, w - m - 120.0, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, w - m - 104.0, escape(s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline thinned to at most `max_points` samples, keeping the endpoints.
pub fn thin(points: &[(f64, f64)], max_points: usize) -> Vec<(f64, f64)> {
    if points.len() <= max_points || max_points < 2 {
        return points.to_vec();
    }
    let stride = (points.len() - 1) as f64 / (max_points - 1) as f64;
    (0..max_points).map(|k| points[((k as f64 * stride).round() as usize).min(points.len() - 1)]).collect()
}
