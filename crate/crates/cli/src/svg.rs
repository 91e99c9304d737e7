//! Static SVG plot of the state plane: grid kernel cells, the closed-form
//! kernel region and an optional trajectory.

use std::fmt::Write as _;

use viability::kernel_grid::KernelGrid;
use viability::State;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Default)]
pub struct Plot<'a> {
    /// Plot window `(y_lo, y_hi, z_lo, z_hi)`; derived from the content when
    /// absent.
    pub window: Option<(f64, f64, f64, f64)>,
    pub raster: Option<&'a KernelGrid>,
    /// Closed-form kernel outline, already closed along the floors.
    pub region: Vec<State>,
    pub trajectory: Vec<State>,
    /// `(y_min, z_min)` dashed guide lines.
    pub floors: Option<(f64, f64)>,
}

impl Plot<'_> {
    fn window(&self) -> (f64, f64, f64, f64) {
        if let Some(w) = self.window {
            return w;
        }
        if let Some(g) = self.raster {
            return (g.spec.y_lo, g.spec.y_hi, g.spec.z_lo, g.spec.z_hi);
        }
        let pts = self.region.iter().chain(&self.trajectory);
        let (mut y0, mut y1, mut z0, mut z1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in pts.filter(|p| p.is_finite()) {
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
            z0 = z0.min(p.z);
            z1 = z1.max(p.z);
        }
        if !(y0 < y1) {
            (y0, y1) = (0.0, y1.max(0.0) + 1.0);
        }
        if !(z0 < z1) {
            (z0, z1) = (0.0, z1.max(0.0) + 1.0);
        }
        let (py, pz) = (0.05 * (y1 - y0), 0.05 * (z1 - z0));
        (y0 - py, y1 + py, z0 - pz, z1 + pz)
    }

    pub fn render(&self) -> String {
        let (y_lo, y_hi, z_lo, z_hi) = self.window();
        let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let px = |y: f64| MARGIN + (y - y_lo) / (y_hi - y_lo) * pw;
        let py = |z: f64| HEIGHT - MARGIN - (z - z_lo) / (z_hi - z_lo) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}"/></clipPath>"#
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);

        if let Some(g) = self.raster {
            // One rectangle per vertical run of member cells.
            let sp = &g.spec;
            let (dy, dz) = (sp.dy(), sp.dz());
            let _ = writeln!(s, r##"<g fill="#9ecae1" stroke="none">"##);
            for i in 0..sp.ny {
                let mut j = 0;
                while j < sp.nz {
                    if !g.is_member(i, j) {
                        j += 1;
                        continue;
                    }
                    let start = j;
                    while j < sp.nz && g.is_member(i, j) {
                        j += 1;
                    }
                    let y0 = sp.y_lo + i as f64 * dy;
                    let (z0, z1) = (sp.z_lo + start as f64 * dz, sp.z_lo + j as f64 * dz);
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                        px(y0),
                        py(z1),
                        px(y0 + dy) - px(y0),
                        py(z0) - py(z1)
                    );
                }
            }
            let _ = writeln!(s, "</g>");
        }

        if !self.region.is_empty() {
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#808080" fill-opacity="0.45" stroke="#404040" stroke-width="1.5"/>"##,
                points(&self.region, px, py)
            );
        }

        if let Some((ym, zm)) = self.floors {
            let _ = writeln!(
                s,
                r##"<g stroke="#404040" stroke-dasharray="4 3"><line x1="{:.2}" y1="{MARGIN}" x2="{:.2}" y2="{:.2}"/><line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/></g>"##,
                px(ym),
                px(ym),
                HEIGHT - MARGIN,
                py(zm),
                WIDTH - MARGIN,
                py(zm)
            );
        }

        let traj: Vec<State> = self
            .trajectory
            .iter()
            .copied()
            .filter(State::is_finite)
            .collect();
        if !traj.is_empty() {
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
                points(&traj, px, py)
            );
            let _ = writeln!(s, r##"<g fill="#d62728">"##);
            for p in &traj {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#,
                    px(p.y),
                    py(p.z)
                );
            }
            let _ = writeln!(s, "</g>");
        }
        let _ = writeln!(s, "</g>");

        // Frame and axis labels.
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let base = HEIGHT - MARGIN;
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{}" text-anchor="start">{}</text>"#,
            base + 16.0,
            label(y_lo)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            base + 16.0,
            label(y_hi)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{base}" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            label(z_lo)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            MARGIN + 10.0,
            label(z_hi)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">prey biomass y (t)</text>"#,
            WIDTH / 2.0,
            HEIGHT - 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">predator biomass z (t)</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

fn points(pts: &[State], px: impl Fn(f64) -> f64, py: impl Fn(f64) -> f64) -> String {
    pts.iter()
        .map(|p| format!("{:.2},{:.2}", px(p.y), py(p.z)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn label(x: f64) -> String {
    crate::format::sig6(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_region_and_trajectory() {
        let plot = Plot {
            region: vec![
                State::new(1.0, 1.0),
                State::new(1.0, 3.0),
                State::new(4.0, 1.0),
            ],
            trajectory: vec![
                State::new(2.0, 2.0),
                State::new(f64::NAN, 1.0),
                State::new(3.0, 1.5),
            ],
            floors: Some((1.0, 1.0)),
            ..Plot::default()
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN"));
    }
}
