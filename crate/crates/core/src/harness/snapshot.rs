//! Deterministic SVG rendering of a world state.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::scenario::Scenario;
use crate::world::WorldState;

const PX_PER_M: f64 = 100.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub fn snapshot_svg(scenario: &Scenario, state: &WorldState) -> String {
    let ws = scenario.workspace;
    let (w, h) = (ws.width() * PX_PER_M, ws.height() * PX_PER_M);
    let x = |v: f64| (v - ws.min.x) * PX_PER_M;
    let y = |v: f64| (ws.max.y - v) * PX_PER_M;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#ffffff" stroke="#000000"/>"##);
    for r in &scenario.regions {
        let _ = writeln!(
            out,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#f2f2f2" stroke="#888888"><title>{}</title></rect>"##,
            x(r.rect.min.x),
            y(r.rect.max.y),
            r.rect.width() * PX_PER_M,
            r.rect.height() * PX_PER_M,
            r.name
        );
        if let Some(front) = r.front {
            let (a, b) = match front {
                crate::scenario::FrontEdge::MinX => ((r.rect.min.x, r.rect.min.y), (r.rect.min.x, r.rect.max.y)),
                crate::scenario::FrontEdge::MaxX => ((r.rect.max.x, r.rect.min.y), (r.rect.max.x, r.rect.max.y)),
                crate::scenario::FrontEdge::MinY => ((r.rect.min.x, r.rect.min.y), (r.rect.max.x, r.rect.min.y)),
                crate::scenario::FrontEdge::MaxY => ((r.rect.min.x, r.rect.max.y), (r.rect.max.x, r.rect.max.y)),
            };
            let _ = writeln!(
                out,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#2ca02c" stroke-width="3"/>"##,
                x(a.0),
                y(a.1),
                x(b.0),
                y(b.1)
            );
        }
    }
    let home = scenario.home;
    let _ = writeln!(
        out,
        r##"<path d="M {:.3} {:.3} l 10 10 m -10 0 l 10 -10" transform="translate(-5 -5)" stroke="#000000"/>"##,
        x(home.x),
        y(home.y)
    );
    for o in state.present_objects() {
        let spec = scenario.object(o);
        let p = state.pose(o);
        let _ = writeln!(
            out,
            r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{}" stroke="#222222"><title>{}</title></circle>"##,
            x(p.x),
            y(p.y),
            spec.radius * PX_PER_M,
            PALETTE[spec.class % PALETTE.len()],
            spec.name
        );
    }
    let r = state.robot;
    let _ = writeln!(
        out,
        r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="#000000" stroke-dasharray="4 3"/>"##,
        x(r.x),
        y(r.y),
        scenario.robot_radius * PX_PER_M
    );
    out.push_str("</svg>\n");
    out
}

pub fn render_snapshot(scenario: &Scenario, state: &WorldState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, snapshot_svg(scenario, state))?;
    Ok(())
}
