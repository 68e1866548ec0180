//! Top-down SVG of one trial.

use std::fmt::Write;

use hapticnav_core::navigator::{Path, PoseSample};
use hapticnav_core::sim::Environment;

const PX_PER_M: f64 = 100.0;
const MARGIN_PX: f64 = 20.0;

pub fn render_svg(path: &Path, env: &Environment, trajectory: &[PoseSample], pos_tol_m: f64) -> String {
    let (w, d) = (env.room.width_m, env.room.depth_m);
    let sx = |x: f64| MARGIN_PX + x * PX_PER_M;
    let sy = |y: f64| MARGIN_PX + (d - y) * PX_PER_M;
    let pts = |ps: &mut dyn Iterator<Item = [f64; 2]>| {
        ps.map(|[x, y]| format!("{:.1},{:.1}", sx(x), sy(y))).collect::<Vec<_>>().join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}">"#,
        w * PX_PER_M + 2.0 * MARGIN_PX,
        d * PX_PER_M + 2.0 * MARGIN_PX
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#fafafa" stroke="#333"/>"##,
        sx(0.0),
        sy(d),
        w * PX_PER_M,
        d * PX_PER_M
    );
    let route = pts(&mut path.waypoints.iter().copied());
    let _ = writeln!(
        s,
        r##"<polyline points="{route}" fill="none" stroke="#4caf50" stroke-opacity="0.25" stroke-width="{:.1}" stroke-linejoin="round"/>"##,
        2.0 * pos_tol_m * PX_PER_M
    );
    let _ = writeln!(s, r##"<polyline points="{route}" fill="none" stroke="#4caf50" stroke-dasharray="4 4"/>"##);
    for (i, [x, y]) in path.waypoints.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="6" fill="#4caf50"/><text x="{:.1}" y="{:.1}" font-size="12">{i}</text>"##,
            sx(*x),
            sy(*y),
            sx(*x) + 8.0,
            sy(*y) - 8.0
        );
    }
    for o in env.obstacles_at(0.0) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="{:.1}" fill="#e57373"><title>{}</title></circle>"##,
            sx(o.x),
            sy(o.y),
            o.radius_m * PX_PER_M,
            o.label
        );
    }
    let walked = pts(&mut trajectory.iter().map(|p| [p.pose.x_m, p.pose.y_m]));
    let _ = writeln!(s, r##"<polyline points="{walked}" fill="none" stroke="#1565c0" stroke-width="2"/>"##);
    s.push_str("</svg>\n");
    s
}
