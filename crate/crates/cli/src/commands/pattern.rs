use std::path::Path;

use hapticnav_core::haptics::{compile_pattern, encode_wire, render, Calibration, HapticPatternId, LinkageGeometry};

use crate::manifest::{create_dir, read_config, write_file, RunManifest};
use crate::{CliError, CliResult, Emit};

fn snake(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_ascii_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(c.to_ascii_lowercase());
    }
    out
}

pub fn run(
    argv: &[String],
    id: &str,
    emit: Emit,
    geometry: Option<&Path>,
    calibration: Option<&Path>,
    tick_hz: f64,
    out: &Path,
) -> CliResult {
    let id: HapticPatternId = id.parse().map_err(CliError::Usage)?;
    let geom: LinkageGeometry = geometry.map(read_config).transpose()?.unwrap_or_default();
    let cal: Calibration = calibration.map(read_config).transpose()?.unwrap_or_default();
    geom.validate(&cal).map_err(|e| CliError::Usage(format!("geometry/calibration: {e}")))?;

    let traj = compile_pattern(id);
    let (bytes, ext) = match emit {
        Emit::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
            (buf, "csv")
        }
        Emit::Wire => {
            let cmds = render(&traj, &geom, &cal, tick_hz).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut text = String::new();
            for c in &cmds {
                text += &encode_wire(c, &geom.servo_limits).map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            (text.into_bytes(), "wire")
        }
    };
    create_dir(out)?;
    let file = out.join(format!("{}.{ext}", snake(id.name())));
    write_file(&file, &bytes)?;
    RunManifest::new("compile-pattern", argv, out).config(geometry).config(calibration).write()?;
    println!("{} ({} ms) -> {}", id.name(), traj.duration_ms, file.display());
    Ok(())
}
