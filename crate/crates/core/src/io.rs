//! CSV and JSON artifact writers and the readers used by the
//! invariant-replay subcommand. Floats are written with a fixed scientific
//! format so identical runs produce byte-identical files.

use crate::error::{Result, SimError};
use crate::fields::MacroState;
use crate::grid::PhaseGrid;
use crate::kinetic::KineticState;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// File name for a field snapshot at time `t`.
pub fn fields_file_name(t: f64) -> String {
    format!("fields_{t:.6}.csv")
}

/// File name for a kinetic snapshot at time `t`.
pub fn kinetic_file_name(t: f64) -> String {
    format!("kinetic_{t:.6}.csv")
}

/// Writes the per-cell macroscopic fields: `x, rho, j, z, S, S_x, S_t`.
pub fn write_fields_csv(path: &Path, xs: &[f64], macro_state: &MacroState) -> Result<()> {
    let mut out = String::from("x,rho,j,z,S,S_x,S_t\n");
    for i in 0..xs.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(xs[i]),
            fmt(macro_state.rho[i]),
            fmt(macro_state.flux[i]),
            fmt(macro_state.z[i]),
            fmt(macro_state.s[i]),
            fmt(macro_state.s_x[i]),
            fmt(macro_state.s_t[i]),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the phase-space density: `x, v, f`.
pub fn write_kinetic_csv(path: &Path, phase: &PhaseGrid, state: &KineticState) -> Result<()> {
    let nv = phase.velocity.len();
    let mut out = String::from("x,v,f\n");
    for cell in 0..phase.space.n_cells {
        let x = phase.space.center(cell);
        for (i, &v) in phase.velocity.nodes().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt(x),
                fmt(v),
                fmt(state.f[cell * nv + i])
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Pretty-printed JSON artifact.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| SimError::Contract(format!("json serialization failed: {e}")))?;
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| SimError::Config(format!("cannot parse {}: {e}", path.display())))
}

/// One parsed field snapshot.
#[derive(Debug, Clone)]
pub struct FieldsSnapshot {
    pub t: f64,
    pub xs: Vec<f64>,
    pub macro_state: MacroState,
}

/// Reads a `fields_<t>.csv` file back into a macro state.
pub fn read_fields_csv(path: &Path, t: f64) -> Result<FieldsSnapshot> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::Config(format!("{}: empty file", path.display())))?;
    if header != "x,rho,j,z,S,S_x,S_t" {
        return Err(SimError::Config(format!(
            "{}: unexpected header '{header}'",
            path.display()
        )));
    }
    let mut xs = Vec::new();
    let mut macro_state = MacroState::resting(0);
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim().parse::<f64>().map_err(|_| {
                    SimError::Config(format!(
                        "{}: bad number on data line {}",
                        path.display(),
                        line_no + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if cols.len() != 7 {
            return Err(SimError::Config(format!(
                "{}: expected 7 columns, got {}",
                path.display(),
                cols.len()
            )));
        }
        xs.push(cols[0]);
        macro_state.rho.push(cols[1]);
        macro_state.flux.push(cols[2]);
        macro_state.z.push(cols[3]);
        macro_state.s.push(cols[4]);
        macro_state.s_x.push(cols[5]);
        macro_state.s_t.push(cols[6]);
    }
    Ok(FieldsSnapshot { t, xs, macro_state })
}

/// Lists the field snapshots in a run directory, sorted by time.
pub fn list_field_snapshots(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stamp) = name
            .strip_prefix("fields_")
            .and_then(|rest| rest.strip_suffix(".csv"))
        {
            if let Ok(t) = stamp.parse::<f64>() {
                found.push((t, entry.path()));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(found)
}
