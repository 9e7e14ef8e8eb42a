//! CSV/JSON emission. Numbers are written with 17 significant digits so
//! reruns of the same configuration are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{FieldData, RunResult, STABILITY_CRITERION};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_fields_csv(path: &Path, x: &[f64], t: &[f64], u: &[f64], rho: &[f64]) -> Result<()> {
    let mut out = String::from("x,T,U,rho\n");
    for i in 0..x.len() {
        out.push_str(&fmt(x[i]));
        out.push(',');
        out.push_str(&fmt(t[i]));
        out.push(',');
        out.push_str(&fmt(u[i]));
        out.push(',');
        out.push_str(&fmt(rho[i]));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes fields.csv, diagnostics.csv, meta.json and one
/// fields_t<time>.csv per snapshot into `out_dir`.
pub fn write_outputs(result: &RunResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_fields_csv(
        &out_dir.join("fields.csv"),
        &result.x,
        &result.temperature,
        &result.u,
        &result.rho,
    )?;
    for snap in &result.snapshots {
        let name = format!("fields_t{:.6}.csv", snap.time);
        write_fields_csv(&out_dir.join(name), &result.x, &snap.temperature, &snap.u, &snap.rho)?;
    }

    let mut diag = String::from("step,t,newton_max,energy_residual_max,minT,maxT,stable\n");
    for row in &result.diagnostics {
        diag.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.step,
            fmt(row.time),
            row.diag.newton_iterations_max,
            fmt(row.diag.energy_residual_max),
            fmt(row.diag.min_temperature),
            fmt(row.diag.max_temperature),
            row.diag.stable as u8
        ));
    }
    fs::write(out_dir.join("diagnostics.csv"), diag)?;

    let meta = serde_json::json!({
        "config": result.config_echo,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_seconds": result.wall.as_secs_f64(),
        "stable": result.stable,
        "stability_criterion": STABILITY_CRITERION,
    });
    let mut f = fs::File::create(out_dir.join("meta.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&meta).expect("serializable meta"))?;
    Ok(())
}

/// Reads a fields.csv back; the inverse of `write_outputs` for the compare
/// subcommand.
pub fn read_fields_csv(path: &Path) -> Result<FieldData> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{}: empty file", path.display())))?;
    if header.trim() != "x,T,U,rho" {
        return Err(Error::InvalidArgument(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    let mut data = FieldData { x: vec![], temperature: vec![], u: vec![], rho: vec![] };
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "{}: line {} has {} columns",
                path.display(),
                ln + 2,
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
        };
        data.x.push(parse(cols[0])?);
        data.temperature.push(parse(cols[1])?);
        data.u.push(parse(cols[2])?);
        data.rho.push(parse(cols[3])?);
    }
    Ok(data)
}
