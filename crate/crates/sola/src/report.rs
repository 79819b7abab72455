//! Plain-text outputs: monitor CSV, field dumps (row-major per slice with a
//! geometry header) and JSON summaries. Byte-determinism matters here:
//! identical runs must produce identical CSV bytes, so nothing time- or
//! pointer-dependent is written.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimates::EstimateReport;
use crate::fields::{GriddedData, ScalarField};
use crate::grid::{Grid, GridFunction};

pub fn write_monitor_csv(path: &Path, rows: &[EstimateReport]) -> Result<()> {
    let mut out = String::from("monitor,level,params,value,bound,verdict\n");
    for r in rows {
        let bound = r.bound.map(|b| format!("{b:.17e}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.17e},{},{}\n",
            r.monitor, r.level, r.params, r.value, bound, r.verdict
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Field dump: geometry header line, then one row per slice
/// (`slice,time,v0,v1,...`, nodes in row-major order).
pub fn write_field_csv(path: &Path, grid: &Grid, gf: &GridFunction) -> Result<()> {
    let mut out = String::new();
    out.push_str("dim,nodes_per_axis,time_steps,horizon,box_min,box_max\n");
    out.push_str(&format!(
        "{},{},{},{:.17e},{:.17e},{:.17e}\n",
        grid.dim,
        grid.nodes_per_axis,
        grid.time_steps,
        grid.horizon,
        grid.domain.min[0],
        grid.domain.max[0]
    ));
    for m in 0..gf.slices {
        out.push_str(&format!("{},{:.17e}", m, grid.time(m)));
        for v in gf.slice(m) {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a field dump back as a gridded scalar field.
pub fn read_field_csv(path: &Path) -> Result<ScalarField> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let _header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty field file", path.display())))??;
    let geom = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: missing geometry row", path.display())))??;
    let parts: Vec<&str> = geom.split(',').collect();
    if parts.len() < 6 {
        return Err(Error::Config(format!(
            "{}: malformed geometry row",
            path.display()
        )));
    }
    let parse_usize = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad integer `{s}` in {}", path.display())))
    };
    let parse_f64 = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad number `{s}` in {}", path.display())))
    };
    let dim = parse_usize(parts[0])?;
    let nodes = parse_usize(parts[1])?;
    let steps = parse_usize(parts[2])?;
    let horizon = parse_f64(parts[3])?;
    let lo = parse_f64(parts[4])?;
    let hi = parse_f64(parts[5])?;
    let node_count = nodes.pow(dim as u32);
    let mut data = vec![0.0; node_count * (steps + 1)];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let m: usize = parse_usize(it.next().unwrap_or(""))?;
        let _t = it.next();
        for (i, tok) in it.enumerate() {
            if i >= node_count || m > steps {
                return Err(Error::Config(format!(
                    "{}: slice row overflow",
                    path.display()
                )));
            }
            data[m * node_count + i] = parse_f64(tok)?;
        }
    }
    Ok(ScalarField::Gridded(Arc::new(GriddedData {
        dim,
        nodes_per_axis: nodes,
        time_steps: steps,
        horizon,
        min: [lo, lo],
        max: [hi, hi],
        data,
    })))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// One printed line per monitor verdict, study-sized summaries go to JSON.
pub fn print_verdict_line(label: &str, pass: bool, detail: &str) {
    println!(
        "{}: {} - {}",
        label,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
}
