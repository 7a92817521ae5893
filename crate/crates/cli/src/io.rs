//! CSV and JSON files written and read by the commands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};

use nhsw::run::{GaugeRecord, MaskRecord, Snapshot};
use nhsw::Grid;

pub const GAUGES_FILE: &str = "gauges.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.csv";
pub const MASKS_FILE: &str = "masks.csv";
pub const REPORT_FILE: &str = "report.json";
pub const GLOBAL_REPORT_FILE: &str = "report_global.json";

fn create(path: &Path, echo: &str) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config: {echo}")?;
    Ok(w)
}

pub fn gauge_header(positions: &[f64]) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(positions.iter().map(|x| format!("eta@{x}")))
        .collect()
}

pub fn write_gauges(path: &Path, echo: &str, g: &GaugeRecord, failure: Option<&str>) -> anyhow::Result<()> {
    let mut out = create(path, echo)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(gauge_header(&g.positions))?;
        for (k, t) in g.times.iter().enumerate() {
            let row = std::iter::once(t.to_string()).chain(g.eta.iter().map(|s| s[k].to_string()));
            w.write_record(row)?;
        }
        w.flush()?;
    }
    if let Some(msg) = failure {
        writeln!(out, "# status: failed: {msg}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_snapshot(path: &Path, echo: &str, grid: &Grid, s: &Snapshot, failure: Option<&str>) -> anyhow::Result<()> {
    let mut out = create(path, echo)?;
    writeln!(out, "# time: requested {} actual {}", s.requested_time, s.state.time)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["x", "h", "hu", "hw", "p_nh", "flagged"])?;
        let np = grid.np();
        let (h, hu, hw, p) = (s.state.h.values(), s.state.hu.values(), s.state.hw.values(), s.pressure.values());
        for (i, x) in grid.nodes().iter().enumerate() {
            let flagged = s.flags.get(i / np).copied().unwrap_or(false);
            w.write_record([
                x.to_string(),
                h[i].to_string(),
                hu[i].to_string(),
                hw[i].to_string(),
                p[i].to_string(),
                u8::from(flagged).to_string(),
            ])?;
        }
        w.flush()?;
    }
    if let Some(msg) = failure {
        writeln!(out, "# status: failed: {msg}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_masks(path: &Path, echo: &str, masks: &[MaskRecord]) -> anyhow::Result<()> {
    let mut out = create(path, echo)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["step", "t", "range_start", "range_end"])?;
        for m in masks {
            for r in &m.ranges {
                w.write_record([m.step.to_string(), m.time.to_string(), r.start.to_string(), r.end.to_string()])?;
            }
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Header and numeric columns of a CSV file, skipping `#` comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }
}

pub fn read_table(path: &Path) -> anyhow::Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), line + 1))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .with_context(|| format!("{}: row {}: '{field}' is not a number", path.display(), line + 1))?;
            columns[c].push(v);
        }
    }
    Ok(Table { header, columns })
}

/// A two-column `(abscissa, eta)` measurement file.
pub fn read_pairs(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let t = read_table(path)?;
    if t.columns.len() != 2 {
        bail!("{} must have exactly two columns, found {}", path.display(), t.columns.len());
    }
    Ok((t.columns[0].clone(), t.columns[1].clone()))
}
