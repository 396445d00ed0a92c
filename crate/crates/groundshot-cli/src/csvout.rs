//! Deterministic CSV writers. Floats go through a fixed scientific format
//! so repeated runs produce byte-identical files.

use std::fs::File;
use std::path::Path;

use groundshot::GroundStateBracket;

use crate::report::{tag_label, SweepRowJson};

/// Fixed-width scientific rendering used by every CSV cell.
pub fn sci(value: f64) -> String {
    format!("{value:.12e}")
}

/// One row per bracket: index, endpoints, midpoint, width.
pub fn write_brackets_csv(path: &Path, brackets: &[GroundStateBracket]) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    writer.write_record(["index", "alpha_lo", "alpha_hi", "midpoint", "width"])?;
    for (index, bracket) in brackets.iter().enumerate() {
        writer.write_record([
            index.to_string(),
            sci(bracket.alpha_lo),
            sci(bracket.alpha_hi),
            sci(bracket.midpoint()),
            sci(bracket.width()),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One row per phase-map point; failed points carry the error text inline
/// and an empty tag.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRowJson]) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    writer.write_record(["eps", "amplitude", "amplitude_sq", "probe_alpha", "tag", "error"])?;
    for row in rows {
        writer.write_record([
            sci(row.eps),
            sci(row.amplitude),
            sci(row.amplitude_sq),
            sci(row.probe_alpha),
            row.tag.clone(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One row per classified scan point.
pub fn write_scan_csv(
    path: &Path,
    points: &[(f64, groundshot::Tag)],
) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    writer.write_record(["alpha", "tag"])?;
    for (alpha, tag) in points {
        writer.write_record([sci(*alpha), tag_label(*tag).to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
