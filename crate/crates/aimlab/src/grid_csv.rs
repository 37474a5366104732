//! Versioned CSV grids: a `# aim-grid v1` line, then `row,col,value` rows.
//! Non-finite values are written as `inf`, `-inf`, or `NaN`.

use std::fs;
use std::path::Path;

use aimlab_core::mdp::GridLayout;
use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

pub const GRID_HEADER: &str = "# aim-grid v1";
const VERSION_PREFIX: &str = "# aim-grid ";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Render one value per cell, in state order. `values` may be longer than the
/// grid (the absorbing state is ignored).
pub fn grid_to_string(layout: &GridLayout, values: &[f64]) -> anyhow::Result<String> {
    ensure!(
        values.len() >= layout.n_cells(),
        "{} values for {} cells",
        values.len(),
        layout.n_cells()
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    for (s, &value) in values.iter().take(layout.n_cells()).enumerate() {
        let (row, col) = layout.cell(s);
        w.serialize(GridCell { row, col, value })?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    Ok(format!("{GRID_HEADER}\n{body}"))
}

pub fn write_grid(path: &Path, layout: &GridLayout, values: &[f64]) -> anyhow::Result<()> {
    fs::write(path, grid_to_string(layout, values)?)
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn parse_grid(text: &str) -> anyhow::Result<Vec<GridCell>> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let first = first.trim_end_matches('\r');
    if first != GRID_HEADER {
        match first.strip_prefix(VERSION_PREFIX) {
            Some(version) => bail!("unsupported grid version {version:?}, expected v1"),
            None => bail!("missing {GRID_HEADER:?} header line"),
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers()?.clone();
    ensure!(
        headers.iter().eq(["row", "col", "value"]),
        "expected columns row,col,value, found {}",
        headers.iter().collect::<Vec<_>>().join(",")
    );
    r.deserialize()
        .map(|row| row.context("malformed grid row"))
        .collect()
}

pub fn read_grid(path: &Path) -> anyhow::Result<Vec<GridCell>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_grid(&text).with_context(|| format!("in {}", path.display()))
}
