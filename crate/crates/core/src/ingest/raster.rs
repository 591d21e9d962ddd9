//! Regular-grid predictor layers in a plain-text header + values format:
//!
//! ```text
//! ncols 4
//! nrows 3
//! xllcorner 0
//! yllcorner 0
//! cellsize 500
//! NODATA_value -9999
//! <nrows lines of ncols values, northernmost row first>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    ncols: usize,
    nrows: usize,
    /// Lower-left corner of the grid, meters.
    xll: f64,
    yll: f64,
    cellsize: f64,
    nodata: f64,
    /// Row-major, northernmost row first.
    values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size {cellsize} must be > 0")));
        }
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidParameter("raster must have at least one cell".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::InvalidInput(format!(
                "raster has {} values, expected {}",
                values.len(),
                ncols * nrows
            )));
        }
        Ok(RasterGrid { ncols, nrows, xll, yll, cellsize, nodata, values })
    }

    /// Grid filled by evaluating `f` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(ncols * nrows);
        for top_row in 0..nrows {
            let row = nrows - 1 - top_row;
            for col in 0..ncols {
                let (x, y) = (xll + (col as f64 + 0.5) * cellsize, yll + (row as f64 + 0.5) * cellsize);
                values.push(f(x, y));
            }
        }
        Self::new(ncols, nrows, xll, yll, cellsize, -9999.0, values)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.xll, self.yll)
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    /// `(column, row)` of the cell containing the point, rows counted
    /// northwards from the lower-left corner. A point on an interior cell edge
    /// belongs to the cell with the larger index; the lower/left outer edges
    /// are inside, the upper/right outer edges outside.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let cx = ((x - self.xll) / self.cellsize).floor();
        let cy = ((y - self.yll) / self.cellsize).floor();
        if !(cx >= 0.0 && cy >= 0.0) || cx >= self.ncols as f64 || cy >= self.nrows as f64 {
            return None;
        }
        Some((cx as usize, cy as usize))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (row as f64 + 0.5) * self.cellsize,
        )
    }

    pub fn cell_value(&self, col: usize, row: usize) -> Option<f64> {
        if col >= self.ncols || row >= self.nrows {
            return None;
        }
        let v = self.values[(self.nrows - 1 - row) * self.ncols + col];
        (v != self.nodata && !v.is_nan()).then_some(v)
    }

    /// Value of the cell containing `(x, y)`; `None` outside the grid or on nodata.
    pub fn lookup(&self, x: f64, y: f64) -> Option<f64> {
        let (col, row) = self.cell_of(x, y)?;
        self.cell_value(col, row)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let mut header = |want: &[&str]| -> Result<f64> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(path, format!("missing header `{}`", want[0])))?;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or("").to_ascii_lowercase();
            if !want.contains(&key.as_str()) {
                return Err(Error::parse(path, format!("expected `{}`, found `{line}`", want[0])));
            }
            parts
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::parse(path, format!("bad value in `{line}`")))
        };
        let ncols = header(&["ncols"])?;
        let nrows = header(&["nrows"])?;
        let xll = header(&["xllcorner", "xll"])?;
        let yll = header(&["yllcorner", "yll"])?;
        let cellsize = header(&["cellsize"])?;
        let nodata = header(&["nodata_value", "nodata"])?;
        if ncols.fract() != 0.0 || nrows.fract() != 0.0 || ncols < 1.0 || nrows < 1.0 {
            return Err(Error::parse(path, "ncols/nrows must be positive integers"));
        }
        let values = lines
            .flat_map(str::split_whitespace)
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(path, format!("bad cell value `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ncols as usize, nrows as usize, xll, yll, cellsize, nodata, values)
            .map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            self.ncols, self.nrows, self.xll, self.yll, self.cellsize, self.nodata
        );
        for row in self.values.chunks(self.ncols) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Named predictor layers. Names are unique.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RasterStack {
    layers: Vec<(String, RasterGrid)>,
}

impl RasterStack {
    pub fn new(layers: Vec<(String, RasterGrid)>) -> Result<Self> {
        for (i, (name, _)) in layers.iter().enumerate() {
            if layers[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidInput(format!("duplicate raster layer `{name}`")));
            }
        }
        Ok(RasterStack { layers })
    }

    /// Layer name = file stem.
    pub fn read_files(paths: &[impl AsRef<Path>]) -> Result<Self> {
        let layers = paths
            .iter()
            .map(|p| {
                let p = p.as_ref();
                let name = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| Error::parse(p, "cannot derive layer name"))?
                    .to_string();
                Ok((name, RasterGrid::read(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn get(&self, name: &str) -> Option<&RasterGrid> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.layers.iter().map(|(n, _)| n.as_str())
    }

    pub fn layers(&self) -> &[(String, RasterGrid)] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}
