//! Gridded samples: block maxima on the physical scale and pseudo-uniform
//! values, plus the `EVTGRID` binary format and small-grid CSV.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &str = "EVTGRID v1";

/// `n` observations of an `H x W` grid, stored row-major over
/// (observation, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    n: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GridData {
    pub fn new(n: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty grid {height}x{width}")));
        }
        if values.len() != n * height * width {
            return Err(Error::Shape(format!(
                "{} values for {n} x {height} x {width}",
                values.len()
            )));
        }
        Ok(Self {
            n,
            height,
            width,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn sites(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, obs: usize, row: usize, col: usize) -> f64 {
        self.values[(obs * self.height + row) * self.width + col]
    }

    pub fn observation(&self, obs: usize) -> &[f64] {
        let s = self.sites();
        &self.values[obs * s..(obs + 1) * s]
    }

    pub fn site_series(&self, row: usize, col: usize) -> Vec<f64> {
        let s = self.sites();
        let k = row * self.width + col;
        (0..self.n).map(|i| self.values[i * s + k]).collect()
    }

    /// Rebuild from per-site series given in row-major site order.
    pub fn from_site_series(n: usize, height: usize, width: usize, series: &[Vec<f64>]) -> Result<Self> {
        if series.len() != height * width || series.iter().any(|s| s.len() != n) {
            return Err(Error::Shape("site series do not match grid".into()));
        }
        let sites = height * width;
        let mut values = vec![0.0; n * sites];
        for (k, s) in series.iter().enumerate() {
            for (i, v) in s.iter().enumerate() {
                values[i * sites + k] = *v;
            }
        }
        Self::new(n, height, width, values)
    }

    /// Observations `range` as a new grid.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.n || range.start > range.end {
            return Err(Error::Shape(format!("rows {range:?} of {}", self.n)));
        }
        let s = self.sites();
        Self::new(
            range.len(),
            self.height,
            self.width,
            self.values[range.start * s..range.end * s].to_vec(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximaGrid {
    data: GridData,
    block_length: usize,
    variable: String,
}

impl MaximaGrid {
    pub fn new(data: GridData, block_length: usize, variable: impl Into<String>) -> Result<Self> {
        if data.n() < 2 {
            return Err(Error::Shape(format!("maxima grid needs n >= 2, got {}", data.n())));
        }
        if data.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("maxima grid contains non-finite values".into()));
        }
        let variable = variable.into();
        validate_label(&variable)?;
        Ok(Self {
            data,
            block_length,
            variable,
        })
    }

    pub fn data(&self) -> &GridData {
        &self.data
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn site_series(&self, row: usize, col: usize) -> Vec<f64> {
        self.data.site_series(row, col)
    }

    /// First `n_train` observations and the remainder.
    pub fn split(&self, n_train: usize) -> Result<(MaximaGrid, MaximaGrid)> {
        let n = self.n();
        if n_train < 2 || n - n_train.min(n) < 2 {
            return Err(Error::Shape(format!(
                "cannot split {n} observations into {n_train} train and at least 2 test"
            )));
        }
        let train = MaximaGrid::new(self.data.slice(0..n_train)?, self.block_length, &self.variable)?;
        let test = MaximaGrid::new(self.data.slice(n_train..n)?, self.block_length, &self.variable)?;
        Ok((train, test))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_grid(w, &self.data, &self.variable, self.block_length)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (data, variable, k) = read_grid(r)?;
        Self::new(data, k, variable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGrid {
    data: GridData,
}

impl PseudoGrid {
    pub fn new(data: GridData) -> Result<Self> {
        if let Some(v) = data.values().iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::Domain(format!("pseudo-observation {v} outside (0,1)")));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &GridData {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn site_series(&self, row: usize, col: usize) -> Vec<f64> {
        self.data.site_series(row, col)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_grid(w, &self.data, PSEUDO_LABEL, 0)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let (data, _, _) = read_grid(r)?;
        Self::new(data)
    }
}

/// Variable label written for pseudo-observation grids.
pub const PSEUDO_LABEL: &str = "pseudo";

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) {
        return Err(Error::Format(format!(
            "variable label {label:?} must be non-empty without commas or newlines"
        )));
    }
    Ok(())
}

fn write_grid<W: Write>(mut w: W, data: &GridData, variable: &str, k: usize) -> Result<()> {
    let (h, wd) = data.shape();
    writeln!(w, "{MAGIC}, {}, {h}, {wd}, {variable}, {k}", data.n())?;
    let mut buf = Vec::with_capacity(data.values().len() * 8);
    for v in data.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_grid<R: Read>(r: R) -> Result<(GridData, String, usize)> {
    let mut r = std::io::BufReader::new(r);
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    let header = String::from_utf8(header).map_err(|_| Error::Format("grid header is not UTF-8".into()))?;
    let fields: Vec<&str> = header.trim_end().split(',').map(str::trim).collect();
    if fields.len() != 6 || fields[0] != MAGIC {
        return Err(Error::Format(format!("not an {MAGIC} file (header {:?})", header.trim_end())));
    }
    let num = |i: usize, what: &str| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| Error::Format(format!("bad {what} {:?} in grid header", fields[i])))
    };
    let n = num(1, "n")?;
    let h = num(2, "height")?;
    let w = num(3, "width")?;
    let k = num(5, "block length")?;
    let count = n
        .checked_mul(h)
        .and_then(|x| x.checked_mul(w))
        .ok_or_else(|| Error::Format("grid extents overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "grid body has {} bytes, expected {}",
            bytes.len(),
            count * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((GridData::new(n, h, w, values)?, fields[4].to_string(), k))
}

/// CSV with columns `obs,row,col,value`.
pub fn write_grid_csv<W: Write>(mut w: W, data: &GridData) -> Result<()> {
    let (h, wd) = data.shape();
    writeln!(w, "obs,row,col,value")?;
    for i in 0..data.n() {
        for r in 0..h {
            for c in 0..wd {
                writeln!(w, "{i},{r},{c},{}", data.get(i, r, c))?;
            }
        }
    }
    Ok(())
}

/// Reads the `obs,row,col,value` layout; every cell must appear exactly once.
pub fn read_grid_csv<R: Read>(r: R) -> Result<GridData> {
    let mut rows = Vec::new();
    let reader = std::io::BufReader::new(r);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "obs,row,col,value" {
                return Err(Error::Format(format!("unexpected CSV header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("line {}: malformed row {line:?}", lineno + 1));
        if f.len() != 4 {
            return Err(bad());
        }
        let i: usize = f[0].trim().parse().map_err(|_| bad())?;
        let r: usize = f[1].trim().parse().map_err(|_| bad())?;
        let c: usize = f[2].trim().parse().map_err(|_| bad())?;
        let v: f64 = f[3].trim().parse().map_err(|_| bad())?;
        rows.push((i, r, c, v));
    }
    let n = rows.iter().map(|x| x.0 + 1).max().unwrap_or(0);
    let h = rows.iter().map(|x| x.1 + 1).max().unwrap_or(0);
    let w = rows.iter().map(|x| x.2 + 1).max().unwrap_or(0);
    if rows.len() != n * h * w {
        return Err(Error::Format(format!("{} cells for a {n}x{h}x{w} grid", rows.len())));
    }
    let mut values = vec![f64::NAN; n * h * w];
    let mut seen = vec![false; n * h * w];
    for (i, r, c, v) in rows {
        let k = (i * h + r) * w + c;
        if seen[k] {
            return Err(Error::Format(format!("duplicate cell ({i},{r},{c})")));
        }
        seen[k] = true;
        values[k] = v;
    }
    GridData::new(n, h, w, values)
}
