//! Sampled fields on a regular lattice with tensor-product cubic
//! (Catmull–Rom) interpolation.
//!
//! File format: the first line is a JSON header
//! `{"n":…, "shape":[…], "origin":[…], "spacing":[…]}`, followed by CSV rows
//! `x_1,…,x_n,u` in row-major lattice order (last axis fastest).

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Point, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl GridHeader {
    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || self.shape.len() != n || self.origin.len() != n || self.spacing.len() != n {
            return Err(Error::Parse("grid header needs n >= 1 and shape/origin/spacing of length n".into()));
        }
        if self.shape.iter().any(|&s| s < 4) {
            return Err(Error::Parse("cubic interpolation needs at least 4 nodes per axis".into()));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) || self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Parse("grid spacing must be positive and origin finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice point with multi-index `idx`.
    pub fn node(&self, idx: &[usize]) -> Point {
        Point::from_iterator(self.n, (0..self.n).map(|d| self.origin[d] + self.spacing[d] * idx[d] as f64))
    }

    fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for d in (0..self.n).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n];
        for d in (0..self.n.saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.shape[d + 1];
        }
        s
    }
}

/// Lattice samples of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    header: GridHeader,
    values: Vec<f64>,
    strides: Vec<usize>,
}

/// Catmull–Rom weights for nodes `i−1, i, i+1, i+2` at fraction `s ∈ [0, 1)`.
fn cubic_weights(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        0.5 * (-s3 + 2.0 * s2 - s),
        0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
        0.5 * (-3.0 * s3 + 4.0 * s2 + s),
        0.5 * (s3 - s2),
    ]
}

impl GridField {
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        header.validate()?;
        if values.len() != header.len() {
            return Err(Error::Parse(format!("grid expects {} values, found {}", header.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let strides = header.strides();
        Ok(GridField { header, values, strides })
    }

    /// Sample `f` on the lattice.
    pub fn from_fn(header: GridHeader, f: impl Fn(&Point) -> f64) -> Result<Self> {
        header.validate()?;
        let values = (0..header.len()).map(|i| f(&header.node(&header.unravel(i)))).collect();
        Self::new(header, values)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::Parse(e.to_string()))?;
        let header: GridHeader =
            serde_json::from_str(first.trim()).map_err(|e| Error::Parse(format!("grid header: {e}")))?;
        header.validate()?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut values = Vec::with_capacity(header.len());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.n + 1 {
                return Err(Error::Parse(format!("grid row {row} has {} columns, expected {}", rec.len(), header.n + 1)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("grid row {row}: {e}")));
            if row < header.len() {
                let node = header.node(&header.unravel(row));
                for d in 0..header.n {
                    let x = parse(&rec[d])?;
                    if (x - node[d]).abs() > 1e-9 * (1.0 + node[d].abs()) {
                        return Err(Error::Parse(format!("grid row {row} is not at lattice node {node:?}")));
                    }
                }
            }
            values.push(parse(&rec[header.n])?);
        }
        Self::new(header, values)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::read(file)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Parse(e.to_string());
        writeln!(w, "{}", serde_json::to_string(&self.header)?).map_err(io)?;
        for (i, v) in self.values.iter().enumerate() {
            let node = self.header.node(&self.header.unravel(i));
            let mut line: Vec<String> = node.iter().map(|x| format!("{x:.16e}")).collect();
            line.push(format!("{v:.16e}"));
            writeln!(w, "{}", line.join(",")).map_err(io)?;
        }
        Ok(())
    }

    /// Cell index and fraction along each axis, if the 4-point stencil fits.
    fn locate(&self, x: &Point) -> Option<(Vec<usize>, Vec<f64>)> {
        let h = &self.header;
        let mut base = Vec::with_capacity(h.n);
        let mut frac = Vec::with_capacity(h.n);
        for d in 0..h.n {
            let p = (x[d] - h.origin[d]) / h.spacing[d];
            if !p.is_finite() {
                return None;
            }
            let i = p.floor();
            if i < 1.0 || i + 2.0 > (h.shape[d] - 1) as f64 {
                // allow the last cell edge exactly
                if !(i + 2.0 == h.shape[d] as f64 && p == i) {
                    return None;
                }
                base.push(i as usize - 1);
                frac.push(1.0);
                continue;
            }
            base.push(i as usize);
            frac.push(p - i);
        }
        Some((base, frac))
    }
}

impl ScalarField for GridField {
    fn dim(&self) -> usize {
        self.header.n
    }

    fn value(&self, x: &Point) -> f64 {
        let Some((base, frac)) = self.locate(x) else {
            return f64::NAN;
        };
        let n = self.header.n;
        let weights: Vec<[f64; 4]> = frac.iter().map(|&s| cubic_weights(s)).collect();
        let mut total = 0.0;
        let combos = 4usize.pow(n as u32);
        for c in 0..combos {
            let mut w = 1.0;
            let mut flat = 0;
            let mut rem = c;
            for d in 0..n {
                let o = rem % 4;
                rem /= 4;
                w *= weights[d][o];
                flat += (base[d] + o - 1) * self.strides[d];
            }
            total += w * self.values[flat];
        }
        total
    }

    fn admissible(&self, x: &Point) -> bool {
        x.len() == self.header.n && self.locate(x).is_some()
    }
}
