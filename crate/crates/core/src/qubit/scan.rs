//! Robustness scans over systematic-error grids.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::control::{ControlField, ErrorPair, PulseSequence};
use super::propagate::final_population;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub err: ErrorPair,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    /// Detuning bound used to express delta_delta in relative units.
    pub delta_max: f64,
    pub rows: Vec<ScanRow>,
}

pub const SCAN_CSV_HEADER: &str = "delta_err_rel,omega_err_rel,population";

impl ScanTable {
    pub fn min_population(&self) -> f64 {
        self.rows.iter().map(|r| r.population).fold(f64::INFINITY, f64::min)
    }

    /// CSV with full double precision; delta offsets relative to delta_max.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SCAN_CSV_HEADER}")?;
        for row in &self.rows {
            let rel = if self.delta_max > 0.0 { row.err.delta_delta / self.delta_max } else { 0.0 };
            writeln!(out, "{},{},{}", fmt_f64(rel), fmt_f64(row.err.delta_omega), fmt_f64(row.population))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Final |1> population of `pulse` for every grid point, in grid order.
pub fn scan_robustness(pulse: &PulseSequence, grid: &[ErrorPair]) -> Result<ScanTable> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("robustness grid is empty".into()));
    }
    let rows = grid
        .par_iter()
        .map(|err| final_population(pulse, err).map(|population| ScanRow { err: *err, population }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable { delta_max: pulse.field().delta_max(), rows })
}

/// One axis of a scan grid: `count` evenly spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("grid axis needs count >= 1".into()));
        }
        if !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::InvalidParameter(format!("invalid grid range {min}:{max}")));
        }
        Ok(Self { min, max, count })
    }

    pub fn single(value: f64) -> Self {
        Self { min: value, max: value, count: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    /// Parses `min:max:count`, or a single number for a one-point axis.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number {p:?} in grid {s:?}")));
        match parts.as_slice() {
            [v] => Ok(Self::single(num(v)?)),
            [lo, hi, n] => {
                let count = n.parse::<usize>().map_err(|_| Error::InvalidParameter(format!("bad count {n:?} in grid {s:?}")))?;
                Self::new(num(lo)?, num(hi)?, count)
            }
            _ => Err(Error::InvalidParameter(format!("grid must be min:max:count, got {s:?}"))),
        }
    }
}

/// Cartesian grid in relative units (delta_delta / delta_max, delta_omega);
/// delta axis outermost.
pub fn relative_grid(field: &ControlField, delta_axis: &GridAxis, omega_axis: &GridAxis) -> Vec<ErrorPair> {
    let omegas = omega_axis.values();
    delta_axis
        .values()
        .into_iter()
        .flat_map(|d| omegas.iter().map(move |&w| ErrorPair::relative(field, d, w)))
        .collect()
}
