//! Pulse and config files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::qubit::{ControlField, PulseSequence};

/// On-disk pulse: every frequency in rad/s, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseFile {
    pub omega_rad_per_s: f64,
    pub delta_max_rad_per_s: f64,
    pub dt_s: f64,
    pub deltas_rad_per_s: Vec<f64>,
    #[serde(default)]
    pub meta: Map<String, Value>,
}

impl PulseFile {
    pub fn from_pulse(pulse: &PulseSequence, meta: Map<String, Value>) -> Self {
        Self {
            omega_rad_per_s: pulse.field().omega(),
            delta_max_rad_per_s: pulse.field().delta_max(),
            dt_s: pulse.dt(),
            deltas_rad_per_s: pulse.deltas().to_vec(),
            meta,
        }
    }

    pub fn to_pulse(&self) -> Result<PulseSequence> {
        let field = ControlField::new(self.omega_rad_per_s, self.delta_max_rad_per_s)?;
        PulseSequence::new(self.dt_s, self.deltas_rad_per_s.clone(), field)
    }
}

pub fn write_pulse<W: Write>(out: W, pulse: &PulseSequence, meta: Map<String, Value>) -> Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &PulseFile::from_pulse(pulse, meta))
        .map_err(|e| Error::Schema(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn read_pulse<R: Read>(input: R) -> Result<(PulseSequence, Map<String, Value>)> {
    let file: PulseFile = serde_json::from_reader(input).map_err(|e| Error::Schema(format!("pulse file: {e}")))?;
    let pulse = file.to_pulse()?;
    Ok((pulse, file.meta))
}

pub fn save_pulse(path: &Path, pulse: &PulseSequence, meta: Map<String, Value>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_pulse(&mut out, pulse, meta)?;
    out.flush()?;
    Ok(())
}

pub fn load_pulse(path: &Path) -> Result<(PulseSequence, Map<String, Value>)> {
    read_pulse(BufReader::new(File::open(path)?))
}

/// Any JSON config; parse failures become schema errors naming the file.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Schema(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
