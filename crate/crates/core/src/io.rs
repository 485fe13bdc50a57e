//! Diagnostics CSV and state snapshot files.
//!
//! Floating-point values are written in shortest round-trip form, so a file
//! read back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::Result;
use crate::lattice::ModeSet;
use crate::observables::DiagnosticsRecord;
use crate::state::{Snapshot, VorticityState};

pub const CSV_HEADER: &str = "t,E,h,div_max,amp_max";

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Streams diagnostics rows under [`CSV_HEADER`].
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(CsvWriter { out })
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            format_f64(r.t),
            format_f64(r.energy),
            format_f64(r.helicity),
            format_f64(r.div_max),
            format_f64(r.amp_max)
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Renders a whole series as CSV text.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut w = CsvWriter::new(Vec::new()).expect("writing to memory");
    for r in records {
        w.write(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner()).expect("ASCII output")
}

/// Parses text produced by [`diagnostics_csv`].
pub fn parse_diagnostics_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let bad = |line: &str| crate::Error::InvalidParameter(format!("malformed diagnostics row '{line}'"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(crate::Error::InvalidParameter("missing diagnostics header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let v: Vec<f64> = line.split(',').map(str::parse).collect::<std::result::Result<_, _>>().map_err(|_| bad(line))?;
            match v.as_slice() {
                &[t, energy, helicity, div_max, amp_max] => Ok(DiagnosticsRecord { t, energy, helicity, div_max, amp_max }),
                _ => Err(bad(line)),
            }
        })
        .collect()
}

pub fn write_snapshot(path: &Path, state: &VorticityState) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &state.to_snapshot())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path, modes: Arc<ModeSet>) -> Result<VorticityState> {
    let snap: Snapshot = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    VorticityState::from_snapshot(modes, &snap)
}
