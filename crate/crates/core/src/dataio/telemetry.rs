use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const COL_INLET_PRESSURE: &str = "Inlet Pressure";
pub const COL_INLET_TEMP: &str = "Inlet Temp";
pub const COL_OUTLET_PRESSURE: &str = "Outlet Pressure";
pub const COL_OUTLET_TEMP: &str = "Outlet Temp";
pub const COL_FLOWRATE: &str = "Flowrate";
/// Baseline (pre-injection) outlet pressure.
pub const COL_REFERENCE: &str = "P2";
pub const COL_INLET_FLOWRATE: &str = "Inlet Flowrate";

pub const REQUIRED_COLUMNS: [&str; 5] =
    [COL_INLET_PRESSURE, COL_INLET_TEMP, COL_OUTLET_PRESSURE, COL_OUTLET_TEMP, COL_FLOWRATE];

const ALL_COLUMNS: [&str; 7] = [
    COL_INLET_PRESSURE,
    COL_INLET_TEMP,
    COL_OUTLET_PRESSURE,
    COL_OUTLET_TEMP,
    COL_FLOWRATE,
    COL_REFERENCE,
    COL_INLET_FLOWRATE,
];

/// One SCADA sample at the 2-minute cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub index: usize,
    pub inlet_pressure: f64,
    pub inlet_temperature: f64,
    pub outlet_pressure: f64,
    pub outlet_temperature: f64,
    pub flowrate: f64,
    pub inlet_flowrate: Option<f64>,
    pub reference_outlet_pressure: Option<f64>,
}

/// A parsed row before null removal. Blank and non-finite cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub line: u64,
    pub index: usize,
    /// Values in the order of the column constants above (required five,
    /// then P2, then inlet flowrate).
    pub values: [Option<f64>; 7],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTelemetry {
    pub has_reference: bool,
    pub has_inlet_flowrate: bool,
    pub rows: Vec<RawRecord>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

impl std::fmt::Display for Reject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub records: Vec<TelemetryRecord>,
    pub dropped: usize,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub records: Vec<TelemetryRecord>,
    pub rejects: Vec<Reject>,
    pub total_rows: usize,
}

impl From<&TelemetryRecord> for RawRecord {
    fn from(r: &TelemetryRecord) -> Self {
        RawRecord {
            line: 0,
            index: r.index,
            values: [
                Some(r.inlet_pressure),
                Some(r.inlet_temperature),
                Some(r.outlet_pressure),
                Some(r.outlet_temperature),
                Some(r.flowrate),
                r.reference_outlet_pressure,
                r.inlet_flowrate,
            ],
        }
    }
}

impl RawTelemetry {
    /// Re-wraps clean records, e.g. to clean an already cleaned stream.
    pub fn from_records(records: &[TelemetryRecord], has_reference: bool, has_inlet_flowrate: bool) -> Self {
        RawTelemetry {
            has_reference,
            has_inlet_flowrate,
            rows: records.iter().map(RawRecord::from).collect(),
            rejects: Vec::new(),
        }
    }
}

/// Parses telemetry text without dropping nulls. Cells that are present but
/// not numeric are collected as rejects.
pub fn read_telemetry<R: Read>(source: R) -> Result<RawTelemetry> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut positions = [None; 7];
    for (slot, name) in positions.iter_mut().zip(ALL_COLUMNS) {
        *slot = headers.iter().position(|h| h == name);
    }
    for (i, name) in REQUIRED_COLUMNS.iter().enumerate() {
        if positions[i].is_none() {
            return Err(Error::MissingColumn((*name).to_string()));
        }
    }
    let mut out = RawTelemetry {
        has_reference: positions[5].is_some(),
        has_inlet_flowrate: positions[6].is_some(),
        rows: Vec::new(),
        rejects: Vec::new(),
    };
    for (index, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut values = [None; 7];
        let mut bad = None;
        for (k, pos) in positions.iter().enumerate() {
            let Some(pos) = pos else { continue };
            let cell = row.get(*pos).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values[k] = Some(v),
                Ok(_) => {}
                Err(_) => {
                    bad = Some(format!("unparseable value `{cell}` in column {}", ALL_COLUMNS[k]));
                    break;
                }
            }
        }
        match bad {
            Some(reason) => out.rejects.push(Reject { line, reason }),
            None => out.rows.push(RawRecord { line, index, values }),
        }
    }
    Ok(out)
}

/// Drops every row carrying a null in a column the stream provides.
/// Outliers are kept.
pub fn clean(raw: &RawTelemetry) -> Cleaned {
    let mut records = Vec::with_capacity(raw.rows.len());
    let mut rejects = Vec::new();
    for row in &raw.rows {
        let present = |k: usize| match k {
            5 => raw.has_reference,
            6 => raw.has_inlet_flowrate,
            _ => true,
        };
        if let Some(k) = (0..7).find(|&k| present(k) && row.values[k].is_none()) {
            rejects.push(Reject {
                line: row.line,
                reason: format!("null value in column {}", ALL_COLUMNS[k]),
            });
            continue;
        }
        let v = &row.values;
        records.push(TelemetryRecord {
            index: row.index,
            inlet_pressure: v[0].unwrap(),
            inlet_temperature: v[1].unwrap(),
            outlet_pressure: v[2].unwrap(),
            outlet_temperature: v[3].unwrap(),
            flowrate: v[4].unwrap(),
            reference_outlet_pressure: if raw.has_reference { v[5] } else { None },
            inlet_flowrate: if raw.has_inlet_flowrate { v[6] } else { None },
        });
    }
    Cleaned { dropped: rejects.len(), records, rejects }
}

/// Reads and cleans telemetry; both unparseable and null-bearing rows end up
/// in the rejects report.
pub fn load_telemetry<R: Read>(source: R) -> Result<Loaded> {
    let raw = read_telemetry(source)?;
    let total_rows = raw.rows.len() + raw.rejects.len();
    let cleaned = clean(&raw);
    let mut rejects = raw.rejects;
    rejects.extend(cleaned.rejects);
    rejects.sort_by_key(|r| r.line);
    Ok(Loaded { records: cleaned.records, rejects, total_rows })
}

pub fn read_telemetry_file(path: &Path) -> Result<Loaded> {
    load_telemetry(BufReader::new(File::open(path)?))
}

/// Writes records in the format [`load_telemetry`] reads. Optional columns
/// are emitted when every record carries them.
pub fn write_telemetry<W: Write>(sink: W, records: &[TelemetryRecord]) -> Result<()> {
    let with_ref = !records.is_empty() && records.iter().all(|r| r.reference_outlet_pressure.is_some());
    let with_inlet = !records.is_empty() && records.iter().all(|r| r.inlet_flowrate.is_some());
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    if with_ref {
        header.push(COL_REFERENCE);
    }
    if with_inlet {
        header.push(COL_INLET_FLOWRATE);
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in records {
        row.clear();
        for v in [r.inlet_pressure, r.inlet_temperature, r.outlet_pressure, r.outlet_temperature, r.flowrate] {
            row.push(v.to_string());
        }
        if with_ref {
            row.push(r.reference_outlet_pressure.unwrap().to_string());
        }
        if with_inlet {
            row.push(r.inlet_flowrate.unwrap().to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_telemetry_file(path: &Path, records: &[TelemetryRecord]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_telemetry(&mut f, records)?;
    f.flush()?;
    Ok(())
}
