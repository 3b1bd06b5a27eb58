//! CSV trace formats, JSON sidecars and atomic file writes.
//!
//! Every CSV is UTF-8, comma separated, with a header row. JSON documents carry
//! a `schema_version` field.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::DampingRates;
use crate::experiment::{PolarizerScan, RabiTrace};
use crate::polarization::{CircularTransition, FieldDirection, PolarizationStateRow};
use crate::spectrum::LevelDiagramRow;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const SCAN_HEADER: [&str; 3] = ["spacing_mm", "photocurrent", "field_sign"];
pub const RABI_HEADER: [&str; 3] = ["pulse_width_ps", "photocurrent", "polarization"];

/// Writes through a temporary file in the same directory, then renames it
/// over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn level_diagram_csv(rows: &[LevelDiagramRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return csv_bytes::<LevelDiagramRow>(
            &[],
            Some(&[
                "B_tesla",
                "E_1s_meV",
                "E_2pminus_meV",
                "E_2pzero_meV",
                "E_2pplus_meV",
                "LL0_meV",
                "LL1_meV",
            ]),
        );
    }
    csv_bytes(rows, None)
}

pub fn polarization_states_csv(rows: &[PolarizationStateRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return csv_bytes::<PolarizationStateRow>(
            &[],
            Some(&["spacing_mm", "delta_rad", "s3_over_s0", "f_plus", "f_minus"]),
        );
    }
    csv_bytes(rows, None)
}

#[derive(Debug, Serialize, Deserialize)]
struct ScanRow {
    spacing_mm: f64,
    photocurrent: f64,
    field_sign: i8,
}

#[derive(Debug, Serialize, Deserialize)]
struct RabiRow {
    pulse_width_ps: f64,
    photocurrent: f64,
    polarization: String,
}

/// One or more scans in a single table, distinguished by `field_sign` (±1).
pub fn polarizer_scans_csv(scans: &[PolarizerScan]) -> Result<Vec<u8>> {
    let rows: Vec<ScanRow> = scans
        .iter()
        .flat_map(|s| {
            let sign = s.field.sign() as i8;
            s.spacings_mm
                .iter()
                .zip(&s.photocurrent)
                .map(move |(&d, &p)| ScanRow {
                    spacing_mm: d,
                    photocurrent: p,
                    field_sign: sign,
                })
        })
        .collect();
    csv_bytes(
        &rows,
        if rows.is_empty() {
            Some(&SCAN_HEADER)
        } else {
            None
        },
    )
}

/// One or more traces in a single table, distinguished by `polarization`.
pub fn rabi_traces_csv(traces: &[RabiTrace]) -> Result<Vec<u8>> {
    let rows: Vec<RabiRow> = traces
        .iter()
        .flat_map(|t| {
            t.pulse_widths_ps
                .iter()
                .zip(&t.photocurrent)
                .map(move |(&w, &p)| RabiRow {
                    pulse_width_ps: w,
                    photocurrent: p,
                    polarization: t.polarization.clone(),
                })
        })
        .collect();
    csv_bytes(
        &rows,
        if rows.is_empty() {
            Some(&RABI_HEADER)
        } else {
            None
        },
    )
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Schema(format!(
            "expected header {expected:?}, found {got:?}"
        )));
    }
    Ok(())
}

fn row_error(line: usize, e: csv::Error) -> Error {
    Error::Schema(format!("row {line}: {e}"))
}

/// Metadata that accompanies a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub schema_version: u32,
    #[serde(rename = "frequency_THz")]
    pub frequency_thz: f64,
    pub wavelength_mm: Option<f64>,
    pub transition: Option<CircularTransition>,
    #[serde(rename = "B_tesla")]
    pub b_tesla: f64,
    pub rates: Option<DampingRates>,
    /// Peak THz field, V/m.
    pub peak_field: Option<f64>,
    pub x12_nm: Option<f64>,
    pub seed: Option<u64>,
}

impl TraceMetadata {
    pub fn new(frequency_thz: f64, b_tesla: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            frequency_thz,
            wavelength_mm: None,
            transition: None,
            b_tesla,
            rates: None,
            peak_field: None,
            x12_nm: None,
            seed: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported metadata schema_version {}",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

/// Parses a polarizer-scan table into one scan per field sign, `+z` first.
pub fn read_polarizer_scans(
    text: &str,
    wavelength_mm: f64,
    transition: CircularTransition,
) -> Result<Vec<PolarizerScan>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    check_header(&mut r, &SCAN_HEADER)?;
    let mut scans: Vec<PolarizerScan> = Vec::new();
    for (k, row) in r.deserialize::<ScanRow>().enumerate() {
        let row = row.map_err(|e| row_error(k + 2, e))?;
        let field = match row.field_sign {
            1 => FieldDirection::PlusZ,
            -1 => FieldDirection::MinusZ,
            s => {
                return Err(Error::Schema(format!(
                    "row {}: field_sign must be +1 or -1, got {s}",
                    k + 2
                )))
            }
        };
        if !row.spacing_mm.is_finite() || !row.photocurrent.is_finite() {
            return Err(Error::Schema(format!("row {}: non-finite value", k + 2)));
        }
        match scans.iter_mut().find(|s| s.field == field) {
            Some(s) => {
                s.spacings_mm.push(row.spacing_mm);
                s.photocurrent.push(row.photocurrent);
            }
            None => scans.push(PolarizerScan {
                spacings_mm: vec![row.spacing_mm],
                photocurrent: vec![row.photocurrent],
                field,
                wavelength_mm,
                transition,
            }),
        }
    }
    if scans.is_empty() {
        return Err(Error::InsufficientData("scan file has no rows".into()));
    }
    scans.sort_by_key(|s| s.field != FieldDirection::PlusZ);
    for s in &scans {
        s.validate()?;
    }
    Ok(scans)
}

/// Parses a Rabi-trace table into one trace per polarization label, in order
/// of first appearance.
pub fn read_rabi_traces(text: &str, metadata: Option<&TraceMetadata>) -> Result<Vec<RabiTrace>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    check_header(&mut r, &RABI_HEADER)?;
    let (freq, b) = metadata
        .map(|m| (m.frequency_thz, m.b_tesla))
        .unwrap_or((f64::NAN, f64::NAN));
    let mut traces: Vec<RabiTrace> = Vec::new();
    for (k, row) in r.deserialize::<RabiRow>().enumerate() {
        let row = row.map_err(|e| row_error(k + 2, e))?;
        if !row.pulse_width_ps.is_finite() || !row.photocurrent.is_finite() {
            return Err(Error::Schema(format!("row {}: non-finite value", k + 2)));
        }
        match traces
            .iter_mut()
            .find(|t| t.polarization == row.polarization)
        {
            Some(t) => {
                t.pulse_widths_ps.push(row.pulse_width_ps);
                t.photocurrent.push(row.photocurrent);
            }
            None => traces.push(RabiTrace {
                pulse_widths_ps: vec![row.pulse_width_ps],
                photocurrent: vec![row.photocurrent],
                polarization: row.polarization,
                frequency_thz: freq,
                field_tesla: b,
            }),
        }
    }
    if traces.is_empty() {
        return Err(Error::InsufficientData("trace file has no rows".into()));
    }
    for t in &traces {
        t.validate()?;
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{linspace, simulate_polarizer_scan, ScanModel};

    fn trace(label: &str) -> RabiTrace {
        RabiTrace {
            pulse_widths_ps: vec![0.0, 1.5, 3.0, 4.5],
            photocurrent: vec![0.0, 0.1, 0.30000000000000004, 1e-17],
            polarization: label.into(),
            frequency_thz: 2.54,
            field_tesla: 3.62,
        }
    }

    #[test]
    fn rabi_round_trip_is_exact() {
        let bytes = rabi_traces_csv(&[trace("sigma+"), trace("pi_x")]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("pulse_width_ps,photocurrent,polarization\n"));
        let meta = TraceMetadata::new(2.54, 3.62);
        let back = read_rabi_traces(&text, Some(&meta)).unwrap();
        assert_eq!(back, vec![trace("sigma+"), trace("pi_x")]);
    }

    #[test]
    fn scan_round_trip_groups_by_sign() {
        let d = linspace(0.0, 0.118, 9);
        let m = ScanModel::ideal(0.118);
        let up =
            simulate_polarizer_scan(&d, &m, CircularTransition::ToP2Plus, FieldDirection::PlusZ)
                .unwrap();
        let down =
            simulate_polarizer_scan(&d, &m, CircularTransition::ToP2Plus, FieldDirection::MinusZ)
                .unwrap();
        let text =
            String::from_utf8(polarizer_scans_csv(&[down.clone(), up.clone()]).unwrap()).unwrap();
        let back = read_polarizer_scans(&text, 0.118, CircularTransition::ToP2Plus).unwrap();
        assert_eq!(back, vec![up, down]);
    }

    #[test]
    fn schema_violations() {
        assert!(matches!(
            read_rabi_traces("width,current\n1,2\n", None),
            Err(Error::Schema(_))
        ));
        let bad = "pulse_width_ps,photocurrent,polarization\n0,abc,sigma+\n";
        assert!(matches!(read_rabi_traces(bad, None), Err(Error::Schema(_))));
        let empty = "pulse_width_ps,photocurrent,polarization\n";
        assert!(matches!(
            read_rabi_traces(empty, None),
            Err(Error::InsufficientData(_))
        ));
        let sign = "spacing_mm,photocurrent,field_sign\n0,1,2\n";
        assert!(matches!(
            read_polarizer_scans(sign, 0.1, CircularTransition::ToP2Plus),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn metadata_round_trip() {
        let mut m = TraceMetadata::new(2.54, 3.62);
        m.rates = Some(DampingRates::sigma_plus_fit());
        let text = String::from_utf8(to_json_bytes(&m).unwrap()).unwrap();
        assert!(text.contains("\"frequency_THz\"") && text.contains("\"B_tesla\""));
        assert_eq!(TraceMetadata::parse(&text).unwrap(), m);
        let future = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            TraceMetadata::parse(&future),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
