use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::BenchmarkRecord;
use crate::model::NodeConfig;
use crate::units::Khz;

pub const CSV_HEADER: [&str; 7] = [
    "freq_khz",
    "load_pct",
    "bogo_ops_per_sec",
    "power_w",
    "duration_s",
    "repetition",
    "timestamp",
];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unexpected header: expected columns {expected:?}, found {actual:?}")]
    Header {
        path: PathBuf,
        expected: Vec<String>,
        actual: Vec<String>,
    },
    #[error("{path}: line {line}: {message}")]
    Row { path: PathBuf, line: u64, message: String },
}

/// Renders records as CSV. Floats use the shortest representation that
/// parses back to the same bits.
pub fn records_to_csv(records: &[BenchmarkRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.config.freq.0.to_string(),
            r.load_pct.to_string(),
            r.bogo_ops_per_sec.to_string(),
            r.power.to_string(),
            r.duration.to_string(),
            r.repetition.to_string(),
            r.timestamp.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `records` to `path` atomically.
pub fn persist_records(records: &[BenchmarkRecord], path: &Path) -> Result<(), RecordsError> {
    crate::write_atomically(path, &records_to_csv(records)).map_err(|source| RecordsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_records(path: &Path) -> Result<Vec<BenchmarkRecord>, RecordsError> {
    let bytes = fs::read(path).map_err(|source| RecordsError::Io { path: path.to_path_buf(), source })?;
    parse_records(&bytes, path)
}

fn parse_records(bytes: &[u8], path: &Path) -> Result<Vec<BenchmarkRecord>, RecordsError> {
    let row_err = |line: u64, message: String| RecordsError::Row { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| row_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header != CSV_HEADER {
        return Err(RecordsError::Header {
            path: path.to_path_buf(),
            expected: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            actual: header,
        });
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            row_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or_default();
        let float = |i: usize| -> Result<f64, RecordsError> {
            let v: f64 = field(i)
                .parse()
                .map_err(|_| row_err(line, format!("{}: not a number: {:?}", CSV_HEADER[i], field(i))))?;
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(row_err(line, format!("{}: must be finite and >= 0, got {v}", CSV_HEADER[i])))
            }
        };
        let int = |i: usize| -> Result<u64, RecordsError> {
            field(i)
                .parse()
                .map_err(|_| row_err(line, format!("{}: not an integer: {:?}", CSV_HEADER[i], field(i))))
        };
        let load = int(1)?;
        if load > 100 {
            return Err(row_err(line, format!("load_pct: {load} exceeds 100")));
        }
        out.push(BenchmarkRecord {
            config: NodeConfig { freq: Khz(int(0)?) },
            load_pct: load as u32,
            bogo_ops_per_sec: float(2)?,
            power: float(3)?,
            duration: float(4)?,
            repetition: u32::try_from(int(5)?).map_err(|_| row_err(line, "repetition out of range".into()))?,
            timestamp: float(6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(freq: u64, load: u32, ops: f64, power: f64) -> BenchmarkRecord {
        BenchmarkRecord {
            config: NodeConfig { freq: Khz(freq) },
            load_pct: load,
            bogo_ops_per_sec: ops,
            power,
            duration: 15.0,
            repetition: 0,
            timestamp: 1_700_000_000.123_456_7,
        }
    }

    #[test]
    fn empty_list_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        persist_records(&[], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "freq_khz,load_pct,bogo_ops_per_sec,power_w,duration_s,repetition,timestamp\n");
        assert!(load_records(&p).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rs = vec![rec(600_000, 0, 0.0, 1.9), rec(1_800_000, 100, 1800.0000000000002, 4.749999999999999)];
        persist_records(&rs, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 3);
        assert_eq!(load_records(&p).unwrap(), rs);
    }

    #[test]
    fn header_mismatch_names_columns() {
        let bytes = b"freq_khz,load,bogo_ops_per_sec,power_w,duration_s,repetition,timestamp\n";
        match parse_records(bytes, Path::new("x.csv")) {
            Err(RecordsError::Header { actual, expected, .. }) => {
                assert_eq!(actual[1], "load");
                assert_eq!(expected[1], "load_pct");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_rows_report_line() {
        let mut bytes = CSV_HEADER.join(",").into_bytes();
        bytes.extend_from_slice(b"\n600000,10,1,2,15,0,0\n600000,10,abc,2,15,0,0\n");
        match parse_records(&bytes, Path::new("x.csv")) {
            Err(RecordsError::Row { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bogo_ops_per_sec"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_has_path_context() {
        let err = load_records(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }
}
