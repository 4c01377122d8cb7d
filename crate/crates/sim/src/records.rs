//! Result persistence: append-only line-delimited trial records and the
//! CSV summary derived from them.
//!
//! A results file starts with two header lines,
//!
//! ```text
//! # mprx-results v1
//! # config: <canonical config with newlines replaced by ';'>
//! ```
//!
//! followed by one record per line, comma separated, in the field order
//! `receiver,ebn0_db,frame_index,bit_errors,info_bits,frame_error,
//! nmse_db,lambda_hat,wall_ms` (`frame_error` is 0/1, floats print in
//! Rust's shortest round-trip form, `-inf` is a legal `nmse_db`). Record
//! order carries no meaning: summaries sort before aggregating, so files
//! written by any number of workers summarize identically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::config::{ReceiverKind, SimConfig};
use crate::SimError;

pub const RESULTS_MAGIC: &str = "# mprx-results v1";

/// One receiver run on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub receiver: ReceiverKind,
    pub ebn0_db: f64,
    pub frame_index: u64,
    pub bit_errors: u64,
    pub info_bits: u64,
    pub frame_error: bool,
    pub nmse_db: f64,
    pub lambda_hat: f64,
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.receiver,
            self.ebn0_db,
            self.frame_index,
            self.bit_errors,
            self.info_bits,
            self.frame_error as u8,
            self.nmse_db,
            self.lambda_hat,
            self.wall_ms
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("expected 9 fields, got {}", fields.len()));
        }
        let num = |i: usize| -> Result<f64, String> {
            fields[i].parse::<f64>().map_err(|e| format!("field {i}: {e}"))
        };
        let int = |i: usize| -> Result<u64, String> {
            fields[i].parse::<u64>().map_err(|e| format!("field {i}: {e}"))
        };
        let record = Self {
            receiver: fields[0].parse().map_err(|e| format!("field 0: {e}"))?,
            ebn0_db: num(1)?,
            frame_index: int(2)?,
            bit_errors: int(3)?,
            info_bits: int(4)?,
            frame_error: match fields[5] {
                "0" => false,
                "1" => true,
                other => return Err(format!("field 5: bad flag '{other}'")),
            },
            nmse_db: num(6)?,
            lambda_hat: num(7)?,
            wall_ms: num(8)?,
        };
        if record.bit_errors > record.info_bits {
            return Err("bit_errors exceeds info_bits".into());
        }
        Ok(record)
    }
}

/// Streaming writer: header first, then one line per completed record.
pub struct ResultsWriter {
    out: BufWriter<File>,
}

impl ResultsWriter {
    pub fn create(path: &Path, cfg: &SimConfig) -> Result<Self, SimError> {
        let file = File::create(path).map_err(|e| SimError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let header = format!(
            "{RESULTS_MAGIC}\n# config: {}\n",
            cfg.serialize().trim_end().replace('\n', ";")
        );
        out.write_all(header.as_bytes())
            .map_err(|e| SimError::io(path, e))?;
        Ok(Self { out })
    }

    pub fn append(&mut self, record: &TrialRecord) -> std::io::Result<()> {
        self.out.write_all(record.to_line().as_bytes())?;
        self.out.write_all(b"\n")?;
        // Keep the file usable after an interrupted sweep.
        self.out.flush()
    }
}

/// Load a results file back: embedded config plus all records.
pub fn read_results(path: &Path) -> Result<(SimConfig, Vec<TrialRecord>), SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let malformed = |line: usize, message: String| SimError::MalformedResults {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == RESULTS_MAGIC => {}
        other => {
            return Err(malformed(
                1,
                format!("missing magic header, got {:?}", other.map(|(_, l)| l)),
            ))
        }
    }
    let cfg = match lines.next() {
        Some((_, second)) if second.starts_with("# config: ") => {
            let packed = &second["# config: ".len()..];
            SimConfig::parse(&packed.replace(';', "\n"))
                .map_err(|e| malformed(2, format!("embedded config: {e}")))?
        }
        other => {
            return Err(malformed(
                2,
                format!("missing config header, got {:?}", other.map(|(_, l)| l)),
            ))
        }
    };
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        records.push(TrialRecord::parse_line(line).map_err(|m| malformed(idx + 1, m))?);
    }
    Ok((cfg, records))
}

/// Format to six significant digits; exact zero prints as `0`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.5e}")
    }
}

/// Aggregate records into the summary CSV, sorted by (receiver, ebn0).
///
/// Columns: `receiver,ebn0_db,ber,fer,nmse_db,lambda_rel_err,frames,bits`.
/// BER and FER are exact integer ratios to six significant digits; NMSE is
/// the dB of the mean linear NMSE; `lambda_rel_err` averages
/// `|lambda_hat - lambda| / lambda` with the true `lambda` recomputed from
/// the embedded config.
pub fn summarize(cfg: &SimConfig, records: &[TrialRecord]) -> String {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.receiver.as_str(), &a.ebn0_db, a.frame_index)
            .partial_cmp(&(b.receiver.as_str(), &b.ebn0_db, b.frame_index))
            .expect("no NaN ebn0")
    });

    let mut out = String::from("receiver,ebn0_db,ber,fer,nmse_db,lambda_rel_err,frames,bits\n");
    let mut i = 0;
    while i < sorted.len() {
        let key = (sorted[i].receiver, sorted[i].ebn0_db);
        let mut errors = 0u64;
        let mut bits = 0u64;
        let mut frame_errors = 0u64;
        let mut frames = 0u64;
        let mut nmse_linear = 0.0f64;
        let mut lambda_err = 0.0f64;
        let lambda_true = cfg.lambda_for(key.1);
        while i < sorted.len() && (sorted[i].receiver, sorted[i].ebn0_db) == key {
            let r = sorted[i];
            errors += r.bit_errors;
            bits += r.info_bits;
            frame_errors += r.frame_error as u64;
            frames += 1;
            nmse_linear += 10f64.powf(r.nmse_db / 10.0);
            lambda_err += (r.lambda_hat - lambda_true).abs() / lambda_true;
            i += 1;
        }
        let ber = if bits > 0 { errors as f64 / bits as f64 } else { 0.0 };
        let fer = frame_errors as f64 / frames as f64;
        let nmse_db = 10.0 * (nmse_linear / frames as f64).log10();
        out.push_str(&format!(
            "{},{},{},{},{:.2},{},{},{}\n",
            key.0,
            key.1,
            fmt_sig6(ber),
            fmt_sig6(fer),
            nmse_db,
            fmt_sig6(lambda_err / frames as f64),
            frames,
            bits
        ));
    }
    out
}
