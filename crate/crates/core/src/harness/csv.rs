use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::ResultRow;

pub const CSV_HEADER: [&str; 17] = [
    "snr_db",
    "pn_var",
    "m",
    "mode",
    "mse_g",
    "mse_g_se",
    "mse_h",
    "mse_h_se",
    "mse_cfopn",
    "mse_cfopn_se",
    "ber",
    "ber_se",
    "hcrlb_g",
    "hcrlb_h",
    "hcrlb_cfopn",
    "iters_mean",
    "diverged_count",
];

/// Writes the header and one line per row. Floats use Rust's shortest
/// round-trip formatting, so parsing a value back gives the same `f64`.
pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for r in rows {
        let floats = [
            r.mse_g,
            r.mse_g_se,
            r.mse_h,
            r.mse_h_se,
            r.mse_cfopn,
            r.mse_cfopn_se,
            r.ber,
            r.ber_se,
            r.hcrlb_g,
            r.hcrlb_h,
            r.hcrlb_cfopn,
            r.iters_mean,
        ];
        write!(out, "{},{},{},{}", r.snr_db, r.pn_var, r.m, r.mode)?;
        for v in floats {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", r.diverged_count)?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    write_csv(rows, BufWriter::new(file)).map_err(io)
}

/// Inverse of [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let err = |line: usize, msg: String| Error::Parse { what: format!("CSV line {}", line + 1), msg };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(0, "missing header".into()))?;
    if header != CSV_HEADER.join(",") {
        return Err(err(0, format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != CSV_HEADER.len() {
                return Err(err(i + 1, format!("{} fields, expected {}", f.len(), CSV_HEADER.len())));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| err(i + 1, format!("{}: {e}", CSV_HEADER[k])));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| err(i + 1, format!("{}: {e}", CSV_HEADER[k])));
            Ok(ResultRow {
                snr_db: num(0)?,
                pn_var: num(1)?,
                m: int(2)?,
                mode: f[3].to_string(),
                mse_g: num(4)?,
                mse_g_se: num(5)?,
                mse_h: num(6)?,
                mse_h_se: num(7)?,
                mse_cfopn: num(8)?,
                mse_cfopn_se: num(9)?,
                ber: num(10)?,
                ber_se: num(11)?,
                hcrlb_g: num(12)?,
                hcrlb_h: num(13)?,
                hcrlb_cfopn: num(14)?,
                iters_mean: num(15)?,
                diverged_count: int(16)?,
            })
        })
        .collect()
}
