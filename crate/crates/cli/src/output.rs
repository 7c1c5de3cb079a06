//! CSV writers.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use hrdme::stats::{EnsembleSeries, RebindSample};

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Header `time,<species...>,se_<species...>` then one row per sample time.
pub fn write_series<W: Write>(data: &EnsembleSeries, out: W) -> io::Result<()> {
    let species = &data.mean.species;
    if species.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no species to write"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(species.iter().cloned());
    header.extend(species.iter().map(|s| format!("se_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, t) in data.mean.times.iter().enumerate() {
        let row = std::iter::once(*t)
            .chain(data.mean.values[i].iter().copied())
            .chain(data.std_err[i].iter().copied())
            .map(|x| x.to_string());
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn emit_csv(data: &EnsembleSeries, path: &Path) -> io::Result<()> {
    write_series(data, File::create(path)?)
}

/// One duration per line under a `duration` header; censored episodes are
/// written as `inf`.
pub fn write_rebind<W: Write>(sample: &RebindSample, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["duration"]).map_err(csv_err)?;
    for d in &sample.durations {
        w.write_record([d.to_string()]).map_err(csv_err)?;
    }
    w.flush()
}

/// A plain table, columns padded to their widest cell.
pub fn format_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn write_table<W: Write>(header: &[String], rows: &[Vec<String>], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()
}
