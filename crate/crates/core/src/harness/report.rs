//! Report files. Floats use the shortest representation that round-trips.
//!
//! - `<stem>.csv`: `policy,avg_rate,ratio_pct,total_time_s`
//! - `<stem>_cdf.csv`: `policy,rate,cdf`
//! - `<stem>_hist.csv`: `bin_lo,bin_hi,<policy>...`
//! - `<stem>.json`: the whole report except per-sample rates

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{EvalReport, Policy, TimingTable};
use crate::error::Result;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_report_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "policy,avg_rate,ratio_pct,total_time_s")?;
    for p in &report.policies {
        writeln!(w, "{},{},{},{}", p.policy.name(), p.avg_rate, p.ratio_pct, p.total_time_s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "policy,rate,cdf")?;
    for p in &report.policies {
        for (r, c) in &p.cdf {
            writeln!(w, "{},{r},{c}", p.policy.name())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let h = &report.histogram;
    let policies: Vec<Policy> = h.counts.keys().copied().collect();
    let mut w = create(path)?;
    write!(w, "bin_lo,bin_hi")?;
    for p in &policies {
        write!(w, ",{}", p.name())?;
    }
    writeln!(w)?;
    for (i, edge) in h.edges.windows(2).enumerate() {
        write!(w, "{},{}", edge[0], edge[1])?;
        for p in &policies {
            write!(w, ",{}", h.counts[p][i])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes all four report files into `dir` and returns their paths.
pub fn write_reports(dir: &Path, stem: &str, report: &EvalReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let paths = [
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}_cdf.csv")),
        dir.join(format!("{stem}_hist.csv")),
        dir.join(format!("{stem}.json")),
    ];
    write_report_csv(&paths[0], report)?;
    write_cdf_csv(&paths[1], report)?;
    write_histogram_csv(&paths[2], report)?;
    write_report_json(&paths[3], report)?;
    Ok(paths.to_vec())
}

/// `policy,median_s,time_ratio_pct` plus a JSON twin next to it.
pub fn write_timing_csv(path: &Path, t: &TimingTable) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "policy,median_s,time_ratio_pct")?;
    writeln!(w, "dnn,{},{}", t.dnn_s, 100.0 * t.time_ratio)?;
    writeln!(w, "wmmse,{},100", t.wmmse_s)?;
    w.flush()?;
    let mut j = create(&path.with_extension("json"))?;
    serde_json::to_writer_pretty(&mut j, t).map_err(std::io::Error::from)?;
    writeln!(j)?;
    j.flush()?;
    Ok(())
}
