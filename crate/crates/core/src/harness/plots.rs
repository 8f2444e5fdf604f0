//! `(J, F)` scatter with the fitted envelope, as CSV plus a gnuplot script.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::sweep::SweepReport;
use crate::error::Result;

pub const SCATTER_COLUMNS: [&str; 4] = ["id", "J", "F", "envelope"];

pub fn write_scatter_csv<W: Write>(report: &SweepReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCATTER_COLUMNS)?;
    let line = report.fit.as_ref().and_then(|f| Some((f.a?, f.b)));
    for (id, j, f) in report.points() {
        let envelope = line.map_or(String::new(), |(a, b)| (a * j - b).to_string());
        w.write_record([id.to_string(), j.to_string(), f.to_string(), envelope])?;
    }
    w.flush()?;
    Ok(())
}

fn script(csv_name: &str, report: &SweepReport) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set xlabel 'J'\nset ylabel 'F'\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set output 'envelope.png'\n");
    match report.fit.as_ref().and_then(|f| Some((f.a?, f.b))) {
        Some((a, b)) => s.push_str(&format!(
            "plot '{csv_name}' using 2:3 with points pt 7 ps 0.6 title 'rows', \\\n     {a:e}*x - {b:e} with lines title 'F = {a:.4}·J - {b:.4}'\n"
        )),
        None => s.push_str(&format!("plot '{csv_name}' using 2:3 with points pt 7 ps 0.6 title 'rows'\n")),
    }
    s
}

/// Writes `envelope.csv` and `envelope.gp` into `dir`.
pub fn emit_plots(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("envelope.csv");
    write_scatter_csv(report, std::fs::File::create(&csv_path)?)?;
    let gp_path = dir.join("envelope.gp");
    std::fs::write(&gp_path, script("envelope.csv", report))?;
    Ok(vec![csv_path, gp_path])
}
