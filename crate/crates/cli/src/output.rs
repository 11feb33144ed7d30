//! CSV, JSON and plot-data artifacts of one command.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
    /// Two-column plot data with axis labels.
    pub plot: Option<(&'static str, &'static str, Vec<(f64, f64)>)>,
}

/// Deterministic float text: shortest round-trip form, exponent for tiny values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn joined(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

pub fn flags(v: &[String]) -> String {
    v.join("|")
}

impl Report {
    pub fn csv(&self) -> io::Result<Vec<u8>> {
        let mut buf = b"# values in nats\n".to_vec();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }

    pub fn plot_text(&self) -> Option<String> {
        let (x, y, pts) = self.plot.as_ref()?;
        let mut s = format!("# {x} {y}\n");
        for (a, b) in pts {
            s.push_str(&format!("{} {}\n", num(*a), num(*b)));
        }
        Some(s)
    }

    /// Prints the CSV and, with a prefix, writes `prefix.csv`, `prefix.json` and `prefix.dat`.
    pub fn emit(&self, out: Option<&Path>) -> io::Result<()> {
        let csv = self.csv()?;
        io::stdout().write_all(&csv)?;
        if let Some(prefix) = out {
            if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(sibling(prefix, "csv"), &csv)?;
            let mut json = serde_json::to_vec_pretty(&self.json)?;
            json.push(b'\n');
            std::fs::write(sibling(prefix, "json"), json)?;
            if let Some(p) = self.plot_text() {
                std::fs::write(sibling(prefix, "dat"), p)?;
            }
        }
        Ok(())
    }
}

fn sibling(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
