//! Artifact files: CSV tables, JSON documents and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use riesz_forge::geometry::Point;
use serde::Serialize;
use serde_json::Value;

/// Floats are written with 17 significant digits so they read back exactly.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table built row by row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

pub fn points_table(points: &[Point]) -> Table {
    let dim = points.first().map_or(0, |p| p.dim());
    let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for p in points {
        table.row(&p.coords.iter().map(|&c| float(c)).collect::<Vec<_>>());
    }
    table
}

/// Output directory and the files written into it so far.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn table(&mut self, name: &str, table: Table) -> io::Result<()> {
        self.file(name, table.text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.file(name, text.as_bytes())
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub experiment: &'static str,
    pub seed: Option<u64>,
    pub workers: usize,
    pub config: &'a Value,
    pub status: &'static str,
    pub error: Option<String>,
    /// Set when the run failed after some artifacts were written.
    pub partial: bool,
    pub artifacts: Vec<String>,
    pub summary: Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn tables_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Artifacts::create(&dir.path().join("nested")).unwrap();
        let points = vec![Point::from(vec![1.0, 0.0]), Point::from(vec![0.0, -1.0])];
        out.table("points.csv", points_table(&points)).unwrap();
        out.table("points.csv", points_table(&points)).unwrap();
        out.json("x.json", &serde_json::json!({"a": 1})).unwrap();
        assert_eq!(out.written(), ["points.csv", "x.json"]);
        let text = fs::read_to_string(out.dir().join("points.csv")).unwrap();
        assert_eq!(
            text,
            "x0,x1\n1.0000000000000000e0,0.0000000000000000e0\n0.0000000000000000e0,-1.0000000000000000e0\n"
        );
    }
}
