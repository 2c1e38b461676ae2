//! CSV tables with `#` metadata lines.
//!
//! Floats are written with 17 significant digits so a re-read reproduces
//! every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::DistanceReport;
use crate::protocols::{self, ProtocolRun, SweepResult};
use crate::system::PhotonDistribution;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    /// Metadata lines, written after `# `.
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, meta: impl IntoIterator<Item = String>) -> Self {
        self.meta.extend(meta);
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    /// Numeric column; text cells become NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        Some(self.column(name)?.into_iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for m in &self.meta {
            for line in m.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    /// Reads a table written by [`Table::write_to`]. Integer-looking cells
    /// become `Int`, other numbers `Float`.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let meta = text.lines().map_while(|l| l.strip_prefix('#')).map(|l| l.strip_prefix(' ').unwrap_or(l).to_string()).collect();
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns = csv.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in csv.records() {
            let rec = rec.map_err(csv_err)?;
            rows.push(
                rec.iter()
                    .map(|s| {
                        if let Ok(i) = s.parse::<i64>() {
                            Cell::Int(i)
                        } else if let Ok(v) = s.parse::<f64>() {
                            Cell::Float(v)
                        } else {
                            Cell::Text(s.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(Table { meta, columns, rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Configuration echo plus the derived drive and timing quantities.
pub fn metadata(cfg: &RunConfig) -> Vec<String> {
    let mut out: Vec<String> = cfg.echo().lines().map(str::to_string).collect();
    match protocols::resolve(&cfg.protocol, &cfg.params) {
        Ok(r) => {
            out.push(format!("derived chi = {:?} rad/ns", r.chi));
            out.push(format!("derived t_pi = {:?} ns", r.t_pi));
            out.push(format!("derived drive_amp = {:?} rad/ns", r.eps));
            out.push(format!("derived omega_d = {:?} rad/ns", r.params.omega_d));
        }
        Err(e) => out.push(format!("derived unavailable: {e}")),
    }
    out
}

/// Columns n, P_n.
pub fn distribution_table(p: &PhotonDistribution) -> Table {
    let mut t = Table::new(["n", "P_n"]);
    for (n, &v) in p.probs().iter().enumerate() {
        t.push(vec![n.into(), v.into()]);
    }
    t
}

/// Columns n, P_b, P_d, D_n for the last counting time of a run.
pub fn protocol_table(run: &ProtocolRun) -> Table {
    let p = run.points.last().expect("run has a point");
    pair_table(&p.bright, &p.dark, &p.report)
}

fn pair_table(b: &PhotonDistribution, d: &PhotonDistribution, report: &DistanceReport) -> Table {
    let mut t = Table::new(["n", "P_b", "P_d", "D_n"]);
    let len = b.n_max().max(d.n_max()) + 2;
    for n in 0..len {
        t.push(vec![n.into(), b.get(n).into(), d.get(n).into(), report.at(n).into()]);
    }
    t
}

/// Columns axis, nbar_b, nbar_d, d_opt, n_opt, d_1, d_2, d_3, d_cav,
/// nocc_b, nocc_d, status. Failed points keep their row with NaN values and
/// the error in `status`.
pub fn sweep_table(s: &SweepResult) -> Table {
    let mut t = Table::new([s.axis, "nbar_b", "nbar_d", "d_opt", "n_opt", "d_1", "d_2", "d_3", "d_cav", "nocc_b", "nocc_d", "status"]);
    t.meta.push(format!("axis {} [{}]", s.axis, s.unit));
    for (v, row) in s.values.iter().zip(&s.rows) {
        let mut cells: Vec<Cell> = vec![(*v).into()];
        match row {
            Ok(p) => {
                cells.extend([p.nbar_b.into(), p.nbar_d.into(), p.d_opt.into(), p.n_opt.into()]);
                cells.extend(p.d_n.iter().map(|&d| Cell::from(d)));
                cells.extend([p.d_cav.into(), p.nocc_b.into(), p.nocc_d.into(), Cell::Text("ok".into())]);
            }
            Err(e) => {
                cells.extend((0..10).map(|_| Cell::Float(f64::NAN)));
                cells.push(Cell::Text(e.to_string()));
            }
        }
        t.push(cells);
    }
    t
}
