//! Panel CSV files: `period,<treated>,<control 1>,...` with consecutive
//! integer periods, plus the treatment window given as inclusive labels.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tdid::{Panel, Series};

use crate::error::{CliError, Result};

/// First and last period of the treatment window, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first: i64,
    pub last: i64,
}

impl FromStr for Window {
    type Err = CliError;

    /// Accepts `a:b` or a single label `a`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Input(format!("window '{s}' is not of the form first:last"));
        let (a, b) = match s.trim().split_once(':') {
            Some((a, b)) => (a, b),
            None => (s, s),
        };
        let first = a.trim().parse::<i64>().map_err(|_| bad())?;
        let last = b.trim().parse::<i64>().map_err(|_| bad())?;
        if last < first {
            return Err(CliError::Input(format!("window {first}:{last} ends before it starts")));
        }
        Ok(Window { first, last })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.first, self.last)
    }
}

/// Location of the optional window file stored next to a panel CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".window");
    PathBuf::from(name)
}

pub fn read_sidecar(csv: &Path) -> Result<Option<Window>> {
    let path = sidecar_path(csv);
    match std::fs::read_to_string(&path) {
        Ok(text) => text.trim().parse().map(Some),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::io(format!("reading {}", path.display()), e)),
    }
}

/// Column-major panel data as stored on disk. `labels[0]` is the treated unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    pub periods: Vec<i64>,
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl PanelFile {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
        if header.len() < 3 {
            return Err(CliError::Csv {
                line: 1,
                column: header.len() + 1,
                message: "header needs a period column, a treated unit and at least one control".into(),
            });
        }
        if !header[0].eq_ignore_ascii_case("period") {
            return Err(CliError::Csv {
                line: 1,
                column: 1,
                message: format!("first column must be 'period', found '{}'", &header[0]),
            });
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut periods = Vec::new();
        let mut columns = vec![Vec::new(); labels.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&e, 0))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(CliError::Csv {
                    line,
                    column: rec.len().min(header.len()) + 1,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let period = rec[0].parse::<i64>().map_err(|_| CliError::Csv {
                line,
                column: 1,
                message: format!("period '{}' is not an integer", &rec[0]),
            })?;
            if let Some(&prev) = periods.last() {
                if period <= prev {
                    return Err(CliError::Csv {
                        line,
                        column: 1,
                        message: format!("period {period} does not follow {prev}; periods must increase"),
                    });
                }
                if period != prev + 1 {
                    return Err(CliError::Csv {
                        line,
                        column: 1,
                        message: format!("gap in periods: {period} follows {prev}, period {} is missing", prev + 1),
                    });
                }
            }
            for (k, cell) in rec.iter().skip(1).enumerate() {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Csv {
                    line,
                    column: k + 2,
                    message: format!("'{cell}' in column '{}' at period {period} is not a finite number", labels[k]),
                })?;
                columns[k].push(v);
            }
            periods.push(period);
        }
        if periods.is_empty() {
            return Err(CliError::Csv {
                line: 2,
                column: 1,
                message: "no data rows".into(),
            });
        }
        Ok(PanelFile {
            periods,
            labels,
            columns,
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
        Self::read(file)
    }

    /// Writes the panel with shortest round-trip float formatting.
    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| CliError::Input(format!("writing csv: {e}"));
        let mut header = vec!["period".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (i, p) in self.periods.iter().enumerate() {
            let mut row = vec![p.to_string()];
            row.extend(self.columns.iter().map(|c| format!("{:?}", c[i])));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io("writing csv", e))
    }

    /// Natural log of every cell; rejects non-positive values.
    pub fn to_log(&self) -> Result<Self> {
        let mut out = self.clone();
        for (label, col) in out.labels.iter().zip(out.columns.iter_mut()) {
            for (i, v) in col.iter_mut().enumerate() {
                if *v <= 0.0 {
                    return Err(CliError::Input(format!(
                        "cannot take the log of {v} in column '{label}' at period {}",
                        self.periods[i]
                    )));
                }
                *v = v.ln();
            }
        }
        Ok(out)
    }

    pub fn to_panel(&self, window: Window) -> Result<Panel> {
        let (lo, hi) = (self.periods[0], *self.periods.last().unwrap());
        if window.first < lo || window.last > hi {
            return Err(CliError::Input(format!(
                "window {window} lies outside the observed periods {lo}:{hi}"
            )));
        }
        let n_pre = self.periods.iter().filter(|&&p| p < window.first).count();
        let n_post = self.periods.iter().filter(|&&p| p > window.last).count();
        let n_transition = self.periods.len() - n_pre - n_post;
        if n_pre < 2 || n_post < 2 {
            return Err(CliError::Input(format!(
                "window {window} leaves {n_pre} pre- and {n_post} post-treatment periods; at least 2 each are needed"
            )));
        }
        let mut series = self
            .labels
            .iter()
            .zip(&self.columns)
            .map(|(l, c)| Series::new(l.clone(), c.clone()));
        let treated = series.next().expect("at least one unit column");
        Ok(Panel::with_periods(
            treated,
            series.collect(),
            self.periods.clone(),
            n_pre,
            n_transition,
            n_post,
        )?)
    }

    pub fn from_panel(panel: &Panel) -> Self {
        let units = std::iter::once(panel.treated()).chain(panel.controls());
        PanelFile {
            periods: panel.periods().to_vec(),
            labels: units.clone().map(|s| s.label.clone()).collect(),
            columns: units.map(|s| s.values.clone()).collect(),
        }
    }
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> CliError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    CliError::Csv {
        line,
        column: 1,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "period,a,b\n1990,1.0,2.0\n1991,1.5,2.5\n1992,2.0,3.0\n1993,2.5,3.5\n1994,3.0,4.0\n";

    #[test]
    fn reads_and_partitions() {
        let f = PanelFile::read(GOOD.as_bytes()).unwrap();
        assert_eq!(f.periods, vec![1990, 1991, 1992, 1993, 1994]);
        let p = f.to_panel("1992".parse().unwrap()).unwrap();
        assert_eq!((p.n_pre(), p.n_transition(), p.n_post()), (2, 1, 2));
        assert!(f.to_panel("1991:1992".parse().unwrap()).is_err());
    }

    #[test]
    fn gap_names_the_missing_period() {
        let e = PanelFile::read("period,a,b\n1990,1,2\n1992,1,2\n".as_bytes()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("1991"), "{msg}");
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let e = PanelFile::read("period,a,b\n1990,1,2\n1991,1,x\n".as_bytes()).unwrap_err();
        match e {
            CliError::Csv { line, column, .. } => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read_is_exact() {
        let f = PanelFile {
            periods: vec![0, 1],
            labels: vec!["t".into(), "c".into()],
            columns: vec![vec![0.1 + 0.2, 1e-300], vec![std::f64::consts::PI, -2.5e17]],
        };
        let mut buf = Vec::new();
        f.write(&mut buf).unwrap();
        assert_eq!(PanelFile::read(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn log_rejects_non_positive() {
        let f = PanelFile::read("period,a,b\n1,1,0\n".as_bytes()).unwrap();
        assert!(matches!(f.to_log(), Err(CliError::Input(_))));
    }
}
