//! Reading box-model CSV output back and reshaping it for plotting.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("reading `{path}`: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("`{path}`: non-numeric value `{value}` in column `{column}`")]
    Number {
        path: String,
        column: String,
        value: String,
    },
    #[error("species `{species}` not found in `{path}`")]
    UnknownSpecies { path: String, species: String },
    #[error("output times of `{a}` and `{b}` differ")]
    TimeMismatch { a: String, b: String },
    #[error("nothing to plot")]
    Empty,
}

/// A parsed output file: column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub source: String,
    /// Comment lines, without the leading `#`.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    /// Index of the column for `species`, matched against the name before its unit suffix.
    pub fn find(&self, species: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c == species || c.split(" [").next() == Some(species))
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable, PlotError> {
    let text = std::fs::read_to_string(path).map_err(|e| PlotError::Csv {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    parse_csv(&path.display().to_string(), &text)
}

pub(crate) fn parse_csv(source: &str, text: &str) -> Result<CsvTable, PlotError> {
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l[1..].trim().to_string())
        .collect();
    let err = |e: csv::Error| PlotError::Csv {
        path: source.to_string(),
        source: e,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let row = rec
            .iter()
            .zip(&columns)
            .map(|(v, c)| {
                v.trim().parse::<f64>().map_err(|_| PlotError::Number {
                    path: source.to_string(),
                    column: c.clone(),
                    value: v.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvTable {
        source: source.to_string(),
        comments,
        columns,
        rows,
    })
}

/// Whitespace-separated table for gnuplot: time, then one column per
/// (run, species). Runs are joined on their output times; column titles are
/// `species@label` when more than one run is given.
pub fn plot_table(runs: &[(String, CsvTable)], species: &[String]) -> Result<String, PlotError> {
    let Some((_, first)) = runs.first() else {
        return Err(PlotError::Empty);
    };
    if species.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut cols = Vec::new();
    let mut titles = Vec::new();
    for (label, t) in runs {
        if t.column(0) != first.column(0) {
            return Err(PlotError::TimeMismatch {
                a: first.source.clone(),
                b: t.source.clone(),
            });
        }
        for s in species {
            let k = t.find(s).ok_or_else(|| PlotError::UnknownSpecies {
                path: t.source.clone(),
                species: s.clone(),
            })?;
            cols.push(t.column(k));
            titles.push(if runs.len() > 1 {
                format!("{s}@{label}")
            } else {
                t.columns[k].clone()
            });
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# {}\t{}", first.columns[0], titles.join("\t"));
    for (i, t) in first.column(0).iter().enumerate() {
        let _ = write!(out, "{t:e}");
        for c in &cols {
            let _ = write!(out, "\t{:e}", c[i]);
        }
        out.push('\n');
    }
    Ok(out)
}
