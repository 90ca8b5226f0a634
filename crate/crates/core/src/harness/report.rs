//! Pivots result rows into the tables and figure series of the study.
//!
//! | layout  | rows                         | columns                          |
//! |---------|------------------------------|----------------------------------|
//! | table1  | scheme × model               | af, bf, sgf, cf, random, drl     |
//! | fig2    | fp (model uom)               | drim-a, drim-na, cstorm, storm   |
//! | fig3a   | fp × ip ∈ 1..5 (model uom)   | drim-a, drim-na, cstorm, storm   |
//! | fig3b   | fp × p_nv grid (model uom)   | drim-a, drim-na, cstorm, storm   |
//! | fig3c   | fp × prior_a grid (uom)      | drim-a, drim-na, cstorm, storm   |
//! | table2  | scheme                       | mean_seconds                     |
//!
//! Cells hold the chosen metric (mean `n_true` by default). A layout with
//! any uncovered cell is an error naming that cell.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use super::{Axis, Opponent, ResultRow};
use crate::error::{Error, Result};
use crate::opinion::OpinionModel;
use crate::strategies::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Table1,
    Fig2,
    Fig3a,
    Fig3b,
    Fig3c,
    Table2,
}

impl Layout {
    pub const ALL: [Layout; 6] = [
        Layout::Table1,
        Layout::Fig2,
        Layout::Fig3a,
        Layout::Fig3b,
        Layout::Fig3c,
        Layout::Table2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layout::Table1 => "table1",
            Layout::Fig2 => "fig2",
            Layout::Fig3a => "fig3a",
            Layout::Fig3b => "fig3b",
            Layout::Fig3c => "fig3c",
            Layout::Table2 => "table2",
        }
    }

    fn axis(self) -> Axis {
        match self {
            Layout::Fig3a => Axis::Ip,
            Layout::Fig3b => Axis::PNv,
            Layout::Fig3c => Axis::Prior,
            _ => Axis::None,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param("layout", format!("unknown layout {s:?}")))
    }
}

/// Value placed in each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    NTrue,
    DecidedTrue,
}

impl Metric {
    fn of(self, row: &ResultRow) -> f64 {
        match self {
            Metric::NTrue => row.mean_n_true,
            Metric::DecidedTrue => row.mean_decided_true,
        }
    }
}

/// A rendered layout: header plus records, all as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub layout: Layout,
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

fn find<'r>(
    rows: &'r [ResultRow],
    layout: Layout,
    scheme: Scheme,
    model: OpinionModel,
    opponent: Opponent,
    value: f64,
) -> Result<&'r ResultRow> {
    let axis = layout.axis();
    rows.iter()
        .find(|r| {
            let c = &r.cell;
            c.scheme == scheme && c.model == model && c.opponent == opponent && c.axis == axis && c.value == value
        })
        .ok_or_else(|| Error::MissingCell {
            layout: layout.name().into(),
            cell: format!(
                "scheme={} model={} fp={} {}={}",
                scheme.name(),
                model.name(),
                opponent.name(),
                axis.name(),
                value
            ),
        })
}

fn scheme_header(first: &[&str]) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain(Scheme::ALL.iter().map(|s| s.name().to_string()))
        .collect()
}

/// Builds `layout` from `rows`.
pub fn emit_report(rows: &[ResultRow], layout: Layout, metric: Metric) -> Result<Report> {
    let mut records = Vec::new();
    let header = match layout {
        Layout::Table1 => {
            for scheme in Scheme::ALL {
                for model in OpinionModel::ALL {
                    let mut rec = vec![scheme.name().to_string(), model.name().to_string()];
                    for opp in Opponent::ALL {
                        rec.push(metric.of(find(rows, layout, scheme, model, opp, 0.0)?).to_string());
                    }
                    records.push(rec);
                }
            }
            ["scheme", "model"]
                .into_iter()
                .map(String::from)
                .chain(Opponent::ALL.iter().map(|o| o.name().to_string()))
                .collect()
        }
        Layout::Fig2 => {
            for opp in Opponent::ALL {
                let mut rec = vec![opp.name().to_string()];
                for scheme in Scheme::ALL {
                    rec.push(metric.of(find(rows, layout, scheme, OpinionModel::Uom, opp, 0.0)?).to_string());
                }
                records.push(rec);
            }
            scheme_header(&["fp"])
        }
        Layout::Fig3a | Layout::Fig3b | Layout::Fig3c => {
            let axis = layout.axis();
            let opponents: Vec<Opponent> = Opponent::ALL
                .into_iter()
                .filter(|o| rows.iter().any(|r| r.cell.axis == axis && r.cell.opponent == *o))
                .collect();
            if opponents.is_empty() {
                return Err(Error::MissingCell {
                    layout: layout.name().into(),
                    cell: format!("any row with axis {}", axis.name()),
                });
            }
            for opp in opponents {
                for value in axis.default_grid() {
                    let mut rec = vec![opp.name().to_string(), value.to_string()];
                    for scheme in Scheme::ALL {
                        rec.push(metric.of(find(rows, layout, scheme, OpinionModel::Uom, opp, value)?).to_string());
                    }
                    records.push(rec);
                }
            }
            scheme_header(&["fp", axis.name()])
        }
        Layout::Table2 => {
            for scheme in Scheme::ALL {
                let times: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.cell.scheme == scheme)
                    .map(|r| r.mean_seconds)
                    .collect();
                if times.is_empty() {
                    return Err(Error::MissingCell {
                        layout: layout.name().into(),
                        cell: format!("scheme={}", scheme.name()),
                    });
                }
                let mean = times.iter().sum::<f64>() / times.len() as f64;
                records.push(vec![scheme.name().to_string(), mean.to_string()]);
            }
            vec!["scheme".into(), "mean_seconds".into()]
        }
    };
    Ok(Report {
        layout,
        header,
        records,
    })
}

pub fn write_report<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.header)?;
    for rec in &report.records {
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows back from a `results.csv` written by [`super::write_results`].
pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Config {
                line,
                reason: format!("missing column {k}"),
            })
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?.parse().map_err(|e| Error::Config {
                line,
                reason: format!("column {k}: {e}"),
            })
        };
        let bad = |e: Error| Error::Config {
            line,
            reason: e.to_string(),
        };
        rows.push(ResultRow {
            cell: super::Cell {
                scheme: field(0)?.parse().map_err(bad)?,
                model: field(1)?.parse().map_err(bad)?,
                opponent: field(2)?.parse().map_err(bad)?,
                axis: field(3)?.parse().map_err(bad)?,
                value: num(4)?,
            },
            runs: num(5)? as usize,
            mean_n_true: num(6)?,
            std_n_true: num(7)?,
            mean_n_false: num(8)?,
            mean_decided_true: num(9)?,
            std_decided_true: num(10)?,
            mean_seconds: num(11)?,
        });
    }
    Ok(rows)
}
