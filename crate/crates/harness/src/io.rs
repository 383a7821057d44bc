//! CSV formats for ensembles and run records.
//!
//! Ensembles: `# key = value` metadata lines, a header `x1,…,xd`, then one
//! particle per row. Records: a fixed header followed by one row per reported
//! iteration; empty cells are missing values. Floats use the shortest
//! representation that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use zodps_core::Ensemble;

use crate::error::{HarnessError, Result};

pub type Metadata = BTreeMap<String, String>;

pub fn format_ensemble(ensemble: &Ensemble, metadata: &Metadata) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let header: Vec<String> = (1..=ensemble.dim()).map(|c| format!("x{c}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in ensemble.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_ensemble(text: &str, path: &Path) -> Result<(Ensemble, Metadata)> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut metadata = Metadata::new();
    let mut dim = None;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| err(n, "metadata line must be `# key = value`".into()))?;
            metadata.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match dim {
            None => {
                let cols: Vec<&str> = line.split(',').collect();
                for (c, name) in cols.iter().enumerate() {
                    if name.trim() != format!("x{}", c + 1) {
                        return Err(err(n, format!("unexpected column `{name}`")));
                    }
                }
                dim = Some(cols.len());
            }
            Some(d) => {
                let before = data.len();
                for cell in line.split(',') {
                    data.push(
                        cell.trim()
                            .parse::<f64>()
                            .map_err(|e| err(n, format!("`{cell}`: {e}")))?,
                    );
                }
                if data.len() - before != d {
                    return Err(err(n, format!("expected {d} values")));
                }
            }
        }
    }
    let dim = dim.ok_or_else(|| err(0, "missing header".into()))?;
    let ensemble = Ensemble::from_flat(data, dim).map_err(|e| err(0, e.to_string()))?;
    Ok((ensemble, metadata))
}

pub fn write_ensemble(path: &Path, ensemble: &Ensemble, metadata: &Metadata) -> Result<()> {
    write_file(path, &format_ensemble(ensemble, metadata))
}

pub fn read_ensemble(path: &Path) -> Result<(Ensemble, Metadata)> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_ensemble(&text, path)
}

/// One CSV row of a run or of a cross-seed aggregate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordRow {
    pub iteration: usize,
    pub wall_time: f64,
    pub kl: Option<f64>,
    pub kl_variance: Option<f64>,
    pub occ_t1: Option<f64>,
    pub occ_t2: Option<f64>,
    pub occ_out: Option<f64>,
    pub degenerate_events: f64,
    pub rgo_rejections: Option<f64>,
    pub rgo_clamps: Option<f64>,
    pub lost_chains: f64,
    pub short_window: bool,
}

pub const RECORD_COLUMNS: [&str; 12] = [
    "iteration",
    "wall_time",
    "kl",
    "kl_variance",
    "occ_t1",
    "occ_t2",
    "occ_out",
    "degenerate_events",
    "rgo_rejections",
    "rgo_clamps",
    "lost_chains",
    "short_window",
];

impl RecordRow {
    pub fn is_evaluation(&self) -> bool {
        self.kl.is_some() || self.occ_t1.is_some()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_records(rows: &[RecordRow]) -> String {
    let mut out = RECORD_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            r.iteration.to_string(),
            r.wall_time.to_string(),
            opt(r.kl),
            opt(r.kl_variance),
            opt(r.occ_t1),
            opt(r.occ_t2),
            opt(r.occ_out),
            r.degenerate_events.to_string(),
            opt(r.rgo_rejections),
            opt(r.rgo_clamps),
            r.lost_chains.to_string(),
            u8::from(r.short_window).to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<RecordRow>> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RECORD_COLUMNS.join(",") => {}
        _ => return Err(err(1, "unexpected record header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != RECORD_COLUMNS.len() {
            return Err(err(n, format!("expected {} cells", RECORD_COLUMNS.len())));
        }
        let num = |c: usize| -> Result<f64> {
            cells[c]
                .parse::<f64>()
                .map_err(|e| err(n, format!("{}: {e}", RECORD_COLUMNS[c])))
        };
        let maybe = |c: usize| -> Result<Option<f64>> {
            if cells[c].is_empty() {
                Ok(None)
            } else {
                num(c).map(Some)
            }
        };
        rows.push(RecordRow {
            iteration: cells[0]
                .parse()
                .map_err(|e| err(n, format!("iteration: {e}")))?,
            wall_time: num(1)?,
            kl: maybe(2)?,
            kl_variance: maybe(3)?,
            occ_t1: maybe(4)?,
            occ_t2: maybe(5)?,
            occ_out: maybe(6)?,
            degenerate_events: num(7)?,
            rgo_rejections: maybe(8)?,
            rgo_clamps: maybe(9)?,
            lost_chains: num(10)?,
            short_window: match cells[11] {
                "0" => false,
                "1" => true,
                other => return Err(err(n, format!("short_window: `{other}`"))),
            },
        });
    }
    Ok(rows)
}

pub fn write_records(path: &Path, rows: &[RecordRow]) -> Result<()> {
    write_file(path, &format_records(rows))
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_records(&text, path)
}

/// Cross-seed mean (and, for KL, sample variance) at every iteration where
/// some seed was evaluated.
pub fn aggregate(per_seed: &[Vec<RecordRow>]) -> Vec<RecordRow> {
    let mut by_iter: BTreeMap<usize, Vec<&RecordRow>> = BTreeMap::new();
    for rows in per_seed {
        for r in rows.iter().filter(|r| r.is_evaluation()) {
            by_iter.entry(r.iteration).or_default().push(r);
        }
    }
    by_iter
        .into_iter()
        .map(|(iteration, rows)| {
            let mean_of = |f: &dyn Fn(&RecordRow) -> Option<f64>| {
                mean_var(rows.iter().filter_map(|r| f(r))).map(|(m, _)| m)
            };
            let kl = mean_var(rows.iter().filter_map(|r| r.kl));
            RecordRow {
                iteration,
                wall_time: mean_of(&|r| Some(r.wall_time)).unwrap_or(0.0),
                kl: kl.map(|(m, _)| m),
                kl_variance: kl.map(|(_, v)| v),
                occ_t1: mean_of(&|r| r.occ_t1),
                occ_t2: mean_of(&|r| r.occ_t2),
                occ_out: mean_of(&|r| r.occ_out),
                degenerate_events: mean_of(&|r| Some(r.degenerate_events)).unwrap_or(0.0),
                rgo_rejections: mean_of(&|r| r.rgo_rejections),
                rgo_clamps: mean_of(&|r| r.rgo_clamps),
                lost_chains: mean_of(&|r| Some(r.lost_chains)).unwrap_or(0.0),
                short_window: rows.iter().any(|r| r.short_window),
            }
        })
        .collect()
}

/// Mean and unbiased variance (zero for a single value).
pub fn mean_var(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((m, var))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
