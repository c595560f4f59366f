//! Mean and standard error of exploitability across trace files, grouped by
//! metadata keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::sweep::{read_trace, TraceFile};

/// Per-group, per-round statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Values of the group-by keys, in the order they were requested.
    pub group: Vec<String>,
    pub round: u64,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over √n; 0 when n = 1.
    pub stderr: f64,
    pub mean_global_step: f64,
    pub mean_population_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub group_by: Vec<String>,
    /// Sorted by group, then round.
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// The last round of every group.
    pub fn final_rows(&self) -> Vec<&SummaryRow> {
        let mut last: BTreeMap<&[String], &SummaryRow> = BTreeMap::new();
        for row in &self.rows {
            last.insert(&row.group, row);
        }
        last.into_values().collect()
    }

    /// Final row of the group whose key values are `group`.
    pub fn final_row(&self, group: &[&str]) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .rev()
            .find(|r| r.group.iter().map(String::as_str).eq(group.iter().copied()))
    }
}

/// Mean and standard error of the mean (sample standard deviation over √n).
/// A single value has standard error 0.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Paths matching `pattern`, sorted. No match is an error.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let bad = |message: String| HarnessError::Pattern {
        pattern: pattern.to_string(),
        message,
    };
    let mut paths = Vec::new();
    for entry in glob::glob(pattern).map_err(|e| bad(e.to_string()))? {
        paths.push(entry.map_err(|e| bad(e.to_string()))?);
    }
    if paths.is_empty() {
        return Err(bad("no files match".into()));
    }
    paths.sort();
    Ok(paths)
}

pub fn aggregate_files(paths: &[PathBuf], group_by: &[String]) -> Result<Summary> {
    let traces = paths
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&traces, group_by)
}

/// Groups `traces` by the values of the `group_by` metadata keys and
/// averages them round by round. All traces of a group must share one
/// round grid.
pub fn aggregate(traces: &[TraceFile], group_by: &[String]) -> Result<Summary> {
    let mut groups: BTreeMap<Vec<String>, Vec<&TraceFile>> = BTreeMap::new();
    for t in traces {
        let key = group_by
            .iter()
            .map(|k| {
                t.get(k)
                    .map(str::to_string)
                    .ok_or_else(|| HarnessError::Trace {
                        path: t.path.clone(),
                        message: format!("no metadata key {k:?}"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        groups.entry(key).or_default().push(t);
    }
    let mut rows = Vec::new();
    for (key, members) in groups {
        let first = members[0];
        for other in &members[1..] {
            check_aligned(first, other)?;
        }
        if members.len() == 1 {
            log::warn!(
                "group {key:?} has a single trace ({}); standard error reported as 0",
                first.path.display()
            );
        }
        for (i, record) in first.records.iter().enumerate() {
            let column =
                |f: &dyn Fn(&TraceFile) -> f64| members.iter().map(|t| f(t)).collect::<Vec<f64>>();
            let (mean, stderr) = mean_stderr(&column(&|t| t.records[i].exploitability));
            let (mean_global_step, _) = mean_stderr(&column(&|t| t.records[i].global_step as f64));
            let (mean_population_size, _) =
                mean_stderr(&column(&|t| t.records[i].population_size as f64));
            rows.push(SummaryRow {
                group: key.clone(),
                round: record.round,
                n: members.len(),
                mean,
                stderr,
                mean_global_step,
                mean_population_size,
            });
        }
    }
    Ok(Summary {
        group_by: group_by.to_vec(),
        rows,
    })
}

fn check_aligned(first: &TraceFile, other: &TraceFile) -> Result<()> {
    let a: Vec<u64> = first.records.iter().map(|r| r.round).collect();
    let b: Vec<u64> = other.records.iter().map(|r| r.round).collect();
    if a == b {
        return Ok(());
    }
    let detail = match a.iter().zip(&b).position(|(x, y)| x != y) {
        Some(i) => format!("record {i} is at round {} vs {}", a[i], b[i]),
        None => format!("{} records vs {}", a.len(), b.len()),
    };
    Err(HarnessError::Alignment {
        first: first.path.clone(),
        other: other.path.clone(),
        detail,
    })
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    let mut writer = csv::Writer::from_path(path).map_err(HarnessError::csv(path))?;
    let mut header = summary.group_by.clone();
    header.extend(
        [
            "round",
            "n",
            "mean_exploitability",
            "stderr_exploitability",
            "mean_global_step",
            "mean_population_size",
        ]
        .map(String::from),
    );
    writer
        .write_record(&header)
        .map_err(HarnessError::csv(path))?;
    for row in &summary.rows {
        let mut fields = row.group.clone();
        fields.extend([
            row.round.to_string(),
            row.n.to_string(),
            row.mean.to_string(),
            row.stderr.to_string(),
            row.mean_global_step.to_string(),
            row.mean_population_size.to_string(),
        ]);
        writer
            .write_record(&fields)
            .map_err(HarnessError::csv(path))?;
    }
    writer.flush().map_err(HarnessError::io(path))?;
    Ok(())
}
