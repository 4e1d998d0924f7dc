use std::fs;
use std::path::Path;

use paretoreid::descent::TraceLine;
use paretoreid::metrics::pareto_front;
use serde::Serialize;

use super::OutDir;
use crate::args::FrontArgs;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourcedPoint {
    pub source: String,
    pub row: usize,
    pub objectives: Vec<f64>,
}

fn from_trace(path: &Path, text: &str) -> CliResult<Vec<SourcedPoint>> {
    let mut summaries = Vec::new();
    let mut last_iteration = None;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: TraceLine = serde_json::from_str(line)
            .map_err(|e| CliError::config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        match parsed {
            TraceLine::Summary(s) => summaries.push((n, s.final_objectives)),
            TraceLine::Iteration(r) => last_iteration = Some((n, r.objectives)),
        }
    }
    // an aborted run has no summary; fall back to its last record
    if summaries.is_empty() {
        summaries.extend(last_iteration);
    }
    Ok(summaries
        .into_iter()
        .map(|(row, objectives)| SourcedPoint {
            source: path.display().to_string(),
            row,
            objectives,
        })
        .collect())
}

fn from_csv(path: &Path, text: &str) -> CliResult<Vec<SourcedPoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let records: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>()?;
    let named = |pred: &dyn Fn(&str) -> bool| -> Vec<usize> {
        headers.iter().enumerate().filter(|(_, h)| pred(h)).map(|(i, _)| i).collect()
    };
    let mut cols = named(&|h| h.starts_with("L_"));
    if cols.is_empty() {
        cols = named(&|h| h.len() > 1 && h.starts_with('f') && h[1..].bytes().all(|b| b.is_ascii_digit()));
    }
    if cols.is_empty() {
        cols = (0..headers.len()).collect();
    }
    // columns left empty in every row (L_id of a two-objective sweep) are dropped
    cols.retain(|&c| records.iter().any(|rec| !rec.get(c).unwrap_or("").is_empty()));
    records
        .iter()
        .enumerate()
        .map(|(row, rec)| {
            let objectives = cols
                .iter()
                .map(|&c| {
                    let field = rec.get(c).unwrap_or("");
                    field.trim().parse::<f64>().map_err(|_| {
                        CliError::config(format!(
                            "{} row {}: column {} is not a number: {field:?}",
                            path.display(),
                            row + 1,
                            &headers[c]
                        ))
                    })
                })
                .collect::<CliResult<Vec<f64>>>()?;
            Ok(SourcedPoint {
                source: path.display().to_string(),
                row,
                objectives,
            })
        })
        .collect()
}

/// Every point in the files, in file order.
pub fn front_points(files: &[impl AsRef<Path>]) -> CliResult<Vec<SourcedPoint>> {
    let mut points = Vec::new();
    for f in files {
        let path = f.as_ref();
        let text = fs::read_to_string(path)?;
        let is_trace = path.extension().is_some_and(|e| e == "jsonl" || e == "json");
        points.extend(if is_trace {
            from_trace(path, &text)?
        } else {
            from_csv(path, &text)?
        });
    }
    Ok(points)
}

pub fn run(args: &FrontArgs, out: &OutDir) -> CliResult<serde_json::Value> {
    let points = front_points(&args.files)?;
    if points.is_empty() {
        return Err(CliError::config("no points in the given files"));
    }
    let m = points[0].objectives.len();
    if points.iter().any(|p| p.objectives.len() != m) {
        return Err(CliError::config("files disagree on the number of objectives"));
    }
    let objs: Vec<Vec<f64>> = points.iter().map(|p| p.objectives.clone()).collect();
    let front: Vec<&SourcedPoint> = pareto_front(&objs)?.into_iter().map(|i| &points[i]).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["source".to_string(), "row".to_string()];
    header.extend((0..m).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for p in &front {
        let mut rec = vec![p.source.clone(), p.row.to_string()];
        rec.extend(p.objectives.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let csv = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    out.write("front.csv", &csv)?;
    Ok(serde_json::to_value(&front)?)
}
