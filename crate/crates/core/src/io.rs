//! CSV readers and writers for datasets, score matrices, ensemble outputs and
//! fitted IRT models.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! an emitted file and writing it again reproduces it byte for byte. A column
//! named `label` (any case) holds 0/1 anomaly labels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::eval::{PairedDifference, Top2Result};
use crate::irt::{IrtModel, ItemParams};
use crate::model::{EnsembleResult, LabeledDataset, ScoreMatrix};

pub const LABEL_COLUMN: &str = "label";

fn is_label(name: &str) -> bool {
    name.trim().eq_ignore_ascii_case(LABEL_COLUMN)
}

fn parse_f64(s: &str, row: usize, column: &str) -> Result<f64> {
    s.trim().parse::<f64>().or_else(|_| {
        invalid(format!(
            "row {row}, column `{column}`: `{s}` is not a number"
        ))
    })
}

fn parse_label(s: &str, row: usize) -> Result<u8> {
    match s.trim() {
        "0" | "0.0" => Ok(0),
        "1" | "1.0" => Ok(1),
        other => invalid(format!("row {row}: label `{other}` is not 0 or 1")),
    }
}

/// A numeric table with an optional label column split off.
struct Table {
    names: Vec<String>,
    values: Array2<f64>,
    labels: Option<Vec<u8>>,
}

fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_cols: Vec<usize> = (0..header.len()).filter(|&j| is_label(&header[j])).collect();
    if label_cols.len() > 1 {
        return invalid("more than one label column");
    }
    let label_col = label_cols.first().copied();
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != label_col)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return invalid("no numeric columns");
    }
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == label_col {
                labels.push(parse_label(field, row)?);
            } else {
                flat.push(parse_f64(field, row, &header[j])?);
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return invalid("table has no rows");
    }
    let values = Array2::from_shape_vec((n_rows, names.len()), flat)
        .map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    Ok(Table {
        names,
        values,
        labels: label_col.map(|_| labels),
    })
}

fn write_table<W: Write>(
    w: W,
    names: &[String],
    values: impl Iterator<Item = Vec<f64>>,
    labels: Option<&[u8]>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    if labels.is_some() {
        header.push(LABEL_COLUMN);
    }
    out.write_record(&header)?;
    for (i, row) in values.enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn rows(m: ndarray::ArrayView2<'_, f64>) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..m.nrows()).map(move |i| m.row(i).to_vec())
}

pub fn read_dataset<R: Read>(r: R, name: &str) -> Result<LabeledDataset> {
    let t = read_table(r)?;
    LabeledDataset::with_feature_names(name, t.names, t.values, t.labels)
}

pub fn write_dataset<W: Write>(w: W, ds: &LabeledDataset) -> Result<()> {
    write_table(w, ds.feature_names(), rows(ds.features()), ds.labels())
}

/// Reads a score matrix, one column per detector, with optional labels.
pub fn read_scores<R: Read>(r: R) -> Result<(ScoreMatrix, Option<Vec<u8>>)> {
    let t = read_table(r)?;
    Ok((ScoreMatrix::new(t.values, t.names)?, t.labels))
}

pub fn write_scores<W: Write>(w: W, m: &ScoreMatrix, labels: Option<&[u8]>) -> Result<()> {
    check_labels(labels, m.n_obs())?;
    write_table(w, m.detector_names(), rows(m.scores()), labels)
}

fn check_labels(labels: Option<&[u8]>, n: usize) -> Result<()> {
    match labels {
        Some(l) if l.len() != n => invalid(format!("{} labels for {n} rows", l.len())),
        _ => Ok(()),
    }
}

/// One column per ensemble method.
pub fn write_ensembles<W: Write>(
    w: W,
    results: &[EnsembleResult],
    labels: Option<&[u8]>,
) -> Result<()> {
    let n = results.first().map_or(0, |r| r.scores.len());
    if results.iter().any(|r| r.scores.len() != n) {
        return invalid("ensemble results differ in length");
    }
    check_labels(labels, n)?;
    let names: Vec<String> = results.iter().map(|r| r.method.clone()).collect();
    let values = (0..n).map(|i| results.iter().map(|r| r.scores[i]).collect());
    write_table(w, &names, values, labels)
}

/// Reads an ensemble file back as a score matrix (methods as columns).
pub fn read_ensembles<R: Read>(r: R) -> Result<(ScoreMatrix, Option<Vec<u8>>)> {
    read_scores(r)
}

/// Item parameter table: `detector,alpha,beta,gamma`.
pub fn write_items<W: Write>(w: W, names: &[String], items: &[ItemParams]) -> Result<()> {
    if names.len() != items.len() {
        return invalid(format!("{} names for {} items", names.len(), items.len()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["detector", "alpha", "beta", "gamma"])?;
    for (name, it) in names.iter().zip(items) {
        out.write_record([
            name.clone(),
            it.alpha.to_string(),
            it.beta.to_string(),
            it.gamma.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_items<R: Read>(r: R) -> Result<(Vec<String>, Vec<ItemParams>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if header != ["detector", "alpha", "beta", "gamma"] {
        return invalid("item table header must be detector,alpha,beta,gamma");
    }
    let mut names = Vec::new();
    let mut items = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let v = |j: usize| parse_f64(&rec[j], row, &header[j]);
        names.push(rec[0].to_string());
        items.push(ItemParams::new(v(1)?, v(2)?, v(3)?)?);
    }
    Ok((names, items))
}

/// Latent traits: `observation,theta`, observations numbered from 1.
pub fn write_theta<W: Write>(w: W, theta: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["observation", "theta"])?;
    for (i, t) in theta.iter().enumerate() {
        out.write_record([(i + 1).to_string(), t.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_theta<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    rdr.records()
        .enumerate()
        .map(|(i, rec)| parse_f64(&rec?[1], i + 1, "theta"))
        .collect()
}

/// Model summary: iterations, convergence, posterior SD and final
/// log-likelihood as `key,value` rows.
pub fn write_fit_summary<W: Write>(w: W, model: &IrtModel) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["key", "value"])?;
    let ll = model.log_likelihood_trace.last().copied().unwrap_or(f64::NAN);
    for (k, v) in [
        ("iterations", model.iterations.to_string()),
        ("converged", model.converged.to_string()),
        ("posterior_sd", model.posterior_sd.to_string()),
        ("log_likelihood", ll.to_string()),
    ] {
        out.write_record([k.to_string(), v])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_paired_differences<W: Write>(w: W, table: &[PairedDifference]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "experiment", "iteration", "method", "n", "mean_diff", "sd_diff", "t", "df", "p",
    ])?;
    for d in table {
        out.write_record([
            d.experiment.clone(),
            d.iteration.map_or_else(|| "all".to_string(), |i| i.to_string()),
            d.method.clone(),
            d.n.to_string(),
            d.mean_diff.to_string(),
            d.sd_diff.to_string(),
            d.test.t.to_string(),
            d.test.df.to_string(),
            d.test.p.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_top2<W: Write>(w: W, table: &[Top2Result]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["group", "best", "second", "t", "df", "p", "significant"])?;
    for r in table {
        out.write_record([
            r.group.clone(),
            r.best.clone(),
            r.second.clone(),
            r.test.t.to_string(),
            r.test.df.to_string(),
            r.test.p.to_string(),
            r.significant.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// File stem used as a dataset name.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}
