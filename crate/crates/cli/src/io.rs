//! Input files in, reports and sample dumps out.
//!
//! Counts come in two CSV layouts. Long form has the header
//! `doc_id,word_id,count` and one row per nonzero entry; dense form has one row
//! of `p` counts per document. A headerless three-column file is read as long
//! form when the vocabulary size is known to differ from 3.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};
use mixwass_core::estimators::CountVector;
use mixwass_core::inference::LimitSampleSet;
use mixwass_core::{CostMatrix, Error, TopicMatrix};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Column sums further than this from 1 are rejected rather than renormalized.
pub const TOPIC_SUM_TOL: f64 = 1e-6;

const LONG_HEADER: [&str; 3] = ["doc_id", "word_id", "count"];

/// Documents read from a count file, in ascending `doc_id` order for long form
/// and in row order (ids 0, 1, ...) for dense form.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub doc_ids: Vec<u64>,
    pub docs: Vec<CountVector>,
    pub p: usize,
}

fn rows(path: &Path) -> CliResult<Vec<(u64, StringRecord)>> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut out = vec![];
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_count(path: &Path, line: u64, field: &str) -> CliResult<u64> {
    match field.parse::<i128>() {
        Ok(v) if v < 0 => Err(CliError::parse(path, line, format!("negative count {v}"))),
        Ok(v) => u64::try_from(v).map_err(|_| CliError::parse(path, line, format!("count {v} out of range"))),
        Err(_) if field.parse::<f64>().is_ok() => Err(CliError::parse(path, line, format!("non-integer count {field:?}"))),
        Err(_) => Err(CliError::parse(path, line, format!("not a count: {field:?}"))),
    }
}

fn is_numeric_row(rec: &StringRecord) -> bool {
    rec.iter().all(|f| f.parse::<f64>().is_ok())
}

/// Reads a count file. `p` is the vocabulary size if known (e.g. from the
/// topic matrix); without it dense files take `p` from the first row and long
/// files from the largest word id.
pub fn load_corpus(path: &Path, p: Option<usize>) -> CliResult<Corpus> {
    let rows = rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Ok(Corpus { doc_ids: vec![], docs: vec![], p: p.unwrap_or(0) });
    };
    let header: Vec<&str> = first.iter().collect();
    if header == LONG_HEADER {
        return load_long(path, &rows[1..], p);
    }
    if !is_numeric_row(first) {
        // column labels of a dense file
        return load_dense(path, &rows[1..], p.or(Some(first.len())));
    }
    match p {
        Some(p) if first.len() == 3 && p != 3 => load_long(path, &rows, Some(p)),
        _ => load_dense(path, &rows, p),
    }
}

/// [`load_corpus`] without the document ids.
pub fn load_counts(path: &Path, p: Option<usize>) -> CliResult<Vec<CountVector>> {
    Ok(load_corpus(path, p)?.docs)
}

fn load_long(path: &Path, rows: &[(u64, StringRecord)], p: Option<usize>) -> CliResult<Corpus> {
    // doc -> (first line, word -> count)
    let mut docs: BTreeMap<u64, (u64, BTreeMap<usize, u64>)> = BTreeMap::new();
    let mut max_word = None;
    for (line, rec) in rows {
        let line = *line;
        if rec.len() != 3 {
            return Err(CliError::parse(path, line, format!("expected 3 fields (doc_id,word_id,count), found {}", rec.len())));
        }
        let doc = rec[0]
            .parse::<u64>()
            .map_err(|_| CliError::parse(path, line, format!("bad doc_id {:?}", &rec[0])))?;
        let word = rec[1]
            .parse::<usize>()
            .map_err(|_| CliError::parse(path, line, format!("bad word_id {:?}", &rec[1])))?;
        let count = parse_count(path, line, &rec[2])?;
        if let Some(p) = p {
            if word >= p {
                return Err(CliError::parse(path, line, format!("word_id {word} outside [0, {p})")));
            }
        }
        max_word = max_word.max(Some(word));
        let entry = docs.entry(doc).or_insert((line, BTreeMap::new()));
        *entry.1.entry(word).or_insert(0) += count;
    }
    let p = p.unwrap_or(max_word.map_or(0, |w| w + 1));
    let mut out = Corpus { doc_ids: vec![], docs: vec![], p };
    for (doc, (line, words)) in docs {
        let mut counts = vec![0u64; p];
        for (w, c) in words {
            counts[w] = c;
        }
        let cv = CountVector::new(counts).map_err(|e| CliError::parse(path, line, format!("document {doc}: {e}")))?;
        out.doc_ids.push(doc);
        out.docs.push(cv);
    }
    Ok(out)
}

fn load_dense(path: &Path, rows: &[(u64, StringRecord)], p: Option<usize>) -> CliResult<Corpus> {
    let width = p.or(rows.first().map(|(_, r)| r.len())).unwrap_or(0);
    let mut out = Corpus { doc_ids: vec![], docs: vec![], p: width };
    for (i, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != width {
            return Err(CliError::parse(path, *line, format!("ragged row: {} fields, expected {width}", rec.len())));
        }
        let counts = rec.iter().map(|f| parse_count(path, *line, f)).collect::<CliResult<Vec<_>>>()?;
        let cv = CountVector::new(counts).map_err(|e| CliError::parse(path, *line, e.to_string()))?;
        out.doc_ids.push(i as u64);
        out.docs.push(cv);
    }
    Ok(out)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

/// Writes long form with a header, nonzero entries only, doc ids 0, 1, ...
pub fn save_counts(path: &Path, docs: &[CountVector]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(LONG_HEADER).map_err(err)?;
    for (d, doc) in docs.iter().enumerate() {
        for (j, &c) in doc.counts().iter().enumerate() {
            if c > 0 {
                w.write_record([d.to_string(), j.to_string(), c.to_string()]).map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn real_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut rows = rows(path)?;
    if rows.first().is_some_and(|(_, r)| !is_numeric_row(r)) {
        rows.remove(0);
    }
    let Some((_, first)) = rows.first() else {
        return Err(CliError::parse(path, 1, "no numeric rows"));
    };
    let width = first.len();
    let mut data = Vec::with_capacity(rows.len() * width);
    for (line, rec) in &rows {
        if rec.len() != width {
            return Err(CliError::parse(path, *line, format!("ragged row: {} fields, expected {width}", rec.len())));
        }
        for f in rec.iter() {
            let v: f64 = f.parse().map_err(|_| CliError::parse(path, *line, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(CliError::parse(path, *line, format!("non-finite entry {f:?}")));
            }
            data.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(rows.len(), width, &data))
}

/// Reads a p x K matrix whose columns are topics. Columns within
/// [`TOPIC_SUM_TOL`] of summing to one are renormalized.
pub fn load_topics(path: &Path) -> CliResult<TopicMatrix> {
    let mut m = real_matrix(path)?;
    if let Some(v) = m.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidSimplex(format!("{}: negative topic entry {v}", path.display())).into());
    }
    for c in 0..m.ncols() {
        let s = m.column(c).sum();
        if (s - 1.0).abs() > TOPIC_SUM_TOL {
            return Err(Error::InvalidSimplex(format!("{}: topic column {c} sums to {s}", path.display())).into());
        }
        m.column_mut(c).iter_mut().for_each(|v| *v /= s);
    }
    Ok(TopicMatrix::new(m)?)
}

pub fn save_topics(path: &Path, a: &TopicMatrix) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    for j in 0..a.p() {
        // `{:?}` prints the shortest string that round-trips
        w.write_record(a.row(j).iter().map(|v| format!("{v:?}"))).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a K x K table of component distances.
pub fn load_cost(path: &Path) -> CliResult<CostMatrix> {
    Ok(CostMatrix::from_table(real_matrix(path)?)?)
}

pub fn save_report<T: Serialize>(report: &T, path: &Path) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| CliError::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Dumps draws in generation order as `draw,value`.
pub fn save_limit_samples(set: &LimitSampleSet, path: &Path) -> CliResult<()> {
    save_samples(&set.samples, path)
}

pub fn save_samples(values: &[f64], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(["draw", "value"]).map_err(err)?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:?}")]).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Series dumps as `series,index,value`.
pub fn save_series(series: &[(String, Vec<f64>)], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(["series", "index", "value"]).map_err(err)?;
    for (name, values) in series {
        for (i, v) in values.iter().enumerate() {
            w.write_record([name.clone(), i.to_string(), format!("{v:?}")]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn load_samples(path: &Path) -> CliResult<Vec<f64>> {
    let rows = rows(path)?;
    let mut out = vec![];
    for (line, rec) in rows.iter().skip(1) {
        let v = rec
            .get(1)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| CliError::parse(path, *line, "expected draw,value"))?;
        out.push(v);
    }
    Ok(out)
}
