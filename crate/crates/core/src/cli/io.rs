//! Readers for the tabular inputs. Every message names the file and, where
//! one applies, the 1-based line.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::CliError;
use crate::simbench::{fmt_num, AbundanceMatrix};
use crate::tree::{parse_newick, UltrametricTree};

fn open(path: &Path) -> Result<csv::Reader<File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(pos) => CliError::Input(format!("{}: line {}: {}", path.display(), pos.line(), e)),
        None => CliError::Input(format!("{}: {e}", path.display())),
    }
}

fn header_index(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Input(format!("{}: line 1: missing column {name:?}", path.display())))
}

pub fn read_tree(path: &Path) -> Result<UltrametricTree, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_newick(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// A `feature_id,p_value` table. Labels come back in file order, each with
/// the line it was read from.
pub struct PValueTable {
    pub labels: Vec<String>,
    pub p: Vec<f64>,
    pub lines: Vec<u64>,
}

pub fn read_pvalues(path: &Path) -> Result<PValueTable, CliError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let id_col = header_index(path, &headers, "feature_id")?;
    let p_col = header_index(path, &headers, "p_value")?;
    let mut table = PValueTable {
        labels: Vec::new(),
        p: Vec::new(),
        lines: Vec::new(),
    };
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| CliError::Input(format!("{}: line {line}: {msg}", path.display()));
        let id = rec[id_col].to_string();
        if id.is_empty() {
            return Err(at("empty feature_id".into()));
        }
        let p: f64 = rec[p_col]
            .parse()
            .map_err(|_| at(format!("p-value {:?} is not a number", &rec[p_col])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(at(format!("p-value {p} outside [0, 1]")));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(at(format!("feature {id:?} already given on line {first}")));
        }
        table.labels.push(id);
        table.p.push(p);
        table.lines.push(line);
    }
    if table.labels.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

/// Checks that the table and the tree's leaves name the same features.
pub fn check_labels(tree: &UltrametricTree, table: &PValueTable, path: &Path) -> Result<(), CliError> {
    let leaves: HashSet<&str> = tree.leaf_labels().collect();
    for (label, line) in table.labels.iter().zip(&table.lines) {
        if !leaves.contains(label.as_str()) {
            return Err(CliError::Input(format!(
                "{}: line {line}: feature {label:?} is not a leaf of the tree",
                path.display()
            )));
        }
    }
    let given: HashSet<&str> = table.labels.iter().map(String::as_str).collect();
    if let Some(missing) = tree.leaf_labels().find(|l| !given.contains(l)) {
        return Err(CliError::Input(format!(
            "{}: tree leaf {missing:?} has no p-value",
            path.display()
        )));
    }
    Ok(())
}

/// Taxa × samples table: first column the taxon, header row the sample ids.
pub fn read_abundance(path: &Path) -> Result<AbundanceMatrix, CliError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() < 3 {
        return Err(CliError::Input(format!(
            "{}: line 1: expected a taxon column and at least two samples",
            path.display()
        )));
    }
    let samples: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    if let Some(dup) = samples.iter().find(|s| !seen.insert(s.as_str())) {
        return Err(CliError::Input(format!("{}: line 1: duplicate sample {dup:?}", path.display())));
    }
    let mut taxa = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| CliError::Input(format!("{}: line {line}: {msg}", path.display()));
        taxa.push(rec[0].to_string());
        for (field, sample) in rec.iter().skip(1).zip(&samples) {
            let v: f64 = field
                .parse()
                .map_err(|_| at(format!("abundance {field:?} for sample {sample:?} is not a number")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(at(format!("abundance {v} for sample {sample:?} is not a nonnegative number")));
            }
            values.push(v);
        }
    }
    if taxa.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let values = DMatrix::from_row_slice(taxa.len(), samples.len(), &values);
    AbundanceMatrix::new(taxa, samples, values).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads `sample_id,group` and marks the samples of `data` that belong to
/// the second level (in sorted order) as group B. Returns the two levels.
pub fn assign_groups(data: &mut AbundanceMatrix, path: &Path) -> Result<[String; 2], CliError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let id_col = header_index(path, &headers, "sample_id")?;
    let group_col = header_index(path, &headers, "group")?;
    let mut group_of: HashMap<String, String> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[id_col].to_string();
        if group_of.insert(id.clone(), rec[group_col].to_string()).is_some() {
            return Err(CliError::Input(format!(
                "{}: line {line}: sample {id:?} listed twice",
                path.display()
            )));
        }
    }
    let mut levels: Vec<&String> = data
        .samples
        .iter()
        .map(|s| {
            group_of
                .get(s)
                .ok_or_else(|| CliError::Input(format!("{}: sample {s:?} has no group", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let in_groups = levels.clone();
    levels.sort();
    levels.dedup();
    if levels.len() != 2 {
        return Err(CliError::Input(format!(
            "{}: need exactly 2 groups among the samples, found {}",
            path.display(),
            levels.len()
        )));
    }
    let extra = group_of.keys().filter(|k| !data.samples.contains(k)).count();
    if extra > 0 {
        log::warn!("{}: {extra} samples are not in the abundance table", path.display());
    }
    let pair = [levels[0].clone(), levels[1].clone()];
    data.in_b = Some(in_groups.iter().map(|g| **g == pair[1]).collect());
    Ok(pair)
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let path = path.as_ref();
    let fail = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| fail(&e))?;
    w.write_record(header).map_err(|e| fail(&e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| fail(&e))?;
    }
    w.flush().map_err(|e| fail(&e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Output(format!("{}: {e}", path.display()));
    let mut f = File::create(path).map_err(|e| fail(&e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| fail(&e))?;
    writeln!(f).map_err(|e| fail(&e))
}

pub fn pvalue_rows<'a>(labels: &'a [String], p: &'a [f64]) -> impl Iterator<Item = Vec<String>> + 'a {
    labels.iter().zip(p).map(|(l, &p)| vec![l.clone(), fmt_num(p)])
}
