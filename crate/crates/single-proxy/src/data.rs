//! Sample containers and CSV I/O.
//!
//! CSV schemas (column order free, names fixed):
//! - full data: treatment `a` (or `a0..a{d-1}`), outcome `y`, proxy `w`
//!   (or `w0..w{k-1}`), plus an optional latent column `u` which is ignored
//!   on load;
//! - treatment/outcome pairs: `a` (or `a0..`) and `y` only.
//!
//! Floats are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every value bit for bit.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `n` points of fixed dimension `dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("point dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not divide into rows of dimension {dim}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite point value {v}")));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "ragged rows: expected dimension {dim}, found {}",
                bad.len()
            )));
        }
        Self::new(rows.concat(), dim)
    }

    /// One-dimensional points from a list of scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.to_vec(), 1)
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// The single coordinate of a one-dimensional point set.
    pub fn scalar(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.data[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn subset(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Points { data, dim: self.dim }
    }
}

fn check_outcomes(outcomes: &[f64]) -> Result<()> {
    if let Some(v) = outcomes.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("non-finite outcome value {v}")));
    }
    Ok(())
}

/// A full observational sample: treatments, outcomes, and confounder proxies,
/// all of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub treatments: Points,
    pub outcomes: Vec<f64>,
    pub proxies: Points,
}

impl Dataset {
    pub fn new(treatments: Points, outcomes: Vec<f64>, proxies: Points) -> Result<Self> {
        if treatments.len() != outcomes.len() || treatments.len() != proxies.len() {
            return Err(Error::DimensionMismatch(format!(
                "dataset columns disagree: {} treatments, {} outcomes, {} proxies",
                treatments.len(),
                outcomes.len(),
                proxies.len()
            )));
        }
        if treatments.is_empty() {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        check_outcomes(&outcomes)?;
        Ok(Self { treatments, outcomes, proxies })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// The treatment/outcome part of this sample, proxies dropped.
    pub fn stage_two(&self) -> StageTwoDataset {
        StageTwoDataset {
            treatments: self.treatments.clone(),
            outcomes: self.outcomes.clone(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            treatments: self.treatments.subset(indices),
            outcomes: indices.iter().map(|&i| self.outcomes[i]).collect(),
            proxies: self.proxies.subset(indices),
        }
    }
}

/// Treatment/outcome pairs used to anchor the second regression stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTwoDataset {
    pub treatments: Points,
    pub outcomes: Vec<f64>,
}

impl StageTwoDataset {
    pub fn new(treatments: Points, outcomes: Vec<f64>) -> Result<Self> {
        if treatments.len() != outcomes.len() {
            return Err(Error::DimensionMismatch(format!(
                "dataset columns disagree: {} treatments, {} outcomes",
                treatments.len(),
                outcomes.len()
            )));
        }
        if treatments.is_empty() {
            return Err(Error::InvalidData("dataset has no rows".into()));
        }
        check_outcomes(&outcomes)?;
        Ok(Self { treatments, outcomes })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Column layout recovered from a CSV header.
struct Header {
    treatment_cols: Vec<usize>,
    outcome_col: usize,
    proxy_cols: Vec<usize>, // empty for the two-column schema
    latent_col: Option<usize>,
}

/// Finds the column positions for variable `base`: either a single column
/// named `base` or an indexed group `base0..base{d-1}`.
fn variable_columns(map: &HashMap<&str, usize>, base: &str, path: &str) -> Result<Vec<usize>> {
    if let Some(&col) = map.get(base) {
        let clash = map.keys().find(|k| {
            k.strip_prefix(base)
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        });
        if let Some(k) = clash {
            return Err(Error::Csv {
                path: path.into(),
                message: format!("both '{base}' and indexed column '{k}' present"),
            });
        }
        return Ok(vec![col]);
    }
    let mut indexed: Vec<(usize, usize)> = Vec::new();
    for (k, &col) in map {
        if let Some(rest) = k.strip_prefix(base) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| Error::Csv {
                    path: path.into(),
                    message: format!("bad column index in '{k}'"),
                })?;
                indexed.push((idx, col));
            }
        }
    }
    if indexed.is_empty() {
        return Err(Error::Csv {
            path: path.into(),
            message: format!("missing column '{base}'"),
        });
    }
    indexed.sort();
    for (want, (idx, _)) in indexed.iter().enumerate() {
        if *idx != want {
            return Err(Error::Csv {
                path: path.into(),
                message: format!("columns '{base}0..' must be consecutive from 0, found '{base}{idx}'"),
            });
        }
    }
    Ok(indexed.into_iter().map(|(_, col)| col).collect())
}

fn parse_header(headers: &csv::StringRecord, with_proxies: bool, path: &str) -> Result<Header> {
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let mut map = HashMap::new();
    for (i, name) in names.iter().enumerate() {
        if map.insert(*name, i).is_some() {
            return Err(Error::Csv {
                path: path.into(),
                message: format!("duplicate column '{name}'"),
            });
        }
    }

    let treatment_cols = variable_columns(&map, "a", path)?;
    let outcome_col = *map.get("y").ok_or_else(|| Error::Csv {
        path: path.into(),
        message: "missing column 'y'".into(),
    })?;
    let proxy_cols = if with_proxies {
        variable_columns(&map, "w", path)?
    } else {
        Vec::new()
    };
    let latent_col = map.get("u").copied();

    let mut claimed = vec![false; names.len()];
    for &c in treatment_cols
        .iter()
        .chain(proxy_cols.iter())
        .chain([outcome_col].iter())
        .chain(latent_col.iter())
    {
        claimed[c] = true;
    }
    if let Some(i) = claimed.iter().position(|&c| !c) {
        return Err(Error::Csv {
            path: path.into(),
            message: format!("unexpected column '{}'", names[i]),
        });
    }
    Ok(Header {
        treatment_cols,
        outcome_col,
        proxy_cols,
        latent_col,
    })
}

fn parse_field(field: &str, row: usize, name: &str, path: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
        path: path.into(),
        message: format!("row {row}: column '{name}' is not a number: '{field}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Csv {
            path: path.into(),
            message: format!("row {row}: column '{name}' is not finite: '{field}'"),
        });
    }
    Ok(v)
}

struct RawTable {
    treatments: Points,
    outcomes: Vec<f64>,
    proxies: Option<Points>,
}

fn read_table(path: &Path, with_proxies: bool) -> Result<RawTable> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: shown.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Csv { path: shown.clone(), message: e.to_string() },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv { path: shown.clone(), message: e.to_string() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Csv { path: shown, message: "empty file".into() });
    }
    let header = parse_header(&headers, with_proxies, &shown)?;

    let mut treatments = Vec::new();
    let mut outcomes = Vec::new();
    let mut proxies = Vec::new();
    let mut row = 0usize;
    for record in reader.records() {
        row += 1;
        let record = record.map_err(|e| Error::Csv {
            path: shown.clone(),
            message: format!("row {row}: {e}"),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: shown.clone(),
                message: format!(
                    "row {row}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        for (k, &c) in header.treatment_cols.iter().enumerate() {
            treatments.push(parse_field(&record[c], row, &format!("a{k}"), &shown)?);
        }
        outcomes.push(parse_field(&record[header.outcome_col], row, "y", &shown)?);
        for (k, &c) in header.proxy_cols.iter().enumerate() {
            proxies.push(parse_field(&record[c], row, &format!("w{k}"), &shown)?);
        }
        if let Some(c) = header.latent_col {
            // Validated but discarded: the latent column is debug output.
            parse_field(&record[c], row, "u", &shown)?;
        }
    }
    if row == 0 {
        return Err(Error::Csv { path: shown, message: "no data rows".into() });
    }

    Ok(RawTable {
        treatments: Points::new(treatments, header.treatment_cols.len())?,
        outcomes,
        proxies: if with_proxies {
            Some(Points::new(proxies, header.proxy_cols.len())?)
        } else {
            None
        },
    })
}

/// Loads a full treatment/outcome/proxy CSV.
pub fn load_stage1_csv(path: &Path) -> Result<Dataset> {
    let t = read_table(path, true)?;
    Dataset::new(t.treatments, t.outcomes, t.proxies.expect("proxies requested"))
}

/// Loads a treatment/outcome CSV.
pub fn load_stage2_csv(path: &Path) -> Result<StageTwoDataset> {
    let t = read_table(path, false)?;
    StageTwoDataset::new(t.treatments, t.outcomes)
}

fn column_names(base: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![base.to_string()]
    } else {
        (0..dim).map(|k| format!("{base}{k}")).collect()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })
}

fn write_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Writes a full dataset; `latent` appends the generator's hidden column `u`.
pub fn save_stage1_csv(path: &Path, data: &Dataset, latent: Option<&[f64]>) -> Result<()> {
    if let Some(u) = latent {
        if u.len() != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "latent column length {} vs {} rows",
                u.len(),
                data.len()
            )));
        }
    }
    let mut w = csv_writer(path)?;
    let mut header = column_names("a", data.treatments.dim());
    header.push("y".into());
    header.extend(column_names("w", data.proxies.dim()));
    if latent.is_some() {
        header.push("u".into());
    }
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.treatments.row(i).iter().map(f64::to_string).collect();
        rec.push(data.outcomes[i].to_string());
        rec.extend(data.proxies.row(i).iter().map(f64::to_string));
        if let Some(u) = latent {
            rec.push(u[i].to_string());
        }
        w.write_record(&rec).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes a treatment/outcome dataset.
pub fn save_stage2_csv(path: &Path, data: &StageTwoDataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = column_names("a", data.treatments.dim());
    header.push("y".into());
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.treatments.row(i).iter().map(f64::to_string).collect();
        rec.push(data.outcomes[i].to_string());
        w.write_record(&rec).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Disjoint shuffle-split of one sample into the two regression stages.
#[derive(Clone, Debug)]
pub struct StageSplit {
    pub stage1: Dataset,
    pub stage2: StageTwoDataset,
    /// Original row indices of each part, ascending.
    pub stage1_indices: Vec<usize>,
    pub stage2_indices: Vec<usize>,
}

/// Splits `data` into a stage-1 part of `round(fraction * n)` rows and a
/// stage-2 part holding the rest. The shuffle is a seeded Fisher-Yates, so
/// equal seeds give equal splits; within each part the original row order is
/// preserved.
pub fn split_stages(data: &Dataset, fraction: f64, seed: u64) -> Result<StageSplit> {
    if !fraction.is_finite() || fraction <= 0.0 || fraction >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = data.len();
    let n1 = (fraction * n as f64).round() as usize;
    let n2 = n - n1;
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter(format!(
            "split of {n} rows at fraction {fraction} leaves parts of {n1} and {n2} rows; both need >= 2"
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut stage1_indices = indices[..n1].to_vec();
    let mut stage2_indices = indices[n1..].to_vec();
    stage1_indices.sort_unstable();
    stage2_indices.sort_unstable();

    let stage1 = data.subset(&stage1_indices);
    let s2 = data.subset(&stage2_indices);
    Ok(StageSplit {
        stage1,
        stage2: StageTwoDataset::new(s2.treatments, s2.outcomes)?,
        stage1_indices,
        stage2_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_shape_and_access() {
        let p = Points::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.row(1), &[3.0, 4.0]);
        assert_eq!(p.subset(&[2, 0]).row(0), &[5.0, 6.0]);
    }

    #[test]
    fn points_reject_bad_input() {
        assert!(Points::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(Points::new(vec![f64::NAN], 1).is_err());
        assert!(Points::new(vec![], 0).is_err());
        assert!(Points::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn dataset_requires_equal_lengths() {
        let a = Points::from_scalars(&[1.0, 2.0]).unwrap();
        let w = Points::from_scalars(&[1.0]).unwrap();
        assert!(Dataset::new(a.clone(), vec![0.0, 0.0], w).is_err());
        let w2 = Points::from_scalars(&[1.0, 2.0]).unwrap();
        assert!(Dataset::new(a, vec![0.0, 0.0], w2).is_ok());
    }

    #[test]
    fn single_row_dataset_is_allowed() {
        let d = Dataset::new(
            Points::from_scalars(&[0.5]).unwrap(),
            vec![1.0],
            Points::from_scalars(&[2.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn split_ten_rows_in_half() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d = Dataset::new(
            Points::from_scalars(&xs).unwrap(),
            xs.clone(),
            Points::from_scalars(&xs).unwrap(),
        )
        .unwrap();
        let split = split_stages(&d, 0.5, 7).unwrap();
        assert_eq!(split.stage1.len(), 5);
        assert_eq!(split.stage2.len(), 5);

        // Disjoint cover of 0..10.
        let mut all: Vec<usize> = split
            .stage1_indices
            .iter()
            .chain(split.stage2_indices.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        // Same seed reproduces the split; a different seed changes it.
        let again = split_stages(&d, 0.5, 7).unwrap();
        assert_eq!(again.stage1_indices, split.stage1_indices);
        let other = split_stages(&d, 0.5, 8).unwrap();
        assert_ne!(other.stage1_indices, split.stage1_indices);
    }

    #[test]
    fn split_preserves_row_content() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 1.5).collect();
        let ys: Vec<f64> = (0..12).map(|i| i as f64 - 3.0).collect();
        let d = Dataset::new(
            Points::from_scalars(&xs).unwrap(),
            ys.clone(),
            Points::from_scalars(&xs).unwrap(),
        )
        .unwrap();
        let split = split_stages(&d, 0.25, 3).unwrap();
        for (k, &i) in split.stage1_indices.iter().enumerate() {
            assert_eq!(split.stage1.treatments.scalar(k), xs[i]);
            assert_eq!(split.stage1.outcomes[k], ys[i]);
        }
        for (k, &i) in split.stage2_indices.iter().enumerate() {
            assert_eq!(split.stage2.treatments.scalar(k), xs[i]);
            assert_eq!(split.stage2.outcomes[k], ys[i]);
        }
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let d = Dataset::new(
            Points::from_scalars(&xs).unwrap(),
            xs.clone(),
            Points::from_scalars(&xs).unwrap(),
        )
        .unwrap();
        assert!(split_stages(&d, 0.0, 1).is_err());
        assert!(split_stages(&d, 1.0, 1).is_err());
        assert!(split_stages(&d, 0.05, 1).is_err()); // would leave 0 or 1 rows
    }
}
