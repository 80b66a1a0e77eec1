//! Discrete classification datasets: CSV ingestion, quantile discretization
//! and stratified fold plans.
//!
//! Variable 0 is always the class variable. States are stored 0-based: the
//! file value `v` of an integer column becomes state `v − 1` (or `v` for
//! columns that use 0-based coding), and categorical labels are numbered by
//! first appearance.

use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the class variable.
pub const CLASS: usize = 0;

const MISSING_TOKENS: [&str; 6] = ["", "?", "NA", "na", "NaN", "nan"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    cardinalities: Vec<usize>,
    num_samples: usize,
    /// Row-major, `num_vars` entries per sample.
    values: Vec<u32>,
}

impl Dataset {
    /// Builds a dataset from 0-based rows, enforcing every load-time invariant
    /// including that each class state occurs at least once.
    pub fn new(cardinalities: Vec<usize>, rows: Vec<Vec<u32>>) -> Result<Self> {
        let names = (1..=cardinalities.len()).map(|i| format!("X{i}")).collect();
        let ds = Self::from_rows(names, cardinalities, rows)?;
        ds.check_class_coverage()?;
        Ok(ds)
    }

    fn from_rows(names: Vec<String>, cardinalities: Vec<usize>, rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = cardinalities.len();
        if n < 2 {
            return Err(Error::Validation(format!(
                "a dataset needs the class plus at least one feature, got {n} variable(s)"
            )));
        }
        if rows.is_empty() {
            return Err(Error::Validation("dataset has no samples".into()));
        }
        if let Some(i) = cardinalities.iter().position(|&sp| sp < 2) {
            return Err(Error::Validation(format!(
                "variable {i} has cardinality {} (at least 2 states are required)",
                cardinalities[i]
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * n);
        for (m, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "sample {m} has {} values, expected {n}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if v as usize >= cardinalities[i] {
                    return Err(Error::Validation(format!(
                        "sample {m}, variable {i}: state {} exceeds cardinality {}",
                        v as usize + 1,
                        cardinalities[i]
                    )));
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            names,
            cardinalities,
            num_samples: rows.len(),
            values,
        })
    }

    fn check_class_coverage(&self) -> Result<()> {
        let counts = self.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Validation(format!(
                "class state {} never occurs in the data",
                c + 1
            )));
        }
        Ok(())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} variables",
                names.len(),
                self.num_vars()
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.cardinalities[var]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn class_cardinality(&self) -> usize {
        self.cardinalities[CLASS]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Joint state of sample `m`, class first.
    pub fn sample(&self, m: usize) -> &[u32] {
        let n = self.num_vars();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn class_of(&self, m: usize) -> usize {
        self.sample(m)[CLASS] as usize
    }

    pub fn samples(&self) -> impl Iterator<Item = &[u32]> {
        self.values.chunks_exact(self.num_vars())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_cardinality()];
        for x in self.samples() {
            counts[x[CLASS] as usize] += 1;
        }
        counts
    }

    /// Samples at `indices`, keeping names and cardinalities. Class coverage
    /// is not re-checked: a training split may legitimately miss a rare class.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty sample subset".into()));
        }
        let n = self.num_vars();
        let mut values = Vec::with_capacity(indices.len() * n);
        for &m in indices {
            if m >= self.num_samples {
                return Err(Error::InvalidArgument(format!(
                    "sample index {m} out of range for {} samples",
                    self.num_samples
                )));
            }
            values.extend_from_slice(self.sample(m));
        }
        Ok(Self {
            names: self.names.clone(),
            cardinalities: self.cardinalities.clone(),
            num_samples: indices.len(),
            values,
        })
    }

    /// Writes a header row of variable names followed by 1-based integer states.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::Validation(format!("CSV write failed: {e}"));
        w.write_record(&self.names).map_err(to_err)?;
        for x in self.samples() {
            w.write_record(x.iter().map(|v| (v + 1).to_string())).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeaderMode {
    /// A first row of non-numeric tokens is a header when some column below
    /// it is numeric, or when none of its tokens reappears in its column.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Explicit cardinalities in file column order.
    pub schema: Option<Vec<usize>>,
    /// File column (0-based) holding the class; moved to variable 0.
    pub class_column: usize,
    pub header: HeaderMode,
    /// Quantile bin count for continuous columns; `None` rejects them.
    pub bins: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            schema: None,
            class_column: 0,
            header: HeaderMode::Auto,
            bins: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnKind {
    Integer {
        zero_based: bool,
    },
    /// Labels in state order (first-appearance order in the file).
    Categorical {
        labels: Vec<String>,
    },
    Discretized {
        cut_points: Vec<f64>,
    },
    Dropped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub name: String,
    pub file_column: usize,
    /// Position in the dataset, `None` when dropped.
    pub variable: Option<usize>,
    pub cardinality: Option<usize>,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

/// How each file column was interpreted; persisted next to results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub header: bool,
    pub rows: usize,
    pub columns: Vec<ColumnReport>,
}

pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), options)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(u64),
    Real(f64),
    Text,
}

fn classify(token: &str) -> Token {
    if let Ok(v) = token.parse::<u64>() {
        return Token::Int(v);
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Token::Real(v),
        _ => Token::Text,
    }
}

fn is_missing(token: &str) -> bool {
    MISSING_TOKENS.contains(&token)
}

pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records: Vec<Vec<String>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: r + 1,
            column: 0,
            message: e.to_string(),
        })?;
        // Skip fully blank lines.
        if rec.iter().all(|t| t.is_empty()) {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect());
    }
    if records.is_empty() {
        return Err(Error::Validation("input file is empty".into()));
    }
    let width = records[0].len();
    for (r, rec) in records.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::Parse {
                row: r + 1,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
    }
    if width < 2 {
        return Err(Error::Validation(format!(
            "need a class column and at least one feature, found {width} column(s)"
        )));
    }
    if options.class_column >= width {
        return Err(Error::InvalidArgument(format!(
            "class column {} out of range for {width} columns",
            options.class_column
        )));
    }
    if let Some(schema) = &options.schema {
        if schema.len() != width {
            return Err(Error::Validation(format!(
                "schema lists {} cardinalities for {width} columns",
                schema.len()
            )));
        }
    }

    let header = match options.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => detect_header(&records),
    };
    let (names, data) = if header {
        (records[0].clone(), &records[1..])
    } else {
        ((1..=width).map(|i| format!("X{i}")).collect(), &records[..])
    };
    if data.is_empty() {
        return Err(Error::Validation("input has a header but no data rows".into()));
    }
    let row_offset = if header { 2 } else { 1 };

    for (r, rec) in data.iter().enumerate() {
        for (c, token) in rec.iter().enumerate() {
            if is_missing(token) {
                return Err(Error::MissingValue {
                    row: r + row_offset,
                    column: c + 1,
                });
            }
        }
    }

    let mut columns: Vec<(Vec<u32>, usize)> = Vec::with_capacity(width);
    let mut reports = Vec::with_capacity(width);
    for c in 0..width {
        let tokens: Vec<&str> = data.iter().map(|rec| rec[c].as_str()).collect();
        let parsed: Vec<Token> = tokens.iter().map(|t| classify(t)).collect();
        let (states, kind) = if parsed.iter().all(|t| matches!(t, Token::Int(_))) {
            integer_column(&parsed, c, row_offset)?
        } else if parsed.iter().all(|t| !matches!(t, Token::Text)) {
            let first_real = parsed
                .iter()
                .position(|t| matches!(t, Token::Real(_)))
                .expect("non-integer numeric column has a real token");
            match options.bins {
                Some(bins) if c != options.class_column => {
                    let raw: Vec<f64> = parsed
                        .iter()
                        .map(|t| match t {
                            Token::Int(v) => *v as f64,
                            Token::Real(v) => *v,
                            Token::Text => unreachable!(),
                        })
                        .collect();
                    let d = discretize_quantile(&raw, bins)?;
                    if d.bins < 2 {
                        (
                            d.values,
                            ColumnKind::Dropped {
                                reason: "constant after discretization".into(),
                            },
                        )
                    } else {
                        (
                            d.values,
                            ColumnKind::Discretized {
                                cut_points: d.cut_points,
                            },
                        )
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        row: first_real + row_offset,
                        column: c + 1,
                        message: format!(
                            "non-integer numeric value {:?}{}",
                            tokens[first_real],
                            if c == options.class_column {
                                " in the class column"
                            } else {
                                " (enable discretization to bin continuous columns)"
                            }
                        ),
                    });
                }
            }
        } else {
            categorical_column(&tokens)
        };

        let observed = states.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
        let cardinality = match &options.schema {
            Some(schema) => {
                if observed > schema[c] {
                    let r = states.iter().position(|&v| v as usize >= schema[c]).unwrap();
                    return Err(Error::Validation(format!(
                        "row {}, column {}: state {} exceeds declared cardinality {}",
                        r + row_offset,
                        c + 1,
                        states[r] + 1,
                        schema[c]
                    )));
                }
                schema[c]
            }
            None => observed,
        };
        let kind = match kind {
            ColumnKind::Dropped { .. } => kind,
            _ if cardinality < 2 && c != options.class_column => ColumnKind::Dropped {
                reason: "constant column".into(),
            },
            _ => kind,
        };
        if let ColumnKind::Dropped { reason } = &kind {
            warn!("dropping column {} ({}): {reason}", c + 1, names[c]);
        }
        reports.push(ColumnReport {
            name: names[c].clone(),
            file_column: c,
            variable: None,
            cardinality: Some(cardinality),
            kind,
        });
        columns.push((states, cardinality));
    }

    let mut order = vec![options.class_column];
    order.extend((0..width).filter(|&c| c != options.class_column));
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&c| !matches!(reports[c].kind, ColumnKind::Dropped { .. }))
        .collect();
    for (var, &c) in kept.iter().enumerate() {
        reports[c].variable = Some(var);
    }
    for r in reports.iter_mut().filter(|r| r.variable.is_none()) {
        r.cardinality = None;
    }

    let rows: Vec<Vec<u32>> = (0..data.len())
        .map(|r| kept.iter().map(|&c| columns[c].0[r]).collect())
        .collect();
    let cards = kept.iter().map(|&c| columns[c].1).collect();
    let kept_names = kept.iter().map(|&c| names[c].clone()).collect();
    let ds = Dataset::from_rows(kept_names, cards, rows)?;
    ds.check_class_coverage()?;
    Ok((
        ds,
        LoadReport {
            header,
            rows: data.len(),
            columns: reports,
        },
    ))
}

fn detect_header(records: &[Vec<String>]) -> bool {
    let first = &records[0];
    if records.len() < 2 || first.iter().any(|t| !matches!(classify(t), Token::Text)) {
        return false;
    }
    let rest = &records[1..];
    let some_numeric_column = (0..first.len()).any(|c| {
        rest.iter()
            .all(|rec| is_missing(&rec[c]) || !matches!(classify(&rec[c]), Token::Text))
    });
    let labels_unique = (0..first.len()).all(|c| rest.iter().all(|rec| rec[c] != first[c]));
    some_numeric_column || labels_unique
}

fn integer_column(parsed: &[Token], c: usize, row_offset: usize) -> Result<(Vec<u32>, ColumnKind)> {
    let ints: Vec<u64> = parsed
        .iter()
        .map(|t| match t {
            Token::Int(v) => *v,
            _ => unreachable!(),
        })
        .collect();
    let zero_based = ints.contains(&0);
    let shift = u64::from(!zero_based);
    let mut states = Vec::with_capacity(ints.len());
    for (r, v) in ints.iter().enumerate() {
        let s = u32::try_from(v - shift).map_err(|_| Error::Parse {
            row: r + row_offset,
            column: c + 1,
            message: format!("state value {v} is too large"),
        })?;
        states.push(s);
    }
    Ok((states, ColumnKind::Integer { zero_based }))
}

fn categorical_column(tokens: &[&str]) -> (Vec<u32>, ColumnKind) {
    let mut labels: Vec<String> = Vec::new();
    let states = tokens
        .iter()
        .map(|t| match labels.iter().position(|l| l == t) {
            Some(s) => s as u32,
            None => {
                labels.push((*t).to_owned());
                (labels.len() - 1) as u32
            }
        })
        .collect();
    (states, ColumnKind::Categorical { labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// 0-based bin per input value.
    pub values: Vec<u32>,
    /// Boundaries between emitted bins: value `v` lands above boundary `t`
    /// iff `v > cut_points[t]`.
    pub cut_points: Vec<f64>,
    /// Emitted bin count `B' ≤ B`.
    pub bins: usize,
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bins `raw` at the empirical quantiles `q_{1/B}, …, q_{(B−1)/B}`. A value
/// equal to a cut point falls in the lower bin. Empty bins are removed, so
/// fewer than `bins` states may be emitted; a constant column yields one bin
/// and a warning.
pub fn discretize_quantile(raw: &[f64], bins: usize) -> Result<Discretization> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "bin count must be at least 2, got {bins}"
        )));
    }
    if raw.is_empty() {
        return Err(Error::InvalidArgument("cannot discretize an empty column".into()));
    }
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v} in column")));
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins).map(|b| quantile(&sorted, b as f64 / bins as f64)).collect();
    cuts.dedup();

    let raw_bins: Vec<usize> = raw.iter().map(|&v| cuts.partition_point(|&c| v > c)).collect();
    let mut used: Vec<usize> = raw_bins.clone();
    used.sort_unstable();
    used.dedup();
    if used.len() < 2 {
        warn!("constant column: quantile discretization produced a single bin");
    }
    let values = raw_bins.iter().map(|b| used.binary_search(b).unwrap() as u32).collect();
    let cut_points = used.windows(2).map(|w| cuts[w[1] - 1]).collect();
    Ok(Discretization {
        values,
        cut_points,
        bins: used.len(),
    })
}

/// Stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold id per sample.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&m| self.assignments[m] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&m| self.assignments[m] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Shuffles each class's samples with a seeded ChaCha stream, then deals the
/// concatenated class lists round-robin over the folds. Dealing continues
/// across class boundaries, so both total fold sizes and per-class fold
/// counts differ by at most one.
pub fn make_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if k > ds.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "{k} folds requested for {} samples",
            ds.num_samples()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_cardinality()];
    for m in 0..ds.num_samples() {
        by_class[ds.class_of(m)].push(m);
    }
    let mut assignments = vec![0; ds.num_samples()];
    let mut slot = 0;
    for (c, members) in by_class.iter_mut().enumerate() {
        if !members.is_empty() && members.len() < k {
            warn!(
                "class {} has {} samples for {k} folds; stratification is best-effort",
                c + 1,
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for &m in members.iter() {
            assignments[m] = slot % k;
            slot += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Stratified holdout: roughly `fraction` of each class goes to the
/// validation side. Returns `(train, validation)` index lists.
pub fn stratified_holdout(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} not in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_cardinality()];
    for m in 0..ds.num_samples() {
        by_class[ds.class_of(m)].push(m);
    }
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * fraction).round() as usize;
        valid.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidArgument("holdout split left one side empty".into()));
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}
