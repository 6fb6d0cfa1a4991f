//! Ingestion of the three UCI benchmark files: parsing, seeded 50/25/25
//! split, train-only mean imputation and min-max scaling, one-hot targets.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column layout and class vocabulary of one benchmark file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub n_attributes: usize,
    pub n_classes: usize,
    /// Columns per line, including id and class.
    pub n_columns: usize,
    pub class_column: usize,
    pub id_column: Option<usize>,
    pub missing_marker: String,
    /// `class_labels[j]` is the file's label for class index `j`.
    pub class_labels: Vec<String>,
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl DatasetSpec {
    /// Wisconsin breast cancer: id, 9 attributes in 1..=10, class 2 (benign) or 4 (malignant).
    pub fn cancer1() -> Self {
        Self {
            name: "cancer1".into(),
            n_attributes: 9,
            n_classes: 2,
            n_columns: 11,
            class_column: 10,
            id_column: Some(0),
            missing_marker: "?".into(),
            class_labels: labels(&["2", "4"]),
        }
    }

    /// Glass identification: id, 9 real attributes, class in {1,2,3,5,6,7}.
    pub fn glass() -> Self {
        Self {
            name: "glass".into(),
            n_attributes: 9,
            n_classes: 6,
            n_columns: 11,
            class_column: 10,
            id_column: Some(0),
            missing_marker: "?".into(),
            class_labels: labels(&["1", "2", "3", "5", "6", "7"]),
        }
    }

    /// Pima Indians diabetes: 8 real attributes, class 0 or 1.
    pub fn diabetes() -> Self {
        Self {
            name: "diabetes".into(),
            n_attributes: 8,
            n_classes: 2,
            n_columns: 9,
            class_column: 8,
            id_column: None,
            missing_marker: "?".into(),
            class_labels: labels(&["0", "1"]),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cancer1" | "cancer" => Ok(Self::cancer1()),
            "glass" => Ok(Self::glass()),
            "diabetes" | "pima" => Ok(Self::diabetes()),
            other => Err(Error::Config(format!("unknown dataset '{other}'"))),
        }
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    fn attribute_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_columns).filter(move |&c| c != self.class_column && Some(c) != self.id_column)
    }

    fn validate(&self) -> Result<()> {
        let attrs = self.attribute_columns().count();
        if attrs != self.n_attributes || self.class_labels.len() != self.n_classes {
            return Err(Error::Config(format!(
                "dataset spec '{}' is inconsistent: {attrs} attribute columns, {} labels",
                self.name,
                self.class_labels.len()
            )));
        }
        Ok(())
    }
}

/// One parsed line; `None` marks a missing attribute value.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub line: usize,
    pub values: Vec<Option<f64>>,
    pub label: String,
}

pub fn load_raw(path: impl AsRef<Path>, spec: &DatasetSpec) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_raw(file, spec)
}

/// Parses comma-separated records. Blank lines are skipped but still
/// counted, so errors name the line as it appears in the file.
pub fn parse_raw<R: Read>(reader: R, spec: &DatasetSpec) -> Result<Vec<RawRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    for (i, text) in BufReader::new(reader).lines().enumerate() {
        let text = text?;
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = text.split(',').map(str::trim).collect();
        if row.len() != spec.n_columns {
            return Err(Error::Line {
                line,
                message: format!("expected {} columns, found {}", spec.n_columns, row.len()),
            });
        }
        let mut values = Vec::with_capacity(spec.n_attributes);
        for c in spec.attribute_columns() {
            let field = row[c];
            if field == spec.missing_marker {
                values.push(None);
            } else {
                let x: f64 = field.parse().map_err(|_| Error::Line {
                    line,
                    message: format!("column {c}: '{field}' is not a number"),
                })?;
                values.push(Some(x));
            }
        }
        records.push(RawRecord {
            line,
            values,
            label: row[spec.class_column].to_string(),
        });
    }
    Ok(records)
}

/// Vector of zeros with a single one at `class_index`.
pub fn one_hot<T: Scalar>(class_index: usize, n_classes: usize) -> Result<Vec<T>> {
    if class_index >= n_classes {
        return Err(Error::Encoding(format!(
            "class index {class_index} out of range for {n_classes} classes"
        )));
    }
    let mut t = vec![T::zero(); n_classes];
    t[class_index] = T::one();
    Ok(t)
}

/// A set of examples with one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub examples: Vec<Vec<T>>,
    pub targets: Vec<Vec<T>>,
    pub class_indices: Vec<usize>,
}

impl<T: Scalar> Split<T> {
    pub fn new(examples: Vec<Vec<T>>, class_indices: Vec<usize>, n_classes: usize) -> Result<Self> {
        if examples.len() != class_indices.len() {
            return Err(Error::Shape(format!(
                "{} examples but {} labels",
                examples.len(),
                class_indices.len()
            )));
        }
        if let Some(first) = examples.first() {
            if examples.iter().any(|x| x.len() != first.len()) {
                return Err(Error::Shape("examples have differing lengths".into()));
            }
        }
        let targets = class_indices
            .iter()
            .map(|&c| one_hot(c, n_classes))
            .collect::<Result<_>>()?;
        Ok(Self {
            examples,
            targets,
            class_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.examples.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Copy with a constant 1.0 appended to every example.
    pub fn with_constant_input(&self) -> Self {
        let mut out = self.clone();
        for x in &mut out.examples {
            x.push(T::one());
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (x, &c) in self.examples.iter().zip(&self.class_indices) {
            let mut fields: Vec<String> = x.iter().map(|v| v.as_f64().to_string()).collect();
            fields.push(c.to_string());
            wtr.write_record(&fields).map_err(|e| Error::Parse(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Train/validation/test splits plus the train-split statistics used to
/// build them.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle<T> {
    pub train: Split<T>,
    pub validation: Split<T>,
    pub test: Split<T>,
    /// Per-attribute `(min, max)` over the imputed training split.
    pub normalization: Vec<(f64, f64)>,
    /// Per-attribute mean of the observed training values.
    pub imputation: Vec<f64>,
    /// Positions into the raw record list, per split.
    pub train_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Whether a constant input column has been appended.
    pub bias_input: bool,
}

impl<T: Scalar> DatasetBundle<T> {
    /// Appends a constant 1.0 input to every split.
    pub fn with_bias_input(mut self) -> Self {
        if !self.bias_input {
            self.train = self.train.with_constant_input();
            self.validation = self.validation.with_constant_input();
            self.test = self.test.with_constant_input();
            self.bias_input = true;
        }
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.train.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.train.n_classes()
    }
}

/// Split sizes for `total` records: half (rounded up) for training, then the
/// remainder halved with the extra record going to validation.
pub fn split_sizes(total: usize) -> (usize, usize, usize) {
    let train = total.div_ceil(2);
    let rest = total - train;
    let validation = rest.div_ceil(2);
    (train, validation, rest - validation)
}

/// Shuffles, splits, imputes, scales and encodes `raw`.
pub fn prepare<T: Scalar>(
    raw: &[RawRecord],
    spec: &DatasetSpec,
    split_seed: u64,
) -> Result<DatasetBundle<T>> {
    if raw.is_empty() {
        return Err(Error::Domain("no records to prepare".into()));
    }
    let classes = raw
        .iter()
        .map(|r| {
            spec.class_index(&r.label).ok_or_else(|| {
                Error::Encoding(format!("line {}: unknown class label '{}'", r.line, r.label))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let (n_train, n_val, _) = split_sizes(raw.len());
    let train_rows = order[..n_train].to_vec();
    let validation_rows = order[n_train..n_train + n_val].to_vec();
    let test_rows = order[n_train + n_val..].to_vec();

    let train_records: Vec<&RawRecord> = train_rows.iter().map(|&i| &raw[i]).collect();
    let (imputation, normalization) = fit_statistics(&train_records, spec.n_attributes);

    let build = |rows: &[usize]| -> Result<Split<T>> {
        let examples = rows
            .iter()
            .map(|&i| {
                raw[i]
                    .values
                    .iter()
                    .enumerate()
                    .map(|(a, v)| {
                        let x = v.unwrap_or(imputation[a]);
                        let (lo, hi) = normalization[a];
                        let scaled = if hi > lo {
                            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        T::lit(scaled)
                    })
                    .collect()
            })
            .collect();
        let labels = rows.iter().map(|&i| classes[i]).collect();
        Split::new(examples, labels, spec.n_classes)
    };

    Ok(DatasetBundle {
        train: build(&train_rows)?,
        validation: build(&validation_rows)?,
        test: build(&test_rows)?,
        normalization,
        imputation,
        train_rows,
        validation_rows,
        test_rows,
        bias_input: false,
    })
}

/// Mean imputation values and post-imputation `(min, max)` ranges.
/// An attribute never observed in `records` imputes to 0.0.
pub fn fit_statistics(records: &[&RawRecord], n_attributes: usize) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut means = Vec::with_capacity(n_attributes);
    let mut ranges = Vec::with_capacity(n_attributes);
    for a in 0..n_attributes {
        let observed: Vec<f64> = records.iter().filter_map(|r| r.values[a]).collect();
        let mean = if observed.is_empty() {
            0.0
        } else {
            observed.iter().sum::<f64>() / observed.len() as f64
        };
        let (lo, hi) = records
            .iter()
            .map(|r| r.values[a].unwrap_or(mean))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        means.push(mean);
        ranges.push((lo, hi));
    }
    (means, ranges)
}
