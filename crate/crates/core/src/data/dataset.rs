//! Column-wise binary datasets, training views, and CSV storage.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::generate::GenConfig;
use super::DataError;
use crate::bias::PairedRow;

/// Sensitive attributes, unbiased and observed features, unbiased and observed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sensitive_names: Vec<String>,
    pub sensitive: Vec<Vec<bool>>,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<bool>>,
    pub biased_features: Vec<Vec<bool>>,
    pub y: Vec<bool>,
    pub y_biased: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Label,
    Measurement,
    Historical,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Label, Scenario::Measurement, Scenario::Historical];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Label => "label",
            Scenario::Measurement => "measurement",
            Scenario::Historical => "historical",
        }
    }

    /// The view models are scored on.
    pub fn test_role(self) -> Role {
        match self {
            Scenario::Historical => Role::TestBiased,
            _ => Role::TestUnbiased,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DataError::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// What a practitioner observes for training in the scenario.
    TrainBiased,
    /// Unbiased features and labels.
    TestUnbiased,
    /// Observed features with unbiased labels.
    TestBiased,
}

/// Rows of a dataset prepared for one role.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    /// Selector values (sensitive attributes) per row.
    pub sensitive: Vec<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl View {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First sensitive attribute of every row.
    pub fn group(&self) -> Vec<bool> {
        self.sensitive.iter().map(|s| s[0] > 0.5).collect()
    }

    /// Program inputs: selectors followed by features.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.sensitive
            .iter()
            .zip(&self.features)
            .map(|(s, f)| s.iter().chain(f).copied().collect())
            .collect()
    }

    /// Classifier matrix: features, then the sensitive attributes if `with_sensitive`.
    pub fn matrix(&self, with_sensitive: bool) -> Array2<f64> {
        let d = self.features.first().map_or(0, Vec::len)
            + if with_sensitive { self.sensitive.first().map_or(0, Vec::len) } else { 0 };
        let mut data = Vec::with_capacity(self.len() * d);
        for (s, f) in self.sensitive.iter().zip(&self.features) {
            data.extend_from_slice(f);
            if with_sensitive {
                data.extend_from_slice(s);
            }
        }
        Array2::from_shape_vec((self.len(), d), data).expect("rectangular view")
    }
}

fn f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Dataset {
    pub fn empty(sensitive_names: Vec<String>, feature_names: Vec<String>) -> Self {
        Dataset {
            sensitive: vec![Vec::new(); sensitive_names.len()],
            features: vec![Vec::new(); feature_names.len()],
            biased_features: vec![Vec::new(); feature_names.len()],
            sensitive_names,
            feature_names,
            y: Vec::new(),
            y_biased: Vec::new(),
        }
    }

    pub fn push_row(&mut self, sensitive: &[bool], features: &[bool], biased: &[bool], y: bool, y_biased: bool) {
        for (c, &v) in self.sensitive.iter_mut().zip(sensitive) {
            c.push(v);
        }
        for (c, &v) in self.features.iter_mut().zip(features) {
            c.push(v);
        }
        for (c, &v) in self.biased_features.iter_mut().zip(biased) {
            c.push(v);
        }
        self.y.push(y);
        self.y_biased.push(y_biased);
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// First sensitive attribute.
    pub fn a(&self) -> &[bool] {
        &self.sensitive[0]
    }

    /// Rows `rows` in the shape of `role` under `scenario`.
    pub fn view(&self, scenario: Scenario, role: Role, rows: &[usize]) -> Result<View, DataError> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(DataError::Config(format!("row {bad} outside a dataset of {}", self.len())));
        }
        let (biased_x, biased_y) = match (scenario, role) {
            (Scenario::Label, Role::TrainBiased) => (false, true),
            (Scenario::Measurement, Role::TrainBiased) => (true, false),
            (Scenario::Historical, Role::TrainBiased) => (true, true),
            (_, Role::TestUnbiased) => (false, false),
            (_, Role::TestBiased) => (true, false),
        };
        let cols = if biased_x { &self.biased_features } else { &self.features };
        let labels = if biased_y { &self.y_biased } else { &self.y };
        Ok(View {
            sensitive: rows.iter().map(|&r| self.sensitive.iter().map(|c| f(c[r])).collect()).collect(),
            features: rows.iter().map(|&r| cols.iter().map(|c| f(c[r])).collect()).collect(),
            labels: rows.iter().map(|&r| labels[r]).collect(),
        })
    }

    /// Paired observations of one target (`None` = label, `Some(i)` = feature `i`)
    /// grouped by the first sensitive attribute.
    pub fn paired(&self, target: Option<usize>, rows: &[usize]) -> Vec<PairedRow> {
        let (unb, b) = match target {
            None => (&self.y, &self.y_biased),
            Some(i) => (&self.features[i], &self.biased_features[i]),
        };
        rows.iter()
            .map(|&r| PairedRow {
                a: self.sensitive[0][r],
                biased: b[r],
                unbiased: unb[r],
            })
            .collect()
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.sensitive_names.clone();
        h.extend(self.feature_names.iter().cloned());
        h.push("y".into());
        h.extend(self.feature_names.iter().map(|n| format!("{n}_t")));
        h.push("y_t".into());
        h
    }

    /// Writes the CSV to `path` and its manifest next to it (`<path>.json`).
    pub fn save(&self, path: &Path, generator: Option<&GenConfig>) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(self.header())?;
        let mut rec = Vec::with_capacity(self.header().len());
        for r in 0..self.len() {
            rec.clear();
            rec.extend(self.sensitive.iter().map(|c| c[r]));
            rec.extend(self.features.iter().map(|c| c[r]));
            rec.push(self.y[r]);
            rec.extend(self.biased_features.iter().map(|c| c[r]));
            rec.push(self.y_biased[r]);
            w.write_record(rec.iter().map(|&b| if b { "1" } else { "0" }))?;
        }
        w.flush()?;
        let manifest = Manifest {
            generator: generator.cloned(),
            sensitive: self.sensitive_names.clone(),
            features: self.feature_names.clone(),
            biased_features: self.feature_names.iter().map(|n| format!("{n}_t")).collect(),
            label: "y".into(),
            biased_label: "y_t".into(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(manifest_path(path))?), &manifest)?;
        Ok(())
    }

    /// Reads a CSV using the manifest at `<path>.json`, or the standard column
    /// names if there is none.
    pub fn load(path: &Path) -> Result<(Dataset, Manifest), DataError> {
        let mp = manifest_path(path);
        let manifest: Manifest = if mp.exists() {
            serde_json::from_reader(BufReader::new(File::open(&mp)?))?
        } else {
            Manifest::infer(path)?
        };
        let ds = Dataset::load_with(path, &manifest)?;
        Ok((ds, manifest))
    }

    /// Reads any CSV of 0/1 values whose column roles are given by `manifest`.
    pub fn load_with(path: &Path, manifest: &Manifest) -> Result<Dataset, DataError> {
        if manifest.features.len() != manifest.biased_features.len() {
            return Err(DataError::Config("features and biased_features differ in length".into()));
        }
        if manifest.sensitive.is_empty() {
            return Err(DataError::Config("the manifest names no sensitive column".into()));
        }
        let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::Config(format!("column `{name}` not found")))
        };
        let s_idx = manifest.sensitive.iter().map(|n| col(n)).collect::<Result<Vec<_>, _>>()?;
        let f_idx = manifest.features.iter().map(|n| col(n)).collect::<Result<Vec<_>, _>>()?;
        let b_idx = manifest.biased_features.iter().map(|n| col(n)).collect::<Result<Vec<_>, _>>()?;
        let (y_idx, yb_idx) = (col(&manifest.label)?, col(&manifest.biased_label)?);
        let mut ds = Dataset::empty(manifest.sensitive.clone(), manifest.features.clone());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| -> Result<bool, DataError> {
                match rec.get(i).map(str::trim) {
                    Some("0") => Ok(false),
                    Some("1") => Ok(true),
                    other => Err(DataError::Config(format!(
                        "row {}, column `{}`: expected 0 or 1, got {:?}",
                        line + 1,
                        header[i],
                        other
                    ))),
                }
            };
            let s = s_idx.iter().map(|&i| get(i)).collect::<Result<Vec<_>, _>>()?;
            let x = f_idx.iter().map(|&i| get(i)).collect::<Result<Vec<_>, _>>()?;
            let xb = b_idx.iter().map(|&i| get(i)).collect::<Result<Vec<_>, _>>()?;
            ds.push_row(&s, &x, &xb, get(y_idx)?, get(yb_idx)?);
        }
        Ok(ds)
    }
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Column roles of a CSV, plus the generator settings when it was synthesised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub generator: Option<GenConfig>,
    pub sensitive: Vec<String>,
    pub features: Vec<String>,
    pub biased_features: Vec<String>,
    pub label: String,
    pub biased_label: String,
}

impl Manifest {
    /// Standard naming: `a`, the features between `a` and `y`, then their `_t` copies and `y_t`.
    fn infer(path: &Path) -> Result<Manifest, DataError> {
        let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let y = header
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| DataError::Config("no manifest and no `y` column".into()))?;
        if header.first().map(String::as_str) != Some("a") {
            return Err(DataError::Config("no manifest and the first column is not `a`".into()));
        }
        let features: Vec<String> = header[1..y].to_vec();
        Ok(Manifest {
            generator: None,
            sensitive: vec!["a".into()],
            biased_features: features.iter().map(|n| format!("{n}_t")).collect(),
            features,
            label: "y".into(),
            biased_label: "y_t".into(),
        })
    }
}
