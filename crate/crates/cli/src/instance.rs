//! Instance files and CSV ingestion.
//!
//! An instance is a TOML document:
//!
//! ```toml
//! n = 3
//! p = 2
//! function = "identity"   # log | identity | exp | bounded | log1p
//! power = 0.5
//! x = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0]   # optional, column-major
//! delta = [1.0, 1.0, 1.4]             # lower triangle, pairs (2,1) (3,1) (3,2)
//! weights = [1.0, 1.0, 2.0]           # optional, defaults to ones
//! ```
//!
//! Instead of the dense arrays, pairs may be listed one by one; unlisted
//! pairs get weight zero:
//!
//! ```toml
//! [[pair]]
//! i = 2
//! j = 1
//! w = 1.0
//! delta = 1.0
//! ```

use std::path::Path;

use fstress::{pair_count, BaseFunction, Configuration, DissimilarityData, FSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// How the pair list is written back out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum PairLayout {
    #[default]
    Dense,
    Records,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: FSpec,
    pub p: usize,
    pub x: Option<Vec<f64>>,
    pub data: DissimilarityData,
    pub layout: PairLayout,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    p: usize,
    function: BaseFunction,
    power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, rename = "pair", skip_serializing_if = "Vec::is_empty")]
    pairs: Vec<PairRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    i: usize,
    j: usize,
    #[serde(default = "one")]
    w: f64,
    delta: f64,
}

fn one() -> f64 {
    1.0
}

impl Instance {
    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn configuration(&self) -> Option<Result<Configuration>> {
        self.x
            .as_ref()
            .map(|x| Configuration::new(self.n(), self.p, x.clone()).map_err(Into::into))
    }

    /// The configuration, or a usage error naming `what` needs it.
    pub fn require_configuration(&self, what: &str) -> Result<Configuration> {
        self.configuration().unwrap_or_else(|| {
            Err(CliError::Usage(format!(
                "{what} needs a configuration `x` in the instance"
            )))
        })
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let InstanceFile {
            n,
            p,
            function,
            power,
            x,
            delta,
            weights,
            pairs,
        } = file;
        if p == 0 {
            return Err("p must be at least 1".into());
        }
        if !power.is_finite() {
            return Err(format!("power must be finite, got {power}"));
        }
        if let Some(x) = &x {
            if x.len() != n * p {
                return Err(format!("x has {} entries, expected n*p = {}", x.len(), n * p));
            }
        }
        let (data, layout) = match (delta, pairs.is_empty()) {
            (Some(delta), true) => {
                let weights = weights.unwrap_or_else(|| vec![1.0; pair_count(n)]);
                (DissimilarityData::new(n, weights, delta), PairLayout::Dense)
            }
            (None, false) if weights.is_none() => (
                DissimilarityData::from_records(n, pairs.iter().map(|r| (r.i, r.j, r.w, r.delta))),
                PairLayout::Records,
            ),
            (None, true) => return Err("no dissimilarities: give `delta` or `[[pair]]` records".into()),
            _ => {
                return Err(
                    "use either dense `delta`/`weights` arrays or `[[pair]]` records, not both".into(),
                )
            }
        };
        let data = data.map_err(|e| e.to_string())?;
        if let Some(x) = &x {
            Configuration::new(n, p, x.clone()).map_err(|e| e.to_string())?;
        }
        Ok(Instance {
            spec: FSpec::new(function, power),
            p,
            x,
            data,
            layout,
        })
    }

    pub fn to_toml(&self) -> String {
        let n = self.n();
        let mut file = InstanceFile {
            n,
            p: self.p,
            function: self.spec.base,
            power: self.spec.power,
            x: self.x.clone(),
            delta: None,
            weights: None,
            pairs: Vec::new(),
        };
        match self.layout {
            PairLayout::Dense => {
                file.delta = Some(self.data.delta().to_vec());
                if self.data.weights().iter().any(|&w| w != 1.0) {
                    file.weights = Some(self.data.weights().to_vec());
                }
            }
            PairLayout::Records => {
                // A pair with w = 0 and delta = 0 is what an absent record means.
                file.pairs = self
                    .data
                    .records()
                    .filter(|&(_, w, d)| w != 0.0 || d.to_bits() != 0)
                    .map(|(pair, w, delta)| PairRecord {
                        i: pair.i,
                        j: pair.j,
                        w,
                        delta,
                    })
                    .collect();
                if file.pairs.is_empty() {
                    // Keep the document parseable; one explicit zero record.
                    file.pairs.push(PairRecord {
                        i: 2,
                        j: 1,
                        w: 0.0,
                        delta: 0.0,
                    });
                }
            }
        }
        toml::to_string(&file).expect("instance serializes")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|m| CliError::format(path, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| CliError::io(path, e))
    }

    /// Builds an instance from a square symmetric dissimilarity matrix and an
    /// optional weight matrix, both comma-separated. Empty or `NA` cells mark
    /// missing pairs (weight zero). Diagonals are ignored.
    pub fn from_csv(matrix: &Path, weights: Option<&Path>, p: usize, spec: FSpec) -> Result<Self> {
        if p == 0 {
            return Err(CliError::Usage("p must be at least 1".into()));
        }
        let d = read_matrix(matrix)?;
        let n = d.len();
        let w = match weights {
            Some(path) => {
                let w = read_matrix(path)?;
                if w.len() != n {
                    return Err(CliError::format(
                        path,
                        format!(
                            "weight matrix is {}x{}, dissimilarities are {n}x{n}",
                            w.len(),
                            w.len()
                        ),
                    ));
                }
                Some(w)
            }
            None => None,
        };
        let mut wv = Vec::with_capacity(pair_count(n.max(2)));
        let mut dv = Vec::with_capacity(wv.capacity());
        for pair in fstress::pairs(n) {
            let (i, j) = (pair.i - 1, pair.j - 1);
            let delta = lower_entry(&d, i, j).map_err(|m| CliError::format(matrix, m))?;
            let weight = match &w {
                Some(w) => lower_entry(w, i, j).map_err(|m| CliError::format(weights.unwrap(), m))?,
                None => delta.map(|_| 1.0),
            };
            match (delta, weight) {
                (Some(delta), Some(weight)) => {
                    wv.push(weight);
                    dv.push(delta);
                }
                (None, Some(weight)) if weight != 0.0 => {
                    return Err(CliError::format(
                        matrix,
                        format!(
                            "pair ({}, {}) has weight {weight} but no dissimilarity",
                            i + 1,
                            j + 1
                        ),
                    ));
                }
                _ => {
                    wv.push(0.0);
                    dv.push(0.0);
                }
            }
        }
        let data = DissimilarityData::new(n, wv, dv)?;
        Ok(Instance {
            spec,
            p,
            x: None,
            data,
            layout: PairLayout::Dense,
        })
    }
}

/// Symmetric pair of cells `(i, j)` and `(j, i)`; both must agree exactly.
fn lower_entry(m: &[Vec<Option<f64>>], i: usize, j: usize) -> std::result::Result<Option<f64>, String> {
    let (a, b) = (m[i][j], m[j][i]);
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(format!(
            "matrix is not symmetric at ({}, {}): {x} vs {y}",
            i + 1,
            j + 1
        )),
        (Some(_), None) | (None, Some(_)) => Err(format!(
            "matrix is not symmetric at ({}, {}): one cell is missing",
            i + 1,
            j + 1
        )),
        _ => Ok(a),
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<Option<f64>>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::format(path, e))?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::format(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell {
                "" | "NA" | "na" => Ok(None),
                _ => cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| {
                        CliError::format(
                            path,
                            format!("row {}, column {}: bad number {cell:?}", r + 1, c + 1),
                        )
                    }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(CliError::format(
            path,
            format!(
                "matrix must be square: row {} has {} cells, expected {n}",
                r + 1,
                row.len()
            ),
        ));
    }
    if n < 2 {
        return Err(CliError::format(path, "matrix needs at least 2 rows"));
    }
    Ok(rows)
}
