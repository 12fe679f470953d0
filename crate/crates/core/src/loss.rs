//! The fStress objective and its derivative tensors.
//!
//! The implemented objective is the half-scaled loss
//!
//! ```text
//! stress(x) = 1/2 Σ_k w_k (δ_k - F(x'A_k x))²,    F = f^q
//! ```
//!
//! which expands as `C - ρ(x) + η(x)` with `C = 1/2 Σ w δ²`,
//! `ρ = Σ w δ F` and `η = 1/2 Σ w F²`. `F²` is the same base raised to `2q`,
//! so every derivative tensor is `Σ_k w_k (1/2 G_k - δ_k H_k)` with `H_k` the
//! pair tensors at power `q` and `G_k` those at power `2q`. The unscaled sum
//! (twice the objective) is reported alongside as `stress_unhalved`.

use serde::{Deserialize, Serialize};

use crate::base::{FSpec, ScalarDerivs};
use crate::error::{FStressError, Result};
use crate::mds::{accumulate_pair, pair_count, pair_qdist, pairs, Configuration, PairIndex};
use crate::tensor::{DerivTensors, DEFAULT_MAX_DIM};

/// Weights and dissimilarities for every pair, in lower-triangle order.
///
/// A missing dissimilarity is a pair with weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityData {
    n: usize,
    weights: Vec<f64>,
    delta: Vec<f64>,
}

impl DissimilarityData {
    pub fn new(n: usize, weights: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(FStressError::Invalid(format!("need at least 2 points, got {n}")));
        }
        let count = pair_count(n);
        for len in [weights.len(), delta.len()] {
            if len != count {
                return Err(FStressError::DimensionMismatch {
                    expected: count,
                    got: len,
                });
            }
        }
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(FStressError::Invalid(format!(
                "weight {} at pair index {k} is not a non-negative finite number",
                weights[k]
            )));
        }
        if let Some(k) = delta.iter().position(|d| !d.is_finite()) {
            return Err(FStressError::Invalid(format!(
                "dissimilarity at pair index {k} is not finite"
            )));
        }
        Ok(DissimilarityData { n, weights, delta })
    }

    /// Unit weights on every pair.
    pub fn unweighted(n: usize, delta: Vec<f64>) -> Result<Self> {
        Self::new(n, vec![1.0; pair_count(n)], delta)
    }

    /// Builds dense data from `(i, j, w, delta)` records with 1-based points
    /// in either order. Pairs without a record get `w = 0, delta = 0`.
    pub fn from_records(
        n: usize,
        records: impl IntoIterator<Item = (usize, usize, f64, f64)>,
    ) -> Result<Self> {
        let count = pair_count(n);
        let mut weights = vec![0.0; count];
        let mut delta = vec![0.0; count];
        let mut seen = vec![false; count];
        for (a, b, w, d) in records {
            let pair = PairIndex::new(n, a, b)?;
            if std::mem::replace(&mut seen[pair.k], true) {
                return Err(FStressError::Invalid(format!(
                    "duplicate record for pair ({}, {})",
                    pair.i, pair.j
                )));
            }
            weights[pair.k] = w;
            delta[pair.k] = d;
        }
        Self::new(n, weights, delta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Records `(i, j, w, delta)` for all pairs in lower-triangle order.
    pub fn records(&self) -> impl Iterator<Item = (PairIndex, f64, f64)> + '_ {
        pairs(self.n).map(|p| (p, self.weights[p.k], self.delta[p.k]))
    }

    /// `C = 1/2 Σ w δ²`, the constant of the half-scaled objective.
    pub fn constant(&self) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&self.delta)
            .map(|(w, d)| w * d * d)
            .sum::<f64>()
    }

    /// Same data with every weight multiplied by `c`.
    pub fn scaled_weights(&self, c: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.weights.iter().map(|w| c * w).collect(),
            self.delta.clone(),
        )
    }

    /// Same weights with new dissimilarities.
    pub fn with_delta(&self, delta: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.weights.clone(), delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Highest derivative order to compute, `0..=4`.
    pub max_order: usize,
    /// Largest coordinate count for which order-3/4 tensors are built.
    pub max_dim: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_order: 2,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `1/2 Σ w (δ - F)²`.
    pub stress: f64,
    /// `Σ w (δ - F)²`, twice `stress`.
    pub stress_unhalved: f64,
    /// `C = 1/2 Σ w δ²`.
    pub constant: f64,
    /// `Σ w δ²`, the constant of the unscaled loss.
    pub constant_unhalved: f64,
    pub rho: f64,
    pub eta: f64,
    /// Squared distance per pair, lower-triangle order.
    pub qdist: Vec<f64>,
    /// `F(qdist)` per pair. NaN for zero-weight pairs outside the domain.
    pub fdist: Vec<f64>,
    /// Value is `stress`; orders above the requested maximum are absent.
    pub tensors: DerivTensors,
}

/// `(C, ρ, η)` with `stress = C - ρ + η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressSplit {
    pub constant: f64,
    pub rho: f64,
    pub eta: f64,
}

impl StressSplit {
    pub fn stress(&self) -> f64 {
        self.constant - self.rho + self.eta
    }
}

pub fn fstress_eval(
    cfg: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    max_order: usize,
) -> Result<LossReport> {
    fstress_eval_with(
        cfg,
        data,
        spec,
        &EvalOptions {
            max_order,
            ..EvalOptions::default()
        },
    )
}

/// Pairs are visited in ascending lower-triangle order; zero-weight pairs
/// contribute nothing and are not required to lie in the domain.
pub fn fstress_eval_with(
    cfg: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    opts: &EvalOptions,
) -> Result<LossReport> {
    if cfg.n() != data.n() {
        return Err(FStressError::DimensionMismatch {
            expected: cfg.n(),
            got: data.n(),
        });
    }
    let mut tensors = DerivTensors::try_zeros(cfg.dim(), opts.max_order, opts.max_dim)?;
    let squared = spec.squared();
    let count = pair_count(cfg.n());
    let mut qdist = Vec::with_capacity(count);
    let mut fdist = Vec::with_capacity(count);
    let mut scratch = vec![0.0; cfg.dim()];
    let (mut residual_sum, mut rho, mut eta) = (0.0, 0.0, 0.0);

    for pair in pairs(cfg.n()) {
        let t = pair_qdist(cfg, pair.i - 1, pair.j - 1);
        qdist.push(t);
        let w = data.weights[pair.k];
        if w == 0.0 {
            fdist.push(spec.value(t).unwrap_or(f64::NAN));
            continue;
        }
        let pair_err = |source| FStressError::PairDomain {
            i: pair.i,
            j: pair.j,
            source,
        };
        let d = data.delta[pair.k];
        let h = spec.derivs(t).map_err(pair_err)?;
        let f = h.value();
        fdist.push(f);
        residual_sum += w * (d - f) * (d - f);
        rho += w * d * f;
        eta += 0.5 * w * f * f;

        if opts.max_order > 0 {
            let g = squared.derivs(t).map_err(pair_err)?;
            // The value slot stays zero; the stress is set from the residuals.
            let coef = std::array::from_fn(|r| {
                if r == 0 {
                    0.0
                } else {
                    w * (0.5 * g.d(r) - d * h.d(r))
                }
            });
            accumulate_pair(
                &mut tensors,
                cfg,
                pair.i - 1,
                pair.j - 1,
                &ScalarDerivs(coef),
                &mut scratch,
            );
        }
    }

    let stress = 0.5 * residual_sum;
    tensors.set_value(stress);
    let constant = data.constant();
    Ok(LossReport {
        stress,
        stress_unhalved: residual_sum,
        constant,
        constant_unhalved: 2.0 * constant,
        rho,
        eta,
        qdist,
        fdist,
        tensors,
    })
}

/// Value of the half-scaled objective only.
pub fn stress_value(cfg: &Configuration, data: &DissimilarityData, spec: FSpec) -> Result<f64> {
    Ok(fstress_eval(cfg, data, spec, 0)?.stress)
}

pub fn rho_eta_split(cfg: &Configuration, data: &DissimilarityData, spec: FSpec) -> Result<StressSplit> {
    let r = fstress_eval(cfg, data, spec, 0)?;
    Ok(StressSplit {
        constant: r.constant,
        rho: r.rho,
        eta: r.eta,
    })
}
