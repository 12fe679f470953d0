//! MDS structure: column-major configurations, the lower-triangle pair
//! ordering, and the implicit `A_uv` matrices.
//!
//! Point, dimension and coordinate indices are 1-based at this module's public
//! boundary. For `n` points in `p` dimensions the coordinate of point `i` on
//! dimension `s` is `x[nu(i, s) - 1]` with `nu(i, s) = (s - 1) n + i`. For
//! example the 3×2 configuration
//!
//! ```text
//!     X = [[1, 4],
//!          [2, 5],
//!          [3, 6]]
//! ```
//!
//! is stored as `x = [1, 2, 3, 4, 5, 6]`.
//!
//! `A_uv` is the direct sum of `p` copies of `(e_u - e_v)(e_u - e_v)'`, so
//! `x'A_uv x` is the squared distance between points `u` and `v`. It is never
//! stored; [`aseek`] produces its elements on demand.

use serde::{Deserialize, Serialize};

use crate::base::FSpec;
use crate::error::{FStressError, Result};
use crate::faa_di_bruno::{accumulate_quadratic, SymmetricMatrix};
use crate::tensor::{DerivTensors, DEFAULT_MAX_DIM};

/// `n` points in `p` dimensions, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    n: usize,
    p: usize,
    x: Vec<f64>,
}

impl Configuration {
    pub fn new(n: usize, p: usize, x: Vec<f64>) -> Result<Self> {
        if n < 2 || p < 1 {
            return Err(FStressError::Invalid(format!(
                "need n >= 2 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        if x.len() != n * p {
            return Err(FStressError::DimensionMismatch {
                expected: n * p,
                got: x.len(),
            });
        }
        Ok(Configuration { n, p, x })
    }

    /// Builds a configuration from row-major point coordinates.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let p = points.first().map_or(0, Vec::len);
        if points.iter().any(|r| r.len() != p) {
            return Err(FStressError::Invalid("ragged point list".into()));
        }
        let mut x = vec![0.0; n * p];
        for (i, row) in points.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                x[s * n + i] = *v;
            }
        }
        Self::new(n, p, x)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of coordinates, `n * p`.
    pub fn dim(&self) -> usize {
        self.n * self.p
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    /// Same shape, new coordinates.
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.p, x)
    }

    /// Coordinate of point `i` on dimension `s` (both 1-based).
    pub fn coord(&self, i: usize, s: usize) -> f64 {
        self.x[nu(self.n, i, s) - 1]
    }

    /// Adds `shift[s]` to every point's coordinate on dimension `s + 1`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.p);
        let mut x = self.x.clone();
        for (s, block) in x.chunks_exact_mut(self.n).enumerate() {
            block.iter_mut().for_each(|v| *v += shift[s]);
        }
        Configuration { x, ..*self }
    }

    /// Translated so that every dimension has zero mean.
    pub fn centered(&self) -> Self {
        let means: Vec<f64> = self
            .x
            .chunks_exact(self.n)
            .map(|b| -b.iter().sum::<f64>() / self.n as f64)
            .collect();
        self.translated(&means)
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        if u == v || u == 0 || v == 0 || u > self.n || v > self.n {
            return Err(FStressError::Index(format!(
                "invalid point pair ({u}, {v}) for n = {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// 1-based coordinate index of point `i` on dimension `s`.
pub fn nu(n: usize, i: usize, s: usize) -> usize {
    (s - 1) * n + i
}

/// A pair of points `i > j` (1-based) with its lower-triangle position `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl PairIndex {
    /// Orders the two points so that `i > j`.
    pub fn new(n: usize, a: usize, b: usize) -> Result<Self> {
        let (i, j) = if a > b { (a, b) } else { (b, a) };
        if i == j || j == 0 || i > n {
            return Err(FStressError::Index(format!(
                "invalid point pair ({a}, {b}) for n = {n}"
            )));
        }
        Ok(PairIndex {
            i,
            j,
            k: sindex(i, j, n),
        })
    }
}

/// Column-major lower-triangle index of the pair `i > j`, starting at 0.
pub fn sindex(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(j >= 1 && j < i && i <= n);
    (j - 1) * n - j * (j - 1) / 2 + (i - j) - 1
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All pairs in ascending `k`: `(2,1), (3,1), ..., (n,1), (3,2), ...`.
pub fn pairs(n: usize) -> impl Iterator<Item = PairIndex> {
    (1..n).flat_map(move |j| {
        (j + 1..=n).map(move |i| PairIndex {
            i,
            j,
            k: sindex(i, j, n),
        })
    })
}

/// Element `(i, j)` of `A_uv` for `n` points in `p` dimensions, all indices
/// 1-based. Returns 0 for indices outside `1..=n*p`.
pub fn aseek(n: usize, p: usize, u: usize, v: usize, i: usize, j: usize) -> i32 {
    if i == 0 || j == 0 || i > n * p || j > n * p {
        return 0;
    }
    pair_entry(n, u - 1, v - 1, i - 1, j - 1) as i32
}

/// 0-based element lookup for `A_uv` with 0-based points `u0`, `v0`.
#[inline]
fn pair_entry(n: usize, u0: usize, v0: usize, i: usize, j: usize) -> f64 {
    let (pi, si) = (i % n, i / n);
    let (pj, sj) = (j % n, j / n);
    if si != sj {
        0.0
    } else if pi == pj {
        if pi == u0 || pi == v0 {
            1.0
        } else {
            0.0
        }
    } else if (pi == u0 && pj == v0) || (pi == v0 && pj == u0) {
        -1.0
    } else {
        0.0
    }
}

/// `A_uv` materialized from [`aseek`].
pub fn pair_matrix(n: usize, p: usize, u: usize, v: usize) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n * p, |i, j| aseek(n, p, u, v, i + 1, j + 1) as f64)
}

/// Returns `(A_uv x, x'A_uv x)` without forming `A_uv`.
pub fn squared_distance(cfg: &Configuration, u: usize, v: usize) -> Result<(Vec<f64>, f64)> {
    cfg.check_pair(u, v)?;
    let mut ax = vec![0.0; cfg.dim()];
    let gx = pair_ax(cfg, u - 1, v - 1, &mut ax);
    Ok((ax, gx))
}

/// Fills `ax` with `A_uv x` (0-based points) and returns the squared distance.
fn pair_ax(cfg: &Configuration, u0: usize, v0: usize, ax: &mut [f64]) -> f64 {
    let n = cfg.n;
    ax.iter_mut().for_each(|v| *v = 0.0);
    let mut gx = 0.0;
    for s in 0..cfg.p {
        let diff = cfg.x[s * n + u0] - cfg.x[s * n + v0];
        ax[s * n + u0] = diff;
        ax[s * n + v0] = -diff;
        gx += diff * diff;
    }
    gx
}

/// Squared distance between points `u` and `v` (0-based).
pub(crate) fn pair_qdist(cfg: &Configuration, u0: usize, v0: usize) -> f64 {
    let n = cfg.n;
    (0..cfg.p)
        .map(|s| {
            let d = cfg.x[s * n + u0] - cfg.x[s * n + v0];
            d * d
        })
        .sum()
}

/// Derivative tensors of `spec(x'A_uv x)` up to `max_order`.
pub fn fdist_pair_tensors(
    cfg: &Configuration,
    u: usize,
    v: usize,
    spec: FSpec,
    max_order: usize,
) -> Result<DerivTensors> {
    cfg.check_pair(u, v)?;
    let mut out = DerivTensors::try_zeros(cfg.dim(), max_order, DEFAULT_MAX_DIM)?;
    let mut ax = vec![0.0; cfg.dim()];
    let gx = pair_ax(cfg, u - 1, v - 1, &mut ax);
    let g = spec.derivs(gx).map_err(|source| {
        let (i, j) = if u > v { (u, v) } else { (v, u) };
        FStressError::PairDomain { i, j, source }
    })?;
    accumulate_pair(&mut out, cfg, u - 1, v - 1, &g, &mut ax);
    Ok(out)
}

/// Adds the tensors of a pair term with scalar derivatives `g` to `out`.
/// `scratch` must hold `cfg.dim()` entries.
pub(crate) fn accumulate_pair(
    out: &mut DerivTensors,
    cfg: &Configuration,
    u0: usize,
    v0: usize,
    g: &crate::base::ScalarDerivs,
    scratch: &mut [f64],
) {
    let n = cfg.n;
    pair_ax(cfg, u0, v0, scratch);
    accumulate_quadratic(out, g, scratch, |i, j| pair_entry(n, u0, v0, i, j));
}
