//! Partial derivatives up to order four of `h(x) = F(x'Ax)` for symmetric `A`.
//!
//! With `t = x'Ax`, `D_i t = 2 (Ax)_i`, `D_ij t = 2 a_ij` and all higher
//! partials of `t` vanish, so the multivariate Faà di Bruno formula reduces to
//!
//! ```text
//! D_i h    = 2 F' (Ax)_i
//! D_ij h   = 2 F' a_ij + 4 F'' (Ax)_i (Ax)_j
//! D_ijk h  = 4 F'' [(Ax)_i a_jk + (Ax)_j a_ik + (Ax)_k a_ij] + 8 F''' (Ax)_i (Ax)_j (Ax)_k
//! D_ijkl h = 4 F'' [a_ik a_jl + a_il a_jk + a_ij a_kl]
//!          + 8 F''' [a_il (Ax)_j (Ax)_k + a_jl (Ax)_i (Ax)_k + a_kl (Ax)_i (Ax)_j
//!                   + a_ik (Ax)_j (Ax)_l + a_jk (Ax)_i (Ax)_l + a_ij (Ax)_k (Ax)_l]
//!          + 16 F'''' (Ax)_i (Ax)_j (Ax)_k (Ax)_l
//! ```
//!
//! The order-4 second-derivative term carries all three pairings of the
//! indices; dropping `a_ij a_kl` breaks super-symmetry.

use crate::base::{FSpec, ScalarDerivs};
use crate::error::{FStressError, Result};
use crate::tensor::{DerivTensors, DEFAULT_MAX_DIM};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    /// Fails unless `entries` is `dim * dim` long and exactly symmetric.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(FStressError::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(FStressError::Invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymmetricMatrix { dim, entries })
    }

    /// Builds the matrix from the lower triangle of `f`.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        SymmetricMatrix { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymmetricMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }
}

/// Returns `(Ax, x'Ax)`.
pub fn quad_form_apply(a: &SymmetricMatrix, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if x.len() != a.dim {
        return Err(FStressError::DimensionMismatch {
            expected: a.dim,
            got: x.len(),
        });
    }
    let ax: Vec<f64> = a
        .entries
        .chunks_exact(a.dim)
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect();
    let gx = ax.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok((ax, gx))
}

/// All partials up to order four of `spec(x'Ax)`.
pub fn faa_di_bruno_general(x: &[f64], a: &SymmetricMatrix, spec: FSpec) -> Result<DerivTensors> {
    faa_di_bruno_general_to(x, a, spec, 4, DEFAULT_MAX_DIM)
}

/// As [`faa_di_bruno_general`], stopping at `max_order` and refusing order-3/4
/// tensors over more than `max_dim` coordinates.
pub fn faa_di_bruno_general_to(
    x: &[f64],
    a: &SymmetricMatrix,
    spec: FSpec,
    max_order: usize,
    max_dim: usize,
) -> Result<DerivTensors> {
    let (ax, gx) = quad_form_apply(a, x)?;
    let g = spec.derivs(gx)?;
    let mut out = DerivTensors::try_zeros(a.dim, max_order, max_dim)?;
    accumulate_quadratic(&mut out, &g, &ax, |i, j| a.get(i, j));
    Ok(out)
}

/// Adds the derivative tensors of `F(x'Ax)` to `out`, given the scalar
/// derivatives `g` of `F` at `x'Ax`, the vector `ax = Ax` and element access
/// to `A`.
///
/// The tensors are linear in `g`, so a linear combination of scalar
/// derivative sets can be accumulated in a single pass.
pub(crate) fn accumulate_quadratic<A>(out: &mut DerivTensors, g: &ScalarDerivs, ax: &[f64], a: A)
where
    A: Fn(usize, usize) -> f64,
{
    let m = out.dim();
    debug_assert_eq!(ax.len(), m);
    let max_order = out.max_order();
    let [g0, g1, g2, g3, g4] = g.0;
    out.set_value(out.value() + g0);

    if max_order >= 1 {
        let c = 2.0 * g1;
        for (o, v) in out.order_mut(1).unwrap().iter_mut().zip(ax) {
            *o += c * v;
        }
    }
    // Every entry is evaluated at its sorted multi-index, so the tensors come
    // out exactly symmetric rather than symmetric up to rounding.
    if max_order >= 2 {
        let h = out.order_mut(2).unwrap();
        for i in 0..m {
            for j in 0..m {
                let [p, q] = sorted([i, j]);
                h[i * m + j] += 2.0 * g1 * a(p, q) + 4.0 * g2 * (ax[p] * ax[q]);
            }
        }
    }
    if max_order >= 3 {
        let t = out.order_mut(3).unwrap();
        for (flat, e) in t.iter_mut().enumerate() {
            let [p, q, r] = sorted([flat / (m * m), flat / m % m, flat % m]);
            *e += 4.0 * g2 * (ax[p] * a(q, r) + ax[q] * a(p, r) + ax[r] * a(p, q))
                + 8.0 * g3 * (ax[p] * ax[q] * ax[r]);
        }
    }
    if max_order >= 4 {
        let t = out.order_mut(4).unwrap();
        for (flat, e) in t.iter_mut().enumerate() {
            let [p, q, r, s] = sorted([flat / (m * m * m), flat / (m * m) % m, flat / m % m, flat % m]);
            let (apq, apr, aps, aqr, aqs, ars) = (a(p, q), a(p, r), a(p, s), a(q, r), a(q, s), a(r, s));
            *e += 4.0 * g2 * (apq * ars + apr * aqs + aps * aqr)
                + 8.0
                    * g3
                    * (apq * (ax[r] * ax[s])
                        + apr * (ax[q] * ax[s])
                        + aps * (ax[q] * ax[r])
                        + aqr * (ax[p] * ax[s])
                        + aqs * (ax[p] * ax[r])
                        + ars * (ax[p] * ax[q]))
                + 16.0 * g4 * (ax[p] * ax[q] * ax[r] * ax[s]);
        }
    }
}

fn sorted<const N: usize>(mut idx: [usize; N]) -> [usize; N] {
    idx.sort_unstable();
    idx
}
