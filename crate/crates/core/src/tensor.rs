//! Dense derivative tensors over `m` coordinates.
//!
//! Layout is row-major with the last index fastest: entry `(i, j, k, l)` of the
//! order-4 tensor lives at `((i * m + j) * m + k) * m + l`, so the order-`r`
//! tensor has strides `(m^(r-1), ..., m, 1)`. Super-symmetry is not exploited.

use serde::{Deserialize, Serialize};

use crate::error::{FStressError, Result};

/// Default cap on the number of coordinates for which order-3 and order-4
/// tensors are materialized (`64^4` doubles is 128 MiB).
pub const DEFAULT_MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivTensors {
    dim: usize,
    max_order: usize,
    value: f64,
    /// Flat storage for orders 1..=4; empty above `max_order`.
    orders: [Vec<f64>; 4],
}

impl DerivTensors {
    /// Zero tensors of orders up to `max_order` over `dim` coordinates.
    pub fn zeros(dim: usize, max_order: usize) -> Self {
        assert!(max_order <= 4, "max_order must be at most 4");
        let orders = std::array::from_fn(|r| {
            if r < max_order {
                vec![0.0; dim.pow(r as u32 + 1)]
            } else {
                Vec::new()
            }
        });
        DerivTensors {
            dim,
            max_order,
            value: 0.0,
            orders,
        }
    }

    /// Checks `max_order` and the size cap before allocating.
    pub fn try_zeros(dim: usize, max_order: usize, max_dim: usize) -> Result<Self> {
        if max_order > 4 {
            return Err(FStressError::Invalid(format!(
                "max_order must be in 0..=4, got {max_order}"
            )));
        }
        if max_order >= 3 && dim > max_dim {
            return Err(FStressError::SizeLimit {
                order: max_order,
                dim,
                cap: max_dim,
            });
        }
        Ok(Self::zeros(dim, max_order))
    }

    /// Builds tensors from flat slices; `orders[r - 1]` must have `dim^r` entries.
    pub fn from_parts(dim: usize, value: f64, orders: Vec<Vec<f64>>) -> Result<Self> {
        let max_order = orders.len();
        let mut t = Self::try_zeros(dim, max_order, usize::MAX)?;
        t.value = value;
        for (r, data) in orders.into_iter().enumerate() {
            let expected = dim.pow(r as u32 + 1);
            if data.len() != expected {
                return Err(FStressError::DimensionMismatch {
                    expected,
                    got: data.len(),
                });
            }
            t.orders[r] = data;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn set_value(&mut self, v: f64) {
        self.value = v;
    }

    /// Flat entries of the order-`r` tensor (`1..=max_order`).
    pub fn order(&self, r: usize) -> Option<&[f64]> {
        (1..=self.max_order).contains(&r).then(|| &self.orders[r - 1][..])
    }

    pub fn order_mut(&mut self, r: usize) -> Option<&mut [f64]> {
        (1..=self.max_order)
            .contains(&r)
            .then(|| &mut self.orders[r - 1][..])
    }

    pub fn gradient(&self) -> &[f64] {
        self.order(1).expect("gradient not computed")
    }

    pub fn hessian(&self) -> &[f64] {
        self.order(2).expect("hessian not computed")
    }

    pub fn third(&self) -> &[f64] {
        self.order(3).expect("order-3 tensor not computed")
    }

    pub fn fourth(&self) -> &[f64] {
        self.order(4).expect("order-4 tensor not computed")
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hessian()[i * self.dim + j]
    }

    pub fn t3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third()[(i * self.dim + j) * self.dim + k]
    }

    pub fn t4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.fourth()[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    /// `self += scale * other`, order by order.
    pub fn add_scaled(&mut self, scale: f64, other: &DerivTensors) {
        assert_eq!(self.dim, other.dim);
        self.value += scale * other.value;
        for r in 0..self.max_order.min(other.max_order) {
            for (a, b) in self.orders[r].iter_mut().zip(&other.orders[r]) {
                *a += scale * b;
            }
        }
    }

    /// Multiplies every entry, including the value.
    pub fn scale(&mut self, c: f64) {
        self.value *= c;
        for o in &mut self.orders {
            o.iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Largest absolute entry of the order-`r` tensor (0 for the value).
    pub fn max_norm(&self, r: usize) -> f64 {
        if r == 0 {
            return self.value.abs();
        }
        self.order(r)
            .map(|t| t.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0)
    }

    /// Contracts the order-`r` tensor with `d` along its last index.
    pub fn contract_last(&self, r: usize, d: &[f64]) -> Vec<f64> {
        let t = self.order(r).expect("order not computed");
        assert_eq!(d.len(), self.dim);
        t.chunks_exact(self.dim)
            .map(|row| row.iter().zip(d).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Full contraction `T[d, d, ..., d]` of the order-`r` tensor.
    pub fn contract_all(&self, r: usize, d: &[f64]) -> f64 {
        if r == 0 {
            return self.value;
        }
        let mut cur = self.order(r).expect("order not computed").to_vec();
        for _ in 0..r {
            cur = cur
                .chunks_exact(self.dim)
                .map(|row| row.iter().zip(d).map(|(a, b)| a * b).sum())
                .collect();
        }
        cur[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_contractions() {
        let m = 3;
        let mut t = DerivTensors::zeros(m, 3);
        assert_eq!(t.order(3).unwrap().len(), 27);
        assert!(t.order(4).is_none());
        let off = t.offset(&[1, 2, 0]);
        t.order_mut(3).unwrap()[off] = 5.0;
        assert_eq!(t.t3(1, 2, 0), 5.0);
        let d = [2.0, 0.0, 0.0];
        let c = t.contract_last(3, &d);
        assert_eq!(c[m + 2], 10.0);
        t.order_mut(1).unwrap().copy_from_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(t.contract_all(1, &[1.0, 1.0, 1.0]), 6.0);
    }

    #[test]
    fn size_cap() {
        assert!(matches!(
            DerivTensors::try_zeros(10, 3, 8),
            Err(FStressError::SizeLimit { .. })
        ));
        assert!(DerivTensors::try_zeros(10, 2, 8).is_ok());
        assert!(DerivTensors::try_zeros(2, 5, 8).is_err());
    }
}
