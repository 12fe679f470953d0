//! Numerical-differentiation oracle and structural checks.
//!
//! Everything here works from objective values (or, for orders 3 and 4, from
//! analytic tensors one order lower evaluated at perturbed points). No code is
//! shared with the closed-form derivative path.

use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base::FSpec;
use crate::error::{FStressError, Result};
use crate::loss::{fstress_eval, stress_value, DissimilarityData};
use crate::mds::Configuration;
use crate::tensor::DerivTensors;

/// Central-difference step `h_i = epsilon * max(1, |x_i|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub epsilon: f64,
    /// Two-level Richardson extrapolation: `(4 D(h/2) - D(h)) / 3`.
    pub richardson: bool,
}

impl StepPolicy {
    pub fn new(epsilon: f64) -> Self {
        StepPolicy {
            epsilon,
            richardson: false,
        }
    }

    /// `epsilon = 1e-5`, suited to first differences.
    pub fn gradient() -> Self {
        Self::new(1e-5)
    }

    /// `epsilon = 1e-4`; second differences of values lose `eps / h²`.
    pub fn hessian() -> Self {
        Self::new(1e-4)
    }

    pub fn step(&self, xi: f64) -> f64 {
        self.epsilon * xi.abs().max(1.0)
    }
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self::gradient()
    }
}

fn eval<F, E>(f: &mut F, x: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    f(x).map_err(|e| FStressError::Evaluation {
        point: x.to_vec(),
        message: e.to_string(),
    })
}

fn richardson(policy: StepPolicy, mut at: impl FnMut(f64) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let coarse = at(1.0)?;
    if !policy.richardson {
        return Ok(coarse);
    }
    let fine = at(0.5)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

pub fn fd_gradient<F, E>(mut f: F, x: &[f64], policy: StepPolicy) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    richardson(policy, |factor| {
        let mut probe = x.to_vec();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let h = factor * policy.step(x[i]);
            probe[i] = x[i] + h;
            let plus = eval(&mut f, &probe)?;
            probe[i] = x[i] - h;
            let minus = eval(&mut f, &probe)?;
            probe[i] = x[i];
            out.push((plus - minus) / (2.0 * h));
        }
        Ok(out)
    })
}

/// Second-order central stencil, row-major `m × m`, symmetrized by averaging.
pub fn fd_hessian<F, E>(mut f: F, x: &[f64], policy: StepPolicy) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, E>,
    E: Display,
{
    let m = x.len();
    richardson(policy, |factor| {
        let mut out = vec![0.0; m * m];
        let mut probe = x.to_vec();
        let f0 = eval(&mut f, x)?;
        let h: Vec<f64> = x.iter().map(|&v| factor * policy.step(v)).collect();
        for i in 0..m {
            probe[i] = x[i] + h[i];
            let plus = eval(&mut f, &probe)?;
            probe[i] = x[i] - h[i];
            let minus = eval(&mut f, &probe)?;
            probe[i] = x[i];
            out[i * m + i] = (plus - 2.0 * f0 + minus) / (h[i] * h[i]);
            for j in 0..i {
                let mut corner = |si: f64, sj: f64, probe: &mut Vec<f64>| {
                    probe[i] = x[i] + si * h[i];
                    probe[j] = x[j] + sj * h[j];
                    let v = eval(&mut f, probe);
                    probe[i] = x[i];
                    probe[j] = x[j];
                    v
                };
                let pp = corner(1.0, 1.0, &mut probe)?;
                let pm = corner(1.0, -1.0, &mut probe)?;
                let mp = corner(-1.0, 1.0, &mut probe)?;
                let mm = corner(-1.0, -1.0, &mut probe)?;
                let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
        Ok(out)
    })
}

/// Central difference of a vector-valued map along `d`:
/// `(g(x + h d) - g(x - h d)) / 2h`.
pub fn fd_directional<G>(mut g: G, x: &[f64], d: &[f64], h: f64) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * h * b).collect() };
    let plus = g(&shifted(1.0))?;
    let minus = g(&shifted(-1.0))?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect())
}

/// `max |a - b| / max(‖a‖∞, ‖b‖∞)`, or 0 when both are identical.
pub fn relative_deviation(analytic: &[f64], approx: &[f64]) -> f64 {
    relative_deviation_floor(analytic, approx, 0.0)
}

/// As [`relative_deviation`] with the denominator bounded below by `floor`.
pub fn relative_deviation_floor(analytic: &[f64], approx: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), approx.len());
    let diff = analytic
        .iter()
        .zip(approx)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if diff == 0.0 {
        return 0.0;
    }
    let scale = analytic.iter().chain(approx).fold(floor, |m, v| m.max(v.abs()));
    diff / scale
}

/// Random directions with unit Euclidean norm.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-3 {
                break d.into_iter().map(|v| v / norm).collect();
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCheck {
    pub order: usize,
    pub probes: usize,
    pub max_rel_dev: f64,
}

/// Compares `T3 · d` with the directional difference of the Hessian map for
/// `probes` random unit directions.
pub fn fd_tensor3<G>(
    hessian_at: G,
    analytic: &DerivTensors,
    x: &[f64],
    probes: usize,
    seed: u64,
    policy: StepPolicy,
) -> Result<DirectionalCheck>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    directional_check(3, hessian_at, analytic, x, probes, seed, policy)
}

/// Compares `T4 · d` with the directional difference of the order-3 map.
pub fn fd_tensor4<G>(
    third_at: G,
    analytic: &DerivTensors,
    x: &[f64],
    probes: usize,
    seed: u64,
    policy: StepPolicy,
) -> Result<DirectionalCheck>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    directional_check(4, third_at, analytic, x, probes, seed, policy)
}

fn directional_check<G>(
    order: usize,
    mut lower_at: G,
    analytic: &DerivTensors,
    x: &[f64],
    probes: usize,
    seed: u64,
    policy: StepPolicy,
) -> Result<DirectionalCheck>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if analytic.order(order).is_none() {
        return Err(FStressError::Invalid(format!(
            "order-{order} tensor not computed"
        )));
    }
    let h = policy.step(x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut worst = 0.0f64;
    for d in unit_directions(x.len(), probes, seed) {
        let exact = analytic.contract_last(order, &d);
        let approx = fd_directional(&mut lower_at, x, &d, h)?;
        worst = worst.max(relative_deviation(&exact, &approx));
    }
    Ok(DirectionalCheck {
        order,
        probes,
        max_rel_dev: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `H[i][j] == H[j][i]` bit for bit.
    pub hessian_exact: bool,
    /// Largest `|T[π(idx)] - T[idx]| / ‖T‖∞` over the sampled permutations.
    pub order3_max_dev: Option<f64>,
    pub order4_max_dev: Option<f64>,
    pub permutations: usize,
}

pub fn symmetry_report(t: &DerivTensors, permutations: usize, seed: u64) -> SymmetryReport {
    let m = t.dim();
    let hessian_exact = t
        .order(2)
        .map(|h| (0..m).all(|i| (0..i).all(|j| h[i * m + j] == h[j * m + i])))
        .unwrap_or(true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = |r: usize| -> Option<f64> {
        let data = t.order(r)?;
        let norm = t.max_norm(r);
        let mut worst = 0.0f64;
        for _ in 0..permutations {
            let mut perm: Vec<usize> = (0..r).collect();
            perm.shuffle(&mut rng);
            let mut idx = vec![0usize; r];
            let mut permuted = vec![0usize; r];
            for flat in 0..data.len() {
                let mut rem = flat;
                for slot in (0..r).rev() {
                    idx[slot] = rem % m;
                    rem /= m;
                }
                for (dst, &src) in permuted.iter_mut().zip(&perm) {
                    *dst = idx[src];
                }
                let other = data[t.offset(&permuted)];
                worst = worst.max((data[flat] - other).abs());
            }
        }
        Some(if norm > 0.0 { worst / norm } else { worst })
    };
    let order3_max_dev = dev(3);
    let order4_max_dev = dev(4);
    SymmetryReport {
        hessian_exact,
        order3_max_dev,
        order4_max_dev,
        permutations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Derivative orders to verify, each in `1..=4`.
    pub orders: Vec<usize>,
    pub seed: u64,
    /// Random directions for orders 3-4 and permutations for symmetry.
    pub probes: usize,
    pub tol_low: f64,
    pub tol_high: f64,
    pub symmetry_tol: f64,
    pub gradient_step: StepPolicy,
    pub hessian_step: StepPolicy,
    pub directional_step: StepPolicy,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            orders: vec![1, 2],
            seed: 0,
            probes: 32,
            tol_low: 1e-6,
            tol_high: 1e-5,
            symmetry_tol: 1e-12,
            gradient_step: StepPolicy::gradient(),
            hessian_step: StepPolicy::hessian(),
            directional_step: StepPolicy::gradient(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub order: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub spec: FSpec,
    pub n: usize,
    pub p: usize,
    pub stress: f64,
    pub items: Vec<CheckItem>,
    pub passed: bool,
}

impl CheckReport {
    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Verifies analytic derivatives of the objective at `cfg` against finite
/// differences, plus tensor symmetry.
pub fn check_instance(
    cfg: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    if let Some(&bad) = opts.orders.iter().find(|&&r| !(1..=4).contains(&r)) {
        return Err(FStressError::Invalid(format!("cannot check order {bad}")));
    }
    let max_order = opts.orders.iter().copied().max().unwrap_or(0);
    let report = fstress_eval(cfg, data, spec, max_order)?;
    let t = &report.tensors;
    let x = cfg.x();
    let objective = |y: &[f64]| -> Result<f64> { stress_value(&cfg.with_x(y.to_vec())?, data, spec) };
    let tensor_at = |r: usize| {
        move |y: &[f64]| -> Result<Vec<f64>> {
            let rep = fstress_eval(&cfg.with_x(y.to_vec())?, data, spec, r)?;
            Ok(rep.tensors.order(r).unwrap().to_vec())
        }
    };

    let mut items = Vec::new();
    let mut push = |name: &str, order: usize, deviation: f64, tolerance: f64| {
        items.push(CheckItem {
            name: name.to_string(),
            order,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        });
    };
    let sym = symmetry_report(t, opts.probes, opts.seed);
    for &r in &opts.orders {
        match r {
            1 => {
                let fd = fd_gradient(objective, x, opts.gradient_step)?;
                push("gradient", 1, relative_deviation(t.gradient(), &fd), opts.tol_low);
            }
            2 => {
                let fd = fd_hessian(objective, x, opts.hessian_step)?;
                push("hessian", 2, relative_deviation(t.hessian(), &fd), opts.tol_low);
                push(
                    "hessian_symmetry",
                    2,
                    if sym.hessian_exact { 0.0 } else { f64::INFINITY },
                    0.0,
                );
            }
            3 => {
                let c = fd_tensor3(tensor_at(2), t, x, opts.probes, opts.seed, opts.directional_step)?;
                push("tensor3", 3, c.max_rel_dev, opts.tol_high);
                push(
                    "tensor3_symmetry",
                    3,
                    sym.order3_max_dev.unwrap_or(0.0),
                    opts.symmetry_tol,
                );
            }
            4 => {
                let c = fd_tensor4(tensor_at(3), t, x, opts.probes, opts.seed, opts.directional_step)?;
                push("tensor4", 4, c.max_rel_dev, opts.tol_high);
                push(
                    "tensor4_symmetry",
                    4,
                    sym.order4_max_dev.unwrap_or(0.0),
                    opts.symmetry_tol,
                );
            }
            _ => unreachable!(),
        }
    }
    let passed = items.iter().all(|i| i.passed);
    Ok(CheckReport {
        spec,
        n: cfg.n(),
        p: cfg.p(),
        stress: report.stress,
        items,
        passed,
    })
}
