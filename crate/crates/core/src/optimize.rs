//! Minimizing the objective with its analytic derivatives.
//!
//! Two methods share one Armijo backtracking line search: steepest descent
//! and Newton with a Levenberg-style shift `H + λI`. The Hessian of the
//! objective is singular along block-constant (translation) directions, so
//! the shift is always applied; `λ` starts at `1e-8 ‖H‖∞` and doubles until
//! a Cholesky factorization succeeds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base::FSpec;
use crate::error::{FStressError, Result};
use crate::loss::{fstress_eval, stress_value, DissimilarityData};
use crate::mds::{pairs, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "gd")]
    GradientDescent,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub method: Method,
    /// Stop when `‖gradient‖∞ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for random starts and start perturbation.
    pub seed: u64,
    /// Translate the result to zero column means.
    pub center: bool,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    /// Attempts to find or perturb into a feasible start.
    pub start_attempts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            method: Method::Newton,
            tol: 1e-8,
            max_iter: 500,
            seed: 0,
            center: false,
            armijo: 1e-4,
            backtrack: 0.5,
            max_halvings: 60,
            start_attempts: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Gradient,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub stress: f64,
    pub grad_norm: f64,
    /// Step that produced this iterate; `None` for the start.
    pub step: Option<StepKind>,
    pub step_length: f64,
    /// Hessian shift used for a Newton step.
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub config: Configuration,
    pub stress: f64,
    pub status: FitStatus,
    pub trace: Vec<IterRecord>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Uniform coordinates in `[-1, 1]`, rescaled so the mean squared distance
/// matches the squared distance whose fDistance equals the mean weighted
/// dissimilarity, when the fDistance can be inverted there.
pub fn random_start(
    n: usize,
    p: usize,
    data: &DissimilarityData,
    spec: FSpec,
    seed: u64,
) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = Configuration::new(n, p, x)?;
    let Some(target) = target_squared_distance(data, spec) else {
        return Ok(cfg);
    };
    let mean_sq = pairs(n)
        .map(|pr| crate::mds::pair_qdist(&cfg, pr.i - 1, pr.j - 1))
        .sum::<f64>()
        / crate::mds::pair_count(n) as f64;
    if mean_sq <= 0.0 {
        return Ok(cfg);
    }
    let c = (target / mean_sq).sqrt();
    cfg.with_x(cfg.x().iter().map(|v| c * v).collect())
}

fn target_squared_distance(data: &DissimilarityData, spec: FSpec) -> Option<f64> {
    let (sum, count) = data
        .weights()
        .iter()
        .zip(data.delta())
        .filter(|(w, _)| **w > 0.0)
        .fold((0.0, 0usize), |(s, c), (_, d)| (s + d, c + 1));
    if count == 0 || spec.power == 0.0 {
        return None;
    }
    let mean = sum / count as f64;
    if mean <= 0.0 {
        return None;
    }
    let t = spec.base.inverse(mean.powf(1.0 / spec.power))?;
    (t > 0.0 && t.is_finite()).then_some(t)
}

/// Random start that is feasible for `spec`, redrawing up to
/// `opts.start_attempts` times.
pub fn feasible_random_start(
    n: usize,
    p: usize,
    data: &DissimilarityData,
    spec: FSpec,
    opts: &FitOptions,
) -> Result<Configuration> {
    let mut last = None;
    for attempt in 0..opts.start_attempts.max(1) {
        let cfg = random_start(n, p, data, spec, opts.seed.wrapping_add(attempt as u64))?;
        match stress_value(&cfg, data, spec) {
            Ok(v) if v.is_finite() => return Ok(cfg),
            Ok(_) => {}
            Err(e) if e.domain().is_some() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| FStressError::Invalid("no feasible start found".into())))
}

fn feasible(
    start: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    opts: &FitOptions,
) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = 1e-3 * start.x().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut cfg = start.clone();
    let mut last = None;
    for _ in 0..opts.start_attempts.max(1) {
        match stress_value(&cfg, data, spec) {
            Ok(v) if v.is_finite() => return Ok(cfg),
            Ok(_) => {}
            Err(e) if e.domain().is_some() => last = Some(e),
            Err(e) => return Err(e),
        }
        let x = start
            .x()
            .iter()
            .map(|v| v + scale * rng.random_range(-1.0..1.0))
            .collect();
        cfg = start.with_x(x)?;
    }
    Err(last.unwrap_or_else(|| FStressError::Invalid("no feasible start found".into())))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

/// Newton direction from `(H + λI) d = -g`; `None` if no shift up to a
/// generous bound gives a positive-definite matrix.
fn newton_direction(hessian: &[f64], gradient: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = gradient.len();
    let h = DMatrix::from_row_slice(m, m, hessian);
    let norm = inf_norm(hessian);
    let mut shift = 1e-8 * if norm > 0.0 { norm } else { 1.0 };
    let rhs = DVector::from_iterator(m, gradient.iter().map(|g| -g));
    for _ in 0..200 {
        let shifted = &h + DMatrix::identity(m, m) * shift;
        if let Some(chol) = shifted.cholesky() {
            let d = chol.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some((d.iter().copied().collect(), shift));
            }
        }
        shift *= 2.0;
    }
    None
}

/// Minimizes the objective from `start`.
///
/// An infeasible start (a weighted pair outside the domain) is jittered until
/// it becomes feasible. Steps whose trial point is outside the domain count as
/// `+∞` in the line search.
pub fn fit(
    start: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut cfg = feasible(start, data, spec, opts)?;
    let order = match opts.method {
        Method::GradientDescent => 1,
        Method::Newton => 2,
    };
    let trial = |x: Vec<f64>, cfg: &Configuration| -> f64 {
        cfg.with_x(x)
            .and_then(|c| stress_value(&c, data, spec))
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    };

    let mut trace = Vec::new();
    let mut status = FitStatus::MaxIterations;
    let mut step_kind = None;
    let (mut step_length, mut shift) = (0.0, 0.0);
    let mut gd_alpha = 1.0;
    let mut iteration = 0;
    loop {
        let report = fstress_eval(&cfg, data, spec, order)?;
        let g = report.tensors.gradient();
        if !report.stress.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(FStressError::NonFinite {
                what: "objective or gradient",
                iteration,
                x: cfg.x().to_vec(),
            });
        }
        let grad_norm = inf_norm(g);
        trace.push(IterRecord {
            iteration,
            stress: report.stress,
            grad_norm,
            step: step_kind,
            step_length,
            shift,
        });
        if grad_norm <= opts.tol {
            status = FitStatus::Converged;
            break;
        }
        if iteration >= opts.max_iter {
            break;
        }

        let (direction, kind, initial, used_shift) = match opts.method {
            Method::Newton => match newton_direction(report.tensors.hessian(), g) {
                Some((d, s)) => (d, StepKind::Newton, 1.0, s),
                None => (g.iter().map(|v| -v).collect(), StepKind::Gradient, gd_alpha, 0.0),
            },
            Method::GradientDescent => (g.iter().map(|v| -v).collect(), StepKind::Gradient, gd_alpha, 0.0),
        };
        let slope: f64 = direction.iter().zip(g).map(|(d, g)| d * g).sum();
        let x = cfg.x();
        let mut alpha = initial;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let candidate: Vec<f64> = x.iter().zip(&direction).map(|(x, d)| x + alpha * d).collect();
            let value = trial(candidate.clone(), &cfg);
            if value <= report.stress + opts.armijo * alpha * slope {
                accepted = Some(candidate);
                break;
            }
            alpha *= opts.backtrack;
        }
        let Some(next) = accepted else {
            status = FitStatus::LineSearchFailed;
            break;
        };
        if kind == StepKind::Gradient {
            gd_alpha = 2.0 * alpha;
        }
        cfg = cfg.with_x(next)?;
        step_kind = Some(kind);
        step_length = alpha;
        shift = used_shift;
        iteration += 1;
    }

    let stress = trace.last().map(|r| r.stress).unwrap_or(f64::NAN);
    if opts.center {
        cfg = cfg.centered();
    }
    Ok(FitResult {
        config: cfg,
        stress,
        status,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorRow {
    pub step: f64,
    pub actual: f64,
    /// Models of order 2, 3 and 4.
    pub model: [f64; 3],
    /// `|actual - model|` for orders 2, 3 and 4.
    pub error: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorTable {
    pub rows: Vec<TaylorRow>,
    /// Least-squares slope of `log error` against `log step` for orders 2, 3
    /// and 4, over the rows with `1e-3 <= step <= 1e-1` whose error is above
    /// the rounding floor of the objective. `None` with fewer than 3 rows.
    pub slopes: [Option<f64>; 3],
}

/// Compares `stress(x + t d)` with its Taylor expansions of orders 2-4 at `x`.
pub fn taylor_model(
    cfg: &Configuration,
    data: &DissimilarityData,
    spec: FSpec,
    direction: &[f64],
    steps: &[f64],
) -> Result<TaylorTable> {
    if direction.len() != cfg.dim() {
        return Err(FStressError::DimensionMismatch {
            expected: cfg.dim(),
            got: direction.len(),
        });
    }
    let report = fstress_eval(cfg, data, spec, 4)?;
    let t = &report.tensors;
    let c: Vec<f64> = (0..=4).map(|r| t.contract_all(r, direction)).collect();
    let floor = 64.0 * f64::EPSILON * (report.constant + report.eta + report.rho.abs());

    let mut rows = Vec::with_capacity(steps.len());
    for &s in steps {
        let x: Vec<f64> = cfg.x().iter().zip(direction).map(|(x, d)| x + s * d).collect();
        let actual = stress_value(&cfg.with_x(x)?, data, spec)?;
        let m2 = c[0] + s * c[1] + s * s / 2.0 * c[2];
        let m3 = m2 + s.powi(3) / 6.0 * c[3];
        let m4 = m3 + s.powi(4) / 24.0 * c[4];
        let model = [m2, m3, m4];
        let error = model.map(|m| (actual - m).abs());
        rows.push(TaylorRow {
            step: s,
            actual,
            model,
            error,
        });
    }
    let slopes = std::array::from_fn(|k| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| (1e-3..=1e-1).contains(&r.step) && r.error[k] > floor)
            .map(|r| (r.step.ln(), r.error[k].ln()))
            .collect();
        loglog_slope(&pts)
    });
    Ok(TaylorTable { rows, slopes })
}

/// Ordinary least-squares slope; `None` with fewer than three points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `count` steps spaced evenly in `log10` between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count.max(2) - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseFunction;

    fn hidden() -> Configuration {
        Configuration::from_points(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 1.1], vec![-0.8, 0.5]])
            .unwrap()
    }

    fn exact_data(cfg: &Configuration, spec: FSpec) -> DissimilarityData {
        let n = cfg.n();
        let probe = DissimilarityData::unweighted(n, vec![0.0; crate::mds::pair_count(n)]).unwrap();
        let fd = fstress_eval(cfg, &probe, spec, 0).unwrap().fdist;
        DissimilarityData::unweighted(n, fd).unwrap()
    }

    #[test]
    fn start_at_the_minimum_stops_immediately() {
        let spec = FSpec::new(BaseFunction::Identity, 0.5);
        let cfg = hidden();
        let data = exact_data(&cfg, spec);
        let res = fit(&cfg, &data, spec, &FitOptions::default()).unwrap();
        assert!(res.converged());
        assert_eq!(res.iterations(), 0);
        assert_eq!(res.stress, 0.0);
    }

    #[test]
    fn stress_trace_is_monotone() {
        let spec = FSpec::new(BaseFunction::Identity, 0.5);
        let data = DissimilarityData::unweighted(4, vec![1.0, 1.2, 0.9, 1.5, 0.8, 1.1]).unwrap();
        for method in [Method::GradientDescent, Method::Newton] {
            let opts = FitOptions {
                method,
                ..FitOptions::default()
            };
            let start = feasible_random_start(4, 2, &data, spec, &opts).unwrap();
            let res = fit(&start, &data, spec, &opts).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1].stress <= w[0].stress);
            }
        }
    }

    #[test]
    fn infeasible_start_is_perturbed() {
        let spec = FSpec::new(BaseFunction::Log, 1.0);
        let data = DissimilarityData::unweighted(3, vec![0.5, 0.1, 0.3]).unwrap();
        let start = Configuration::new(3, 1, vec![0.0, 0.0, 1.0]).unwrap();
        let res = fit(
            &start,
            &data,
            spec,
            &FitOptions {
                max_iter: 5,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(res.trace[0].stress.is_finite());
    }

    #[test]
    fn start_that_cannot_be_fixed_is_a_domain_error() {
        let spec = FSpec::new(BaseFunction::Log, 0.5);
        // ln t must be positive, jitter of 1e-3 cannot separate points that far
        let data = DissimilarityData::unweighted(2, vec![1.0]).unwrap();
        let start = Configuration::new(2, 1, vec![0.0, 0.5]).unwrap();
        let err = fit(&start, &data, spec, &FitOptions::default()).unwrap_err();
        assert!(err.domain().is_some());
    }

    #[test]
    fn random_start_matches_target_scale() {
        let spec = FSpec::new(BaseFunction::Identity, 0.5);
        let data = DissimilarityData::unweighted(4, vec![2.0; 6]).unwrap();
        let cfg = random_start(4, 2, &data, spec, 7).unwrap();
        let mean_sq: f64 = pairs(4)
            .map(|p| crate::mds::pair_qdist(&cfg, p.i - 1, p.j - 1))
            .sum::<f64>()
            / 6.0;
        assert!((mean_sq - 4.0).abs() < 1e-12);
        assert_eq!(cfg, random_start(4, 2, &data, spec, 7).unwrap());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = log_grid(1e-3, 1e-1, 5)
            .iter()
            .map(|t| (t.ln(), 3.0 * t.ln() + 0.7))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..2]), None);
    }

    #[test]
    fn taylor_errors_vanish_with_step() {
        let spec = FSpec::new(BaseFunction::Bounded, 1.0);
        let data = DissimilarityData::unweighted(4, vec![0.3, 0.5, 0.4, 0.6, 0.2, 0.45]).unwrap();
        let d = crate::verify::unit_directions(8, 1, 3).pop().unwrap();
        let table = taylor_model(&hidden(), &data, spec, &d, &[1e-2, 1e-4, 1e-6, 0.0]).unwrap();
        let last = table.rows.last().unwrap();
        assert_eq!(last.error, [0.0; 3]);
        for k in 0..3 {
            assert!(table.rows[2].error[k] <= table.rows[0].error[k]);
        }
    }
}
