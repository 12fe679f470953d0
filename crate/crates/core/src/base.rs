//! Base functions of the squared distance and the univariate power chain rule.
//!
//! Every fDistance is `f(t)^q` where `t = x'Ax` and `f` is one of the five
//! [`BaseFunction`]s. [`base_derivs`] gives `f` and its first four derivatives
//! in closed form; [`power_derivs`] turns them into the derivatives of `f^q`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFunction {
    /// `ln t`, defined for `t > 0`.
    Log,
    /// `t`.
    Identity,
    /// `exp t`.
    Exp,
    /// `t / (1 + t)`, defined for `t > -1`.
    Bounded,
    /// `ln(1 + t)`, defined for `t > -1`.
    #[serde(rename = "log1p")]
    LogPlusOne,
}

impl BaseFunction {
    pub const ALL: [BaseFunction; 5] = [
        BaseFunction::Log,
        BaseFunction::Identity,
        BaseFunction::Exp,
        BaseFunction::Bounded,
        BaseFunction::LogPlusOne,
    ];

    /// Short lowercase name used in instance files and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            BaseFunction::Log => "log",
            BaseFunction::Identity => "identity",
            BaseFunction::Exp => "exp",
            BaseFunction::Bounded => "bounded",
            BaseFunction::LogPlusOne => "log1p",
        }
    }

    /// Whether `t` lies in the open domain of the function.
    pub fn in_domain(self, t: f64) -> bool {
        match self {
            BaseFunction::Log => t > 0.0,
            BaseFunction::Identity | BaseFunction::Exp => t.is_finite(),
            BaseFunction::Bounded | BaseFunction::LogPlusOne => t > -1.0,
        }
    }

    /// Solves `f(t) = y` for `t`, when `f` is invertible at `y`.
    pub fn inverse(self, y: f64) -> Option<f64> {
        let t = match self {
            BaseFunction::Log => y.exp(),
            BaseFunction::Identity => y,
            BaseFunction::Exp if y > 0.0 => y.ln(),
            BaseFunction::Bounded if y < 1.0 => y / (1.0 - y),
            BaseFunction::LogPlusOne => y.exp_m1(),
            _ => return None,
        };
        (t.is_finite() && self.in_domain(t)).then_some(t)
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BaseFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaseFunction::ALL
            .into_iter()
            .find(|b| b.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown function `{s}` (expected one of log, identity, exp, bounded, log1p)")
            })
    }
}

/// Value and first four derivatives of a univariate function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarDerivs(pub [f64; 5]);

impl ScalarDerivs {
    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// Derivative of order `k` (0 is the value).
    pub fn d(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A base function raised to a real power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FSpec {
    pub base: BaseFunction,
    pub power: f64,
}

impl FSpec {
    pub fn new(base: BaseFunction, power: f64) -> Self {
        FSpec { base, power }
    }

    /// The same base with the power doubled, i.e. the square of this fDistance.
    pub fn squared(self) -> Self {
        FSpec {
            base: self.base,
            power: 2.0 * self.power,
        }
    }

    pub fn is_integer_power(&self) -> bool {
        self.power.fract() == 0.0
    }

    /// `f(t)^q` and its first four derivatives in `t`.
    pub fn derivs(&self, t: f64) -> Result<ScalarDerivs, DomainError> {
        power_derivs(*self, t)
    }

    /// `f(t)^q` only.
    pub fn value(&self, t: f64) -> Result<f64, DomainError> {
        Ok(power_derivs(*self, t)?.value())
    }
}

impl fmt::Display for FSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.base, self.power)
    }
}

pub fn base_derivs(base: BaseFunction, t: f64) -> Result<ScalarDerivs, DomainError> {
    if !base.in_domain(t) {
        return Err(DomainError::Base { base, t });
    }
    let d = match base {
        BaseFunction::Log => [
            t.ln(),
            1.0 / t,
            -1.0 / (t * t),
            2.0 / (t * t * t),
            -6.0 / (t * t * t * t),
        ],
        BaseFunction::Identity => [t, 1.0, 0.0, 0.0, 0.0],
        BaseFunction::Exp => [t.exp(); 5],
        BaseFunction::Bounded => {
            let z = 1.0 / (1.0 + t);
            let z2 = z * z;
            [t * z, z2, -2.0 * z2 * z, 6.0 * z2 * z2, -24.0 * z2 * z2 * z]
        }
        BaseFunction::LogPlusOne => {
            let z = 1.0 / (1.0 + t);
            let z2 = z * z;
            [t.ln_1p(), z, -z2, 2.0 * z2 * z, -6.0 * z2 * z2]
        }
    };
    Ok(ScalarDerivs(d))
}

/// Derivatives of `f(t)^q` by the univariate Faà di Bruno formula.
///
/// Terms whose falling-factorial coefficient `q(q-1)...(q-k+1)` vanishes are
/// dropped before `f^(q-k)` is formed, so integer powers at `f(t) = 0` follow
/// the polynomial limit (with `0^0 = 1`).
pub fn power_derivs(spec: FSpec, t: f64) -> Result<ScalarDerivs, DomainError> {
    let q = spec.power;
    if !q.is_finite() || t.is_nan() {
        return Err(DomainError::NonFinite { power: q, t });
    }
    let [f0, f1, f2, f3, f4] = base_derivs(spec.base, t)?.0;
    if !spec.is_integer_power() && f0 <= 0.0 {
        return Err(DomainError::FractionalPower { power: q, value: f0 });
    }
    if f0 == 0.0 && q < 0.0 {
        return Err(DomainError::Pole { power: q });
    }

    // c[k] = q (q-1) ... (q-k+1)
    let mut c = [1.0; 5];
    for k in 1..5 {
        c[k] = c[k - 1] * (q - (k - 1) as f64);
    }
    let term = |coef: f64, k: usize| -> f64 {
        if coef == 0.0 {
            0.0
        } else {
            coef * f0.powf(q - k as f64)
        }
    };

    let g0 = f0.powf(q);
    let g1 = term(c[1], 1) * f1;
    let g2 = term(c[2], 2) * f1 * f1 + term(c[1], 1) * f2;
    let g3 = term(c[3], 3) * f1 * f1 * f1 + 3.0 * term(c[2], 2) * f1 * f2 + term(c[1], 1) * f3;
    let g4 = term(c[4], 4) * f1 * f1 * f1 * f1
        + 6.0 * term(c[3], 3) * f1 * f1 * f2
        + 4.0 * term(c[2], 2) * f1 * f3
        + 3.0 * term(c[2], 2) * f2 * f2
        + term(c[1], 1) * f4;
    Ok(ScalarDerivs([g0, g1, g2, g3, g4]))
}
