//! The fStress loss for multidimensional scaling.
//!
//! fStress fits fDistances `f(d²)^q` between the points of a configuration to
//! dissimilarities by weighted least squares, where `f` is one of five base
//! functions of the squared Euclidean distance. This crate evaluates the loss
//! together with its exact partial derivatives of orders one through four,
//! checks them against finite differences, and minimizes the loss.
//!
//! Special cases include sStress (identity, `q = 1`), Kruskal's raw stress
//! (identity, `q = 1/2`) and lStress (log, `q = 1`).
//!
//! ```
//! use fstress::{fstress_eval, BaseFunction, Configuration, DissimilarityData, FSpec};
//!
//! let cfg = Configuration::new(2, 1, vec![0.0, 1.0]).unwrap();
//! let data = DissimilarityData::new(2, vec![1.0], vec![2.0]).unwrap();
//! let report = fstress_eval(&cfg, &data, FSpec::new(BaseFunction::Identity, 1.0), 1).unwrap();
//! assert_eq!(report.stress, 0.5);
//! assert_eq!(report.tensors.gradient(), &[2.0, -2.0]);
//! ```

pub mod base;
pub mod error;
pub mod faa_di_bruno;
pub mod loss;
pub mod mds;
pub mod optimize;
pub mod tensor;
pub mod verify;

pub use base::{base_derivs, power_derivs, BaseFunction, FSpec, ScalarDerivs};
pub use error::{DomainError, FStressError, Result};
pub use faa_di_bruno::{faa_di_bruno_general, faa_di_bruno_general_to, quad_form_apply, SymmetricMatrix};
pub use loss::{
    fstress_eval, fstress_eval_with, rho_eta_split, stress_value, DissimilarityData, EvalOptions, LossReport,
    StressSplit,
};
pub use mds::{
    aseek, fdist_pair_tensors, pair_count, pair_matrix, pairs, sindex, squared_distance, Configuration,
    PairIndex,
};
pub use optimize::{
    feasible_random_start, fit, random_start, taylor_model, FitOptions, FitResult, FitStatus, Method,
    TaylorTable,
};
pub use tensor::{DerivTensors, DEFAULT_MAX_DIM};
