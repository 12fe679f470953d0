//! File formats and command implementations behind the `fstress` binary.

pub mod commands;
pub mod error;
pub mod hexfloat;
pub mod instance;
pub mod tensor_io;

pub use commands::{run, Cli, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK};
pub use error::{CliError, Result};
pub use instance::{Instance, PairLayout};
pub use tensor_io::{read_tensors, write_tensors, Encoding, TensorFile};
