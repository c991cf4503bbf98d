//! Random-edge graph neural network power control policy.
//!
//! Each layer is a polynomial graph filter on the slot's shift operator
//! followed by a pointwise nonlinearity (ReLU on hidden layers, a sigmoid
//! scaled by the power budget at the output). Gradients are computed by a
//! hand-written reverse pass that caches every shifted signal.

mod checkpoint;
mod filter;
mod objective;
mod optim;
mod permute;
mod policy;
mod rate;

pub use checkpoint::{load_params, save_params, ParamsCheckpoint};
pub use filter::{graph_filter, graph_filter_adjoint, shifted_powers, FilterTaps};
pub use objective::{batch_objective, batch_objective_and_grad};
pub use optim::{optimizer_step, Optimizer, OptimizerKind};
pub use permute::{permute_channel, permute_vector, validate_permutation};
pub use policy::{
    init_taps, regnn_backward, regnn_forward, relu, sigmoid, ForwardTrace, ParamGrads, PowerVector,
    ReGnnParams,
};
pub use rate::{sum_rate, sum_rate_grad_p};

pub(crate) use filter::{adjoint_of_sums, filter_from_powers};
pub(crate) use policy::default_input;
