//! Modular meta-learning: every layer of the policy picks one filter from a
//! shared repository. Training relaxes the discrete choice with Gumbel-softmax
//! samples; runtime keeps the repository frozen and only picks the assignment.

mod assign;
mod checkpoint;
mod network;
mod train;

pub use assign::{
    gumbel_noise, sample_hard, sample_soft, select_mode, AssignmentLogits, HardAssignment,
    SoftAssignment, TemperatureSchedule,
};
pub use checkpoint::{load_modules, save_modules, ModulesCheckpoint};
pub use network::{
    modular_backward, modular_forward_hard, modular_forward_soft, ModularGrads, ModularTrace,
    ModuleSet,
};
pub use train::{
    adapt_logits, enumerate_assignments, exhaustive_assignment, logits_grad, meta_train_modular,
    modules_outer_step, runtime_adapt_modular, AdaptLogRow, Annealing, ModularConfig,
    DEFAULT_SEARCH_CAP,
};
