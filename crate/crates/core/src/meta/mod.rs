//! Training across periods: first-order MAML, the pooled joint-learning
//! baseline, and modular meta-learning over a shared repository of filters.

pub mod blackbox;
pub mod modular;

pub use blackbox::{
    fomaml_meta_step, inner_adapt, joint_train, meta_train_fomaml, runtime_finetune, MetaBatch,
    MetaConfig, MetaLogRow,
};
