//! Kernel-matrix classification: a dual SVM trained per class plus nested
//! cross-validation for parameter selection and accuracy estimates.

mod cv;
mod svm;

pub use cv::{
    nested_cv, one_vs_rest_predict, one_vs_rest_train, stratified_folds, EvalReport,
    FoldOutcome, OneVsRest, ParamGrid,
};
pub use svm::{svm_decision, svm_predict, svm_train, SvmModel};
