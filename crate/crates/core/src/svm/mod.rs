//! RBF-kernel SVM over the scalar sigmoid score.

pub mod cv;
pub mod head;
pub mod smo;

pub use cv::{fit, fit_with_grid_search, grid_search_cv, stratified_folds, CvCell, CvTable, GridSearchSpec, ScoredSample};
pub use head::{
    apply_head, cnn_svm_predict, fit_head, fit_samples, load_svm, save_svm, HeadPrediction, HeadPredictions,
    HeadSelection, FIXED_C, FIXED_GAMMA,
};
pub use smo::{rbf_kernel, smo_solve, smo_train, svm_predict, SmoOutcome, SmoParams, SupportVector, SvmModel};
