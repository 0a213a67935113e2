//! Accuracy tables, score histograms and training curves. Every function is
//! pure, so identical inputs give byte-identical output.

pub mod curves;
pub mod histogram;
pub mod predictions;
pub mod table;

pub use curves::{curves_csv, curves_svg, TrainingCurve};
pub use histogram::{histogram_svg, score_histogram, ScoreHistogram, DEFAULT_BINS};
pub use predictions::{parse_predictions_csv, predictions_csv, PredictionRow};
pub use table::{
    accuracy, group_accuracy_table, Cell, GroupAccuracyTable, MethodPredictions, TableRow, OVERALL_ROW, VALIDATION_ROW,
};
