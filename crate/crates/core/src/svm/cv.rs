use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svm::smo::{smo_solve, SmoParams, SvmModel, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchSpec {
    pub gamma_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        Self {
            gamma_grid: (-4..=0).map(|e| 2f64.powi(e)).collect(),
            c_grid: (-4..=2).map(|e| 10f64.powi(e)).collect(),
            folds: 5,
            seed: 0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl GridSearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() || self.c_grid.is_empty() {
            return Err(Error::config("gamma and C grids must be non-empty"));
        }
        if self.folds < 2 {
            return Err(Error::config("at least two folds are required"));
        }
        let positive = |v: &f64| *v > 0.0 && v.is_finite();
        if !self.gamma_grid.iter().all(positive) || !self.c_grid.iter().all(positive) {
            return Err(Error::config("grid values must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Every fold's solver reached tolerance.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub folds: usize,
    pub seed: u64,
    pub cells: Vec<CvCell>,
    pub best_gamma: f64,
    #[serde(rename = "best_C")]
    pub best_c: f64,
}

/// One training example for the head: sample id, feature, label.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    pub label: u8,
}

/// Stratified fold index per sample. Ids are sorted, each class is shuffled
/// with the seed and dealt round-robin, so the assignment does not depend on
/// input order.
pub fn stratified_folds(samples: &[ScoredSample], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut assignment = vec![usize::MAX; samples.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == class).collect();
        if idx.len() < folds {
            return Err(Error::Domain(format!(
                "class {class} has {} samples, fewer than the {folds} folds",
                idx.len()
            )));
        }
        idx.sort_by(|&a, &b| samples[a].id.cmp(&samples[b].id));
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Mean stratified k-fold accuracy for every (gamma, C) cell. The best cell
/// has the highest mean accuracy; ties go to the smaller C, then the
/// smaller gamma.
pub fn grid_search_cv(samples: &[ScoredSample], spec: &GridSearchSpec) -> Result<CvTable> {
    spec.validate()?;
    let fold_of = stratified_folds(samples, spec.folds, spec.seed)?;
    let mut cells = Vec::with_capacity(spec.gamma_grid.len() * spec.c_grid.len());
    for &gamma in &spec.gamma_grid {
        for &c in &spec.c_grid {
            let params = SmoParams { gamma, c, tol: spec.tol, max_iter: spec.max_iter };
            let mut fold_accuracies = Vec::with_capacity(spec.folds);
            let mut converged = true;
            for f in 0..spec.folds {
                let (mut xs, mut ys, mut test) = (Vec::new(), Vec::new(), Vec::new());
                for (s, &k) in samples.iter().zip(&fold_of) {
                    if k == f {
                        test.push(s);
                    } else {
                        xs.push(s.score);
                        ys.push(s.label);
                    }
                }
                let out = smo_solve(&xs, &ys, &params)?;
                converged &= out.converged;
                let correct = test.iter().filter(|s| out.model.predict(s.score).0 == s.label).count();
                fold_accuracies.push(correct as f64 / test.len() as f64);
            }
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / spec.folds as f64;
            cells.push(CvCell { gamma, c, mean_accuracy, fold_accuracies, converged });
        }
    }
    let (best_gamma, best_c) = cells
        .iter()
        .min_by(|a, b| {
            b.mean_accuracy
                .total_cmp(&a.mean_accuracy)
                .then(a.c.total_cmp(&b.c))
                .then(a.gamma.total_cmp(&b.gamma))
        })
        .map(|b| (b.gamma, b.c))
        .expect("grid is non-empty");
    Ok(CvTable { folds: spec.folds, seed: spec.seed, cells, best_gamma, best_c })
}

/// Grid search, then a final fit on all samples at the winning cell with
/// the table attached.
pub fn fit_with_grid_search(samples: &[ScoredSample], spec: &GridSearchSpec) -> Result<SvmModel> {
    let table = grid_search_cv(samples, spec)?;
    let mut model = fit(samples, table.best_gamma, table.best_c, spec.tol, spec.max_iter)?;
    model.cv_table = Some(table);
    Ok(model)
}

/// Fit at fixed hyper-parameters. A solver that hits the iteration cap is
/// reported as an error.
pub fn fit(samples: &[ScoredSample], gamma: f64, c: f64, tol: f64, max_iter: usize) -> Result<SvmModel> {
    let xs: Vec<f64> = samples.iter().map(|s| s.score).collect();
    let ys: Vec<u8> = samples.iter().map(|s| s.label).collect();
    crate::svm::smo::smo_train(&xs, &ys, &SmoParams { gamma, c, tol, max_iter })
}
