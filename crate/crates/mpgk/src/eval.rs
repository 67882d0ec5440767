//! Classification evaluation: repeated stratified 10-fold cross-validation
//! with per-fold nested selection of the SVM cost C and the iteration
//! count T.
//!
//! Every repeat draws a fresh seeded stratified fold split. Within each
//! outer fold, (C, T) is chosen by an inner stratified cross-validation on
//! the training folds only, the model is retrained on the full training
//! side, and the held-out fold is scored. The report aggregates the mean
//! and standard deviation over the repeat-level accuracies.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gram::GramMatrix;
use crate::linalg::eigenvalue_extrema;
use crate::params::derive_seed;
use crate::svm::MulticlassSvm;

const FOLD_SEED_TAG: u64 = 0x464f_4c44;
const INNER_SEED_TAG: u64 = 0x494e_4e52;

/// Cross-validation settings. The default C grid spans 10^-3 .. 10^3.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub c_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            repeats: 10,
            c_grid: (-3..=3).map(|e| 10f64.powi(e)).collect(),
            seed: 1,
        }
    }
}

/// Outcome of one (repeat, fold) cell.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub selected_c: f64,
    /// Selected iteration count (1-based t).
    pub selected_t: usize,
}

/// Aggregated cross-validation report. The standard deviation is the
/// population deviation over the repeat-level mean accuracies.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repeat_accuracies: Vec<f64>,
    pub folds: Vec<FoldOutcome>,
}

impl CvReport {
    /// CSV rendering: one row per (repeat, fold) plus a summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("repeat,fold,accuracy,selected_c,selected_t\n");
        for f in &self.folds {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.repeat, f.fold, f.accuracy, f.selected_c, f.selected_t
            ));
        }
        out.push_str(&format!("summary,,{},{},\n", self.mean_accuracy, self.std_accuracy));
        out
    }
}

/// Adds a diagonal ridge when the smallest eigenvalue dips below
/// `-1e-8 * lambda_max`, restoring positive semidefiniteness for the SVM.
fn ridge_to_psd(gram: &GramMatrix) -> Result<Array2<f64>> {
    let values = gram.values();
    let (min_eig, max_eig) = eigenvalue_extrema(&values.view())?;
    let mut out = values.clone();
    if min_eig < -1e-8 * max_eig.abs() {
        let ridge = -min_eig + 1e-12 * max_eig.abs();
        log::warn!(
            "gram for t = {} has minimum eigenvalue {min_eig:.3e}; adding ridge {ridge:.3e}",
            gram.iteration
        );
        for i in 0..out.nrows() {
            out[[i, i]] += ridge;
        }
    }
    Ok(out)
}

/// Stratified fold assignment: within each class, indices are shuffled and
/// dealt round-robin, keeping class proportions near-equal across folds.
fn stratified_folds(labels: &[usize], n_classes: usize, folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    let mut next_fold = 0usize;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for idx in members {
            assignment[idx] = next_fold;
            next_fold = (next_fold + 1) % folds;
        }
    }
    assignment
}

fn subgram(k: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), idx.len()));
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[[a, b]] = k[[i, j]];
        }
    }
    out
}

/// Runs the full protocol over one Gram matrix per iteration t = 1..=T.
/// Deterministic given the seed; (repeat, fold) cells run in parallel.
pub fn cross_validate(grams: &[GramMatrix], labels: &[usize], cfg: &CvConfig) -> Result<CvReport> {
    if grams.is_empty() {
        return Err(Error::InvalidParameter("no gram matrices supplied".into()));
    }
    let n = labels.len();
    if grams.iter().any(|g| g.n() != n) {
        return Err(Error::Contract("gram size does not match the label count".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if n_classes < 2 {
        return Err(Error::Degenerate("need >= 2 classes".into()));
    }
    let mut class_counts = vec![0usize; n_classes];
    for &l in labels {
        class_counts[l] += 1;
    }
    let smallest = *class_counts.iter().min().unwrap();
    if cfg.folds < 2 {
        return Err(Error::InvalidParameter("need >= 2 folds".into()));
    }
    if cfg.folds > smallest {
        return Err(Error::Config(format!(
            "stratification error: {} folds but the smallest class has {smallest} graphs",
            cfg.folds
        )));
    }
    if cfg.c_grid.is_empty() || cfg.repeats == 0 {
        return Err(Error::InvalidParameter("empty C grid or zero repeats".into()));
    }
    if cfg.c_grid.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidParameter("C grid values must be positive and finite".into()));
    }
    // Ascending C order enables warm-started training paths; ties in the
    // selection keep the first (t, C) candidate in this order.
    let mut c_grid = cfg.c_grid.clone();
    c_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c_grid.dedup();

    let ridged: Vec<Array2<f64>> = grams.iter().map(ridge_to_psd).collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> =
        (0..cfg.repeats).flat_map(|r| (0..cfg.folds).map(move |f| (r, f))).collect();
    let mut outcomes: Vec<FoldOutcome> = cells
        .into_par_iter()
        .map(|(repeat, fold)| -> Result<FoldOutcome> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, FOLD_SEED_TAG ^ (repeat as u64)));
            let fold_of = stratified_folds(labels, n_classes, cfg.folds, &mut rng);
            let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let (c, t_idx) =
                select_hyperparameters(&ridged, labels, &train_idx, n_classes, cfg, &c_grid, repeat, fold)?;
            let k_train = subgram(&ridged[t_idx], &train_idx);
            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let model = train_along_c_path(&k_train, &train_labels, n_classes, &c_grid, c)?;
            let mut correct = 0usize;
            for &i in &test_idx {
                let row: Vec<f64> = train_idx.iter().map(|&j| ridged[t_idx][[i, j]]).collect();
                if model.predict(&row)? == labels[i] {
                    correct += 1;
                }
            }
            Ok(FoldOutcome {
                repeat,
                fold,
                accuracy: correct as f64 / test_idx.len().max(1) as f64,
                selected_c: c,
                selected_t: t_idx + 1,
            })
        })
        .collect::<Result<_>>()?;
    outcomes.sort_by_key(|o| (o.repeat, o.fold));

    let repeat_accuracies: Vec<f64> = (0..cfg.repeats)
        .map(|r| {
            let accs: Vec<f64> = outcomes.iter().filter(|o| o.repeat == r).map(|o| o.accuracy).collect();
            accs.iter().sum::<f64>() / accs.len() as f64
        })
        .collect();
    let mean = repeat_accuracies.iter().sum::<f64>() / repeat_accuracies.len() as f64;
    let var = repeat_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / repeat_accuracies.len() as f64;
    Ok(CvReport { mean_accuracy: mean, std_accuracy: var.sqrt(), repeat_accuracies, folds: outcomes })
}

/// Trains at the target C by walking the ascending grid up to it with warm
/// starts, which converges far faster than a cold start at a large C.
fn train_along_c_path(
    k_train: &Array2<f64>,
    train_labels: &[usize],
    n_classes: usize,
    c_grid: &[f64],
    target_c: f64,
) -> Result<MulticlassSvm> {
    let mut warm: Option<MulticlassSvm> = None;
    for &c in c_grid.iter().filter(|&&c| c <= target_c) {
        warm = Some(MulticlassSvm::train_warm(&k_train.view(), train_labels, n_classes, c, warm.as_ref())?);
    }
    match warm {
        Some(model) => Ok(model),
        None => MulticlassSvm::train(&k_train.view(), train_labels, n_classes, target_c),
    }
}

/// Inner selection of (C, T) on the training side only: a single stratified
/// inner split, scores averaged over inner folds; ties keep the first
/// candidate in (T ascending, C ascending) order. Falls back to the grid
/// midpoint and the final T when the training side is too small to split.
#[allow(clippy::too_many_arguments)]
fn select_hyperparameters(
    ridged: &[Array2<f64>],
    labels: &[usize],
    train_idx: &[usize],
    n_classes: usize,
    cfg: &CvConfig,
    c_grid: &[f64],
    repeat: usize,
    fold: usize,
) -> Result<(f64, usize)> {
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let mut counts = vec![0usize; n_classes];
    for &l in &train_labels {
        counts[l] += 1;
    }
    let smallest = *counts.iter().min().unwrap();
    let inner_folds = (cfg.folds - 1).min(smallest);
    if inner_folds < 2 {
        return Ok((c_grid[c_grid.len() / 2], ridged.len() - 1));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        INNER_SEED_TAG ^ ((repeat as u64) << 16) ^ (fold as u64),
    ));
    let inner_fold_of = stratified_folds(&train_labels, n_classes, inner_folds, &mut rng);

    // Pre-split index sets (positions into train_idx).
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..inner_folds)
        .map(|f| {
            let tr: Vec<usize> = (0..train_idx.len()).filter(|&p| inner_fold_of[p] != f).collect();
            let va: Vec<usize> = (0..train_idx.len()).filter(|&p| inner_fold_of[p] == f).collect();
            (tr, va)
        })
        .collect();

    let mut score_sums = vec![vec![0.0f64; c_grid.len()]; ridged.len()];
    for t_idx in 0..ridged.len() {
        // Kernel over the training side for this t, reused across C values.
        let k_train = subgram(&ridged[t_idx], train_idx);
        for (tr, va) in &splits {
            let k_inner = subgram(&k_train, tr);
            let inner_labels: Vec<usize> = tr.iter().map(|&p| train_labels[p]).collect();
            let va_labels: Vec<usize> = va.iter().map(|&p| train_labels[p]).collect();
            let mut warm: Option<MulticlassSvm> = None;
            for (ci, &c) in c_grid.iter().enumerate() {
                let model = MulticlassSvm::train_warm(&k_inner.view(), &inner_labels, n_classes, c, warm.as_ref());
                let acc = match model {
                    Ok(model) => {
                        let mut correct = 0usize;
                        for (pos, &p) in va.iter().enumerate() {
                            let row: Vec<f64> = tr.iter().map(|&q| k_train[[p, q]]).collect();
                            if model.predict(&row)? == va_labels[pos] {
                                correct += 1;
                            }
                        }
                        warm = Some(model);
                        correct as f64 / va.len().max(1) as f64
                    }
                    // An inner split can lose a class entirely; score it zero.
                    Err(Error::Degenerate(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                score_sums[t_idx][ci] += acc;
            }
        }
    }
    let mut best = (c_grid[0], 0usize, f64::NEG_INFINITY);
    for t_idx in 0..ridged.len() {
        for (ci, &c) in c_grid.iter().enumerate() {
            if score_sums[t_idx][ci] > best.2 {
                best = (c, t_idx, score_sums[t_idx][ci]);
            }
        }
    }
    Ok((best.0, best.1))
}
