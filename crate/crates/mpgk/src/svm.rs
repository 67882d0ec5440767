//! C-SVM on precomputed kernels, trained by sequential minimal
//! optimization with maximal-violating-pair working set selection, plus a
//! one-vs-rest multiclass wrapper.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// KKT gap below which the SMO loop stops. Errors live on the +-1 label
/// scale at the optimum, so an absolute tolerance is meaningful regardless
/// of the kernel's magnitude.
pub const KKT_TOLERANCE: f64 = 1e-3;

/// Trained binary SVM over a precomputed kernel. Labels are +-1; support
/// vectors are indices into the training set.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub support_indices: Vec<usize>,
    /// Dual coefficient alpha_i of each support vector, in (0, C].
    pub dual_coefs: Vec<f64>,
    /// Label (+-1) of each support vector.
    pub sv_labels: Vec<f64>,
    pub bias: f64,
    pub training_size: usize,
}

impl SvmModel {
    /// Decision value for a sample given its kernel row against every
    /// training point.
    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        if kernel_row.len() != self.training_size {
            return Err(Error::Contract(format!(
                "kernel row has {} entries for a model trained on {}",
                kernel_row.len(),
                self.training_size
            )));
        }
        let mut sum = self.bias;
        for ((&idx, &a), &y) in self.support_indices.iter().zip(&self.dual_coefs).zip(&self.sv_labels) {
            sum += a * y * kernel_row[idx];
        }
        Ok(sum)
    }

    /// Predicted label: the sign of the decision value, with zero mapped
    /// to +1.
    pub fn predict(&self, kernel_row: &[f64]) -> Result<f64> {
        Ok(if self.decision(kernel_row)? < 0.0 { -1.0 } else { 1.0 })
    }
}

/// Trains a binary C-SVM by SMO on a precomputed kernel. Deterministic
/// given input order; stops when the maximal KKT violation drops below
/// [`KKT_TOLERANCE`].
pub fn svm_train(kernel: &ArrayView2<f64>, labels: &[f64], c: f64) -> Result<SvmModel> {
    svm_train_warm(kernel, labels, c, None)
}

/// [`svm_train`] with an optional warm start from a model trained on the
/// same data at a smaller C (whose dual solution stays feasible once the
/// box grows). Training along an ascending C path this way avoids the long
/// tail of iterations that cold starts take at large C.
pub fn svm_train_warm(
    kernel: &ArrayView2<f64>,
    labels: &[f64],
    c: f64,
    warm: Option<&SvmModel>,
) -> Result<SvmModel> {
    let n = labels.len();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::Contract(format!(
            "kernel is {}x{} for {n} labels",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidParameter("labels must be +-1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::Degenerate("single-class training set".into()));
    }

    let mut alpha = vec![0.0f64; n];
    // f[i] = sum_j alpha_j y_j K(j, i); errors are e[i] = f[i] - y[i].
    let mut f = vec![0.0f64; n];
    if let Some(model) = warm {
        if model.training_size != n {
            return Err(Error::Contract("warm-start model was trained on a different set".into()));
        }
        // Only a start from a smaller box keeps the equality constraint
        // intact; anything else is ignored rather than clamped.
        if model.dual_coefs.iter().all(|&a| a <= c) {
            for (&idx, &a) in model.support_indices.iter().zip(&model.dual_coefs) {
                alpha[idx] = a;
            }
            for t in 0..n {
                let mut acc = 0.0;
                for (&idx, &a) in model.support_indices.iter().zip(&model.dual_coefs) {
                    acc += a * labels[idx] * kernel[[idx, t]];
                }
                f[t] = acc;
            }
        }
    }
    let in_up = |i: usize, alpha: &[f64]| (labels[i] > 0.0 && alpha[i] < c) || (labels[i] < 0.0 && alpha[i] > 0.0);
    let in_low = |i: usize, alpha: &[f64]| (labels[i] > 0.0 && alpha[i] > 0.0) || (labels[i] < 0.0 && alpha[i] < c);

    const TAU: f64 = 1e-12;
    let stop_gap = KKT_TOLERANCE;
    let max_rounds = 200_000.max(500 * n);
    let mut rounds = 0usize;
    let (mut gap_lo, mut gap_hi) = (0.0, 0.0);
    loop {
        // First element: smallest error in the up set; the largest error in
        // the low set bounds the KKT gap. Ascending scans keep ties
        // deterministic.
        let mut i_up = None;
        let mut e_up = f64::INFINITY;
        let mut e_low = f64::NEG_INFINITY;
        for t in 0..n {
            let e = f[t] - labels[t];
            if in_up(t, &alpha) && e < e_up {
                e_up = e;
                i_up = Some(t);
            }
            if in_low(t, &alpha) && e > e_low {
                e_low = e;
            }
        }
        let Some(i) = i_up else { break };
        gap_lo = e_up;
        gap_hi = e_low;
        if e_low - e_up < stop_gap {
            break;
        }
        // Second element by second-order gain: among violating low-set
        // candidates, maximize (e_t - e_i)^2 / (K_ii + K_tt - 2 K_it).
        let row_i = kernel.row(i);
        let kii = row_i[i];
        let ei = f[i] - labels[i];
        let mut j_sel = None;
        let mut best_gain = f64::NEG_INFINITY;
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let et = f[t] - labels[t];
            if et <= ei {
                continue;
            }
            let quad = (kii + kernel[[t, t]] - 2.0 * row_i[t]).max(TAU);
            let gain = (et - ei) * (et - ei) / quad;
            if gain > best_gain {
                best_gain = gain;
                j_sel = Some(t);
            }
        }
        let Some(j) = j_sel else { break };
        rounds += 1;
        if rounds > max_rounds {
            log::warn!("SMO hit the iteration cap with KKT gap {:.3e}", e_low - e_up);
            break;
        }

        let (yi, yj) = (labels[i], labels[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if yi != yj {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        let row_j = kernel.row(j);
        let eta = (kii + row_j[j] - 2.0 * row_i[j]).max(TAU);
        let ej = f[j] - yj;
        let mut aj = aj_old + yj * (ei - ej) / eta;
        aj = aj.clamp(lo, hi);
        let ai = ai_old + yi * yj * (aj_old - aj);
        // Snap box-boundary drift from the paired update.
        let ai = if ai < 1e-12 * c { 0.0 } else if ai > c * (1.0 - 1e-12) { c } else { ai };
        let aj = if aj < 1e-12 * c { 0.0 } else if aj > c * (1.0 - 1e-12) { c } else { aj };
        if (ai - ai_old).abs() < f64::EPSILON && (aj - aj_old).abs() < f64::EPSILON {
            // The selected pair cannot move; numerically stuck.
            log::warn!("SMO stalled with KKT gap {:.3e}", e_low - e_up);
            break;
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - ai_old, aj - aj_old);
        for ((ft, &kit), &kjt) in f.iter_mut().zip(row_i.iter()).zip(row_j.iter()) {
            *ft += di * yi * kit + dj * yj * kjt;
        }
    }

    log::debug!(
        "SMO: n = {n}, C = {c:.3e}, rounds = {rounds}, gap = {:.3e}",
        gap_hi - gap_lo
    );

    // Bias from free support vectors, or the violating-pair midpoint.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for i in 0..n {
        if alpha[i] > 1e-8 * c && alpha[i] < c * (1.0 - 1e-8) {
            free_sum += labels[i] - f[i];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 { free_sum / free_count as f64 } else { -(gap_lo + gap_hi) / 2.0 };

    let mut support_indices = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut sv_labels = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            support_indices.push(i);
            dual_coefs.push(alpha[i]);
            sv_labels.push(labels[i]);
        }
    }
    Ok(SvmModel { support_indices, dual_coefs, sv_labels, bias, training_size: n })
}

/// One-vs-rest multiclass wrapper. With two classes a single binary model
/// is trained (positive = class 1).
#[derive(Debug, Clone)]
pub enum MulticlassSvm {
    Binary(SvmModel),
    OneVsRest(Vec<SvmModel>),
}

impl MulticlassSvm {
    pub fn train(kernel: &ArrayView2<f64>, labels: &[usize], n_classes: usize, c: f64) -> Result<Self> {
        Self::train_warm(kernel, labels, n_classes, c, None)
    }

    /// [`MulticlassSvm::train`] warm-started per class from a model at a
    /// smaller C on the same training set.
    pub fn train_warm(
        kernel: &ArrayView2<f64>,
        labels: &[usize],
        n_classes: usize,
        c: f64,
        warm: Option<&MulticlassSvm>,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::Degenerate("need >= 2 classes".into()));
        }
        let signed = |class: usize| -> Vec<f64> {
            labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect()
        };
        if n_classes == 2 {
            let prev = match warm {
                Some(MulticlassSvm::Binary(m)) => Some(m),
                _ => None,
            };
            Ok(MulticlassSvm::Binary(svm_train_warm(kernel, &signed(1), c, prev)?))
        } else {
            let models = (0..n_classes)
                .map(|class| {
                    let prev = match warm {
                        Some(MulticlassSvm::OneVsRest(ms)) => ms.get(class),
                        _ => None,
                    };
                    svm_train_warm(kernel, &signed(class), c, prev)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MulticlassSvm::OneVsRest(models))
        }
    }

    /// Predicted class: argmax of the per-class decision values, ties going
    /// to the lowest class index.
    pub fn predict(&self, kernel_row: &[f64]) -> Result<usize> {
        match self {
            MulticlassSvm::Binary(m) => Ok(if m.decision(kernel_row)? > 0.0 { 1 } else { 0 }),
            MulticlassSvm::OneVsRest(models) => {
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for (class, m) in models.iter().enumerate() {
                    let v = m.decision(kernel_row)?;
                    if v > best_value {
                        best_value = v;
                        best = class;
                    }
                }
                Ok(best)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn block_kernel(sizes: (usize, usize)) -> (Array2<f64>, Vec<f64>) {
        let n = sizes.0 + sizes.1;
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let same = (i < sizes.0) == (j < sizes.0);
                k[[i, j]] = if same { 1.0 } else { 0.0 };
            }
        }
        let labels = (0..n).map(|i| if i < sizes.0 { 1.0 } else { -1.0 }).collect();
        (k, labels)
    }

    #[test]
    fn separable_block_kernel_fits_perfectly() {
        let (k, labels) = block_kernel((3, 4));
        let model = svm_train(&k.view(), &labels, 10.0).unwrap();
        for i in 0..7 {
            let row: Vec<f64> = (0..7).map(|j| k[[i, j]]).collect();
            assert_eq!(model.predict(&row).unwrap(), labels[i]);
        }
    }

    #[test]
    fn alphas_respect_box_and_balance() {
        let (k, labels) = block_kernel((3, 4));
        for &c in &[1e-3, 0.1, 10.0] {
            let model = svm_train(&k.view(), &labels, c).unwrap();
            let mut balance = 0.0;
            for (a, y) in model.dual_coefs.iter().zip(&model.sv_labels) {
                assert!(*a > 0.0 && *a <= c + 1e-15);
                balance += a * y;
            }
            assert!(balance.abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_two_point_problem_has_zero_decision_midway() {
        let k = array![[1.0, 0.2], [0.2, 1.0]];
        let model = svm_train(&k.view(), &[1.0, -1.0], 100.0).unwrap();
        assert!(model.bias.abs() < 1e-9);
        // The symmetric test point sees identical kernel values.
        assert!(model.decision(&[0.6, 0.6]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn xor_like_kernel_fits_at_large_c() {
        // An RBF-style kernel on the XOR corners separates any labeling.
        let pts = [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let mut k = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                k[[i, j]] = (-2.0 * d2).exp();
            }
        }
        let labels = [1.0, 1.0, -1.0, -1.0];
        let model = svm_train(&k.view(), &labels, 1e4).unwrap();
        for i in 0..4 {
            let row: Vec<f64> = (0..4).map(|j| k[[i, j]]).collect();
            assert_eq!(model.predict(&row).unwrap(), labels[i]);
        }
    }

    #[test]
    fn training_point_recovers_own_label_when_free() {
        let (k, labels) = block_kernel((4, 4));
        let model = svm_train(&k.view(), &labels, 5.0).unwrap();
        for (&idx, &a) in model.support_indices.iter().zip(&model.dual_coefs) {
            if a < 5.0 * (1.0 - 1e-8) {
                let row: Vec<f64> = (0..8).map(|j| k[[idx, j]]).collect();
                assert_eq!(model.predict(&row).unwrap(), labels[idx]);
            }
        }
    }

    #[test]
    fn zero_kernel_row_falls_back_to_bias_sign() {
        let (k, labels) = block_kernel((2, 5));
        let model = svm_train(&k.view(), &labels, 1.0).unwrap();
        let want = if model.bias < 0.0 { -1.0 } else { 1.0 };
        assert_eq!(model.predict(&vec![0.0; 7]).unwrap(), want);
    }

    #[test]
    fn single_class_is_degenerate() {
        let k = Array2::eye(3);
        assert!(matches!(
            svm_train(&k.view(), &[1.0, 1.0, 1.0], 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn decision_rejects_wrong_row_length() {
        let (k, labels) = block_kernel((2, 2));
        let model = svm_train(&k.view(), &labels, 1.0).unwrap();
        assert!(model.decision(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn multiclass_one_vs_rest_ties_take_lowest_class() {
        let k = Array2::eye(6);
        let labels = vec![0, 0, 1, 1, 2, 2];
        let m = MulticlassSvm::train(&k.view(), &labels, 3, 10.0).unwrap();
        // An all-zero row gives every class the same bias-driven value when
        // the problem is symmetric under class relabeling.
        let picked = m.predict(&vec![0.0; 6]).unwrap();
        assert_eq!(picked, 0);
    }
}
