//! Shared numerical routines: symmetric eigendecomposition, Nystrom
//! feature fitting, and kernel PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use ndarray::parallel::prelude::*;

use crate::error::{Error, Result};

/// Relative eigenvalue threshold below which Nystrom components are dropped.
const NYSTROM_CLIP: f64 = 1e-10;

/// Spectral decomposition of a symmetric matrix, eigenvalues descending and
/// eigenvectors as orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

fn max_abs(a: &ArrayView2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Largest absolute entry of `A - A^T`.
pub fn symmetry_error(a: &ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Full eigendecomposition of a symmetric matrix. The input must be
/// symmetric within `1e-9` relative to its largest entry; it is
/// symmetrized before factoring so the result is exactly orthogonal.
pub fn sym_eig(a: &ArrayView2<f64>) -> Result<EigenResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Contract(format!("sym_eig needs a square matrix, got {n}x{}", a.ncols())));
    }
    let tol = 1e-9 * max_abs(a).max(1.0);
    if symmetry_error(a) > tol {
        return Err(Error::Contract(format!(
            "sym_eig input asymmetric beyond tolerance ({:.3e} > {:.3e})",
            symmetry_error(a),
            tol
        )));
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].partial_cmp(&eig.eigenvalues[p]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, col]] = eig.eigenvectors[(row, src)];
        }
    }
    Ok(EigenResult { eigenvalues, eigenvectors })
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn eigenvalue_extrema(a: &ArrayView2<f64>) -> Result<(f64, f64)> {
    let eig = sym_eig(a)?;
    Ok((*eig.eigenvalues.last().unwrap(), eig.eigenvalues[0]))
}

/// Fits Nystrom features from precomputed blocks: `c` holds the kernel
/// between all points and the m landmarks, `w` the landmark block. Returns
/// an n x m feature matrix whose row dot products approximate the kernel;
/// components with eigenvalues below `1e-10 * lambda_max` are dropped
/// (their feature columns are zero, keeping the m-column shape).
pub fn nystrom_fit_from_blocks(c: &ArrayView2<f64>, w: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let m = w.nrows();
    if w.ncols() != m || c.ncols() != m {
        return Err(Error::Contract(format!(
            "nystrom blocks disagree: C is {}x{}, W is {}x{}",
            c.nrows(),
            c.ncols(),
            m,
            w.ncols()
        )));
    }
    // (W + W^T)/2 is exactly symmetric, so sym_eig cannot reject it.
    let ws = (w.to_owned() + w.t()) * 0.5;
    let eig = sym_eig(&ws.view())?;
    let lambda_max = eig.eigenvalues[0];
    if !(lambda_max > 0.0) {
        return Err(Error::Degenerate("landmark kernel block has no positive eigenvalue".into()));
    }
    let cut = NYSTROM_CLIP * lambda_max;
    let mut scaled = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > cut { lambda.powf(-0.5) } else { 0.0 };
        scaled.column_mut(j).mapv_inplace(|x| x * s);
    }
    Ok(c.dot(&scaled))
}

/// Fits Nystrom features by evaluating the kernel between every point and
/// the landmarks. `eval(i, l)` gives the kernel value between point `i` and
/// landmark `l`, both addressed by their ids.
pub fn nystrom_fit<F>(eval: F, all_ids: &[usize], landmark_ids: &[usize]) -> Result<Array2<f64>>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let m = landmark_ids.len();
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one landmark".into()));
    }
    let mut c = Array2::zeros((all_ids.len(), m));
    c.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, &l) in landmark_ids.iter().enumerate() {
                row[j] = eval(all_ids[i], l);
            }
        });
    let mut w = Array2::zeros((m, m));
    for p in 0..m {
        for q in p..m {
            let v = eval(landmark_ids[p], landmark_ids[q]);
            w[[p, q]] = v;
            w[[q, p]] = v;
        }
    }
    nystrom_fit_from_blocks(&c.view(), &w.view())
}

/// Kernel PCA with double centering (standard). See [`kernel_pca_with`]
/// for the uncentered projection.
pub fn kernel_pca(k: &ArrayView2<f64>, dims: usize) -> Result<Array2<f64>> {
    kernel_pca_with(k, dims, true)
}

/// Projects the points of a kernel matrix to `dims` coordinates via the top
/// eigenpairs, coordinates scaled by sqrt(eigenvalue). Negative eigenvalues
/// among the top `dims` are clipped to zero with a warning.
pub fn kernel_pca_with(k: &ArrayView2<f64>, dims: usize, center: bool) -> Result<Array2<f64>> {
    let n = k.nrows();
    if dims < 1 {
        return Err(Error::InvalidParameter("kernel PCA needs dims >= 1".into()));
    }
    if dims > n {
        return Err(Error::InvalidParameter(format!("dims {dims} exceeds matrix size {n}")));
    }
    let centered = if center { double_center(k) } else { k.to_owned() };
    let eig = sym_eig(&centered.view())?;
    let mut coords = Array2::zeros((n, dims));
    for d in 0..dims {
        let lambda = eig.eigenvalues[d];
        let scale = if lambda > 0.0 {
            lambda.sqrt()
        } else {
            if lambda < 0.0 {
                log::warn!("kernel PCA: clipping negative eigenvalue {lambda:.3e} in dimension {d}");
            }
            0.0
        };
        for i in 0..n {
            coords[[i, d]] = eig.eigenvectors[[i, d]] * scale;
        }
    }
    Ok(coords)
}

/// K - row means - column means + grand mean.
fn double_center(k: &ArrayView2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let row_mean: Vec<f64> = k.axis_iter(Axis(0)).map(|r| r.sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = k[[i, j]] - row_mean[i] - row_mean[j] + grand;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn reconstruct(eig: &EigenResult) -> Array2<f64> {
        let n = eig.eigenvalues.len();
        let mut lam = Array2::zeros((n, n));
        for i in 0..n {
            lam[[i, i]] = eig.eigenvalues[i];
        }
        eig.eigenvectors.dot(&lam).dot(&eig.eigenvectors.t())
    }

    #[test]
    fn eig_identity() {
        let eig = sym_eig(&Array2::eye(3).view()).unwrap();
        for &l in &eig.eigenvalues {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_diagonal() {
        let a = array![[2.0, 0.0], [0.0, 0.0]];
        let eig = sym_eig(&a.view()).unwrap();
        assert!((eig.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(eig.eigenvalues[1].abs() < 1e-12);
        assert!((eig.eigenvectors[[0, 0]].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eig_two_by_two_by_hand() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = sym_eig(&a.view()).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        let a = array![
            [4.0, 1.0, -2.0, 0.5],
            [1.0, 3.0, 0.0, 1.5],
            [-2.0, 0.0, 5.0, 1.0],
            [0.5, 1.5, 1.0, 2.0]
        ];
        let eig = sym_eig(&a.view()).unwrap();
        let rec = reconstruct(&eig);
        let num: f64 = (&rec - &a).iter().map(|x| x * x).sum::<f64>();
        let den: f64 = a.iter().map(|x| x * x).sum::<f64>();
        assert!(num.sqrt() <= 1e-8 * den.sqrt());
        let gram = eig.eigenvectors.t().dot(&eig.eigenvectors);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(sym_eig(&a.view()).is_err());
    }

    #[test]
    fn nystrom_full_rank_is_exact() {
        // Rank-3 PSD kernel from explicit points.
        let pts = [[1.0, 0.0, 2.0], [0.5, 1.0, 0.0], [2.0, 1.0, 1.0], [0.0, 3.0, 1.0], [1.0, 1.0, 1.0]];
        let dot = |i: usize, j: usize| -> f64 { pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum() };
        let all: Vec<usize> = (0..5).collect();
        let phi = nystrom_fit(dot, &all, &all).unwrap();
        let approx = phi.dot(&phi.t());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                num += (approx[[i, j]] - dot(i, j)).powi(2);
                den += dot(i, j).powi(2);
            }
        }
        assert!(num.sqrt() <= 1e-6 * den.sqrt());
    }

    #[test]
    fn nystrom_rank_one_single_landmark_is_exact() {
        let xs = [2.0, -1.0, 0.5, 3.0, 1.0];
        let k = |i: usize, j: usize| xs[i] * xs[j];
        let all: Vec<usize> = (0..5).collect();
        let phi = nystrom_fit(k, &all, &[3]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let approx: f64 = phi.row(i).dot(&phi.row(j));
                assert!((approx - k(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nystrom_identity_block_gives_orthonormal_landmark_rows() {
        let k = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let all: Vec<usize> = (0..4).collect();
        let phi = nystrom_fit(k, &all, &[0, 1, 2, 3]).unwrap();
        let gram = phi.dot(&phi.t());
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nystrom_rejects_zero_kernel() {
        let all: Vec<usize> = (0..3).collect();
        assert!(matches!(
            nystrom_fit(|_, _| 0.0, &all, &[0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn kernel_pca_constant_matrix_collapses() {
        let k = Array2::from_elem((4, 4), 3.5);
        let coords = kernel_pca(&k.view(), 2).unwrap();
        for &c in coords.iter() {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_pca_coordinates_have_zero_mean() {
        let pts = [[1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [1.0, 1.0]];
        let mut k = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                k[[i, j]] = pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum();
            }
        }
        let coords = kernel_pca(&k.view(), 2).unwrap();
        for d in 0..2 {
            let mean = coords.column(d).sum() / 4.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_pca_rejects_bad_dims() {
        let k = Array2::eye(3);
        assert!(kernel_pca(&k.view(), 0).is_err());
        assert!(kernel_pca(&k.view(), 4).is_err());
    }

    #[test]
    fn kernel_pca_matches_best_rank_d_approximation() {
        // Eckart-Young: the coordinate Gram must beat other low-rank factors.
        let pts = [[1.0, 0.0, 0.5], [0.0, 2.0, 1.0], [3.0, 1.0, 0.0], [1.0, 1.0, 2.0], [0.5, 0.5, 0.5]];
        let n = pts.len();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                k[[i, j]] = pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum();
            }
        }
        let centered = double_center(&k.view());
        let coords = kernel_pca(&k.view(), 2).unwrap();
        let residual = |f: &Array2<f64>| -> f64 {
            let approx = f.dot(&f.t());
            (&centered - &approx).iter().map(|x| x * x).sum::<f64>()
        };
        let pca_res = residual(&coords);
        // A handful of alternative rank-2 factors sampled from the data rows.
        for shift in 1..4 {
            let mut alt = coords.clone();
            for i in 0..n {
                alt[[i, 0]] = centered[[i, shift % n]];
                alt[[i, 1]] = centered[[(i + shift) % n, 0]];
            }
            assert!(pca_res <= residual(&alt) + 1e-9);
        }
    }
}
