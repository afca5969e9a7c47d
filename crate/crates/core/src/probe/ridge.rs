use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

const CHUNK_ROWS: usize = 1024;

/// One-vs-rest ridge regression on ±1 targets, one weight column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub alpha: f64,
    pub dim: usize,
    pub n_classes: usize,
    /// Class-major: `weights[c * dim..(c + 1) * dim]`.
    pub weights: Vec<f64>,
    pub intercept: Vec<f64>,
}

impl RidgeFit {
    pub fn class_weights(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn scores(&self, row: &[f32]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let w = self.class_weights(c);
                let dot: f64 = row.iter().zip(w).map(|(&x, &w)| x as f64 * w).sum();
                dot + self.intercept[c]
            })
            .collect()
    }

    /// Argmax of the class scores, ties to the lower class index.
    pub fn predict_row(&self, row: &[f32]) -> usize {
        let s = self.scores(row);
        let mut best = 0;
        for c in 1..s.len() {
            if s[c] > s[best] {
                best = c;
            }
        }
        best
    }

    fn from_columns(alpha: f64, w: &DMatrix<f64>, intercept: Vec<f64>) -> Self {
        let (dim, k) = w.shape();
        let mut weights = Vec::with_capacity(dim * k);
        for c in 0..k {
            weights.extend(w.column(c).iter());
        }
        RidgeFit {
            alpha,
            dim,
            n_classes: k,
            weights,
            intercept,
        }
    }
}

pub fn predict(fit: &RidgeFit, x: &FeatureMatrix, rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&i| fit.predict_row(x.row(i))).collect()
}

fn targets(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| {
        if labels[i] == c {
            1.0
        } else {
            -1.0
        }
    })
}

fn design(x: &FeatureMatrix, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.cols(), |i, j| x.row(rows[i])[j] as f64)
}

/// Sufficient statistics of a primal ridge fit. Fold statistics are
/// obtained by subtracting the held-out part from the full train side.
#[derive(Debug, Clone)]
pub struct GramStats {
    n: usize,
    xtx: DMatrix<f64>,
    xty: DMatrix<f64>,
    sum_x: DVector<f64>,
    sum_y: DVector<f64>,
}

impl GramStats {
    pub fn new(dim: usize, n_classes: usize) -> Self {
        GramStats {
            n: 0,
            xtx: DMatrix::zeros(dim, dim),
            xty: DMatrix::zeros(dim, n_classes),
            sum_x: DVector::zeros(dim),
            sum_y: DVector::zeros(n_classes),
        }
    }

    /// `labels[i]` belongs to `x.row(rows[i])`. Chunks are summed in order.
    pub fn accumulate(x: &FeatureMatrix, rows: &[usize], labels: &[usize], n_classes: usize) -> Self {
        let mut g = GramStats::new(x.cols(), n_classes);
        for (r, l) in rows.chunks(CHUNK_ROWS).zip(labels.chunks(CHUNK_ROWS)) {
            let xc = design(x, r);
            let yc = targets(l, n_classes);
            g.xtx.gemm_tr(1.0, &xc, &xc, 1.0);
            g.xty.gemm_tr(1.0, &xc, &yc, 1.0);
            g.sum_x += xc.row_sum().transpose();
            g.sum_y += yc.row_sum().transpose();
            g.n += r.len();
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sub(&self, other: &GramStats) -> GramStats {
        GramStats {
            n: self.n - other.n,
            xtx: &self.xtx - &other.xtx,
            xty: &self.xty - &other.xty,
            sum_x: &self.sum_x - &other.sum_x,
            sum_y: &self.sum_y - &other.sum_y,
        }
    }

    /// One fit per α from a single eigendecomposition.
    pub fn solve(&self, alphas: &[f64], center: bool) -> Result<Vec<RidgeFit>> {
        if self.n == 0 {
            return Err(Error::Probe("ridge fit on zero rows".into()));
        }
        let n = self.n as f64;
        let (c, b, mu, ybar) = if center {
            let mu = &self.sum_x / n;
            let ybar = &self.sum_y / n;
            let c = &self.xtx - (&mu * mu.transpose()) * n;
            let b = &self.xty - (&mu * ybar.transpose()) * n;
            (c, b, Some(mu), Some(ybar))
        } else {
            (self.xtx.clone(), self.xty.clone(), None, None)
        };
        let eig = SymmetricEigen::new(c);
        let q = eig.eigenvectors.tr_mul(&b);
        alphas
            .iter()
            .map(|&alpha| {
                check_alpha(alpha)?;
                let mut scaled = q.clone();
                for (i, mut row) in scaled.row_iter_mut().enumerate() {
                    row /= eig.eigenvalues[i].max(0.0) + alpha;
                }
                let w = &eig.eigenvectors * scaled;
                Ok(finish(alpha, w, mu.as_ref(), ybar.as_ref()))
            })
            .collect()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Probe(format!("ridge alpha {alpha} must be positive")))
    }
}

fn finish(alpha: f64, w: DMatrix<f64>, mu: Option<&DVector<f64>>, ybar: Option<&DVector<f64>>) -> RidgeFit {
    let intercept = match (mu, ybar) {
        (Some(mu), Some(ybar)) => (ybar - w.tr_mul(mu)).iter().copied().collect(),
        _ => vec![0.0; w.ncols()],
    };
    RidgeFit::from_columns(alpha, &w, intercept)
}

/// Kernel form `Xᵀ(XXᵀ + αI)⁻¹Y`, cheaper when rows < dims.
fn solve_dual(
    x: &FeatureMatrix,
    rows: &[usize],
    labels: &[usize],
    n_classes: usize,
    alphas: &[f64],
    center: bool,
) -> Result<Vec<RidgeFit>> {
    let mut xm = design(x, rows);
    let mut y = targets(labels, n_classes);
    let n = rows.len() as f64;
    let (mu, ybar) = if center {
        let mu = xm.row_mean();
        let ybar = y.row_mean();
        for mut r in xm.row_iter_mut() {
            r -= &mu;
        }
        for mut r in y.row_iter_mut() {
            r -= &ybar;
        }
        (Some(mu.transpose()), Some(ybar.transpose()))
    } else {
        (None, None)
    };
    debug_assert!(n > 0.0);
    let k = &xm * xm.transpose();
    let eig = SymmetricEigen::new(k);
    let q = eig.eigenvectors.tr_mul(&y);
    alphas
        .iter()
        .map(|&alpha| {
            check_alpha(alpha)?;
            let mut scaled = q.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row /= eig.eigenvalues[i].max(0.0) + alpha;
            }
            let a = &eig.eigenvectors * scaled;
            let w = xm.tr_mul(&a);
            Ok(finish(alpha, w, mu.as_ref(), ybar.as_ref()))
        })
        .collect()
}

/// Fits every α in `alphas` on `x.row(rows[i])` with class `labels[i]`.
/// With `center`, the train mean is removed and an intercept restored.
pub fn fit_ridge(
    x: &FeatureMatrix,
    rows: &[usize],
    labels: &[usize],
    n_classes: usize,
    alphas: &[f64],
    center: bool,
) -> Result<Vec<RidgeFit>> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            what: "ridge labels",
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Probe("ridge fit on zero rows".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Probe(format!("label {bad} outside {n_classes} classes")));
    }
    if rows.len() < x.cols() {
        solve_dual(x, rows, labels, n_classes, alphas, center)
    } else {
        GramStats::accumulate(x, rows, labels, n_classes).solve(alphas, center)
    }
}
