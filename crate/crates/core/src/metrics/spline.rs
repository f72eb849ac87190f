//! Least-squares cubic B-spline fit of pooled boundary points.
//!
//! Points are expressed in their own principal axes, ordered by the first
//! coordinate and the remaining two coordinates are regressed on it with a
//! clamped uniform cubic basis. Residuals are Euclidean distances to the curve.

use nalgebra::{DMatrix, DVector};

use super::MetricsError;
use crate::frames::pca_axes;
use crate::geometry::Vec3;

pub const DEFAULT_KNOTS: usize = 10;

/// Robust scale factor turning a median absolute deviation into a sigma.
const MAD_SCALE: f64 = 1.4826;
const OUTLIER_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub rmse: f64,
    pub outliers_removed: usize,
    /// Points of the fitted curve in the input frame, for plotting.
    pub curve: Vec<Vec3>,
}

struct Basis {
    knots: Vec<f64>,
    count: usize,
}

impl Basis {
    fn clamped(lo: f64, hi: f64, breakpoints: usize) -> Self {
        let mut knots = vec![lo; 3];
        for k in 0..breakpoints {
            knots.push(lo + (hi - lo) * k as f64 / (breakpoints - 1) as f64);
        }
        knots.extend([hi; 3]);
        Self {
            count: breakpoints + 2,
            knots,
        }
    }

    /// Cox–de Boor evaluation of all basis functions at `t`.
    fn eval(&self, t: f64) -> Vec<f64> {
        let k = &self.knots;
        let last = k.len() - 1;
        let t = t.clamp(k[0], k[last]);
        // Span index with k[span] <= t < k[span + 1], using the last real span at the right end.
        let mut span = 3;
        while span + 1 < last - 3 && t >= k[span + 1] {
            span += 1;
        }
        let mut n = vec![0.0; k.len() - 1];
        n[span] = 1.0;
        for d in 1..=3 {
            for i in span.saturating_sub(d)..=span {
                let left = if k[i + d] > k[i] {
                    (t - k[i]) / (k[i + d] - k[i]) * n[i]
                } else {
                    0.0
                };
                let right = if k[i + d + 1] > k[i + 1] {
                    (k[i + d + 1] - t) / (k[i + d + 1] - k[i + 1]) * n[i + 1]
                } else {
                    0.0
                };
                n[i] = left + right;
            }
        }
        n.truncate(self.count);
        n
    }
}

struct Fitted {
    basis: Basis,
    coef_v: DVector<f64>,
    coef_w: DVector<f64>,
}

impl Fitted {
    fn at(&self, u: f64) -> (f64, f64) {
        let b = DVector::from_vec(self.basis.eval(u));
        (b.dot(&self.coef_v), b.dot(&self.coef_w))
    }
}

fn fit(local: &[[f64; 3]], breakpoints: usize, lo: f64, hi: f64) -> Fitted {
    let basis = Basis::clamped(lo, hi, breakpoints);
    let rows: Vec<Vec<f64>> = local.iter().map(|p| basis.eval(p[0])).collect();
    let a = DMatrix::from_fn(local.len(), basis.count, |i, j| rows[i][j]);
    let v = DVector::from_iterator(local.len(), local.iter().map(|p| p[1]));
    let w = DVector::from_iterator(local.len(), local.iter().map(|p| p[2]));
    let svd = a.svd(true, true);
    let coef_v = svd.solve(&v, 1e-10).expect("svd solve");
    let coef_w = svd.solve(&w, 1e-10).expect("svd solve");
    Fitted {
        basis,
        coef_v,
        coef_w,
    }
}

fn residuals(local: &[[f64; 3]], f: &Fitted) -> Vec<f64> {
    local
        .iter()
        .map(|p| {
            let (v, w) = f.at(p[0]);
            ((p[1] - v).powi(2) + (p[2] - w).powi(2)).sqrt()
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|r| r * r).sum::<f64>() / values.len() as f64).sqrt()
}

/// RMSE of pooled boundary samples about a least-squares cubic spline with
/// `breakpoints` knots, after one outlier-rejection pass.
pub fn spline_rmse_with(samples: &[Vec<Vec3>], breakpoints: usize) -> Result<SplineFit, MetricsError> {
    let pooled: Vec<Vec3> = samples.iter().flatten().copied().collect();
    if pooled.len() < 4 {
        return Err(MetricsError::TooFewPoints {
            needed: 4,
            got: pooled.len(),
        });
    }
    let Ok(pca) = pca_axes(&pooled) else {
        // Collinear or repeated points lie exactly on a (straight) curve.
        return Ok(SplineFit {
            rmse: 0.0,
            outliers_removed: 0,
            curve: pooled,
        });
    };
    let mut local: Vec<[f64; 3]> = pooled
        .iter()
        .map(|p| {
            let d = p - pca.centroid;
            [d.dot(&pca.axes[0]), d.dot(&pca.axes[1]), d.dot(&pca.axes[2])]
        })
        .collect();
    local.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let lo = local[0][0];
    let hi = local[local.len() - 1][0];
    let breakpoints = breakpoints.clamp(2, (local.len() - 2).max(2));

    let first = fit(&local, breakpoints, lo, hi);
    let r = residuals(&local, &first);
    let med = median(&mut r.clone());
    let mad = median(&mut r.iter().map(|x| (x - med).abs()).collect::<Vec<_>>());
    let cut = OUTLIER_SIGMAS * MAD_SCALE * mad;
    let kept: Vec<[f64; 3]> = local
        .iter()
        .zip(&r)
        .filter(|(_, &ri)| (ri - med).abs() <= cut || mad == 0.0)
        .map(|(p, _)| *p)
        .collect();
    let outliers_removed = local.len() - kept.len();
    let (final_fit, final_res) = if outliers_removed > 0 && kept.len() >= 4 {
        let f = fit(&kept, breakpoints.min((kept.len() - 2).max(2)), lo, hi);
        let res = residuals(&kept, &f);
        (f, res)
    } else {
        (first, r)
    };

    let curve = (0..=100)
        .map(|i| {
            let u = lo + (hi - lo) * i as f64 / 100.0;
            let (v, w) = final_fit.at(u);
            pca.centroid + pca.axes[0] * u + pca.axes[1] * v + pca.axes[2] * w
        })
        .collect();
    Ok(SplineFit {
        rmse: rms(&final_res),
        outliers_removed,
        curve,
    })
}

pub fn spline_rmse(samples: &[Vec<Vec3>]) -> Result<SplineFit, MetricsError> {
    spline_rmse_with(samples, DEFAULT_KNOTS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_a_partition_of_unity() {
        let b = Basis::clamped(-2.0, 3.0, 10);
        for i in 0..=50 {
            let t = -2.0 + 5.0 * i as f64 / 50.0;
            let s: f64 = b.eval(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "t={t} sum={s}");
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![Vec3::zeros(), Vec3::x(), Vec3::y()]];
        assert_eq!(
            spline_rmse(&pts),
            Err(MetricsError::TooFewPoints { needed: 4, got: 3 })
        );
    }

    #[test]
    fn straight_line_has_zero_rmse() {
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert_eq!(spline_rmse(&[pts]).unwrap().rmse, 0.0);
    }
}
