//! Joint centering and PCA projection of a primary/secondary dataset pair.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::embedding_io::{write_fvec, EmbeddingError, FeatureMatrix};

/// Component count used when the caller does not choose one.
pub const DEFAULT_COMPONENTS: usize = 25;

/// Relative cutoff below which a singular value counts as zero for `rank`.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("feature widths differ: primary has {primary}, secondary has {secondary}")]
    DimensionMismatch { primary: usize, secondary: usize },
    #[error("requested {requested} components but at most {max} are available")]
    TooManyComponents { requested: usize, max: usize },
    #[error("component count must be at least 1")]
    ZeroComponents,
    #[error("SVD did not converge")]
    SvdFailed,
}

impl ProjectionError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::TooManyComponents { .. } => "TooManyComponents",
            Self::ZeroComponents => "ZeroComponents",
            Self::SvdFailed => "SvdFailed",
        }
    }
}

/// Rows of primary then secondary, each minus the joint column mean.
#[derive(Debug, Clone)]
pub struct Centered {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub primary_rows: usize,
}

pub fn center_concat(primary: &FeatureMatrix, secondary: &FeatureMatrix) -> Result<Centered, ProjectionError> {
    let (n, m) = (primary.rows(), secondary.rows());
    let q = primary.cols();
    if secondary.cols() != q {
        return Err(ProjectionError::DimensionMismatch { primary: q, secondary: secondary.cols() });
    }
    let total = n + m;
    let mut stacked = DMatrix::zeros(total, q);
    stacked.rows_mut(0, n).copy_from(primary.values());
    stacked.rows_mut(n, m).copy_from(secondary.values());

    let mut mean = DVector::zeros(q);
    for j in 0..q {
        let sum: f64 = stacked.column(j).iter().sum();
        mean[j] = sum / total as f64;
    }
    for j in 0..q {
        let mu = mean[j];
        stacked.column_mut(j).iter_mut().for_each(|x| *x -= mu);
    }
    Ok(Centered { matrix: stacked, mean, primary_rows: n })
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Joint column mean used for centering (length q).
    pub mean: DVector<f64>,
    /// q×z, orthonormal columns ordered by singular value, descending.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Squared singular values divided by (rows − 1).
    pub explained_variance: Vec<f64>,
    pub projected_primary: DMatrix<f64>,
    pub projected_secondary: DMatrix<f64>,
    /// Number of singular values above `RANK_TOLERANCE` times the largest.
    pub rank: usize,
}

impl ProjectionResult {
    pub fn z(&self) -> usize {
        self.components.ncols()
    }

    /// Caches the numeric parts as three FVEC1 files in `dir`.
    pub fn save_fvec(&self, dir: impl AsRef<Path>, primary_ids: &[String], secondary_ids: &[String]) -> Result<(), EmbeddingError> {
        let dir = dir.as_ref();
        let comp_ids = (0..self.components.nrows()).map(|i| format!("dim{i}")).collect();
        write_fvec(&FeatureMatrix::new("components", comp_ids, self.components.clone())?, dir.join("components.fv"))?;
        write_fvec(
            &FeatureMatrix::new("projected_primary", primary_ids.to_vec(), self.projected_primary.clone())?,
            dir.join("projected_primary.fv"),
        )?;
        write_fvec(
            &FeatureMatrix::new("projected_secondary", secondary_ids.to_vec(), self.projected_secondary.clone())?,
            dir.join("projected_secondary.fv"),
        )?;
        Ok(())
    }
}

/// Flips each column so its largest-magnitude entry is positive (first one on ties).
fn fix_signs(components: &mut DMatrix<f64>) {
    for mut col in components.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Top-`z` principal components of an already centered matrix.
///
/// Returns the components, singular values, explained variances, the full
/// projection `A·V_z` (all rows), and the numerical rank.
pub fn fit_components(
    centered: &DMatrix<f64>,
    z: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>, DMatrix<f64>, usize), ProjectionError> {
    let (rows, q) = centered.shape();
    let max = rows.min(q);
    if z == 0 {
        return Err(ProjectionError::ZeroComponents);
    }
    if z > max {
        return Err(ProjectionError::TooManyComponents { requested: z, max });
    }

    let svd = nalgebra::linalg::SVD::try_new(centered.clone(), false, true, f64::EPSILON, 0)
        .ok_or(ProjectionError::SvdFailed)?;
    let v_t = svd.v_t.as_ref().ok_or(ProjectionError::SvdFailed)?;
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut components = DMatrix::zeros(q, z);
    for (k, &idx) in order.iter().take(z).enumerate() {
        components.set_column(k, &v_t.row(idx).transpose());
    }
    fix_signs(&mut components);

    let singular: Vec<f64> = order.iter().take(z).map(|&i| sv[i]).collect();
    let divisor = rows.saturating_sub(1).max(1) as f64;
    let variance = singular.iter().map(|s| s * s / divisor).collect();

    let largest = order.first().map_or(0.0, |&i| sv[i]);
    let rank = if largest > 0.0 {
        sv.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count()
    } else {
        0
    };

    let projected = centered * &components;
    Ok((components, singular, variance, projected, rank))
}

/// Projects a centered stack and splits it back into primary and secondary parts.
pub fn fit_pca(centered: &Centered, z: usize) -> Result<ProjectionResult, ProjectionError> {
    let (components, singular_values, explained_variance, projected, rank) = fit_components(&centered.matrix, z)?;
    let n = centered.primary_rows;
    let m = projected.nrows() - n;
    Ok(ProjectionResult {
        mean: centered.mean.clone(),
        components,
        singular_values,
        explained_variance,
        projected_primary: projected.rows(0, n).into_owned(),
        projected_secondary: projected.rows(n, m).into_owned(),
        rank,
    })
}

/// `center_concat` followed by `fit_pca`; `z` defaults to 25.
pub fn project_pair(
    primary: &FeatureMatrix,
    secondary: &FeatureMatrix,
    z: Option<usize>,
) -> Result<ProjectionResult, ProjectionError> {
    let centered = center_concat(primary, secondary)?;
    fit_pca(&centered, z.unwrap_or(DEFAULT_COMPONENTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows("t", rows).unwrap()
    }

    #[test]
    fn two_point_centering() {
        let c = center_concat(&fm(&[vec![2.0]]), &fm(&[vec![4.0]])).unwrap();
        assert_eq!(c.mean.as_slice(), &[3.0]);
        assert_eq!(c.matrix.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn identical_rows_center_to_zero() {
        let c = center_concat(&fm(&[vec![1.0, 1.0]]), &fm(&[vec![1.0, 1.0]])).unwrap();
        assert!(c.matrix.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn centering_worked_example() {
        let p = fm(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]);
        let s = fm(&[vec![2.0, 4.0]]);
        let c = center_concat(&p, &s).unwrap();
        assert_eq!(c.mean.as_slice(), &[2.0, 1.0]);
        let expected = [[-2.0, -1.0], [0.0, -1.0], [2.0, -1.0], [0.0, 3.0]];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(c.matrix[(i, 0)], row[0]);
            assert_eq!(c.matrix[(i, 1)], row[1]);
        }
    }

    #[test]
    fn width_mismatch() {
        let r = center_concat(&fm(&[vec![1.0]]), &fm(&[vec![1.0, 2.0]]));
        assert!(matches!(r, Err(ProjectionError::DimensionMismatch { primary: 1, secondary: 2 })));
    }

    #[test]
    fn one_axis_projection() {
        let centered = Centered {
            matrix: DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]),
            mean: DVector::zeros(2),
            primary_rows: 1,
        };
        let r = fit_pca(&centered, 1).unwrap();
        // sign convention: component (1, 0)
        assert_relative_eq!(r.components[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.projected_primary[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.projected_secondary[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.explained_variance[0], 2.0, epsilon = 1e-12);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn one_dimensional_pair() {
        let r = project_pair(&fm(&[vec![0.0], vec![2.0]]), &fm(&[vec![4.0]]), Some(1)).unwrap();
        assert_relative_eq!(r.projected_primary[(0, 0)], -2.0, epsilon = 1e-12);
        assert_relative_eq!(r.projected_primary[(1, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.projected_secondary[(0, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_input_gives_zero_variance() {
        let p = fm(&[vec![3.0, 1.0], vec![3.0, 1.0]]);
        let r = project_pair(&p, &p.clone(), Some(2)).unwrap();
        assert!(r.explained_variance.iter().all(|&v| v == 0.0));
        assert!(r.projected_primary.iter().all(|&v| v == 0.0));
        assert_eq!(r.rank, 0);
    }

    #[test]
    fn component_limits() {
        let p = fm(&[vec![0.0, 1.0, 2.0]]);
        let s = fm(&[vec![1.0, 0.0, 5.0]]);
        assert!(matches!(
            project_pair(&p, &s, Some(3)),
            Err(ProjectionError::TooManyComponents { requested: 3, max: 2 })
        ));
        assert!(matches!(project_pair(&p, &s, Some(0)), Err(ProjectionError::ZeroComponents)));
        assert!(matches!(
            project_pair(&p, &s, None),
            Err(ProjectionError::TooManyComponents { requested: 25, .. })
        ));
    }

    #[test]
    fn sign_fix_prefers_first_of_ties() {
        let mut c = DMatrix::from_column_slice(3, 1, &[-0.5, 0.5, 0.1]);
        fix_signs(&mut c);
        assert_eq!(c.as_slice(), &[0.5, -0.5, -0.1]);
    }
}
