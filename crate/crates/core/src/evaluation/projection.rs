use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::Pca;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `N × 2` principal component scores.
    pub coords: Array2<f64>,
    pub explained_variance: [f64; 2],
    pub explained_variance_ratio: [f64; 2],
}

/// Projects onto the top two principal components.
///
/// Each component's sign is fixed so that its largest-magnitude score
/// (first such sample on ties) is positive, which makes the output
/// invariant to negating the input.
pub fn project_2d(z: ArrayView2<'_, f64>) -> Result<Projection> {
    if z.nrows() < 3 {
        return Err(Error::InvalidArgument(format!(
            "projection needs at least 3 samples, got {}",
            z.nrows()
        )));
    }
    let pca = Pca::fit(z, 2)?;
    if pca.explained_variance.iter().all(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("projection of rank-0 data".into()));
    }
    let mut coords = Array2::zeros((z.nrows(), 2));
    let scores = pca.transform(z);
    for c in 0..scores.ncols().min(2) {
        let col = scores.column(c);
        let mut pick = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pick].abs() {
                pick = i;
            }
        }
        let sign = if col[pick] < 0.0 { -1.0 } else { 1.0 };
        coords.column_mut(c).assign(&col.mapv(|v| sign * v));
    }
    let get = |a: &ndarray::Array1<f64>, i: usize| a.get(i).copied().unwrap_or(0.0);
    Ok(Projection {
        coords,
        explained_variance: [
            get(&pca.explained_variance, 0),
            get(&pca.explained_variance, 1),
        ],
        explained_variance_ratio: [
            get(&pca.explained_variance_ratio, 0),
            get(&pca.explained_variance_ratio, 1),
        ],
    })
}

impl Projection {
    /// `x,y,truth,prediction` rows for plotting.
    pub fn to_csv(&self, truth: &[String], prediction: &[String]) -> Result<String> {
        let n = self.coords.nrows();
        if truth.len() != n || prediction.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: truth.len().min(prediction.len()),
            });
        }
        let mut out = String::from("x,y,truth,prediction\n");
        for i in 0..n {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.coords[(i, 0)],
                self.coords[(i, 1)],
                truth[i],
                prediction[i]
            );
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, truth: &[String], prediction: &[String]) -> Result<()> {
        std::fs::write(path, self.to_csv(truth, prediction)?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn plane_in_64(n: usize) -> Array2<f64> {
        let u: Vec<f64> = (0..64)
            .map(|j| ((j * 7 % 13) as f64 - 6.0) / 10.0)
            .collect();
        let v: Vec<f64> = (0..64)
            .map(|j| ((j * 5 % 11) as f64 - 5.0) / 10.0)
            .collect();
        Array2::from_shape_fn((n, 64), |(i, j)| {
            let a = (i as f64 * 0.37).sin() * 3.0;
            let b = (i as f64 * 0.91).cos();
            a * u[j] + b * v[j] + 0.5
        })
    }

    #[test]
    fn planar_data_reconstructs_exactly() {
        let z = plane_in_64(20);
        let pca = Pca::fit(z.view(), 2).unwrap();
        let back = pca.inverse_transform(pca.transform(z.view()).view());
        assert!((&back - &z).iter().all(|e| e.abs() < 1e-8));
        let p = project_2d(z.view()).unwrap();
        assert!((p.explained_variance_ratio[0] + p.explained_variance_ratio[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn negating_input_leaves_output_unchanged() {
        let z = plane_in_64(15);
        let a = project_2d(z.view()).unwrap();
        let b = project_2d((-&z).view()).unwrap();
        assert!((&a.coords - &b.coords).iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(project_2d(Array2::zeros((2, 3)).view()).is_err());
        assert!(project_2d(Array2::from_elem((5, 3), 2.0).view()).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let z = plane_in_64(4);
        let p = project_2d(z.view()).unwrap();
        let names: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let csv = p.to_csv(&names, &names).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("x,y,truth,prediction\n"));
    }
}
