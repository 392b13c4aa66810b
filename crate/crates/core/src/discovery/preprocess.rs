use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{column_mean, Pca};

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub data: Array2<f64>,
    pub mean: Array1<f64>,
    /// Population standard deviation per input dimension (0 for constants).
    pub scale: Array1<f64>,
    pub pca: Option<Pca>,
}

/// Standardizes every dimension to zero mean and unit variance (constant
/// dimensions become zero), then projects onto the top
/// `min(threshold_dim, d)` principal components when `d > threshold_dim`.
pub fn preprocess(z: ArrayView2<'_, f64>, threshold_dim: usize) -> Result<Preprocessed> {
    let (n, d) = z.dim();
    if n < 2 {
        return Err(Error::EmptyInput(
            "preprocessing needs at least two samples",
        ));
    }
    let mean = column_mean(z);
    let centered = &z - &mean;
    let scale = centered
        .columns()
        .into_iter()
        .map(|c| (c.dot(&c) / n as f64).sqrt())
        .collect::<Array1<f64>>();
    let mut data = centered;
    for (mut col, &s) in data.columns_mut().into_iter().zip(&scale) {
        if s > 0.0 {
            col.mapv_inplace(|v| v / s);
        } else {
            col.fill(0.0);
        }
    }
    let pca = if d > threshold_dim {
        let pca = Pca::fit(data.view(), threshold_dim.min(d))?;
        data = pca.transform(data.view());
        Some(pca)
    } else {
        None
    };
    Ok(Preprocessed {
        data,
        mean,
        scale,
        pca,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    #[test]
    fn narrow_input_is_only_standardized() {
        let z = Array2::from_shape_fn((10, 32), |(i, j)| {
            (i * j) as f64 + if j == 3 { 0.0 } else { i as f64 }
        });
        let p = preprocess(z.view(), 64).unwrap();
        assert!(p.pca.is_none());
        assert_eq!(p.data.dim(), (10, 32));
        let mean = p.data.mean_axis(Axis(0)).unwrap();
        assert!(mean.iter().all(|m| m.abs() < 1e-12));
        // Column 0 is constant (i*0 + i is not; j=0 gives i) -- check a true constant.
        let zc = Array2::from_shape_fn((5, 2), |(i, j)| if j == 0 { 7.0 } else { i as f64 });
        let pc = preprocess(zc.view(), 64).unwrap();
        assert!(pc.data.column(0).iter().all(|&v| v == 0.0));
        let var1 = pc.data.column(1).mapv(|v| v * v).mean().unwrap();
        assert!((var1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_wide_data_has_one_component() {
        let dir: Vec<f64> = (0..100)
            .map(|j| ((j % 7) as f64 - 3.0) * 0.1 + 1.0)
            .collect();
        let z = Array2::from_shape_fn((30, 100), |(i, j)| (i as f64 - 4.0) * dir[j] + j as f64);
        let p = preprocess(z.view(), 64).unwrap();
        let pca = p.pca.as_ref().unwrap();
        assert_eq!(p.data.ncols(), 64);
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_sample_is_rejected() {
        assert!(preprocess(Array2::zeros((1, 3)).view(), 64).is_err());
    }
}
