//! Two-dimensional PCA layout for the scatter view.

use cobra_core::Dataset;
use nalgebra::{DMatrix, SymmetricEigen};

/// Projects every instance onto the top two principal components.
///
/// Each component's sign is chosen so its largest-magnitude loading is
/// positive. With a single feature the second coordinate is 0.
pub fn project_2d(data: &Dataset) -> Vec<[f64; 2]> {
    let (n, m) = (data.len(), data.dim());
    if n == 0 {
        return Vec::new();
    }
    let mut centred = DMatrix::from_row_iterator(n, m, data.rows().flatten().copied());
    for j in 0..m {
        let mean = centred.column(j).mean();
        centred.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = centred.transpose() * &centred / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut coords = vec![[0.0; 2]; n];
    for (slot, &k) in order.iter().take(2).enumerate() {
        let mut axis = eig.eigenvectors.column(k).into_owned();
        let pivot = axis.iamax();
        if axis[pivot] < 0.0 {
            axis.neg_mut();
        }
        let scores = &centred * axis;
        for (c, s) in coords.iter_mut().zip(scores.iter()) {
            c[slot] = *s;
        }
    }
    coords
}
