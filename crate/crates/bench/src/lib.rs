//! Fixtures shared by the benchmarks.

use newton_anderson::DenseMatrix;

/// Diagonally dominant `n × n` matrix with a deterministic fill.
pub fn dominant_matrix(n: usize) -> DenseMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { n as f64 } else { ((i * 31 + j * 17) % 13) as f64 / 13.0 })
                .collect()
        })
        .collect();
    DenseMatrix::from_rows(&rows)
}

/// Tall `rows × cols` matrix stored by columns, as least-squares input.
pub fn tall_columns(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..cols)
        .map(|j| (0..rows).map(|i| ((i + 1) as f64 * (j + 2) as f64).sin()).collect())
        .collect()
}
