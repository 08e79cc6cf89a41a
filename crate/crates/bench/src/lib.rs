//! Synthetic inputs shared by the benchmarks and the large-input tests.

use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Standard normal matrix, drawn in row-major order (the CSV writer's order).
pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Writes a feature-by-case CSV (`feature,c1,…` header, one row per feature)
/// without holding the matrix in memory.
pub fn write_gaussian_csv(path: &Path, rows: usize, cols: usize, seed: u64) -> io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "feature")?;
    for j in 1..=cols {
        write!(w, ",c{j}")?;
    }
    writeln!(w)?;
    for i in 1..=rows {
        write!(w, "f{i}")?;
        for _ in 0..cols {
            let x: f64 = StandardNormal.sample(&mut rng);
            write!(w, ",{x:.6}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}
