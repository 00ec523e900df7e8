//! Dense vector helpers shared by the numerical modules.

use nalgebra::DMatrix;

/// Row vector times matrix: `out[j] = Σ_i v[i] m[i, j]`.
pub fn vec_mat(v: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    debug_assert_eq!(v.len(), m.nrows());
    (0..m.ncols())
        .map(|j| m.column(j).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Matrix times column vector: `out[i] = Σ_j m[i, j] v[j]`.
pub fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(v.len(), m.ncols());
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
            *o += a * vj;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// `λ^t` for a nonnegative integer time.
pub fn powi(base: f64, t: usize) -> f64 {
    match i32::try_from(t) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(t as f64),
    }
}
