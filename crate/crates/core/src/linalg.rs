//! Matrix aliases and the handful of dense helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn fro_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖a − b‖²_F`; panics on shape mismatch.
pub fn fro_dist_sq(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn all_finite_real(m: &RMatrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Moore–Penrose pseudo-inverse through the SVD.
///
/// Singular values below `max(rows, cols) · σ_max · f64::EPSILON` are treated
/// as zero. Returns the inverse together with the numerical rank.
pub fn pinv(m: &CMatrix) -> (CMatrix, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(cols, rows), 0);
    }
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rows.max(cols) as f64 * s_max * f64::EPSILON;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = CMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol || s == 0.0 {
            continue;
        }
        rank += 1;
        let inv = 1.0 / s;
        // out += v_i · (1/s) · u_iᴴ
        for c in 0..rows {
            let uc = u[(c, i)].conj() * inv;
            for r in 0..cols {
                out[(r, c)] += v_t[(i, r)].conj() * uc;
            }
        }
    }
    (out, rank)
}

/// Serde adapter storing a complex matrix as a dims header plus interleaved
/// `(re, im)` pairs in row-major order.
pub mod serde_cmat {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Flat {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let z = m[(r, c)];
                data.push(z.re);
                data.push(z.im);
            }
        }
        Flat { rows, cols, data }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let flat = Flat::deserialize(d)?;
        if flat.data.len() != 2 * flat.rows * flat.cols {
            return Err(D::Error::custom(format!(
                "expected {} values for a {}x{} complex matrix, found {}",
                2 * flat.rows * flat.cols,
                flat.rows,
                flat.cols,
                flat.data.len()
            )));
        }
        Ok(CMatrix::from_row_iterator(
            flat.rows,
            flat.cols,
            flat.data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])),
        ))
    }
}
