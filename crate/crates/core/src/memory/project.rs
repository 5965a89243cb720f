//! Projection from feature space into memory space: a two-layer MLP with a
//! SiLU between, followed by separate affine key/value maps, plus the affine
//! query map applied directly to raw features.
//!
//! All weights are explicit matrices — nothing is learned at runtime — so a
//! parameter set fully determines the projection. Row-vector convention
//! throughout: `y = x · Wᵀ + b` with `W` shaped `out × in`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;
use crate::synthetic::SyntheticRng;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("{name} has shape {found_rows}×{found_cols}, expected {want_rows}×{want_cols}")]
    BadWeight {
        name: &'static str,
        found_rows: usize,
        found_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("{name} has length {found}, expected {want}")]
    BadBias {
        name: &'static str,
        found: usize,
        want: usize,
    },
}

/// Logistic sigmoid.
#[inline]
#[must_use]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SiLU activation `x · σ(x)`.
#[inline]
#[must_use]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Derivative of SiLU: `σ(x) · (1 + x · (1 − σ(x)))`.
#[inline]
#[must_use]
pub fn silu_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Complete parameter set for the projection stack.
///
/// Shapes: `w1: hidden×d`, `w2: m×hidden`, `wk`/`wv`: `m×m`, `wq`: `m×d`;
/// each bias matches its map's output width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub d: usize,
    pub m: usize,
    pub hidden: usize,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
    pub wk: Mat,
    pub bk: Vec<f64>,
    pub wv: Mat,
    pub bv: Vec<f64>,
    pub wq: Mat,
    pub bq: Vec<f64>,
}

impl ProjectionParams {
    /// All weights and biases drawn uniformly from (−0.5, 0.5) in a fixed
    /// order, so a seed fully determines the parameter set.
    #[must_use]
    pub fn synthetic(seed: u64, d: usize, m: usize, hidden: usize) -> Self {
        let mut rng = SyntheticRng::from_seed(seed);
        let lo = -0.5;
        let hi = 0.5;
        Self {
            d,
            m,
            hidden,
            w1: rng.mat(hidden, d, lo, hi),
            b1: rng.vec(hidden, lo, hi),
            w2: rng.mat(m, hidden, lo, hi),
            b2: rng.vec(m, lo, hi),
            wk: rng.mat(m, m, lo, hi),
            bk: rng.vec(m, lo, hi),
            wv: rng.mat(m, m, lo, hi),
            bv: rng.vec(m, lo, hi),
            wq: rng.mat(m, d, lo, hi),
            bq: rng.vec(m, lo, hi),
        }
    }

    /// A parameter set whose whole stack is (numerically) the identity on
    /// width-`d` features: the MLP stacks `x` against `−x` so the SiLU pair
    /// cancels back to `x` (`silu(x) − silu(−x) = x`), and the key, value,
    /// and query maps are identity matrices.
    #[must_use]
    pub fn identity(d: usize) -> Self {
        let hidden = 2 * d;
        let w1 = Mat::from_fn(hidden, d, |r, c| {
            if r < d {
                if r == c {
                    1.0
                } else {
                    0.0
                }
            } else if r - d == c {
                -1.0
            } else {
                0.0
            }
        });
        let w2 = Mat::from_fn(d, hidden, |r, c| {
            if c < d {
                if r == c {
                    1.0
                } else {
                    0.0
                }
            } else if c - d == r {
                -1.0
            } else {
                0.0
            }
        });
        let eye = Mat::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 });
        Self {
            d,
            m: d,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; d],
            wk: eye.clone(),
            bk: vec![0.0; d],
            wv: eye.clone(),
            bv: vec![0.0; d],
            wq: eye,
            bq: vec![0.0; d],
        }
    }

    /// Checks every weight and bias against the declared dimensions.
    pub fn validate(&self) -> Result<(), ProjectionError> {
        let weight = |name, mat: &Mat, rows, cols| {
            if mat.rows() != rows || mat.cols() != cols {
                Err(ProjectionError::BadWeight {
                    name,
                    found_rows: mat.rows(),
                    found_cols: mat.cols(),
                    want_rows: rows,
                    want_cols: cols,
                })
            } else {
                Ok(())
            }
        };
        let bias = |name, b: &Vec<f64>, want| {
            if b.len() != want {
                Err(ProjectionError::BadBias {
                    name,
                    found: b.len(),
                    want,
                })
            } else {
                Ok(())
            }
        };
        weight("w1", &self.w1, self.hidden, self.d)?;
        bias("b1", &self.b1, self.hidden)?;
        weight("w2", &self.w2, self.m, self.hidden)?;
        bias("b2", &self.b2, self.m)?;
        weight("wk", &self.wk, self.m, self.m)?;
        bias("bk", &self.bk, self.m)?;
        weight("wv", &self.wv, self.m, self.m)?;
        bias("bv", &self.bv, self.m)?;
        weight("wq", &self.wq, self.m, self.d)?;
        bias("bq", &self.bq, self.m)?;
        Ok(())
    }

    /// MLP pre-activation `z = x·W1ᵀ + b1` (needed verbatim by the gradient
    /// checker).
    #[must_use]
    pub fn mlp_preactivation(&self, x: &Mat) -> Mat {
        let mut z = x.matmul_nt(&self.w1);
        z.add_row_broadcast(&self.b1);
        z
    }

    /// Two-layer MLP `x → silu(x·W1ᵀ + b1)·W2ᵀ + b2`, mapping `n×d` features
    /// to `n×m`.
    #[must_use]
    pub fn mlp_forward(&self, x: &Mat) -> Mat {
        let s = self.mlp_preactivation(x).map(silu);
        let mut h = s.matmul_nt(&self.w2);
        h.add_row_broadcast(&self.b2);
        h
    }

    /// Full write path to memory space: MLP then the key and value maps.
    /// Time embedding is **not** applied here; that happens on commit.
    #[must_use]
    pub fn project_to_memory(&self, x: &Mat) -> (Mat, Mat) {
        let h = self.mlp_forward(x);
        let mut key = h.matmul_nt(&self.wk);
        key.add_row_broadcast(&self.bk);
        let mut value = h.matmul_nt(&self.wv);
        value.add_row_broadcast(&self.bv);
        (key, value)
    }

    /// Query map straight from raw `n×d` features to `n×m`.
    #[must_use]
    pub fn query(&self, x: &Mat) -> Mat {
        let mut q = x.matmul_nt(&self.wq);
        q.add_row_broadcast(&self.bq);
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SyntheticRng;

    #[test]
    fn silu_known_values() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        // The cancellation identity behind the identity construction.
        for x in [-3.0, -0.5, 0.0, 0.25, 2.0, 10.0] {
            assert!((silu(x) - silu(-x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn silu_prime_matches_finite_difference() {
        let h = 1e-6;
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let numeric = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_prime(x) - numeric).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn identity_params_reproduce_the_input() {
        let d = 6;
        let params = ProjectionParams::identity(d);
        params.validate().unwrap();
        let mut rng = SyntheticRng::from_seed(3);
        let x = rng.mat(5, d, -4.0, 4.0);
        let h = params.mlp_forward(&x);
        assert!(h.max_abs_diff(&x) <= 1e-12);
        let (key, value) = params.project_to_memory(&x);
        assert!(key.max_abs_diff(&x) <= 1e-12);
        assert!(value.max_abs_diff(&x) <= 1e-12);
        assert!(params.query(&x).max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn synthetic_params_are_seed_deterministic() {
        let a = ProjectionParams::synthetic(42, 8, 4, 4);
        let b = ProjectionParams::synthetic(42, 8, 4, 4);
        let c = ProjectionParams::synthetic(43, 8, 4, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate().unwrap();
    }

    #[test]
    fn validate_catches_shape_drift() {
        let mut p = ProjectionParams::synthetic(1, 8, 4, 4);
        p.bq.push(0.0);
        assert!(matches!(
            p.validate(),
            Err(ProjectionError::BadBias { name: "bq", .. })
        ));
        let mut p = ProjectionParams::synthetic(1, 8, 4, 4);
        p.wk = Mat::zeros(3, 4);
        assert!(matches!(
            p.validate(),
            Err(ProjectionError::BadWeight { name: "wk", .. })
        ));
    }

    #[test]
    fn params_serde_round_trip_is_exact() {
        let p = ProjectionParams::synthetic(7, 6, 4, 5);
        let json = serde_json::to_string(&p).unwrap();
        let back: ProjectionParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }
}
