use nalgebra::SMatrix;

use crate::error::{QmxError, Result};
use crate::grid::Vec6;
use crate::material::{flux_matrix, Mat6};

pub type Mat26 = SMatrix<f64, 2, 6>;

/// Constant boundary matrices of the conducting face with
/// `A_3 = (C^T B + B^T C) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryOperators {
    pub normal: [f64; 3],
    pub bmat: Mat26,
    pub cmat: Mat26,
    pub a3: Mat6,
}

pub fn build_boundary_operators(nu: [f64; 3]) -> Result<BoundaryOperators> {
    if nu != [0.0, 0.0, -1.0] {
        return Err(QmxError::UnsupportedNormal(nu));
    }
    // rows (0, nu3, -nu2) and (-nu3, 0, nu1) acting on E; the third row
    // (nu2, -nu1, 0) vanishes for this normal
    let mut bmat = Mat26::zeros();
    bmat[(0, 1)] = nu[2];
    bmat[(0, 2)] = -nu[1];
    bmat[(1, 0)] = -nu[2];
    bmat[(1, 2)] = nu[0];
    let mut cmat = Mat26::zeros();
    cmat[(0, 3)] = 2.0;
    cmat[(1, 4)] = 2.0;
    let a3 = flux_matrix(3);
    Ok(BoundaryOperators { normal: nu, bmat, cmat, a3 })
}

impl BoundaryOperators {
    /// `B u` as a 3-vector with the structurally zero third entry.
    #[inline]
    pub fn apply_b(&self, u: &Vec6) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in 0..2 {
            for c in 0..6 {
                out[r] += self.bmat[(r, c)] * u[c];
            }
        }
        out
    }

    #[inline]
    pub fn apply_c(&self, u: &Vec6) -> [f64; 2] {
        let mut out = [0.0; 2];
        for r in 0..2 {
            for c in 0..6 {
                out[r] += self.cmat[(r, c)] * u[c];
            }
        }
        out
    }

    /// `(C^T + s B^T) w` for a face residual `w`.
    #[inline]
    pub fn lift(&self, w: &[f64; 3], s: f64) -> Vec6 {
        let mut out = [0.0; 6];
        for r in 0..2 {
            for c in 0..6 {
                out[c] += (self.cmat[(r, c)] + s * self.bmat[(r, c)]) * w[r];
            }
        }
        out
    }

    pub fn splitting_defect(&self) -> f64 {
        let s = (self.cmat.transpose() * self.bmat + self.bmat.transpose() * self.cmat) * 0.5;
        (s - self.a3).abs().max()
    }
}
