use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use super::PotentialOracle;
use crate::error::{Error, Result};
use crate::numeric::{logaddexp, LN_2PI};
use crate::rng::SeedSpec;

/// Equal-weight mixture of `N(1, Q⁻¹)` and a product Laplace law centred at 0:
///
/// `π(x) = √det Q / (2 √(2π)^d) · exp(−½(x−1)ᵀQ(x−1)) + (a/2)^d / 2 · exp(−a‖x‖₁)`
///
/// with `Q = U S Uᵀ` and `a` the lasso scale (4 by default, giving the
/// `2^{d−1} exp(−4‖x‖₁)` component). The potential is `−log π`, normalized.
#[derive(Clone, Debug)]
pub struct GaussianLasso {
    dim: usize,
    u: DMatrix<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
    lasso_scale: f64,
    log_gauss_norm: f64,
    log_laplace_norm: f64,
}

impl GaussianLasso {
    pub const DEFAULT_EIGENVALUES: [f64; 5] = [14.0, 15.0, 16.0, 17.0, 18.0];
    pub const DEFAULT_LASSO_SCALE: f64 = 4.0;

    pub fn new(u: DMatrix<f64>, s: Vec<f64>, lasso_scale: f64) -> Result<Self> {
        let dim = s.len();
        if dim == 0 || u.nrows() != dim || u.ncols() != dim {
            return Err(Error::invalid(
                "U must be square with one row per eigenvalue",
            ));
        }
        if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("eigenvalues must be positive and finite"));
        }
        if !(lasso_scale > 0.0) {
            return Err(Error::invalid("lasso scale must be positive"));
        }
        let gram = u.transpose() * &u;
        let err = (gram - DMatrix::<f64>::identity(dim, dim)).amax();
        if err > 1e-8 {
            return Err(Error::invalid(format!(
                "U is not orthogonal (max |UᵀU − I| = {err:e})"
            )));
        }
        let q_mat =
            &u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&s)) * u.transpose();
        // Symmetrize so downstream quadratic forms see an exactly symmetric matrix.
        let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
        let q = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| q_mat[(r, c)])
            .collect();
        let d = dim as f64;
        let log_det: f64 = s.iter().map(|v| v.ln()).sum();
        Ok(Self {
            dim,
            u,
            s,
            q,
            lasso_scale,
            log_gauss_norm: 0.5 * log_det - std::f64::consts::LN_2 - 0.5 * d * LN_2PI,
            log_laplace_norm: d * (lasso_scale / 2.0).ln() - std::f64::consts::LN_2,
        })
    }

    /// The five-dimensional target with `S = diag(14, …, 18)` and a seeded `U`.
    pub fn standard(orthogonal_seed: &SeedSpec) -> Self {
        let s = Self::DEFAULT_EIGENVALUES.to_vec();
        let u = make_orthogonal(orthogonal_seed, s.len());
        Self::new(u, s, Self::DEFAULT_LASSO_SCALE).expect("seeded orthogonal matrix is valid")
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.s
    }

    pub fn q(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.q)
    }

    /// `log` of the Gaussian component including its ½ mixture weight.
    pub fn gaussian_component(&self, x: &[f64]) -> f64 {
        let quad = match self.dim {
            1 => centered_quad::<1>(&self.q, x),
            2 => centered_quad::<2>(&self.q, x),
            3 => centered_quad::<3>(&self.q, x),
            4 => centered_quad::<4>(&self.q, x),
            5 => centered_quad::<5>(&self.q, x),
            6 => centered_quad::<6>(&self.q, x),
            _ => self
                .q
                .chunks_exact(self.dim)
                .zip(x)
                .map(|(row, xr)| {
                    (xr - 1.0) * row.iter().zip(x).map(|(q, xc)| q * (xc - 1.0)).sum::<f64>()
                })
                .sum(),
        };
        self.log_gauss_norm - 0.5 * quad
    }

    /// `log` of the Laplace component including its ½ mixture weight.
    pub fn laplace_component(&self, x: &[f64]) -> f64 {
        self.log_laplace_norm - self.lasso_scale * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log density queried at a non-finite point"));
        }
        Ok(self.log_density_unchecked(x))
    }

    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        logaddexp(self.gaussian_component(x), self.laplace_component(x))
    }

    /// Exact draw from the mixture (component choice, then component law).
    pub fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        if rng.random::<bool>() {
            let z: Vec<f64> = (0..d)
                .map(|i| rng.sample::<f64, _>(StandardNormal) / self.s[i].sqrt())
                .collect();
            (0..d)
                .map(|r| 1.0 + (0..d).map(|c| self.u[(r, c)] * z[c]).sum::<f64>())
                .collect()
        } else {
            let exp = Exp::new(self.lasso_scale).expect("positive rate");
            (0..d)
                .map(|_| {
                    let mag: f64 = rng.sample(exp);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        }
    }
}

impl PotentialOracle for GaussianLasso {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        -self.log_density_unchecked(x)
    }
}

/// `(x − 1)ᵀ Q (x − 1)` for a row-major `D × D` matrix `q`.
#[inline]
fn centered_quad<const D: usize>(q: &[f64], x: &[f64]) -> f64 {
    let q: &[f64] = &q[..D * D];
    let x: &[f64; D] = x[..D].try_into().expect("length checked by slicing");
    let mut delta = [0.0; D];
    for c in 0..D {
        delta[c] = x[c] - 1.0;
    }
    let mut quad = 0.0;
    for r in 0..D {
        let mut acc = 0.0;
        for c in 0..D {
            acc += q[r * D + c] * delta[c];
        }
        quad += delta[r] * acc;
    }
    quad
}

/// Seeded orthogonal matrix: QR of a Gaussian matrix with `diag(R) > 0`.
pub fn make_orthogonal(seed: &SeedSpec, d: usize) -> DMatrix<f64> {
    let mut rng = seed.rng();
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}
