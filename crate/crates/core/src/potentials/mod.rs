//! Target potentials `f` with `π(x) ∝ exp(−f(x))`, seen only through
//! zeroth-order evaluation.

mod lasso;
mod tori;

pub use lasso::{make_orthogonal, GaussianLasso};
pub use tori::{Axis, Membership, Region, ToriDomain, Torus, WholeSpace};

/// Batched zeroth-order access to a potential.
///
/// Values are finite or `+∞` (zero density), never NaN. Batch evaluation has
/// no cross-point coupling and must match pointwise evaluation exactly.
pub trait PotentialOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    /// Evaluates every `dim`-sized row of `points` into `out`.
    fn evaluate_batch(&self, points: &[f64], out: &mut [f64]) {
        for (x, o) in points.chunks_exact(self.dim()).zip(out.iter_mut()) {
            *o = self.evaluate(x);
        }
    }
}

impl<P: PotentialOracle + ?Sized> PotentialOracle for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, points: &[f64], out: &mut [f64]) {
        (**self).evaluate_batch(points, out)
    }
}

impl<P: PotentialOracle + ?Sized> PotentialOracle for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn evaluate_batch(&self, points: &[f64], out: &mut [f64]) {
        (**self).evaluate_batch(points, out)
    }
}

/// Batch evaluation split across the rayon pool (or sequential).
pub fn evaluate_batch_with<P: PotentialOracle + ?Sized>(
    oracle: &P,
    points: &[f64],
    out: &mut [f64],
    exec: crate::Execution,
) {
    const CHUNK: usize = 1024;
    let d = oracle.dim();
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        points
            .par_chunks(CHUNK * d)
            .zip(out.par_chunks_mut(CHUNK))
            .for_each(|(p, o)| oracle.evaluate_batch(p, o));
        return;
    }
    let _ = (exec, CHUNK, d);
    oracle.evaluate_batch(points, out);
}

/// `f(x) = ‖x‖²/2`, the standard normal target.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    dim: usize,
}

impl Quadratic {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl PotentialOracle for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
}

/// `f(x) = c` everywhere; `c = 0` is the flat potential.
#[derive(Clone, Copy, Debug)]
pub struct Constant {
    dim: usize,
    value: f64,
}

impl Constant {
    pub fn new(dim: usize, value: f64) -> Self {
        Self { dim, value }
    }

    pub fn flat(dim: usize) -> Self {
        Self::new(dim, 0.0)
    }
}

impl PotentialOracle for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _x: &[f64]) -> f64 {
        self.value
    }
}

/// Adapts a closure into an oracle.
pub struct FnPotential<F> {
    dim: usize,
    f: F,
}

impl<F> FnPotential<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> PotentialOracle for FnPotential<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
