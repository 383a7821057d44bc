//! Gaussian-mixture posterior over the clean state given a noisy query, and
//! the Monte Carlo score estimate built on it.

use rand::Rng;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::{add_gaussian, logsumexp, Categorical, LN_2PI};
use crate::potentials::PotentialOracle;
use crate::rng::SeedSpec;

/// `log[(1/N) Σ_i N(y; x_i, h I)]`.
pub fn mixture_log_density(y: &[f64], x: &Ensemble, h: f64) -> f64 {
    let mut buf = Vec::with_capacity(x.len());
    mixture_log_density_with(y, x, h, &mut buf)
}

fn mixture_log_density_with(y: &[f64], x: &Ensemble, h: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(x.rows().map(|xi| -0.5 * sq_dist(y, xi) / h));
    let lse = logsumexp(buf).expect("finite kernel values");
    lse - (x.len() as f64).ln() - 0.5 * y.len() as f64 * (LN_2PI + h.ln())
}

/// Posterior `Σ_j w_j N(m_j, σ̄² I)` of the clean state given a query `z`.
#[derive(Clone, Debug)]
pub struct PosteriorMixture {
    pub shared_variance: f64,
    pub means: Ensemble,
    /// Normalized: `logsumexp(log_weights) = 0`.
    pub log_weights: Vec<f64>,
}

/// Closed-form posterior parameters for query `z` at noise level `sigma_sq`.
pub fn posterior_params(
    z: &[f64],
    y: &Ensemble,
    x: &Ensemble,
    h: f64,
    sigma_sq: f64,
) -> Result<PosteriorMixture> {
    check_pair(y, x, z)?;
    let surrogate = Surrogate::new(y, x, h, crate::Execution::Sequential)?;
    surrogate.posterior(z, sigma_sq)
}

/// Output of one score estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreEstimate {
    pub drift: Vec<f64>,
    /// Every interim sample had infinite potential; `drift` is zero.
    pub degenerate: bool,
}

/// Monte Carlo estimate of `∇ log(q̂ P_{σ²})(z)` from `interim` posterior draws.
#[allow(clippy::too_many_arguments)]
pub fn estimate_score<P: PotentialOracle + ?Sized>(
    z: &[f64],
    y: &Ensemble,
    x: &Ensemble,
    h: f64,
    sigma_sq: f64,
    interim: usize,
    oracle: &P,
    stream: &SeedSpec,
) -> Result<ScoreEstimate> {
    check_pair(y, x, z)?;
    let surrogate = Surrogate::new(y, x, h, crate::Execution::Sequential)?;
    let mut scratch = Scratch::default();
    surrogate.score(
        z,
        sigma_sq,
        interim,
        oracle,
        &mut stream.rng(),
        &mut scratch,
    )
}

fn check_pair(y: &Ensemble, x: &Ensemble, z: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::invalid(format!(
            "perturbed ensemble has {} particles, base ensemble {}",
            y.len(),
            x.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    x.check_dim(y.dim())?;
    if z.len() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.dim(),
            actual: z.len(),
        });
    }
    Ok(())
}

/// Per-iteration state shared by every score query: the perturbed ensemble
/// and the log inverse-density weights `−log q̂(y_j | X)`.
pub(crate) struct Surrogate<'a> {
    y: &'a Ensemble,
    neg_log_q: Vec<f64>,
    h: f64,
}

#[derive(Default)]
pub(crate) struct Scratch {
    log_w: Vec<f64>,
    categorical: Option<Categorical>,
    samples: Vec<f64>,
    values: Vec<f64>,
    mean: Vec<f64>,
}

impl<'a> Surrogate<'a> {
    pub(crate) fn new(
        y: &'a Ensemble,
        x: &Ensemble,
        h: f64,
        exec: crate::Execution,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!(
                "step size h must be positive, got {h}"
            )));
        }
        let neg_log_q = crate::par::map_range(exec, y.len(), |j| {
            let mut buf = Vec::with_capacity(x.len());
            -mixture_log_density_with(y.row(j), x, h, &mut buf)
        });
        Ok(Self { y, neg_log_q, h })
    }

    fn check_sigma(sigma_sq: f64) -> Result<()> {
        if sigma_sq > 0.0 && sigma_sq.is_finite() {
            Ok(())
        } else {
            Err(Error::Schedule(format!(
                "current substep variance must be positive, got {sigma_sq}"
            )))
        }
    }

    /// Unnormalized `log w_j = log N(z; y_j, (h+σ²)I) − log q̂(y_j)`.
    fn log_weights_into(&self, z: &[f64], sigma_sq: f64, out: &mut Vec<f64>) {
        let s = self.h + sigma_sq;
        let norm = -0.5 * z.len() as f64 * (LN_2PI + s.ln());
        out.clear();
        out.extend(
            self.y
                .rows()
                .zip(&self.neg_log_q)
                .map(|(yj, nlq)| norm - 0.5 * sq_dist(z, yj) / s + nlq),
        );
    }

    pub(crate) fn posterior(&self, z: &[f64], sigma_sq: f64) -> Result<PosteriorMixture> {
        Self::check_sigma(sigma_sq)?;
        let h = self.h;
        let shared_variance = 1.0 / (1.0 / h + 1.0 / sigma_sq);
        let means: Vec<f64> = self
            .y
            .rows()
            .flat_map(|yj| {
                yj.iter()
                    .zip(z)
                    .map(move |(yc, zc)| shared_variance * (yc / h + zc / sigma_sq))
            })
            .collect();
        let mut log_weights = Vec::new();
        self.log_weights_into(z, sigma_sq, &mut log_weights);
        let lse = logsumexp(&log_weights)?;
        log_weights.iter_mut().for_each(|w| *w -= lse);
        if self.y.len() == 1 {
            log_weights[0] = 0.0;
        }
        Ok(PosteriorMixture {
            shared_variance,
            means: Ensemble::from_flat(means, z.len())?,
            log_weights,
        })
    }

    pub(crate) fn score<P, R>(
        &self,
        z: &[f64],
        sigma_sq: f64,
        interim: usize,
        oracle: &P,
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> Result<ScoreEstimate>
    where
        P: PotentialOracle + ?Sized,
        R: Rng + ?Sized,
    {
        Self::check_sigma(sigma_sq)?;
        if interim == 0 {
            return Err(Error::invalid("at least one interim sample is required"));
        }
        let d = z.len();
        let h = self.h;
        let s = h + sigma_sq;
        let (a, b) = (sigma_sq / s, h / s);
        let std = (h * sigma_sq / s).sqrt();

        self.log_weights_into(z, sigma_sq, &mut scratch.log_w);
        let cat = match scratch.categorical.as_mut() {
            Some(c) => {
                c.reset(&scratch.log_w)?;
                c
            }
            None => scratch
                .categorical
                .insert(Categorical::from_log_weights(&scratch.log_w)?),
        };

        scratch.samples.clear();
        scratch.samples.reserve(interim * d);
        scratch.mean.resize(d, 0.0);
        for _ in 0..interim {
            let yj = self.y.row(cat.sample(rng));
            for c in 0..d {
                scratch.mean[c] = a * yj[c] + b * z[c];
            }
            add_gaussian(rng, &mut scratch.mean, std);
            scratch.samples.extend_from_slice(&scratch.mean);
        }

        scratch.values.resize(interim, 0.0);
        oracle.evaluate_batch(&scratch.samples, &mut scratch.values);

        // log c_l = −f(z_0^l), softmax-normalized via max-shift.
        let max_log_c = scratch
            .values
            .iter()
            .map(|f| -f)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut drift = vec![0.0; d];
        if max_log_c == f64::NEG_INFINITY {
            return Ok(ScoreEstimate {
                drift,
                degenerate: true,
            });
        }
        if max_log_c.is_nan() || scratch.values.iter().any(|f| f.is_nan()) {
            return Err(Error::invalid("potential returned NaN"));
        }
        let mut total = 0.0;
        for (sample, f) in scratch.samples.chunks_exact(d).zip(&scratch.values) {
            let c = (-f - max_log_c).exp();
            total += c;
            for k in 0..d {
                drift[k] += c * (sample[k] - z[k]);
            }
        }
        let scale = 1.0 / (total * sigma_sq);
        drift.iter_mut().for_each(|v| *v *= scale);
        Ok(ScoreEstimate {
            drift,
            degenerate: false,
        })
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gaussian_log_density;
    use crate::potentials::{Constant, Quadratic};
    use crate::rng::Purpose;
    use rand::Rng;

    fn ens(rows: &[&[f64]]) -> Ensemble {
        Ensemble::from_rows(rows, rows[0].len()).unwrap()
    }

    #[test]
    fn mixture_density_examples() {
        let x = ens(&[&[0.0]]);
        assert!((mixture_log_density(&[0.0], &x, 1.0) + 0.918_938_533_204_672_8).abs() < 1e-12);
        let xx = ens(&[&[0.3, -1.0], &[0.3, -1.0]]);
        let x1 = ens(&[&[0.3, -1.0]]);
        let y = [1.0, 0.5];
        assert!(
            (mixture_log_density(&y, &xx, 0.7) - mixture_log_density(&y, &x1, 0.7)).abs() < 1e-14
        );
    }

    #[test]
    fn mixture_density_matches_naive_sum() {
        let mut rng = SeedSpec::new(5, Purpose::Custom(20)).rng();
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let d = rng.random_range(1..4);
            let h = rng.random_range(0.2..3.0);
            let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = Ensemble::from_flat(data, d).unwrap();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let naive: f64 = x
                .rows()
                .map(|xi| gaussian_log_density(&y, xi, h).exp())
                .sum::<f64>()
                / n as f64;
            assert!((mixture_log_density(&y, &x, h) - naive.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_direct_substitution() {
        let y = ens(&[&[2.0]]);
        let p = posterior_params(&[0.0], &y, &y, 1.0, 1.0).unwrap();
        assert_eq!(p.shared_variance, 0.5);
        assert_eq!(p.means.row(0), &[1.0]);
        assert_eq!(p.log_weights, vec![0.0]);
    }

    #[test]
    fn posterior_single_component_weight_is_exactly_zero() {
        let y = ens(&[&[7.3, -2.0]]);
        let x = ens(&[&[-4.0, 1.0]]);
        for z in [[0.0, 0.0], [100.0, -30.0]] {
            let p = posterior_params(&z, &y, &x, 0.3, 0.01).unwrap();
            assert_eq!(p.log_weights, vec![0.0]);
        }
    }

    #[test]
    fn posterior_rejects_zero_variance() {
        let y = ens(&[&[1.0]]);
        assert!(matches!(
            posterior_params(&[0.0], &y, &y, 1.0, 0.0),
            Err(Error::Schedule(_))
        ));
        assert!(posterior_params(&[0.0, 1.0], &y, &y, 1.0, 1.0).is_err());
    }

    #[test]
    fn posterior_invariants() {
        let mut rng = SeedSpec::new(6, Purpose::Custom(21)).rng();
        for _ in 0..100 {
            let n = rng.random_range(1..10);
            let d = rng.random_range(1..4);
            let h = rng.random_range(0.01..2.0);
            let s2 = rng.random_range(0.01..2.0);
            let y =
                Ensemble::from_flat((0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect(), d)
                    .unwrap();
            let x =
                Ensemble::from_flat((0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect(), d)
                    .unwrap();
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = posterior_params(&z, &y, &x, h, s2).unwrap();
            assert!(p.shared_variance > 0.0 && p.shared_variance < h.min(s2));
            assert!(logsumexp(&p.log_weights).unwrap().abs() < 1e-12);
            for (m, yj) in p.means.rows().zip(y.rows()) {
                for c in 0..d {
                    let expect = (s2 * yj[c] + h * z[c]) / (h + s2);
                    assert!((m[c] - expect).abs() < 1e-12);
                    let (lo, hi) = (yj[c].min(z[c]), yj[c].max(z[c]));
                    assert!(m[c] >= lo - 1e-12 && m[c] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_potential_matches_flat_bitwise() {
        let y = ens(&[&[0.0, 1.0], &[2.0, -1.0], &[0.5, 0.5]]);
        let x = ens(&[&[0.1, 0.9], &[1.5, -0.7], &[0.0, 0.0]]);
        let s = SeedSpec::at(8, Purpose::Interim, 0, 0, 3);
        let flat =
            estimate_score(&[0.3, 0.2], &y, &x, 0.5, 0.25, 64, &Constant::flat(2), &s).unwrap();
        let shifted = estimate_score(
            &[0.3, 0.2],
            &y,
            &x,
            0.5,
            0.25,
            64,
            &Constant::new(2, 37.5),
            &s,
        )
        .unwrap();
        assert_eq!(flat, shifted);
    }

    #[test]
    fn infinite_potential_gives_zero_drift() {
        let y = ens(&[&[0.0]]);
        let s = SeedSpec::new(1, Purpose::Interim);
        let est = estimate_score(
            &[1.0],
            &y,
            &y,
            1.0,
            0.5,
            16,
            &Constant::new(1, f64::INFINITY),
            &s,
        )
        .unwrap();
        assert!(est.degenerate);
        assert_eq!(est.drift, vec![0.0]);
    }

    #[test]
    fn symmetric_flat_case_has_zero_mean_drift() {
        let y = ens(&[&[0.0]]);
        let calls = 10_000;
        let mut acc = 0.0;
        for i in 0..calls {
            let s = SeedSpec::at(2, Purpose::Interim, 0, i, 0);
            acc += estimate_score(&[0.0], &y, &y, 1.0, 1.0, 16, &Constant::flat(1), &s)
                .unwrap()
                .drift[0];
        }
        assert!((acc / calls as f64).abs() < 0.02);
    }

    #[test]
    fn quadratic_score_is_unbiased_at_large_m() {
        // Surrogate ∝ N(0,1)·e^{−x²/2} ∝ N(0, ½): score −z/(½ + σ²) = −1 at z = 1, σ² = ½.
        let y = ens(&[&[0.0]]);
        let calls = 400;
        let mut acc = 0.0;
        for i in 0..calls {
            let s = SeedSpec::at(3, Purpose::Interim, 0, i, 0);
            acc += estimate_score(&[1.0], &y, &y, 1.0, 0.5, 10_000, &Quadratic::new(1), &s)
                .unwrap()
                .drift[0];
        }
        let mean = acc / calls as f64;
        assert!((mean + 1.0).abs() < 0.03, "{mean}");
    }
}
