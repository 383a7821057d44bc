use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Distances below this are floored (cross-set duplicates).
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlEstimate {
    /// Estimated `KL(p ‖ q)` in nats.
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Cross-set neighbour distances that were zero and got floored.
    pub floored: usize,
}

/// Two-sample k-nearest-neighbour estimate of `KL(p ‖ q)`:
///
/// `(d/n) Σ_i log(ν_k(i)/ρ_k(i)) + log(m/(n−1))`
///
/// with `ρ_k(i)` the distance from `p_i` to its k-th nearest neighbour among
/// the other p-samples and `ν_k(i)` the same within the q-samples.
pub fn knn_kl(p: &Ensemble, q: &Ensemble, k: usize) -> Result<KlEstimate> {
    knn_kl_with(p, q, k, Execution::default())
}

pub fn knn_kl_with(p: &Ensemble, q: &Ensemble, k: usize, exec: Execution) -> Result<KlEstimate> {
    if k == 0 {
        return Err(Error::invalid("neighbour order k must be at least 1"));
    }
    q.check_dim(p.dim())?;
    let (n, m) = (p.len(), q.len());
    if n <= k || m < k {
        return Err(Error::invalid(format!(
            "need n > k and m >= k (n = {n}, m = {m}, k = {k})"
        )));
    }
    let dists = kth_neighbor_distances(p, q, k, exec);
    let mut sum = 0.0;
    let mut floored = 0;
    for (i, (rho, nu)) in dists.into_iter().enumerate() {
        if rho == 0.0 {
            return Err(Error::DegenerateGeometry {
                index: i,
                k,
                set: "p",
            });
        }
        let nu = if nu < DISTANCE_FLOOR {
            floored += 1;
            DISTANCE_FLOOR
        } else {
            nu
        };
        sum += (nu / rho).ln();
    }
    let value = p.dim() as f64 / n as f64 * sum + (m as f64 / (n as f64 - 1.0)).ln();
    Ok(KlEstimate {
        value,
        n,
        m,
        k,
        floored,
    })
}

/// `(ρ_k(i), ν_k(i))` for every p-sample by exhaustive search.
pub fn kth_neighbor_distances(
    p: &Ensemble,
    q: &Ensemble,
    k: usize,
    exec: Execution,
) -> Vec<(f64, f64)> {
    par::map_range(exec, p.len(), |i| {
        let pi = p.row(i);
        let mut within: Vec<f64> = p
            .rows()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, pj)| sq_dist(pi, pj))
            .collect();
        let mut across: Vec<f64> = q.rows().map(|qj| sq_dist(pi, qj)).collect();
        let rho = *within.select_nth_unstable_by(k - 1, f64::total_cmp).1;
        let nu = *across.select_nth_unstable_by(k - 1, f64::total_cmp).1;
        (rho.sqrt(), nu.sqrt())
    })
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::add_gaussian;
    use crate::rng::{Purpose, SeedSpec};

    fn gaussian(n: usize, d: usize, mean: f64, std: f64, seed: u64) -> Ensemble {
        let mut rng = SeedSpec::new(seed, Purpose::Custom(30)).rng();
        let mut data = vec![mean; n * d];
        add_gaussian(&mut rng, &mut data, std);
        Ensemble::from_flat(data, d).unwrap()
    }

    #[test]
    fn brute_force_oracle_agrees() {
        let p = gaussian(150, 3, 0.0, 1.0, 1);
        let q = gaussian(120, 3, 0.5, 1.0, 2);
        for k in [1, 4, 7] {
            let fast = kth_neighbor_distances(&p, &q, k, Execution::Parallel);
            for (i, (rho, nu)) in fast.into_iter().enumerate() {
                let mut w: Vec<f64> = (0..p.len())
                    .filter(|&j| j != i)
                    .map(|j| sq_dist(p.row(i), p.row(j)).sqrt())
                    .collect();
                let mut a: Vec<f64> = q.rows().map(|qj| sq_dist(p.row(i), qj).sqrt()).collect();
                w.sort_by(f64::total_cmp);
                a.sort_by(f64::total_cmp);
                assert_eq!(rho, w[k - 1]);
                assert_eq!(nu, a[k - 1]);
            }
        }
    }

    #[test]
    fn preconditions() {
        let p = gaussian(4, 2, 0.0, 1.0, 1);
        let q = gaussian(10, 2, 0.0, 1.0, 2);
        assert!(knn_kl(&p, &q, 4).is_err());
        assert!(knn_kl(&q, &p, 5).is_err());
        assert!(knn_kl(&q, &p, 0).is_err());
        assert!(knn_kl(&q, &gaussian(10, 3, 0.0, 1.0, 2), 2).is_err());
    }

    #[test]
    fn duplicates_across_sets_are_floored() {
        let p = gaussian(50, 2, 0.0, 1.0, 3);
        let est = knn_kl(&p, &p, 1).unwrap();
        assert_eq!(est.floored, 50);
        assert!(est.value.is_finite());
    }

    #[test]
    fn duplicates_within_p_are_an_error() {
        let mut rows: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        rows.push([3.0]);
        let p = Ensemble::from_rows(&rows, 1).unwrap();
        let q = gaussian(20, 1, 0.0, 1.0, 1);
        assert_eq!(
            knn_kl(&p, &q, 1).unwrap_err(),
            Error::DegenerateGeometry {
                index: 3,
                k: 1,
                set: "p"
            }
        );
    }

    #[test]
    fn rigid_motion_invariance() {
        let p = gaussian(300, 2, 0.0, 1.0, 4);
        let q = gaussian(300, 2, 0.7, 1.3, 5);
        let base = knn_kl(&p, &q, 4).unwrap().value;
        let (c, s) = (0.6f64, 0.8f64);
        let mv = |e: &Ensemble| {
            Ensemble::from_flat(
                e.rows()
                    .flat_map(|r| [c * r[0] - s * r[1] + 3.0, s * r[0] + c * r[1] - 7.0])
                    .collect(),
                2,
            )
            .unwrap()
        };
        let moved = knn_kl(&mv(&p), &mv(&q), 4).unwrap().value;
        assert!((base - moved).abs() < 1e-9);
    }
}
