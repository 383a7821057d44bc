//! Sample-quality diagnostics: k-NN KL, marginal histograms, torus occupancy
//! and evaluation pooling.

mod knn;

pub use knn::{knn_kl, knn_kl_with, kth_neighbor_distances, KlEstimate, DISTANCE_FLOOR};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::potentials::{Region, ToriDomain};
use crate::record::RunRecord;

/// Counts of one coordinate over `bins` uniform bins on `[lo, hi]`.
///
/// The right edge belongs to the last bin; out-of-range samples are skipped.
pub fn marginal_histogram(
    samples: &Ensemble,
    coordinate: usize,
    bins: usize,
    range: (f64, f64),
) -> Result<Vec<u64>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if coordinate >= samples.dim() {
        return Err(Error::invalid(format!(
            "coordinate {coordinate} out of range for dimension {}",
            samples.dim()
        )));
    }
    let (lo, hi) = range;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!(
            "invalid histogram range [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for row in samples.rows() {
        let v = row[coordinate];
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Occupancy {
    pub t1: usize,
    pub t2: usize,
    pub outside: usize,
}

impl Occupancy {
    pub fn total(&self) -> usize {
        self.t1 + self.t2 + self.outside
    }
}

pub fn torus_occupancy(samples: &Ensemble, domain: &ToriDomain) -> Result<Occupancy> {
    samples.check_dim(3)?;
    let mut occ = Occupancy::default();
    for x in samples.rows() {
        match domain.locate(x) {
            Region::T1 => occ.t1 += 1,
            Region::T2 => occ.t2 += 1,
            Region::Outside => occ.outside += 1,
        }
    }
    Ok(occ)
}

#[derive(Clone, Debug)]
pub struct Pooled {
    pub ensemble: Ensemble,
    /// Fewer than `window` iterations were available.
    pub short_window: bool,
    pub iterations: usize,
}

/// Concatenates the ensembles of the last `window` records.
pub fn pool_particles(records: &[RunRecord], window: usize) -> Result<Pooled> {
    if window == 0 {
        return Err(Error::invalid("pooling window must be at least 1"));
    }
    let last = records
        .last()
        .ok_or_else(|| Error::invalid("no iterations to pool"))?;
    let take = window.min(records.len());
    let tail = &records[records.len() - take..];
    let ensemble = Ensemble::concat(
        tail.iter().map(|r| r.ensemble.as_ref()),
        last.ensemble.dim(),
    )?;
    Ok(Pooled {
        ensemble,
        short_window: take < window,
        iterations: take,
    })
}
