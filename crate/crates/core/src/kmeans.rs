//! K-means on the Grassmannian with the chordal metric and a pluggable
//! averaging routine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GravError, Result};
use crate::manifold::{
    check_collection, chordal_distance_sq, flag_mean_counted, frechet_mean_from, sample_uniform,
};
use crate::ops::OpCount;
use crate::rgrav::{OrthoSchedule, Rgrav};
use crate::{GrassmannPoint, StiefelBasis};

/// RGrAv stop-band edge for clustered data, where the within-cluster
/// projector spectrum below the top `k` stays under about a tenth.
pub const CLUSTER_ALPHA: f64 = 0.08;

/// How a cluster's center is recomputed. The iterative methods are
/// warm-started from the cluster's previous center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Averaging {
    /// Asymptotic RGrAv, stopped when the squared chordal change between
    /// iterates drops below `tol`.
    Rgrav { alpha: f64, max_iter: usize, tol: f64 },
    /// Block power method with the same stop rule.
    Power { max_iter: usize, tol: f64 },
    /// Riemannian gradient descent on the Karcher cost; `tol` bounds the
    /// update norm.
    Frechet { step: f64, tol: f64, max_iter: usize },
    Flag,
}

impl Averaging {
    pub fn rgrav(alpha: f64) -> Self {
        Averaging::Rgrav {
            alpha,
            max_iter: 100,
            tol: 1e-14,
        }
    }

    pub fn power() -> Self {
        Averaging::Power {
            max_iter: 500,
            tol: 1e-14,
        }
    }

    pub fn frechet() -> Self {
        Averaging::Frechet {
            step: 1.0,
            tol: 1e-7,
            max_iter: 500,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Averaging::Rgrav { .. } => "rgrav",
            Averaging::Power { .. } => "power",
            Averaging::Frechet { .. } => "frechet",
            Averaging::Flag => "flag",
        }
    }

    /// Averages `members`, starting iterative methods from `init`.
    pub fn average(
        &self,
        members: &[StiefelBasis],
        init: &StiefelBasis,
    ) -> Result<(GrassmannPoint, OpCount)> {
        match *self {
            Averaging::Rgrav {
                alpha,
                max_iter,
                tol,
            } => {
                let out = Rgrav::asymptotic(members, init, alpha, OrthoSchedule::Every(1))?
                    .run_to_tolerance(max_iter, tol)?;
                Ok((out.point, out.ops))
            }
            Averaging::Power { max_iter, tol } => {
                let out = Rgrav::power(members, init, OrthoSchedule::Every(1))?
                    .run_to_tolerance(max_iter, tol)?;
                Ok((out.point, out.ops))
            }
            Averaging::Frechet {
                step,
                tol,
                max_iter,
            } => {
                let out = frechet_mean_from(members, init, step, tol, max_iter)?;
                Ok((out.point, out.ops))
            }
            Averaging::Flag => {
                let mut ops = OpCount::default();
                let point = flag_mean_counted(members, &mut ops)?;
                Ok((point, ops))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub clusters: usize,
    pub averaging: Averaging,
    /// Stop once no center moves farther than this (chordal distance).
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl ClusteringConfig {
    pub fn new(clusters: usize, averaging: Averaging, seed: u64) -> Self {
        ClusteringConfig {
            clusters,
            averaging,
            tol: 1e-6,
            max_iter: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub centers: Vec<GrassmannPoint>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub averaging_calls: usize,
    /// Kernel tally per averaging call, in call order.
    pub per_call_ops: Vec<OpCount>,
    pub ops: OpCount,
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(point: &GrassmannPoint, centers: &[GrassmannPoint]) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = chordal_distance_sq(point, center)?;
        if d < best.1 {
            best = (c, d);
        }
    }
    Ok(best)
}

fn assign(points: &[GrassmannPoint], centers: &[GrassmannPoint]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut labels = Vec::with_capacity(points.len());
    let mut dists = Vec::with_capacity(points.len());
    for p in points {
        let (c, d) = nearest(p, centers)?;
        labels.push(c);
        dists.push(d);
    }
    Ok((labels, dists))
}

/// Gives every empty cluster the point farthest from its own center, taken
/// from a cluster that can spare it. Returns the reseeded cluster ids.
fn repair_empty(
    points: &[GrassmannPoint],
    labels: &mut [usize],
    dists: &mut [f64],
    centers: &mut [GrassmannPoint],
) -> Vec<usize> {
    let mut sizes = vec![0usize; centers.len()];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut reseeded = Vec::new();
    for c in 0..centers.len() {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        if let Some(i) = donor {
            sizes[labels[i]] -= 1;
            sizes[c] = 1;
            labels[i] = c;
            dists[i] = 0.0;
            centers[c] = points[i].clone();
            reseeded.push(c);
        }
    }
    reseeded
}

pub fn grassmann_kmeans(points: &[StiefelBasis], config: &ClusteringConfig) -> Result<ClusteringResult> {
    let (n, k) = check_collection(points)?;
    if config.clusters == 0 || config.clusters > points.len() {
        return Err(GravError::InvalidParameter(format!(
            "cluster count must lie in 1..={}, got {}",
            points.len(),
            config.clusters
        )));
    }
    if !(config.tol > 0.0) {
        return Err(GravError::InvalidParameter(format!(
            "tol must be positive, got {}",
            config.tol
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = (0..config.clusters)
        .map(|_| sample_uniform(n, k, &mut rng).map(GrassmannPoint::new))
        .collect::<Result<Vec<_>>>()?;
    let as_points: Vec<GrassmannPoint> = points.iter().cloned().map(GrassmannPoint::new).collect();

    let mut per_call_ops = Vec::new();
    let mut ops = OpCount::default();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let (mut labels, mut dists) = assign(&as_points, &centers)?;
        repair_empty(&as_points, &mut labels, &mut dists, &mut centers);

        let mut movement: f64 = 0.0;
        let mut next = Vec::with_capacity(centers.len());
        for (c, center) in centers.iter().enumerate() {
            let members: Vec<StiefelBasis> = labels
                .iter()
                .zip(points)
                .filter(|(&l, _)| l == c)
                .map(|(_, p)| p.clone())
                .collect();
            let (updated, call_ops) = config
                .averaging
                .average(&members, center.basis())
                .map_err(|e| e.in_cluster(c))?;
            per_call_ops.push(call_ops);
            ops += call_ops;
            movement = movement.max(chordal_distance_sq(center, &updated)?.sqrt());
            next.push(updated);
        }
        centers = next;
        if movement < config.tol {
            converged = true;
            break;
        }
    }
    let (assignments, _) = assign(&as_points, &centers)?;
    Ok(ClusteringResult {
        centers,
        assignments,
        iterations,
        converged,
        averaging_calls: per_call_ops.len(),
        per_call_ops,
        ops,
    })
}

/// `Σ_c (most common label count in c) / T`.
pub fn cluster_purity(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(GravError::DimensionMismatch {
            expected: (labels.len(), 1),
            got: (assignments.len(), 1),
        });
    }
    if assignments.is_empty() {
        return Err(GravError::EmptyCollection);
    }
    let mut counts: std::collections::BTreeMap<usize, std::collections::BTreeMap<usize, usize>> =
        Default::default();
    for (&a, &l) in assignments.iter().zip(labels) {
        *counts.entry(a).or_default().entry(l).or_default() += 1;
    }
    let majority: usize = counts
        .values()
        .map(|per_label| per_label.values().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / assignments.len() as f64)
}
