#![allow(dead_code)]

use gravnet::chebfilter::optimal_roots;
use gravnet::manifold::{sample_cluster, sample_uniform, stable_qr};
use gravnet::{GrassmannPoint, Matrix, StiefelBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Center, `m` clustered bases and a shared start basis, drawn in that order.
pub struct Synthetic {
    pub center: StiefelBasis,
    pub data: Vec<StiefelBasis>,
    pub u0: StiefelBasis,
}

pub fn synthetic(n: usize, k: usize, m: usize, sigma: f64, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = sample_uniform(n, k, &mut rng).unwrap();
    let data = (0..m)
        .map(|_| sample_cluster(&center, sigma, &mut rng).unwrap())
        .collect();
    let u0 = sample_uniform(n, k, &mut rng).unwrap();
    Synthetic { center, data, u0 }
}

/// Two planted clusters, points alternating between them.
pub fn planted_pair(n: usize, k: usize, count: usize, sigma: f64, seed: u64) -> (Vec<StiefelBasis>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [
        sample_uniform(n, k, &mut rng).unwrap(),
        sample_uniform(n, k, &mut rng).unwrap(),
    ];
    (0..count)
        .map(|i| (sample_cluster(&centers[i % 2], sigma, &mut rng).unwrap(), i % 2))
        .unzip()
}

/// The dense averaged projector.
pub fn dense_projector(data: &[StiefelBasis]) -> Matrix {
    let n = data[0].n();
    let mut p = Matrix::zeros(n, n);
    for u in data {
        p += u.matrix() * u.matrix().transpose();
    }
    p / data.len() as f64
}

/// `Π_{s<steps} (P - r_s I) / (1 - r_s) · u0` for the roots of the degree-`horizon` filter.
pub fn dense_partial_product(p: &Matrix, u0: &Matrix, alpha: f64, horizon: usize, steps: usize) -> Matrix {
    let roots = optimal_roots(horizon, alpha).unwrap();
    let mut x = u0.clone();
    for &r in &roots[..steps] {
        x = (p * &x - &x * r) / (1.0 - r);
    }
    x
}

pub fn span(x: &Matrix) -> GrassmannPoint {
    GrassmannPoint::new(stable_qr(x).unwrap().0)
}

pub fn mean(states: &[Matrix]) -> Matrix {
    let mut acc = Matrix::zeros(states[0].nrows(), states[0].ncols());
    for s in states {
        acc += s;
    }
    acc / states.len() as f64
}

/// Random `k×k` orthogonal matrix.
pub fn random_orthogonal(k: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_uniform(k, k, &mut rng).unwrap().into_matrix()
}
