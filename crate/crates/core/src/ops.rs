use serde::{Deserialize, Serialize};

/// Tally of dense kernels issued by an averaging routine.
///
/// `matmuls` counts matrix-matrix products; factorizations are counted
/// separately since their cost does not scale with the collection size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub matmuls: u64,
    pub qr: u64,
    pub svd: u64,
    pub eig: u64,
}

impl OpCount {
    pub fn add(&mut self, other: &OpCount) {
        self.matmuls += other.matmuls;
        self.qr += other.qr;
        self.svd += other.svd;
        self.eig += other.eig;
    }
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.add(&rhs);
    }
}

/// Result of an iterative averaging routine.
#[derive(Debug, Clone)]
pub struct Averaged {
    pub point: crate::manifold::GrassmannPoint,
    pub iterations: usize,
    pub ops: OpCount,
}
