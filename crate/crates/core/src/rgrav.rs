//! Centralized averaging: finite and asymptotic Chebyshev-filtered iterations
//! and the block power method.
//!
//! Every variant repeatedly forms `Â = (1/M) Σ U_m (U_mᵀ Ū)` and combines it
//! with the retained iterates so that after `t` steps `span(Ū⁽ᵗ⁾)` equals
//! `span(f_t(P) Ū⁽⁰⁾)` for the variant's polynomial `f_t`. Orthonormalization
//! runs on an [`OrthoSchedule`]; off-schedule steps right-multiply by the
//! triangular factor cached from the last QR.

use serde::{Deserialize, Serialize};

use crate::chebfilter::{chebyshev_coefficients, optimal_roots};
use crate::error::{GravError, Result};
use crate::manifold::{check_collection, local_project, residual_sq_one_sided, stable_qr};
use crate::ops::{Averaged, OpCount};
use crate::{GrassmannPoint, Matrix, StiefelBasis};

/// Iterations at which an exact QR is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrthoSchedule {
    /// Orthonormalize at every iteration `t` with `t % period == 0`.
    Every(usize),
    /// Never orthonormalize; the cached factor stays the identity.
    Never,
}

impl OrthoSchedule {
    pub fn is_due(&self, t: usize) -> bool {
        match *self {
            OrthoSchedule::Every(period) => period > 0 && t % period == 0,
            OrthoSchedule::Never => false,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            OrthoSchedule::Every(0) => Err(GravError::InvalidParameter(
                "orthonormalization period must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for OrthoSchedule {
    fn default() -> Self {
        OrthoSchedule::Every(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    /// Apply the `horizon` factors of `f*_horizon` one per iteration.
    Finite { horizon: usize },
    /// Three-term recurrence; optimal-to-leading-order at every iteration.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgravConfig {
    pub alpha: f64,
    pub variant: Variant,
    pub ortho: OrthoSchedule,
    pub max_iter: usize,
    /// Stop once the squared chordal distance between successive iterates
    /// falls below this (asymptotic variant only).
    pub tol: f64,
}

impl Default for RgravConfig {
    fn default() -> Self {
        RgravConfig {
            alpha: 0.15,
            variant: Variant::Asymptotic,
            ortho: OrthoSchedule::Every(1),
            max_iter: 100,
            tol: 1e-14,
        }
    }
}

impl RgravConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GravError::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Variant::Finite { horizon: 0 } = self.variant {
            return Err(GravError::InvalidParameter(
                "finite variant needs a horizon T >= 1".into(),
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(GravError::InvalidParameter(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        self.ortho.validate()
    }
}

/// Buffers carried between iterations.
///
/// `u_curr` is `Ū⁽ᵗ⁾`; `u_prev` is `Ū⁽ᵗ⁻¹⁾` expressed in the coordinates of
/// the latest orthonormalization (the asymptotic recurrence needs both in the
/// same frame). `s_cache` is the upper-triangular factor of the last QR.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub u_curr: Matrix,
    pub u_prev: Matrix,
    pub s_cache: Matrix,
    pub t: usize,
}

#[derive(Debug, Clone)]
enum Filter {
    Finite { roots: Vec<f64> },
    Asymptotic { alpha: f64 },
    Power,
}

/// Step-wise centralized averaging.
#[derive(Debug, Clone)]
pub struct Rgrav<'a> {
    data: &'a [StiefelBasis],
    filter: Filter,
    ortho: OrthoSchedule,
    state: IterateState,
    ops: OpCount,
}

impl<'a> Rgrav<'a> {
    pub fn finite(
        data: &'a [StiefelBasis],
        u0: &StiefelBasis,
        alpha: f64,
        horizon: usize,
        ortho: OrthoSchedule,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(GravError::InvalidParameter(
                "finite variant needs a horizon T >= 1".into(),
            ));
        }
        let roots = optimal_roots(horizon, alpha)?;
        Self::with_filter(data, u0, Filter::Finite { roots }, ortho)
    }

    pub fn asymptotic(
        data: &'a [StiefelBasis],
        u0: &StiefelBasis,
        alpha: f64,
        ortho: OrthoSchedule,
    ) -> Result<Self> {
        // Validates alpha up front rather than at iteration 2.
        chebyshev_coefficients(2, alpha)?;
        Self::with_filter(data, u0, Filter::Asymptotic { alpha }, ortho)
    }

    pub fn power(data: &'a [StiefelBasis], u0: &StiefelBasis, ortho: OrthoSchedule) -> Result<Self> {
        Self::with_filter(data, u0, Filter::Power, ortho)
    }

    fn with_filter(
        data: &'a [StiefelBasis],
        u0: &StiefelBasis,
        filter: Filter,
        ortho: OrthoSchedule,
    ) -> Result<Self> {
        let shape = check_collection(data)?;
        if u0.shape() != shape {
            return Err(GravError::DimensionMismatch {
                expected: shape,
                got: u0.shape(),
            });
        }
        ortho.validate()?;
        let k = shape.1;
        Ok(Rgrav {
            data,
            filter,
            ortho,
            state: IterateState {
                u_curr: u0.matrix().clone(),
                u_prev: u0.matrix().clone(),
                s_cache: Matrix::identity(k, k),
                t: 0,
            },
            ops: OpCount::default(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.state.t
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn ops(&self) -> OpCount {
        self.ops
    }

    /// Remaining iterations for the finite variant, `None` otherwise.
    pub fn remaining(&self) -> Option<usize> {
        match &self.filter {
            Filter::Finite { roots } => Some(roots.len() - self.state.t),
            _ => None,
        }
    }

    /// `(1/M) Σ_m U_m U_mᵀ X`, summed in ascending `m`.
    fn averaged_projection(&mut self, x: &Matrix) -> Result<Matrix> {
        let mut acc = Matrix::zeros(x.nrows(), x.ncols());
        for basis in self.data {
            acc += local_project(basis, x)?;
        }
        acc /= self.data.len() as f64;
        self.ops.matmuls += 2 * self.data.len() as u64;
        Ok(acc)
    }

    pub fn step(&mut self) -> Result<()> {
        let t = self.state.t + 1;
        let u_curr = std::mem::take(&mut self.state.u_curr);
        let a_hat = self.averaged_projection(&u_curr)?;
        let mut rescale_prev = false;
        let z_hat = match &self.filter {
            Filter::Power => a_hat,
            Filter::Finite { roots } => {
                let r = *roots.get(t - 1).ok_or_else(|| {
                    GravError::InvalidParameter(format!(
                        "finite horizon of {} iterations exhausted",
                        roots.len()
                    ))
                })?;
                (a_hat - &u_curr * r) / (1.0 - r)
            }
            Filter::Asymptotic { alpha } => {
                rescale_prev = true;
                if t == 1 {
                    a_hat
                } else {
                    let rec = chebyshev_coefficients(t, *alpha)?;
                    (a_hat + &u_curr * rec.b + &self.state.u_prev * rec.c) * rec.a
                }
            }
        };

        let u_next = if self.ortho.is_due(t) {
            let (u, s) = stable_qr(&z_hat).map_err(|e| e.at_iteration(t))?;
            self.ops.qr += 1;
            self.state.s_cache = s;
            u.into_matrix()
        } else {
            self.ops.matmuls += 1;
            z_hat * &self.state.s_cache
        };
        self.state.u_prev = if rescale_prev {
            self.ops.matmuls += 1;
            u_curr * &self.state.s_cache
        } else {
            u_curr
        };
        self.state.u_curr = u_next;
        self.state.t = t;
        Ok(())
    }

    /// The current iterate's span. Off-schedule iterates are orthonormalized
    /// for the purpose of reporting only.
    pub fn point(&self) -> Result<GrassmannPoint> {
        let t = self.state.t;
        if t == 0 || self.ortho.is_due(t) {
            return Ok(GrassmannPoint::new(StiefelBasis::new(self.state.u_curr.clone())?));
        }
        let (u, _) = stable_qr(&self.state.u_curr).map_err(|e| e.at_iteration(t))?;
        Ok(GrassmannPoint::new(u))
    }

    fn point_counted(&mut self) -> Result<GrassmannPoint> {
        let t = self.state.t;
        if t != 0 && !self.ortho.is_due(t) {
            self.ops.qr += 1;
        }
        self.point()
    }

    /// Steps until the squared chordal change between successive iterates is
    /// below `tol`, or `max_iter` steps have run.
    pub fn run_to_tolerance(&mut self, max_iter: usize, tol: f64) -> Result<Averaged> {
        let mut current = self.point_counted()?;
        let mut used = 0;
        while used < max_iter {
            if self.remaining() == Some(0) {
                break;
            }
            self.step()?;
            used += 1;
            let next = self.point_counted()?;
            let change = residual_sq_one_sided(current.basis(), next.basis());
            self.ops.matmuls += 2;
            current = next;
            if change < tol {
                break;
            }
        }
        Ok(Averaged {
            point: current,
            iterations: used,
            ops: self.ops,
        })
    }

    /// Runs exactly `iterations` steps.
    pub fn run(&mut self, iterations: usize) -> Result<Averaged> {
        for _ in 0..iterations {
            self.step()?;
        }
        Ok(Averaged {
            point: self.point_counted()?,
            iterations,
            ops: self.ops,
        })
    }
}

/// Finite-horizon RGrAv: applies all `horizon` factors of `f*_horizon`.
pub fn rgrav_finite(
    data: &[StiefelBasis],
    u0: &StiefelBasis,
    alpha: f64,
    horizon: usize,
    ortho: OrthoSchedule,
) -> Result<Averaged> {
    Rgrav::finite(data, u0, alpha, horizon, ortho)?.run(horizon)
}

/// Asymptotic RGrAv with the stop rule of `config` (`max_iter`, `tol`).
pub fn rgrav_asymptotic(
    data: &[StiefelBasis],
    u0: &StiefelBasis,
    config: &RgravConfig,
) -> Result<Averaged> {
    config.validate()?;
    Rgrav::asymptotic(data, u0, config.alpha, config.ortho)?
        .run_to_tolerance(config.max_iter, config.tol)
}

/// Dispatches on `config.variant`.
pub fn rgrav(data: &[StiefelBasis], u0: &StiefelBasis, config: &RgravConfig) -> Result<Averaged> {
    config.validate()?;
    match config.variant {
        Variant::Finite { horizon } => rgrav_finite(data, u0, config.alpha, horizon, config.ortho),
        Variant::Asymptotic => rgrav_asymptotic(data, u0, config),
    }
}

/// `iterations` steps of `Ū ← StableQR((1/M) Σ U_m U_mᵀ Ū)`.
pub fn power_method(data: &[StiefelBasis], u0: &StiefelBasis, iterations: usize) -> Result<Averaged> {
    Rgrav::power(data, u0, OrthoSchedule::Every(1))?.run(iterations)
}
