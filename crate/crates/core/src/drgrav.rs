//! Decentralized averaging with gradient tracking.
//!
//! Each agent holds one data basis and its own copy of the iterate. Every
//! iteration, an agent forms its local polynomial update `Y_m`, folds it into
//! the tracking variable `Z_m = Ẑ_m + Y_m⁽ᵗ⁾ - Y_m⁽ᵗ⁻¹⁾`, and the network runs
//! average consensus on `Z`. Because consensus preserves the agent mean, the
//! mean of `Ẑ` equals the mean of `Y` at every iteration, which is exactly the
//! centralized update.

use serde::{Deserialize, Serialize};

use crate::chebfilter::{chebyshev_coefficients, optimal_roots};
use crate::error::{GravError, Result};
use crate::manifold::{
    check_collection, chordal_distance_sq, local_project, residual_sq_one_sided, stable_qr,
};
use crate::netsim::{average_consensus, ConsensusSpec, RoundLedger};
use crate::rgrav::{OrthoSchedule, RgravConfig, Variant};
use crate::{GrassmannPoint, Matrix, StiefelBasis};

/// One simulated agent's local buffers.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub data_basis: StiefelBasis,
    pub u_curr: Matrix,
    pub u_prev: Matrix,
    pub y_curr: Matrix,
    pub y_prev: Matrix,
    pub z_hat: Matrix,
    pub s_cache: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecentralizedVariant {
    Finite { horizon: usize },
    Asymptotic,
    /// Tracked plain power iteration.
    Deepca,
}

/// One row of per-iteration output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub iteration: usize,
    pub comm_rounds: usize,
    pub mse: f64,
    /// Absent for centralized runs.
    pub msd: Option<f64>,
}

/// Step-wise decentralized run over a fixed consensus matrix.
#[derive(Debug, Clone)]
pub struct Drgrav<'s> {
    agents: Vec<AgentState>,
    spec: &'s ConsensusSpec,
    variant: DecentralizedVariant,
    alpha: f64,
    roots: Vec<f64>,
    ortho: OrthoSchedule,
    t: usize,
}

impl<'s> Drgrav<'s> {
    /// Every agent starts from the same `u0`. `alpha` is ignored by the
    /// DeEPCA variant.
    pub fn new(
        data: &[StiefelBasis],
        u0: &StiefelBasis,
        spec: &'s ConsensusSpec,
        variant: DecentralizedVariant,
        alpha: f64,
        ortho: OrthoSchedule,
    ) -> Result<Self> {
        let shape = check_collection(data)?;
        if u0.shape() != shape {
            return Err(GravError::DimensionMismatch {
                expected: shape,
                got: u0.shape(),
            });
        }
        if spec.m() != data.len() {
            return Err(GravError::InvalidParameter(format!(
                "consensus matrix has {} agents but {} data bases were given",
                spec.m(),
                data.len()
            )));
        }
        ortho.validate()?;
        let roots = match variant {
            DecentralizedVariant::Finite { horizon: 0 } => {
                return Err(GravError::InvalidParameter(
                    "finite variant needs a horizon T >= 1".into(),
                ))
            }
            DecentralizedVariant::Finite { horizon } => optimal_roots(horizon, alpha)?,
            DecentralizedVariant::Asymptotic => {
                chebyshev_coefficients(2, alpha)?;
                Vec::new()
            }
            DecentralizedVariant::Deepca => Vec::new(),
        };
        let (n, k) = shape;
        let agents = data
            .iter()
            .map(|basis| AgentState {
                data_basis: basis.clone(),
                u_curr: u0.matrix().clone(),
                u_prev: u0.matrix().clone(),
                y_curr: Matrix::zeros(n, k),
                y_prev: Matrix::zeros(n, k),
                z_hat: Matrix::zeros(n, k),
                s_cache: Matrix::identity(k, k),
            })
            .collect();
        Ok(Drgrav {
            agents,
            spec,
            variant,
            alpha,
            roots,
            ortho,
            t: 0,
        })
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn step(&mut self, ledger: &mut RoundLedger) -> Result<()> {
        let t = self.t + 1;
        ledger.begin_iteration(t);

        let (root, rec) = match self.variant {
            DecentralizedVariant::Finite { .. } => {
                let r = *self.roots.get(t - 1).ok_or_else(|| {
                    GravError::InvalidParameter(format!(
                        "finite horizon of {} iterations exhausted",
                        self.roots.len()
                    ))
                })?;
                (Some(r), None)
            }
            DecentralizedVariant::Asymptotic if t >= 2 => {
                (None, Some(chebyshev_coefficients(t, self.alpha)?))
            }
            _ => (None, None),
        };

        let mut tracked = Vec::with_capacity(self.agents.len());
        for (m, agent) in self.agents.iter_mut().enumerate() {
            let a = local_project(&agent.data_basis, &agent.u_curr)
                .map_err(|e| e.at_agent(m, t))?;
            let y = match (root, &rec) {
                (Some(r), _) => (a - &agent.u_curr * r) / (1.0 - r),
                (None, Some(rec)) => (a + &agent.u_curr * rec.b + &agent.u_prev * rec.c) * rec.a,
                (None, None) => a,
            };
            let z = if t == 1 {
                y.clone()
            } else {
                &agent.z_hat + &y - &agent.y_curr
            };
            agent.y_prev = std::mem::replace(&mut agent.y_curr, y);
            tracked.push(z);
        }

        let mixed = average_consensus(&tracked, self.spec, ledger)?;

        let rescale_prev = matches!(self.variant, DecentralizedVariant::Asymptotic);
        let due = self.ortho.is_due(t);
        for (m, (agent, z_hat)) in self.agents.iter_mut().zip(mixed).enumerate() {
            let u_next = if due {
                let (u, s) = stable_qr(&z_hat).map_err(|e| e.at_agent(m, t))?;
                agent.s_cache = s;
                u.into_matrix()
            } else {
                &z_hat * &agent.s_cache
            };
            let u_curr = std::mem::replace(&mut agent.u_curr, u_next);
            agent.u_prev = if rescale_prev {
                u_curr * &agent.s_cache
            } else {
                u_curr
            };
            agent.z_hat = z_hat;
        }
        self.t = t;
        Ok(())
    }

    /// Each agent's current span.
    pub fn points(&self) -> Result<Vec<GrassmannPoint>> {
        let t = self.t;
        let exact = t == 0 || self.ortho.is_due(t);
        self.agents
            .iter()
            .enumerate()
            .map(|(m, agent)| {
                let basis = if exact {
                    StiefelBasis::new(agent.u_curr.clone())?
                } else {
                    stable_qr(&agent.u_curr).map_err(|e| e.at_agent(m, t))?.0
                };
                Ok(GrassmannPoint::new(basis))
            })
            .collect()
    }

    /// `‖mean(Ẑ) - mean(Y)‖_F / ‖mean(Y)‖_F` after the latest step.
    pub fn tracking_gap(&self) -> f64 {
        let (n, k) = self.agents[0].u_curr.shape();
        let mut z_mean = Matrix::zeros(n, k);
        let mut y_mean = Matrix::zeros(n, k);
        for agent in &self.agents {
            z_mean += &agent.z_hat;
            y_mean += &agent.y_curr;
        }
        let scale = y_mean.norm();
        if scale == 0.0 {
            return (z_mean - y_mean).norm();
        }
        (z_mean - y_mean).norm() / scale
    }

    /// Runs `iterations` steps, recording MSE against `truth` and cumulative
    /// rounds after each. MSD is recorded when `with_msd` is set and there
    /// are at least two agents.
    pub fn run_recorded(
        &mut self,
        iterations: usize,
        truth: &GrassmannPoint,
        ledger: &mut RoundLedger,
        with_msd: bool,
    ) -> Result<Vec<ExperimentRecord>> {
        let mut records = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            self.step(ledger)?;
            let points = self.points()?;
            records.push(ExperimentRecord {
                iteration: self.t,
                comm_rounds: ledger.total_rounds(),
                mse: mse_metric(&points, truth)?,
                msd: if with_msd && points.len() >= 2 {
                    Some(msd_metric(&points)?)
                } else {
                    None
                },
            });
        }
        Ok(records)
    }
}

/// Finite DRGrAv: all `horizon` iterations.
pub fn drgrav_finite(
    data: &[StiefelBasis],
    u0: &StiefelBasis,
    spec: &ConsensusSpec,
    alpha: f64,
    horizon: usize,
    ortho: OrthoSchedule,
    ledger: &mut RoundLedger,
) -> Result<Vec<GrassmannPoint>> {
    let mut run = Drgrav::new(
        data,
        u0,
        spec,
        DecentralizedVariant::Finite { horizon },
        alpha,
        ortho,
    )?;
    for _ in 0..horizon {
        run.step(ledger)?;
    }
    run.points()
}

/// Asymptotic DRGrAv. Stops after `config.max_iter` iterations, or once every
/// agent's squared chordal change between iterations is below `config.tol`.
/// A finite `config.variant` runs the finite algorithm instead.
pub fn drgrav_asymptotic(
    data: &[StiefelBasis],
    u0: &StiefelBasis,
    spec: &ConsensusSpec,
    config: &RgravConfig,
    ledger: &mut RoundLedger,
) -> Result<Vec<GrassmannPoint>> {
    config.validate()?;
    let variant = match config.variant {
        Variant::Finite { horizon } => {
            return drgrav_finite(data, u0, spec, config.alpha, horizon, config.ortho, ledger)
        }
        Variant::Asymptotic => DecentralizedVariant::Asymptotic,
    };
    let mut run = Drgrav::new(data, u0, spec, variant, config.alpha, config.ortho)?;
    let mut current = run.points()?;
    for _ in 0..config.max_iter {
        run.step(ledger)?;
        let next = run.points()?;
        let change = current
            .iter()
            .zip(&next)
            .map(|(a, b)| residual_sq_one_sided(a.basis(), b.basis()))
            .fold(0.0, f64::max);
        current = next;
        if change < config.tol {
            break;
        }
    }
    Ok(current)
}

/// The DeEPCA baseline: tracked power iteration, orthonormalized every
/// iteration.
pub fn deepca_adapted(
    data: &[StiefelBasis],
    u0: &StiefelBasis,
    spec: &ConsensusSpec,
    iterations: usize,
    ledger: &mut RoundLedger,
) -> Result<Vec<GrassmannPoint>> {
    let mut run = Drgrav::new(
        data,
        u0,
        spec,
        DecentralizedVariant::Deepca,
        0.5,
        OrthoSchedule::Every(1),
    )?;
    for _ in 0..iterations {
        run.step(ledger)?;
    }
    run.points()
}

/// `(1/M) Σ d²(agent_m, truth)`.
pub fn mse_metric(points: &[GrassmannPoint], truth: &GrassmannPoint) -> Result<f64> {
    if points.is_empty() {
        return Err(GravError::EmptyCollection);
    }
    let mut total = 0.0;
    for p in points {
        total += chordal_distance_sq(p, truth)?;
    }
    Ok(total / points.len() as f64)
}

/// Mean of `d²` over all unordered agent pairs.
pub fn msd_metric(points: &[GrassmannPoint]) -> Result<f64> {
    let m = points.len();
    if m < 2 {
        return Err(GravError::InvalidParameter(format!(
            "disagreement needs at least 2 agents, got {m}"
        )));
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            total += chordal_distance_sq(&points[i], &points[j])?;
        }
    }
    Ok(2.0 * total / (m * (m - 1)) as f64)
}
