use anyhow::{bail, ensure, Context, Result};
use gravnet::chebfilter::{eval_f_tilde, optimal_roots};
use gravnet::drgrav::{mse_metric, msd_metric, DecentralizedVariant, Drgrav, ExperimentRecord};
use gravnet::kmeans::{cluster_purity, grassmann_kmeans, Averaging, ClusteringConfig, CLUSTER_ALPHA};
use gravnet::manifold::{chordal_distance_sq, iam_ground_truth, sample_cluster, sample_uniform};
use gravnet::netsim::{default_rounds, ConsensusSpec, RoundLedger, Topology};
use gravnet::ops::OpCount;
use gravnet::rgrav::{OrthoSchedule, Rgrav};
use gravnet::{GrassmannPoint, StiefelBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::{AlgoArg, AveragingArg, ExperimentConfig, Mode, VariantArg};
use crate::dataset::{Dataset, Meta, FORMAT};

const DEFAULT_ALPHA: f64 = 0.15;
const DEFAULT_HORIZON: usize = 10;
const DEFAULT_TOL: f64 = 1e-14;
const CHEB_GRID: usize = 1000;

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    mode: Mode,
    version: &'static str,
    seed_from_env: bool,
    config: &'a ExperimentConfig,
    summary: T,
}

pub struct Invocation {
    pub mode: Mode,
    pub config: ExperimentConfig,
    pub seed_from_env: bool,
}

impl Invocation {
    fn alpha(&self) -> f64 {
        self.config.alpha.unwrap_or(if self.mode == Mode::Kmeans { CLUSTER_ALPHA } else { DEFAULT_ALPHA })
    }

    fn ortho(&self) -> OrthoSchedule {
        match self.config.ortho_every {
            0 => OrthoSchedule::Never,
            p => OrthoSchedule::Every(p),
        }
    }

    fn write_manifest<T: Serialize>(&self, dir: &Path, summary: T) -> Result<()> {
        let manifest = Manifest {
            mode: self.mode,
            version: gravnet::VERSION,
            seed_from_env: self.seed_from_env,
            config: &self.config,
            summary,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write manifest into {}", dir.display()))
    }
}

pub fn run(ctx: &Invocation) -> Result<()> {
    match ctx.mode {
        Mode::Gen => generate(ctx),
        Mode::Avg => centralized(ctx),
        Mode::Dravg => decentralized(ctx),
        Mode::Kmeans => clustering(ctx),
        Mode::ChebDump => cheb_dump(ctx, &mut std::io::stdout().lock()),
    }
}

/// Draws the planted centers, the bases (round-robin over centers) and a
/// start basis, in that order, from one seeded stream.
pub fn generate(ctx: &Invocation) -> Result<()> {
    let c = &ctx.config;
    let out = c.output_dir()?;
    ensure!(c.k >= 1 && c.m >= 1, "k and m must be positive");
    ensure!(c.n >= 2 * c.k, "need n >= 2k, got n={} k={}", c.n, c.k);
    ensure!(c.sigma.is_finite() && c.sigma >= 0.0, "sigma must be finite and nonnegative");
    let planted = c.clusters.unwrap_or(1);
    ensure!(planted >= 1 && planted <= c.m, "clusters must lie in 1..=m");

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let centers = (0..planted)
        .map(|_| sample_uniform(c.n, c.k, &mut rng))
        .collect::<gravnet::Result<Vec<_>>>()?;
    let mut bases = Vec::with_capacity(c.m);
    let mut labels = Vec::with_capacity(c.m);
    for i in 0..c.m {
        bases.push(sample_cluster(&centers[i % planted], c.sigma, &mut rng)?);
        labels.push(i % planted);
    }
    let start = sample_uniform(c.n, c.k, &mut rng)?;
    let (truth, _) = iam_ground_truth(&bases).context("ground truth is not unique for this draw")?;

    Dataset {
        meta: Meta {
            n: c.n,
            k: c.k,
            m: c.m,
            sigma: c.sigma,
            seed: c.seed,
            format: FORMAT.to_string(),
            clusters: c.clusters,
        },
        centers,
        ground_truth: truth.into_basis(),
        bases,
        start: Some(start),
        labels: c.clusters.map(|_| labels),
    }
    .write(out)
}

fn load(ctx: &Invocation) -> Result<(Dataset, StiefelBasis)> {
    let data = Dataset::read(ctx.config.input_dir()?)?;
    let u0 = match &data.start {
        Some(s) => s.clone(),
        None => sample_uniform(data.meta.n, data.meta.k, &mut ChaCha8Rng::seed_from_u64(ctx.config.seed))?,
    };
    Ok((data, u0))
}

fn write_records(dir: &Path, records: &[ExperimentRecord]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("results.csv"))
        .with_context(|| format!("cannot write results into {}", dir.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    algorithm: String,
    iterations: usize,
    final_mse: f64,
    comm_rounds: usize,
    rounds_per_iteration: Option<usize>,
    ops: Option<OpCount>,
}

pub fn centralized(ctx: &Invocation) -> Result<()> {
    let c = &ctx.config;
    let out = c.output_dir()?;
    let (data, u0) = load(ctx)?;
    let truth = GrassmannPoint::from(data.ground_truth.clone());
    let alpha = ctx.alpha();
    let horizon = c.horizon.unwrap_or(DEFAULT_HORIZON);
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let (mut run, label, limit, finite) = match (c.algo.unwrap_or(AlgoArg::Rgrav), c.variant) {
        (AlgoArg::Rgrav, VariantArg::Finite) => {
            (Rgrav::finite(&data.bases, &u0, alpha, horizon, ctx.ortho())?, "rgrav-finite", horizon, true)
        }
        (AlgoArg::Rgrav, VariantArg::Asymptotic) => {
            (Rgrav::asymptotic(&data.bases, &u0, alpha, ctx.ortho())?, "rgrav-asymptotic", c.max_iter, false)
        }
        (AlgoArg::Power, _) => (Rgrav::power(&data.bases, &u0, ctx.ortho())?, "power", c.max_iter, false),
        (other, _) => bail!("avg runs rgrav or power, not {other:?}; use dravg for decentralized algorithms"),
    };

    let mut records = Vec::new();
    let mut previous: Option<GrassmannPoint> = None;
    for _ in 0..limit {
        run.step()?;
        let point = run.point()?;
        records.push(ExperimentRecord {
            iteration: run.iteration(),
            comm_rounds: 0,
            mse: chordal_distance_sq(&point, &truth)?,
            msd: None,
        });
        if !finite {
            if let Some(prev) = &previous {
                if chordal_distance_sq(prev, &point)? < tol {
                    break;
                }
            }
        }
        previous = Some(point);
    }
    write_records(out, &records)?;
    ctx.write_manifest(
        out,
        RunSummary {
            algorithm: label.to_string(),
            iterations: records.len(),
            final_mse: records.last().map_or(f64::NAN, |r| r.mse),
            comm_rounds: 0,
            rounds_per_iteration: None,
            ops: Some(run.ops()),
        },
    )
}

pub fn parse_topology(text: &str, agents: usize) -> Result<Topology> {
    let topo = match text {
        "hypercube" => Topology::hypercube(agents)?,
        "cycle" => Topology::cycle(agents)?,
        "complete" => Topology::complete(agents)?,
        other => match other.strip_prefix("custom:") {
            Some(path) => {
                let edges = fs::read_to_string(path).with_context(|| format!("cannot read edge file {path}"))?;
                let topo = Topology::from_edge_list(&edges).with_context(|| format!("invalid edge file {path}"))?;
                ensure!(topo.m() == agents, "edge file {path} describes {} agents, dataset has {agents}", topo.m());
                topo
            }
            None => bail!("unknown topology {other:?} (expected hypercube, cycle, complete or custom:<file>)"),
        },
    };
    Ok(topo)
}

pub fn decentralized(ctx: &Invocation) -> Result<()> {
    let c = &ctx.config;
    let out = c.output_dir()?;
    let (data, u0) = load(ctx)?;
    let truth = GrassmannPoint::from(data.ground_truth.clone());
    let topo = parse_topology(&c.topology, data.meta.m)?;
    let rounds = c.rounds.unwrap_or_else(|| default_rounds(topo.kind()));
    let spec = ConsensusSpec::for_topology(&topo, rounds)?;
    let horizon = c.horizon.unwrap_or(DEFAULT_HORIZON);
    let tol = c.tol.unwrap_or(DEFAULT_TOL);
    let (variant, label, limit) = match (c.algo.unwrap_or(AlgoArg::Drgrav), c.variant) {
        (AlgoArg::Drgrav, VariantArg::Finite) => (DecentralizedVariant::Finite { horizon }, "drgrav-finite", horizon),
        (AlgoArg::Drgrav, VariantArg::Asymptotic) => (DecentralizedVariant::Asymptotic, "drgrav-asymptotic", c.max_iter),
        (AlgoArg::Deepca, _) => (DecentralizedVariant::Deepca, "deepca", c.max_iter),
        (other, _) => bail!("dravg runs drgrav or deepca, not {other:?}; use avg for centralized algorithms"),
    };
    let ortho = if matches!(variant, DecentralizedVariant::Deepca) { OrthoSchedule::Every(1) } else { ctx.ortho() };
    let mut run = Drgrav::new(&data.bases, &u0, &spec, variant, ctx.alpha(), ortho)?;
    let mut ledger = RoundLedger::new();
    let mut records = Vec::new();
    let mut previous: Option<Vec<GrassmannPoint>> = None;
    for _ in 0..limit {
        run.step(&mut ledger)?;
        let points = run.points()?;
        records.push(ExperimentRecord {
            iteration: run.iteration(),
            comm_rounds: ledger.total_rounds(),
            mse: mse_metric(&points, &truth)?,
            msd: if points.len() >= 2 { Some(msd_metric(&points)?) } else { None },
        });
        let settled = match &previous {
            Some(prev) if !matches!(variant, DecentralizedVariant::Finite { .. }) => {
                let mut worst: f64 = 0.0;
                for (a, b) in prev.iter().zip(&points) {
                    worst = worst.max(chordal_distance_sq(a, b)?);
                }
                worst < tol
            }
            _ => false,
        };
        if settled {
            break;
        }
        previous = Some(points);
    }
    write_records(out, &records)?;
    ctx.write_manifest(
        out,
        RunSummary {
            algorithm: label.to_string(),
            iterations: records.len(),
            final_mse: records.last().map_or(f64::NAN, |r| r.mse),
            comm_rounds: ledger.total_rounds(),
            rounds_per_iteration: Some(rounds),
            ops: None,
        },
    )
}

#[derive(Serialize)]
struct ClusteringSummary {
    averaging: &'static str,
    clusters: usize,
    purity: f64,
    iterations: usize,
    converged: bool,
    averaging_calls: usize,
    ops: OpCount,
}

pub fn clustering(ctx: &Invocation) -> Result<()> {
    let c = &ctx.config;
    let out = c.output_dir()?;
    let data = Dataset::read(c.input_dir()?)?;
    let labels = data.labels.as_ref().context("dataset has no labels.csv; generate it with --clusters")?;
    let clusters = c.clusters.unwrap_or_else(|| labels.iter().max().map_or(1, |l| l + 1));
    let averaging = match c.averaging {
        AveragingArg::Rgrav => Averaging::rgrav(ctx.alpha()),
        AveragingArg::Power => Averaging::power(),
        AveragingArg::Frechet => Averaging::frechet(),
        AveragingArg::Flag => Averaging::Flag,
    };
    let mut config = ClusteringConfig::new(clusters, averaging, c.seed);
    config.max_iter = c.max_iter;
    if let Some(tol) = c.tol {
        config.tol = tol;
    }
    let result = grassmann_kmeans(&data.bases, &config)?;
    let purity = cluster_purity(&result.assignments, labels)?;

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("assignments.csv"))?;
    w.write_record(["point", "label", "cluster"])?;
    for (i, (cluster, label)) in result.assignments.iter().zip(labels).enumerate() {
        w.write_record([i.to_string(), label.to_string(), cluster.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("averaging_calls.csv"))?;
    w.write_record(["call", "matmuls", "qr", "svd", "eig"])?;
    for (i, ops) in result.per_call_ops.iter().enumerate() {
        w.write_record([i, ops.matmuls as usize, ops.qr as usize, ops.svd as usize, ops.eig as usize].map(|v| v.to_string()))?;
    }
    w.flush()?;
    ctx.write_manifest(
        out,
        ClusteringSummary {
            averaging: averaging.name(),
            clusters,
            purity,
            iterations: result.iterations,
            converged: result.converged,
            averaging_calls: result.averaging_calls,
            ops: result.ops,
        },
    )
}

/// `λ`, the first `t` factors of the degree-`T` filter, the recurrence
/// filter of degree `t`, and `λ^t`, on a uniform grid of `[0, 1]`.
pub fn cheb_dump(ctx: &Invocation, stdout: &mut dyn Write) -> Result<()> {
    let c = &ctx.config;
    let step = c.step.or(c.horizon).unwrap_or(DEFAULT_HORIZON);
    let degree = c.horizon.unwrap_or(step);
    ensure!(step <= degree, "--t ({step}) cannot exceed --T ({degree})");
    let alpha = ctx.alpha();
    let roots = optimal_roots(degree, alpha)?;
    let mut text = String::from("lambda,f_star,f_tilde,power\n");
    for i in 0..=CHEB_GRID {
        let lambda = i as f64 / CHEB_GRID as f64;
        let partial = roots[..step].iter().fold(1.0, |acc, &r| acc * (lambda - r) / (1.0 - r));
        let tilde = eval_f_tilde(step, alpha, lambda);
        let power = lambda.powi(step as i32);
        // Adding +0.0 folds a signed zero into +0.0.
        let [partial, tilde, power] = [partial + 0.0, tilde + 0.0, power + 0.0];
        text.push_str(&format!("{lambda:?},{partial:?},{tilde:?},{power:?}\n"));
    }
    match &c.out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => stdout.write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}
