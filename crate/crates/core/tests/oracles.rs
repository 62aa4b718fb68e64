//! Cross-checks of the iterative averaging routines against dense
//! reference computations and against each other.

mod common;

use common::*;
use gravnet::drgrav::{deepca_adapted, mse_metric, msd_metric, DecentralizedVariant, Drgrav};
use gravnet::manifold::{chordal_distance, chordal_distance_sq, iam_ground_truth};
use gravnet::netsim::{ConsensusSpec, RoundLedger, Topology};
use gravnet::rgrav::{power_method, rgrav_finite, OrthoSchedule, Rgrav};
use gravnet::StiefelBasis;
use std::f64::consts::FRAC_PI_4;

#[test]
fn finite_iterates_follow_partial_products() {
    for seed in 0..10 {
        let s = synthetic(20, 3, 8, FRAC_PI_4, seed);
        let p = dense_projector(&s.data);
        let horizon = 6;
        let mut run = Rgrav::finite(&s.data, &s.u0, 0.15, horizon, OrthoSchedule::Never).unwrap();
        for t in 1..=horizon {
            run.step().unwrap();
            let dense = dense_partial_product(&p, s.u0.matrix(), 0.15, horizon, t);
            let d = chordal_distance(&run.point().unwrap(), &span(&dense)).unwrap();
            assert!(d < 1e-10, "seed {seed}, t {t}: d = {d:e}");
        }
    }
}

#[test]
fn power_method_matches_dense_powers() {
    for seed in 0..10 {
        let s = synthetic(20, 3, 8, FRAC_PI_4, seed);
        let p = dense_projector(&s.data);
        let mut x = s.u0.matrix().clone();
        for t in 1..=8 {
            x = &p * &x;
            let out = power_method(&s.data, &s.u0, t).unwrap();
            let d = chordal_distance(&out.point, &span(&x)).unwrap();
            assert!(d < 1e-10, "seed {seed}, t {t}: d = {d:e}");
        }
    }
}

#[test]
fn cached_factor_tracks_orthonormalized_run() {
    let s = synthetic(40, 5, 16, FRAC_PI_4, 3);
    let mut every = Rgrav::asymptotic(&s.data, &s.u0, 0.15, OrthoSchedule::Every(1)).unwrap();
    let mut second = Rgrav::asymptotic(&s.data, &s.u0, 0.15, OrthoSchedule::Every(2)).unwrap();
    for t in 1..=12 {
        every.step().unwrap();
        second.step().unwrap();
        let d = chordal_distance(&every.point().unwrap(), &second.point().unwrap()).unwrap();
        assert!(d < 1e-8, "t {t}: d = {d:e}");
    }
}

#[test]
fn input_rotations_leave_iterates_unchanged() {
    let s = synthetic(24, 4, 10, FRAC_PI_4, 4);
    let rotated: Vec<StiefelBasis> = s
        .data
        .iter()
        .enumerate()
        .map(|(i, u)| u.rotate(&random_orthogonal(4, 100 + i as u64)).unwrap())
        .collect();
    let mut a = Rgrav::asymptotic(&s.data, &s.u0, 0.2, OrthoSchedule::Every(1)).unwrap();
    let mut b = Rgrav::asymptotic(&rotated, &s.u0, 0.2, OrthoSchedule::Every(1)).unwrap();
    for t in 1..=10 {
        a.step().unwrap();
        b.step().unwrap();
        let d = chordal_distance(&a.point().unwrap(), &b.point().unwrap()).unwrap();
        assert!(d < 1e-12, "t {t}: d = {d:e}");
    }

    let spec = ConsensusSpec::for_topology(&Topology::cycle(10).unwrap(), 4).unwrap();
    let mut da = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Asymptotic, 0.2, OrthoSchedule::Every(1)).unwrap();
    let mut db = Drgrav::new(&rotated, &s.u0, &spec, DecentralizedVariant::Asymptotic, 0.2, OrthoSchedule::Every(1)).unwrap();
    for _ in 0..6 {
        da.step(&mut RoundLedger::new()).unwrap();
        db.step(&mut RoundLedger::new()).unwrap();
        for (p, q) in da.points().unwrap().iter().zip(db.points().unwrap().iter()) {
            assert!(chordal_distance(p, q).unwrap() < 1e-12);
        }
    }
}

#[test]
fn exact_consensus_collapses_every_variant() {
    let spec = ConsensusSpec::for_topology(&Topology::complete(2).unwrap(), 1).unwrap();
    for seed in 0..5 {
        let s = synthetic(16, 3, 2, FRAC_PI_4, seed);
        let mut ledger = RoundLedger::new();
        let mut finite = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Finite { horizon: 8 }, 0.2, OrthoSchedule::Every(1)).unwrap();
        let mut deepca = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Deepca, 0.2, OrthoSchedule::Every(1)).unwrap();
        let mut cen_finite = Rgrav::finite(&s.data, &s.u0, 0.2, 8, OrthoSchedule::Every(1)).unwrap();
        let mut cen_power = Rgrav::power(&s.data, &s.u0, OrthoSchedule::Every(1)).unwrap();
        for t in 1..=8 {
            finite.step(&mut ledger).unwrap();
            deepca.step(&mut ledger).unwrap();
            cen_finite.step().unwrap();
            cen_power.step().unwrap();
            let (cf, cp) = (cen_finite.point().unwrap(), cen_power.point().unwrap());
            for p in finite.points().unwrap() {
                assert!(chordal_distance(&p, &cf).unwrap() < 1e-12, "finite seed {seed} t {t}");
            }
            for p in deepca.points().unwrap() {
                assert!(chordal_distance(&p, &cp).unwrap() < 1e-12, "deepca seed {seed} t {t}");
            }
        }
    }
}

#[test]
fn single_agent_reduces_to_centralized() {
    let s = synthetic(16, 3, 1, FRAC_PI_4, 9);
    let spec = ConsensusSpec::new(gravnet::Matrix::identity(1, 1), 1).unwrap();
    let mut dec = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Asymptotic, 0.15, OrthoSchedule::Every(1)).unwrap();
    let mut cen = Rgrav::asymptotic(&s.data, &s.u0, 0.15, OrthoSchedule::Every(1)).unwrap();
    for _ in 0..5 {
        dec.step(&mut RoundLedger::new()).unwrap();
        cen.step().unwrap();
        let d = chordal_distance(&dec.points().unwrap()[0], &cen.point().unwrap()).unwrap();
        assert!(d < 1e-12);
    }
    let pts = deepca_adapted(&s.data, &s.u0, &spec, 2, &mut RoundLedger::new()).unwrap();
    let target: gravnet::GrassmannPoint = s.data[0].clone().into();
    assert!(chordal_distance(&pts[0], &target).unwrap() < 1e-12);
}

#[test]
fn finite_horizon_reaches_ground_truth_on_reference_data() {
    let s = synthetic(150, 30, 64, FRAC_PI_4, 7);
    let (truth, _) = iam_ground_truth(&s.data).unwrap();
    let out = rgrav_finite(&s.data, &s.u0, 0.15, 10, OrthoSchedule::Every(1)).unwrap();
    let d2 = chordal_distance_sq(&out.point, &truth).unwrap();
    assert!(d2 <= 1e-12, "d^2 = {d2:e}");
}

#[test]
fn asymptotic_error_is_monotone_and_beats_power() {
    let s = synthetic(150, 30, 64, FRAC_PI_4, 7);
    let (truth, _) = iam_ground_truth(&s.data).unwrap();
    let mut cheb = Rgrav::asymptotic(&s.data, &s.u0, 0.15, OrthoSchedule::Every(1)).unwrap();
    let mut power = Rgrav::power(&s.data, &s.u0, OrthoSchedule::Every(1)).unwrap();
    let (mut cheb_hit, mut power_hit) = (None, None);
    let mut last = f64::INFINITY;
    for t in 1..=60 {
        if cheb_hit.is_none() {
            cheb.step().unwrap();
            let e = chordal_distance_sq(&cheb.point().unwrap(), &truth).unwrap();
            if t >= 2 {
                assert!(e <= last * (1.0 + 1e-9) || e < 1e-13, "t {t}: {e:e} after {last:e}");
            }
            last = e;
            if e <= 1e-9 {
                cheb_hit = Some(t);
            }
        }
        if power_hit.is_none() {
            power.step().unwrap();
            if chordal_distance_sq(&power.point().unwrap(), &truth).unwrap() <= 1e-9 {
                power_hit = Some(t);
            }
        }
    }
    let (c, p) = (cheb_hit.unwrap(), power_hit.unwrap());
    assert!(p > c, "power {p} vs chebyshev {c}");
}

#[test]
fn more_rounds_do_not_hurt() {
    let s = synthetic(60, 8, 16, FRAC_PI_4, 11);
    let (truth, _) = iam_ground_truth(&s.data).unwrap();
    let topo = Topology::hypercube(16).unwrap();
    let final_mse = |rounds| {
        let spec = ConsensusSpec::for_topology(&topo, rounds).unwrap();
        let mut run = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Asymptotic, 0.15, OrthoSchedule::Every(1)).unwrap();
        for _ in 0..8 {
            run.step(&mut RoundLedger::new()).unwrap();
        }
        mse_metric(&run.points().unwrap(), &truth).unwrap()
    };
    assert!(final_mse(10) <= final_mse(3));
}

#[test]
fn disagreement_bounded_by_error() {
    let s = synthetic(30, 4, 8, FRAC_PI_4, 12);
    let (truth, _) = iam_ground_truth(&s.data).unwrap();
    let spec = ConsensusSpec::for_topology(&Topology::cycle(8).unwrap(), 2).unwrap();
    let mut run = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Asymptotic, 0.15, OrthoSchedule::Every(1)).unwrap();
    let mut ledger = RoundLedger::new();
    for record in run.run_recorded(8, &truth, &mut ledger, true).unwrap() {
        let msd = record.msd.unwrap();
        assert!(msd <= 4.0 * record.mse + 1e-14, "{record:?}");
    }
    let points = run.points().unwrap();
    for a in &points {
        for b in &points {
            let lhs = chordal_distance(a, b).unwrap();
            let rhs = chordal_distance(a, &truth).unwrap() + chordal_distance(&truth, b).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }
    assert!(msd_metric(&points).is_ok());
}

#[test]
fn comm_rounds_strictly_increase() {
    let s = synthetic(20, 3, 8, FRAC_PI_4, 13);
    let (truth, _) = iam_ground_truth(&s.data).unwrap();
    let spec = ConsensusSpec::for_topology(&Topology::hypercube(8).unwrap(), 10).unwrap();
    let mut run = Drgrav::new(&s.data, &s.u0, &spec, DecentralizedVariant::Finite { horizon: 5 }, 0.15, OrthoSchedule::Every(1)).unwrap();
    let mut ledger = RoundLedger::new();
    let records = run.run_recorded(5, &truth, &mut ledger, false).unwrap();
    for pair in records.windows(2) {
        assert!(pair[1].comm_rounds > pair[0].comm_rounds);
    }
    assert_eq!(records.last().unwrap().comm_rounds, 50);
    assert_eq!(ledger.per_iteration().len(), 5);
}
