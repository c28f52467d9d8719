//! PODI against the Poisson testbed: interpolatory at the training nodes and
//! accurate at a held-out parameter, with the full-order solve as the oracle.

use morpipe::domain::BoxDomain;
use morpipe::numerics::{RankSpec, Vector};
use morpipe::pipeline::{run_offline, BuiltinSolver, SamplingMethod, SamplingPlan, SolverAdapter};
use morpipe::podi::{build_basis, predict, InterpolatorSpec, RbfKernel};
use morpipe::testbeds::{poisson_solve, PoissonConfig, QoiKind};

fn poisson_cfg() -> PoissonConfig {
    PoissonConfig {
        grid: 32,
        probe: (0.55, 0.45),
        source_width: 0.15,
        qoi: QoiKind::Probe,
    }
}

fn twenty_node_db() -> morpipe::podi::SnapshotDatabase {
    let plan = SamplingPlan {
        box_domain: BoxDomain::new(vec![0.25, 0.25], vec![0.75, 0.75]).unwrap(),
        count: 20,
        method: SamplingMethod::Lhs,
        seed: 2024,
    };
    let adapter = SolverAdapter::Builtin(BuiltinSolver::Poisson(poisson_cfg()));
    run_offline(&plan, &adapter, 2).unwrap()
}

#[test]
fn heldout_field_error_below_five_percent() {
    let db = twenty_node_db();
    let basis = build_basis(&db, RankSpec::Full).unwrap();
    let held_out = Vector::from_vec(vec![0.52, 0.48]);
    assert!(!db.contains_parameter(&held_out));

    let (truth, _) = poisson_solve(&poisson_cfg(), &held_out).unwrap();
    let pred = predict(
        &db,
        &basis,
        &held_out,
        InterpolatorSpec::Rbf {
            kernel: RbfKernel::ThinPlate,
            shape: 1.0,
        },
    )
    .unwrap();
    let err = (pred - &truth).norm() / truth.norm();
    assert!(err <= 5e-2, "held-out relative error {err:e}");
}

#[test]
fn training_nodes_reproduce_with_all_interpolators() {
    let db = twenty_node_db();
    let basis = build_basis(&db, RankSpec::Full).unwrap();
    let specs = [
        InterpolatorSpec::Nearest,
        InterpolatorSpec::Idw { power: 2.0 },
        InterpolatorSpec::Rbf {
            kernel: RbfKernel::ThinPlate,
            shape: 1.0,
        },
    ];
    for spec in specs {
        for j in 0..db.len() {
            let mu = db.parameter(j);
            let pred = predict(&db, &basis, &mu, spec).unwrap();
            let truth = db.snapshots.column(j).into_owned();
            let err = (pred - &truth).norm() / truth.norm();
            assert!(err <= 1e-8, "{spec:?} node {j}: {err:e}");
        }
    }
}
