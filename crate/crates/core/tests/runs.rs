use recscale_core::dlrm::{count_flops, count_params, DlrmConfig, Interaction, OptimizerConfig, Scheme, TableConfig};
use recscale_core::runs::{build_cross_grid, build_grid, execute_spec, RunSpec, Status};
use recscale_core::synthgen::{build_teacher, FeatureSchema, SparseTableSpec, TeacherSpec};
use recscale_core::trainer::TrainConfig;
use recscale_core::Error;

fn base() -> DlrmConfig {
    DlrmConfig {
        num_dense: 3,
        tables: vec![TableConfig { rows: 64, dim: 4 }, TableConfig { rows: 32, dim: 4 }],
        bottom_widths: vec![8, 4],
        overarch_widths: vec![8, 1],
        interaction: Interaction::Concat,
        scheme_tag: None,
    }
}

#[test]
fn grid_cardinality_and_order() {
    let grid = build_grid(&base(), Scheme::Vertical, &[0.5, 1.0, 2.0], &[100, 200, 400, 800], &[1, 2]).unwrap();
    assert_eq!(grid.specs.len(), 24);
    assert_eq!((grid.specs[0].factor, grid.specs[0].data_size, grid.specs[0].master_seed), (0.5, 100, 1));
    assert_eq!((grid.specs[1].factor, grid.specs[1].data_size, grid.specs[1].master_seed), (0.5, 100, 2));
    assert_eq!(grid.specs[23].factor, 2.0);
    let again = build_grid(&base(), Scheme::Vertical, &[0.5, 1.0, 2.0], &[100, 200, 400, 800], &[1, 2]).unwrap();
    assert_eq!(grid, again);
}

#[test]
fn duplicates_are_dropped_and_reported() {
    let grid = build_grid(&base(), Scheme::Overarch, &[1.0, 2.0, 1.0], &[100, 100], &[7]).unwrap();
    assert_eq!(grid.specs.len(), 2);
    assert_eq!(grid.duplicate_factors, vec![1.0]);
    assert_eq!(grid.duplicate_data_sizes, vec![100]);
}

#[test]
fn invalid_factor_is_named() {
    let err = build_grid(&base(), Scheme::Horizontal, &[4.0, 6.5], &[100], &[1]).unwrap_err();
    match err {
        Error::Config { reason, .. } => assert!(reason.contains("6.5"), "{reason}"),
        other => panic!("{other:?}"),
    }
    assert!(build_grid(&base(), Scheme::Mlp, &[], &[100], &[1]).is_err());
}

#[test]
fn run_ids_distinguish_every_field() {
    let b = base();
    let a = RunSpec::new(&b, Scheme::Vertical, 2.0, 1.0, 100, 1);
    assert_eq!(a.run_id, RunSpec::new(&b, Scheme::Vertical, 2.0, 1.0, 100, 1).run_id);
    assert_eq!(a.run_id.len(), 32);
    let others = [
        RunSpec::new(&b, Scheme::Overarch, 2.0, 1.0, 100, 1),
        RunSpec::new(&b, Scheme::Vertical, 2.5, 1.0, 100, 1),
        RunSpec::new(&b, Scheme::Vertical, 2.0, 0.5, 100, 1),
        RunSpec::new(&b, Scheme::Vertical, 2.0, 1.0, 101, 1),
        RunSpec::new(&b, Scheme::Vertical, 2.0, 1.0, 100, 2),
    ];
    for o in &others {
        assert_ne!(a.run_id, o.run_id);
    }
}

#[test]
fn cross_grid_applies_vertical_first() {
    let grid = build_cross_grid(&base(), &[0.5, 2.0], Scheme::Horizontal, &[2.0, 8.0], &[50], &[0]).unwrap();
    assert_eq!(grid.specs.len(), 4);
    let cfg = grid.specs[1].config(&base()).unwrap();
    assert_eq!(cfg.tables[0].rows, 32);
    assert!(cfg.tables.iter().all(|t| t.dim == 8));
}

#[test]
fn executed_record_satisfies_identities() {
    let schema = FeatureSchema {
        num_dense: 3,
        tables: vec![
            SparseTableSpec { vocab_size: 100, hots: 1, zipf_exponent: 1.0 },
            SparseTableSpec { vocab_size: 50, hots: 2, zipf_exponent: 1.0 },
        ],
    };
    let teacher =
        build_teacher(&schema, &TeacherSpec { seed: 1, target_ctr: 0.3, weight_scale: 1.5, test_zipf_shift: 0.0 })
            .unwrap();
    let spec = RunSpec::new(&base(), Scheme::Mlp, 2.0, 1.0, 500, 4);
    let train = TrainConfig { batch_size: 32, eval_size: 1000 };
    let rec = execute_spec(&spec, &base(), &teacher, &OptimizerConfig::default(), &train).unwrap();
    rec.validate().unwrap();
    assert_eq!(rec.status, Status::Ok);
    let cfg = spec.config(&base()).unwrap();
    assert_eq!(rec.p_total, count_params(&cfg).unwrap().total);
    assert_eq!(rec.compute, count_flops(&cfg).unwrap().train_per_example * 500);
    assert_eq!(rec.spec(), spec);
    let again = execute_spec(&spec, &base(), &teacher, &OptimizerConfig::default(), &train).unwrap();
    assert_eq!(rec, again);

    let bad_lr = OptimizerConfig { lr: -1.0, eps: 1e-8 };
    let failed = execute_spec(&spec, &base(), &teacher, &bad_lr, &train).unwrap();
    assert_eq!(failed.status, Status::Failed);
    assert!(failed.ne_test.is_none() && failed.error.is_some());
    failed.validate().unwrap();
}
