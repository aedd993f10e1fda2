use hetfb::config::db_to_linear;
use hetfb::figures::{self, fig1, fig5, fig5_specs, Fig1Params, Fig5Params, Fig7Params, FigureId, FigureOptions};
use hetfb::output::{describe_column, Table};
use hetfb::runner::run_perfect;
use hetfb_core::channel::{Cluster, CorrelatedChannelConfig, SystemConfig};
use hetfb_core::montecarlo::{ChannelModel, ExperimentSpec};

fn column(table: &Table, name: &str) -> usize {
    table.columns.iter().position(|c| *c == name).unwrap()
}

fn num(table: &Table, row: usize, name: &str) -> f64 {
    table.rows[row][column(table, name)].as_f64().unwrap()
}

#[test]
fn nested_populations_match_separate_runs() {
    let p = Fig1Params {
        subband_sizes: vec![1, 4],
        best_m: vec![2],
        users: vec![1, 3, 6],
        ..Fig1Params::default()
    };
    let opts = FigureOptions { trials: 300, seed: 13 };
    let table = &fig1(&p, opts).unwrap()[0];
    let cfg = CorrelatedChannelConfig::exponential(256, 8, 16, 4.0).unwrap();
    for row in 0..table.rows.len() {
        let eta = num(table, row, "eta") as usize;
        let m = num(table, row, "M") as usize;
        let k = num(table, row, "K") as usize;
        let sys = SystemConfig::homogeneous(32, eta, k, m, db_to_linear(10.0)).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::Correlated(cfg.clone()), sys, opts.trials, opts.seed);
        let separate = run_perfect(&spec).unwrap();
        assert_eq!(num(table, row, "sum_rate"), separate.mean, "eta {eta} M {m} K {k}");
        assert_eq!(num(table, row, "std_error"), separate.std_error);
    }
}

#[test]
fn joint_scheme_matches_the_simulator() {
    let p = Fig5Params {
        users: vec![8],
        best_m: vec![2],
        ..Fig5Params::default()
    };
    let opts = FigureOptions { trials: 300, seed: 2 };
    let table = &fig5(&p, opts).unwrap()[0];
    let clusters = [1, 2, 4, 8].iter().map(|&e| Cluster::new(e, 2)).collect();
    let sys = SystemConfig::new(64, clusters, 2, db_to_linear(10.0)).unwrap();
    let (mut joint, _) = fig5_specs(&sys, opts.seed).unwrap();
    joint.trials = opts.trials;
    let direct = run_perfect(&joint).unwrap();
    assert_eq!(table.rows[0][0].as_str(), Some("joint"));
    assert_eq!(num(table, 0, "sum_rate"), direct.mean);
}

#[test]
fn defaults_follow_the_published_parameters() {
    let f1 = Fig1Params::default();
    assert_eq!(
        (f1.subcarriers, f1.num_rbs, f1.taps, f1.delay_decay),
        (256, 32, 16, 4.0)
    );
    assert_eq!(f1.subband_sizes, [1, 2, 4]);
    assert_eq!(f1.best_m, [2, 4]);
    assert_eq!(*f1.users.last().unwrap(), 30);

    let f5 = Fig5Params::default();
    assert_eq!(f5.best_m, [2, 4]);
    assert!(f5.users.iter().all(|k| k % 4 == 0));

    let f7 = Fig7Params::default();
    assert_eq!(f7.users, 10);
    assert_eq!(f7.est_err_var.len(), 21);
    assert!((f7.est_err_var[20] - 0.1).abs() < 1e-12);
    assert_eq!(f7.alpha.len(), 19);
    assert!((f7.alpha[0] - 0.9).abs() < 1e-12 && (f7.alpha[18] - 0.99).abs() < 1e-12);

    let s6 = figures::fig6_system(20).unwrap();
    assert_eq!(s6.num_rbs(), 64);
    assert!((s6.snr() - 10.0).abs() < 1e-12);
}

#[test]
fn every_figure_emits_documented_columns() {
    let opts = FigureOptions { trials: 40, seed: 1 };
    for id in [
        FigureId::Fig1,
        FigureId::Fig3,
        FigureId::Fig4a,
        FigureId::Fig4b,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
    ] {
        let tables = figures::generate(id, opts).unwrap();
        assert!(!tables.is_empty());
        for t in &tables {
            assert!(!t.rows.is_empty(), "{id:?}");
            for c in &t.columns {
                assert!(describe_column(c).is_some(), "{id:?}: column {c} undocumented");
            }
            for row in &t.rows {
                assert_eq!(row.len(), t.columns.len());
            }
        }
    }
}
