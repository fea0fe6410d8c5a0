//! Library-level runs through several modules at once: train, export,
//! slice, and compare against the grid oracle.

use std::collections::BTreeMap;

use minsurf::autodiff::ScalarField;
use minsurf::boundary::{lookup_builtin, AnalyticField, BoundaryFn};
use minsurf::interface::{evaluate_network_slice, evaluate_slice, export_history_json, SliceGrid, SliceSpec};
use minsurf::network::{init_network, Activation, LayerSpec};
use minsurf::oracle_fdm::{compare_model_to_grid, solve_fdm, FdmOptions};
use minsurf::sampling::BoxDomain;
use minsurf::trainer::{BoundarySpec, ExperimentConfig, Trainer, TrainingHistory};

fn small(builtin: &str, d: usize, epochs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(match d {
        2 => "2d-2",
        3 => "3d-2",
        _ => "4d-1",
    })
    .unwrap();
    c.boundary = BoundarySpec::builtin(builtin);
    c.epochs = epochs;
    c.n_interior = 50;
    c.per_edge = 8;
    c.log_every = 4;
    c
}

#[test]
fn history_exports_are_byte_identical_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for run in 0..2 {
        let mut t = Trainer::new(small("radial_sine_2d", 2, 15)).unwrap();
        t.run().unwrap();
        let path = dir.path().join(format!("h{run}.json"));
        export_history_json(t.history(), &path).unwrap();
        paths.push(path);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());

    let h = TrainingHistory::load(&paths[0]).unwrap();
    assert!(h.records.windows(2).all(|w| w[0].epoch < w[1].epoch));
    for r in &h.records {
        let expect = 1.0 * r.interior + 3.0 * r.boundary;
        assert!((r.total - expect).abs() <= 1e-12 * expect.abs());
    }
}

#[test]
fn empty_history_is_not_exported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(export_history_json(&TrainingHistory::new(), &dir.path().join("h.json")).is_err());
}

#[test]
fn edge_slice_tracks_the_frame() {
    // Report, not a threshold: the edge misfit of a slice pinned to a frame
    // edge is of the order of the trained boundary term.
    let mut t = Trainer::new(small("radial_sine_2d", 2, 40)).unwrap();
    t.run().unwrap();
    let g = lookup_builtin("radial_sine_2d").unwrap();
    let grid = evaluate_network_slice(t.params(), t.domain(), &SliceSpec::new((0, 1)).with_resolution(21)).unwrap();
    // Row i = 0 is the edge x1 = 0.
    let misfit: f64 = grid
        .coords_b
        .iter()
        .enumerate()
        .map(|(j, &y)| (grid.value(0, j) - g.eval(&[0.0, y]).unwrap()).powi(2))
        .sum::<f64>()
        / grid.coords_b.len() as f64;
    let trained = t.loss().unwrap().boundary;
    println!("edge x1=0: mean squared misfit {misfit:.4e}, trained boundary term {trained:.4e}");
    assert!(misfit.is_finite());
}

#[test]
fn face_slices_of_closed_forms_are_the_frame() {
    let u = lookup_builtin("trig_sum_3d").unwrap().analytic().unwrap().field();
    let cube = BoxDomain::unit(3).unwrap();
    let g = lookup_builtin("trig_sum_3d").unwrap();
    let grid = evaluate_slice(&u, &cube, &SliceSpec::new((1, 2)).fix(0, 0.0).with_resolution(9)).unwrap();
    for (i, &a) in grid.coords_a.iter().enumerate() {
        for (j, &b) in grid.coords_b.iter().enumerate() {
            assert_eq!(grid.value(i, j), g.eval(&[0.0, a, b]).unwrap());
        }
    }
    // 4-D: both x1 and x4 pinned.
    let u4 = lookup_builtin("radial_sine_4d").unwrap().analytic().unwrap().field();
    let spec = SliceSpec::new((1, 2)).fix(0, 0.0).fix(3, 0.0).with_resolution(5);
    let grid = evaluate_slice(&u4, &BoxDomain::unit(4).unwrap(), &spec).unwrap();
    assert_eq!(grid.axis_names(), ("x2".into(), "x3".into()));
    assert!(grid.values.iter().all(|v| v.abs() <= 2.0));
}

#[test]
fn csv_round_trip_of_a_network_slice() {
    let net = init_network(3, &[LayerSpec::new(6, Activation::Tanh), LayerSpec::new(1, Activation::Identity)], 4).unwrap();
    let cube = BoxDomain::unit(3).unwrap();
    let grid = evaluate_network_slice(&net, &cube, &SliceSpec::new((0, 2)).fix(1, 0.25).with_resolution(11)).unwrap();
    let back = SliceGrid::from_csv(&grid.to_csv()).unwrap();
    assert_eq!(back.coords_a, grid.coords_a);
    assert_eq!(back.coords_b, grid.coords_b);
    for (a, b) in back.values.iter().zip(&grid.values) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
    }
    // The network slice equals point-wise evaluation.
    for (k, v) in grid.values.iter().enumerate() {
        let (i, j) = (k / 11, k % 11);
        let x = [grid.coords_a[i], 0.25, grid.coords_b[j]];
        assert!((net.value(&x).unwrap() - v).abs() < 1e-13);
    }
}

#[test]
fn plane_model_matches_the_plane_grid() {
    let plane = BoundaryFn::expression("0.5 * x1 - 2 * x2 + 1", 2).unwrap();
    let square = BoxDomain::unit(2).unwrap();
    let opts = FdmOptions { tol: 1e-14, ..FdmOptions::default() };
    let grid = solve_fdm(&plane, &square, 17, opts).unwrap();
    let model = AnalyticField::parse("0.5 * x1 - 2 * x2 + 1", 2).unwrap().field();
    let stats = compare_model_to_grid(&model, &square, &grid).unwrap();
    assert!(stats.max_abs < 1e-12, "{stats:?}");
    assert_eq!(stats.nodes, 15 * 15);

    // A model on a smaller box cannot be compared.
    let inner = BoxDomain::cube(2, 0.1, 0.9).unwrap();
    assert!(compare_model_to_grid(&model, &inner, &grid).is_err());
}

#[test]
fn piecewise_frame_trains_from_a_config_file() {
    let text = r#"
        d = 2
        learning_rate = 0.003
        epochs = 6
        w_bdry = 5.0
        n_interior = 30
        per_edge = 5
        log_every = 2

        [boundary.pieces]
        "x1=0" = "cos(2*pi*x2) + 1"
        "x1=1" = "1"
        "x2=0" = "2 - x1"
        "x2=1" = "1"
    "#;
    let config = ExperimentConfig::from_toml(text).unwrap();
    let mut sides = BTreeMap::new();
    for (k, v) in [("x1=0", "cos(2*pi*x2) + 1"), ("x1=1", "1"), ("x2=0", "2 - x1"), ("x2=1", "1")] {
        sides.insert(k.to_string(), v.to_string());
    }
    let g = BoundaryFn::piecewise(&sides, 2).unwrap();
    let mut t = Trainer::new(config).unwrap();
    for (k, x) in t.samples().boundary.chunks(2).enumerate() {
        assert_eq!(t.samples().boundary_values[k], g.eval(x).unwrap());
    }
    t.run().unwrap();
    assert_eq!(t.history().last().unwrap().epoch, 5);
}

#[test]
fn higher_dimensional_smoke_runs() {
    for (name, d) in [("abs_cos_3d", 3), ("radial_sine_4d", 4)] {
        let mut t = Trainer::new(small(name, d, 3)).unwrap();
        t.run().unwrap();
        assert!(t.loss().unwrap().is_finite());
        assert_eq!(t.samples().n_boundary(), 8 * d * (1 << (d - 1)));
    }
}
