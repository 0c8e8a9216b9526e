use std::path::Path;

use proptest::prelude::*;
use ris_bamp::harness::emit::{emit, read_sidecar, write_csv, write_trace, CSV_HEADER, TRACE_HEADER};
use ris_bamp::harness::metrics::{from_db, nmse, nmse_db, per_entry_mse, to_db, NMSE_FLOOR_DB};
use ris_bamp::harness::sweep::{monte_carlo_with, SweepPoint};
use ris_bamp::harness::trial::{run_paired_trial, run_trial_traced, trial_data, FAILED_TRIAL_NMSE_DB};
use ris_bamp::harness::{baseline_bigamp_ls, fixtures, ls_detect};
use ris_bamp::linalg::{fro_dist_sq, CMatrix};
use ris_bamp::{
    monte_carlo, monte_carlo_paired, run_trial, BampConfig, EstimateSet, ExperimentSpec, GenConfig, Receiver,
    SideInfo, SweepAxis, SweepResult, SystemDims, TrialResult,
};

fn small_spec(snr: Vec<f64>, n_trials: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::desk(snr, n_trials);
    spec.gen.dims = SystemDims::new(4, 12, 6, 16, 6, 3);
    spec.bamp.max_iters = 60;
    spec
}

fn truth_as_estimate(seed: u64) -> (EstimateSet, ris_bamp::ChannelSet, ris_bamp::SignalFrame) {
    let d = trial_data(&small_spec(vec![20.0], 1).gen, seed).unwrap();
    let est = EstimateSet {
        hb: d.ch.hb.clone(),
        q: d.ch.q.clone(),
        hr: d.ch.hr.clone(),
        x: d.sig.x.clone(),
        u: d.obs.u_true.clone(),
        iterations: 0,
        converged: true,
        residual_trace: vec![],
        unitary_identity_max_err: None,
    };
    (est, d.ch, d.sig)
}

#[test]
fn nmse_of_truth_is_the_floor_and_of_zero_is_unity() {
    let (est, ch, sig) = truth_as_estimate(0);
    let m = nmse(&est, &ch, &sig).unwrap();
    assert_eq!((m.b, m.r, m.x), (NMSE_FLOOR_DB, NMSE_FLOOR_DB, NMSE_FLOOR_DB));

    let zero = CMatrix::zeros(ch.hb.nrows(), ch.hb.ncols());
    assert!(nmse_db(&zero, &ch.hb).unwrap().abs() < 1e-12);
    assert!(matches!(nmse_db(&zero, &zero), Err(ris_bamp::Error::Degenerate(_))));
    assert!(nmse_db(&CMatrix::zeros(2, 2), &CMatrix::identity(3, 3)).is_err());

    let mut half = est.clone();
    half.x *= num_complex::Complex64::new(0.5, 0.0);
    let per = per_entry_mse(&half, &ch, &sig).unwrap();
    let expect = fro_dist_sq(&half.x, &sig.x) / sig.x.len() as f64;
    assert_eq!(per.x, expect);
    assert_eq!(per.b, 0.0);
    assert!((nmse(&half, &ch, &sig).unwrap().x - 10.0 * 0.25f64.log10()).abs() < 1e-12);
}

#[test]
fn db_conversions() {
    assert_eq!(to_db(0.0), NMSE_FLOOR_DB);
    assert_eq!(to_db(1e-30), NMSE_FLOOR_DB);
    assert!((to_db(0.01) + 20.0).abs() < 1e-12);
    assert!((from_db(-20.0) - 0.01).abs() < 1e-15);
}

#[test]
fn trials_are_deterministic() {
    let spec = small_spec(vec![20.0], 1);
    let a = run_trial(&spec.gen, &spec.bamp, 7, Receiver::Joint).unwrap();
    let b = run_trial(&spec.gen, &spec.bamp, 7, Receiver::Joint).unwrap();
    assert!(a.same_outcome(&b));
    assert_eq!(a.seed, 7);
}

#[test]
fn tiny_noiseless_trial() {
    let (gen, cfg) = fixtures::tiny_noiseless();
    let r = run_trial(&gen, &cfg, 0, Receiver::Joint).unwrap();
    assert!(!r.diverged);
    assert!(r.nmse_x <= -40.0);
}

#[test]
fn undamped_trials_record_divergence_without_failing() {
    let mut spec = ExperimentSpec::desk(vec![30.0], 6);
    spec.bamp.damping = 1.0;
    let r = monte_carlo(&spec).unwrap();
    let p = &r.points[0];
    assert!(p.divergence_rate > 0.0);
    for t in p.trials.iter().filter(|t| t.diverged) {
        assert_eq!(t.nmse_x, FAILED_TRIAL_NMSE_DB);
        assert!(!t.converged);
        assert!(t.error.is_some());
    }
    assert!(r.any_diverged());
}

#[test]
fn single_trial_point_equals_the_trial() {
    let spec = small_spec(vec![15.0], 1);
    let r = monte_carlo(&spec).unwrap();
    let point = &spec.points().unwrap()[0];
    assert_eq!(point.gen.snr_db, 15.0);
    let t = run_trial(&point.gen, &point.bamp, 0, Receiver::Joint).unwrap();
    let p = &r.points[0];
    assert_eq!(p.n_trials, 1);
    assert!(p.trials[0].same_outcome(&t));
    let m = p.mean().unwrap();
    assert!((m.x - t.nmse_x).abs() < 1e-9 && (m.b - t.nmse_b).abs() < 1e-9 && (m.r - t.nmse_r).abs() < 1e-9);
    assert_eq!(p.including_diverged.median.x, t.nmse_x);
}

#[test]
fn trial_count_and_seeds_per_point() {
    let mut spec = small_spec(vec![10.0, 20.0], 3);
    spec.base_seed = 40;
    let r = monte_carlo(&spec).unwrap();
    assert_eq!(r.axis, "snr_db");
    for p in &r.points {
        assert_eq!(p.n_trials, 3);
        assert_eq!(p.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![40, 41, 42]);
    }
}

#[test]
fn identical_points_agree_statistically() {
    let spec = small_spec(vec![20.0, 20.0], 30);
    let r = monte_carlo(&spec).unwrap();
    // same seeds, same config: the points must coincide
    assert_eq!(r.points[0].including_diverged, r.points[1].including_diverged);

    let mut shifted = spec.clone();
    shifted.sweep = SweepAxis::SnrDb(vec![20.0]);
    shifted.base_seed = 1000;
    let other = monte_carlo(&shifted).unwrap();
    let ci = |p: &SweepPoint| {
        let xs: Vec<f64> = p.trials.iter().filter(|t| !t.diverged).map(|t| from_db(t.nmse_x)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (mean - 1.96 * sd / n.sqrt(), mean + 1.96 * sd / n.sqrt())
    };
    let (a, b) = (ci(&r.points[0]), ci(&other.points[0]));
    assert!(a.0 <= b.1 && b.0 <= a.1, "{a:?} vs {b:?}");
}

#[test]
fn paired_trials_share_the_observation() {
    let spec = small_spec(vec![25.0], 1);
    let a = trial_data(&spec.gen, 5).unwrap();
    let b = trial_data(&spec.gen, 5).unwrap();
    assert_eq!(a.obs, b.obs);
    let pair = run_paired_trial(&spec.gen, &spec.bamp, 5).unwrap();
    let joint = run_trial(&spec.gen, &spec.bamp, 5, Receiver::Joint).unwrap();
    let base = run_trial(&spec.gen, &spec.bamp, 5, Receiver::Baseline).unwrap();
    assert!(pair.joint.same_outcome(&joint));
    assert!(pair.baseline.same_outcome(&base));

    let (j, bl) = monte_carlo_paired(&spec).unwrap();
    assert_eq!(j.receiver, Receiver::Joint);
    assert_eq!(bl.receiver, Receiver::Baseline);
    let only = monte_carlo_with(&spec, Receiver::Baseline).unwrap();
    assert!(only.points[0].trials[0].same_outcome(&bl.points[0].trials[0]));
}

#[test]
fn baseline_detection_with_exact_channels() {
    let d = trial_data(&GenConfig { snr_db: f64::INFINITY, ..small_spec(vec![], 1).gen }, 2).unwrap();
    let g = &d.ch.q * &d.ch.hb;
    let t_p = d.side.pilots.ncols();
    let y_d = d.obs.y.columns(t_p, d.obs.y.ncols() - t_p).into_owned();
    let det = ls_detect(&g, &y_d).unwrap();
    assert!(!det.underdetermined);
    let truth = d.sig.x.columns(t_p, d.sig.x.ncols() - t_p).into_owned();
    assert!(fro_dist_sq(&det.x, &truth).sqrt() < 1e-8);

    // K < M: more unknowns per column than observations
    let wide = g.rows(0, 2).into_owned();
    let det = ls_detect(&wide, &y_d.rows(0, 2).into_owned()).unwrap();
    assert!(det.underdetermined);
    assert_eq!(det.rank, 2);
    assert!(det.residual < 1e-20);
}

#[test]
fn baseline_keeps_pilots_and_shapes() {
    let spec = small_spec(vec![30.0], 1);
    let d = trial_data(&spec.gen, 1).unwrap();
    if let Ok(out) = baseline_bigamp_ls(&d.obs, &d.side, &spec.bamp) {
        let t_p = d.side.pilots.ncols();
        assert_eq!(out.est.x.columns(0, t_p), d.side.pilots);
        assert_eq!(out.est.x.shape(), d.sig.x.shape());
        assert!(!out.pilot_underdetermined);
    }
    let empty = SideInfo::new(d.side.phi.clone(), CMatrix::zeros(4, 0), d.side.anchors.clone());
    assert!(baseline_bigamp_ls(&d.obs, &empty, &spec.bamp).is_err());
}

#[test]
fn spec_validation() {
    let mut spec = small_spec(vec![10.0], 0);
    assert!(spec.validate().is_err());
    spec.n_trials = 1;
    assert!(spec.validate().is_ok());
    for bad in [
        SweepAxis::SnrDb(vec![f64::NAN]),
        SweepAxis::PilotLen(vec![0]),
        SweepAxis::PilotLen(vec![100]),
        SweepAxis::AnchorRows(vec![13]),
        SweepAxis::RisElements(vec![0]),
        SweepAxis::Damping(vec![0.0]),
        SweepAxis::Damping(vec![1.2]),
    ] {
        spec.sweep = bad.clone();
        assert!(spec.validate().is_err(), "{bad:?}");
    }
    spec.sweep = SweepAxis::SnrDb(vec![f64::INFINITY]);
    assert!(spec.validate().is_ok());
}

#[test]
fn spec_json_defaults_and_round_trip() {
    let spec: ExperimentSpec = serde_json::from_str("{}").unwrap();
    assert_eq!(spec, ExperimentSpec::default());
    assert_eq!(spec.n_trials, 100);
    assert_eq!(spec.gen.dims, SystemDims::DESK);

    let text = r#"{"n_trials": 3, "sweep": {"axis": "pilot_len", "values": [8, 12]},
        "gen": {"snr_db": "inf"}, "bamp": {"scheme": "butamp", "damping": 0.5}}"#;
    let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.sweep, SweepAxis::PilotLen(vec![8, 12]));
    assert_eq!(spec.gen.snr_db, f64::INFINITY);
    assert_eq!(spec.bamp.damping, 0.5);
    assert_eq!(spec.bamp.priors, ris_bamp::PriorSet::matching(&GenConfig::desk()));
    assert_eq!(spec.gen.dims, SystemDims::DESK);
    let back: ExperimentSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
}

fn csv_string(r: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_csv(r, &mut buf, Path::new("<memory>")).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn empty_sweep_is_header_only() {
    let r = SweepResult { axis: "snr_db".into(), receiver: Receiver::Joint, points: vec![] };
    let text = csv_string(&r);
    assert_eq!(text, "sweep_value,mean_nmse_b_db,mean_nmse_r_db,mean_nmse_x_db,divergence_rate,n_trials\n");
    assert_eq!(CSV_HEADER.join(","), text.trim_end());
}

#[test]
fn emitted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![10.0, 25.0], 2);
    let r = monte_carlo(&spec).unwrap();
    let files = emit(&spec, &r, &dir.path().join("nested"), "joint").unwrap();
    let side = read_sidecar(&files.json).unwrap();
    assert_eq!(side.result, r);
    assert_eq!(side.spec, spec);
    let text = std::fs::read_to_string(&files.csv).unwrap();
    assert_eq!(text, csv_string(&r));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,"));
    assert!(lines[1].ends_with(",2"));
}

#[test]
fn all_diverged_point_leaves_means_empty() {
    let failed = TrialResult {
        seed: 0,
        nmse_b: FAILED_TRIAL_NMSE_DB,
        nmse_r: FAILED_TRIAL_NMSE_DB,
        nmse_x: FAILED_TRIAL_NMSE_DB,
        iterations: 3,
        converged: false,
        diverged: true,
        wall_time: 0.0,
        error: Some("diverged".into()),
    };
    let p = SweepPoint::aggregate(5.0, vec![failed]);
    assert!(p.excluding_diverged.is_none());
    assert_eq!(p.including_diverged.mean.x, 0.0);
    let r = SweepResult { axis: "snr_db".into(), receiver: Receiver::Joint, points: vec![p] };
    assert_eq!(csv_string(&r).lines().nth(1).unwrap(), "5,,,,1,1");
}

#[test]
fn emit_reports_the_failing_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let r = SweepResult { axis: "snr_db".into(), receiver: Receiver::Joint, points: vec![] };
    match emit(&ExperimentSpec::default(), &r, &blocker.join("sub"), "joint") {
        Err(ris_bamp::Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn trace_rows_cover_both_layers() {
    let spec = small_spec(vec![20.0], 1);
    let (result, rows) = run_trial_traced(&spec.gen, &spec.bamp, 0).unwrap();
    let plain = run_trial(&spec.gen, &spec.bamp, 0, Receiver::Joint).unwrap();
    assert!(result.same_outcome(&plain));
    let iters = if result.diverged { rows.len() / 2 } else { result.iterations };
    assert_eq!(rows.len(), 2 * iters);
    assert!(rows.chunks(2).enumerate().all(|(i, p)| p[0].iter == i + 1 && p[0].layer == 1 && p[1].layer == 2));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    assert_eq!(text.lines().count(), rows.len() + 1);
}

fn synthetic_trial(seed: u64, x: f64, diverged: bool) -> TrialResult {
    TrialResult {
        seed,
        nmse_b: x / 2.0,
        nmse_r: x / 3.0,
        nmse_x: if diverged { FAILED_TRIAL_NMSE_DB } else { x },
        iterations: 10,
        converged: !diverged,
        diverged,
        wall_time: 0.0,
        error: None,
    }
}

proptest! {
    #[test]
    fn aggregation_ignores_trial_order(
        (values, order) in prop::collection::vec((-60.0..0.0f64, any::<bool>()), 1..30)
            .prop_flat_map(|v| {
                let idx: Vec<usize> = (0..v.len()).collect();
                (Just(v), Just(idx).prop_shuffle())
            }),
    ) {
        let trials: Vec<TrialResult> = values
            .iter()
            .enumerate()
            .map(|(i, (x, d))| synthetic_trial(i as u64, *x, *d))
            .collect();
        let shuffled: Vec<TrialResult> = order.iter().map(|&i| trials[i].clone()).collect();
        let a = SweepPoint::aggregate(1.0, trials);
        let b = SweepPoint::aggregate(1.0, shuffled);
        prop_assert_eq!(&a.trials, &b.trials);
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-12;
        prop_assert!(close(a.including_diverged.mean.x, b.including_diverged.mean.x));
        prop_assert!(close(a.including_diverged.median.x, b.including_diverged.median.x));
        match (&a.excluding_diverged, &b.excluding_diverged) {
            (Some(p), Some(q)) => prop_assert!(close(p.mean.x, q.mean.x) && close(p.mean.b, q.mean.b)),
            (None, None) => {}
            _ => prop_assert!(false),
        }
        prop_assert_eq!(a.n_diverged, values.iter().filter(|(_, d)| *d).count());
    }

    #[test]
    fn linear_mean_is_between_extremes(values in prop::collection::vec(-60.0..0.0f64, 1..30)) {
        let trials: Vec<TrialResult> =
            values.iter().enumerate().map(|(i, x)| synthetic_trial(i as u64, *x, false)).collect();
        let p = SweepPoint::aggregate(0.0, trials);
        let m = p.mean().unwrap().x;
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
        // the linear-domain mean is never below the dB-domain mean
        prop_assert!(m >= values.iter().sum::<f64>() / values.len() as f64 - 1e-9);
    }
}

#[test]
fn default_bamp_config_matches_desk_priors() {
    assert_eq!(BampConfig::desk().priors, ris_bamp::PriorSet::matching(&GenConfig::desk()));
}
