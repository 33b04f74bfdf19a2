use mnl_bandit::harness::{instance_seed, run_spec};
use mnl_bandit::instances::{gen_lowerbound_base, gen_uniform_random};
use mnl_bandit::metrics::{check_trace, downsample, geometric_grid, write_csv, TraceMode, CSV_HEADER};
use mnl_bandit::{PolicyKind, PolicySpec};

#[test]
fn full_trace_matches_its_summary_and_exports() {
    let inst = gen_uniform_random(6, 3, 11).unwrap();
    let spec = PolicySpec::new(PolicyKind::AtDucb);
    let full = run_spec(&inst, &spec, 5000, 3, TraceMode::Full, vec![]).unwrap();
    let summary = run_spec(&inst, &spec, 5000, 3, TraceMode::Summary, vec![]).unwrap();
    assert_eq!(full.last, summary.last);
    assert_eq!(full.trace.rows.len(), 5000);

    let rows = &full.trace.rows;
    let summed: f64 = rows.iter().map(|r| r.regret).sum();
    assert!((summed - full.last.cum_regret).abs() < 1e-7 * summed.max(1.0));
    assert!(rows.windows(2).all(|w| w[1].t == w[0].t + 1));
    assert!(rows.iter().all(|r| r.regret >= 0.0));
    check_trace(&full.trace, inst.max_item_switch()).unwrap();

    let grid = geometric_grid(5000);
    let small = downsample(&full.trace, &grid).unwrap();
    assert_eq!(small.rows.iter().map(|r| r.t).collect::<Vec<_>>(), grid);

    let mut buf = Vec::new();
    write_csv(&small, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), grid.len());
}

#[test]
fn every_policy_runs_on_every_family() {
    let instances = [
        gen_uniform_random(8, 3, instance_seed(1)).unwrap(),
        gen_uniform_random(1, 1, 5).unwrap(),
        gen_lowerbound_base(4).unwrap(),
    ];
    for inst in &instances {
        for kind in PolicyKind::ALL {
            let out = run_spec(inst, &PolicySpec::new(kind), 3000, 9, TraceMode::Epoch, vec![]).unwrap();
            assert_eq!(out.last.t, 3000, "{kind}");
            assert!(out.last.cum_regret.is_finite() && out.last.cum_regret >= 0.0);
            check_trace(&out.trace, inst.max_item_switch()).unwrap();
        }
    }
}

#[test]
fn anytime_checkpoints_for_the_baseline_match_standalone_runs() {
    let inst = gen_uniform_random(5, 2, 4).unwrap();
    let spec = PolicySpec::new(PolicyKind::BaselineUcb);
    let long = run_spec(&inst, &spec, 4096, 2, TraceMode::Summary, vec![512, 2048]).unwrap();
    for (snap, t) in long.checkpoints.iter().zip([512, 2048]) {
        let solo = run_spec(&inst, &spec, t, 2, TraceMode::Summary, vec![]).unwrap();
        assert_eq!(*snap, solo.last);
    }
}

#[test]
fn gated_updates_are_rarer_than_per_epoch_updates() {
    let horizon = 1 << 15;
    let inst = gen_uniform_random(10, 4, instance_seed(0)).unwrap();
    let run = |kind| run_spec(&inst, &PolicySpec::new(kind), horizon, 0, TraceMode::Summary, vec![]).unwrap();
    let at = run(PolicyKind::AtDucb).stats.total_ucb_updates();
    let base = run(PolicyKind::BaselineUcb).stats.total_ucb_updates();
    let bound = 10 * (u64::from(horizon.ilog2()) + 1);
    assert!(at <= bound, "at_ducb {at} > {bound}");
    assert!(at * 10 < base, "at_ducb {at} vs baseline {base}");
}
