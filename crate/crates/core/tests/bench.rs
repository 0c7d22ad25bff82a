use tapestry_core::bench::{
    emit_report, estimate_cost, ghost_overhead, kernels, render_report, run_weak_scaling, CostModelInput, KernelConfig, ReportFormat,
    WeakScalingResult, CSV_COLUMNS,
};
use tapestry_core::driver::Execution;

fn reference_input() -> CostModelInput {
    CostModelInput {
        levels: 16,
        base_points: 1024,
        grid_functions: 512,
        bytes_per_value: 8,
        flops_per_point: 10_000,
        extra_flops: 22_000,
        base_steps: 6000,
        rate: 2e15,
    }
}

#[test]
fn petascale_estimate_matches_the_reference_figures() {
    let e = estimate_cost(&reference_input()).unwrap();
    // 16 levels * 2^30 points * 2^9 functions * 2^3 bytes = 2^46 bytes = 64 TiB
    assert_eq!(e.memory_bytes, 1u128 << 46);
    assert_eq!(e.memory_tib(), 64.0);
    // independent closed form: N^3 (f0+f1) s0 (2^L - 1)
    let oracle = (1024f64).powi(3) * 32_000.0 * 6000.0 * ((1u64 << 16) - 1) as f64;
    assert!(((e.total_flops as f64) - oracle).abs() / oracle < 1e-12);
    // about 13 million petaflops, within 5% of 1.3e7
    assert!((e.total_petaflops() - 1.3e7).abs() / 1.3e7 < 0.05, "{}", e.total_petaflops());
    assert!((e.total_petaflops() - 1.351e7).abs() / 1.351e7 < 1e-3);
    // about 75 days, within 10%
    assert!((e.runtime_days() - 75.0).abs() / 75.0 < 0.10, "{}", e.runtime_days());
    assert_eq!(e.finest_steps(), (1u128 << 15) * 6000);
    assert_eq!(e.level_steps.len(), 16);
    for (l, s) in e.level_steps.iter().enumerate() {
        assert_eq!(*s, 6000u128 << l);
    }
}

#[test]
fn single_level_and_linearity() {
    let mut one = reference_input();
    one.levels = 1;
    let e = estimate_cost(&one).unwrap();
    let n3 = 1024u128.pow(3);
    assert_eq!(e.memory_bytes, n3 * 512 * 8);
    assert_eq!(e.total_flops, n3 * 32_000 * 6000);

    let base = estimate_cost(&reference_input()).unwrap();
    let mut twice = reference_input();
    twice.base_steps *= 2;
    let t = estimate_cost(&twice).unwrap();
    assert_eq!(t.total_flops, 2 * base.total_flops);
    assert_eq!(t.runtime_seconds, 2.0 * base.runtime_seconds);
    assert_eq!(t.memory_bytes, base.memory_bytes);
}

#[test]
fn invalid_and_overflowing_inputs_are_rejected() {
    let mut bad = reference_input();
    bad.levels = 0;
    assert!(estimate_cost(&bad).is_err());
    let mut bad = reference_input();
    bad.rate = 0.0;
    assert!(estimate_cost(&bad).is_err());
    let mut huge = reference_input();
    huge.base_points = u64::MAX;
    assert!(estimate_cost(&huge).is_err());
}

#[test]
fn ghost_overhead_values() {
    assert_eq!(ghost_overhead(10, 3).unwrap(), 3.096);
    assert_eq!(ghost_overhead(10, 3).unwrap(), (16f64.powi(3) - 1000.0) / 1000.0);
    assert_eq!(ghost_overhead(20, 3).unwrap(), (26f64.powi(3) - 8000.0) / 8000.0);
    assert!((ghost_overhead(20, 3).unwrap() - 1.197).abs() < 5e-4);
    assert_eq!(ghost_overhead(7, 0).unwrap(), 0.0);
    assert!(ghost_overhead(0, 3).is_err());
    let mut last = f64::INFINITY;
    for o in 1..200 {
        let r = ghost_overhead(o, 3).unwrap();
        assert!(r < last);
        last = r;
    }
}

fn small(steps: usize) -> KernelConfig {
    KernelConfig {
        bytes_per_rank: 48 * 12 * 12 * 12,
        steps,
        execution: Execution::Sequential,
        scratch: None,
    }
}

#[test]
fn all_kernels_are_registered() {
    assert_eq!(
        kernels().names(),
        ["amr-hydro", "amr8lev-wave", "io-checkpoint", "unigrid-wave-amr1lev", "unigrid-wave-pugh"]
    );
}

#[test]
fn one_rank_has_unit_efficiency() {
    let r = run_weak_scaling("unigrid-wave-pugh", &[1], &small(2)).unwrap();
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].efficiency, 1.0);
    assert_eq!(r[0].owned_points_per_rank, 12 * 12 * 12);
}

#[test]
fn unigrid_kernels_evolve_identical_data() {
    let ranks = [1, 2, 4];
    let a = run_weak_scaling("unigrid-wave-pugh", &ranks, &small(3)).unwrap();
    let b = run_weak_scaling("unigrid-wave-amr1lev", &ranks, &small(3)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.ranks, y.ranks);
        assert_eq!(x.owned_points_per_rank, 12 * 12 * 12);
        assert_eq!(x.owned_points_per_rank, y.owned_points_per_rank);
        for (k, v) in &x.norms {
            assert_eq!(v.to_bits(), y.norms[k].to_bits(), "{k} at {} ranks", x.ranks);
        }
        assert!(x.efficiency > 0.0 && x.efficiency.is_finite());
    }
}

#[test]
fn nested_and_hydro_kernels_run() {
    let cfg = KernelConfig {
        bytes_per_rank: 48 * 25 * 25 * 25 / 8,
        steps: 1,
        execution: Execution::Sequential,
        scratch: None,
    };
    let r = &run_weak_scaling("amr8lev-wave", &[1], &cfg).unwrap()[0];
    assert!(r.norms["wave::phi"].is_finite() && r.norms["wave::phi"] > 0.0);
    assert!(r.updates_per_second > 0.0);
    let cfg = KernelConfig {
        bytes_per_rank: 120 * 16 * 16 * 16,
        steps: 2,
        execution: Execution::Sequential,
        scratch: None,
    };
    let h = run_weak_scaling("amr-hydro", &[1, 2], &cfg).unwrap();
    assert!(h.iter().all(|r| r.norms["hydro::dens"] > 0.0));
}

#[test]
fn io_kernel_reports_bandwidth_per_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = KernelConfig {
        bytes_per_rank: 8 * 16 * 16 * 16,
        steps: 1,
        execution: Execution::Sequential,
        scratch: Some(dir.path().to_path_buf()),
    };
    let r = &run_weak_scaling("io-checkpoint", &[8], &cfg).unwrap()[0];
    assert_eq!(r.owned_points_per_rank, 16 * 16 * 16);
    assert_eq!(r.extra["files/every-nth(4)"], 2.0);
    assert_eq!(r.extra["files/per-rank"], 8.0);
    assert_eq!(r.extra["files/single-collector"], 1.0);
    for s in ["checkpoint", "per-rank", "every-nth(4)", "single-collector"] {
        assert!(r.extra[&format!("mb_per_s/{s}")] > 0.0);
    }
    // eight chunks of 16^3 doubles each
    for rank in 0..8 {
        let len = std::fs::metadata(dir.path().join("checkpoint").join(format!("chunk_{rank}.tpst"))).unwrap().len();
        assert!(len > 8 * 4096);
    }
}

#[test]
fn bad_rank_lists_and_names_fail() {
    assert!(run_weak_scaling("unigrid-wave-pugh", &[], &small(1)).is_err());
    assert!(run_weak_scaling("unigrid-wave-pugh", &[0], &small(1)).is_err());
    assert!(run_weak_scaling("no-such-kernel", &[1], &small(1)).is_err());
}

fn row(kernel: &str, ranks: usize) -> WeakScalingResult {
    WeakScalingResult {
        kernel: kernel.into(),
        ranks,
        seconds: 1.25,
        updates_per_second: 3.5e6,
        efficiency: 0.75,
        owned_points_per_rank: 1000,
        norms: Default::default(),
        extra: Default::default(),
    }
}

#[test]
fn reports() {
    let empty = render_report(&[], ReportFormat::Csv).unwrap();
    assert_eq!(empty, format!("{}\n", CSV_COLUMNS.join(",")));
    let rows = vec![row("a", 1), row("a", 2), row("a", 4)];
    let csv = render_report(&rows, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert_eq!(csv.lines().nth(1).unwrap(), "a,1,1.25,3500000.0,0.75");
    let json = render_report(&rows[..1], ReportFormat::Json).unwrap();
    let back: Vec<WeakScalingResult> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rows[..1]);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    emit_report(&rows, ReportFormat::for_path(&p), &p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), csv);
    assert_eq!(ReportFormat::for_path(std::path::Path::new("x.JSON")), ReportFormat::Json);
    assert!(emit_report(&rows, ReportFormat::Csv, &dir.path().join("missing/r.csv")).is_err());
}
