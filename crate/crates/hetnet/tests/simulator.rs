mod common;

use mec_core::comms::Direction;
use mec_core::config::{BiasMatrix, NetworkConfig};
use mec_core::geometry::offload_probability;
use mec_core::queueing::{GammaApproxParams, QueueLoad};
use mec_hetnet::sim::*;
use statrs::distribution::{ContinuousCDF, Gamma};

fn stable_reference() -> (NetworkConfig, BiasMatrix) {
    let mut cfg = NetworkConfig::reference();
    cfg.user_density = 1.2e-4;
    let bias = BiasMatrix::unit(2, 2);
    (cfg, bias)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn mm1(lambda: f64, mu: f64) -> QueueLoad {
    QueueLoad::new(0, vec![lambda], vec![1], mu).unwrap()
}

/// Independent replications of one queue; per-replication run counters.
fn replicate(load: &QueueLoad, reps: u64, opts: QueueSimOptions) -> Vec<QueueRun> {
    (0..reps).map(|r| simulate_queue(load, &opts, 1000 + r).run).collect()
}

#[test]
fn coverage_matches_the_operating_point() {
    let (cfg, bias) = stable_reference();
    for (k, dir) in [(0, Direction::Up), (1, Direction::Up), (0, Direction::Down), (1, Direction::Down)] {
        let e = simulate_coverage(&cfg, &bias, 0, k, dir, 20_000, 7).unwrap();
        let se = (e.analytical * (1.0 - e.analytical) / e.sim.trials as f64).sqrt();
        assert!(
            (e.sim.estimate - e.analytical).abs() <= 3.0 * se,
            "{dir:?} tier {}: sim {} vs analytical {} (se {se})",
            k + 1,
            e.sim.estimate,
            e.analytical
        );
        assert_eq!(e.sim.trials, 20_000);
    }
}

#[test]
fn vanishing_rate_is_always_covered() {
    let (mut cfg, bias) = stable_reference();
    for u in &mut cfg.user_types {
        u.coverage_up = vec![1.0 - 1e-12; 2];
        u.coverage_down = vec![1.0 - 1e-12; 2];
    }
    for dir in [Direction::Up, Direction::Down] {
        let e = simulate_coverage(&cfg, &bias, 0, 1, dir, 2000, 3).unwrap();
        assert_eq!(e.sim.estimate, 1.0, "{dir:?}");
    }
}

#[test]
fn coverage_needs_enough_trials() {
    let (cfg, bias) = stable_reference();
    assert!(simulate_coverage(&cfg, &bias, 0, 0, Direction::Up, 999, 1).is_err());
}

#[test]
fn association_frequencies_match_offload_probability() {
    let (cfg, _) = stable_reference();
    let bias = BiasMatrix::from_db_rows(&[vec![10.0, 4.0], vec![0.0, 12.0]]).unwrap();
    for i in 0..2 {
        let est = simulate_association(&cfg, &bias, i, 40_000, 11).unwrap();
        let total: f64 = est.iter().map(|e| e.estimate).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (k, e) in est.iter().enumerate() {
            let p = offload_probability(&cfg, &bias, i, k);
            let se = (p * (1.0 - p) / e.trials as f64).sqrt();
            assert!((e.estimate - p).abs() <= 3.0 * se, "type {i} tier {k}: {} vs {p}", e.estimate);
        }
    }
}

#[test]
fn spatial_results_do_not_depend_on_thread_count() {
    let (cfg, bias) = stable_reference();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            (simulate_coverage(&cfg, &bias, 1, 0, Direction::Down, 3000, 5).unwrap(), simulate_association(&cfg, &bias, 0, 3000, 5).unwrap())
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn zero_arrivals_give_an_empty_trace() {
    let t = simulate_queue(&mm1(0.0, 9.0), &QueueSimOptions::default(), 1);
    assert!(t.records.is_empty() && t.waits().is_empty());
    assert_eq!(t.run.tasks, 0);
}

#[test]
fn fifo_invariants_hold() {
    let load = QueueLoad::new(1, vec![0.8, 0.3, 0.2], vec![1, 2, 3], 3.0).unwrap();
    let t = simulate_queue(&load, &QueueSimOptions { horizon_slots: 5e4, warmup_slots: 0.0 }, 2);
    assert!(t.records.len() > 10_000);
    for w in t.records.windows(2) {
        assert!(w[1].start >= w[0].start);
        assert!(w[1].arrival >= w[0].arrival);
        assert!(w[1].start >= w[0].departure);
    }
    for r in &t.records {
        assert!(r.wait() >= 0.0 && r.departure > r.start && r.tier == 1 && r.user_type < 3);
    }
    assert!(!t.unstable);
}

#[test]
fn mm1_mean_wait() {
    // 20 replications of ~5e4 tasks each: 1e6 samples in total
    let runs = replicate(&mm1(3.0, 9.0), 20, QueueSimOptions { horizon_slots: 1e4 + 5e4 / 3.0, warmup_slots: 1e4 });
    let tasks: u64 = runs.iter().map(|r| r.tasks).sum();
    assert!(tasks > 950_000, "{tasks}");
    let (m, sd) = mean_sd(&runs.iter().map(QueueRun::mean_wait).collect::<Vec<_>>());
    let se = sd / (runs.len() as f64).sqrt();
    assert!((m - 1.0 / 18.0).abs() <= 3.0 * se, "mean wait {m} vs 1/18 (se {se})");
}

#[test]
fn littles_law_on_traces() {
    let load = QueueLoad::new(0, vec![1.5, 1.0], vec![1, 2], 6.0).unwrap();
    let runs = replicate(&load, 20, QueueSimOptions { horizon_slots: 2e4, warmup_slots: 2e3 });
    let gaps: Vec<f64> = runs.iter().map(|r| r.mean_in_system() - r.arrival_rate() * r.mean_sojourn()).collect();
    let (m, sd) = mean_sd(&gaps);
    let l = mean_sd(&runs.iter().map(QueueRun::mean_in_system).collect::<Vec<_>>()).0;
    assert!(m.abs() <= 3.0 * sd / (gaps.len() as f64).sqrt() + 1e-3 * l, "L − λW = {m} (sd {sd})");
}

#[test]
fn warmup_is_long_enough() {
    let load = mm1(5.4, 9.0);
    let opts = |w: f64| QueueSimOptions { horizon_slots: 2e5, warmup_slots: w };
    let base = replicate(&load, 10, opts(1e4));
    let doubled = replicate(&load, 10, opts(2e4));
    let (m1, sd) = mean_sd(&base.iter().map(QueueRun::mean_wait).collect::<Vec<_>>());
    let (m2, _) = mean_sd(&doubled.iter().map(QueueRun::mean_wait).collect::<Vec<_>>());
    let se = sd / (base.len() as f64).sqrt();
    assert!((m1 - m2).abs() < se, "{m1} vs {m2} (se {se})");
}

#[test]
fn waiting_times_follow_the_gamma_mixture() {
    let l = common::preset("three_types.toml");
    for k in 0..2 {
        let load = QueueLoad::from_config(&l.cfg, &l.bias, k).unwrap();
        let g = GammaApproxParams::from_load(&load).unwrap().unwrap();
        let gamma = Gamma::new(g.shape, g.rate).unwrap();
        let cdf = |w: f64| 1.0 - g.wait_probability + g.wait_probability * gamma.cdf(w);
        let t = simulate_queue(&load, &QueueSimOptions { horizon_slots: 1e5 + 1e6 / load.total_rate, warmup_slots: 1e5 }, 9);
        let mut w = t.waits();
        w.sort_by(f64::total_cmp);
        let n = w.len() as f64;
        // sup |F_n − F| over distinct values, comparing both one-sided limits;
        // F jumps by 1 − ρ at zero and is continuous elsewhere
        let mut ks: f64 = 0.0;
        let mut j = 0;
        while j < w.len() {
            let x = w[j];
            let below = j as f64 / n;
            while j < w.len() && w[j] == x {
                j += 1;
            }
            let left = if x == 0.0 { 0.0 } else { cdf(x) };
            ks = ks.max((below - left).abs()).max((j as f64 / n - cdf(x)).abs());
        }
        assert!(ks < 0.03, "tier {}: rho {} KS {ks}", k + 1, load.utilization);
    }
}

#[test]
fn huge_budget_means_every_task_succeeds() {
    let l = common::preset("three_types.toml");
    let mut cfg = l.cfg.clone();
    for u in &mut cfg.user_types {
        u.target_latency_s = 1e3;
    }
    let opts = SecpSimOptions { tasks_per_tier: 20_000, warmup_slots: 1e3, replications: 4 };
    let r = simulate_secp(&cfg, &l.bias, &opts, 4).unwrap();
    let expected: f64 = (0..cfg.num_types())
        .flat_map(|i| (0..cfg.num_tiers()).map(move |k| (i, k)))
        .map(|(i, k)| cfg.user_types[i].portion * offload_probability(&cfg, &l.bias, i, k))
        .sum();
    assert!((r.overall.estimate - expected).abs() < 1e-12, "{} vs {expected}", r.overall.estimate);
    assert!((r.overall_scp.estimate - expected).abs() < 1e-12);
}

#[test]
fn secp_simulation_is_reproducible() {
    let l = common::preset("one_type_bias.toml");
    let opts = SecpSimOptions { tasks_per_tier: 40_000, warmup_slots: 1e3, replications: 4 };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate_secp(&l.cfg, &l.bias, &opts, 17).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_ne!(a.overall.estimate, simulate_secp(&l.cfg, &l.bias, &opts, 18).unwrap().overall.estimate);
}

#[test]
fn secp_estimates_are_ordered_and_bounded() {
    let l = common::preset("three_types.toml");
    let opts = SecpSimOptions { tasks_per_tier: 50_000, warmup_slots: 1e3, replications: 5 };
    let r = simulate_secp(&l.cfg, &l.bias, &opts, 2).unwrap();
    for p in &r.pairs {
        assert!((0.0..=1.0).contains(&p.secp.estimate) && (0.0..=1.0).contains(&p.scp.estimate));
        assert!(p.secp.estimate <= p.scp.estimate);
        assert!(p.secp.half_width_95 >= 0.0 && p.secp.effective_trials <= p.secp.trials as f64);
    }
    assert!(r.overall.estimate <= r.overall_scp.estimate);
    assert!(r.unstable_tiers.is_empty());
}

#[test]
fn tiny_runs_are_still_valid() {
    let l = common::preset("one_type_bias.toml");
    let opts = SecpSimOptions { tasks_per_tier: 10, warmup_slots: 0.0, replications: 2 };
    let r = simulate_secp(&l.cfg, &l.bias, &opts, 1).unwrap();
    assert!(r.overall.half_width_95 > 0.0 && r.overall.half_width_95.is_finite());
    assert!((0.0..=1.0).contains(&r.overall.estimate));
}

#[test]
fn unstable_tiers_are_flagged() {
    let (mut cfg, bias) = stable_reference();
    cfg.user_density = 12e-4;
    let opts = SecpSimOptions { tasks_per_tier: 2000, warmup_slots: 0.0, replications: 2 };
    let r = simulate_secp(&cfg, &bias, &opts, 1).unwrap();
    assert_eq!(r.unstable_tiers, vec![0, 1]);
    assert!(r.tiers.iter().all(|t| t.unstable && t.utilization >= 1.0));
}

#[test]
fn trace_matches_the_first_replication() {
    let l = common::preset("one_type_bias.toml");
    let opts = SecpSimOptions { tasks_per_tier: 20_000, warmup_slots: 100.0, replications: 2 };
    let r = simulate_secp(&l.cfg, &l.bias, &opts, 5).unwrap();
    for k in 0..2 {
        let t = trace_replication(&l.cfg, &l.bias, &opts, 5, k, usize::MAX).unwrap();
        assert_eq!(t.len() as u64, r.tiers[k].runs[0].tasks);
        assert_eq!(trace_replication(&l.cfg, &l.bias, &opts, 5, k, 10).unwrap(), t[..10]);
    }
}
