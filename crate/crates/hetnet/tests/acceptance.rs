//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary under `cargo test`. The outcome of a criterion is
//! reported, never asserted; only a harness error (a preset that fails to
//! load, a model error where none is expected) makes the process fail.

mod common;

use std::time::Instant;

use mec_core::comms::{downlink_max_rate_lb, uplink_max_rate};
use mec_core::config::{db_to_linear, BiasMatrix, NetworkConfig};
use mec_core::geometry::offload_probability;
use mec_core::optimizer::{apply_param, Grid, GridScale, Objective, ParamPath, SweepResult, SweepSpec};
use mec_core::queueing::{
    closed_form_applies, overall_secp, secp_laplace_inversion, secp_single_type, secp_two_type, takacs_moments, GammaApproxParams, QueueLoad,
    SecpMethod,
};
use mec_core::specfun::{cosine_integral, hyp1f1, regularized_lower_gamma, sine_integral};
use mec_hetnet::runs::{grid_search_bias, is_unimodal, par_ncc_family, par_sweep, single_tier_baseline, BiasGrid, Evaluator};
use mec_hetnet::sim::{simulate_queue, simulate_secp, QueueRun, QueueSimOptions, SecpSimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn report(n: usize, name: &str, started: Instant, outcome: Outcome) -> bool {
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok((pass, detail)) => {
            println!("criterion {n} {}: {name} ({secs:.1} s) {detail}", if pass { "PASS" } else { "FAIL" });
            true
        }
        Err(e) => {
            println!("criterion {n} ERROR: {name}: {e}");
            false
        }
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn db_grid(from: f64, to: f64, steps: usize) -> Grid {
    Grid { start: from, stop: to, steps, scale: GridScale::Db }
}

fn sweep(cfg: &NetworkConfig, bias: &BiasMatrix, param: &str, grid: Grid, eval: &Evaluator) -> Result<SweepResult, String> {
    let spec = SweepSpec { param: ParamPath::parse(param).map_err(e)?, grid, objective: Objective::Secp, method: eval.method, secp_method: eval.secp_method };
    par_sweep(cfg, bias, &spec, eval).map_err(e)
}

// 1. closed forms against inversion of the transform
fn closed_forms() -> Outcome {
    let one = common::preset("one_type_bias.toml");
    let (c1, b1) = apply_param(&one.cfg, &one.bias, ParamPath::parse("bias[1][2]").map_err(e)?, db_to_linear(7.5)).map_err(e)?;
    let two = common::preset("two_types_ncc.toml");
    let (c2, b2) = apply_param(&two.cfg, &two.bias, ParamPath::parse("bias[2][2]").map_err(e)?, db_to_linear(12.0)).map_err(e)?;
    let ts: Vec<f64> = (1..=50).map(|j| 0.1 * j as f64).collect();
    let (mut worst1, mut worst2) = (0.0f64, 0.0f64);
    for k in 0..2 {
        let l = QueueLoad::from_config(&c1, &b1, k).map_err(e)?;
        for &t in &ts {
            worst1 = worst1.max((secp_single_type(&l, 1, t).map_err(e)? - secp_laplace_inversion(&l, 1, t).map_err(e)?).abs());
        }
        let l = QueueLoad::from_config(&c2, &b2, k).map_err(e)?;
        if !closed_form_applies(&l) {
            return Err("two-type load outside the closed form".into());
        }
        for &t in &ts {
            for d in [1, 2] {
                worst2 = worst2.max((secp_two_type(&l, d, t).map_err(e)? - secp_laplace_inversion(&l, d, t).map_err(e)?).abs());
            }
        }
    }
    Ok((worst1 <= 1e-6 && worst2 <= 1e-6, format!("max |single-type − inversion| = {worst1:.2e}, max |two-type − inversion| = {worst2:.2e} (tol 1e-6)")))
}

// 2. Gamma approximation against simulation, three task sizes
fn gamma_fidelity() -> Outcome {
    let l = common::preset("three_types.toml");
    let opts = SecpSimOptions::default();
    let mut worst = 0.0f64;
    let mut at = 0.0;
    let mut tasks = u64::MAX;
    for j in 0..10 {
        let t = 0.5e-3 + 0.5e-3 * j as f64;
        let mut cfg = l.cfg.clone();
        for u in &mut cfg.user_types {
            u.target_latency_s = t;
        }
        let an = overall_secp(&cfg, &l.bias, SecpMethod::GammaApprox).map_err(e)?.overall;
        let sim = simulate_secp(&cfg, &l.bias, &opts, 31 + j).map_err(e)?;
        tasks = tasks.min(sim.tiers.iter().map(|t| t.tasks).sum());
        let gap = (an - sim.overall.estimate).abs();
        if gap > worst {
            worst = gap;
            at = t;
        }
    }
    Ok((worst <= 0.03 && tasks >= 1_000_000, format!("max |gamma − sim| = {worst:.4} at T = {at:.1e} s over 10 targets in [0.5, 5] ms, ≥{tasks} tasks per run (tol 0.03)")))
}

// 3. computing probability, analysis vs simulation, over the tier-2 bias
fn scp_vs_simulation() -> Outcome {
    let l = common::preset("one_type_bias.toml");
    let values: Vec<f64> = (0..21).map(|j| j as f64).collect();
    let opts = SecpSimOptions::default();
    let mut misses = Vec::new();
    let (mut an_s, mut sim_s) = (Vec::new(), Vec::new());
    for (j, &v) in values.iter().enumerate() {
        let mut b = l.bias.clone();
        b.set(0, 1, db_to_linear(v));
        let an = overall_secp(&l.cfg, &b, SecpMethod::Auto);
        let sim = simulate_secp(&l.cfg, &b, &opts, 100 + j as u64).map_err(e)?;
        match an {
            Ok(r) => {
                if !sim.unstable_tiers.is_empty() {
                    return Err(format!("simulation flags instability at {v} dB where the analysis does not"));
                }
                if !sim.overall_scp.covers(r.overall_scp) {
                    misses.push(format!("{v} dB: {:.4} ∉ {:.4} ± {:.4}", r.overall_scp, sim.overall_scp.estimate, sim.overall_scp.half_width_95));
                }
                an_s.push(r.overall);
                sim_s.push(sim.overall.estimate);
            }
            Err(err) if err.is_instability() => {
                if sim.unstable_tiers.is_empty() {
                    misses.push(format!("{v} dB: unstable in analysis only"));
                }
                an_s.push(f64::NEG_INFINITY);
                sim_s.push(f64::NEG_INFINITY);
            }
            Err(err) => return Err(err.to_string()),
        }
    }
    let argmax = |xs: &[f64]| xs.iter().enumerate().fold(0, |b, (j, &x)| if x > xs[b] { j } else { b });
    let (ja, js) = (argmax(&an_s), argmax(&sim_s));
    let trend = ja.abs_diff(js) <= 1;
    let detail = format!(
        "p_cp inside the 95% CI at {}/21 points{}; p_s argmax analysis {} dB vs simulation {} dB",
        21 - misses.len(),
        if misses.is_empty() { String::new() } else { format!(" (misses: {})", misses.join("; ")) },
        values[ja],
        values[js]
    );
    Ok((misses.is_empty() && trend, detail))
}

// 4. bias optima for two task sizes of type 2
fn bias_landscape() -> Outcome {
    let eval = Evaluator::analytical(SecpMethod::Auto);
    let mut pass = true;
    let mut parts = Vec::new();
    // (preset, p_s at its argmax, argmax dB, p_s at the p_cp argmax, p_cp argmax dB, tolerance)
    for (name, ps, loc, ps_cp, loc_cp, tol) in [("two_types_d6.toml", 0.63, 11.0, 0.59, 7.7, 0.03), ("two_types_d2.toml", 0.98, 6.2, 0.97, 5.6, 0.02)] {
        let l = common::preset(name);
        let r = match sweep(&l.cfg, &l.bias, "bias[2][2]", db_grid(0.0, 20.0, 201), &eval) {
            Ok(r) => r,
            Err(msg) if msg == mec_core::MecError::NoStablePoint.to_string() => {
                pass = false;
                parts.push(format!("{name}: some tier is unstable at every bias in 0–20 dB"));
                continue;
            }
            Err(msg) => return Err(msg),
        };
        let stable = r.metrics.iter().filter(|m| m.is_some()).count();
        let j = r.argmax_index;
        let jc = r.argmax_of(Objective::Scp).unwrap();
        let (got, got_cp) = (r.best, r.metrics[jc].unwrap().secp);
        let ok = (got - ps).abs() <= tol && (got_cp - ps_cp).abs() <= tol && (r.values[j] - loc).abs() <= 1.0 && (r.values[jc] - loc_cp).abs() <= 1.0;
        pass &= ok;
        parts.push(format!(
            "{name}: p_s {got:.3} @ {:.1} dB (target {ps} @ {loc}), p_s at p_cp optimum {got_cp:.3} @ {:.1} dB (target {ps_cp} @ {loc_cp}), {stable}/201 stable",
            r.values[j], r.values[jc]
        ));
    }
    Ok((pass, parts.join("; ")))
}

// 5. a third tier raises the best success probability
fn tier_count() -> Outcome {
    let eval = Evaluator::analytical(SecpMethod::Auto);
    let grid = db_grid(0.0, 20.0, 81);
    let two = common::preset("one_type_2tier.toml");
    let g2 = grid_search_bias(&two.cfg, &two.bias, &BiasGrid { entries: vec![(0, 0), (0, 1)], grids: vec![grid, grid] }, Objective::Secp, &eval).map_err(e)?;
    let three = common::preset("one_type_3tier.toml");
    let g3 = grid_search_bias(&three.cfg, &three.bias, &BiasGrid { entries: vec![(0, 1), (0, 2)], grids: vec![grid, grid] }, Objective::Secp, &eval).map_err(e)?;
    let pass = g3.best > g2.best && (g3.best - 0.95).abs() <= 0.02 && (g2.best - 0.93).abs() <= 0.02;
    Ok((
        pass,
        format!(
            "2-tier max {:.4} at (B11, B12) = ({:.2}, {:.2}) dB, 3-tier max {:.4} at (B12, B13) = ({:.2}, {:.2}) dB (targets 0.93 / 0.95 ± 0.02)",
            g2.best, g2.values_db[0], g2.values_db[1], g3.best, g3.values_db[0], g3.values_db[1]
        ),
    ))
}

// 6. density/speed trade at fixed capability, and the one-tier comparison
fn ncc_study() -> Outcome {
    let eval = Evaluator::analytical(SecpMethod::Auto);
    let l = common::preset("two_types_ncc.toml");
    let mut b15 = l.bias.clone();
    b15.set(1, 1, db_to_linear(15.0));
    let grid = Grid { start: 0.1, stop: 5.0, steps: 99, scale: GridScale::Linear };
    let fam = par_ncc_family(&l.cfg, &b15, 1, grid, Objective::Secp, &[18e-5, 22.5e-5, 27e-5], &eval).map_err(e)?;
    let mut shape_ok = true;
    let mut shapes = Vec::new();
    let mut argmaxes = Vec::new();
    for n in &fam {
        let s = &n.sweep;
        let obj = s.objective_values();
        let stable: Vec<f64> = obj.iter().copied().filter(|v| v.is_finite()).collect();
        let j = s.argmax_index;
        let interior = j > 0 && j + 1 < obj.len() && obj[j - 1].is_finite() && obj[j + 1].is_finite();
        let unimodal = is_unimodal(&stable);
        shape_ok &= !stable.is_empty() && unimodal && interior;
        shapes.push(format!("{} stable/unimodal {unimodal}/interior {interior}", stable.len()));
        argmaxes.push(s.argmax_value);
    }
    let monotone = argmaxes.windows(2).all(|w| w[1] >= w[0]);

    let r = sweep(&l.cfg, &l.bias, "bias[2][2]", db_grid(0.0, 20.0, 201), &eval)?;
    let baseline = single_tier_baseline(&l.cfg, Objective::Secp, &eval).map_err(e)?;
    let contains = |iv: &[(f64, f64)]| iv.iter().any(|&(a, b)| a <= 3.0 + 1e-9 && b >= 12.0 - 1e-9);
    let fmt = |iv: &[(f64, f64)]| iv.iter().map(|(a, b)| format!("[{a:.1}, {b:.1}]")).collect::<Vec<_>>().join(" ");
    let above = r.intervals_above(baseline);
    let above_ref = r.intervals_above(0.77);
    let pass = shape_ok && monotone && contains(&above);
    Ok((
        pass,
        format!(
            "theta argmax {:?} for N_K = 1.8e-4, 2.25e-4, 2.7e-4 ({}; nondecreasing: {monotone}); \
             one-tier baseline {baseline:.4}, bias[2][2] intervals above it: {} (needs [3, 12]); above 0.77: {}; best {:.4}",
            argmaxes,
            shapes.join(", "),
            if above.is_empty() { "none".into() } else { fmt(&above) },
            if above_ref.is_empty() { "none".into() } else { fmt(&above_ref) },
            r.best
        ),
    ))
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let s: f64 = (1..n).map(|j| f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + s) * h / 3.0
}

// 7. property checks
fn properties() -> Outcome {
    let mut failed: Vec<&str> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let three = common::preset("one_type_3tier.toml");
    for _ in 0..200 {
        let rows = vec![(0..3).map(|_| rng.random_range(-20.0..20.0)).collect::<Vec<f64>>()];
        let b = BiasMatrix::from_db_rows(&rows).map_err(e)?;
        let s: f64 = (0..3).map(|k| offload_probability(&three.cfg, &b, 0, k)).sum();
        if (s - 1.0).abs() > 1e-12 {
            failed.push("offload probabilities sum to one");
            break;
        }
    }

    let eval = Evaluator::analytical(SecpMethod::Auto);
    let l = common::preset("two_types_ncc.toml");
    let base = sweep(&l.cfg, &l.bias, "bias[2][2]", db_grid(0.0, 20.0, 41), &eval)?;
    let mut shifted = l.bias.clone();
    for k in 0..2 {
        shifted.set(1, k, shifted.get(1, k) * db_to_linear(7.0));
    }
    let moved = sweep(&l.cfg, &shifted, "bias[2][2]", db_grid(7.0, 27.0, 41), &eval)?;
    if moved.argmax_index != base.argmax_index || (moved.best - base.best).abs() > 1e-12 {
        failed.push("per-type bias scale invariance");
    }

    let f3 = common::preset("three_types.toml");
    let mut prev: Option<Vec<(f64, f64)>> = None;
    for j in 1..=40 {
        let mut cfg = f3.cfg.clone();
        for u in &mut cfg.user_types {
            u.target_latency_s = 0.25e-3 * j as f64;
        }
        let r = overall_secp(&cfg, &f3.bias, SecpMethod::Auto).map_err(e)?;
        let now: Vec<(f64, f64)> = r.pairs.iter().map(|p| (p.secp, p.scp)).collect();
        if now.iter().any(|&(s, c)| !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&c) || s > c + 1e-12) {
            failed.push("probabilities in [0, 1] with p_ec ≤ p_cp");
            break;
        }
        if let Some(p) = &prev {
            if p.iter().zip(&now).any(|(a, b)| b.0 < a.0 - 1e-12 || b.1 < a.1 - 1e-12) {
                failed.push("monotone in the latency budget");
                break;
            }
        }
        prev = Some(now);
    }

    for (rates, sizes, mu) in [(vec![3.0], vec![1], 9.0), (vec![1.0, 0.5, 0.4], vec![1, 2, 3], 4.0), (vec![0.2, 0.1], vec![2, 6], 3.0)] {
        let q = QueueLoad::new(0, rates, sizes, mu).map_err(e)?;
        let g = GammaApproxParams::from_load(&q).map_err(e)?.ok_or("empty load")?;
        let (m1, m2) = takacs_moments(&q).map_err(e)?;
        let (g1, g2) = g.mixture_moments();
        if (g1 / m1 - 1.0).abs() > 1e-12 || (g2 / m2 - 1.0).abs() > 1e-12 {
            failed.push("Gamma moment matching");
        }
    }

    let q = QueueLoad::new(0, vec![1.5, 1.0], vec![1, 2], 6.0).map_err(e)?;
    let runs: Vec<QueueRun> = (0..20).map(|r| simulate_queue(&q, &QueueSimOptions { horizon_slots: 2e4, warmup_slots: 2e3 }, 500 + r).run).collect();
    let gaps: Vec<f64> = runs.iter().map(|r| r.mean_in_system() - r.arrival_rate() * r.mean_sojourn()).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if mean.abs() > 3.0 * sd / n.sqrt() + 1e-6 {
        failed.push("Little's law");
    }

    let mut sf = 0.0f64;
    let mut sf_parts = [0.0f64; 3];
    for &(a, x) in &[(1.5, 0.7), (2.0, 2.0), (3.0, 5.0), (5.0, 3.5), (0.5, 1.2)] {
        let ga = statrs::function::gamma::gamma(a);
        let sub = |u: f64| {
            let t = u * u;
            2.0 * u * t.powf(a - 1.0) * (-t).exp() / ga
        };
        sf_parts[0] = sf_parts[0].max((regularized_lower_gamma(a, x).map_err(e)? - simpson(&sub, 0.0, x.sqrt(), 20_000)).abs());
    }
    for &x in &[0.3, 1.0, 4.0, 12.0] {
        let si = simpson(&|t: f64| if t == 0.0 { 1.0 } else { t.sin() / t }, 0.0, x, 20_000) - std::f64::consts::FRAC_PI_2;
        let ci = 0.577_215_664_901_532_9 + x.ln() + simpson(&|t: f64| if t == 0.0 { 0.0 } else { (t.cos() - 1.0) / t }, 0.0, x, 20_000);
        sf_parts[1] = sf_parts[1].max((sine_integral(x).map_err(e)? - si).abs()).max((cosine_integral(x).map_err(e)? - ci).abs());
    }
    for &(a, b, z) in &[(2.0, 3.5, 1.5), (1.0, 2.5, -3.0), (3.0, 4.0, 0.5)] {
        let c = statrs::function::gamma::gamma(b) / (statrs::function::gamma::gamma(a) * statrs::function::gamma::gamma(b - a));
        // t = 1 − s² smooths the (1 − t)^(b−a−1) endpoint
        let f = |s: f64| {
            let t = 1.0 - s * s;
            2.0 * s.powf(2.0 * (b - a) - 1.0) * (z * t).exp() * t.powf(a - 1.0)
        };
        sf_parts[2] = sf_parts[2].max((hyp1f1(a, b, z).map_err(e)? - c * simpson(&f, 0.0, 1.0, 20_000)).abs());
    }
    sf = sf_parts.iter().fold(sf, |m, &x| m.max(x));
    if sf > 1e-8 {
        failed.push("special functions vs quadrature");
        eprintln!("special function errors (incomplete gamma, Si/Ci, 1F1): {sf_parts:?}");
    }

    let c = &l.cfg;
    let mut wide = c.clone();
    wide.bandwidth_up_hz *= 3.0;
    wide.bandwidth_down_hz *= 3.0;
    for k in 0..2 {
        let (u, d) = (uplink_max_rate(c, &l.bias, 0, k).map_err(e)?, downlink_max_rate_lb(c, &l.bias, 0, k).map_err(e)?);
        let (u3, d3) = (uplink_max_rate(&wide, &l.bias, 0, k).map_err(e)?, downlink_max_rate_lb(&wide, &l.bias, 0, k).map_err(e)?);
        if (u3 / u - 3.0).abs() > 1e-12 || (d3 / d - 3.0).abs() > 1e-12 {
            failed.push("rates linear in bandwidth");
        }
        let mut last = (f64::INFINITY, f64::INFINITY);
        for j in 1..=19 {
            let mut cb = c.clone();
            cb.user_types[0].coverage_up[k] = 0.05 * j as f64;
            cb.user_types[0].coverage_down[k] = 0.05 * j as f64;
            let now = (uplink_max_rate(&cb, &l.bias, 0, k).map_err(e)?, downlink_max_rate_lb(&cb, &l.bias, 0, k).map_err(e)?);
            if now.0 >= last.0 || now.1 >= last.1 {
                failed.push("rates decreasing in coverage target");
                break;
            }
            last = now;
        }
    }

    failed.dedup();
    let detail = if failed.is_empty() {
        format!("all property checks hold (special functions max error {sf:.1e}); the full suites run as the crate tests")
    } else {
        format!("failed: {}", failed.join(", "))
    };
    Ok((failed.is_empty(), detail))
}

fn main() {
    // the libtest flags cargo passes (e.g. --list) do not apply here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    let mut ok = true;

    let t = Instant::now();
    let out = closed_forms();
    let fast = t.elapsed().as_secs_f64() < 10.0;
    ok &= report(1, "closed forms vs inversion", t, out.map(|(p, d)| (p && fast, d)));

    let t = Instant::now();
    let out = gamma_fidelity();
    let fast = t.elapsed().as_secs_f64() < 300.0;
    ok &= report(2, "Gamma approximation vs simulation", t, out.map(|(p, d)| (p && fast, d)));

    let t = Instant::now();
    ok &= report(3, "computing probability vs simulation", t, scp_vs_simulation());
    let t = Instant::now();
    ok &= report(4, "optimal bias landscape", t, bias_landscape());
    let t = Instant::now();
    ok &= report(5, "tier-count benefit", t, tier_count());
    let t = Instant::now();
    ok &= report(6, "computation capability study", t, ncc_study());

    let t = Instant::now();
    let out = properties();
    let fast = t.elapsed().as_secs_f64() < 60.0;
    ok &= report(7, "property suites", t, out.map(|(p, d)| (p && fast, d)));

    println!("acceptance report finished in {:.1} s", t0.elapsed().as_secs_f64());
    if !ok {
        std::process::exit(1);
    }
}
