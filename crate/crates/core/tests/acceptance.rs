//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed. The binary
//! fails when a criterion's outcome differs from `EXPECTED_FAIL`: a
//! regression, or a known failure that started passing.

mod common;

use std::time::{Duration, Instant};

use postsel::bellprep::{purified_state, synthesize_encoding_network, PurificationSchedule, StepOrder};
use postsel::error_models::{uniform_physical_set, GateErrorSet, PhysicalErrorParams, Spectator};
use postsel::gates::{level_step, StepOptions};
use postsel::run::{
    formal_gate_set, grid_csv, run_formal_check, run_grid, run_point, saturation_boundary, GridConfig, PointReport, RunConfig,
};
use postsel::scalar::{PolyCtx, DEFAULT_DEGREE_CAP, DEFAULT_E_MAX};

/// Criteria that fail with the re-synthesized networks; see README.
const EXPECTED_FAIL: &[usize] = &[7, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let took = t.elapsed();
    if took > limit {
        o.pass = false;
        o.detail += &format!("; took {took:.1?} > {limit:?}");
    } else {
        o.detail += &format!(" [{took:.1?}]");
    }
    o
}

fn zero_noise() -> Outcome {
    let zero = RunConfig { params: PhysicalErrorParams::new(0.0, 0.0), ..RunConfig::default() };
    let report = match run_point(&zero) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut prev = GateErrorSet::<f64>::zero(0, &());
    let mut delta = true;
    for &s in &zero.schedule {
        let net = synthesize_encoding_network(s).expect("synthesis");
        let r = level_step(&prev, &net, &(), StepOptions::default()).expect("noiseless level");
        delta &= r.computed.is_delta() && r.gate_errors.is_zero();
        prev = r.gate_errors;
    }
    let zeros = report.levels.iter().all(|l| {
        let s = &l.summary;
        [s.prep_x, s.prep_z, s.meas_x, s.meas_z, s.cnot_total, s.hadamard_total, l.decode_total]
            .iter()
            .chain(&s.cnot_marginal)
            .chain(&s.hadamard)
            .chain(&l.decode)
            .all(|&v| v == 0.0)
    });
    let pass = delta && zeros && report.decode_bound == 0.0;
    outcome(pass, format!("{} levels, delta Bell models {delta}, all quantities zero {zeros}", report.levels.len()))
}

fn oracle() -> Outcome {
    match common::oracle::compare_random_networks(0xacce, 40) {
        Ok((compared, rejected)) => outcome(
            compared >= 20,
            format!("{compared} networks match exactly (rational) and to 1e-12 (double); {rejected} fully rejected"),
        ),
        Err(e) => outcome(false, e),
    }
}

fn order_normalization() -> Outcome {
    let randomized = StepOptions {
        schedule: PurificationSchedule { order: StepOrder::Randomized, ..PurificationSchedule::default() },
        ..StepOptions::default()
    };
    let mut worst = 0.0f64;
    for config in [RunConfig::default(), RunConfig::second_example()] {
        let mut prev = uniform_physical_set::<f64>(&config.params, &()).expect("physical set");
        for &s in &config.schedule {
            let net = synthesize_encoding_network(s).expect("synthesis");
            match level_step(&prev, &net, &(), randomized) {
                Ok(r) => {
                    worst = worst.max(r.computed.order_mismatch());
                    prev = r.gate_errors;
                }
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    // Integer coefficients under a uniform parameter make the polynomial
    // comparison exact.
    let ctx = PolyCtx::default();
    let mut exact = true;
    for s in [Spectator::Plus, Spectator::Zero] {
        let net = synthesize_encoding_network(s).expect("synthesis");
        let schedule = PurificationSchedule { order: StepOrder::Randomized, ..PurificationSchedule::default() };
        match purified_state(&formal_gate_set(ctx), &net, ctx, schedule) {
            Ok((_, masses)) => {
                exact &= masses.iter().all(|m| {
                    let (a, b) = &m.gross;
                    let rem = (a.remainder() - b.remainder()).abs() <= 1e-12 * a.remainder().max(b.remainder());
                    a.coeffs() == b.coeffs() && rem
                })
            }
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    outcome(
        worst <= 1e-12 && exact,
        format!("double max relative mismatch {worst:.2e} over all levels; polynomial level-1 coefficients equal: {exact}"),
    )
}

fn formal() -> Outcome {
    match run_formal_check(DEFAULT_DEGREE_CAP, DEFAULT_E_MAX, 2) {
        Ok(r) => {
            let v: usize = r.spectators.iter().map(|s| s.violations.len()).sum();
            let checked: usize = r.spectators.iter().map(|s| s.checked).sum();
            outcome(r.pass, format!("{checked} syndromes checked, {v} violations"))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn quality(ex1: &PointReport, ex2: &PointReport) -> Outcome {
    let (a, b) = (&ex1.levels[0], &ex2.levels[0]);
    let pass = a.quality_min >= 1.0 - 1e-6 && within(a.quality_max, 1.5, 6.5) && within(b.quality_max, 1.0, 1.5);
    outcome(
        pass,
        format!(
            "example 1 level 1 q_min {:.6} q_max {:.3} (reference 3.20); example 2 q_max {:.3} (reference 1.11)",
            a.quality_min, a.quality_max, b.quality_max
        ),
    )
}

fn table_one(ex1: &PointReport) -> Outcome {
    let l = &ex1.levels[0];
    let s = &l.summary;
    let pass = within(s.prep_x, 2e-3, 8e-3)
        && within(s.meas_x, 2e-3, 8e-3)
        && within(s.cnot_total, 1.5e-2, 6e-2)
        && within(s.hadamard_total, 1.2e-2, 5e-2)
        && within(l.decode_total, 1.2e-2, 5e-2);
    outcome(
        pass,
        format!(
            "prep X {:.3e} meas X {:.3e} cnot {:.3e} Hadamard {:.3e} decode {:.3e} (reference 4.14e-3, 2.98e-2, 2.44e-2, 2.34e-2)",
            s.prep_x, s.meas_x, s.cnot_total, s.hadamard_total, l.decode_total
        ),
    )
}

fn suppression(ex1: &PointReport) -> Outcome {
    let (l4, l5) = (ex1.levels[3].max_gate_error, ex1.levels[4].max_gate_error);
    let totals: Vec<f64> = ex1.levels.iter().map(|l| l.decode_total).collect();
    let monotone = totals[1..].windows(2).all(|w| w[1] <= w[0]);
    let pass = l4 <= 1e-3 && l5 <= 1e-6 && monotone && ex1.decode_bound <= 0.05;
    let shown: Vec<String> = totals.iter().map(|t| format!("{t:.3e}")).collect();
    outcome(
        pass,
        format!(
            "max error L4 {l4:.3e} L5 {l5:.3e}; decode totals [{}] non-increasing from L2: {monotone}; bound {:.3e}",
            shown.join(", "),
            ex1.decode_bound
        ),
    )
}

fn example_two(ex2: &PointReport) -> Outcome {
    let l2 = ex2.levels[1].max_gate_error;
    outcome(
        l2 <= 1e-4 && ex2.decode_bound <= 1.2e-2,
        format!("level-2 max error {l2:.3e}; decode bound {:.3e}", ex2.decode_bound),
    )
}

fn injection_budget(ex1: &PointReport) -> Outcome {
    let (i, b) = (&ex1.injection, &ex1.budget);
    let pass = i.total <= 0.15 && i.distillable && b.pass;
    outcome(
        pass,
        format!(
            "injection {:.4} (distillable {}); budget {:.4} = {:.3} + {:.3} + 2×{:.4} vs {:.2}",
            i.total, i.distillable, b.total, b.bell_measurement, b.memory, ex1.decode_bound, b.tolerance
        ),
    )
}

fn threshold(grid: &[postsel::run::GridRow], config: &GridConfig) -> Outcome {
    let p_prep = config.p_prep_axis.iter().copied().fold(f64::INFINITY, f64::min);
    let (ok, failed) = saturation_boundary(grid, p_prep, 4);
    let pass = matches!((ok, failed), (Some(a), Some(b)) if a >= 0.02 && b <= 0.08);
    outcome(pass, format!("p_prep {p_prep:.3e}: survives up to {ok:?}, saturates from {failed:?} (reference 0.035 to 0.05)"))
}

fn y_suppression(ex1: &PointReport, ex2: &PointReport) -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    for l in ex1.levels.iter().chain(&ex2.levels) {
        let [x, z, y] = l.summary.cnot_marginal;
        pass &= y < x && y < z;
        worst = worst.max(y / x.min(z));
    }
    outcome(pass, format!("largest Y / min(X, Z) ratio {worst:.3e}"))
}

fn determinism(ex1: &PointReport, grid_csv_text: &str, config: &GridConfig) -> Outcome {
    let again = run_point(&RunConfig::default()).expect("example 1");
    let same_report = again.table() == ex1.table() && again.document_string() == ex1.document_string();
    let same_csv = grid_csv(&run_grid(config)) == grid_csv_text;
    outcome(same_report && same_csv, format!("report identical {same_report}; grid CSV identical {same_csv}"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "zero-noise soundness", timed(Duration::from_secs(1), zero_noise)));
    results.push((2, "oracle equivalence", timed(Duration::from_secs(120), oracle)));
    results.push((3, "purification order normalization", timed(Duration::from_secs(600), order_normalization)));
    results.push((4, "formal second-order suppression", timed(Duration::from_secs(300), formal)));

    let t = Instant::now();
    let ex1 = run_point(&RunConfig::default()).expect("example 1 run");
    let ex1_time = t.elapsed();
    let ex2 = run_point(&RunConfig::second_example()).expect("example 2 run");
    results.push((5, "independence quality", quality(&ex1, &ex2)));
    results.push((6, "example 1 level-1 magnitudes", {
        let mut o = table_one(&ex1);
        o.pass &= ex1_time < Duration::from_secs(600);
        o.detail += &format!(" [{ex1_time:.1?} for five levels]");
        o
    }));
    results.push((7, "level-wise suppression", suppression(&ex1)));
    results.push((8, "example 2", example_two(&ex2)));
    results.push((9, "injection and budget", injection_budget(&ex1)));

    let config = GridConfig::default();
    let t = Instant::now();
    let grid = run_grid(&config);
    let grid_time = t.elapsed();
    let csv = grid_csv(&grid);
    results.push((10, "threshold window", {
        let mut o = threshold(&grid, &config);
        o.pass &= grid_time < Duration::from_secs(7200);
        o.detail += &format!(" [full grid {} points in {grid_time:.1?}]", config.points().len());
        o
    }));
    results.push((11, "Y suppression", y_suppression(&ex1, &ex2)));
    results.push((12, "determinism", determinism(&ex1, &csv, &config)));

    let mut unexpected = 0;
    for (n, name, o) in &results {
        let known = EXPECTED_FAIL.contains(n);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if o.pass == known {
            unexpected += 1;
        }
        println!("criterion {n:>2} {tag:<17} {name}: {}", o.detail);
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("{passed}/{} criteria pass", results.len());
    if unexpected > 0 {
        eprintln!("{unexpected} criterion outcome(s) differ from the recorded expectation");
        std::process::exit(1);
    }
}
