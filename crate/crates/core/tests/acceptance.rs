//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use softpulse::algebra::{
    chemical_shift, jaynes_cummings, op_norm, CouplingSet, ModelParams, Op, C64,
};
use softpulse::cli::{cmd_effham, run_experiment, ExperimentConfig, ModelArgs, ModelKind};
use softpulse::designer::{design, DesignSpec, Family};
use softpulse::propagate::{propagate_period, ControlSchedule, DEFAULT_STEPS_PER_PULSE};
use softpulse::sequences::{
    expand_pulse, loglog_slope, named, order_check, parse_sequence, Axis, PulseSpec, Reference,
    Sign,
};
use softpulse::shapes::{
    compute_params, solve_hermitian_gamma, table_report, PulseShape, DEFAULT_QUAD_NODES,
    HERMITIAN_GAMMA,
};

/// Reference `(s, α/2, ζ)` rows.
const TABLE: [(&str, f64, f64, f64); 5] = [
    ("delta", 0.0, 0.0, 0.25),
    ("G0.05", 0.0744895, 0.0349708, 0.249476),
    ("G0.10", 0.148979, 0.0653938, 0.247905),
    ("H0.05", 0.0, 0.00153849, 0.249647),
    ("H0.10", 0.0, 0.00615393, 0.248589),
];
const TABLE_TOL: f64 = 1e-5;
const GAMMA_REF: f64 = 0.9609317217;
const GAMMA_TOL: f64 = 1e-6;
const DESIGN_RESIDUAL_TOL: f64 = 1e-10;
const SELF_REFOCUS_TOL: f64 = 1e-9;
const ZETA_FLAG: f64 = 0.01;
const ECHO_TOL: f64 = 1e-12;
const EXPANSION_SETS: usize = 20;
const EXPANSION_EXPONENT: f64 = 3.0;
const EXPANSION_EXPONENT_TOL: f64 = 0.2;
const SECOND_ORDER_MIN_EXPONENT: f64 = 2.8;
const FIRST_ORDER_EXPONENT_TOL: f64 = 0.2;
const HEFF_REDUCTION: f64 = 500.0;
const HEATING_RATIO: f64 = 10.0;
const INFIDELITY_MAX: f64 = 1e-3;
const QUANTA_MAX: f64 = 1e-2;
const TRUNCATION_TOL: f64 = 1e-6;
const UNITARITY_DRIFT_TOL: f64 = 1e-8;
const STEP_AGREEMENT_TOL: f64 = 1e-8;

type Outcome = Result<(bool, String), softpulse::Error>;

fn jc(omega_r: f64, omega_0: f64, g: f64, n_max: usize) -> CouplingSet {
    jaynes_cummings(&ModelParams { omega_r, omega_0, g, n_max, delta_shift: 0.0 }).expect("valid model")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let rows = table_report(DEFAULT_QUAD_NODES)?;
    let elapsed = start.elapsed().as_secs_f64();
    // The report also runs the designer once; time the analytic rows alone.
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut delta_exact = false;
    for (label, s, a2, z) in TABLE {
        let row = rows.iter().find(|r| r.label == label).expect("row present");
        let shape = match label {
            "delta" => PulseShape::delta(),
            "G0.05" => PulseShape::gaussian(0.05)?,
            "G0.10" => PulseShape::gaussian(0.10)?,
            "H0.05" => PulseShape::hermitian(0.05, HERMITIAN_GAMMA)?,
            _ => PulseShape::hermitian(0.10, HERMITIAN_GAMMA)?,
        };
        let p = compute_params(&shape, DEFAULT_QUAD_NODES)?;
        assert_eq!(p, row.params);
        if label == "delta" {
            delta_exact = p.s == 0.0 && p.alpha == 0.0 && p.zeta == 0.25;
        }
        worst = worst.max((p.s - s).abs()).max((p.alpha / 2.0 - a2).abs()).max((p.zeta - z).abs());
    }
    let analytic = start.elapsed().as_secs_f64();
    let pass = worst <= TABLE_TOL && delta_exact && analytic < 1.0;
    Ok((
        pass,
        format!(
            "max |Δ| = {worst:.2e} (tol {TABLE_TOL:.0e}), delta row exact = {delta_exact}, analytic rows {analytic:.3} s, full table {elapsed:.3} s"
        ),
    ))
}

fn criterion_2() -> Outcome {
    let gamma = solve_hermitian_gamma(0.05, DEFAULT_QUAD_NODES)?;
    let err = (gamma - GAMMA_REF).abs();
    Ok((err < GAMMA_TOL, format!("γ = {gamma:.10}, |γ − {GAMMA_REF}| = {err:.2e} (tol {GAMMA_TOL:.0e})")))
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (family, zeta_ref) in [(Family::S, 0.238227), (Family::Q, 0.239889)] {
        let d = design(DesignSpec::new(family, 1), 1e-13)?;
        let p = compute_params(&d.shape, DEFAULT_QUAD_NODES)?;
        let mut ok = d.max_residual() < DESIGN_RESIDUAL_TOL && p.s.abs() < SELF_REFOCUS_TOL;
        if family == Family::Q {
            ok &= p.alpha.abs() < SELF_REFOCUS_TOL;
        }
        pass &= ok;
        let dz = (p.zeta - zeta_ref).abs();
        let flag = if dz > ZETA_FLAG { "MISMATCH" } else { "ok" };
        notes.push(format!(
            "{family}1 residual {:.1e} s {:+.1e} α {:+.1e} ζ {:.6} vs {zeta_ref} ({flag})",
            d.max_residual(),
            p.s,
            p.alpha,
            p.zeta
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn criterion_4() -> Outcome {
    let seq = parse_sequence("X d(1.5) -X d(1.5)")?;
    let schedule = ControlSchedule::new(seq, PulseShape::delta())?;
    let u = propagate_period(&chemical_shift(0.7), &schedule, DEFAULT_STEPS_PER_PULSE)?.u;
    let err = op_norm(&(u - Op::identity(2, 2)));
    Ok((err < ECHO_TOL, format!("‖U − 1‖ = {err:.2e} (tol {ECHO_TOL:.0e})")))
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Op {
    let m = Op::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()) * C64::from(0.5)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let shapes = [PulseShape::gaussian(0.10)?, PulseShape::hermitian(0.10, HERMITIAN_GAMMA)?, PulseShape::gaussian(0.05)?];
    let params: Vec<_> = shapes.iter().map(|s| compute_params(s, DEFAULT_QUAD_NODES)).collect::<Result<_, _>>()?;
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let scales = [0.04, 0.02, 0.01];
    let mut exponents = Vec::new();
    for _ in 0..EXPANSION_SETS {
        let d = rng.gen_range(1..=4);
        let base = CouplingSet::new(
            random_hermitian(&mut rng, d),
            random_hermitian(&mut rng, d),
            random_hermitian(&mut rng, d),
            random_hermitian(&mut rng, d),
        )?;
        let base = base.scaled(1.0 / base.max_norm());
        let k = rng.gen_range(0..shapes.len());
        let sign = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
        let pulse = PulseSpec::new(axes[rng.gen_range(0..3)], sign);
        let seq = parse_sequence(&pulse.to_string())?;
        let schedule = ControlSchedule::new(seq, shapes[k].clone())?;
        let mut residuals = Vec::new();
        for &l in &scales {
            let c = base.scaled(l);
            let u = propagate_period(&c, &schedule, DEFAULT_STEPS_PER_PULSE)?.u;
            let x = expand_pulse(&c, &params[k], pulse)?.evaluate(shapes[k].duration());
            residuals.push(op_norm(&(u - x)));
        }
        exponents.push(loglog_slope(&scales, &residuals));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let (lo, hi) = exponents.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let pass = exponents.iter().all(|e| (e - EXPANSION_EXPONENT).abs() <= EXPANSION_EXPONENT_TOL) && elapsed < 30.0;
    Ok((pass, format!("{EXPANSION_SETS} sets, exponents in [{lo:.3}, {hi:.3}], {elapsed:.2} s")))
}

fn criterion_6() -> Outcome {
    let q1 = softpulse::designer::builtin("Q1")?;
    let c = jc(0.117, 0.0, 0.1, 4);
    let scales = [0.1, 0.03, 0.01];
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["8a", "8s"] {
        let oc = order_check(&named(name).expect("named"), &c, &q1, &scales, Reference::Free, DEFAULT_STEPS_PER_PULSE)?;
        let e = oc.exponent.unwrap_or(f64::NAN);
        pass &= e >= SECOND_ORDER_MIN_EXPONENT;
        notes.push(format!("{name}+Q1 exponent {e:.3}"));
    }
    let g = PulseShape::gaussian(0.10)?;
    let oc = order_check(&named("xbarx").expect("named"), &c, &g, &scales, Reference::Free, DEFAULT_STEPS_PER_PULSE)?;
    let e = oc.exponent.unwrap_or(f64::NAN);
    pass &= (e - 1.0).abs() <= FIRST_ORDER_EXPONENT_TOL;
    notes.push(format!("xbarx+G0.10 exponent vs free {e:.3}"));
    Ok((pass, notes.join(", ")))
}

fn criterion_7() -> Outcome {
    let q1 = softpulse::designer::builtin("Q1")?;
    let seq = named("8a").expect("named");
    let c = jc(0.0, 0.0, 0.1, 8);
    let big = softpulse::sequences::period_defect(&seq, &c, &q1, Reference::Free, DEFAULT_STEPS_PER_PULSE)?;
    let small =
        softpulse::sequences::period_defect(&seq, &c.scaled(0.1), &q1, Reference::Free, DEFAULT_STEPS_PER_PULSE)?;
    let ratio = big / small;
    Ok((
        ratio >= HEFF_REDUCTION,
        format!("defect {big:.3e} → {small:.3e} under 10× scaling, ratio {ratio:.1} (need ≥ {HEFF_REDUCTION})"),
    ))
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(idx).expect("column").parse().expect("number")).collect()
}

fn run(sequence: &str, shape: &str, omega_r: f64, n_max: usize) -> Result<String, softpulse::Error> {
    let cfg = ExperimentConfig {
        sequence: sequence.into(),
        shape: shape.into(),
        model: ModelParams { omega_r, n_max, ..ModelParams::default() },
        ..ExperimentConfig::default()
    };
    Ok(run_experiment(&cfg)?.csv)
}

fn criterion_8() -> Outcome {
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let n_4p = max(column(&run("4p", "G0.10", 0.0, 8)?, 3));
    let n_8s_res = max(column(&run("8s", "Q1", 0.0, 8)?, 3));
    let a = n_4p > HEATING_RATIO * n_8s_res;

    let off = run("8s", "Q1", 0.117, 8)?;
    let infid = column(&off, 2).into_iter().map(|f| 1.0 - f).fold(0.0, f64::max);
    let n_off = max(column(&off, 3));
    let b = infid < INFIDELITY_MAX && n_off < QUANTA_MAX;

    let wide = run("8s", "Q1", 0.117, 12)?;
    let mut diff: f64 = 0.0;
    for idx in [2, 3] {
        for (x, y) in column(&off, idx).iter().zip(column(&wide, idx)) {
            diff = diff.max((x - y).abs());
        }
    }
    let c = diff < TRUNCATION_TOL;
    Ok((
        a && b && c,
        format!(
            "(a) ⟨n⟩max 4p+G0.10 {n_4p:.3e} vs 8s+Q1 {n_8s_res:.3e} [{}]; (b) 1−Fmin {infid:.3e}, ⟨n⟩max {n_off:.3e} [{}]; (c) n_max 8 vs 12 max diff {diff:.3e} [{}]",
            verdict(a),
            verdict(b),
            verdict(c)
        ),
    ))
}

fn criterion_9() -> Outcome {
    let q1 = softpulse::designer::builtin("Q1")?;
    let schedule = ControlSchedule::new(named("8s").expect("named"), q1)?;
    let c = jc(0.117, 0.0, 0.1, 8);
    let prop = propagate_period(&c, &schedule, DEFAULT_STEPS_PER_PULSE)?;
    let dim = c.joint_dim();
    let mut u = Op::identity(dim, dim);
    for _ in 0..1000 {
        u = &prop.u * u;
    }
    let drift = op_norm(&(u.adjoint() * &u - Op::identity(dim, dim)));
    let mut worst_dev = prop.deviation;
    for (seq, shape) in [("4p", "G0.10"), ("8a", "Q1"), ("4pxz", "H0.10"), ("8s", "S1")] {
        let s = ControlSchedule::new(named(seq).expect("named"), softpulse::cli::parse_shape(shape)?)?;
        worst_dev = worst_dev.max(propagate_period(&c, &s, DEFAULT_STEPS_PER_PULSE)?.deviation);
    }
    Ok((
        drift < UNITARITY_DRIFT_TOL && worst_dev < STEP_AGREEMENT_TOL,
        format!("‖U†U − 1‖ after 1000 periods {drift:.2e}; worst step-halving deviation {worst_dev:.2e}"),
    ))
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (seq, omega_0) in [("4p", 0.0), ("4p", 0.05), ("8a", 0.0), ("8a", 0.05)] {
        let model = ModelArgs {
            sequence: seq.into(),
            shape: "gaussian:0.10".into(),
            model: ModelKind::Jc,
            omega_r: 0.117,
            omega_0,
            g: 0.1,
            n_max: 4,
            delta_shift: 0.0,
            steps: DEFAULT_STEPS_PER_PULSE,
        };
        let report = cmd_effham(&model, &[0.1, 0.01, 0.001])?;
        let rows: Vec<&str> = report.lines().filter(|l| l.contains("matches propagator") || l.contains("does not match")).collect();
        let cavity = rows.iter().find(|l| l.contains("cavity form")).copied().unwrap_or("");
        pass &= rows.len() == 3 && rows[0].contains("matches propagator");
        let v = if cavity.contains("matches propagator") { "matches" } else { "does not match" };
        notes.push(format!("{seq} ω0={omega_0}: cavity form {v}"));
    }
    Ok((pass, notes.join("; ")))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("shape-parameter table regression", criterion_1),
        ("Hermitian γ recovery", criterion_2),
        ("designed self-refocusing shapes", criterion_3),
        ("hard-pulse echo", criterion_4),
        ("pulse-expansion order", criterion_5),
        ("sequence order exponents", criterion_6),
        ("8a effective-Hamiltonian defect", criterion_7),
        ("figure-protocol properties", criterion_8),
        ("propagator health", criterion_9),
        ("generic vs cavity cross-check", criterion_10),
    ];
    let mut failures = 0;
    for (i, (label, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!("criterion {:>2} {}: {label}: {detail}", i + 1, verdict(ok));
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
