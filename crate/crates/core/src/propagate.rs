//! Exact time-ordered propagation of `H(t) = ½ V(t) σ_axis + Hs` over
//! pulse sequences.
//!
//! Shaped pulses use the fourth-order commutator-free Magnus scheme with two
//! Hermitian exponentials per step, evaluated at the Gauss–Legendre nodes.
//! Delta pulses are applied as exact `−i(±σμ)` kicks at the pulse centre,
//! with free evolution over the two half-intervals. Delays are exact.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::algebra::{
    expm_herm, expm_herm_unchecked, hermiticity_deviation, nearest_unitary, on_qubit, op_norm, rest_populations, assemble, number,
    reduced_qubit, CouplingSet, Ket, Op, C64, HERMITIAN_TOL, I,
};
use crate::error::{Error, Result};
use crate::sequences::{Element, PulseSpec, Sequence};
use crate::shapes::PulseShape;

pub const DEFAULT_STEPS_PER_PULSE: usize = 256;
pub const MIN_STEPS_PER_PULSE: usize = 16;
/// Largest step count the self-convergence check may escalate to.
pub const MAX_STEPS_PER_PULSE: usize = 1 << 15;
/// Accepted `‖U_n − U_2n‖` between step counts `n` and `2n`.
pub const STEP_CONVERGENCE_TOL: f64 = 1e-8;
/// Population of the top oscillator levels above which a trace warns.
pub const LEAKAGE_WARN: f64 = 1e-6;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const GAUSS_C1: f64 = 0.5 - SQRT3 / 6.0;
const GAUSS_C2: f64 = 0.5 + SQRT3 / 6.0;
const CF4_A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// A sequence paired with the envelope used for every pulse in it.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    sequence: Sequence,
    shape: PulseShape,
}

impl ControlSchedule {
    pub fn new(sequence: Sequence, shape: PulseShape) -> Result<Self> {
        if sequence.elements.is_empty() {
            return Err(Error::SequenceParse("empty sequence".into()));
        }
        Ok(ControlSchedule { sequence, shape })
    }

    pub fn sequence(&self) -> &Sequence {
        &self.sequence
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    pub fn tau_p(&self) -> f64 {
        self.shape.duration()
    }

    pub fn period(&self) -> f64 {
        self.sequence.period(self.tau_p())
    }

    /// Field components `(Vx, Vy, Vz)` at time `t ∈ [0, T]`. Delta pulses
    /// have no pointwise value and are reported as zero.
    pub fn field(&self, t: f64) -> Result<[f64; 3]> {
        let period = self.period();
        if !(0.0..=period).contains(&t) {
            return Err(Error::TimeOutOfRange { t, duration: period });
        }
        let tau = self.tau_p();
        let mut start = 0.0;
        for e in &self.sequence.elements {
            let len = match e {
                Element::Pulse(_) => tau,
                Element::Delay(d) => d * tau,
            };
            if t <= start + len {
                if let Element::Pulse(p) = e {
                    let mut v = [0.0; 3];
                    if !self.shape.is_delta() {
                        v[p.axis.index()] = p.sign.value() * self.shape.amplitude_unchecked(t - start);
                    }
                    return Ok(v);
                }
                return Ok([0.0; 3]);
            }
            start += len;
        }
        Ok([0.0; 3])
    }
}

struct Stepper<'a> {
    hs: &'a Op,
    d: usize,
}

impl Stepper<'_> {
    fn pulse(&self, shape: &PulseShape, pulse: PulseSpec, steps: usize) -> Op {
        let tau = shape.duration();
        let n = self.hs.nrows();
        if shape.is_delta() {
            let half = expm_herm_unchecked(self.hs, tau / 2.0);
            let kick = on_qubit(&(pulse.control_op() * (-I)), self.d);
            return &half * kick * &half;
        }
        let ctrl = on_qubit(&pulse.control_op(), self.d) * C64::from(0.5);
        let h = tau / steps as f64;
        // a₁ + a₂ = ½: each exponential carries half of the static part.
        let half_hs = self.hs * C64::from(0.5);
        let mut u = Op::identity(n, n);
        for k in 0..steps {
            let t0 = k as f64 * h;
            let v1 = shape.amplitude_unchecked(t0 + GAUSS_C1 * h);
            let v2 = shape.amplitude_unchecked(t0 + GAUSS_C2 * h);
            // a₂H₁ + a₁H₂ acts first, then a₁H₁ + a₂H₂
            let first = &half_hs + &ctrl * C64::from(CF4_A2 * v1 + CF4_A1 * v2);
            let second = &half_hs + &ctrl * C64::from(CF4_A1 * v1 + CF4_A2 * v2);
            u = expm_herm_unchecked(&second, h) * expm_herm_unchecked(&first, h) * u;
        }
        // Removes accumulated rounding drift; the scheme itself is unitary.
        nearest_unitary(&u)
    }
}

/// One-period propagator with a fixed step count and no self-check.
pub fn propagate_period_fixed(couplings: &CouplingSet, schedule: &ControlSchedule, steps_per_pulse: usize) -> Result<Op> {
    if steps_per_pulse < MIN_STEPS_PER_PULSE {
        return Err(Error::Config(format!(
            "steps_per_pulse must be at least {MIN_STEPS_PER_PULSE}, got {steps_per_pulse}"
        )));
    }
    let hs = assemble(couplings);
    let dev = hermiticity_deviation(&hs);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let stepper = Stepper { hs: &hs, d: couplings.dim() };
    let shape = schedule.shape();
    let mut distinct: Vec<PulseSpec> = Vec::new();
    for p in schedule.sequence().pulses() {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    let cache: HashMap<PulseSpec, Op> =
        distinct.par_iter().map(|&p| (p, stepper.pulse(shape, p, steps_per_pulse))).collect();
    let n = hs.nrows();
    let mut u = Op::identity(n, n);
    for e in &schedule.sequence().elements {
        u = match e {
            Element::Pulse(p) => &cache[p] * u,
            Element::Delay(dl) => expm_herm(&hs, dl * shape.duration())? * u,
        };
    }
    Ok(u)
}

/// Propagator with its self-convergence record.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub u: Op,
    /// Step count of the returned propagator.
    pub steps_per_pulse: usize,
    /// `‖U_{n/2} − U_n‖` for the returned `n`.
    pub deviation: f64,
}

/// One-period propagator, checked by step halving: the step count doubles
/// until two successive answers agree within [`STEP_CONVERGENCE_TOL`].
pub fn propagate_period(couplings: &CouplingSet, schedule: &ControlSchedule, steps_per_pulse: usize) -> Result<Propagation> {
    let mut n = steps_per_pulse;
    let mut coarse = propagate_period_fixed(couplings, schedule, n)?;
    if schedule.shape().is_delta() || schedule.sequence().pulse_count() == 0 {
        return Ok(Propagation { u: coarse, steps_per_pulse: n, deviation: 0.0 });
    }
    loop {
        let fine = propagate_period_fixed(couplings, schedule, 2 * n)?;
        let deviation = op_norm(&(&fine - &coarse));
        if deviation < STEP_CONVERGENCE_TOL {
            return Ok(Propagation { u: fine, steps_per_pulse: 2 * n, deviation });
        }
        if 2 * n >= MAX_STEPS_PER_PULSE {
            return Err(Error::StepConvergence { steps: 2 * n, deviation, limit: STEP_CONVERGENCE_TOL });
        }
        n *= 2;
        coarse = fine;
    }
}

/// Stroboscopic observables of one initial state at one sample time.
#[derive(Debug, Clone)]
pub struct StateSample {
    pub rho_qubit: Op,
    pub n_mean: f64,
    /// Population of the top two oscillator levels (top level only when
    /// there are just two levels).
    pub leakage: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub period: f64,
    pub times: Vec<f64>,
    /// `U(t_k) = U(T)^k`.
    pub propagators: Vec<Op>,
    /// `samples[i][k]`: initial state `i` at sample `k`.
    pub samples: Vec<Vec<StateSample>>,
    pub steps_per_pulse: usize,
    pub step_deviation: f64,
    pub warnings: Vec<String>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn observe(psi: &Ket, d: usize, n_op: &[f64]) -> StateSample {
    let pops = rest_populations(psi, d);
    let n_mean = pops.iter().zip(n_op).map(|(p, n)| p * n).sum();
    let top = if d > 2 { 2 } else { 1 };
    let leakage = pops[d - top..].iter().sum();
    StateSample { rho_qubit: reduced_qubit(psi, d), n_mean, leakage }
}

/// Evolve joint initial states over `n_periods` periods, sampling at each
/// period boundary.
pub fn run_trace(
    couplings: &CouplingSet,
    schedule: &ControlSchedule,
    n_periods: usize,
    initial: &[Ket],
    steps_per_pulse: usize,
) -> Result<EvolutionTrace> {
    let d = couplings.dim();
    let dim = couplings.joint_dim();
    for (i, psi) in initial.iter().enumerate() {
        if psi.len() != dim {
            return Err(Error::DimensionMismatch(format!("initial state {i} has length {}, expected {dim}", psi.len())));
        }
        if (psi.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("initial state {i} is not normalized")));
        }
    }
    let prop = if n_periods == 0 {
        Propagation { u: Op::identity(dim, dim), steps_per_pulse, deviation: 0.0 }
    } else {
        propagate_period(couplings, schedule, steps_per_pulse)?
    };
    let mut propagators = Vec::with_capacity(n_periods + 1);
    propagators.push(Op::identity(dim, dim));
    for k in 0..n_periods {
        let next = &prop.u * &propagators[k];
        propagators.push(next);
    }
    let n_diag: Vec<f64> = number(d).diagonal().iter().map(|z| z.re).collect();
    let samples: Vec<Vec<StateSample>> = initial
        .par_iter()
        .map(|psi0| {
            let mut psi = psi0.clone();
            let mut out = Vec::with_capacity(n_periods + 1);
            out.push(observe(&psi, d, &n_diag));
            for _ in 0..n_periods {
                psi = &prop.u * psi;
                out.push(observe(&psi, d, &n_diag));
            }
            out
        })
        .collect();
    let period = schedule.period();
    let leak = samples.iter().flatten().map(|s| s.leakage).fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if d > 2 && leak > LEAKAGE_WARN {
        warnings.push(format!(
            "top two oscillator levels reach population {leak:.3e} (> {LEAKAGE_WARN:e}); consider raising n_max above {}",
            d - 1
        ));
    }
    Ok(EvolutionTrace {
        period,
        times: (0..=n_periods).map(|k| k as f64 * period).collect(),
        propagators,
        samples,
        steps_per_pulse: prop.steps_per_pulse,
        step_deviation: prop.deviation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{chemical_shift, fock, jaynes_cummings, kron, number, on_rest, product_state, sigma_x, ModelParams};
    use crate::sequences::{named, parse_sequence};

    fn gaussian() -> PulseShape {
        PulseShape::gaussian(0.1).unwrap()
    }

    #[test]
    fn control_off_is_free_oscillator() {
        let m = ModelParams { omega_r: 0.3, g: 0.0, n_max: 3, ..Default::default() };
        let jc = jaynes_cummings(&m).unwrap();
        let sched = ControlSchedule::new(parse_sequence("d(2.5)").unwrap(), gaussian()).unwrap();
        let u = propagate_period(&jc, &sched, 64).unwrap().u;
        let expected = expm_herm(&on_rest(&(number(4) * C64::from(0.3 * std::f64::consts::TAU))), 2.5).unwrap();
        assert!(op_norm(&(u - expected)) < 1e-13);
    }

    #[test]
    fn delta_echo_with_chemical_shift_is_identity() {
        let sched = ControlSchedule::new(parse_sequence("X d(1.0) -X d(1.0)").unwrap(), PulseShape::delta()).unwrap();
        let u = propagate_period(&chemical_shift(0.7), &sched, 64).unwrap().u;
        assert!(op_norm(&(u - Op::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn fourth_order_step_convergence() {
        let jc = jaynes_cummings(&ModelParams { omega_r: 0.1, n_max: 2, ..Default::default() }).unwrap();
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        let exact = propagate_period_fixed(&jc, &sched, 4096).unwrap();
        let e1 = op_norm(&(propagate_period_fixed(&jc, &sched, 64).unwrap() - &exact));
        let e2 = op_norm(&(propagate_period_fixed(&jc, &sched, 128).unwrap() - &exact));
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn step_check_escalates_for_sharp_pulses() {
        let jc = jaynes_cummings(&ModelParams { n_max: 2, ..Default::default() }).unwrap();
        let sched = ControlSchedule::new(named("xbarx").unwrap(), PulseShape::gaussian(0.02).unwrap()).unwrap();
        let p = propagate_period(&jc, &sched, 16).unwrap();
        assert!(p.steps_per_pulse > 32);
        assert!(p.deviation < STEP_CONVERGENCE_TOL);
    }

    #[test]
    fn too_few_steps_rejected() {
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        assert!(matches!(propagate_period(&chemical_shift(0.1), &sched, 8), Err(Error::Config(_))));
    }

    #[test]
    fn commuting_control_matches_separate_exponentials() {
        // Hs ∝ σx commutes with an x pulse.
        let cp = CouplingSet::new(Op::zeros(1, 1), Op::identity(1, 1) * C64::from(0.4), Op::zeros(1, 1), Op::zeros(1, 1)).unwrap();
        let sched = ControlSchedule::new(parse_sequence("X").unwrap(), gaussian()).unwrap();
        let u = propagate_period(&cp, &sched, 64).unwrap().u;
        let expected = expm_herm(&(sigma_x() * C64::from(0.4)), 1.0).unwrap() * sigma_x() * (-I);
        assert!(op_norm(&(u - expected)) < 1e-10);
    }

    #[test]
    fn field_reports_active_axis() {
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        // First pulse in time order of 4p is Y.
        let v = sched.field(0.5).unwrap();
        assert!(v[0] == 0.0 && v[1] > 0.0 && v[2] == 0.0);
        assert!(sched.field(4.5).is_err());
    }

    #[test]
    fn trace_zero_periods() {
        let jc = jaynes_cummings(&ModelParams { n_max: 2, ..Default::default() }).unwrap();
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        let psi = product_state(&fock(2, 0), &fock(3, 0));
        let tr = run_trace(&jc, &sched, 0, &[psi], 64).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.samples[0][0].n_mean, 0.0);
    }

    #[test]
    fn trace_reuses_the_period_propagator() {
        let jc = jaynes_cummings(&ModelParams { omega_r: 0.117, n_max: 2, ..Default::default() }).unwrap();
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        let psi = product_state(&fock(2, 1), &fock(3, 0));
        let tr = run_trace(&jc, &sched, 5, &[psi.clone()], 64).unwrap();
        let mut u = Op::identity(6, 6);
        for _ in 0..5 {
            u = &tr.propagators[1] * u;
        }
        assert!(op_norm(&(u - &tr.propagators[5])) < 1e-12);
        let psi5 = &tr.propagators[5] * psi;
        assert!((psi5.norm() - 1.0).abs() < 1e-10);
        let _ = kron(&Op::identity(1, 1), &Op::identity(1, 1));
    }

    #[test]
    fn rejects_bad_initial_state() {
        let jc = jaynes_cummings(&ModelParams { n_max: 2, ..Default::default() }).unwrap();
        let sched = ControlSchedule::new(named("4p").unwrap(), gaussian()).unwrap();
        assert!(run_trace(&jc, &sched, 1, &[fock(6, 0) * C64::from(2.0)], 64).is_err());
        assert!(run_trace(&jc, &sched, 1, &[fock(4, 0)], 64).is_err());
    }
}
