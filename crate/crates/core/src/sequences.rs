//! Pulse sequences, second-order pulse expansions and analytic effective
//! Hamiltonians.
//!
//! Sequence text is written in time order: the first token acts first.
//! Named sequences are quoted as operator products (rightmost acts first)
//! and are reversed when resolved.
//!
//! Expansion convention: the control term is `Hc = +½ V(t) σ` and the shape
//! parameters are those of [`crate::shapes`] (a Gaussian has `s > 0`). The
//! reference forms of the expansion and of the effective Hamiltonians are
//! quoted for the opposite orientation of `s` and `α`; both appear with
//! flipped sign here, which is what exact propagation gives. The literal
//! reference forms stay available as [`Variant::AsPrinted`] for comparison.

use std::fmt;
use std::str::FromStr;

use crate::algebra::{
    anticomm, comm, expm_herm, kron, lowering, on_qubit, on_rest, op_norm, pauli, sigma_x, sigma_y, sigma_z,
    CouplingSet, ModelParams, Op, C64, I, ZERO,
};
use crate::error::{Error, Result};
use crate::propagate::{propagate_period, ControlSchedule};
use crate::shapes::{PulseShape, ShapeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PulseSpec {
    pub axis: Axis,
    pub sign: Sign,
}

impl PulseSpec {
    pub fn new(axis: Axis, sign: Sign) -> Self {
        PulseSpec { axis, sign }
    }

    /// Qubit operator the control field multiplies: `±σ_axis`.
    pub fn control_op(&self) -> Op {
        pauli(self.axis.index()) * C64::from(self.sign.value())
    }

    /// Qubit rotation `R` with `R σx R† = ±σ_axis`.
    pub fn frame(&self) -> Op {
        let quarter = std::f64::consts::FRAC_PI_4;
        let rot = |gen: Op, angle: f64| -> Op {
            // exp(−i angle gen) for a Pauli generator
            Op::identity(2, 2) * C64::from(angle.cos()) - gen * (I * angle.sin())
        };
        match (self.axis, self.sign) {
            (Axis::X, Sign::Plus) => Op::identity(2, 2),
            (Axis::X, Sign::Minus) => sigma_z(),
            (Axis::Y, Sign::Plus) => rot(sigma_z(), quarter),
            (Axis::Y, Sign::Minus) => rot(sigma_z(), -quarter),
            (Axis::Z, Sign::Plus) => rot(sigma_y(), -quarter),
            (Axis::Z, Sign::Minus) => rot(sigma_y(), quarter),
        }
    }
}

impl fmt::Display for PulseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Minus {
            f.write_str("-")?;
        }
        f.write_str(match self.axis {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Pulse(PulseSpec),
    /// Free evolution, in units of τp.
    Delay(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub elements: Vec<Element>,
    pub name: Option<String>,
}

/// Named sequences as operator products (rightmost factor acts first).
pub const NAMED_PRODUCTS: [(&str, &str); 6] = [
    ("xbarx", "-X X"),
    ("x4", "X -X -X X"),
    ("4p", "X -Y X Y"),
    ("4pxz", "X -Z X Z"),
    ("8s", "Y X -Y X X -Y X Y"),
    ("8a", "-Y -X Y -X X -Y X Y"),
];

impl Sequence {
    pub fn pulse_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Pulse(_))).count()
    }

    pub fn pulses(&self) -> impl Iterator<Item = PulseSpec> + '_ {
        self.elements.iter().filter_map(|e| match e {
            Element::Pulse(p) => Some(*p),
            Element::Delay(_) => None,
        })
    }

    /// Period in units of τp.
    pub fn period_units(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Pulse(_) => 1.0,
                Element::Delay(d) => *d,
            })
            .sum()
    }

    pub fn period(&self, tau_p: f64) -> f64 {
        self.period_units() * tau_p
    }

    /// Product of the ideal pulse rotations `−i(±σμ)` over one period.
    pub fn control_only(&self) -> Op {
        self.pulses().fold(Op::identity(2, 2), |acc, p| p.control_op() * (-I) * acc)
    }

    pub fn has_delays(&self) -> bool {
        self.elements.iter().any(|e| matches!(e, Element::Delay(_)))
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<String> = self
            .elements
            .iter()
            .map(|e| match e {
                Element::Pulse(p) => p.to_string(),
                Element::Delay(d) => format!("d({d})"),
            })
            .collect();
        f.write_str(&tokens.join(" "))
    }
}

fn parse_tokens(text: &str) -> Result<Vec<Element>> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if let Some(inner) = tok.strip_prefix("d(").and_then(|r| r.strip_suffix(')')) {
            let d: f64 = inner.parse().map_err(|_| Error::SequenceParse(format!("malformed delay `{tok}`")))?;
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::SequenceParse(format!("delay must be finite and non-negative: `{tok}`")));
            }
            out.push(Element::Delay(d));
            continue;
        }
        let (sign, body) = match tok.strip_prefix('-') {
            Some(rest) => (Sign::Minus, rest),
            None => (Sign::Plus, tok),
        };
        let axis = match body {
            "X" | "x" => Axis::X,
            "Y" | "y" => Axis::Y,
            "Z" | "z" => Axis::Z,
            _ => return Err(Error::SequenceParse(format!("unknown token `{tok}`"))),
        };
        out.push(Element::Pulse(PulseSpec::new(axis, sign)));
    }
    if out.is_empty() {
        return Err(Error::SequenceParse("empty sequence".into()));
    }
    Ok(out)
}

/// Named sequence in time order.
pub fn named(name: &str) -> Option<Sequence> {
    let (key, product) = NAMED_PRODUCTS.iter().find(|(k, _)| k.eq_ignore_ascii_case(name))?;
    let mut elements = parse_tokens(product).expect("named products parse");
    elements.reverse();
    Some(Sequence { elements, name: Some(key.to_string()) })
}

/// Parse a time-ordered sequence or a sequence name. Explicit pulse lists
/// that coincide with a named sequence receive its name.
pub fn parse_sequence(text: &str) -> Result<Sequence> {
    let trimmed = text.trim();
    if let Some(seq) = named(trimmed) {
        return Ok(seq);
    }
    let elements = parse_tokens(trimmed)?;
    let name = NAMED_PRODUCTS
        .iter()
        .filter_map(|(k, _)| named(k))
        .find(|s| s.elements == elements)
        .and_then(|s| s.name);
    Ok(Sequence { elements, name })
}

impl FromStr for Sequence {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

/// Single-pulse propagator `U(τp) ≈ X⁽⁰⁾ + τp X⁽¹⁾ + τp² X⁽²⁾` on the joint
/// space.
#[derive(Debug, Clone)]
pub struct PulseExpansion {
    pub x0: Op,
    pub x1: Op,
    pub x2: Op,
}

impl PulseExpansion {
    pub fn evaluate(&self, tau_p: f64) -> Op {
        &self.x0 + &self.x1 * C64::from(tau_p) + &self.x2 * C64::from(tau_p * tau_p)
    }
}

/// Which sign convention to use for the reference formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Signs confirmed by exact propagation.
    Verified,
    /// Reference forms taken literally.
    AsPrinted,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Verified => "verified",
            Variant::AsPrinted => "as-printed",
        })
    }
}

/// Joint-space views of a coupling set.
struct Joint {
    a0: Op,
    ax: Op,
    ay: Op,
    az: Op,
    sx: Op,
    sy: Op,
    sz: Op,
}

impl Joint {
    fn new(c: &CouplingSet) -> Self {
        let d = c.dim();
        Joint {
            a0: on_rest(c.a0()),
            ax: on_rest(c.ax()),
            ay: on_rest(c.ay()),
            az: on_rest(c.az()),
            sx: on_qubit(&sigma_x(), d),
            sy: on_qubit(&sigma_y(), d),
            sz: on_qubit(&sigma_z(), d),
        }
    }
}

fn c(x: f64) -> C64 {
    C64::from(x)
}

/// Reference expansion of a `+x` pulse, parametrized by `(s, α, ζ)`.
fn x_expansion_reference(cp: &CouplingSet, s: f64, alpha: f64, zeta: f64) -> PulseExpansion {
    let j = Joint::new(cp);
    let (a0, ax, ay, az) = (&j.a0, &j.ax, &j.ay, &j.az);
    let (sx, sy, sz) = (&j.sx, &j.sy, &j.sz);
    let yy_zz = sy * ay + sz * az;
    let yz_zy = sy * az - sz * ay;
    let ay2_az2 = ay * ay + az * az;
    let x0 = sx * (-I);
    let x1 = -ax - sx * a0 + &yy_zz * (I * s);
    let x2 = (anticomm(a0, ax) + sx * (a0 * a0 + ax * ax)) * (I * 0.5)
        + (comm(a0, &yz_zy) + anticomm(ax, &yy_zz) * I) * c(zeta)
        + (anticomm(a0, &yy_zz) - comm(ax, &yz_zy) * I) * c(s / 2.0)
        + (&ay2_az2 + sx * comm(ay, az) * I) * c(alpha)
        + (comm(az, ay) + sx * &ay2_az2 * I) * c(s * s / 2.0);
    PulseExpansion { x0, x1, x2 }
}

fn oriented(params: &ShapeParams, variant: Variant) -> (f64, f64) {
    match variant {
        Variant::Verified => (-params.s, -params.alpha),
        Variant::AsPrinted => (params.s, params.alpha),
    }
}

/// Second-order expansion of a single pulse. Pulses along other axes or of
/// negative sign are obtained exactly by a qubit frame rotation:
/// `U_R[Hs] = R U_x[R† Hs R] R†` with `R σx R† = ±σ_axis`.
pub fn expand_pulse(couplings: &CouplingSet, params: &ShapeParams, pulse: PulseSpec) -> Result<PulseExpansion> {
    expand_pulse_variant(couplings, params, pulse, Variant::Verified)
}

pub fn expand_pulse_variant(
    couplings: &CouplingSet,
    params: &ShapeParams,
    pulse: PulseSpec,
    variant: Variant,
) -> Result<PulseExpansion> {
    params.check_pi_pulse()?;
    let (s, alpha) = oriented(params, variant);
    let r = pulse.frame();
    let framed = couplings.in_frame(&r);
    let e = x_expansion_reference(&framed, s, alpha, params.zeta);
    let rj = on_qubit(&r, couplings.dim());
    let rd = rj.adjoint();
    Ok(PulseExpansion { x0: &rj * e.x0 * &rd, x1: &rj * e.x1 * &rd, x2: &rj * e.x2 * &rd })
}

/// Analytic effective Hamiltonian with the order of the dropped remainder.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub op: Op,
    pub order: &'static str,
    pub variant: Variant,
}

/// Reference effective Hamiltonian of a named sequence for `(s, α, ζ)`.
/// `comm_sign` is the sign of the `[A0, σxAx − σyAy]` term of `4p`.
fn heff_reference(name: &str, cp: &CouplingSet, s: f64, alpha: f64, zeta: f64, tau: f64, comm_sign: f64) -> Result<(Op, &'static str)> {
    let j = Joint::new(cp);
    let (a0, ax, ay, az) = (&j.a0, &j.ax, &j.ay, &j.az);
    let (sx, sy, sz) = (&j.sx, &j.sy, &j.sz);
    let yz_zy = sy * az - sz * ay;
    let xz_zy = sx * az - sz * ay;
    let out = match name {
        "xbarx" => (a0 + sx * ax - &yz_zy * c(s), "O(τp)"),
        "x4" => (
            a0 + sx * ax - anticomm(ax, &(sy * ay + sz * az)) * c(s * tau) + comm(a0, &yz_zy) * (I * (s * tau)),
            "O(τp²)",
        ),
        "4p" => (
            a0 + &xz_zy * c(s / 2.0) + comm(a0, &(sx * ax - sy * ay)) * (I * (comm_sign * tau / 2.0))
                - sy * (ax * ax + az * az) * c(tau * alpha / 2.0)
                + comm(az, ay) * (I * (tau * alpha / 2.0))
                - sz * anticomm(ax, ay) * c(tau * (1.0 + 4.0 * zeta) / 4.0),
            "O(τp², sτp)",
        ),
        "4pxz" => {
            // The x–z sequence is the x–y one seen in a frame rotated by π/2
            // about x (y → z).
            let q = std::f64::consts::FRAC_PI_4;
            let r = Op::identity(2, 2) * c(q.cos()) - sigma_x() * (I * q.sin());
            let (h, order) = heff_reference("4p", &cp.in_frame(&r), s, alpha, zeta, tau, comm_sign)?;
            let rj = on_qubit(&r, cp.dim());
            (&rj * h * rj.adjoint(), order)
        }
        "8s" => {
            let inner = comm(az, &(ax + ay)) * (I * 0.25)
                + (sx * ay * ay - sy * ax * ax) * c(0.5)
                + sy * anticomm(ax, ay) * c(0.25)
                + sz * anticomm(ay, az) * c(0.25)
                + comm(a0, &(sy * az + sz * ax + sz * ay * c(1.5) - sx * az * c(2.5))) * (I * 0.5);
            (
                a0 + inner * c(s * tau) - (sy * (ax * ax + az * az) + comm(ay, az) * I) * c(alpha * tau / 2.0),
                "O(τp²)",
            )
        }
        "8a" => (a0 + &xz_zy * c(s / 2.0), "O(τp²)"),
        other => return Err(Error::NoAnalyticForm(other.to_string())),
    };
    Ok(out)
}

/// Analytic effective Hamiltonian `H_eff` with `U_period ≈ exp(−i T H_eff)`.
pub fn effective_hamiltonian(
    seq: &Sequence,
    couplings: &CouplingSet,
    params: &ShapeParams,
    tau_p: f64,
) -> Result<EffectiveHamiltonian> {
    effective_hamiltonian_variant(seq, couplings, params, tau_p, Variant::Verified)
}

pub fn effective_hamiltonian_variant(
    seq: &Sequence,
    couplings: &CouplingSet,
    params: &ShapeParams,
    tau_p: f64,
    variant: Variant,
) -> Result<EffectiveHamiltonian> {
    let name = seq
        .name
        .as_deref()
        .ok_or_else(|| Error::NoAnalyticForm(format!("custom sequence `{seq}`")))?;
    params.check_pi_pulse()?;
    let (s, alpha) = oriented(params, variant);
    let comm_sign = match variant {
        Variant::Verified => 1.0,
        Variant::AsPrinted => -1.0,
    };
    let (op, order) = heff_reference(name, couplings, s, alpha, params.zeta, tau_p, comm_sign)?;
    Ok(EffectiveHamiltonian { op, order, variant })
}

/// Cavity-model effective Hamiltonians written directly in `b`, `b†`
/// (frequencies of `model` in units of 2π/τp). `4p-s0` is the `s = 0`
/// form of `4p` that keeps the terms linear in τp.
pub fn cavity_hamiltonian(name: &str, model: &ModelParams, params: &ShapeParams, tau_p: f64) -> Result<(Op, &'static str)> {
    model.validate()?;
    let tau = std::f64::consts::TAU;
    let (wr, w0, g) = (model.omega_r * tau, model.omega_0 * tau, model.g * tau);
    let levels = model.levels();
    let b = lowering(levels);
    let bd = b.adjoint();
    let id2 = Op::identity(2, 2);
    let n = kron(&id2, &(&bd * &b));
    let bd_minus_b = &bd - &b;
    let s = params.s;
    let out = match name {
        "4p" => (
            n * c(wr) + kron(&sigma_x(), &Op::identity(levels, levels)) * c(s * w0 / 2.0)
                + kron(&sigma_z(), &bd_minus_b) * (I * (s * g / 4.0)),
            "O(τp)",
        ),
        "4p-s0" => (
            n * c(wr) - kron(&sigma_x(), &bd_minus_b) * (I * (tau_p * g * wr / 4.0))
                - kron(&sigma_z(), &(&b * &b - &bd * &bd)) * (I * ((1.0 + 4.0 * params.zeta) / 8.0 * tau_p * g * g)),
            "O(s, ατp, τp²)",
        ),
        "4pxz" => (
            n * c(wr)
                + kron(&sigma_x(), &bd_minus_b) * (I * (s * g / 4.0))
                + kron(&sigma_x(), &bd_minus_b) * (I * (tau_p * g * wr / 4.0)),
            "O(sτp, ατp, τp²)",
        ),
        "8a" => (n * c(wr) + kron(&sigma_z(), &bd_minus_b) * (I * (s * g / 4.0)), "O(τp²)"),
        "8s" => {
            let q = &bd + &b;
            (n * c(wr) - kron(&sigma_y(), &(&q * &q)) * c(params.alpha * g * g * tau_p / 8.0), "O(sτp, τp²)")
        }
        other => return Err(Error::NoAnalyticForm(format!("no cavity form for `{other}`"))),
    };
    Ok(out)
}

/// Reference propagator for a defect measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// `exp(−i T H_eff)` with the analytic effective Hamiltonian.
    Analytic,
    /// `exp(−i T A0)`: free evolution of the non-qubit part only.
    Free,
    /// The identity (zero effective Hamiltonian).
    Identity,
}

/// Numerical floor below which a defect carries no scaling information.
pub const DEFECT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OrderCheck {
    pub scales: Vec<f64>,
    pub defects: Vec<f64>,
    /// Least-squares slope of `log δ` against `log λ` over points above the
    /// floor; `None` when fewer than two points qualify.
    pub exponent: Option<f64>,
    pub floor_limited: bool,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Defect `‖U_num − U_ref‖` for one coupling set.
pub fn period_defect(
    seq: &Sequence,
    couplings: &CouplingSet,
    shape: &PulseShape,
    reference: Reference,
    steps_per_pulse: usize,
) -> Result<f64> {
    let schedule = ControlSchedule::new(seq.clone(), shape.clone())?;
    let u = propagate_period(couplings, &schedule, steps_per_pulse)?.u;
    let t = schedule.period();
    let h = match reference {
        Reference::Analytic => {
            let params = crate::shapes::compute_params(shape, crate::shapes::DEFAULT_QUAD_NODES)?;
            effective_hamiltonian(seq, couplings, &params, shape.duration())?.op
        }
        Reference::Free => on_rest(couplings.a0()),
        Reference::Identity => Op::zeros(u.nrows(), u.ncols()),
    };
    let reference = expm_herm(&h, t)?;
    Ok(op_norm(&(u - reference)))
}

/// Fit the scaling exponent of the period defect against the coupling scale.
pub fn order_check(
    seq: &Sequence,
    couplings: &CouplingSet,
    shape: &PulseShape,
    scales: &[f64],
    reference: Reference,
    steps_per_pulse: usize,
) -> Result<OrderCheck> {
    use rayon::prelude::*;
    if scales.len() < 2 {
        return Err(Error::Config("order check needs at least two scales".into()));
    }
    let (lo, hi) = scales.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-9) {
        return Err(Error::Config("order-check scales must be positive and span at least one decade".into()));
    }
    let defects = scales
        .par_iter()
        .map(|&l| period_defect(seq, &couplings.scaled(l), shape, reference, steps_per_pulse))
        .collect::<Result<Vec<f64>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        scales.iter().zip(&defects).filter(|(_, d)| **d > DEFECT_FLOOR).map(|(a, b)| (*a, *b)).unzip();
    let floor_limited = xs.len() < scales.len();
    let exponent = if xs.len() >= 2 { Some(loglog_slope(&xs, &ys)) } else { None };
    Ok(OrderCheck { scales: scales.to_vec(), defects, exponent, floor_limited })
}

/// One analytic variant compared against exact propagation.
#[derive(Debug, Clone)]
pub struct VariantDefect {
    pub label: String,
    pub scales: Vec<f64>,
    pub defects: Vec<f64>,
    pub exponent: f64,
}

impl VariantDefect {
    /// Local slope between the two smallest scales.
    pub fn tail_exponent(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.scales.iter().copied().zip(self.defects.iter().copied()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.len() < 2 {
            return f64::NAN;
        }
        loglog_slope(&[pts[0].0, pts[1].0], &[pts[0].1, pts[1].1])
    }
}

/// Compare the generic (verified and as-printed) and cavity forms of a
/// named sequence on the Jaynes-Cummings model against exact propagation,
/// scaling all model frequencies by each `λ` in `scales`.
pub fn compare_variants(
    name: &str,
    model: &ModelParams,
    shape: &PulseShape,
    scales: &[f64],
    steps_per_pulse: usize,
) -> Result<Vec<VariantDefect>> {
    let seq = named(name).ok_or_else(|| Error::NoAnalyticForm(name.to_string()))?;
    let params = crate::shapes::compute_params(shape, crate::shapes::DEFAULT_QUAD_NODES)?;
    let tau_p = shape.duration();
    let schedule = ControlSchedule::new(seq.clone(), shape.clone())?;
    let t = schedule.period();
    let mut labels = vec!["generic (verified signs)".to_string(), "generic (as printed)".to_string()];
    let has_cavity = cavity_hamiltonian(name, model, &params, tau_p).is_ok();
    if has_cavity {
        labels.push("cavity form (as printed)".to_string());
    }
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for &l in scales {
        let m = ModelParams { omega_r: model.omega_r * l, omega_0: model.omega_0 * l, g: model.g * l, ..*model };
        let cp = crate::algebra::jaynes_cummings(&m)?;
        let u = propagate_period(&cp, &schedule, steps_per_pulse)?.u;
        let mut hs = vec![
            effective_hamiltonian_variant(&seq, &cp, &params, tau_p, Variant::Verified)?.op,
            effective_hamiltonian_variant(&seq, &cp, &params, tau_p, Variant::AsPrinted)?.op,
        ];
        if has_cavity {
            hs.push(cavity_hamiltonian(name, &m, &params, tau_p)?.0);
        }
        for (row, h) in table.iter_mut().zip(hs) {
            row.push(op_norm(&(&u - expm_herm(&h, t)?)));
        }
    }
    Ok(labels
        .into_iter()
        .zip(table)
        .map(|(label, defects)| VariantDefect { exponent: loglog_slope(scales, &defects), label, scales: scales.to_vec(), defects })
        .collect())
}

/// Decompose a joint operator into `σμ ⊗ b†^j b^k` coefficients
/// (`μ = 0` is the qubit identity). Entries below `tol` are dropped.
pub fn monomial_coefficients(h: &Op, levels: usize, tol: f64) -> Vec<(usize, usize, usize, C64)> {
    let d = levels;
    let mut out = Vec::new();
    let qubit_basis = [Op::identity(2, 2), sigma_x(), sigma_y(), sigma_z()];
    let fact_ratio = |a: usize, b: usize| -> f64 { ((b + 1)..=a).map(|x| x as f64).product::<f64>() };
    for (mu, q) in qubit_basis.iter().enumerate() {
        // B_μ = ½ Tr_q[(σμ ⊗ 1) H]
        let mut bm = Op::zeros(d, d);
        for i in 0..2 {
            for k in 0..2 {
                if q[(k, i)] == ZERO {
                    continue;
                }
                let block = h.view((i * d, k * d), (d, d));
                bm += block * (q[(k, i)] * 0.5);
            }
        }
        // Element ⟨r| b†^j b^k |col⟩ with r = col − k + j.
        let elem = |j: usize, k: usize, col: usize| -> f64 {
            let mid = col - k;
            (fact_ratio(col, mid) * fact_ratio(mid + j, mid)).sqrt()
        };
        for off in -(d as i64 - 1)..(d as i64) {
            let mut coefs: Vec<(usize, C64)> = Vec::new();
            let col0 = if off < 0 { (-off) as usize } else { 0 };
            for col in col0..d {
                let r = (col as i64 + off) as usize;
                if r >= d {
                    break;
                }
                let mut rest = bm[(r, col)];
                for &(k, cf) in &coefs {
                    let j = (k as i64 + off) as usize;
                    rest -= cf * elem(j, k, col);
                }
                let k = col;
                let j = (k as i64 + off) as usize;
                coefs.push((k, rest / elem(j, k, col)));
            }
            for (k, cf) in coefs {
                if cf.norm() > tol {
                    out.push((mu, (k as i64 + off) as usize, k, cf));
                }
            }
        }
    }
    out.sort_by_key(|&(mu, j, k, _)| (mu, j + k, j, k));
    out
}

/// Render `monomial_coefficients` output, one term per line.
pub fn format_monomials(terms: &[(usize, usize, usize, C64)]) -> String {
    let sup = |p: usize| -> String {
        if p == 1 {
            String::new()
        } else {
            format!("^{p}")
        }
    };
    let mut s = String::new();
    for &(mu, j, k, cf) in terms {
        let q = ["1", "σx", "σy", "σz"][mu];
        let mut mono = String::new();
        if j > 0 {
            mono.push_str(&format!(" b†{}", sup(j)));
        }
        if k > 0 {
            mono.push_str(&format!(" b{}", sup(k)));
        }
        s.push_str(&format!("  ({:+.6e} {:+.6e}i)  {q}{mono}\n", cf.re, cf.im));
    }
    s
}

#[allow(dead_code)]
fn is_identity_up_to_phase(u: &Op, tol: f64) -> bool {
    let phase = u[(0, 0)];
    if (phase.norm() - 1.0).abs() > tol {
        return false;
    }
    op_norm(&(u - Op::identity(u.nrows(), u.ncols()) * phase)) < tol
}
