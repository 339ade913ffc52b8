//! Dense complex operator algebra on the joint qubit ⊗ oscillator space and
//! builders for the system Hamiltonians used throughout the workbench.
//!
//! Tensor ordering is always qubit ⊗ rest: a joint basis index is
//! `q * d + n` with `q ∈ {0, 1}` the qubit index (`0` = σz eigenvalue +1) and
//! `n` the index on the other factor of dimension `d`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense complex operator.
pub type Op = DMatrix<C64>;
/// Dense complex state vector.
pub type Ket = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Tolerance used when validating Hermiticity of user supplied operators.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn identity(n: usize) -> Op {
    Op::identity(n, n)
}

pub fn sigma_x() -> Op {
    Op::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> Op {
    Op::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> Op {
    Op::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// σ+ = (σx + iσy)/2, the qubit raising operator |↑⟩⟨↓|.
pub fn sigma_plus() -> Op {
    (sigma_x() + sigma_y() * I) * C64::from(0.5)
}

/// σ− = (σx − iσy)/2.
pub fn sigma_minus() -> Op {
    (sigma_x() - sigma_y() * I) * C64::from(0.5)
}

/// Pauli matrix for axis index 0 = x, 1 = y, 2 = z.
pub fn pauli(axis: usize) -> Op {
    match axis {
        0 => sigma_x(),
        1 => sigma_y(),
        2 => sigma_z(),
        _ => panic!("pauli axis index {axis} out of range"),
    }
}

/// Oscillator lowering operator b truncated to `levels` Fock states.
pub fn lowering(levels: usize) -> Op {
    let mut b = Op::zeros(levels, levels);
    for n in 1..levels {
        b[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    b
}

/// Number operator b†b truncated to `levels` Fock states.
pub fn number(levels: usize) -> Op {
    Op::from_diagonal(&DVector::from_fn(levels, |n, _| C64::from(n as f64)))
}

pub fn kron(a: &Op, b: &Op) -> Op {
    a.kronecker(b)
}

pub fn comm(a: &Op, b: &Op) -> Op {
    a * b - b * a
}

pub fn anticomm(a: &Op, b: &Op) -> Op {
    a * b + b * a
}

/// Embed a qubit operator into the joint space: `q ⊗ 1_d`.
pub fn on_qubit(q: &Op, d: usize) -> Op {
    kron(q, &identity(d))
}

/// Embed an operator on the other factor into the joint space: `1_2 ⊗ a`.
pub fn on_rest(a: &Op) -> Op {
    kron(&identity(2), a)
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &Op) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Frobenius norm of `H − H†`.
pub fn hermiticity_deviation(h: &Op) -> f64 {
    (h - h.adjoint()).norm()
}

pub fn is_hermitian(h: &Op, tol: f64) -> bool {
    h.is_square() && hermiticity_deviation(h) <= tol
}

/// `exp(−i H t)` for Hermitian `H`, via the Hermitian eigendecomposition.
pub fn expm_herm(h: &Op, t: f64) -> Result<Op> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm_herm expects a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let deviation = hermiticity_deviation(h);
    if deviation > HERMITIAN_TOL * h.norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(expm_herm_unchecked(h, t))
}

/// As [`expm_herm`] without validating the input. The Hermitian part of `h`
/// is used.
pub fn expm_herm_unchecked(h: &Op, t: f64) -> Op {
    let n = h.nrows();
    let mut sym = (h + h.adjoint()) * C64::from(0.5);
    // Entries far below the rounding level (e.g. subnormal pulse tails)
    // stall the eigenvalue iteration; they cannot affect the result.
    let floor = sym.iter().map(|z| z.norm()).fold(0.0, f64::max) * f64::EPSILON * 1e-6;
    for z in sym.iter_mut() {
        if z.re.abs() < floor {
            z.re = 0.0;
        }
        if z.im.abs() < floor {
            z.im = 0.0;
        }
    }
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lambda * t);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Nearest unitary in the Frobenius sense (polar factor `W V†` of the SVD).
pub fn nearest_unitary(u: &Op) -> Op {
    let svd = u.clone().svd(true, true);
    svd.u.expect("left vectors requested") * svd.v_t.expect("right vectors requested")
}

/// Trace over the second tensor factor (dimension `d`) of a joint operator on
/// a `(n/d)·d` space.
pub fn partial_trace_rest(rho: &Op, d: usize) -> Result<Op> {
    let n = rho.nrows();
    if d == 0 || n % d != 0 || !rho.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot trace a factor of dimension {d} out of a {}x{} operator",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let a = n / d;
    Ok(Op::from_fn(a, a, |i, j| {
        (0..d).map(|k| rho[(i * d + k, j * d + k)]).sum()
    }))
}

/// Trace over the first tensor factor (dimension `a`), returning the reduced
/// operator on the second factor.
pub fn partial_trace_first(rho: &Op, a: usize) -> Result<Op> {
    let n = rho.nrows();
    if a == 0 || n % a != 0 || !rho.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot trace a factor of dimension {a} out of a {}x{} operator",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let d = n / a;
    Ok(Op::from_fn(d, d, |i, j| {
        (0..a).map(|q| rho[(q * d + i, q * d + j)]).sum()
    }))
}

/// Reduced qubit density matrix of a pure joint state `psi` (qubit ⊗ rest).
pub fn reduced_qubit(psi: &Ket, d: usize) -> Op {
    Op::from_fn(2, 2, |i, j| {
        (0..d).map(|k| psi[i * d + k] * psi[j * d + k].conj()).sum()
    })
}

/// Population of each level of the second factor for a pure joint state.
pub fn rest_populations(psi: &Ket, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| psi[k].norm_sqr() + psi[d + k].norm_sqr())
        .collect()
}

/// `|q⟩ ⊗ |rest⟩`.
pub fn product_state(qubit: &Ket, rest: &Ket) -> Ket {
    qubit.kronecker(rest)
}

/// Fock state `|n⟩` in a truncated space of `levels` states.
pub fn fock(levels: usize, n: usize) -> Ket {
    let mut v = Ket::zeros(levels);
    v[n] = ONE;
    v
}

/// Operator quadruple of the general single-qubit coupling
/// `Hs = σx Ax + σy Ay + σz Az + A0`, with every `Aν` acting on the non-qubit
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    a0: Op,
    ax: Op,
    ay: Op,
    az: Op,
}

impl CouplingSet {
    pub fn new(a0: Op, ax: Op, ay: Op, az: Op) -> Result<Self> {
        let d = a0.nrows();
        for (name, op) in [("A0", &a0), ("Ax", &ax), ("Ay", &ay), ("Az", &az)] {
            if op.nrows() != d || op.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            let deviation = hermiticity_deviation(op);
            if deviation > HERMITIAN_TOL * op.norm().max(1.0) {
                return Err(Error::NotHermitian { deviation });
            }
        }
        if d == 0 {
            return Err(Error::DimensionMismatch("empty coupling operators".into()));
        }
        Ok(CouplingSet { a0, ax, ay, az })
    }

    pub fn zero(d: usize) -> Self {
        let z = Op::zeros(d, d);
        CouplingSet { a0: z.clone(), ax: z.clone(), ay: z.clone(), az: z }
    }

    /// Dimension of the non-qubit factor.
    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    /// Dimension of the joint space.
    pub fn joint_dim(&self) -> usize {
        2 * self.dim()
    }

    pub fn a0(&self) -> &Op {
        &self.a0
    }
    pub fn ax(&self) -> &Op {
        &self.ax
    }
    pub fn ay(&self) -> &Op {
        &self.ay
    }
    pub fn az(&self) -> &Op {
        &self.az
    }

    /// The vector part `(Ax, Ay, Az)`.
    pub fn vector(&self) -> [&Op; 3] {
        [&self.ax, &self.ay, &self.az]
    }

    /// Every coupling multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let l = C64::from(lambda);
        CouplingSet {
            a0: &self.a0 * l,
            ax: &self.ax * l,
            ay: &self.ay * l,
            az: &self.az * l,
        }
    }

    /// Couplings seen in a rotated qubit frame: if `Hs = Σ σμ Aμ + A0` then
    /// `R† Hs R = Σ σν A'ν + A0` with `A'ν = Σμ O_{μν} Aμ` and
    /// `O_{μν} = ½ Tr(σν R† σμ R)`.
    pub fn in_frame(&self, rotation: &Op) -> Self {
        let vec = self.vector();
        let d = self.dim();
        let mut out = [Op::zeros(d, d), Op::zeros(d, d), Op::zeros(d, d)];
        for (mu, a_mu) in vec.iter().enumerate() {
            let rotated = rotation.adjoint() * pauli(mu) * rotation;
            for (nu, slot) in out.iter_mut().enumerate() {
                let o = (pauli(nu) * &rotated).trace().re * 0.5;
                if o.abs() > 1e-14 {
                    *slot += *a_mu * C64::from(o);
                }
            }
        }
        let [ax, ay, az] = out;
        CouplingSet { a0: self.a0.clone(), ax, ay, az }
    }

    /// Largest spectral norm among the four couplings.
    pub fn max_norm(&self) -> f64 {
        [&self.a0, &self.ax, &self.ay, &self.az]
            .iter()
            .map(|a| op_norm(a))
            .fold(0.0, f64::max)
    }
}

/// Parameters of the Jaynes-Cummings cavity model. Frequencies are given in
/// units of 2π/τp (so `omega_r = 0.117` means ωr = 0.117·2π/τp).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega_r: f64,
    pub omega_0: f64,
    pub g: f64,
    pub n_max: usize,
    /// Chemical shift Δ for the bare-qubit NMR model (units 2π/τp; the
    /// builder [`chemical_shift`] itself takes rad/τp).
    pub delta_shift: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { omega_r: 0.0, omega_0: 0.0, g: 0.1, n_max: 8, delta_shift: 0.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        for (name, v) in [
            ("omega_r", self.omega_r),
            ("omega_0", self.omega_0),
            ("g", self.g),
            ("delta_shift", self.delta_shift),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }
}

/// Jaynes-Cummings couplings
/// `Hs = ωr b†b + (ω0/2)σz − g(b†σ− + σ+ b)`, i.e.
/// `A0 = ωr b†b`, `Ax = −g(b + b†)/2`, `Ay = ig(b† − b)/2`, `Az = ω0/2`.
pub fn jaynes_cummings(params: &ModelParams) -> Result<CouplingSet> {
    params.validate()?;
    let levels = params.levels();
    let wr = TAU * params.omega_r;
    let w0 = TAU * params.omega_0;
    let g = TAU * params.g;
    let b = lowering(levels);
    let bd = b.adjoint();
    let a0 = number(levels) * C64::from(wr);
    let ax = (&b + &bd) * C64::from(-g / 2.0);
    let ay = (&bd - &b) * C64::new(0.0, g / 2.0);
    let az = identity(levels) * C64::from(w0 / 2.0);
    CouplingSet::new(a0, ax, ay, az)
}

/// Bare-qubit chemical shift `Hs = (Δ/2)σz`; `Δ` in rad/τp.
pub fn chemical_shift(delta: f64) -> CouplingSet {
    let z = Op::zeros(1, 1);
    CouplingSet {
        a0: z.clone(),
        ax: z.clone(),
        ay: z,
        az: Op::from_element(1, 1, C64::from(delta / 2.0)),
    }
}

/// Full `Hs = σx⊗Ax + σy⊗Ay + σz⊗Az + 1⊗A0` on the joint space.
pub fn assemble(couplings: &CouplingSet) -> Op {
    kron(&sigma_x(), &couplings.ax)
        + kron(&sigma_y(), &couplings.ay)
        + kron(&sigma_z(), &couplings.az)
        + on_rest(&couplings.a0)
}

/// Plain-text dump of a complex matrix, one row per line.
pub fn format_matrix(op: &Op) -> String {
    let mut out = String::new();
    for i in 0..op.nrows() {
        let row: Vec<String> = (0..op.ncols())
            .map(|j| {
                let z = op[(i, j)];
                format!("{:+.6e}{:+.6e}i", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Op {
        let m = Op::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&m + m.adjoint()) * C64::from(0.5)
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
        assert_abs_diff_eq!((&x * &y - &z * I).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(comm(&x, &y).norm(), (z * (2.0 * I)).norm(), epsilon = 1e-15);
        assert_abs_diff_eq!((sigma_plus() * sigma_minus() - Op::from_diagonal(&DVector::from_vec(vec![ONE, ZERO]))).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let u = expm_herm(&Op::zeros(4, 4), 1.3).unwrap();
        assert_abs_diff_eq!((u - identity(4)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pi_rotation_about_x() {
        let h = sigma_x() * C64::from(std::f64::consts::FRAC_PI_2);
        let u = expm_herm(&h, 1.0).unwrap();
        assert_abs_diff_eq!((u - sigma_x() * (-I)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let h = Op::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(expm_herm(&h, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn forward_and_backward_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 5, 12] {
            let h = random_hermitian(&mut rng, n);
            let t = rng.gen_range(0.1..3.0);
            let u = expm_herm(&h, t).unwrap() * expm_herm(&h, -t).unwrap();
            assert!((u - identity(n)).norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 6);
            let b = random_hermitian(&mut rng, 6);
            assert!((comm(&a, &b) + comm(&b, &a)).norm() < 1e-13);
            assert!((anticomm(&a, &b) - anticomm(&b, &a)).norm() < 1e-13);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let q = Ket::from_vec(vec![C64::from(0.6), C64::new(0.0, 0.8)]);
        let psi = product_state(&q, &fock(4, 2));
        let rho = &psi * psi.adjoint();
        let rq = partial_trace_rest(&rho, 4).unwrap();
        let pure = &q * q.adjoint();
        assert!((&rq - &pure).norm() < 1e-15);
        // A pure reduced state has unit purity.
        assert_abs_diff_eq!((&rq * &rq).trace().re, 1.0, epsilon = 1e-14);
        assert!((reduced_qubit(&psi, 4) - pure).norm() < 1e-15);
        let ro = partial_trace_first(&rho, 2).unwrap();
        assert_abs_diff_eq!(ro[(2, 2)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 10);
        let rho = &h * &h;
        let tr = rho.trace();
        assert!((partial_trace_rest(&rho, 5).unwrap().trace() - tr).norm() < 1e-13);
        assert!((partial_trace_first(&rho, 2).unwrap().trace() - tr).norm() < 1e-13);
    }

    #[test]
    fn decoupled_oscillator() {
        let p = ModelParams { omega_r: 0.3, omega_0: 0.0, g: 0.0, n_max: 4, delta_shift: 0.0 };
        let c = jaynes_cummings(&p).unwrap();
        assert_eq!(c.ax().norm() + c.ay().norm() + c.az().norm(), 0.0);
        for n in 0..5 {
            assert_abs_diff_eq!(c.a0()[(n, n)].re, TAU * 0.3 * n as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn jc_two_level_exchange_block() {
        // With ωr = ω0 = 0 and n_max = 1, Hs = −g(b†σ− + σ+b). In the
        // qubit ⊗ oscillator basis |q n⟩ = |↑0⟩, |↑1⟩, |↓0⟩, |↓1⟩ the only
        // nonzero entries couple |↑0⟩ and |↓1⟩ with amplitude −g (angular).
        let p = ModelParams { omega_r: 0.0, omega_0: 0.0, g: 0.1, n_max: 1, delta_shift: 0.0 };
        let h = assemble(&jaynes_cummings(&p).unwrap());
        let g = TAU * 0.1;
        let mut expected = Op::zeros(4, 4);
        expected[(0, 3)] = C64::from(-g);
        expected[(3, 0)] = C64::from(-g);
        assert!((&h - &expected).norm() < 1e-15);
        // Same matrix built directly from σ± and b.
        let b = lowering(2);
        let direct = (kron(&sigma_minus(), &b.adjoint()) + kron(&sigma_plus(), &b)) * C64::from(-g);
        assert!((h - direct).norm() < 1e-15);
    }

    #[test]
    fn jc_is_hermitian() {
        let p = ModelParams { omega_r: 0.117, omega_0: 0.05, g: 0.1, n_max: 8, delta_shift: 0.0 };
        let h = assemble(&jaynes_cummings(&p).unwrap());
        assert!(hermiticity_deviation(&h) < 1e-14);
    }

    #[test]
    fn jc_resonant_rabi_splitting() {
        // On resonance the manifold {|↑,n−1⟩, |↓,n⟩} splits into ±g√n.
        let p = ModelParams { omega_r: 0.0, omega_0: 0.0, g: 0.1, n_max: 6, delta_shift: 0.0 };
        let h = assemble(&jaynes_cummings(&p).unwrap());
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let g = TAU * 0.1;
        let mut expected = vec![0.0, 0.0];
        for n in 1..=6 {
            let w = g * (n as f64).sqrt();
            expected.push(w);
            expected.push(-w);
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn chemical_shift_couplings() {
        let c = chemical_shift(1.0);
        assert_eq!(c.dim(), 1);
        assert_abs_diff_eq!(c.az()[(0, 0)].re, 0.5);
        assert_eq!(assemble(&chemical_shift(0.0)).norm(), 0.0);
    }

    #[test]
    fn zero_couplings_assemble_to_zero() {
        assert_eq!(assemble(&CouplingSet::zero(3)).norm(), 0.0);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let r = CouplingSet::new(Op::zeros(2, 2), Op::zeros(3, 3), Op::zeros(2, 2), Op::zeros(2, 2));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn frame_rotation_reproduces_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = CouplingSet::new(
            random_hermitian(&mut rng, 3),
            random_hermitian(&mut rng, 3),
            random_hermitian(&mut rng, 3),
            random_hermitian(&mut rng, 3),
        )
        .unwrap();
        let r = expm_herm(&(sigma_y() * C64::from(0.37) + sigma_z() * C64::from(-0.8)), 1.0).unwrap();
        let r_joint = on_qubit(&r, 3);
        let direct = r_joint.adjoint() * assemble(&c) * &r_joint;
        assert!((direct - assemble(&c.in_frame(&r))).norm() < 1e-13);
    }
}
