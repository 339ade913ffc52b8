//! Synthesis of self-refocusing cosine-series pulses.
//!
//! A designed pulse is `V(τp/2 + x) = (2π/τp) Σ_m c_m cos(2π m x/τp)` with
//! `c_0 = ½` (area π). Odd endpoint derivatives vanish identically for the
//! cosine basis. The remaining conditions are
//!
//! * linear: `V^{(l)}(0) = 0` for even `l = 0, 2, …, 2L−2`, i.e.
//!   `Σ_m c_m m^l (−1)^m = 0`;
//! * nonlinear: `s = 0` (family S) or `s = α = 0` (family Q).
//!
//! The linear conditions are eliminated exactly by working in their affine
//! null space. The nonlinear system is solved by Newton continuation from
//! the raised-cosine pulse `½(1 + cos)`, so the root found is the one
//! connected to that seed.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::shapes::{params_at, PulseShape, ShapeParams, DEFAULT_QUAD_NODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// First-order self-refocusing: `s = 0`.
    S,
    /// Second-order self-refocusing: `s = α = 0`.
    Q,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::S => "S",
            Family::Q => "Q",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DesignSpec {
    pub family: Family,
    /// Endpoint smoothness index: derivatives `0..=2L−1` vanish at the ends.
    pub l: usize,
    /// Coefficients beyond the constraint count, spent on lowering the peak
    /// amplitude.
    pub extra_terms: usize,
}

impl DesignSpec {
    pub fn new(family: Family, l: usize) -> Self {
        DesignSpec { family, l, extra_terms: 0 }
    }

    fn nonlinear_count(&self) -> usize {
        match self.family {
            Family::S => 1,
            Family::Q => 2,
        }
    }

    /// Number of cosine coefficients including `c_0`.
    pub fn coefficient_count(&self) -> usize {
        1 + self.l + self.nonlinear_count() + self.extra_terms
    }
}

/// Designed pulse with its convergence report.
#[derive(Debug, Clone)]
pub struct Design {
    pub spec: DesignSpec,
    pub shape: PulseShape,
    pub coeffs: Vec<f64>,
    pub params: ShapeParams,
    /// Named constraint residuals, e.g. `("s", 3e-15)`.
    pub residuals: Vec<(String, f64)>,
    pub iterations: usize,
    pub peak_amplitude: f64,
}

impl Design {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1.abs()).fold(0.0, f64::max)
    }
}

const MAX_NEWTON: usize = 60;
const FD_STEP: f64 = 1e-7;
const CONDITION_LIMIT: f64 = 1e12;

/// Affine parametrization `c_{1..M} = base + basis·y` of the coefficient
/// vectors that satisfy the linear endpoint conditions.
struct Affine {
    base: DVector<f64>,
    basis: DMatrix<f64>,
}

impl Affine {
    fn new(spec: &DesignSpec) -> Self {
        let m = spec.coefficient_count() - 1;
        let rows = spec.l;
        let mut a = DMatrix::<f64>::zeros(rows, m);
        let mut b = DVector::<f64>::zeros(rows);
        for r in 0..rows {
            let l = 2 * r as i32;
            for j in 0..m {
                let k = (j + 1) as f64;
                a[(r, j)] = k.powi(l) * if (j + 1) % 2 == 0 { 1.0 } else { -1.0 };
            }
            if l == 0 {
                b[r] = -0.5;
            }
            let scale = a.row(r).norm();
            a.row_mut(r).scale_mut(1.0 / scale);
            b[r] /= scale;
        }
        // Orthonormal basis of the row space.
        let mut row_basis: Vec<DVector<f64>> = Vec::new();
        for r in 0..rows {
            let mut v: DVector<f64> = a.row(r).transpose();
            for q in &row_basis {
                let d = q.dot(&v);
                v -= q * d;
            }
            let n = v.norm();
            if n > 1e-12 {
                row_basis.push(v / n);
            }
        }
        let gram = &a * a.transpose();
        let base = a.transpose() * gram.lu().solve(&b).expect("endpoint conditions are independent");
        let mut null: Vec<DVector<f64>> = Vec::new();
        for j in 0..m {
            let mut v = DVector::<f64>::zeros(m);
            v[j] = 1.0;
            for q in row_basis.iter().chain(null.iter()) {
                let d = q.dot(&v);
                v -= q * d;
            }
            let n = v.norm();
            if n > 1e-10 {
                null.push(v / n);
            }
        }
        let basis = DMatrix::from_columns(&null);
        Affine { base, basis }
    }

    fn coeffs(&self, y: &DVector<f64>) -> Vec<f64> {
        let tail = &self.base + &self.basis * y;
        std::iter::once(0.5).chain(tail.iter().copied()).collect()
    }

    fn project(&self, coeffs: &[f64]) -> DVector<f64> {
        let tail = DVector::from_iterator(coeffs.len() - 1, coeffs[1..].iter().copied());
        self.basis.transpose() * (tail - &self.base)
    }
}

struct Problem {
    spec: DesignSpec,
    affine: Affine,
    n_quad: usize,
}

impl Problem {
    fn params(&self, y: &DVector<f64>) -> ShapeParams {
        let shape = PulseShape::fourier(&self.affine.coeffs(y)).expect("c0 = 1/2 is positive");
        params_at(&shape, self.n_quad)
    }

    fn residual(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = self.params(y);
        match self.spec.family {
            Family::S => DVector::from_vec(vec![p.s]),
            Family::Q => DVector::from_vec(vec![p.s, p.alpha]),
        }
    }

    fn jacobian(&self, y: &DVector<f64>, f0: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(f0.len(), y.len());
        for j in 0..y.len() {
            let mut yp = y.clone();
            let h = FD_STEP * y[j].abs().max(1.0);
            yp[j] += h;
            let mut ym = y.clone();
            ym[j] -= h;
            let col = (self.residual(&yp) - self.residual(&ym)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let _ = f0;
        jac
    }

    /// Minimum-norm Newton step solving `J d = −r` (square or wide `J`).
    fn newton_step(jac: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        let gram = jac * jac.transpose();
        let sv = gram.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin > 0.0 { (smax / smin).sqrt() } else { f64::INFINITY };
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned { condition });
        }
        let w = gram.lu().solve(&(-r)).ok_or(Error::IllConditioned { condition })?;
        Ok(jac.transpose() * w)
    }

    /// Damped Newton for `F(y) = target`.
    fn newton(&self, mut y: DVector<f64>, target: &DVector<f64>, tol: f64, iters: &mut usize) -> Result<DVector<f64>> {
        let mut r = self.residual(&y) - target;
        for _ in 0..MAX_NEWTON {
            if r.amax() < tol {
                return Ok(y);
            }
            *iters += 1;
            let jac = self.jacobian(&y, &r);
            let step = Self::newton_step(&jac, &r)?;
            let mut t = 1.0;
            loop {
                let trial = &y + &step * t;
                let rt = self.residual(&trial) - target;
                if rt.norm() < r.norm() || t < 1e-4 {
                    y = trial;
                    r = rt;
                    break;
                }
                t *= 0.5;
            }
        }
        if r.amax() < tol {
            Ok(y)
        } else {
            Err(Error::DesignNotConverged { iterations: *iters, residual: r.amax() })
        }
    }

    /// Follow `F(y) = (1 − λ) F(y₀)` from `λ = 0` to `λ = 1`.
    fn continuation(&self, y0: DVector<f64>, tol: f64, iters: &mut usize) -> Result<DVector<f64>> {
        let f0 = self.residual(&y0);
        let mut y = y0;
        let mut lambda = 0.0;
        let mut dl: f64 = 0.125;
        while lambda < 1.0 {
            let next = (lambda + dl).min(1.0);
            let target = &f0 * (1.0 - next);
            let corrector_tol = if next < 1.0 { 1e-8 } else { tol };
            match self.newton(y.clone(), &target, corrector_tol, iters) {
                Ok(sol) => {
                    y = sol;
                    lambda = next;
                    dl = (dl * 1.5).min(0.25);
                }
                Err(e) => {
                    dl *= 0.5;
                    if dl < 1e-6 {
                        return Err(e);
                    }
                }
            }
        }
        Ok(y)
    }

    /// Smoothed peak amplitude `(mean |V|^p)^{1/p}` and its gradient in `y`.
    fn peak_objective(&self, y: &DVector<f64>, samples: &Samples, p: f64) -> (f64, DVector<f64>) {
        let c = self.affine.coeffs(y);
        let v: Vec<f64> = samples.cos.iter().map(|row| row.iter().zip(&c).map(|(b, c)| b * c).sum()).collect();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mean: f64 = v.iter().map(|x| (x.abs() / vmax).powf(p)).sum::<f64>() / v.len() as f64;
        let value = vmax * mean.powf(1.0 / p);
        // d value / d c_m = value^{1-p} · mean(|V|^{p-1} sgn V · cos_m)
        let m = c.len();
        let mut grad_c = DVector::<f64>::zeros(m - 1);
        for (row, x) in samples.cos.iter().zip(&v) {
            let w = (x.abs() / vmax).powf(p - 1.0) * x.signum();
            for j in 1..m {
                grad_c[j - 1] += w * row[j];
            }
        }
        grad_c *= (vmax / value).powf(p - 1.0) / v.len() as f64;
        (value, self.affine.basis.transpose() * grad_c)
    }

    /// Reduce the peak amplitude along the constraint manifold by projected
    /// gradient descent with Newton restoration.
    fn minimize_peak(&self, mut y: DVector<f64>, tol: f64, iters: &mut usize) -> Result<DVector<f64>> {
        let samples = Samples::new(self.spec.coefficient_count(), 1024);
        let zero = DVector::zeros(self.spec.nonlinear_count());
        for p in [16.0, 64.0] {
            let (mut value, mut grad) = self.peak_objective(&y, &samples, p);
            let mut step = 0.05;
            for _ in 0..300 {
                let r = self.residual(&y);
                let jac = self.jacobian(&y, &r);
                let gram = &jac * jac.transpose();
                let lagrange = gram.lu().solve(&(&jac * &grad)).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
                let projected = &grad - jac.transpose() * lagrange;
                let pnorm = projected.norm();
                if pnorm < 1e-9 * value.max(1.0) {
                    break;
                }
                let mut accepted = false;
                while step > 1e-10 {
                    let trial = &y - &projected * (step / pnorm);
                    if let Ok(restored) = self.newton(trial, &zero, tol, iters) {
                        let (tv, tg) = self.peak_objective(&restored, &samples, p);
                        if tv < value {
                            y = restored;
                            value = tv;
                            grad = tg;
                            accepted = true;
                            step *= 1.5;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        Ok(y)
    }
}

/// Cosine basis values `(2π) cos(2π m x)` at uniform samples of `x ∈ [−½, ½]`.
struct Samples {
    cos: Vec<Vec<f64>>,
}

impl Samples {
    fn new(m: usize, n: usize) -> Self {
        let cos = (0..=n)
            .map(|k| {
                let x = k as f64 / n as f64 - 0.5;
                (0..m).map(|j| std::f64::consts::TAU * (std::f64::consts::TAU * j as f64 * x).cos()).collect()
            })
            .collect();
        Samples { cos }
    }
}

/// Design a self-refocusing pulse with the default quadrature node count.
pub fn design(spec: DesignSpec, tol: f64) -> Result<Design> {
    design_with_nodes(spec, tol, DEFAULT_QUAD_NODES)
}

/// Design a self-refocusing pulse, evaluating the shape parameters with
/// `n_quad` Simpson intervals.
pub fn design_with_nodes(spec: DesignSpec, tol: f64, n_quad: usize) -> Result<Design> {
    if spec.l == 0 {
        return Err(Error::Config("design index L must be at least 1".into()));
    }
    if !(tol >= 1e-14) {
        return Err(Error::Config(format!("design tolerance {tol} is too small")));
    }
    let problem = Problem { spec, affine: Affine::new(&spec), n_quad };
    let mut seed = vec![0.0; spec.coefficient_count()];
    seed[0] = 0.5;
    seed[1] = 0.5;
    let y0 = problem.affine.project(&seed);
    let mut iterations = 0;
    let mut y = problem.continuation(y0, tol, &mut iterations)?;
    if spec.extra_terms > 0 {
        y = problem.minimize_peak(y, tol, &mut iterations)?;
    }
    let coeffs = problem.affine.coeffs(&y);
    let shape = PulseShape::fourier(&coeffs)?;
    let params = params_at(&shape, n_quad);
    let mut residuals = vec![("area - pi".to_string(), params.area - std::f64::consts::PI), ("s".to_string(), params.s)];
    if spec.family == Family::Q {
        residuals.push(("alpha".to_string(), params.alpha));
    }
    for r in 0..spec.l {
        let l = 2 * r as u32;
        let scale = std::f64::consts::TAU.powi(l as i32 + 1) * (coeffs.len() as f64).powi(l as i32);
        residuals.push((format!("V^({l})(0)"), shape.derivative(l, 0.0)? / scale));
    }
    let design = Design {
        spec,
        peak_amplitude: shape.peak_amplitude(4096),
        shape,
        coeffs,
        params,
        residuals,
        iterations,
    };
    if design.max_residual() >= tol.max(1e-13) {
        return Err(Error::DesignNotConverged { iterations, residual: design.max_residual() });
    }
    Ok(design)
}

/// Designed built-in pulses `S1`, `S2`, `Q1`, `Q2` (computed once).
pub fn builtin(label: &str) -> Result<PulseShape> {
    static CACHE: OnceLock<Vec<(String, std::result::Result<PulseShape, Error>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        [("S1", Family::S, 1), ("S2", Family::S, 2), ("Q1", Family::Q, 1), ("Q2", Family::Q, 2)]
            .into_iter()
            .map(|(name, family, l)| {
                (name.to_string(), design(DesignSpec::new(family, l), 1e-12).map(|d| d.shape))
            })
            .collect()
    });
    cache
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(label))
        .map(|(_, r)| r.clone())
        .unwrap_or_else(|| Err(Error::InvalidShape(format!("unknown designed pulse `{label}`"))))
}
