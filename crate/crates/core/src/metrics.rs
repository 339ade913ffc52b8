//! Worst-case figure observables over a grid of initial qubit states.

use std::fmt::Write as _;

use crate::algebra::{Ket, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::propagate::EvolutionTrace;

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const CSV_HEADER: &str = "period_index,time_over_taup,fidelity_min,n_mean_max,leakage_max";

/// Initial qubit states: the six cardinal states followed by a Fibonacci
/// sphere grid.
#[derive(Debug, Clone)]
pub struct BlochGrid {
    states: Vec<Ket>,
}

fn bloch_state(theta: f64, phi: f64) -> Ket {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    Ket::from_vec(vec![C64::from(c), C64::from_polar(s, phi)])
}

impl BlochGrid {
    pub fn new(points: usize) -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut states = vec![
            Ket::from_vec(vec![ONE, ZERO]),
            Ket::from_vec(vec![ZERO, ONE]),
            Ket::from_vec(vec![C64::from(r), C64::from(r)]),
            Ket::from_vec(vec![C64::from(r), C64::from(-r)]),
            Ket::from_vec(vec![C64::from(r), C64::new(0.0, r)]),
            Ket::from_vec(vec![C64::from(r), C64::new(0.0, -r)]),
        ];
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for k in 0..points {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / points as f64;
            states.push(bloch_state(z.acos(), golden * k as f64));
        }
        BlochGrid { states }
    }

    /// Grid containing exactly the given states.
    pub fn from_states(states: Vec<Ket>) -> Result<Self> {
        for (i, s) in states.iter().enumerate() {
            if s.len() != 2 || (s.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("grid state {i} is not a normalized qubit state")));
            }
        }
        Ok(BlochGrid { states })
    }

    pub fn states(&self) -> &[Ket] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl Default for BlochGrid {
    fn default() -> Self {
        BlochGrid::new(DEFAULT_GRID_POINTS)
    }
}

fn check(trace: &EvolutionTrace, grid: &BlochGrid) -> Result<()> {
    if trace.samples.len() != grid.len() {
        return Err(Error::MissingReducedStates(grid.len()));
    }
    Ok(())
}

/// `min_ψ ⟨ψ|ρ_q(t_k)|ψ⟩` per sample.
pub fn fidelity_min(trace: &EvolutionTrace, grid: &BlochGrid) -> Result<Vec<f64>> {
    check(trace, grid)?;
    Ok((0..trace.len())
        .map(|k| {
            grid.states()
                .iter()
                .zip(&trace.samples)
                .map(|(psi, s)| (psi.adjoint() * &s[k].rho_qubit * psi)[(0, 0)].re.clamp(0.0, 1.0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `max_ψ ⟨b†b⟩` per sample.
pub fn quanta_max(trace: &EvolutionTrace, grid: &BlochGrid) -> Result<Vec<f64>> {
    check(trace, grid)?;
    Ok((0..trace.len()).map(|k| trace.samples.iter().map(|s| s[k].n_mean).fold(0.0, f64::max)).collect())
}

/// Largest top-level population per sample.
pub fn leakage_max(trace: &EvolutionTrace, grid: &BlochGrid) -> Result<Vec<f64>> {
    check(trace, grid)?;
    Ok((0..trace.len()).map(|k| trace.samples.iter().map(|s| s[k].leakage).fold(0.0, f64::max)).collect())
}

/// Figure data as CSV text.
pub fn to_csv(trace: &EvolutionTrace, grid: &BlochGrid, tau_p: f64) -> Result<String> {
    let f = fidelity_min(trace, grid)?;
    let n = quanta_max(trace, grid)?;
    let l = leakage_max(trace, grid)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for k in 0..trace.len() {
        writeln!(out, "{k},{:.6},{:.12e},{:.12e},{:.6e}", trace.times[k] / tau_p, f[k], n[k], l[k]).expect("string write");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_states_are_normalized_and_include_cardinals() {
        let g = BlochGrid::new(50);
        assert_eq!(g.len(), 56);
        for s in g.states() {
            assert!((s.norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(g.states()[0], Ket::from_vec(vec![ONE, ZERO]));
    }

    #[test]
    fn fibonacci_grid_is_balanced() {
        let g = BlochGrid::new(200);
        let mut mean = [0.0; 3];
        for s in &g.states()[6..] {
            let rho = s * s.adjoint();
            mean[0] += 2.0 * rho[(0, 1)].re;
            mean[1] += -2.0 * rho[(0, 1)].im;
            mean[2] += (rho[(0, 0)] - rho[(1, 1)]).re;
        }
        for m in mean {
            assert!((m / 200.0).abs() < 0.02);
        }
    }

    #[test]
    fn from_states_validates() {
        assert!(BlochGrid::from_states(vec![Ket::from_vec(vec![ONE, ONE])]).is_err());
    }
}
