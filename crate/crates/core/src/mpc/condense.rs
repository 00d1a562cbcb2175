use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::thermal_models::DiscreteStateSpace;

/// Output predictions over `N` steps as an affine map of the inputs:
/// `T̄ = Φ x̄₀ + Θ_B P + Θ_E T_r`, with row `k` predicting the output at step `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedProblem {
    pub phi: DMatrix<f64>,
    /// Power channel, lower triangular (diagonal included).
    pub theta_b: DMatrix<f64>,
    /// Room-temperature channel, lower triangular (diagonal included).
    pub theta_e: DMatrix<f64>,
    pub x0: DVector<f64>,
}

impl CondensedProblem {
    pub fn steps(&self) -> usize {
        self.phi.nrows()
    }

    /// Prediction without power: `Φ x̄₀ + Θ_E T_r`.
    pub fn free_response(&self, t_r: &[f64]) -> DVector<f64> {
        &self.phi * &self.x0 + &self.theta_e * DVector::from_column_slice(t_r)
    }

    pub fn predict(&self, p: &[f64], t_r: &[f64]) -> DVector<f64> {
        self.free_response(t_r) + &self.theta_b * DVector::from_column_slice(p)
    }

    /// Scales column `j` of `Θ_B` by `gains[j]`, i.e. power at step `j` acts
    /// with a frozen multiplier.
    pub fn with_power_gains(&self, gains: &[f64]) -> CondensedProblem {
        let mut out = self.clone();
        for (j, &g) in gains.iter().enumerate() {
            out.theta_b.column_mut(j).scale_mut(g);
        }
        out
    }
}

/// Condenses the expected linear dynamics of `dss` from `x0` over `n` steps.
///
/// The power column of `B_d` is used as is; for the Carnot law it still
/// needs the COP scaling applied through [`CondensedProblem::with_power_gains`].
pub fn condense(dss: &DiscreteStateSpace, x0: &DVector<f64>, n: usize) -> Result<CondensedProblem> {
    let ns = dss.state_dim();
    if x0.len() != ns {
        return Err(Error::validation("x0", format!("expected {ns} states, got {}", x0.len())));
    }
    if n < 1 {
        return Err(Error::validation("N", "horizon must be >= 1"));
    }
    // Markov parameters h_i = C A^i B for both input columns, and Φ rows C A^{k+1}.
    let mut phi = DMatrix::zeros(n, ns);
    let mut markov_b = Vec::with_capacity(n);
    let mut markov_e = Vec::with_capacity(n);
    let mut ca = dss.c.clone();
    for k in 0..n {
        markov_e.push((&ca * dss.b_d.column(0))[0]);
        markov_b.push((&ca * dss.b_d.column(1))[0]);
        ca = &ca * &dss.a_d;
        phi.row_mut(k).copy_from(&ca);
    }
    let mut theta_b = DMatrix::zeros(n, n);
    let mut theta_e = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..=k {
            theta_b[(k, j)] = markov_b[k - j];
            theta_e[(k, j)] = markov_e[k - j];
        }
    }
    Ok(CondensedProblem {
        phi,
        theta_b,
        theta_e,
        x0: x0.clone(),
    })
}
