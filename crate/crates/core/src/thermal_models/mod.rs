//! Thermal-equivalent-circuit models A–E of the freezer.
//!
//! Every model shares the input ordering `u = [T_r, P]` (room temperature in
//! °C, electrical power in W) and measures one state, the freezer air
//! temperature. Model E replaces the constant coefficient of performance by
//! `eta` times the reversed-Carnot COP between the room and the heat
//! exchanger, which makes the power channel state dependent.

pub mod fixtures;
mod params;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

pub use params::{ModelKind, Param, ThermalParameters, DEFAULT_ETA_CAP, DEFAULT_MEASUREMENT_NOISE};

/// Offset between °C and K used by the Carnot relation.
pub const KELVIN_OFFSET: f64 = 273.0;

/// How the power input reaches the heat-exchanger node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputLaw {
    /// Column `P` of `B` multiplies the electrical power directly.
    Linear,
    /// Column `P` of `B` multiplies `P · COP_ideal(T_r, x[heat_state])`.
    Carnot { heat_state: usize },
}

/// `dx = (A x + B u) dt + W dω`, `y = C x + v e`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousStateSpace {
    pub kind: ModelKind,
    pub a: DMatrix<f64>,
    /// Columns: room temperature, power.
    pub b: DMatrix<f64>,
    pub c: RowDVector<f64>,
    /// Diagonal diffusion, °C/√s.
    pub w: DMatrix<f64>,
    pub v: f64,
    pub input_law: InputLaw,
}

/// Forward-Euler discretization of a [`ContinuousStateSpace`] at period `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStateSpace {
    pub kind: ModelKind,
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub c: RowDVector<f64>,
    /// Per-step process-noise factor; the predicted covariance adds `w wᵀ`.
    pub w: DMatrix<f64>,
    pub v: f64,
    pub d: f64,
    pub input_law: InputLaw,
}

/// Builds the continuous stochastic state space of `params.kind()`.
pub fn build_continuous(params: &ThermalParameters) -> Result<ContinuousStateSpace> {
    use Param::*;
    params.validate()?;
    let kind = params.kind();
    let n = kind.state_dim();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 2);
    let g = params.gain();
    let p = |q| params.req(q);

    // Conductance between nodes i and j with capacity `cap_i` on node i.
    let mut couple = |i: usize, j: usize, cap_i: f64, cap_j: f64, r: f64| {
        a[(i, i)] -= 1.0 / (cap_i * r);
        a[(i, j)] += 1.0 / (cap_i * r);
        a[(j, j)] -= 1.0 / (cap_j * r);
        a[(j, i)] += 1.0 / (cap_j * r);
    };
    match kind {
        ModelKind::A => {
            b[(0, 1)] = -g / p(Ca);
        }
        ModelKind::B => {
            couple(0, 1, p(Ca), p(Ce), p(Re));
            b[(1, 1)] = -g / p(Ce);
        }
        ModelKind::C | ModelKind::E => {
            couple(0, 1, p(Ce), p(Ca), p(Re));
            couple(1, 2, p(Ca), p(Cw), p(Ra));
            b[(0, 1)] = -g / p(Ce);
        }
        ModelKind::D => {
            couple(0, 1, p(Ce), p(Ca), p(Re));
            couple(1, 2, p(Ca), p(Cw), p(Ra));
            couple(2, 3, p(Cw), p(Cf), p(Rw));
            b[(0, 1)] = -g / p(Ce);
        }
    }
    // Loss towards the room through the outermost resistor.
    let (room_node, cap, r) = match kind {
        ModelKind::A | ModelKind::B => (0, p(Ca), p(Rw)),
        ModelKind::C | ModelKind::E => (2, p(Cw), p(Rw)),
        ModelKind::D => (3, p(Cf), p(Rf)),
    };
    a[(room_node, room_node)] -= 1.0 / (cap * r);
    b[(room_node, 0)] = 1.0 / (cap * r);

    let mut c = RowDVector::zeros(n);
    c[kind.output_state()] = 1.0;
    let w = DMatrix::from_diagonal(&DVector::from_vec(params.process_noise()));
    let input_law = if kind.is_linear() {
        InputLaw::Linear
    } else {
        InputLaw::Carnot {
            heat_state: kind.heat_state(),
        }
    };
    Ok(ContinuousStateSpace {
        kind,
        a,
        b,
        c,
        w,
        v: params.v(),
        input_law,
    })
}

/// Reversed-Carnot coefficient of performance between a hot reservoir at
/// `t_hot` and a cold one at `t_cold` (both °C).
pub fn carnot_cop(t_hot: f64, t_cold: f64) -> Result<f64> {
    if !(t_hot > t_cold) {
        return Err(Error::Domain(format!(
            "reversed Carnot COP needs T_H > T_C, got T_H = {t_hot} °C, T_C = {t_cold} °C"
        )));
    }
    Ok((t_cold + KELVIN_OFFSET) / (t_hot - t_cold))
}

/// Derivative of [`carnot_cop`] with respect to the cold temperature.
pub fn carnot_cop_dcold(t_hot: f64, t_cold: f64) -> Result<f64> {
    carnot_cop(t_hot, t_cold)?;
    let gap = t_hot - t_cold;
    Ok((t_hot + KELVIN_OFFSET) / (gap * gap))
}

/// Heat extracted from the freezer (W) for electrical power `p`.
///
/// Kinds A–D use the constant gain; kind E scales `eta` by the Carnot COP
/// between the room `t_r` and the heat exchanger `v_e`.
pub fn heat_extraction(params: &ThermalParameters, p: f64, t_r: f64, v_e: f64) -> Result<f64> {
    if p < 0.0 {
        return Err(Error::validation("P", format!("power must be >= 0, got {p}")));
    }
    match params.kind() {
        ModelKind::E if p == 0.0 => Ok(0.0),
        ModelKind::E => {
            let cop = carnot_cop(t_r, v_e)?;
            Ok(p * params.req(Param::Eta) * cop)
        }
        _ => Ok(p * params.gain()),
    }
}

impl ContinuousStateSpace {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Power as seen by the `P` column of `B`.
    pub fn effective_power(&self, x: &DVector<f64>, t_r: f64, p: f64) -> Result<f64> {
        match self.input_law {
            InputLaw::Linear => Ok(p),
            InputLaw::Carnot { .. } if p == 0.0 => Ok(0.0),
            InputLaw::Carnot { heat_state } => Ok(p * carnot_cop(t_r, x[heat_state])?),
        }
    }

    /// Deterministic drift `A x + B u`.
    pub fn drift(&self, x: &DVector<f64>, t_r: f64, p: f64) -> Result<DVector<f64>> {
        let pe = self.effective_power(x, t_r, p)?;
        Ok(&self.a * x + self.b.column(0) * t_r + self.b.column(1) * pe)
    }

    /// Expected forward-Euler step of length `d`.
    pub fn euler_step(&self, x: &DVector<f64>, t_r: f64, p: f64, d: f64) -> Result<DVector<f64>> {
        Ok(x + self.drift(x, t_r, p)? * d)
    }

    /// `∂(euler_step)/∂x` at `(x, u)`.
    pub fn euler_jacobian(&self, x: &DVector<f64>, t_r: f64, p: f64, d: f64) -> Result<DMatrix<f64>> {
        let n = self.state_dim();
        let mut jac = DMatrix::identity(n, n) + &self.a * d;
        if let (InputLaw::Carnot { heat_state }, true) = (self.input_law, p != 0.0) {
            let slope = p * carnot_cop_dcold(t_r, x[heat_state])?;
            for i in 0..n {
                jac[(i, heat_state)] += d * self.b[(i, 1)] * slope;
            }
        }
        Ok(jac)
    }

    /// Equilibrium state under constant inputs.
    pub fn steady_state(&self, t_r: f64, p: f64) -> Result<DVector<f64>> {
        let n = self.state_dim();
        let lu = self.a.clone().lu();
        let linear_solve = |pe: f64| -> Result<DVector<f64>> {
            let rhs = -(self.b.column(0) * t_r + self.b.column(1) * pe);
            lu.solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular system matrix".into()))
        };
        match self.input_law {
            InputLaw::Linear => linear_solve(p),
            InputLaw::Carnot { heat_state } => {
                // Newton on the drift, started from a frozen-COP solution.
                let mut x = linear_solve(p * carnot_cop(t_r, t_r - 40.0)?)?;
                for _ in 0..100 {
                    let f = self.drift(&x, t_r, p)?;
                    if f.amax() < 1e-12 {
                        return Ok(x);
                    }
                    let mut jac = self.a.clone();
                    let slope = p * carnot_cop_dcold(t_r, x[heat_state])?;
                    for i in 0..n {
                        jac[(i, heat_state)] += self.b[(i, 1)] * slope;
                    }
                    let step = jac
                        .lu()
                        .solve(&f)
                        .ok_or_else(|| Error::Numerical("singular Jacobian".into()))?;
                    x -= step;
                }
                Err(Error::Numerical("steady state did not converge".into()))
            }
        }
    }

    /// Equilibrium whose output equals `y` under a constant power in
    /// `[0, p_max]`; returns the state and that power.
    pub fn steady_state_at(&self, t_r: f64, y: f64, p_max: f64) -> Result<(DVector<f64>, f64)> {
        let out = |p: f64| -> Result<f64> { Ok((&self.c * self.steady_state(t_r, p)?)[0]) };
        let (hot, cold) = (out(0.0)?, out(p_max)?);
        if !(y <= hot && y >= cold) {
            return Err(Error::Domain(format!(
                "no steady state at {y} °C: reachable range is [{cold}, {hot}] °C"
            )));
        }
        // Output decreases with power; bisection handles the Carnot law too.
        let (mut lo, mut hi) = (0.0, p_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if out(mid)? > y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * p_max {
                break;
            }
        }
        let p = 0.5 * (lo + hi);
        Ok((self.steady_state(t_r, p)?, p))
    }
}

impl DiscreteStateSpace {
    pub fn state_dim(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x)[0]
    }

    /// Expected next state; for the Carnot law the power column is scaled by
    /// the COP at the current heat-exchanger temperature.
    pub fn step_mean(&self, x: &DVector<f64>, t_r: f64, p: f64) -> Result<DVector<f64>> {
        let pe = match self.input_law {
            InputLaw::Linear => p,
            InputLaw::Carnot { .. } if p == 0.0 => 0.0,
            InputLaw::Carnot { heat_state } => p * carnot_cop(t_r, x[heat_state])?,
        };
        Ok(&self.a_d * x + self.b_d.column(0) * t_r + self.b_d.column(1) * pe)
    }

    /// State Jacobian of [`DiscreteStateSpace::step_mean`].
    pub fn step_jacobian(&self, x: &DVector<f64>, t_r: f64, p: f64) -> Result<DMatrix<f64>> {
        let mut jac = self.a_d.clone();
        if let (InputLaw::Carnot { heat_state }, true) = (self.input_law, p != 0.0) {
            let slope = p * carnot_cop_dcold(t_r, x[heat_state])?;
            for i in 0..self.state_dim() {
                jac[(i, heat_state)] += self.b_d[(i, 1)] * slope;
            }
        }
        Ok(jac)
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Forward-Euler discretization `A_d = I + A d`, `B_d = B d`.
///
/// The diffusion is scaled to one step, `W √d`, so that the discrete
/// process-noise covariance `W Wᵀ d` matches the Euler–Maruyama increment.
pub fn discretize(css: &ContinuousStateSpace, d: f64) -> Result<DiscreteStateSpace> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::validation("d", format!("sample period must be > 0, got {d}")));
    }
    let n = css.state_dim();
    let a_d = DMatrix::identity(n, n) + &css.a * d;
    let radius = spectral_radius(&a_d);
    // Marginal (identity) dynamics are accepted; growth is not.
    if !(radius <= 1.0 + 1e-12) {
        return Err(Error::UnstableDiscretization { d, radius });
    }
    Ok(DiscreteStateSpace {
        kind: css.kind,
        a_d,
        b_d: &css.b * d,
        c: css.c.clone(),
        w: &css.w * d.sqrt(),
        v: css.v,
        d,
        input_law: css.input_law,
    })
}

/// Convenience: parameters straight to a discrete model.
pub fn discretize_params(params: &ThermalParameters, d: f64) -> Result<DiscreteStateSpace> {
    discretize(&build_continuous(params)?, d)
}

fn require_kind_e(params: &ThermalParameters) -> Result<()> {
    if params.kind() != ModelKind::E {
        return Err(Error::validation(
            "kind",
            format!("the Carnot model is kind E, got {}", params.kind()),
        ));
    }
    Ok(())
}

/// Expected (noise-free) Euler step of the nonlinear Model E.
pub fn nonlinear_step(
    params: &ThermalParameters,
    x: &DVector<f64>,
    p: f64,
    t_r: f64,
    d: f64,
) -> Result<DVector<f64>> {
    require_kind_e(params)?;
    build_continuous(params)?.euler_step(x, t_r, p, d)
}

/// State Jacobian of [`nonlinear_step`].
pub fn jacobian_state(
    params: &ThermalParameters,
    x: &DVector<f64>,
    t_r: f64,
    p: f64,
    d: f64,
) -> Result<DMatrix<f64>> {
    require_kind_e(params)?;
    build_continuous(params)?.euler_jacobian(x, t_r, p, d)
}

/// Thermal capacity `C = M c` (J/K) from mass (kg) and specific heat (J/(kg K)).
pub fn empirical_capacity(mass: f64, specific_heat: f64) -> Result<f64> {
    positive("M", mass)?;
    positive("c", specific_heat)?;
    Ok(mass * specific_heat)
}

/// Conduction resistance `R = t / (λ S)` (K/W) of an insulation layer.
pub fn empirical_resistance(conductivity: f64, thickness: f64, surface: f64) -> Result<f64> {
    positive("lambda", conductivity)?;
    positive("t", thickness)?;
    positive("S", surface)?;
    Ok(thickness / (conductivity * surface))
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be > 0, got {x}")))
    }
}
