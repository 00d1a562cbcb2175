use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mpc::lp::solve_affine;
use crate::mpc::{MpcConfig, MpcSolution};
use crate::thermal_models::{carnot_cop, carnot_cop_dcold, discretize_params, DiscreteStateSpace, InputLaw, ThermalParameters};

/// Outcome of the sequential-linearization solver for the Carnot model.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearSolution {
    /// Best iterate; `predicted` and `s` come from the nonlinear re-simulation
    /// and `objective` is evaluated on it.
    pub solution: MpcSolution,
    /// Re-simulated objective of the accepted iterate after each pass.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    /// Stopped on the trajectory tolerance rather than the iteration cap.
    pub converged: bool,
    /// Always set: the frozen-COP iterates carry no optimality guarantee.
    pub suboptimal: bool,
}

/// Expected states `x_0 .. x_N` of the nonlinear model under `p`.
pub fn simulate_mean(dss: &DiscreteStateSpace, x0: &DVector<f64>, p: &[f64], t_r: &[f64]) -> Result<Vec<DVector<f64>>> {
    let mut xs = Vec::with_capacity(p.len() + 1);
    xs.push(x0.clone());
    for (k, (&pk, &tk)) in p.iter().zip(t_r).enumerate() {
        let next = dss.step_mean(&xs[k], tk, pk)?;
        xs.push(next);
    }
    Ok(xs)
}

/// States, outputs, objective and slacks of a re-simulated power plan.
type Evaluation = (Vec<DVector<f64>>, Vec<f64>, f64, Vec<f64>);

fn true_objective(outputs: &[f64], p: &[f64], prices: &[f64], b: f64, cfg: &MpcConfig) -> (f64, Vec<f64>) {
    let s: Vec<f64> = outputs
        .iter()
        .map(|&t| (t - cfg.t_max).max(cfg.t_min - t).max(0.0))
        .collect();
    let obj = p.iter().zip(prices).map(|(a, c)| a * c).sum::<f64>() + b * s.iter().sum::<f64>();
    (obj, s)
}

/// Affine prediction of the outputs `T̄ = free + Θ P` from a first-order
/// expansion of the Carnot heat term around the nominal `(p̄, x̄)`.
fn linearize(
    dss: &DiscreteStateSpace,
    heat_state: usize,
    x0: &DVector<f64>,
    nominal_p: &[f64],
    nominal_x: &[DVector<f64>],
    t_r: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = nominal_p.len();
    let ns = dss.state_dim();
    let b_t = dss.b_d.column(0).into_owned();
    let b_p = dss.b_d.column(1).into_owned();
    let mut f = x0.clone();
    let mut g = DMatrix::<f64>::zeros(ns, n);
    let mut free = Vec::with_capacity(n);
    let mut theta = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = nominal_x[k][heat_state];
        let cop = carnot_cop(t_r[k], v)?;
        let slope = nominal_p[k] * carnot_cop_dcold(t_r[k], v)?;
        let mut a_k = dss.a_d.clone();
        for i in 0..ns {
            a_k[(i, heat_state)] += b_p[i] * slope;
        }
        f = &a_k * &f + &b_t * t_r[k] - &b_p * (slope * v);
        g = &a_k * &g;
        g.column_mut(k).axpy(cop, &b_p, 1.0);
        free.push(dss.output(&f));
        let row = &dss.c * &g;
        theta.row_mut(k).copy_from(&row);
    }
    Ok((free, theta))
}

/// Economic MPC of Model E by sequential linearization: expand the Carnot
/// heat term around the current iterate, solve the LP inside a trust region on
/// the power change, re-simulate the nonlinear dynamics and repeat.  The first
/// pass freezes the COP along the unpowered trajectory.
pub fn solve_nonlinear_horizon(
    params: &ThermalParameters,
    x0: &DVector<f64>,
    cfg: &MpcConfig,
    prices: &[f64],
    t_r: &[f64],
) -> Result<NonlinearSolution> {
    cfg.validate()?;
    let dss = discretize_params(params, cfg.d)?;
    let InputLaw::Carnot { heat_state } = dss.input_law else {
        return Err(Error::validation("kind", format!("sequential linearization needs kind E, got {}", params.kind())));
    };
    let n = cfg.horizon;
    if t_r.len() != n || prices.len() != n || x0.len() != dss.state_dim() {
        return Err(Error::validation("horizon", format!("need {n} room temperatures and prices and a full state")));
    }
    let b = cfg.slack_weight_for(prices);
    // Trust-region loop: accept a step only if the re-simulated objective
    // improves, otherwise halve the allowed power change.
    let evaluate = |p: &[f64]| -> Result<Evaluation> {
        let xs = simulate_mean(&dss, x0, p, t_r)?;
        let outputs: Vec<f64> = xs[1..].iter().map(|x| dss.output(x)).collect();
        let (obj, s) = true_objective(&outputs, p, prices, b, cfg);
        Ok((xs, outputs, obj, s))
    };
    let mut p_nom = vec![0.0; n];
    let (mut xs, mut outputs, mut obj_nom, _) = evaluate(&p_nom)?;
    let mut radius = cfg.p_max;
    let mut best: Option<MpcSolution> = None;
    let mut objectives = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_linearizations {
        let (free, theta) = linearize(&dss, heat_state, x0, &p_nom, &xs, t_r)?;
        let lo: Vec<f64> = p_nom.iter().map(|p| (p - radius).max(0.0)).collect();
        let hi: Vec<f64> = p_nom.iter().map(|p| (p + radius).min(cfg.p_max)).collect();
        let mut sol = solve_affine(&free, &theta, prices, cfg, Some((&lo, &hi)))?;
        let (xs_new, out_new, obj, s) = evaluate(&sol.p)?;
        let improved = best.is_none() || obj < obj_nom;
        if improved {
            let change = out_new.iter().zip(&outputs).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
            p_nom.clone_from(&sol.p);
            xs = xs_new;
            outputs = out_new;
            obj_nom = obj;
            sol.objective = obj;
            sol.s = s;
            sol.predicted = outputs.clone();
            best = Some(sol);
            radius = (2.0 * radius).min(cfg.p_max);
            objectives.push(obj);
            if change < cfg.linearization_tol {
                converged = true;
                break;
            }
        } else {
            radius *= 0.5;
            objectives.push(obj_nom);
        }
    }
    Ok(NonlinearSolution {
        solution: best.expect("at least one linearization"),
        iterations: objectives.len(),
        objectives,
        converged,
        suboptimal: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::{build_and_solve_lp, condense};
    use crate::thermal_models::{fixtures, ModelKind, Param};

    #[test]
    fn frozen_cop_matches_linear_model() {
        // With the evaporator pinned, the Carnot factor is constant and the
        // problem is Model C with COP = eta · carnot.
        let pe = fixtures::table(ModelKind::E);
        let dss_e = discretize_params(&pe, 120.0).unwrap();
        let v_e = -30.0;
        let cop = pe.get(Param::Eta).unwrap() * carnot_cop(23.0, v_e).unwrap();
        let n = 30;
        let x0 = DVector::from_row_slice(&[v_e, -20.0, -10.0]);
        let cfg = MpcConfig { horizon: n, ..Default::default() };
        let prices: Vec<f64> = (0..n).map(|k| if k < 15 { 10.0 } else { 50.0 }).collect();
        let gains = vec![carnot_cop(23.0, v_e).unwrap(); n];
        let a = build_and_solve_lp(&condense(&dss_e, &x0, n).unwrap().with_power_gains(&gains), &[23.0; 30], &prices, &cfg).unwrap();

        let mut lin = dss_e.clone();
        lin.input_law = InputLaw::Linear;
        let col = lin.b_d.column(1) * (cop / pe.get(Param::Eta).unwrap());
        lin.b_d.set_column(1, &col);
        let b = build_and_solve_lp(&condense(&lin, &x0, n).unwrap(), &[23.0; 30], &prices, &cfg).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9 * a.objective.abs().max(1.0));
    }

    #[test]
    fn respects_bounds_under_resimulation() {
        let pe = fixtures::table(ModelKind::E);
        let dss = discretize_params(&pe, 120.0).unwrap();
        let css = crate::thermal_models::build_continuous(&pe).unwrap();
        let (x0, _) = css.steady_state_at(23.0, -18.5, 68.0).unwrap();
        let n = 120;
        let cfg = MpcConfig { horizon: n, ..Default::default() };
        let prices: Vec<f64> = (0..n).map(|k| if k < 40 { 10.0 } else { 50.0 }).collect();
        let out = solve_nonlinear_horizon(&pe, &x0, &cfg, &prices, &vec![23.0; n]).unwrap();
        assert!(out.suboptimal);
        assert!(out.objectives.windows(2).all(|w| w[1] <= w[0]));
        let xs = simulate_mean(&dss, &x0, &out.solution.p, &vec![23.0; n]).unwrap();
        let worst = xs[1..]
            .iter()
            .map(|x| {
                let t = dss.output(x);
                (t - cfg.t_max).max(cfg.t_min - t).max(0.0)
            })
            .fold(0.0, f64::max);
        assert!(worst < 1.0, "{worst}");
        assert!(out.solution.p.iter().all(|&p| (-1e-9..=68.0 + 1e-9).contains(&p)));
    }

    #[test]
    fn rejects_linear_models() {
        let x0 = DVector::from_element(3, -20.0);
        let cfg = MpcConfig { horizon: 5, ..Default::default() };
        assert!(solve_nonlinear_horizon(&fixtures::table(ModelKind::C), &x0, &cfg, &[1.0; 5], &[23.0; 5]).is_err());
    }
}
