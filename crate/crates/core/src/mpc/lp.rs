use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mpc::{CondensedProblem, MpcConfig};
use crate::simplex::{solve, Lp, LpStatus, SimplexOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct MpcSolution {
    /// Power set-points, W.
    pub p: Vec<f64>,
    /// Temperature slacks, °C.
    pub s: Vec<f64>,
    /// `Σ P_k c_k + b s_k`.
    pub objective: f64,
    /// Predicted outputs for steps `1..=N`, °C.
    pub predicted: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
    /// Complementary-slackness residual of the LP optimum.
    pub certificate: f64,
}

/// Builds the soft-constrained LP over duty `u = P / P_max` and slacks and
/// solves it.
///
/// ```text
/// min  Σ c_k P_max u_k + b s_k
/// s.t. Θ u − s ≤ T_max − f,   −Θ u − s ≤ f − T_min,   0 ≤ u ≤ 1,  s ≥ 0
/// ```
/// with `f` the free response and `Θ = Θ_B P_max`.
pub fn build_and_solve_lp(
    cp: &CondensedProblem,
    t_r: &[f64],
    prices: &[f64],
    cfg: &MpcConfig,
) -> Result<MpcSolution> {
    cfg.validate()?;
    let n = cp.steps();
    if t_r.len() != n || prices.len() != n {
        return Err(Error::validation(
            "horizon",
            format!("need {n} room temperatures and prices, got {} and {}", t_r.len(), prices.len()),
        ));
    }
    if prices.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::validation("price", "prices must be >= 0"));
    }
    let free: Vec<f64> = cp.free_response(t_r).iter().copied().collect();
    solve_affine(&free, &cp.theta_b, prices, cfg, None)
}

/// Same LP for an arbitrary affine prediction `T̄ = free + Θ P` with `Θ`
/// lower triangular, optionally with tighter power bounds `lo ≤ P ≤ hi`.
pub(crate) fn solve_affine(
    free: &[f64],
    theta: &DMatrix<f64>,
    prices: &[f64],
    cfg: &MpcConfig,
    box_: Option<(&[f64], &[f64])>,
) -> Result<MpcSolution> {
    let n = free.len();
    let b = cfg.slack_weight_for(prices);
    let zeros = vec![0.0; n];
    let full = vec![cfg.p_max; n];
    let (lo, hi) = box_.unwrap_or((&zeros, &full));
    // Shift to u = (P - lo) / P_max so the solver's bounds stay at zero.
    let free: Vec<f64> = (0..n)
        .map(|k| free[k] + (0..=k).map(|j| theta[(k, j)] * lo[j]).sum::<f64>())
        .collect();
    let cols = 2 * n;
    let mut a = vec![0.0; 2 * n * cols];
    let mut rhs = vec![0.0; 2 * n];
    for k in 0..n {
        let up = k * cols;
        let lo = (n + k) * cols;
        for j in 0..=k {
            let th = theta[(k, j)] * cfg.p_max;
            a[up + j] = th;
            a[lo + j] = -th;
        }
        a[up + n + k] = -1.0;
        a[lo + n + k] = -1.0;
        rhs[k] = cfg.t_max - free[k];
        rhs[n + k] = free[k] - cfg.t_min;
    }
    let mut c: Vec<f64> = prices.iter().map(|&p| p * cfg.p_max).collect();
    c.extend(std::iter::repeat_n(b, n));
    let mut upper: Vec<f64> = (0..n).map(|j| ((hi[j] - lo[j]) / cfg.p_max).max(0.0)).collect();
    upper.extend(std::iter::repeat_n(f64::INFINITY, n));
    let lp = Lp { c, a, b: rhs, upper };
    let sol = solve(&lp, &SimplexOptions::default())?;
    if sol.status == LpStatus::IterationLimit {
        return Err(Error::Solver(format!(
            "iteration limit after {} pivots (objective {})",
            sol.iterations, sol.objective
        )));
    }
    let certificate = lp.certificate_residual(&sol.x, &sol.duals);
    let z: Vec<f64> = sol.x[..n].iter().map(|u| u * cfg.p_max).collect();
    let s = sol.x[n..].to_vec();
    let predicted = (0..n)
        .map(|k| free[k] + (0..=k).map(|j| theta[(k, j)] * z[j]).sum::<f64>())
        .collect();
    let p: Vec<f64> = z.iter().zip(lo).map(|(z, l)| (z + l).min(cfg.p_max)).collect();
    let offset: f64 = lo.iter().zip(prices).map(|(l, c)| l * c).sum();
    Ok(MpcSolution {
        p,
        s,
        objective: sol.objective + offset,
        predicted,
        status: sol.status,
        iterations: sol.iterations,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::condense;
    use crate::thermal_models::{discretize_params, fixtures, ModelKind, Param};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn objective_of(cp: &CondensedProblem, p: &[f64], t_r: &[f64], prices: &[f64], cfg: &MpcConfig) -> f64 {
        let b = cfg.slack_weight_for(prices);
        let t = cp.predict(p, t_r);
        p.iter()
            .zip(prices)
            .zip(t.iter())
            .map(|((&pk, &ck), &tk)| pk * ck + b * (tk - cfg.t_max).max(cfg.t_min - tk).max(0.0))
            .sum()
    }

    #[test]
    fn no_losses_means_no_consumption() {
        let params = fixtures::table(ModelKind::C).with(Param::Rw, 1e12).unwrap();
        let dss = discretize_params(&params, 120.0).unwrap();
        let cp = condense(&dss, &DVector::from_element(3, -22.0), 40).unwrap();
        let cfg = MpcConfig { horizon: 40, ..Default::default() };
        let sol = build_and_solve_lp(&cp, &[23.0; 40], &[10.0; 40], &cfg).unwrap();
        assert!(sol.p.iter().all(|&p| p.abs() < 1e-9));
        assert!(sol.s.iter().all(|&s| s.abs() < 1e-9));
    }

    #[test]
    fn beats_enumeration_and_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let dss = discretize_params(&fixtures::table(ModelKind::C), 120.0).unwrap();
        let cfg = MpcConfig { horizon: 3, ..Default::default() };
        let levels = [0.0, 17.0, 34.0, 51.0, 68.0];
        for _ in 0..20 {
            let x0 = DVector::from_fn(3, |_, _| rng.random_range(-30.0..-15.0));
            let cp = condense(&dss, &x0, 3).unwrap();
            let prices: Vec<f64> = (0..3).map(|_| rng.random_range(5.0..60.0)).collect();
            let sol = build_and_solve_lp(&cp, &[23.0; 3], &prices, &cfg).unwrap();
            assert!(sol.certificate < 1e-6);
            let mut best = f64::INFINITY;
            for a in levels {
                for b in levels {
                    for c in levels {
                        best = best.min(objective_of(&cp, &[a, b, c], &[23.0; 3], &prices, &cfg));
                    }
                }
            }
            assert!(sol.objective <= best + 1e-6, "{} vs {best}", sol.objective);
            let again = objective_of(&cp, &sol.p, &[23.0; 3], &prices, &cfg);
            assert!((again - sol.objective).abs() < 1e-6 * sol.objective.abs().max(1.0));
        }
    }

    #[test]
    fn higher_price_never_raises_planned_consumption() {
        let dss = discretize_params(&fixtures::table(ModelKind::C), 120.0).unwrap();
        let n = 120;
        let cfg = MpcConfig { horizon: n, slack_weight: Some(1e5), ..Default::default() };
        let x0 = DVector::from_row_slice(&[-24.0, -19.0, -17.0]);
        let cp = condense(&dss, &x0, n).unwrap();
        let step = |high: f64| -> Vec<f64> { (0..n).map(|k| if k < 60 { 10.0 } else { high }).collect() };
        let a = build_and_solve_lp(&cp, &vec![23.0; n], &step(50.0), &cfg).unwrap();
        let b = build_and_solve_lp(&cp, &vec![23.0; n], &step(100.0), &cfg).unwrap();
        let post = |s: &MpcSolution| s.p[60..].iter().sum::<f64>();
        assert!(post(&b) <= post(&a) + 1e-6);
    }
}
