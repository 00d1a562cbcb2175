use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimation::kalman::FilterOptions;
use crate::estimation::likelihood::{innovations_loglik_with, loglik_value, LOGLIK_FAILURE};
use crate::estimation::TimeSeries;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::thermal_models::{Param, ThermalParameters};

/// Box constraints in natural units, aligned with the canonical parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub v: (f64, f64),
}

impl Bounds {
    /// Two decades either side of each positive parameter of `theta0`, noise
    /// exponents in `[-30, 3]`, `eta` capped by the parameter set's cap.
    pub fn around(theta0: &ThermalParameters) -> Self {
        let mut lower = vec![];
        let mut upper = vec![];
        for (p, x) in theta0.iter() {
            match p {
                Param::Alpha(_) => {
                    lower.push(-30.0);
                    upper.push(3.0);
                }
                Param::Eta => {
                    lower.push(x / 100.0);
                    upper.push((x * 100.0).min(theta0.eta_cap()));
                }
                _ => {
                    lower.push(x / 100.0);
                    upper.push(x * 100.0);
                }
            }
        }
        Bounds {
            lower,
            upper,
            v: (1e-4, 10.0),
        }
    }

    pub fn validate(&self, theta0: &ThermalParameters) -> Result<()> {
        let n = theta0.values().len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::validation("bounds", format!("expected {n} lower and upper values")));
        }
        for ((p, x), (&lo, &hi)) in theta0.iter().zip(self.lower.iter().zip(&self.upper)) {
            if !(lo <= x && x <= hi) {
                return Err(Error::validation(
                    p.name(),
                    format!("initial value {x} outside bounds [{lo}, {hi}]"),
                ));
            }
            if p.is_positive() && lo <= 0.0 {
                return Err(Error::validation(p.name(), "lower bound must be > 0"));
            }
        }
        let (lo, hi) = self.v;
        if !(lo > 0.0 && lo <= theta0.v() && theta0.v() <= hi) {
            return Err(Error::validation("v", format!("initial value outside bounds [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Half-width of the multiplicative start perturbation.
    pub perturbation: f64,
    pub nelder_mead: NelderMeadOptions,
    /// Fresh simplices built at the best point after the first search.
    pub max_restarts: usize,
    /// Estimate the measurement noise `v` together with the model parameters.
    pub fit_v: bool,
    /// Parameters held at their `theta0` values.
    ///
    /// Scaling every capacity by `s`, every resistance by `1/s` and the gain by
    /// `s` leaves the likelihood unchanged, so an absolute value of the gain
    /// needs one parameter (typically a capacity) pinned here.
    pub fixed: Vec<Param>,
    pub filter: FilterOptions,
    pub parallel: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 8,
            seed: 0,
            perturbation: 0.3,
            nelder_mead: NelderMeadOptions::default(),
            max_restarts: 2,
            fit_v: true,
            fixed: vec![],
            filter: FilterOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StartDiagnostics {
    pub index: usize,
    pub initial_loglik: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: ThermalParameters,
    pub loglik: f64,
    pub residuals: Vec<f64>,
    pub residual_variances: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub multistart_index: usize,
    pub starts: Vec<StartDiagnostics>,
}

impl FitResult {
    pub fn to_json(&self) -> Value {
        let params: serde_json::Map<String, Value> = self
            .params
            .iter()
            .map(|(p, x)| (p.name(), json!(x)))
            .chain([("v".to_string(), json!(self.params.v()))])
            .collect();
        let n = self.residuals.len() as f64;
        let mean = self.residuals.iter().sum::<f64>() / n;
        let sd = (self.residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        json!({
            "kind": self.params.kind().to_string(),
            "parameters": params,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "multistart_index": self.multistart_index,
            "starts": self.starts.iter().map(|s| json!({
                "index": s.index,
                "initial_loglik": s.initial_loglik,
                "loglik": s.loglik,
                "iterations": s.iterations,
                "evaluations": s.evaluations,
                "converged": s.converged,
                "failure": s.failure,
            })).collect::<Vec<_>>(),
            "residuals": {"n": self.residuals.len(), "mean": mean, "std": sd},
        })
    }
}

/// Inclusive box test that absorbs `exp(ln x)` round-off at the edges.
fn within(x: f64, lo: f64, hi: f64) -> bool {
    let slack = 1e-12 * lo.abs().max(hi.abs()).max(1e-300);
    lo - slack <= x && x <= hi + slack
}

/// Maps the free parameters to the unconstrained search space and back.
struct Transform<'a> {
    theta0: &'a ThermalParameters,
    bounds: &'a Bounds,
    free: Vec<usize>,
    fit_v: bool,
}

impl Transform<'_> {
    fn forward(&self, theta: &ThermalParameters) -> Vec<f64> {
        let params = theta.kind().parameters();
        let mut z: Vec<f64> = self
            .free
            .iter()
            .map(|&i| {
                let x = theta.values()[i];
                if params[i].is_positive() {
                    x.ln()
                } else {
                    x
                }
            })
            .collect();
        if self.fit_v {
            z.push(theta.v().ln());
        }
        z
    }

    /// Coordinates of `z` as `(lower, upper)` in the search space.
    fn box_of(&self, j: usize) -> (f64, f64) {
        if j == self.free.len() {
            return (self.bounds.v.0.ln(), self.bounds.v.1.ln());
        }
        let i = self.free[j];
        let (lo, hi) = (self.bounds.lower[i], self.bounds.upper[i]);
        if self.theta0.kind().parameters()[i].is_positive() {
            (lo.ln(), hi.ln())
        } else {
            (lo, hi)
        }
    }

    /// `None` outside the bounds or the model's domain.
    fn inverse(&self, z: &[f64]) -> Option<ThermalParameters> {
        let params = self.theta0.kind().parameters();
        let mut values = self.theta0.values().to_vec();
        for (&i, &zi) in self.free.iter().zip(z) {
            let x = if params[i].is_positive() { zi.exp() } else { zi };
            if !within(x, self.bounds.lower[i], self.bounds.upper[i]) {
                return None;
            }
            values[i] = x;
        }
        let v = if self.fit_v {
            let v = z[self.free.len()].exp();
            if !within(v, self.bounds.v.0, self.bounds.v.1) {
                return None;
            }
            v
        } else {
            self.theta0.v()
        };
        self.theta0.with_values(values, v).ok()
    }
}

/// Maximum-likelihood fit by multi-start Nelder–Mead on transformed parameters.
///
/// Start 0 is `theta0`; start `i > 0` perturbs every transformed coordinate by
/// a uniform draw from `[ln(1 − p), ln(1 + p)]` using an RNG stream derived
/// from `(seed, i)`. The best start wins, ties going to the lowest index.
pub fn mle_fit(
    data: &TimeSeries,
    theta0: &ThermalParameters,
    bounds: &Bounds,
    opts: &FitOptions,
) -> Result<FitResult> {
    data.validate()?;
    theta0.validate()?;
    bounds.validate(theta0)?;
    if opts.n_starts < 1 {
        return Err(Error::validation("n_starts", "must be >= 1"));
    }
    if !(opts.perturbation > 0.0 && opts.perturbation < 1.0) {
        return Err(Error::validation("perturbation", "must lie in (0, 1)"));
    }
    let params = theta0.kind().parameters();
    for p in &opts.fixed {
        if !params.contains(p) {
            return Err(Error::validation(p.name(), format!("not a parameter of model {}", theta0.kind())));
        }
    }
    let tf = Transform {
        theta0,
        bounds,
        free: (0..params.len()).filter(|&i| !opts.fixed.contains(&params[i])).collect(),
        fit_v: opts.fit_v,
    };
    let z0 = tf.forward(theta0);

    let run_start = |index: usize| -> (StartDiagnostics, Vec<f64>) {
        let mut z = z0.clone();
        if index > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(index as u64);
            let (lo, hi) = ((1.0 - opts.perturbation).ln(), (1.0 + opts.perturbation).ln());
            for (j, zj) in z.iter_mut().enumerate() {
                let (blo, bhi) = tf.box_of(j);
                *zj = (*zj + rng.random_range(lo..hi)).clamp(blo, bhi);
            }
        }
        let objective = |z: &[f64]| match tf.inverse(z) {
            Some(theta) => -loglik_value(&theta, data, &opts.filter),
            None => f64::INFINITY,
        };
        let initial = objective(&z);
        let mut best = nelder_mead(objective, &z, &opts.nelder_mead);
        let (mut iterations, mut evaluations) = (best.iterations, best.evaluations);
        for _ in 0..opts.max_restarts {
            let again = nelder_mead(objective, &best.x, &opts.nelder_mead);
            iterations += again.iterations;
            evaluations += again.evaluations;
            let gain = best.f - again.f;
            if again.f <= best.f {
                best = again;
            }
            if !(gain > 1e-6) {
                break;
            }
        }
        let failed = !(best.f < -LOGLIK_FAILURE * 0.5);
        let diag = StartDiagnostics {
            index,
            initial_loglik: -initial,
            loglik: -best.f,
            iterations,
            evaluations,
            converged: best.converged,
            failure: failed.then(|| "no finite likelihood found".to_string()),
        };
        (diag, best.x)
    };

    let outcomes: Vec<(StartDiagnostics, Vec<f64>)> = if opts.parallel {
        (0..opts.n_starts).into_par_iter().map(run_start).collect()
    } else {
        (0..opts.n_starts).map(run_start).collect()
    };

    let winner = outcomes
        .iter()
        .filter(|(d, _)| d.failure.is_none())
        .max_by(|a, b| a.0.loglik.total_cmp(&b.0.loglik).then(b.0.index.cmp(&a.0.index)));
    let Some((diag, z)) = winner else {
        let detail: Vec<String> = outcomes
            .iter()
            .map(|(d, _)| format!("start {}: {}", d.index, d.failure.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Estimation(format!("every start failed ({})", detail.join("; "))));
    };
    let params = tf
        .inverse(z)
        .ok_or_else(|| Error::Estimation("optimum left the feasible region".into()))?;
    let inn = innovations_loglik_with(&params, data, &opts.filter)?;
    if let Some(reason) = inn.failure {
        return Err(Error::Estimation(format!("filter failed at the optimum: {reason}")));
    }
    Ok(FitResult {
        params,
        loglik: inn.loglik,
        residuals: inn.residuals,
        residual_variances: inn.variances,
        converged: diag.converged,
        iterations: diag.iterations,
        multistart_index: diag.index,
        starts: outcomes.into_iter().map(|(d, _)| d).collect(),
    })
}
