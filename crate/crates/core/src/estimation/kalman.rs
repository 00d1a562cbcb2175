use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::estimation::TimeSeries;
use crate::thermal_models::{
    carnot_cop, carnot_cop_dcold, discretize_params, DiscreteStateSpace, InputLaw, ModelKind,
    ThermalParameters,
};

/// Smallest innovation variance accepted before a step is declared degenerate.
pub const MIN_INNOVATION_VARIANCE: f64 = 1e-12;

/// Filtered state estimate and covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanBelief {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KalmanBelief {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        let b = KalmanBelief { x, p };
        b.check()?;
        Ok(b)
    }

    /// Every state at the first measurement with covariance `variance · I`.
    pub fn from_measurement(y0: f64, n: usize, variance: f64) -> Self {
        KalmanBelief {
            x: DVector::from_element(n, y0),
            p: DMatrix::from_diagonal_element(n, n, variance),
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.x.len();
        if self.p.shape() != (n, n) {
            return Err(Error::validation("P", format!("covariance must be {n}x{n}")));
        }
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-9 * self.p.amax().max(1.0) {
            return Err(Error::validation("P", format!("covariance not symmetric ({asym:e})")));
        }
        let min_eig = self.p.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::validation("P", format!("covariance not PSD (eigenvalue {min_eig:e})")));
        }
        Ok(())
    }
}

/// Outcome of one predict/update cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanStep {
    pub belief: KalmanBelief,
    /// Innovation `y − C x̂⁻`, °C.
    pub innovation: f64,
    /// Innovation variance, °C².
    pub variance: f64,
}

/// One Kalman step with inputs `u = [T_r, P]` and measurement `y`.
///
/// A Carnot-law model is linearized at the current estimate, which makes this
/// the extended filter.
pub fn kf_step(belief: &KalmanBelief, dss: &DiscreteStateSpace, u: [f64; 2], y: f64) -> Result<KalmanStep> {
    let [t_r, p] = u;
    let x_prior = dss.step_mean(&belief.x, t_r, p)?;
    let f = dss.step_jacobian(&belief.x, t_r, p)?;
    let p_prior = &f * &belief.p * f.transpose() + &dss.w * dss.w.transpose();
    let c = &dss.c;
    let pc = &p_prior * c.transpose();
    let r = (c * &pc)[0] + dss.v * dss.v;
    if !(r >= MIN_INNOVATION_VARIANCE) || !r.is_finite() {
        return Err(Error::Numerical(format!("innovation variance {r:e} is degenerate")));
    }
    let k = &pc / r;
    let innovation = y - (c * &x_prior)[0];
    let x = x_prior + &k * innovation;
    let p_post = &p_prior - &k * k.transpose() * r;
    let p_post = (&p_post + p_post.transpose()) * 0.5;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("state estimate diverged".into()));
    }
    Ok(KalmanStep {
        belief: KalmanBelief { x, p: p_post },
        innovation,
        variance: r,
    })
}

/// Extended Kalman step of Model E at sample period `d`.
pub fn ekf_step(
    belief: &KalmanBelief,
    params: &ThermalParameters,
    u: [f64; 2],
    y: f64,
    d: f64,
) -> Result<KalmanStep> {
    if params.kind() != ModelKind::E {
        return Err(Error::validation("kind", "the extended filter runs Model E"));
    }
    kf_step(belief, &discretize_params(params, d)?, u, y)
}

/// Filter settings shared by likelihood evaluation and prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterOptions {
    /// Diagonal of the initial covariance, °C².
    pub initial_variance: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions { initial_variance: 1.0 }
    }
}

/// What a filter pass records beyond the log-likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Record {
    Nothing,
    Innovations,
    Everything,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct FilterTrace {
    pub loglik: f64,
    pub innovations: Vec<f64>,
    pub variances: Vec<f64>,
    /// Filtered states `x̂_{k|k}` for `k = 0..=N`.
    pub states: Vec<DVector<f64>>,
}

/// Runs the filter over `data`, dispatching to a fixed-size kernel.
pub(crate) fn run_filter(
    dss: &DiscreteStateSpace,
    data: &TimeSeries,
    opts: &FilterOptions,
    record: Record,
) -> std::result::Result<FilterTrace, String> {
    match dss.state_dim() {
        1 => filter_fixed::<1>(dss, data, opts, record),
        2 => filter_fixed::<2>(dss, data, opts, record),
        3 => filter_fixed::<3>(dss, data, opts, record),
        4 => filter_fixed::<4>(dss, data, opts, record),
        n => Err(format!("unsupported state dimension {n}")),
    }
}

fn filter_fixed<const N: usize>(
    dss: &DiscreteStateSpace,
    data: &TimeSeries,
    opts: &FilterOptions,
    record: Record,
) -> std::result::Result<FilterTrace, String> {
    let a = SMatrix::<f64, N, N>::from_fn(|i, j| dss.a_d[(i, j)]);
    let b_room = SVector::<f64, N>::from_fn(|i, _| dss.b_d[(i, 0)]);
    let b_pow = SVector::<f64, N>::from_fn(|i, _| dss.b_d[(i, 1)]);
    let c = SVector::<f64, N>::from_fn(|i, _| dss.c[i]);
    let w = SMatrix::<f64, N, N>::from_fn(|i, j| dss.w[(i, j)]);
    let q = w * w.transpose();
    let v2 = dss.v * dss.v;
    let heat = match dss.input_law {
        InputLaw::Linear => None,
        InputLaw::Carnot { heat_state } => Some(heat_state),
    };
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    let steps = data.steps();
    let mut trace = FilterTrace::default();
    if record != Record::Nothing {
        trace.innovations.reserve(steps);
        trace.variances.reserve(steps);
    }
    let mut x = SVector::<f64, N>::from_element(data.y[0]);
    let mut p = SMatrix::<f64, N, N>::identity() * opts.initial_variance;
    if record == Record::Everything {
        trace.states.push(DVector::from_column_slice(x.as_slice()));
    }
    let mut loglik = 0.0;
    for k in 1..=steps {
        let (t_r, pw) = (data.t_r[k - 1], data.p[k - 1]);
        let (x_prior, f) = match heat {
            Some(h) if pw != 0.0 => {
                let cop = carnot_cop(t_r, x[h]).map_err(|e| format!("step {k}: {e}"))?;
                let slope = pw * carnot_cop_dcold(t_r, x[h]).map_err(|e| format!("step {k}: {e}"))?;
                let mut f = a;
                for i in 0..N {
                    f[(i, h)] += b_pow[i] * slope;
                }
                (a * x + b_room * t_r + b_pow * (pw * cop), f)
            }
            _ => (a * x + b_room * t_r + b_pow * pw, a),
        };
        let p_prior = f * p * f.transpose() + q;
        let pc = p_prior * c;
        let r = c.dot(&pc) + v2;
        if !(r >= MIN_INNOVATION_VARIANCE) || !r.is_finite() {
            return Err(format!("step {k}: innovation variance {r:e} is degenerate"));
        }
        let gain = pc / r;
        let e = data.y[k] - c.dot(&x_prior);
        x = x_prior + gain * e;
        let p_post = p_prior - gain * gain.transpose() * r;
        p = (p_post + p_post.transpose()) * 0.5;
        loglik -= 0.5 * (e * e / r + r.ln() + ln_2pi);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(format!("step {k}: state estimate diverged"));
        }
        if record != Record::Nothing {
            trace.innovations.push(e);
            trace.variances.push(r);
        }
        if record == Record::Everything {
            trace.states.push(DVector::from_column_slice(x.as_slice()));
        }
    }
    if !loglik.is_finite() {
        return Err("log-likelihood is not finite".into());
    }
    trace.loglik = loglik;
    Ok(trace)
}
