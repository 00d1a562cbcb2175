//! Dense two-phase primal simplex for small bounded linear programs
//!
//! ```text
//! minimize cᵀx  subject to  A x ≤ b,  0 ≤ x ≤ u
//! ```
//!
//! Upper bounds are handled implicitly (nonbasic variables sit at either
//! bound). Returns the optimal point, the row duals and the iteration count.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Lp {
    pub c: Vec<f64>,
    /// Row-major `m × n` constraint matrix.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Upper bounds; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y ≤ 0` with `c − Aᵀy` the reduced costs.
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub status: LpStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Feasibility tolerance on primal values.
    pub tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iter: 50_000, tol: 1e-9 }
    }
}

impl Lp {
    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows(), self.cols());
        if self.a.len() != m * n || self.upper.len() != n {
            return Err(Error::validation("lp", "inconsistent dimensions"));
        }
        if self.c.iter().chain(&self.a).chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::validation("lp", "coefficients must be finite"));
        }
        if self.upper.iter().any(|&u| !(u >= 0.0)) {
            return Err(Error::validation("lp", "upper bounds must be >= 0"));
        }
        Ok(())
    }

    /// Largest violation of the primal constraints at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let n = self.cols();
        let mut worst = 0.0f64;
        for i in 0..self.rows() {
            let ax: f64 = (0..n).map(|j| self.a[i * n + j] * x[j]).sum();
            worst = worst.max(ax - self.b[i]);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(-xj).max(xj - self.upper[j]);
        }
        worst
    }

    /// Largest complementary-slackness or dual-sign violation of `(x, y)`,
    /// relative to the cost scale.
    pub fn certificate_residual(&self, x: &[f64], y: &[f64]) -> f64 {
        let (m, n) = (self.rows(), self.cols());
        let scale = self.c.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..m {
            let ax: f64 = (0..n).map(|j| self.a[i * n + j] * x[j]).sum();
            worst = worst.max(y[i].max(0.0) / scale);
            worst = worst.max((y[i] * (self.b[i] - ax)).abs() / scale);
        }
        for j in 0..n {
            let r = self.c[j] - (0..m).map(|i| self.a[i * n + j] * y[i]).sum::<f64>();
            let at_lower = x[j].abs() <= 1e-9;
            let at_upper = (x[j] - self.upper[j]).abs() <= 1e-9;
            let v = if at_lower && at_upper {
                0.0
            } else if at_lower {
                (-r).max(0.0)
            } else if at_upper {
                r.max(0.0)
            } else {
                r.abs()
            };
            worst = worst.max(v / scale);
        }
        worst
    }
}

struct Tableau {
    m: usize,
    ncol: usize,
    /// `B⁻¹ A`, row-major.
    t: Vec<f64>,
    /// Current values of the basic variables.
    rhs: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    tol: f64,
}

impl Tableau {
    /// Basis change only; basic values are maintained by the caller.
    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let inv = 1.0 / self.t[r * ncol + q];
        for v in &mut self.t[r * ncol..(r + 1) * ncol] {
            *v *= inv;
        }
        let (before, rest) = self.t.split_at_mut(r * ncol);
        let (prow, after) = rest.split_at_mut(ncol);
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (x, &pv) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * pv;
                }
                row[q] = 0.0;
            }
        };
        before.chunks_mut(ncol).for_each(eliminate);
        after.chunks_mut(ncol).for_each(eliminate);
        eliminate(&mut self.d);
        self.basis[r] = q;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    /// Runs simplex iterations on the current costs. Returns `false` on the
    /// iteration limit.
    fn optimize(&mut self, allowed: &[bool], iterations: &mut usize, max_iter: usize) -> Result<bool> {
        let dtol = 1e-9 * self.d.iter().fold(1.0f64, |s, v| s.max(v.abs())).min(1e6);
        let mut degenerate_run = 0usize;
        let mut is_basic = vec![false; self.ncol];
        for &j in &self.basis {
            is_basic[j] = true;
        }
        loop {
            if *iterations >= max_iter {
                return Ok(false);
            }
            // Bland's rule once progress stalls, to rule out cycling.
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..self.ncol {
                if !allowed[j] || is_basic[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let score = if self.at_upper[j] { self.d[j] } else { -self.d[j] };
                if score > dtol {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if score > best {
                        best = score;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else {
                return Ok(true);
            };
            *iterations += 1;

            // Moving x_q by t along `dir` changes basic i by −t·dir·T[i][q].
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let mut step = self.upper[q];
            let mut leave: Option<(usize, bool, f64)> = None;
            for i in 0..self.m {
                let a = dir * self.t[i * self.ncol + q];
                let bi = self.basis[i];
                let (limit, to_upper) = if a > self.tol {
                    (self.rhs[i].max(0.0) / a, false)
                } else if a < -self.tol && self.upper[bi].is_finite() {
                    ((self.upper[bi] - self.rhs[i]).max(0.0) / -a, true)
                } else {
                    continue;
                };
                let take = match leave {
                    _ if limit < step - 1e-12 => true,
                    None => limit <= step,
                    Some((r, _, mag)) if limit <= step + 1e-12 => {
                        if bland {
                            bi < self.basis[r]
                        } else {
                            a.abs() > mag
                        }
                    }
                    _ => false,
                };
                if take {
                    step = step.min(limit);
                    leave = Some((i, to_upper, a.abs()));
                }
            }
            if !step.is_finite() {
                return Err(Error::Solver("unbounded linear program".into()));
            }
            degenerate_run = if step <= 1e-12 { degenerate_run + 1 } else { 0 };
            for i in 0..self.m {
                let a = self.t[i * self.ncol + q];
                if a != 0.0 {
                    self.rhs[i] -= step * dir * a;
                }
            }
            match leave {
                None => self.at_upper[q] = !self.at_upper[q],
                Some((r, to_upper, _)) => {
                    let out = self.basis[r];
                    let value = if self.at_upper[q] { self.upper[q] - step } else { step };
                    self.at_upper[out] = to_upper;
                    self.at_upper[q] = false;
                    is_basic[out] = false;
                    is_basic[q] = true;
                    self.pivot(r, q);
                    self.rhs[r] = value;
                }
            }
        }
    }
}

/// Solves `lp` by the two-phase bounded simplex method.
pub fn solve(lp: &Lp, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let (m, n) = (lp.rows(), lp.cols());
    // Columns: x (n), row slacks (m), artificials (one per negative rhs).
    let negative: Vec<usize> = (0..m).filter(|&i| lp.b[i] < 0.0).collect();
    let ncol = n + m + negative.len();
    let mut t = vec![0.0; m * ncol];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let s = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * ncol + j] = s * lp.a[i * n + j];
        }
        t[i * ncol + n + i] = s;
        rhs[i] = s * lp.b[i];
        if s < 0.0 {
            t[i * ncol + n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut upper = lp.upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, m + negative.len()));
    let mut tab = Tableau {
        m,
        ncol,
        t,
        rhs,
        basis,
        upper,
        at_upper: vec![false; ncol],
        d: vec![0.0; ncol],
        tol: opts.tol,
    };
    let mut iterations = 0;

    if !negative.is_empty() {
        let mut cost = vec![0.0; ncol];
        for c in &mut cost[n + m..] {
            *c = 1.0;
        }
        tab.set_costs(&cost);
        let all = vec![true; ncol];
        if !tab.optimize(&all, &mut iterations, opts.max_iter)? {
            return Err(Error::Solver(format!("phase 1 hit the iteration limit ({iterations})")));
        }
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + m)
            .map(|i| tab.rhs[i])
            .sum();
        let scale = lp.b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if infeasibility > 1e-7 * scale {
            return Err(Error::Solver(format!("infeasible linear program (phase 1 residual {infeasibility:e})")));
        }
        // Artificials are pinned at zero from here on.
        for j in n + m..ncol {
            tab.upper[j] = 0.0;
        }
    }

    let mut cost = vec![0.0; ncol];
    cost[..n].copy_from_slice(&lp.c);
    tab.set_costs(&cost);
    let allowed: Vec<bool> = (0..ncol).map(|j| j < n + m).collect();
    let optimal = tab.optimize(&allowed, &mut iterations, opts.max_iter)?;

    let mut full = vec![0.0; ncol];
    for j in 0..ncol {
        if tab.at_upper[j] {
            full[j] = tab.upper[j];
        }
    }
    for i in 0..m {
        full[tab.basis[i]] = tab.rhs[i];
    }
    let x: Vec<f64> = full[..n].iter().zip(&lp.upper).map(|(&v, &u)| v.clamp(0.0, u)).collect();
    let duals: Vec<f64> = (0..m).map(|i| -tab.d[n + i]).collect();
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let status = if optimal { LpStatus::Optimal } else { LpStatus::IterationLimit };
    Ok(LpSolution {
        x,
        objective,
        duals,
        iterations,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64], upper: &[f64]) -> Lp {
        Lp {
            c: c.to_vec(),
            a: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            b: b.to_vec(),
            upper: upper.to_vec(),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18.
        let p = lp(&[-3.0, -5.0], &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]], &[4.0, 12.0, 18.0], &[f64::INFINITY; 2]);
        let s = solve(&p, &SimplexOptions::default()).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!(p.certificate_residual(&s.x, &s.duals) < 1e-9);
    }

    #[test]
    fn upper_bounds_and_negative_rhs() {
        // min x + 2y s.t. x + y >= 1.5, x <= 1, y <= 1.
        let p = lp(&[1.0, 2.0], &[&[-1.0, -1.0]], &[-1.5], &[1.0, 1.0]);
        let s = solve(&p, &SimplexOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 0.5).abs() < 1e-9, "{:?}", s.x);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!(p.certificate_residual(&s.x, &s.duals) < 1e-9);
        assert!((s.duals[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0], &[&[-1.0]], &[-2.0], &[1.0]);
        assert!(matches!(solve(&p, &SimplexOptions::default()), Err(Error::Solver(_))));
        let p = lp(&[-1.0], &[&[-1.0]], &[0.0], &[f64::INFINITY]);
        assert!(matches!(solve(&p, &SimplexOptions::default()), Err(Error::Solver(_))));
    }

    /// Random feasible LPs: the optimum beats every sampled feasible point and
    /// carries a valid certificate.
    #[test]
    fn random_problems_against_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let (m, n) = (rng.random_range(1..8), rng.random_range(1..8));
            let a: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Build b around a known feasible point.
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..m)
                .map(|i| (0..n).map(|j| a[i * n + j] * x0[j]).sum::<f64>() + rng.random_range(0.0..0.5))
                .collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = Lp { c, a, b, upper: vec![1.0; n] };
            let s = solve(&p, &SimplexOptions::default()).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!(p.primal_residual(&s.x) < 1e-8);
            assert!(p.certificate_residual(&s.x, &s.duals) < 1e-8, "{}", p.certificate_residual(&s.x, &s.duals));
            for _ in 0..300 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                if p.primal_residual(&x) <= 0.0 {
                    let f: f64 = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
                    assert!(s.objective <= f + 1e-9);
                }
            }
        }
    }
}
