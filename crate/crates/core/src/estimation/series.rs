use crate::error::{Error, Result};

/// Uniformly sampled record of power, room temperature and freezer temperature.
///
/// Row `k` holds the measurement `T[k]` taken at `t[k]` and the inputs held
/// constant over `[t[k], t[k+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    /// Electrical power, W.
    pub p: Vec<f64>,
    /// Room temperature, °C.
    pub t_r: Vec<f64>,
    /// Measured freezer temperature, °C.
    pub y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, p: Vec<f64>, t_r: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let ts = TimeSeries { t, p, t_r, y };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 {
            return Err(Error::validation("time series", "needs at least two rows"));
        }
        for (name, col) in [("P", &self.p), ("T_r", &self.t_r), ("T", &self.y)] {
            if col.len() != n {
                return Err(Error::validation(
                    name,
                    format!("column has {} rows, time has {n}", col.len()),
                ));
            }
        }
        for (name, col) in [("t", &self.t), ("P", &self.p), ("T_r", &self.t_r), ("T", &self.y)] {
            if let Some(k) = col.iter().position(|x| !x.is_finite()) {
                return Err(Error::validation(name, format!("non-finite value at row {k}")));
            }
        }
        let d = self.t[1] - self.t[0];
        if !(d > 0.0) {
            return Err(Error::validation("t", "time must be strictly increasing"));
        }
        for k in 1..n {
            let dk = self.t[k] - self.t[k - 1];
            if (dk - d).abs() > 1e-9 * d.max(self.t[k].abs()) {
                return Err(Error::validation(
                    "t",
                    format!("non-uniform spacing at row {k}: {dk} s vs {d} s"),
                ));
            }
        }
        if let Some(k) = self.p.iter().position(|&x| x < 0.0) {
            return Err(Error::validation("P", format!("negative power at row {k}")));
        }
        Ok(())
    }

    /// Sample period, s.
    pub fn d(&self) -> f64 {
        (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
    }

    /// Number of rows, `N + 1`.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of filter steps `N`.
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if !(start < end && end <= self.len() && end - start >= 2) {
            return Err(Error::validation(
                "range",
                format!("[{start}, {end}) is not a valid sub-series of {} rows", self.len()),
            ));
        }
        Ok(TimeSeries {
            t: self.t[start..end].to_vec(),
            p: self.p[start..end].to_vec(),
            t_r: self.t_r[start..end].to_vec(),
            y: self.y[start..end].to_vec(),
        })
    }

    /// A warning when the record is shorter than twice `longest_time_constant`.
    pub fn duration_warning(&self, longest_time_constant: f64) -> Option<String> {
        let span = self.t[self.len() - 1] - self.t[0];
        (span < 2.0 * longest_time_constant).then(|| {
            format!(
                "record spans {span:.0} s, less than twice the longest time constant ({longest_time_constant:.0} s)"
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shape_and_spacing() {
        let ts = TimeSeries::new(vec![0.0, 10.0, 20.0], vec![0.0; 3], vec![20.0; 3], vec![-20.0; 3]).unwrap();
        assert_eq!(ts.d(), 10.0);
        assert_eq!(ts.steps(), 2);
        assert!(TimeSeries::new(vec![0.0, 10.0, 25.0], vec![0.0; 3], vec![20.0; 3], vec![-20.0; 3]).is_err());
        assert!(TimeSeries::new(vec![0.0, 10.0], vec![0.0; 3], vec![20.0; 2], vec![-20.0; 2]).is_err());
        assert!(TimeSeries::new(vec![0.0, 10.0], vec![0.0, f64::NAN], vec![20.0; 2], vec![-20.0; 2]).is_err());
        assert!(TimeSeries::new(vec![0.0], vec![0.0], vec![20.0], vec![-20.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, 0.0], vec![0.0; 2], vec![20.0; 2], vec![-20.0; 2]).is_err());
    }

    #[test]
    fn slicing_and_warning() {
        let n = 11;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 10.0).collect();
        let ts = TimeSeries::new(t, vec![0.0; n], vec![20.0; n], vec![-20.0; n]).unwrap();
        let s = ts.slice(2, 5).unwrap();
        assert_eq!(s.t, vec![20.0, 30.0, 40.0]);
        assert!(ts.slice(3, 4).is_err());
        assert!(ts.duration_warning(100.0).is_some());
        assert!(ts.duration_warning(10.0).is_none());
    }
}
