use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper limit on the lumped Carnot efficiency.
pub const DEFAULT_ETA_CAP: f64 = 1.5;

/// Default measurement noise used when a parameter set does not state one.
pub const DEFAULT_MEASUREMENT_NOISE: f64 = 0.1;

/// The five freezer thermal-equivalent-circuit models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// First order: lumped interior mass.
    A,
    /// Second order: interior plus heat exchanger.
    B,
    /// Third order: heat exchanger, air and envelope.
    C,
    /// Fourth order: an extra RC branch towards the room.
    D,
    /// Third order with the reversed-Carnot heat extraction law.
    E,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::A,
        ModelKind::B,
        ModelKind::C,
        ModelKind::D,
        ModelKind::E,
    ];

    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::A => 1,
            ModelKind::B => 2,
            ModelKind::C | ModelKind::E => 3,
            ModelKind::D => 4,
        }
    }

    /// Estimated parameters in the order of the identification tables.
    /// Measurement noise is not part of this list.
    pub fn parameters(self) -> &'static [Param] {
        use Param::*;
        match self {
            ModelKind::A => &[Ca, Rw, Alpha(0), Cop],
            ModelKind::B => &[Ca, Ce, Re, Rw, Alpha(0), Alpha(1), Cop],
            ModelKind::C => &[Ca, Ce, Cw, Ra, Re, Rw, Alpha(0), Alpha(1), Alpha(2), Cop],
            ModelKind::D => &[
                Ca,
                Ce,
                Cw,
                Cf,
                Ra,
                Re,
                Rw,
                Rf,
                Eta,
                Alpha(0),
                Alpha(1),
                Alpha(2),
            ],
            ModelKind::E => &[Ca, Ce, Cw, Ra, Re, Rw, Eta, Alpha(0), Alpha(1), Alpha(2)],
        }
    }

    pub fn parameter_count(self) -> usize {
        self.parameters().len()
    }

    /// Index of the measured state (the freezer air temperature).
    pub fn output_state(self) -> usize {
        match self {
            ModelKind::A | ModelKind::B => 0,
            ModelKind::C | ModelKind::D | ModelKind::E => 1,
        }
    }

    /// Index of the state the extracted heat is drawn from.
    pub fn heat_state(self) -> usize {
        match self {
            ModelKind::A => 0,
            ModelKind::B => 1,
            ModelKind::C | ModelKind::D | ModelKind::E => 0,
        }
    }

    /// Names of the state variables, in state-vector order.
    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::A => &["V_a"],
            ModelKind::B => &["V_a", "V_e"],
            ModelKind::C | ModelKind::E => &["V_e", "V_a", "V_w"],
            ModelKind::D => &["V_e", "V_a", "V_w", "V_f"],
        }
    }

    pub fn is_linear(self) -> bool {
        self != ModelKind::E
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::A => "A",
            ModelKind::B => "B",
            ModelKind::C => "C",
            ModelKind::D => "D",
            ModelKind::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ModelKind::A),
            "B" => Ok(ModelKind::B),
            "C" => Ok(ModelKind::C),
            "D" => Ok(ModelKind::D),
            "E" => Ok(ModelKind::E),
            other => Err(Error::validation("kind", format!("unknown model kind `{other}`"))),
        }
    }
}

/// A named physical or noise parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Ca,
    Ce,
    Cw,
    Cf,
    Ra,
    Re,
    Rw,
    Rf,
    Cop,
    Eta,
    /// Log-scale of the process-noise diffusion on state `i`.
    Alpha(usize),
}

impl Param {
    pub fn name(self) -> String {
        match self {
            Param::Ca => "C_a".into(),
            Param::Ce => "C_e".into(),
            Param::Cw => "C_w".into(),
            Param::Cf => "C_f".into(),
            Param::Ra => "R_a".into(),
            Param::Re => "R_e".into(),
            Param::Rw => "R_w".into(),
            Param::Rf => "R_f".into(),
            Param::Cop => "COP".into(),
            Param::Eta => "eta".into(),
            Param::Alpha(i) => format!("alpha_{i}"),
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Param::Ca | Param::Ce | Param::Cw | Param::Cf => "J/K",
            Param::Ra | Param::Re | Param::Rw | Param::Rf => "K/W",
            Param::Cop | Param::Eta | Param::Alpha(_) => "-",
        }
    }

    /// Strictly positive parameters are optimized on a log scale.
    pub fn is_positive(self) -> bool {
        !matches!(self, Param::Alpha(_))
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = match s.trim() {
            "C_a" => Param::Ca,
            "C_e" => Param::Ce,
            "C_w" => Param::Cw,
            "C_f" => Param::Cf,
            "R_a" => Param::Ra,
            "R_e" => Param::Re,
            "R_w" => Param::Rw,
            "R_f" => Param::Rf,
            "COP" => Param::Cop,
            "eta" => Param::Eta,
            "alpha" => Param::Alpha(0),
            other => match other.strip_prefix("alpha_") {
                Some(idx) => Param::Alpha(idx.parse().map_err(|_| {
                    Error::Parse(format!("bad process-noise index in `{other}`"))
                })?),
                None => return Err(Error::Parse(format!("unknown parameter `{other}`"))),
            },
        };
        Ok(p)
    }
}

/// Values of one model's parameters, aligned with [`ModelKind::parameters`],
/// together with the measurement noise scale `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalParameters {
    kind: ModelKind,
    values: Vec<f64>,
    v: f64,
    eta_cap: f64,
}

impl ThermalParameters {
    /// Builds and validates a parameter set. Every parameter of `kind` must be
    /// given exactly once.
    pub fn new(kind: ModelKind, entries: &[(Param, f64)], v: f64) -> Result<Self> {
        Self::assemble(kind, entries, v, DEFAULT_ETA_CAP)
    }

    fn assemble(kind: ModelKind, entries: &[(Param, f64)], v: f64, eta_cap: f64) -> Result<Self> {
        let names = kind.parameters();
        let mut values = vec![f64::NAN; names.len()];
        for &(p, x) in entries {
            let idx = names.iter().position(|&q| q == p).ok_or_else(|| {
                Error::validation(p.name(), format!("not a parameter of model {kind}"))
            })?;
            if !values[idx].is_nan() {
                return Err(Error::validation(p.name(), "given more than once"));
            }
            values[idx] = x;
        }
        let out = Self {
            kind,
            values,
            v,
            eta_cap,
        };
        out.validate()?;
        Ok(out)
    }

    /// Builds a parameter set from values in canonical order.
    pub fn from_values(kind: ModelKind, values: Vec<f64>, v: f64) -> Result<Self> {
        let out = Self {
            kind,
            values,
            v,
            eta_cap: DEFAULT_ETA_CAP,
        };
        out.validate()?;
        Ok(out)
    }

    /// Same kind and cap with new canonical-order values.
    pub fn with_values(&self, values: Vec<f64>, v: f64) -> Result<Self> {
        let out = Self {
            kind: self.kind,
            values,
            v,
            eta_cap: self.eta_cap,
        };
        out.validate()?;
        Ok(out)
    }

    /// Replaces the cap applied to `eta` and re-validates.
    pub fn with_eta_cap(mut self, cap: f64) -> Result<Self> {
        self.eta_cap = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.kind.parameters();
        if self.values.len() != names.len() {
            return Err(Error::validation(
                format!("model {} parameters", self.kind),
                format!("expected {} values, got {}", names.len(), self.values.len()),
            ));
        }
        for (&p, &x) in names.iter().zip(&self.values) {
            if x.is_nan() {
                return Err(Error::validation(p.name(), "missing"));
            }
            if !x.is_finite() {
                return Err(Error::validation(p.name(), "must be finite"));
            }
            if p.is_positive() && x <= 0.0 {
                return Err(Error::validation(p.name(), format!("must be > 0, got {x}")));
            }
            if p == Param::Eta && x > self.eta_cap {
                return Err(Error::validation(
                    p.name(),
                    format!("{x} exceeds the cap {}", self.eta_cap),
                ));
            }
        }
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(Error::validation("v", format!("must be > 0, got {}", self.v)));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn eta_cap(&self) -> f64 {
        self.eta_cap
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        self.kind
            .parameters()
            .iter()
            .position(|&q| q == p)
            .map(|i| self.values[i])
    }

    /// Value of a parameter known to belong to this kind.
    pub(crate) fn req(&self, p: Param) -> f64 {
        self.get(p)
            .unwrap_or_else(|| panic!("{p} is not a parameter of model {}", self.kind))
    }

    /// Returns a copy with one parameter replaced.
    pub fn with(&self, p: Param, x: f64) -> Result<Self> {
        let idx = self
            .kind
            .parameters()
            .iter()
            .position(|&q| q == p)
            .ok_or_else(|| Error::validation(p.name(), format!("not a parameter of model {}", self.kind)))?;
        let mut out = self.clone();
        out.values[idx] = x;
        out.validate()?;
        Ok(out)
    }

    pub fn with_v(&self, v: f64) -> Result<Self> {
        let mut out = self.clone();
        out.v = v;
        out.validate()?;
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        self.kind.parameters().iter().copied().zip(self.values.iter().copied())
    }

    /// The heat-pump gain: `COP` for kinds A–C, `eta` for D and E.
    pub fn gain(&self) -> f64 {
        self.get(Param::Cop)
            .or_else(|| self.get(Param::Eta))
            .expect("every kind has a gain parameter")
    }

    /// Diagonal of the continuous process-noise matrix, `w_i = exp(alpha_i)`.
    ///
    /// Model D lists three noise exponents for four states; the fourth state
    /// uses the mean of the listed exponents.
    pub fn process_noise(&self) -> Vec<f64> {
        let n = self.kind.state_dim();
        let alphas: Vec<f64> = self
            .iter()
            .filter_map(|(p, x)| matches!(p, Param::Alpha(_)).then_some(x))
            .collect();
        let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
        (0..n)
            .map(|i| alphas.get(i).copied().unwrap_or(mean).exp())
            .collect()
    }

    /// Time constants `C·R` of every capacity/resistance pair that share a
    /// node in the circuit, keyed by `"C_x*R_y"`.
    pub fn time_constants(&self) -> Vec<(String, f64)> {
        use Param::*;
        let pairs: &[(Param, Param)] = match self.kind {
            ModelKind::A => &[(Ca, Rw)],
            ModelKind::B => &[(Ca, Rw), (Ca, Re), (Ce, Re)],
            ModelKind::C | ModelKind::E => &[(Ce, Re), (Ca, Re), (Ca, Ra), (Cw, Ra), (Cw, Rw)],
            ModelKind::D => &[
                (Ce, Re),
                (Ca, Re),
                (Ca, Ra),
                (Cw, Ra),
                (Cw, Rw),
                (Cf, Rw),
                (Cf, Rf),
            ],
        };
        pairs
            .iter()
            .map(|&(c, r)| (format!("{c}*{r}"), self.req(c) * self.req(r)))
            .collect()
    }

    /// Parses the flat key-value fixture format:
    ///
    /// ```text
    /// kind = C
    /// C_a = 4.76e3
    /// ```
    ///
    /// Blank lines and `#` comments are ignored. `v` defaults to 0.1 °C.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut v = None;
        let mut eta_cap = None;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{value}` is not a number", lineno + 1)))
            };
            match key {
                "kind" => kind = Some(value.parse::<ModelKind>()?),
                "v" => v = Some(number()?),
                "eta_cap" => eta_cap = Some(number()?),
                _ => entries.push((key.parse::<Param>()?, number()?)),
            }
        }
        let kind = kind.ok_or_else(|| Error::Parse("missing `kind = ...` header".into()))?;
        Self::assemble(
            kind,
            &entries,
            v.unwrap_or(DEFAULT_MEASUREMENT_NOISE),
            eta_cap.unwrap_or(DEFAULT_ETA_CAP),
        )
    }

    /// Writes the key-value format read by [`ThermalParameters::from_kv_str`].
    pub fn to_kv_string(&self) -> String {
        let mut out = format!("kind = {}\n", self.kind);
        for (p, x) in self.iter() {
            out.push_str(&format!("{} = {:e}\n", p.name(), x));
        }
        out.push_str(&format!("v = {:e}\n", self.v));
        if self.eta_cap != DEFAULT_ETA_CAP {
            out.push_str(&format!("eta_cap = {:e}\n", self.eta_cap));
        }
        out
    }
}
