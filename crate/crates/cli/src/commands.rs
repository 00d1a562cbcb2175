use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use freezer_core::estimation::{
    default_df, deviance_test_at, horizon_for, innovations_loglik, k_step_residuals, mle_fit, residual_acf,
    whiteness_threshold, Bounds, FilterOptions, FitOptions, TimeSeries,
};
use freezer_core::io;
use freezer_core::mpc::{mean_power, metrics, paper_price_step, receding_horizon_run, MpcConfig, RunOptions};
use freezer_core::plant_sim::{
    preprocess, preprocess_config_for, prbs_generate, simulate as run_plant, thermostat_run, InitialState, PlantConfig,
    PrbsConfig, DEFAULT_ROOM_TEMPERATURE,
};
use freezer_core::thermal_models::{fixtures, ModelKind, Param, ThermalParameters};
use serde_json::json;

use crate::settings::{substream, Settings};
use crate::{CliError, Common};

type CmdResult = Result<(), CliError>;

const DEFAULT_SEED: u64 = 1;

fn out_dir(common: &Common) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(freezer_core::Error::from)?;
    Ok(dir)
}

fn kind_of(common: &Common, settings: &Settings) -> Result<Option<ModelKind>, CliError> {
    settings
        .get_opt::<String>("kind", common.kind.clone())?
        .map(|s| s.parse::<ModelKind>().map_err(|e| CliError::usage(e.to_string())))
        .transpose()
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} file {} not found", path.display())))
    }
}

/// A parameter file, or a bare kind letter for the shipped fixture.
fn model_source(spec: &str, what: &str) -> Result<ThermalParameters, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(io::read_params(path)?);
    }
    match spec.parse::<ModelKind>() {
        Ok(kind) if !spec.contains(['/', '.']) => Ok(fixtures::table(kind)),
        _ => Err(CliError::usage(format!("{what} file {spec} not found"))),
    }
}

fn read_data(path: &Path) -> Result<TimeSeries, CliError> {
    require_file(path, "data")?;
    Ok(io::read_time_series_file(path)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(freezer_core::Error::from)?;
    fs::write(path, text + "\n").map_err(freezer_core::Error::from)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(freezer_core::Error::from)?))
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Plant parameter file, or a kind letter for the fixture (default: --kind, else C).
    #[arg(long)]
    pub plant: Option<String>,
    #[arg(long)]
    pub hours: Option<f64>,
    /// Sample period of data.csv, s.
    #[arg(long)]
    pub d: Option<f64>,
    /// PRBS cycle length, s (default 1200, or a tenth of shorter runs).
    #[arg(long)]
    pub base_period: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub room_temperature: Option<f64>,
    /// Uniform initial plant temperature, °C.
    #[arg(long, allow_hyphen_values = true)]
    pub initial_temperature: Option<f64>,
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let s = Settings::load(a.common.config.as_deref())?;
    let kind = kind_of(&a.common, &s)?.unwrap_or(ModelKind::C);
    let params = match s.get_opt("plant", a.plant)? {
        Some(spec) => model_source(&spec, "plant")?,
        None => fixtures::table(kind),
    };
    let seed = s.get("seed", a.common.seed, DEFAULT_SEED)?;
    let hours: f64 = s.get("hours", a.hours, 35.0)?;
    let d = s.get("d", a.d, 10.0)?;
    // Ten cycles at least; short runs shorten the default cycle.
    let base = s.get("base_period", a.base_period, (hours * 360.0).floor().clamp(1.0, 1200.0))?;
    let room = s.get("room_temperature", a.room_temperature, DEFAULT_ROOM_TEMPERATURE)?;
    let initial = s.get("initial_temperature", a.initial_temperature, -18.0)?;

    let plant = PlantConfig {
        initial: InitialState::Uniform(initial),
        ..PlantConfig::new(params, substream(seed, "plant"))
    };
    let mut switch = prbs_generate(&PrbsConfig::new(base, hours * 3600.0, substream(seed, "prbs")))?;
    // Log the closing instant too, so a run of T seconds has samples at 0..=T.
    if let Some(&last) = switch.on.last() {
        switch.on.push(last);
    }
    let raw = run_plant(&plant, &switch, &[room])?;
    let ts = preprocess(&raw, &preprocess_config_for(&plant, d))?;
    let dir = out_dir(&a.common)?;
    io::write_raw(create(&dir.join("raw.csv"))?, &raw)?;
    io::write_time_series(create(&dir.join("data.csv"))?, &ts)?;
    println!(
        "simulated {:.2} h of Model {}: {} raw rows, {} rows at d = {d} s, duty cycle {:.3}",
        hours,
        plant.params.kind(),
        raw.len(),
        ts.len(),
        switch.duty()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: PathBuf,
    /// Start parameters: a file, or a kind letter for the fixture (default: --kind, else C).
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub starts: Option<usize>,
    /// Comma-separated parameters held at their start values.
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
}

pub fn identify(a: IdentifyArgs) -> CmdResult {
    let s = Settings::load(a.common.config.as_deref())?;
    let data = read_data(&a.data)?;
    let kind = kind_of(&a.common, &s)?;
    let theta0 = match s.get_opt("start", a.start)? {
        Some(spec) => model_source(&spec, "start")?,
        None => fixtures::table(kind.unwrap_or(ModelKind::C)),
    };
    if let Some(k) = kind {
        if k != theta0.kind() {
            return Err(freezer_core::Error::Validation {
                name: "kind".into(),
                reason: format!("--kind {k} but the start parameters are Model {}", theta0.kind()),
            }
            .into());
        }
    }
    let fixed = a
        .fix
        .iter()
        .map(|p| p.trim().parse::<Param>().map_err(|e| CliError::usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = FitOptions {
        seed: s.get("seed", a.common.seed, DEFAULT_SEED)?,
        n_starts: s.get("starts", a.starts, 8)?,
        fixed,
        ..Default::default()
    };
    let longest = theta0.time_constants().iter().map(|(_, t)| *t).fold(0.0, f64::max);
    if let Some(w) = data.duration_warning(longest) {
        eprintln!("warning: {w}");
    }
    let fit = mle_fit(&data, &theta0, &Bounds::around(&theta0), &opts)?;
    let dir = out_dir(&a.common)?;
    write_json(&dir.join("fit.json"), &fit.to_json())?;
    io::write_params(&dir.join("fit.params"), &fit.params)?;

    println!("Model {}  log-likelihood {:.1}  converged {}", fit.params.kind(), fit.loglik, fit.converged);
    println!("{:<10} {:>14}  unit", "parameter", "estimate");
    for (p, x) in fit.params.iter() {
        println!("{:<10} {:>14.4e}  {}", p.name(), x, p.unit());
    }
    println!("{:<10} {:>14.4e}  °C", "v", fit.params.v());
    Ok(())
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Smaller model: a parameter file or a kind letter.
    #[arg(long)]
    pub small: String,
    /// Larger model: a parameter file or a kind letter.
    #[arg(long)]
    pub big: String,
    /// Data for the residuals and log-likelihoods.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use this log-likelihood for the smaller model instead of evaluating it.
    #[arg(long, allow_hyphen_values = true)]
    pub loglik_small: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub loglik_big: Option<f64>,
    /// Degrees of freedom (default: parameter-count difference).
    #[arg(long)]
    pub df: Option<u32>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub max_lag: Option<usize>,
}

pub fn validate(a: ValidateArgs) -> CmdResult {
    let s = Settings::load(a.common.config.as_deref())?;
    let small = model_source(&a.small, "small model")?;
    let big = model_source(&a.big, "big model")?;
    let data = a.data.as_deref().map(read_data).transpose()?;
    let max_lag = s.get("max_lag", a.max_lag, 193)?;
    let dir = out_dir(&a.common)?;

    let mut report = json!({"small": small.kind().to_string(), "big": big.kind().to_string()});
    let mut logliks = [a.loglik_small, a.loglik_big];
    if let Some(data) = &data {
        let mut table = Vec::new();
        for (i, (name, params)) in [("small", &small), ("big", &big)].into_iter().enumerate() {
            let inn = innovations_loglik(params, data)?;
            if inn.failed() {
                return Err(freezer_core::Error::Numerical(format!("filter failed for the {name} model")).into());
            }
            let acf = residual_acf(&inn.residuals, max_lag)?;
            let threshold = whiteness_threshold(inn.residuals.len());
            report[name] = json!({
                "kind": params.kind().to_string(),
                "loglik": inn.loglik,
                "acf_threshold": threshold,
                "acf_fraction_above": acf.fraction_above(threshold),
            });
            println!(
                "Model {}: log-likelihood {:.1}, {:.1}% of lags 1..{max_lag} outside ±{threshold:.4}",
                params.kind(),
                inn.loglik,
                100.0 * acf.fraction_above(threshold)
            );
            logliks[i] = logliks[i].or(Some(inn.loglik));
            table.push(acf);
        }
        let mut w = csv_writer(&dir.join("acf.csv"))?;
        w.write_record(["lag", "rho_small", "log10_abs_rho_small", "rho_big", "log10_abs_rho_big"])
            .map_err(freezer_core::Error::from)?;
        for lag in 1..=max_lag {
            w.write_record(
                [lag as f64, table[0].rho[lag], table[0].log10_abs[lag], table[1].rho[lag], table[1].log10_abs[lag]]
                    .map(|x| x.to_string()),
            )
            .map_err(freezer_core::Error::from)?;
        }
        w.flush().map_err(freezer_core::Error::from)?;
    }
    let [Some(ll_small), Some(ll_big)] = logliks else {
        return Err(CliError::usage("need --data, or both --loglik-small and --loglik-big"));
    };
    let df = match s.get_opt("df", a.df)? {
        Some(df) => df,
        None => default_df(small.kind(), big.kind())?,
    };
    let confidence = s.get("confidence", a.confidence, 0.95)?;
    let dev = deviance_test_at(ll_small, ll_big, df, confidence)?;
    report["deviance"] = json!({
        "loglik_small": ll_small,
        "loglik_big": ll_big,
        "D": dev.deviance,
        "df": dev.df,
        "p_value": dev.p_value,
        "confidence": confidence,
        "reject_null": dev.reject_null,
        "nesting_warning": dev.nesting_warning,
    });
    write_json(&dir.join("validation.json"), &report)?;
    if dev.nesting_warning {
        eprintln!("warning: the larger model fits worse than the smaller one (D < 0)");
    }
    println!(
        "D = {:.1}, df = {}, p = {:.4}: {} Model {} at {:.0}%",
        dev.deviance,
        dev.df,
        dev.p_value,
        if dev.reject_null { "reject" } else { "fail to reject" },
        small.kind(),
        100.0 * confidence
    );
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(freezer_core::Error::from)?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model: a parameter file or a kind letter.
    #[arg(long)]
    pub fit: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub horizon_min: Option<f64>,
}

pub fn predict(a: PredictArgs) -> CmdResult {
    let s = Settings::load(a.common.config.as_deref())?;
    let params = model_source(&a.fit, "fit")?;
    let data = read_data(&a.data)?;
    let minutes = s.get("horizon_min", a.horizon_min, 20.0)?;
    let h = horizon_for(minutes, data.d());
    let score = k_step_residuals(&params, &data, h, &FilterOptions::default())?;
    let dir = out_dir(&a.common)?;
    write_json(
        &dir.join("predict.json"),
        &json!({
            "kind": params.kind().to_string(),
            "horizon_min": minutes,
            "horizon_steps": h,
            "mean": score.mean,
            "std": score.std,
            "n": score.residuals.len(),
        }),
    )?;
    println!(
        "Model {}, {minutes} min ahead ({h} steps): mean {:.4} °C, std {:.4} °C",
        params.kind(),
        score.mean,
        score.std
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct MpcArgs {
    #[command(flatten)]
    pub common: Common,
    /// Controller model: a parameter file or a kind letter.
    #[arg(long)]
    pub fit: String,
    /// Plant parameters: a file or a kind letter (default C).
    #[arg(long)]
    pub plant: Option<String>,
    /// Price CSV (`t_s,price`).
    #[arg(long, required_unless_present = "paper_price", conflicts_with = "paper_price")]
    pub price: Option<PathBuf>,
    /// Built-in step from 10 to 50 at 11 760 s.
    #[arg(long)]
    pub paper_price: bool,
    #[arg(long)]
    pub hours: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub no_flip: bool,
    #[arg(long)]
    pub solve_delay: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub room_temperature: Option<f64>,
    /// Initial measured plant temperature, °C (default T_max − 0.5).
    #[arg(long, allow_hyphen_values = true)]
    pub initial_temperature: Option<f64>,
    /// Record wall-clock solve times in the trace.
    #[arg(long)]
    pub timing: bool,
}

pub fn mpc(a: MpcArgs) -> CmdResult {
    let s = Settings::load(a.common.config.as_deref())?;
    let model = model_source(&a.fit, "fit")?;
    let plant_params = match s.get_opt("plant", a.plant)? {
        Some(spec) => model_source(&spec, "plant")?,
        None => fixtures::table(ModelKind::C),
    };
    let prices = if a.paper_price {
        paper_price_step()
    } else {
        let path = a.price.expect("clap enforces one price source");
        require_file(&path, "price")?;
        io::read_prices(File::open(&path).map_err(freezer_core::Error::from)?)?
    };
    let base = MpcConfig::default();
    let cfg = MpcConfig {
        d: s.get("d", a.d, base.d)?,
        horizon: s.get("horizon", a.horizon, base.horizon)?,
        t_min: s.get("t_min", a.t_min, base.t_min)?,
        t_max: s.get("t_max", a.t_max, base.t_max)?,
        p_max: s.get("p_max", a.p_max, base.p_max)?,
        flip: !(a.no_flip || !s.get("flip", None, true)?),
        solve_delay: s.get("solve_delay", a.solve_delay, base.solve_delay)?,
        ..base
    };
    let seed = s.get("seed", a.common.seed, DEFAULT_SEED)?;
    let duration = s.get("hours", a.hours, 6.0)? * 3600.0;
    let opts = RunOptions {
        room_temperature: s.get("room_temperature", a.room_temperature, DEFAULT_ROOM_TEMPERATURE)?,
        record_timing: a.timing || s.get("timing", None, false)?,
        ..Default::default()
    };
    let initial = s.get("initial_temperature", a.initial_temperature, cfg.t_max - 0.5)?;
    let plant = PlantConfig {
        p_max: cfg.p_max,
        initial: InitialState::SteadyAt(initial),
        ..PlantConfig::new(plant_params, substream(seed, "plant"))
    };

    let trace = receding_horizon_run(&model, &plant, &prices, &cfg, duration, &opts)?;
    let dir = out_dir(&a.common)?;
    io::write_trace(create(&dir.join("trace.csv"))?, &trace)?;
    io::write_raw(create(&dir.join("raw.csv"))?, &trace.raw)?;
    io::write_prices(create(&dir.join("prices.csv"))?, &prices)?;
    if let Some(msg) = &trace.aborted {
        return Err(freezer_core::Error::Numerical(format!("run stopped early ({} periods kept): {msg}", trace.rows.len())).into());
    }
    let baseline = thermostat_run(&plant, (cfg.t_max - 1.0, cfg.t_max), duration, opts.room_temperature)?;
    let baseline_power = mean_power(&baseline, &plant)?;
    let m = metrics(&trace, baseline_power, &cfg)?;
    fs::write(dir.join("metrics.json"), io::metrics_json(&m)? + "\n").map_err(freezer_core::Error::from)?;
    println!(
        "Model {} controller over {:.1} h: m1 {:.1} Wh, m2 {:.4} °C, m3 {:.2} °C, round trip {:.2}, {} transitions",
        model.kind(),
        duration / 3600.0,
        m.m1_wh,
        m.m2,
        m.m3,
        m.round_trip,
        m.transitions
    );
    if m.m1_truncated {
        eprintln!("warning: the coast after the price step had not ended when the run did");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// MPC run directories holding trace.csv and metrics.json.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
}

pub fn report(a: ReportArgs) -> CmdResult {
    let dir = out_dir(&a.common)?;
    let mut runs = Vec::new();
    for run in &a.runs {
        let trace_path = run.join("trace.csv");
        let metrics_path = run.join("metrics.json");
        require_file(&trace_path, "trace")?;
        require_file(&metrics_path, "metrics")?;
        let rows = io::read_trace_rows(File::open(&trace_path).map_err(freezer_core::Error::from)?)?;
        let text = fs::read_to_string(&metrics_path).map_err(freezer_core::Error::from)?;
        let m: serde_json::Value = serde_json::from_str(&text).map_err(freezer_core::Error::from)?;
        let name = run
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("run{}", runs.len()));
        let mut w = csv_writer(&dir.join(format!("{name}_plot.csv")))?;
        w.write_record(["t_h", "price", "P_setpoint_W", "P_actuated_W", "T_meas_C", "T_pred_C"])
            .map_err(freezer_core::Error::from)?;
        for r in &rows {
            w.write_record([r.t / 3600.0, r.price, r.p_setpoint, r.p_actuated, r.t_meas, r.t_pred].map(|x| x.to_string()))
                .map_err(freezer_core::Error::from)?;
        }
        w.flush().map_err(freezer_core::Error::from)?;
        runs.push(json!({"name": name, "dir": run.display().to_string(), "periods": rows.len(), "metrics": m}));
    }
    println!("consolidated {} runs into {}", runs.len(), dir.display());
    write_json(&dir.join("report.json"), &json!({ "runs": runs }))
}
