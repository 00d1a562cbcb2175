//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! line; pass criterion numbers as arguments to run a subset.
//!
//! The identification and closed-loop checks fit models to 35 h records and
//! take several minutes in total.

use std::sync::OnceLock;
use std::time::Instant;

use freezer_core::estimation::*;
use freezer_core::mpc::*;
use freezer_core::plant_sim::*;
use freezer_core::stats::{chi2_cdf, ks_test};
use freezer_core::thermal_models::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HOURS: f64 = 3600.0;
const PRBS_BASE: f64 = 1200.0;

fn report(id: u32, ok: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn prbs_record(truth: &ThermalParameters, hours: f64, plant_seed: u64, prbs_seed: u64) -> TimeSeries {
    let plant = PlantConfig::new(truth.clone(), plant_seed);
    prbs_dataset(&plant, &PrbsConfig::new(PRBS_BASE, hours * HOURS, prbs_seed), 10.0).unwrap()
}

/// Start point away from the truth: capacities up, resistances down, gain up.
fn displaced(truth: &ThermalParameters) -> ThermalParameters {
    let mut p = truth.clone();
    for (q, x) in truth.iter() {
        let f = match q {
            Param::Ca | Param::Ce | Param::Cw => 1.5,
            Param::Ra | Param::Re | Param::Rw => 0.7,
            Param::Cop => 1.3,
            _ => 1.0,
        };
        p = p.with(q, x * f).unwrap();
    }
    p
}

fn fit(data: &TimeSeries, theta0: &ThermalParameters, seed: u64, fixed: Vec<Param>) -> FitResult {
    let opts = FitOptions { seed, fixed, ..Default::default() };
    mle_fit(data, theta0, &Bounds::around(theta0), &opts).unwrap()
}

fn criterion_1_deviance_arithmetic() -> bool {
    let a = fixtures::reported_loglik(ModelKind::A);
    let b = fixtures::reported_loglik(ModelKind::B);
    let c = fixtures::reported_loglik(ModelKind::C);
    let ab = deviance_test(a, b, default_df(ModelKind::A, ModelKind::B).unwrap()).unwrap();
    let p7 = 1.0 - chi2_cdf(7.0, 2).unwrap();
    let p1 = 1.0 - chi2_cdf(1.0, 2).unwrap();
    let bc = 2.0 * (c - b);
    let ok = (ab.deviance - 10665.0).abs() <= 0.5
        && (p7 - (-3.5f64).exp()).abs() <= 1e-3
        && (p7 - 0.030).abs() <= 1e-3
        && (p1 - 0.61).abs() <= 0.01;
    report(
        1,
        ok,
        format!("D(A,B) = {:.1}, p(7, 2) = {:.4}, p(1, 2) = {:.4}, D(B,C) = {bc:.1}", ab.deviance, p7, p1),
    );
    ok
}

fn criterion_2_identifiability_loop() -> bool {
    let clock = Instant::now();
    let truth = fixtures::table(ModelKind::C);
    let data = prbs_record(&truth, 35.0, 1, 101);
    // Absolute scale needs one pinned parameter; the envelope resistance is
    // the one computable from insulation data.
    let theta0 = displaced(&truth).with(Param::Rw, truth.get(Param::Rw).unwrap()).unwrap();
    let fit = fit(&data, &theta0, 1, vec![Param::Rw]);
    let ratio = |p: Param| fit.params.get(p).unwrap() / truth.get(p).unwrap();
    let cop = ratio(Param::Cop);
    let products = [(Param::Ce, Param::Re), (Param::Ca, Param::Ra), (Param::Cw, Param::Rw)]
        .map(|(c, r)| (format!("{}{}", c.name(), r.name()), ratio(c) * ratio(r)));
    let acf = residual_acf(&fit.residuals, 193).unwrap();
    let frac = acf.fraction_above(whiteness_threshold(fit.residuals.len()));
    let ok = (cop - 1.0).abs() <= 0.2 && products.iter().all(|(_, r)| (r - 1.0).abs() <= 0.3) && frac <= 0.10;
    let shown: Vec<String> = products.iter().map(|(n, r)| format!("{n} ratio {r:.3}")).collect();
    report(
        2,
        ok,
        format!(
            "COP ratio {cop:.3}, {}, ACF fraction {frac:.3}, {:.0} s",
            shown.join(", "),
            clock.elapsed().as_secs_f64()
        ),
    );
    ok
}

fn criterion_3_wilks_calibration() -> bool {
    let clock = Instant::now();
    let truth = fixtures::table(ModelKind::B);
    let df = default_df(ModelKind::B, ModelKind::C).unwrap();
    let mut deviances = Vec::new();
    for rep in 0..20u64 {
        let data = prbs_record(&truth, 35.0, 1000 + rep, 2000 + rep);
        let fb = fit(&data, &truth, rep, vec![]);
        // Model C started from the fitted B with the air capacity split into a
        // fast air node and a wall node.
        let g = |p: Param| fb.params.get(p).unwrap();
        let ca = g(Param::Ca);
        let c0 = ThermalParameters::new(
            ModelKind::C,
            &[
                (Param::Ca, 0.5 * ca),
                (Param::Ce, g(Param::Ce)),
                (Param::Cw, 0.5 * ca),
                (Param::Ra, 200.0 / ca),
                (Param::Re, g(Param::Re)),
                (Param::Rw, g(Param::Rw)),
                (Param::Alpha(0), g(Param::Alpha(0))),
                (Param::Alpha(1), g(Param::Alpha(1))),
                (Param::Alpha(2), -8.0),
                (Param::Cop, g(Param::Cop)),
            ],
            fb.params.v(),
        )
        .unwrap();
        let fc = fit(&data, &c0, rep, vec![]);
        deviances.push(2.0 * (fc.loglik - fb.loglik));
    }
    let ks = ks_test(&deviances, |x| chi2_cdf(x.max(0.0), df).unwrap()).unwrap();
    let ok = ks.p_upper >= 0.01;
    let mean = deviances.iter().sum::<f64>() / deviances.len() as f64;
    report(
        3,
        ok,
        format!(
            "df {df}, mean deviance {mean:.2}, KS D+ {:.3} p {:.3}, {:.0} s",
            ks.d_upper,
            ks.p_upper,
            clock.elapsed().as_secs_f64()
        ),
    );
    ok
}

struct PlantCFits {
    truth: ThermalParameters,
    fits: Vec<FitResult>,
}

fn plant_c_fits() -> &'static PlantCFits {
    static FITS: OnceLock<PlantCFits> = OnceLock::new();
    FITS.get_or_init(|| {
        let truth = fixtures::table(ModelKind::C);
        let data = prbs_record(&truth, 35.0, 21, 121);
        let starts = [fixtures::table(ModelKind::A), fixtures::table(ModelKind::B), displaced(&truth)];
        let fits = starts.iter().map(|s| fit(&data, s, 21, vec![])).collect();
        PlantCFits { truth, fits }
    })
}

fn criterion_4_prediction_ordering() -> bool {
    let clock = Instant::now();
    let set = plant_c_fits();
    // 20-minute errors are strongly autocorrelated, so the held-out record is
    // long enough for their spread to settle.
    let held_out = prbs_record(&set.truth, 140.0, 22, 122);
    let plant = PlantConfig {
        initial: InitialState::SteadyAt(-18.5),
        ..PlantConfig::new(set.truth.clone(), 23)
    };
    let raw = thermostat_run(&plant, (-19.0, -18.0), 24.0 * HOURS, DEFAULT_ROOM_TEMPERATURE).unwrap();
    let thermostatic = preprocess(&raw, &preprocess_config_for(&plant, 10.0)).unwrap();
    let h = horizon_for(20.0, 10.0);
    let score = |p: &ThermalParameters, data: &TimeSeries| k_step_residuals(p, data, h, &FilterOptions::default()).unwrap().std;
    let prbs: Vec<f64> = set.fits.iter().map(|f| score(&f.params, &held_out)).collect();
    let thermo: Vec<f64> = set.fits.iter().map(|f| score(&f.params, &thermostatic)).collect();
    let mut failed = Vec::new();
    if !(prbs[0] > prbs[1] && prbs[1] > prbs[2]) {
        failed.push("PRBS ordering".to_string());
    }
    for (kind, (t, p)) in ["A", "B", "C"].iter().zip(thermo.iter().zip(&prbs)) {
        if t >= p {
            failed.push(format!("thermostatic {kind}"));
        }
    }
    let ok = failed.is_empty();
    report(
        4,
        ok,
        format!(
            "PRBS sigma A/B/C {:.3}/{:.3}/{:.3}, thermostatic {:.3}/{:.3}/{:.3}, {:.0} s{}",
            prbs[0],
            prbs[1],
            prbs[2],
            thermo[0],
            thermo[1],
            thermo[2],
            clock.elapsed().as_secs_f64(),
            if ok { String::new() } else { format!(" (failed: {})", failed.join(", ")) }
        ),
    );
    ok
}

fn enumerated_objective(cp: &CondensedProblem, p: &[f64], t_r: &[f64], prices: &[f64], cfg: &MpcConfig) -> f64 {
    let b = cfg.slack_weight_for(prices);
    let t = cp.predict(p, t_r);
    let cost: f64 = p.iter().zip(prices).map(|(a, c)| a * c).sum();
    cost + b * t.iter().map(|&x| (x - cfg.t_max).max(cfg.t_min - x).max(0.0)).sum::<f64>()
}

fn criterion_5_lp_oracle_equivalence() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dss = discretize_params(&fixtures::table(ModelKind::C), 120.0).unwrap();
    let cfg = MpcConfig { horizon: 3, ..Default::default() };
    let levels: Vec<f64> = (0..5).map(|i| cfg.p_max * i as f64 / 4.0).collect();
    let room = [DEFAULT_ROOM_TEMPERATURE; 3];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let x0 = DVector::from_fn(3, |_, _| rng.random_range(-30.0..-15.0));
        let prices: Vec<f64> = (0..3).map(|_| rng.random_range(5.0..60.0)).collect();
        let cp = condense(&dss, &x0, 3).unwrap();
        let lp = build_and_solve_lp(&cp, &room, &prices, &cfg).unwrap();
        let mut best = f64::INFINITY;
        for &a in &levels {
            for &b in &levels {
                for &c in &levels {
                    best = best.min(enumerated_objective(&cp, &[a, b, c], &room, &prices, &cfg));
                }
            }
        }
        worst = worst.max(lp.objective - best);
    }
    let ok = worst <= 1e-6;
    report(5, ok, format!("max LP minus enumeration over 50 states {worst:.3e}"));
    ok
}

fn criterion_6_closed_loop_demand_shift() -> bool {
    let clock = Instant::now();
    let set = plant_c_fits();
    let cfg = MpcConfig::default();
    let plant = PlantConfig {
        initial: InitialState::SteadyAt(cfg.t_max - 0.5),
        ..PlantConfig::new(set.truth.clone(), 31)
    };
    let duration = 6.0 * HOURS;
    let trace = receding_horizon_run(&set.fits[2].params, &plant, &paper_price_step(), &cfg, duration, &RunOptions::default()).unwrap();
    if let Some(msg) = &trace.aborted {
        report(6, false, format!("run aborted: {msg}"));
        return false;
    }
    let baseline = thermostat_run(&plant, (cfg.t_max - 1.0, cfg.t_max), duration, DEFAULT_ROOM_TEMPERATURE).unwrap();
    let m = metrics(&trace, mean_power(&baseline, &plant).unwrap(), &cfg).unwrap();
    let ks = m.step_index.expect("price step inside the run");
    let at_step = trace.rows[ks].t_meas;
    let zero_min = trace.rows[ks..].iter().take_while(|r| r.p_actuated == 0.0).count() as f64 * cfg.d / 60.0;
    let checks = [
        ("pre-step", (at_step - cfg.t_min).abs() <= 1.0),
        ("zero run", zero_min >= 45.0),
        ("m1", (30.0..=110.0).contains(&m.m1_wh)),
        ("m3", m.m3 < 1.0),
        ("round trip", (0.35..=0.95).contains(&m.round_trip)),
    ];
    let ok = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        6,
        ok,
        format!(
            "T at step {at_step:.2} C, zero consumption {zero_min:.0} min, m1 {:.1} Wh, m3 {:.2} C, round trip {:.2}, {:.0} s{}",
            m.m1_wh,
            m.m3,
            m.round_trip,
            clock.elapsed().as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) }
        ),
    );
    ok
}

fn criterion_7_pwm_contracts() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let on = MpcConfig::default();
    let off = MpcConfig { flip: false, ..on.clone() };
    let mut worst_energy = 0.0f64;
    let mut factors = Vec::new();
    for _ in 0..100 {
        let powers: Vec<f64> = (0..50).map(|_| rng.random_range(0.2..0.8) * on.p_max).collect();
        for (i, &p) in powers.iter().enumerate() {
            let pp = pwm_translate(p, &on, i);
            worst_energy = worst_energy.max((pp.duration as f64 * on.p_max - p * on.d).abs());
        }
        let flipped = count_transitions(&PwmSchedule::from_powers(&powers, &on).to_switch().on);
        let plain = count_transitions(&PwmSchedule::from_powers(&powers, &off).to_switch().on);
        factors.push(plain as f64 / flipped as f64);
    }
    let (lo, hi) = factors.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
    let ok = worst_energy <= on.min_pulse * on.p_max && lo >= 1.0 && hi <= 3.0;
    report(
        7,
        ok,
        format!("worst energy error {worst_energy:.1} J, transition factor {lo:.2}..{hi:.2}"),
    );
    ok
}

fn criterion_8_numerical_kernels() -> bool {
    let chi2 = (0..=400)
        .map(|i| i as f64 * 0.1)
        .map(|x| (chi2_cdf(x, 2).unwrap() - (1.0 - (-x / 2.0).exp())).abs())
        .fold(0.0, f64::max);

    let pe = fixtures::table(ModelKind::E);
    let x = DVector::from_row_slice(&[-28.0, -20.0, -14.0]);
    let jac = jacobian_state(&pe, &x, 23.0, 40.0, 10.0).unwrap();
    let mut jac_err = 0.0f64;
    for j in 0..3 {
        let h = 1e-4;
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fd = (nonlinear_step(&pe, &xp, 40.0, 23.0, 10.0).unwrap() - nonlinear_step(&pe, &xm, 40.0, 23.0, 10.0).unwrap()) / (2.0 * h);
        for i in 0..3 {
            jac_err = jac_err.max((fd[i] - jac[(i, j)]).abs());
        }
    }

    let dss = discretize_params(&fixtures::table(ModelKind::C), 120.0).unwrap();
    let n = 300;
    let x0 = DVector::from_row_slice(&[-25.0, -19.0, -17.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..68.0)).collect();
    let t_r: Vec<f64> = (0..n).map(|_| rng.random_range(18.0..26.0)).collect();
    let predicted = condense(&dss, &x0, n).unwrap().predict(&p, &t_r);
    let mut state = x0.clone();
    let mut cond_err = 0.0f64;
    for k in 0..n {
        state = dss.step_mean(&state, t_r[k], p[k]).unwrap();
        cond_err = cond_err.max((dss.output(&state) - predicted[k]).abs());
    }

    let ok = chi2 <= 1e-12 && jac_err <= 1e-6 && cond_err <= 1e-9;
    report(
        8,
        ok,
        format!("chi2 error {chi2:.1e}, Jacobian error {jac_err:.1e}, condensation error at N = 300 {cond_err:.1e}"),
    );
    ok
}

fn main() {
    let criteria: [(u32, fn() -> bool); 8] = [
        (1, criterion_1_deviance_arithmetic),
        (2, criterion_2_identifiability_loop),
        (3, criterion_3_wilks_calibration),
        (4, criterion_4_prediction_ordering),
        (5, criterion_5_lp_oracle_equivalence),
        (6, criterion_6_closed_loop_demand_shift),
        (7, criterion_7_pwm_contracts),
        (8, criterion_8_numerical_kernels),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        match std::panic::catch_unwind(check) {
            Ok(true) => {}
            Ok(false) => failed.push(id),
            Err(_) => {
                report(id, false, "panicked".into());
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
