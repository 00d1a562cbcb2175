//! CSV and key-value file formats. Decimal point, no thousands separators,
//! LF line endings; numbers are written in shortest round-trip form.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::TimeSeries;
use crate::mpc::{MpcTrace, PricingSignal, RunMetrics, TraceRow};
use crate::plant_sim::RawRecording;
use crate::thermal_models::ThermalParameters;

pub const TIME_SERIES_HEADER: [&str; 4] = ["t_s", "P_W", "Tr_C", "T_C"];
pub const RAW_HEADER: [&str; 5] = ["t_s", "P_W", "Tr_C", "T1_C", "T2_C"];
pub const PRICE_HEADER: [&str; 2] = ["t_s", "price"];
pub const TRACE_HEADER: [&str; 8] = ["t_s", "price", "P_setpoint_W", "P_actuated_W", "T_meas_C", "T_pred_C", "slack_C", "solve_ms"];

fn columns<R: Read>(reader: R, header: &[&str], what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let index: Vec<usize> = header
        .iter()
        .map(|h| {
            found
                .iter()
                .position(|f| f == h)
                .ok_or_else(|| Error::Parse(format!("{what}: missing column `{h}` (found {})", found.join(","))))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); header.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in index.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let x = field
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{what}: row {}, column `{}`: `{field}` is not a number", row + 1, header[c])))?;
            cols[c].push(x);
        }
    }
    Ok(cols)
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row.iter().map(|x| x.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_time_series<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut c = columns(reader, &TIME_SERIES_HEADER, "time series")?.into_iter();
    let (t, p, t_r, y) = (c.next().unwrap(), c.next().unwrap(), c.next().unwrap(), c.next().unwrap());
    TimeSeries::new(t, p, t_r, y)
}

pub fn write_time_series<W: Write>(writer: W, ts: &TimeSeries) -> Result<()> {
    write_rows(writer, &TIME_SERIES_HEADER, (0..ts.len()).map(|k| vec![ts.t[k], ts.p[k], ts.t_r[k], ts.y[k]]))
}

pub fn read_raw<R: Read>(reader: R) -> Result<RawRecording> {
    let mut c = columns(reader, &RAW_HEADER, "raw recording")?.into_iter();
    let mut next = || c.next().unwrap();
    let raw = RawRecording {
        t: next(),
        p: next(),
        t_r: next(),
        t1: next(),
        t2: next(),
    };
    raw.validate()?;
    Ok(raw)
}

pub fn write_raw<W: Write>(writer: W, raw: &RawRecording) -> Result<()> {
    write_rows(
        writer,
        &RAW_HEADER,
        (0..raw.len()).map(|k| vec![raw.t[k], raw.p[k], raw.t_r[k], raw.t1[k], raw.t2[k]]),
    )
}

pub fn read_prices<R: Read>(reader: R) -> Result<PricingSignal> {
    let mut c = columns(reader, &PRICE_HEADER, "price")?.into_iter();
    PricingSignal::new(c.next().unwrap(), c.next().unwrap())
}

pub fn write_prices<W: Write>(writer: W, prices: &PricingSignal) -> Result<()> {
    write_rows(
        writer,
        &PRICE_HEADER,
        prices.times.iter().zip(&prices.values).map(|(&t, &c)| vec![t, c]),
    )
}

fn trace_fields(r: &TraceRow) -> Vec<f64> {
    vec![r.t, r.price, r.p_setpoint, r.p_actuated, r.t_meas, r.t_pred, r.slack, r.solve_ms]
}

pub fn write_trace<W: Write>(writer: W, trace: &MpcTrace) -> Result<()> {
    write_rows(writer, &TRACE_HEADER, trace.rows.iter().map(trace_fields))
}

pub fn read_trace_rows<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let c = columns(reader, &TRACE_HEADER, "MPC trace")?;
    Ok((0..c[0].len())
        .map(|k| TraceRow {
            t: c[0][k],
            price: c[1][k],
            p_setpoint: c[2][k],
            p_actuated: c[3][k],
            t_meas: c[4][k],
            t_pred: c[5][k],
            slack: c[6][k],
            solve_ms: c[7][k],
        })
        .collect())
}

pub fn metrics_json(m: &RunMetrics) -> Result<String> {
    Ok(serde_json::to_string_pretty(m)?)
}

pub fn read_params(path: &Path) -> Result<ThermalParameters> {
    ThermalParameters::from_kv_str(&fs::read_to_string(path)?)
}

pub fn write_params(path: &Path, params: &ThermalParameters) -> Result<()> {
    Ok(fs::write(path, params.to_kv_string())?)
}

pub fn read_time_series_file(path: &Path) -> Result<TimeSeries> {
    read_time_series(fs::File::open(path)?)
}

pub fn write_time_series_file(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_time_series(fs::File::create(path)?, ts)
}
