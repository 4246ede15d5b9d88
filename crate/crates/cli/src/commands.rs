use std::path::{Path, PathBuf};

use log::{info, warn};
use magcomp_core::evaluation::{
    channel_series, evaluate_flight, rank, reports_to_csv, truth_series, DetrendMode, EvalChannel, TruthSource,
};
use magcomp_core::map_tools::ContinuationOptions;
use magcomp_core::simulator::{simulate_flight, SimConfig};
use magcomp_core::{
    build_interpolant, check_channels, detrend, fit_coefficients, load_flight, upward_fft, AnomalyMap, BandpassSpec,
    FlightFrame, InterpMethod, LineId, TlCoefficients,
};

use crate::error::CliError;
use crate::output::{line_chart_svg, write_atomic};
use crate::{
    CalibrateArgs, Command, CompensateArgs, EvaluateArgs, FlightInput, Fluxgate, MapUpwardArgs, SimulateArgs, TruthArg,
    SEED_ENV,
};

pub fn run(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Compensate(a) => compensate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::MapUpward(a) => map_upward(a),
    }
}

fn load(input: &FlightInput) -> Result<FlightFrame, CliError> {
    let frame = load_flight(&input.input, None, input.fs)?;
    for r in check_channels(&frame).iter().filter(|r| r.nan_count > 0) {
        warn!("{}: {} NaN values, first at {:?}", r.name, r.nan_count, r.nan_indices.first());
    }
    match &input.line {
        None => Ok(frame),
        Some(s) => {
            let id: LineId = s.parse().map_err(|e| CliError::Usage(format!("--line {s}: {e}")))?;
            Ok(frame.select_line(id)?)
        }
    }
}

fn flux_channels(frame: &FlightFrame, gate: Fluxgate) -> Result<[&[f64]; 3], CliError> {
    let g = gate.letter();
    Ok([frame.require(&format!("FLUX{g}_X"))?, frame.require(&format!("FLUX{g}_Y"))?, frame.require(&format!("FLUX{g}_Z"))?])
}

fn read_coeffs(path: &Path) -> Result<TlCoefficients<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    TlCoefficients::from_text(&text).map_err(|e| CliError::data(path.display(), e))
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(config_seed),
    }
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::data(a.config.display(), e))?;
    let mut cfg = SimConfig::from_text(&text, a.config.parent()).map_err(|e| CliError::data(a.config.display(), e))?;
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    if let Some(m) = a.model_error {
        if !(m.is_finite() && m >= 0.0) {
            return Err(CliError::Usage(format!("--model-error must be >= 0, got {m}")));
        }
        for s in &mut cfg.sensors {
            s.model_error_nt = m;
        }
    }
    info!(
        "simulate: config={} out={} truth={} seed={} fs_hz={} line={} pattern={:?} sensors={} earth_field_nT={:?} noise={:?} anomaly={}",
        a.config.display(),
        a.out.display(),
        a.truth.display(),
        cfg.seed,
        cfg.fs_hz,
        cfg.line,
        cfg.pattern,
        cfg.sensors.len(),
        cfg.earth_field_nt,
        cfg.noise,
        cfg.anomaly.as_ref().map_or("none".to_string(), |an| format!("{}x{} map, track {:?}", an.map.nx(), an.map.ny(), an.track)),
    );
    for (k, s) in cfg.sensors.iter().enumerate() {
        info!("simulate: sensor {} theta={:?} model_error_nT={}", k + 1, s.theta, s.model_error_nt);
    }
    let (frame, truth) = simulate_flight(&cfg)?;
    write_atomic(&a.out, frame.to_csv_string().as_bytes())?;
    write_atomic(&a.truth, truth.to_frame(frame.time())?.to_csv_string().as_bytes())?;
    info!("simulate: wrote {} samples", frame.len());
    Ok(())
}

fn calibrate(a: &CalibrateArgs) -> Result<(), CliError> {
    info!(
        "calibrate: in={} fs={:?} line={:?} mag={} flux={} lambda={} pass1={} pass2={} order={} out={:?}",
        a.flight.input.display(),
        a.flight.fs,
        a.flight.line,
        a.mag,
        a.flux.letter(),
        a.lambda,
        a.pass1,
        a.pass2,
        a.order,
        a.out
    );
    let frame = load(&a.flight)?;
    let band = BandpassSpec::new(a.pass1, a.pass2, frame.sample_rate_hz(), a.order)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let [x, y, z] = flux_channels(&frame, a.flux)?;
    let coeffs = fit_coefficients(frame.require(&a.mag)?, x, y, z, &band, a.lambda)?;
    if let Some(cond) = coeffs.condition {
        info!("calibrate: condition estimate {cond:e}");
    }
    let text = coeffs.to_text();
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

/// `UNCOMPMAGk` becomes `COMPMAGk`; anything else gets a `_COMP` suffix.
pub fn compensated_name(mag: &str) -> String {
    match mag.strip_prefix("UNCOMPMAG") {
        Some(k) => format!("COMPMAG{k}"),
        None => format!("{mag}_COMP"),
    }
}

fn compensate(a: &CompensateArgs) -> Result<(), CliError> {
    info!(
        "compensate: in={} fs={:?} line={:?} coeffs={} mag={} flux={} out={}",
        a.flight.input.display(),
        a.flight.fs,
        a.flight.line,
        a.coeffs.display(),
        a.mag,
        a.flux.letter(),
        a.out.display()
    );
    let frame = load(&a.flight)?;
    let coeffs = read_coeffs(&a.coeffs)?;
    let [x, y, z] = flux_channels(&frame, a.flux)?;
    let comp = magcomp_core::compensate(&coeffs, frame.require(&a.mag)?, x, y, z)?;
    let out = frame.with_channel(&compensated_name(&a.mag), comp)?;
    write_atomic(&a.out, out.to_csv_string().as_bytes())?;
    Ok(())
}

fn coefficient_sources(a: &EvaluateArgs) -> Result<Vec<(String, PathBuf)>, CliError> {
    if a.coeffs.is_dir() {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(&a.coeffs)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("coef") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            if a.mag.is_empty() || a.mag.iter().any(|m| m == stem) {
                found.push((stem.to_string(), path.clone()));
            }
        }
        found.sort();
        if found.is_empty() {
            return Err(CliError::Data(format!("no matching .coef files in {}", a.coeffs.display())));
        }
        Ok(found)
    } else {
        if a.mag.is_empty() {
            return Err(CliError::Usage("--mag is required when --coeffs is a single file".into()));
        }
        Ok(a.mag.iter().map(|m| (m.clone(), a.coeffs.clone())).collect())
    }
}

fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    info!(
        "evaluate: in={} fs={:?} line={:?} coeffs={} truth={:?} map={:?} survey_alt={:?} mag={:?} flux={} per_series={} report={} plot={:?}",
        a.flight.input.display(),
        a.flight.fs,
        a.flight.line,
        a.coeffs.display(),
        a.truth,
        a.map,
        a.survey_alt,
        a.mag,
        a.flux.letter(),
        a.per_series,
        a.report.display(),
        a.plot
    );
    let frame = load(&a.flight)?;
    let channels = coefficient_sources(a)?
        .into_iter()
        .map(|(channel, path)| {
            Ok(EvalChannel { channel, compensation: Some((read_coeffs(&path)?, a.flux.letter().to_string())) })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let source = match a.truth {
        TruthArg::Stinger => TruthSource::Stinger,
        TruthArg::Map => TruthSource::Map,
    };
    let interpolant = match (a.truth, &a.map) {
        (TruthArg::Map, None) => return Err(CliError::Usage("--truth map needs --map".into())),
        (TruthArg::Map, Some(path)) => {
            let mut map = AnomalyMap::<f64>::read(path).map_err(|e| CliError::data(path.display(), e))?;
            if let Some(alt) = a.survey_alt {
                let dz = alt - map.alt_m;
                info!("evaluate: continuing map by {dz} m to survey altitude {alt} m");
                map = upward_fft(&map, dz, &ContinuationOptions::padded())?;
            }
            Some(build_interpolant(&map, InterpMethod::Bilinear))
        }
        (TruthArg::Stinger, _) => None,
    };
    let mode = if a.per_series { DetrendMode::PerSeries } else { DetrendMode::Residual };
    let reports = evaluate_flight(&frame, &channels, source, interpolant.as_ref(), mode)?;
    for (k, r) in rank(&reports).iter().enumerate() {
        info!(
            "evaluate: #{} {} rmse={:.6} nT detrended={:.6} nT (n={})",
            k + 1,
            r.channel,
            r.rmse_nt,
            r.rmse_detrended_nt,
            r.n_samples
        );
    }
    write_atomic(&a.report, reports_to_csv(&reports).as_bytes())?;

    if let Some(plot) = &a.plot {
        let t0 = frame.time()[0];
        let t: Vec<f64> = frame.time().iter().map(|v| v - t0).collect();
        let mut series = vec![(format!("truth ({source})"), detrend(&truth_series(&frame, source, interpolant.as_ref())?)?)];
        for ch in &channels {
            series.push((compensated_name(&ch.channel), detrend(&channel_series(&frame, ch)?)?));
        }
        write_atomic(plot, line_chart_svg("Compensated magnetometers (detrended)", &t, &series).as_bytes())?;
    }
    Ok(())
}

fn map_upward(a: &MapUpwardArgs) -> Result<(), CliError> {
    info!(
        "map-upward: in={} dz={} out={} pad={} allow_downward={} kcut={:?}",
        a.input.display(),
        a.dz,
        a.out.display(),
        a.pad,
        a.allow_downward,
        a.kcut
    );
    if a.allow_downward && a.dz < 0.0 && a.kcut.is_none() {
        return Err(CliError::Usage("--allow-downward needs --kcut".into()));
    }
    let map = AnomalyMap::<f64>::read(&a.input).map_err(|e| CliError::data(a.input.display(), e))?;
    let opts = ContinuationOptions { pad: a.pad, allow_downward: a.allow_downward, k_cutoff: a.kcut };
    let out = upward_fft(&map, a.dz, &opts)?;
    if out.values().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("continued map contains non-finite values".into()));
    }
    write_atomic(&a.out, out.to_text().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_channel_names() {
        assert_eq!(compensated_name("UNCOMPMAG3"), "COMPMAG3");
        assert_eq!(compensated_name("MAGX"), "MAGX_COMP");
    }

    #[test]
    fn explicit_seed_wins() {
        assert_eq!(resolve_seed(Some(9), 1).unwrap(), 9);
    }
}
