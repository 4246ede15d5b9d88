//! RMSE scoring of compensated magnetometer channels against a truth signal.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::flight_data::{FlightError, FlightFrame};
use crate::map_tools::{MapError, MapInterpolant};
use crate::scalar::{c, has_nan, Scalar};
use crate::signal::{detrend, SignalError};
use crate::tolles_lawson::{compensate, TlCoefficients, TlError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("NaN in input")]
    NanInput,
    #[error("truth channel {0} missing")]
    MissingTruth(String),
    #[error("map truth needs an anomaly map")]
    NoMap,
    #[error("track leaves the anomaly map: {0}")]
    TrackOutOfBounds(MapError),
    #[error(transparent)]
    Flight(#[from] FlightError),
    #[error(transparent)]
    Tl(#[from] TlError),
}

impl From<SignalError> for EvalError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::NanInput => EvalError::NanInput,
            SignalError::TooShort { len, min } => EvalError::TooShort { len, min },
            SignalError::InvalidSpec(_) => unreachable!("detrend takes no spec"),
        }
    }
}

fn check_pair<T: Scalar>(a: &[T], b: &[T], min: usize) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < min {
        return Err(EvalError::TooShort { len: a.len(), min });
    }
    if has_nan(a) || has_nan(b) {
        return Err(EvalError::NanInput);
    }
    Ok(())
}

fn rms<T: Scalar>(x: impl Iterator<Item = T>, n: usize) -> T {
    (x.map(|v| v * v).fold(T::zero(), |s, v| s + v) / c::<T>(n as f64)).sqrt()
}

/// Root-mean-square difference of two equal-length series.
pub fn rmse<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EvalError> {
    check_pair(a, b, 1)?;
    Ok(rms(a.iter().zip(b).map(|(&x, &y)| x - y), a.len()))
}

/// RMSE after removing the least-squares affine trend of the residual.
pub fn rmse_detrended<T: Scalar>(candidate: &[T], truth: &[T]) -> Result<T, EvalError> {
    check_pair(candidate, truth, 2)?;
    let resid: Vec<T> = candidate.iter().zip(truth).map(|(&x, &y)| x - y).collect();
    let d = detrend(&resid)?;
    Ok(rms(d.into_iter(), resid.len()))
}

/// RMSE after detrending candidate and truth separately.
pub fn rmse_detrended_per_series<T: Scalar>(candidate: &[T], truth: &[T]) -> Result<T, EvalError> {
    check_pair(candidate, truth, 2)?;
    rmse(&detrend(candidate)?, &detrend(truth)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetrendMode {
    #[default]
    Residual,
    PerSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    /// The professionally compensated tail-stinger channel.
    Stinger,
    /// Anomaly map interpolated along LAT/LONG.
    Map,
}

/// Channel carrying the compensated stinger reference.
pub const STINGER_CHANNEL: &str = "IGRFMAG1";

impl fmt::Display for TruthSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthSource::Stinger => "stinger",
            TruthSource::Map => "map",
        })
    }
}

impl FromStr for TruthSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stinger" => Ok(TruthSource::Stinger),
            "map" => Ok(TruthSource::Map),
            _ => Err(format!("truth source must be stinger or map, got {s:?}")),
        }
    }
}

/// A magnetometer channel to score, with the coefficients and fluxgate used
/// to compensate it. Without coefficients the raw channel is scored.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalChannel {
    pub channel: String,
    pub compensation: Option<(TlCoefficients<f64>, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub channel: String,
    pub truth_source: TruthSource,
    pub n_samples: usize,
    pub rmse_nt: f64,
    pub rmse_detrended_nt: f64,
}

pub const REPORT_HEADER: &str = "channel,truth_source,n,rmse_nT,rmse_detrended_nT";

/// Report rows as CSV with [`REPORT_HEADER`].
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{:?},{:?}\n",
            r.channel, r.truth_source, r.n_samples, r.rmse_nt, r.rmse_detrended_nt
        ));
    }
    out
}

/// Truth series for `frame`. Map truth is the anomaly value only, so its
/// plain RMSE includes the core field; the detrended figure does not.
pub fn truth_series(
    frame: &FlightFrame,
    source: TruthSource,
    map: Option<&MapInterpolant<f64>>,
) -> Result<Vec<f64>, EvalError> {
    match source {
        TruthSource::Stinger => frame
            .channel(STINGER_CHANNEL)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| EvalError::MissingTruth(STINGER_CHANNEL.into())),
        TruthSource::Map => {
            let itp = map.ok_or(EvalError::NoMap)?;
            let lat = frame.channel("LAT").ok_or_else(|| EvalError::MissingTruth("LAT".into()))?;
            let lon = frame.channel("LONG").ok_or_else(|| EvalError::MissingTruth("LONG".into()))?;
            lon.iter()
                .zip(lat)
                .map(|(&lo, &la)| itp.interp_at(lo, la).map_err(EvalError::TrackOutOfBounds))
                .collect()
        }
    }
}

/// Compensated (or raw) series for one channel.
pub fn channel_series(frame: &FlightFrame, ch: &EvalChannel) -> Result<Vec<f64>, EvalError> {
    let mag = frame.require(&ch.channel)?;
    match &ch.compensation {
        None => Ok(mag.to_vec()),
        Some((coeffs, gate)) => {
            let axis = |a: &str| frame.require(&format!("FLUX{gate}_{a}"));
            Ok(compensate(coeffs, mag, axis("X")?, axis("Y")?, axis("Z")?)?)
        }
    }
}

/// Scores each channel against the truth. Reports are sorted by channel name.
pub fn evaluate_flight(
    frame: &FlightFrame,
    channels: &[EvalChannel],
    source: TruthSource,
    map: Option<&MapInterpolant<f64>>,
    mode: DetrendMode,
) -> Result<Vec<EvalReport>, EvalError> {
    let truth = truth_series(frame, source, map)?;
    let mut reports = channels
        .iter()
        .map(|ch| {
            let series = channel_series(frame, ch)?;
            let rmse_detrended_nt = match mode {
                DetrendMode::Residual => rmse_detrended(&series, &truth)?,
                DetrendMode::PerSeries => rmse_detrended_per_series(&series, &truth)?,
            };
            Ok(EvalReport {
                channel: ch.channel.clone(),
                truth_source: source,
                n_samples: series.len(),
                rmse_nt: rmse(&series, &truth)?,
                rmse_detrended_nt,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    reports.sort_by(|a, b| a.channel.cmp(&b.channel));
    Ok(reports)
}

/// Reports ordered best first by detrended RMSE, ties broken by name.
pub fn rank(reports: &[EvalReport]) -> Vec<&EvalReport> {
    let mut out: Vec<&EvalReport> = reports.iter().collect();
    out.sort_by(|a, b| {
        a.rmse_detrended_nt
            .partial_cmp(&b.rmse_detrended_nt)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.channel.cmp(&b.channel))
    });
    out
}
