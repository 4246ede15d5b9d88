//! Synthetic calibration and survey flights with known ground truth.
//!
//! The earth field is a constant vector in a north-west-up navigation frame,
//! rotated into the aircraft frame (x forward, y port, z up) with a
//! yaw-pitch-roll (Z-Y-X intrinsic) sequence. Direction cosines are taken from
//! that noise-free body-frame field, so the Tolles-Lawson model is exact for
//! every sensor unless an unmodelled disturbance is configured.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::flight_data::{FlightError, FlightFrame, LineId, LINE, TIME};
use crate::map_tools::{build_interpolant, AnomalyMap, InterpMethod, MapError};
use crate::tolles_lawson::{build_design_matrix, DirectionCosines, TlError, N_TERMS};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("survey line needs an anomaly map")]
    NoAnomalyMap,
    #[error("track leaves the anomaly map: {0}")]
    TrackOutOfBounds(MapError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Flight(#[from] FlightError),
    #[error(transparent)]
    Tl(#[from] TlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Earth field of about 53000 nT at 70 deg inclination, -10 deg declination,
/// as (north, west, up).
pub const DEFAULT_EARTH_FIELD_NT: [f64; 3] = [17851.8, 3147.7, -49803.9];

/// Plausible coefficients with a trace-free induced block.
pub const DEFAULT_THETA: [f64; N_TERMS] = [
    150.0, -80.0, 220.0, //
    40.0, -15.0, 8.0, -25.0, 12.0, -15.0, //
    300.0, -120.0, 80.0, 150.0, 250.0, -60.0, -90.0, 110.0, 200.0,
];

pub const FLUXGATES: [&str; 3] = ["B", "C", "D"];

/// Zero-valued current/voltage channels emitted for schema compatibility.
pub const PLACEHOLDER_CHANNELS: [&str; 3] = ["CUR_COMR", "CUR_STRB", "V_BATR"];

/// Channel name of scalar magnetometer `index` (0-based).
pub fn scalar_channel(index: usize) -> String {
    format!("UNCOMPMAG{}", index + 1)
}

/// Channel that carries the simulated earth-field truth.
pub const TRUTH_CHANNEL: &str = "IGRFMAG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    /// Square legs, second and later boxes flown in the opposite direction.
    Box,
    /// Constant heading with the same per-leg maneuvers.
    Straight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub leg_length_s: f64,
    pub n_legs: usize,
    pub repeats: usize,
    /// Duration of the heading change at the start of each leg.
    pub turn_s: f64,
    pub roll_amp_deg: f64,
    pub pitch_amp_deg: f64,
    pub yaw_amp_deg: f64,
    pub maneuver_hz: f64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self {
            kind: PatternKind::Box,
            leg_length_s: 75.0,
            n_legs: 4,
            repeats: 2,
            turn_s: 10.0,
            roll_amp_deg: 10.0,
            pitch_amp_deg: 5.0,
            yaw_amp_deg: 5.0,
            maneuver_hz: 0.2,
        }
    }
}

impl PatternSpec {
    pub fn duration_s(&self) -> f64 {
        self.leg_length_s * (self.n_legs * self.repeats) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub scalar_sigma_nt: f64,
    pub flux_sigma_nt: f64,
}

/// One scalar magnetometer: its true coefficients and the amplitude (nT) of
/// an unmodelled vector disturbance projected onto the field direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub theta: [f64; N_TERMS],
    pub model_error_nt: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, model_error_nt: 0.0 }
    }
}

/// Straight ground track flown at constant speed over the whole flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub start_lon_deg: f64,
    pub start_lat_deg: f64,
    pub end_lon_deg: f64,
    pub end_lat_deg: f64,
    pub alt_m: f64,
}

impl Track {
    fn at(&self, frac: f64) -> (f64, f64) {
        (
            self.start_lon_deg + (self.end_lon_deg - self.start_lon_deg) * frac,
            self.start_lat_deg + (self.end_lat_deg - self.start_lat_deg) * frac,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySpec {
    pub map: AnomalyMap<f64>,
    pub track: Option<Track>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sensors: Vec<SensorSpec>,
    /// Earth field in the navigation frame (north, west, up), nT.
    pub earth_field_nt: [f64; 3],
    pub anomaly: Option<AnomalySpec>,
    pub pattern: PatternSpec,
    pub fs_hz: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub line: LineId,
    pub start_time_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sensors: vec![SensorSpec::default()],
            earth_field_nt: DEFAULT_EARTH_FIELD_NT,
            anomaly: None,
            pattern: PatternSpec::default(),
            fs_hz: 10.0,
            noise: NoiseSpec::default(),
            seed: 0,
            line: LineId::from_value(1002.01).unwrap(),
            start_time_s: 50_000.0,
        }
    }
}

/// Ground truth of a simulated flight.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// (roll, pitch, yaw) in radians.
    pub attitude: Vec<[f64; 3]>,
    pub h_et_true: Vec<f64>,
    /// Modelled aircraft field per sensor.
    pub h_at_true: Vec<Vec<f64>>,
    /// Unmodelled disturbance per sensor.
    pub model_error_true: Vec<Vec<f64>>,
    /// Noise-free earth field in the aircraft frame.
    pub flux_true: Vec<[f64; 3]>,
}

impl SimTruth {
    /// Truth as a frame for writing: TIME, attitude, earth field, and per
    /// sensor aircraft field and disturbance.
    pub fn to_frame(&self, time: &[f64]) -> Result<FlightFrame, FlightError> {
        let mut cols: Vec<(String, Vec<f64>)> = vec![(TIME.into(), time.to_vec())];
        for (k, name) in ["ROLL_RAD", "PITCH_RAD", "YAW_RAD"].iter().enumerate() {
            cols.push((name.to_string(), self.attitude.iter().map(|a| a[k]).collect()));
        }
        cols.push(("H_ET_TRUE".into(), self.h_et_true.clone()));
        for (k, h) in self.h_at_true.iter().enumerate() {
            cols.push((format!("H_AT_TRUE{}", k + 1), h.clone()));
        }
        for (k, h) in self.model_error_true.iter().enumerate() {
            cols.push((format!("MODEL_ERR{}", k + 1), h.clone()));
        }
        for (k, axis) in ["X", "Y", "Z"].iter().enumerate() {
            cols.push((format!("FLUX_TRUE_{axis}"), self.flux_true.iter().map(|f| f[k]).collect()));
        }
        FlightFrame::new(cols, None)
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        let p = &self.pattern;
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return bad(format!("fs_hz must be positive, got {}", self.fs_hz));
        }
        if !(p.maneuver_hz > 0.0 && self.fs_hz > 2.0 * p.maneuver_hz) {
            return bad(format!("need 0 < maneuver_hz < fs/2, got {} at fs {}", p.maneuver_hz, self.fs_hz));
        }
        for (name, a) in [("roll", p.roll_amp_deg), ("pitch", p.pitch_amp_deg), ("yaw", p.yaw_amp_deg)] {
            if !(a > 0.0 && a <= 30.0) {
                return bad(format!("{name} amplitude must be in (0, 30] deg, got {a}"));
            }
        }
        if p.n_legs == 0 || p.repeats == 0 {
            return bad("n_legs and repeats must be positive".into());
        }
        if !(p.turn_s >= 0.0 && p.leg_length_s > p.turn_s) {
            return bad(format!("leg_length_s ({}) must exceed turn_s ({})", p.leg_length_s, p.turn_s));
        }
        if self.n_samples() < 3 {
            return bad("flight shorter than 3 samples".into());
        }
        if self.sensors.is_empty() {
            return bad("at least one sensor required".into());
        }
        if self.sensors.iter().any(|s| s.theta.iter().any(|v| !v.is_finite()) || !(s.model_error_nt >= 0.0)) {
            return bad("sensor coefficients must be finite and model error >= 0".into());
        }
        let e = self.earth_field_nt;
        if !(e.iter().all(|v| v.is_finite()) && e.iter().any(|&v| v != 0.0)) {
            return bad("earth field must be finite and nonzero".into());
        }
        if !(self.noise.scalar_sigma_nt >= 0.0 && self.noise.flux_sigma_nt >= 0.0) {
            return bad("noise levels must be >= 0".into());
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.pattern.duration_s() * self.fs_hz).round() as usize
    }

    /// Parses the flat `key = value` config format. Relative `map` paths are
    /// resolved against `base_dir`.
    pub fn from_text(text: &str, base_dir: Option<&Path>) -> Result<Self, SimError> {
        let mut cfg = Self::default();
        let mut sensors: Vec<Option<SensorSpec>> = Vec::new();
        let mut map: Option<AnomalyMap<f64>> = None;
        let mut track: Option<Track> = None;
        let mut alt_m: Option<f64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| SimError::Config(format!("line {}: {m}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| err(&format!("bad number {v:?} for {key}")));
            let list = |v: &str| v.split(',').map(num).collect::<Result<Vec<f64>, _>>();
            let count = |v: &str| v.parse::<usize>().map_err(|_| err(&format!("bad count {v:?} for {key}")));

            if let Some(rest) = key.strip_prefix("mag") {
                let (idx, field) = rest.split_once('.').ok_or_else(|| err("expected magN.theta or magN.model_error_nT"))?;
                let idx: usize = idx.parse().map_err(|_| err("bad sensor index"))?;
                if idx == 0 {
                    return Err(err("sensor indices start at 1"));
                }
                if sensors.len() < idx {
                    sensors.resize(idx, None);
                }
                let s = sensors[idx - 1].get_or_insert_with(SensorSpec::default);
                match field {
                    "theta" => {
                        let v = list(value)?;
                        s.theta = v.try_into().map_err(|v: Vec<f64>| err(&format!("theta needs {N_TERMS} values, got {}", v.len())))?;
                    }
                    "model_error_nT" => s.model_error_nt = num(value)?,
                    other => return Err(err(&format!("unknown sensor field {other}"))),
                }
                continue;
            }

            match key {
                "seed" => cfg.seed = value.parse().map_err(|_| err("bad seed"))?,
                "fs_hz" => cfg.fs_hz = num(value)?,
                "line" => cfg.line = value.parse().map_err(|_| err("bad line id"))?,
                "start_time_s" => cfg.start_time_s = num(value)?,
                "earth_field_nT" => {
                    let v = list(value)?;
                    cfg.earth_field_nt = v.try_into().map_err(|_| err("earth_field_nT needs 3 values"))?;
                }
                "pattern" => {
                    cfg.pattern.kind = match value {
                        "box" => PatternKind::Box,
                        "straight" => PatternKind::Straight,
                        _ => return Err(err("pattern must be box or straight")),
                    }
                }
                "leg_length_s" => cfg.pattern.leg_length_s = num(value)?,
                "n_legs" => cfg.pattern.n_legs = count(value)?,
                "repeats" => cfg.pattern.repeats = count(value)?,
                "turn_s" => cfg.pattern.turn_s = num(value)?,
                "roll_amp_deg" => cfg.pattern.roll_amp_deg = num(value)?,
                "pitch_amp_deg" => cfg.pattern.pitch_amp_deg = num(value)?,
                "yaw_amp_deg" => cfg.pattern.yaw_amp_deg = num(value)?,
                "maneuver_hz" => cfg.pattern.maneuver_hz = num(value)?,
                "scalar_sigma_nT" => cfg.noise.scalar_sigma_nt = num(value)?,
                "flux_sigma_nT" => cfg.noise.flux_sigma_nt = num(value)?,
                "map" => {
                    let path = match base_dir {
                        Some(dir) if Path::new(value).is_relative() => dir.join(value),
                        _ => Path::new(value).to_path_buf(),
                    };
                    map = Some(AnomalyMap::read(&path)?);
                }
                "track" => {
                    let v = list(value)?;
                    let [a, b, c, d]: [f64; 4] = v.try_into().map_err(|_| err("track needs lon0, lat0, lon1, lat1"))?;
                    track = Some(Track { start_lon_deg: a, start_lat_deg: b, end_lon_deg: c, end_lat_deg: d, alt_m: 0.0 });
                }
                "alt_m" => alt_m = Some(num(value)?),
                other => return Err(err(&format!("unknown key {other}"))),
            }
        }

        if !sensors.is_empty() {
            cfg.sensors = sensors
                .into_iter()
                .enumerate()
                .map(|(k, s)| s.ok_or_else(|| SimError::Config(format!("sensor mag{} missing", k + 1))))
                .collect::<Result<_, _>>()?;
        }
        if let Some(t) = track.as_mut() {
            t.alt_m = alt_m.or(map.as_ref().map(|m| m.alt_m)).unwrap_or(0.0);
        }
        match (map, track) {
            (Some(map), track) => cfg.anomaly = Some(AnomalySpec { map, track }),
            (None, Some(_)) => return Err(SimError::Config("track given without map".into())),
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Roll, pitch and yaw (rad) at time `t` seconds into the pattern.
pub fn attitude_at(p: &PatternSpec, t: f64) -> [f64; 3] {
    let total_legs = p.n_legs * p.repeats;
    let leg = ((t / p.leg_length_s).floor() as usize).min(total_legs - 1);
    let tau = t - leg as f64 * p.leg_length_s;

    let heading = |leg: usize| -> f64 {
        match p.kind {
            PatternKind::Straight => 0.0,
            PatternKind::Box => {
                let dir = if (leg / p.n_legs).is_multiple_of(2) { 1.0 } else { -1.0 };
                dir * (leg % p.n_legs) as f64 * 2.0 * PI / p.n_legs as f64
            }
        }
    };
    let mut yaw = heading(leg);
    if leg > 0 && tau < p.turn_s {
        let prev = heading(leg - 1);
        let blend = 0.5 * (1.0 - (PI * tau / p.turn_s).cos());
        yaw = prev + wrap_pi(yaw - prev) * blend;
    }

    let mut att = [0.0, 0.0, 0.0];
    if tau >= p.turn_s {
        let window = (p.leg_length_s - p.turn_s) / 3.0;
        let s_all = tau - p.turn_s;
        let k = ((s_all / window).floor() as usize).min(2);
        let s = s_all - k as f64 * window;
        let amp = [p.roll_amp_deg, p.pitch_amp_deg, p.yaw_amp_deg][k].to_radians();
        let taper = (PI * s / window).sin().powi(2);
        att[k] = amp * (2.0 * PI * p.maneuver_hz * s).sin() * taper;
    }
    [att[0], att[1], wrap_pi(yaw + att[2])]
}

/// Navigation-frame vector expressed in the aircraft frame, for body-to-nav
/// rotation `Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn nav_to_body(v: [f64; 3], attitude: [f64; 3]) -> [f64; 3] {
    let [roll, pitch, yaw] = attitude;
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    // Rz^T
    let a = [cy * v[0] + sy * v[1], -sy * v[0] + cy * v[1], v[2]];
    // Ry^T
    let b = [cp * a[0] - sp * a[2], a[1], sp * a[0] + cp * a[2]];
    // Rx^T
    [b[0], cr * b[1] + sr * b[2], -sr * b[1] + cr * b[2]]
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64, n: usize) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0, sigma).expect("sigma checked non-negative");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Simulates the configured pattern. With an anomaly map and track, the
/// map value along the track is added to the earth field magnitude.
pub fn simulate_flight(cfg: &SimConfig) -> Result<(FlightFrame, SimTruth), SimError> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let fs = cfg.fs_hz;
    let time: Vec<f64> = (0..n).map(|i| cfg.start_time_s + i as f64 / fs).collect();
    let rel_t = |i: usize| i as f64 / fs;

    let attitude: Vec<[f64; 3]> = (0..n).map(|i| attitude_at(&cfg.pattern, rel_t(i))).collect();
    let flux_true: Vec<[f64; 3]> = attitude.iter().map(|&a| nav_to_body(cfg.earth_field_nt, a)).collect();
    let comp = |k: usize| flux_true.iter().map(|f| f[k]).collect::<Vec<f64>>();
    let u = DirectionCosines::from_flux(&comp(0), &comp(1), &comp(2))?;
    let design = build_design_matrix(&u)?;

    let core = cfg.earth_field_nt.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h_et_true = vec![core; n];
    let mut position: Option<(Vec<f64>, Vec<f64>)> = None;
    if let Some(AnomalySpec { map, track: Some(track) }) = &cfg.anomaly {
        let itp = build_interpolant(map, InterpMethod::Bilinear);
        let (mut lons, mut lats) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for (i, h) in h_et_true.iter_mut().enumerate() {
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let (lon, lat) = track.at(frac);
            *h += itp.interp_at(lon, lat).map_err(SimError::TrackOutOfBounds)?;
            lons.push(lon);
            lats.push(lat);
        }
        position = Some((lats, lons));
    }

    let mut h_at_true = Vec::with_capacity(cfg.sensors.len());
    let mut model_error_true = Vec::with_capacity(cfg.sensors.len());
    let mut scalars = Vec::with_capacity(cfg.sensors.len());
    for (k, sensor) in cfg.sensors.iter().enumerate() {
        let h_at = design.apply(&sensor.theta);
        let disturbance = if sensor.model_error_nt > 0.0 {
            let mut rng = rng_for(cfg.seed, 100 + k as u64);
            let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.15..0.8), rng.gen_range(0.0..2.0 * PI))).collect();
            u.rows()
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let t = rel_t(i);
                    sensor.model_error_nt
                        * row.iter().zip(&terms).map(|(ui, (f, ph))| ui * (2.0 * PI * f * t + ph).sin()).sum::<f64>()
                })
                .collect()
        } else {
            vec![0.0; n]
        };
        let noise = gaussian(&mut rng_for(cfg.seed, 1 + k as u64), cfg.noise.scalar_sigma_nt, n);
        let scalar: Vec<f64> = (0..n).map(|i| h_et_true[i] + h_at[i] + disturbance[i] + noise[i]).collect();
        scalars.push(scalar);
        h_at_true.push(h_at);
        model_error_true.push(disturbance);
    }

    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    cols.push((LINE.into(), vec![cfg.line.as_f64(); n]));
    cols.push((TIME.into(), time.clone()));
    if let Some((lats, lons)) = position {
        cols.push(("LAT".into(), lats));
        cols.push(("LONG".into(), lons));
    }
    cols.push(("ROLL".into(), attitude.iter().map(|a| a[0].to_degrees()).collect()));
    cols.push(("PITCH".into(), attitude.iter().map(|a| a[1].to_degrees()).collect()));
    cols.push(("AZIMUTH".into(), attitude.iter().map(|a| a[2].to_degrees()).collect()));
    for (k, s) in scalars.into_iter().enumerate() {
        cols.push((scalar_channel(k), s));
    }
    cols.push((TRUTH_CHANNEL.into(), h_et_true.clone()));
    for (g, gate) in FLUXGATES.iter().enumerate() {
        let mut tot = vec![0.0; n];
        for (a, axis) in ["X", "Y", "Z"].iter().enumerate() {
            let noise = gaussian(&mut rng_for(cfg.seed, 200 + 3 * g as u64 + a as u64), cfg.noise.flux_sigma_nt, n);
            let v: Vec<f64> = flux_true.iter().zip(&noise).map(|(f, e)| f[a] + e).collect();
            for (t, x) in tot.iter_mut().zip(&v) {
                *t += x * x;
            }
            cols.push((format!("FLUX{gate}_{axis}"), v));
        }
        cols.push((format!("FLUX{gate}_TOT"), tot.into_iter().map(f64::sqrt).collect()));
    }
    for name in PLACEHOLDER_CHANNELS {
        cols.push((name.into(), vec![0.0; n]));
    }

    let frame = FlightFrame::new(cols, Some(fs))?;
    Ok((frame, SimTruth { attitude, h_et_true, h_at_true, model_error_true, flux_true }))
}

/// Straight-and-level flight (with the configured small maneuvers) along
/// `track` over the config's anomaly map.
pub fn simulate_survey_line(cfg: &SimConfig, track: &Track) -> Result<(FlightFrame, SimTruth), SimError> {
    let anomaly = cfg.anomaly.as_ref().ok_or(SimError::NoAnomalyMap)?;
    let mut survey = cfg.clone();
    survey.pattern.kind = PatternKind::Straight;
    survey.anomaly = Some(AnomalySpec { map: anomaly.map.clone(), track: Some(*track) });
    simulate_flight(&survey)
}
