//! Columnar flight data: comma-delimited text with a header row of channel
//! names (`TIME`, `LINE`, `UNCOMPMAG1`, `FLUXB_X`, ...), one row per sample.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlightError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0}")]
    MissingColumn(String),
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: non-numeric cell {cell:?}")]
    NonNumeric { row: usize, column: String, cell: String },
    #[error("non-monotone time at sample {0}")]
    NonMonotoneTime(usize),
    #[error("need at least 2 samples, found {0}")]
    TooFewRows(usize),
    #[error("channel {name} has {found} samples, expected {expected}")]
    LengthMismatch { name: String, expected: usize, found: usize },
    #[error("sample rate {given} Hz disagrees with TIME spacing ({from_time} Hz)")]
    RateMismatch { given: f64, from_time: f64 },
    #[error("line {0} not present in flight")]
    EmptySelection(LineId),
    #[error("invalid line id {0:?}")]
    BadLineId(String),
}

/// Column holding the fiducial time, seconds past midnight UTC.
pub const TIME: &str = "TIME";
/// Column holding the line number `XXXX.YY`.
pub const LINE: &str = "LINE";

/// Relative tolerance between a stated sample rate and the TIME spacing.
pub const RATE_TOLERANCE: f64 = 0.01;

/// How many NaN positions a [`ChannelReport`] lists.
pub const MAX_REPORTED_NAN_INDICES: usize = 20;

/// Alternative spellings found in the field catalogue, mapped to the name the
/// loader stores.
pub const CHANNEL_ALIASES: [(&str, &str); 3] = [("CUR_COM1", "CUR_COMR"), ("V_BAT1", "V_BATR"), ("CUR_BAT1", "CUR_BATR")];

pub fn canonical_name(name: &str) -> &str {
    CHANNEL_ALIASES.iter().find(|(alias, _)| *alias == name).map_or(name, |(_, canon)| canon)
}

/// Whether a channel carries magnetometer data (scalar or fluxgate).
pub fn is_magnetometer_channel(name: &str) -> bool {
    ["UNCOMPMAG", "COMPMAG", "LAGMAG", "DCMAG", "IGRFMAG", "FLUX"].iter().any(|p| name.starts_with(p))
}

/// Line number `XXXX.YY` held as an integer count of hundredths, so matching
/// is exact on two fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineId(i64);

impl LineId {
    /// Line id of a `LINE` channel sample; `None` for non-finite values.
    pub fn from_value(v: f64) -> Option<Self> {
        v.is_finite().then(|| Self((v * 100.0).round() as i64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{:02}", self.0.abs() / 100, self.0.abs() % 100)
    }
}

impl FromStr for LineId {
    type Err = FlightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || FlightError::BadLineId(s.to_string());
        let (neg, body) = s.strip_prefix('-').map_or((false, s), |b| (true, b));
        let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
        if whole.is_empty() || frac.len() > 2 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = whole.parse().map_err(|_| bad())?;
        let frac: i64 = format!("{frac:0<2}").parse().map_err(|_| bad())?;
        let v = whole * 100 + frac;
        Ok(Self(if neg { -v } else { v }))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    name: String,
    values: Vec<f64>,
}

/// One flight (or flight line) of equal-length channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightFrame {
    line_id: Option<LineId>,
    sample_rate_hz: f64,
    channels: Vec<Channel>,
}

/// NaN summary of a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub name: String,
    pub nan_count: usize,
    /// First [`MAX_REPORTED_NAN_INDICES`] NaN positions.
    pub nan_indices: Vec<usize>,
    /// Extremes over finite values; NaN when there are none.
    pub min: f64,
    pub max: f64,
}

impl ChannelReport {
    pub fn truncated(&self) -> bool {
        self.nan_indices.len() < self.nan_count
    }
}

/// Rounds to `digits` significant digits, removing clock jitter from a
/// rate derived from time stamps.
fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl FlightFrame {
    /// Builds a frame from named columns. `TIME` must be present and strictly
    /// increasing. When `sample_rate_hz` is `None` the rate is taken from the
    /// median TIME spacing; otherwise it must agree with it within 1%.
    pub fn new(columns: Vec<(String, Vec<f64>)>, sample_rate_hz: Option<f64>) -> Result<Self, FlightError> {
        let mut channels: Vec<Channel> = Vec::with_capacity(columns.len());
        for (name, values) in columns {
            let name = canonical_name(&name).to_string();
            if channels.iter().any(|c| c.name == name) {
                return Err(FlightError::DuplicateColumn(name));
            }
            channels.push(Channel { name, values });
        }
        let time = channels
            .iter()
            .find(|c| c.name == TIME)
            .ok_or_else(|| FlightError::MissingColumn(TIME.into()))?;
        let n = time.values.len();
        if n < 2 {
            return Err(FlightError::TooFewRows(n));
        }
        for c in &channels {
            if c.values.len() != n {
                return Err(FlightError::LengthMismatch { name: c.name.clone(), expected: n, found: c.values.len() });
            }
        }
        for (i, w) in time.values.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(FlightError::NonMonotoneTime(i + 1));
            }
        }
        let dt = median(time.values.windows(2).map(|w| w[1] - w[0]).collect());
        let from_time = round_significant(1.0 / dt, 9);
        let sample_rate_hz = match sample_rate_hz {
            Some(given) => {
                if !(given > 0.0) || ((given - from_time) / from_time).abs() > RATE_TOLERANCE {
                    return Err(FlightError::RateMismatch { given, from_time });
                }
                given
            }
            None => from_time,
        };
        let line_id = channels.iter().find(|c| c.name == LINE).and_then(|c| {
            let first = LineId::from_value(c.values[0])?;
            c.values.iter().all(|&v| LineId::from_value(v) == Some(first)).then_some(first)
        });
        Ok(Self { line_id, sample_rate_hz, channels })
    }

    /// Parses comma-delimited text. `schema` names channels that must be
    /// present; every column in the file is loaded regardless.
    pub fn from_reader<R: Read>(reader: R, schema: Option<&[&str]>, sample_rate_hz: Option<f64>) -> Result<Self, FlightError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| canonical_name(h).to_string()).collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != names.len() {
                return Err(FlightError::Ragged { row: row + 1, expected: names.len(), found: record.len() });
            }
            for ((cell, col), name) in record.iter().zip(columns.iter_mut()).zip(&names) {
                let v = cell.parse::<f64>().map_err(|_| FlightError::NonNumeric {
                    row: row + 1,
                    column: name.clone(),
                    cell: cell.to_string(),
                })?;
                col.push(v);
            }
        }
        if !names.iter().any(|n| is_magnetometer_channel(n)) {
            return Err(FlightError::MissingColumn("magnetometer channel (UNCOMPMAG*, FLUX*, ...)".into()));
        }
        for &wanted in schema.unwrap_or(&[]) {
            let wanted = canonical_name(wanted);
            if !names.iter().any(|n| n == wanted) {
                return Err(FlightError::MissingColumn(wanted.to_string()));
            }
        }
        Self::new(names.into_iter().zip(columns).collect(), sample_rate_hz)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), FlightError> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        w.write_record(self.channels.iter().map(|c| c.name.as_str()))?;
        let mut row = Vec::with_capacity(self.channels.len());
        for i in 0..self.len() {
            row.clear();
            row.extend(self.channels.iter().map(|c| c.values[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn len(&self) -> usize {
        self.channels[0].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Line id when every `LINE` sample carries the same value.
    pub fn line_id(&self) -> Option<LineId> {
        self.line_id
    }

    pub fn time(&self) -> &[f64] {
        self.channel(TIME).expect("TIME checked at construction")
    }

    /// Channel by name; catalogue aliases resolve to the stored spelling.
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        let name = canonical_name(name);
        self.channels.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], FlightError> {
        self.channel(name).ok_or_else(|| FlightError::MissingColumn(canonical_name(name).to_string()))
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    /// A copy with `name` added (or replaced).
    pub fn with_channel(&self, name: &str, values: Vec<f64>) -> Result<Self, FlightError> {
        if values.len() != self.len() {
            return Err(FlightError::LengthMismatch { name: name.into(), expected: self.len(), found: values.len() });
        }
        let mut out = self.clone();
        let name = canonical_name(name);
        match out.channels.iter_mut().find(|c| c.name == name) {
            Some(c) => c.values = values,
            None => out.channels.push(Channel { name: name.to_string(), values }),
        }
        Ok(out)
    }

    /// Distinct line ids in order of first appearance.
    pub fn distinct_lines(&self) -> Vec<LineId> {
        let Some(line) = self.channel(LINE) else { return Vec::new() };
        let mut seen = BTreeSet::new();
        line.iter()
            .filter_map(|&v| LineId::from_value(v))
            .filter(|id| seen.insert(*id))
            .collect()
    }

    /// Rows whose `LINE` value equals `line_id`.
    pub fn select_line(&self, line_id: LineId) -> Result<Self, FlightError> {
        let line = self.require(LINE)?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| LineId::from_value(line[i]) == Some(line_id)).collect();
        if keep.is_empty() {
            return Err(FlightError::EmptySelection(line_id));
        }
        let channels = self
            .channels
            .iter()
            .map(|c| Channel { name: c.name.clone(), values: keep.iter().map(|&i| c.values[i]).collect() })
            .collect();
        Ok(Self { line_id: Some(line_id), sample_rate_hz: self.sample_rate_hz, channels })
    }
}

/// Reads a flight file.
pub fn load_flight(path: impl AsRef<Path>, schema: Option<&[&str]>, sample_rate_hz: Option<f64>) -> Result<FlightFrame, FlightError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| FlightError::Open { path: path.display().to_string(), source })?;
    FlightFrame::from_reader(std::io::BufReader::new(file), schema, sample_rate_hz)
}

/// One report per channel, in file order.
pub fn check_channels(frame: &FlightFrame) -> Vec<ChannelReport> {
    frame
        .channels
        .iter()
        .map(|c| {
            let mut nan_count = 0;
            let mut nan_indices = Vec::new();
            let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
            for (i, &v) in c.values.iter().enumerate() {
                if v.is_nan() {
                    nan_count += 1;
                    if nan_indices.len() < MAX_REPORTED_NAN_INDICES {
                        nan_indices.push(i);
                    }
                } else if v.is_finite() {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
            if min > max {
                (min, max) = (f64::NAN, f64::NAN);
            }
            ChannelReport { name: c.name.clone(), nan_count, nan_indices, min, max }
        })
        .collect()
}
