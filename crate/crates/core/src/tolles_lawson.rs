//! Tolles-Lawson aircraft field model: direction cosines, the 18-term design
//! matrix, coefficient estimation and compensation.
//!
//! Column and coefficient order is fixed:
//!
//! | group     | labels                                       | feature   |
//! |-----------|----------------------------------------------|-----------|
//! | permanent | `p1 p2 p3`                                   | `u_i`     |
//! | induced   | `a11 a12 a13 a22 a23 a33` (i <= j)           | `u_i u_j` |
//! | eddy      | `b11 b12 b13 b21 b22 b23 b31 b32 b33` (i, j) | `u_i' u_j`|
//!
//! `u_i'` is the per-sample central difference of `u_i` (no division by the
//! sample interval), so eddy coefficients carry a factor of the sample rate.

use std::fmt::Write as _;

use thiserror::Error;

use crate::linalg::QrSystem;
use crate::scalar::{c, Scalar};
use crate::signal::{central_fdm, Bandpass, BandpassSpec, SignalError};

pub const N_TERMS: usize = 18;
pub const N_PERMANENT: usize = 3;
pub const N_INDUCED: usize = 6;
pub const N_EDDY: usize = 9;

pub const TERM_LABELS: [&str; N_TERMS] = [
    "p1", "p2", "p3", //
    "a11", "a12", "a13", "a22", "a23", "a33", //
    "b11", "b12", "b13", "b21", "b22", "b23", "b31", "b32", "b33",
];

/// `(i, j)` index pairs of the induced block, upper triangle in row order.
pub const INDUCED_PAIRS: [(usize, usize); N_INDUCED] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

// diagonal induced terms; their filtered columns sum to the filtered constant 1
const A11: usize = 3;
const A22: usize = 6;
const A33: usize = 8;

/// Minimum samples for a calibration fit.
pub const MIN_FIT_SAMPLES: usize = 51;

#[derive(Debug, Error, PartialEq)]
pub enum TlError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("input contains NaN")]
    NanInput,
    #[error("zero field magnitude at sample {0}")]
    ZeroMagnitude(usize),
    #[error("need at least {min} samples, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("ridge lambda must be finite and >= 0, got {0}")]
    InvalidLambda(f64),
    #[error(
        "singular normal matrix (condition estimate {condition:e}); \
         calibration maneuvers do not excite all terms, try a ridge lambda > 0"
    )]
    Singular { condition: f64 },
    #[error("coefficient file: {0}")]
    Format(String),
}

/// Which physical contribution a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermGroup {
    Permanent,
    Induced,
    Eddy,
}

impl TermGroup {
    pub fn of(index: usize) -> Self {
        match index {
            0..=2 => Self::Permanent,
            3..=8 => Self::Induced,
            _ => Self::Eddy,
        }
    }
}

/// Unit vectors of the measured field in the aircraft frame, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCosines<T> {
    rows: Vec<[T; 3]>,
}

impl<T: Scalar> DirectionCosines<T> {
    /// Normalises each fluxgate sample `(bx, by, bz)`.
    pub fn from_flux(bx: &[T], by: &[T], bz: &[T]) -> Result<Self, TlError> {
        check_same_len(&[bx.len(), by.len(), bz.len()])?;
        let mut rows = Vec::with_capacity(bx.len());
        for (i, ((&x, &y), &z)) in bx.iter().zip(by).zip(bz).enumerate() {
            if x.is_nan() || y.is_nan() || z.is_nan() {
                return Err(TlError::NanInput);
            }
            let norm = (x * x + y * y + z * z).sqrt();
            if norm == T::zero() {
                return Err(TlError::ZeroMagnitude(i));
            }
            rows.push([x / norm, y / norm, z / norm]);
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[T; 3]] {
        &self.rows
    }

    pub fn component(&self, axis: usize) -> Vec<T> {
        self.rows.iter().map(|r| r[axis]).collect()
    }
}

/// `N x 18` feature matrix, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> [T; N_TERMS] {
        std::array::from_fn(|j| self.columns[j][i])
    }

    /// `D theta`.
    pub fn apply(&self, theta: &[T; N_TERMS]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_rows()];
        for (col, &t) in self.columns.iter().zip(theta) {
            if t == T::zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(col) {
                *o = *o + v * t;
            }
        }
        out
    }

    /// Column-wise zero-phase bandpass.
    pub fn filtered(&self, filter: &Bandpass) -> Result<Self, SignalError> {
        let columns = self.columns.iter().map(|col| filter.apply(col)).collect::<Result<_, _>>()?;
        Ok(Self { columns })
    }
}

/// Builds the permanent, induced and eddy feature columns from `u`.
pub fn build_design_matrix<T: Scalar>(u: &DirectionCosines<T>) -> Result<DesignMatrix<T>, TlError> {
    if u.len() < 3 {
        return Err(TlError::TooShort { len: u.len(), min: 3 });
    }
    let comps: [Vec<T>; 3] = std::array::from_fn(|k| u.component(k));
    let mut derivs = Vec::with_capacity(3);
    for comp in &comps {
        derivs.push(central_fdm(comp)?);
    }

    let mut columns = Vec::with_capacity(N_TERMS);
    columns.extend(comps.iter().cloned());
    for &(i, j) in &INDUCED_PAIRS {
        columns.push(comps[i].iter().zip(&comps[j]).map(|(&a, &b)| a * b).collect());
    }
    for di in &derivs {
        for cj in &comps {
            columns.push(di.iter().zip(cj).map(|(&a, &b)| a * b).collect());
        }
    }
    Ok(DesignMatrix { columns })
}

/// Fitted coefficient vector together with the fit settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TlCoefficients<T> {
    pub theta: [T; N_TERMS],
    pub ridge_lambda: f64,
    pub band: BandpassSpec,
    /// Feature scale over the smallest singular value of the filtered design;
    /// `None` when loaded from file.
    pub condition: Option<f64>,
}

impl<T: Scalar> TlCoefficients<T> {
    pub fn new(theta: [T; N_TERMS], band: BandpassSpec) -> Self {
        Self { theta, ridge_lambda: 0.0, band, condition: None }
    }

    pub fn zeros(band: BandpassSpec) -> Self {
        Self::new([T::zero(); N_TERMS], band)
    }

    pub fn permanent(&self) -> &[T] {
        &self.theta[..N_PERMANENT]
    }

    pub fn induced(&self) -> &[T] {
        &self.theta[N_PERMANENT..N_PERMANENT + N_INDUCED]
    }

    pub fn eddy(&self) -> &[T] {
        &self.theta[N_PERMANENT + N_INDUCED..]
    }

    /// Symmetric induced matrix `A` with `u^T A u` equal to the induced terms.
    /// Off-diagonal entries are half the fitted cross-term coefficients.
    pub fn induced_matrix(&self) -> [[T; 3]; 3] {
        let half = c::<T>(0.5);
        let mut a = [[T::zero(); 3]; 3];
        for (&(i, j), &v) in INDUCED_PAIRS.iter().zip(self.induced()) {
            if i == j {
                a[i][i] = v;
            } else {
                a[i][j] = v * half;
                a[j][i] = v * half;
            }
        }
        a
    }

    /// Eddy matrix `B`, row `i` multiplying `u_i'`.
    pub fn eddy_matrix(&self) -> [[T; 3]; 3] {
        let e = self.eddy();
        std::array::from_fn(|i| std::array::from_fn(|j| e[3 * i + j]))
    }

    /// Trace of the induced matrix.
    pub fn induced_trace(&self) -> T {
        self.theta[A11] + self.theta[A22] + self.theta[A33]
    }

    /// The coefficients with the induced trace removed.
    ///
    /// Since `u1^2 + u2^2 + u3^2 = 1`, the trace only adds a constant to the
    /// modelled field and cannot be separated from the earth field's DC level.
    /// This is the part of `theta` a calibration can determine.
    pub fn identifiable(&self) -> Self {
        let shift = self.induced_trace() / c::<T>(3.0);
        let mut out = self.clone();
        for k in [A11, A22, A33] {
            out.theta[k] = out.theta[k] - shift;
        }
        out
    }

    pub fn norm(&self) -> T {
        self.theta.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
    }

    /// Text form: header lines `lambda=`, `pass1=`, `pass2=`, `fs=`, then one
    /// `label,value` line per term. An `order=` line is added only when the
    /// filter order differs from the default.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "lambda={}", self.ridge_lambda).unwrap();
        writeln!(s, "pass1={}", self.band.pass1_hz).unwrap();
        writeln!(s, "pass2={}", self.band.pass2_hz).unwrap();
        writeln!(s, "fs={}", self.band.fs_hz).unwrap();
        if self.band.order != BandpassSpec::DEFAULT_ORDER {
            writeln!(s, "order={}", self.band.order).unwrap();
        }
        for (label, v) in TERM_LABELS.iter().zip(&self.theta) {
            writeln!(s, "{label},{v}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TlError> {
        let fmt = |m: String| TlError::Format(m);
        let num = |key: &str, v: &str| -> Result<f64, TlError> {
            v.trim().parse::<f64>().map_err(|_| fmt(format!("bad value for {key}: {v:?}")))
        };
        let (mut lambda, mut pass1, mut pass2, mut fs) = (None, None, None, None);
        let mut order = BandpassSpec::DEFAULT_ORDER;
        let mut theta = [T::zero(); N_TERMS];
        let mut next_term = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, v)) = line.split_once('=') {
                match key.trim() {
                    "lambda" => lambda = Some(num("lambda", v)?),
                    "pass1" => pass1 = Some(num("pass1", v)?),
                    "pass2" => pass2 = Some(num("pass2", v)?),
                    "fs" => fs = Some(num("fs", v)?),
                    "order" => {
                        order = v.trim().parse().map_err(|_| fmt(format!("bad order {v:?}")))?;
                    }
                    other => return Err(fmt(format!("line {}: unknown header {other:?}", lineno + 1))),
                }
            } else if let Some((label, v)) = line.split_once(',') {
                let expected = TERM_LABELS
                    .get(next_term)
                    .ok_or_else(|| fmt(format!("line {}: more than {N_TERMS} terms", lineno + 1)))?;
                if label.trim() != *expected {
                    return Err(fmt(format!("line {}: expected label {expected}, found {:?}", lineno + 1, label.trim())));
                }
                theta[next_term] = T::from_f64(num(expected, v)?).unwrap();
                next_term += 1;
            } else {
                return Err(fmt(format!("line {}: unrecognised {line:?}", lineno + 1)));
            }
        }
        if next_term != N_TERMS {
            return Err(fmt(format!("expected {N_TERMS} terms, found {next_term}")));
        }
        let missing = |k: &str| fmt(format!("missing header {k}="));
        let band = BandpassSpec::new(
            pass1.ok_or_else(|| missing("pass1"))?,
            pass2.ok_or_else(|| missing("pass2"))?,
            fs.ok_or_else(|| missing("fs"))?,
            order,
        )?;
        let ridge_lambda = lambda.ok_or_else(|| missing("lambda"))?;
        if !(ridge_lambda.is_finite() && ridge_lambda >= 0.0) {
            return Err(TlError::InvalidLambda(ridge_lambda));
        }
        Ok(Self { theta, ridge_lambda, band, condition: None })
    }
}

fn check_same_len(lens: &[usize]) -> Result<(), TlError> {
    if lens.windows(2).any(|w| w[0] != w[1]) {
        return Err(TlError::LengthMismatch(format!("{lens:?}")));
    }
    Ok(())
}

/// Largest condition estimate accepted for an unregularised fit.
pub fn singular_threshold<T: Scalar>() -> f64 {
    T::epsilon().to_f64_lossy().powf(-2.0 / 3.0)
}

/// Estimates the Tolles-Lawson coefficients from a calibration segment.
///
/// Features and scalar measurements are bandpass filtered with `band`, then
/// `theta = (D^T D + lambda I)^-1 D^T y` is solved by QR of the stacked system
/// `[D; sqrt(lambda) I] theta = [y; 0]`.
///
/// With `lambda = 0` the solution is the minimum-norm one: the filtered
/// `a11`, `a22`, `a33` columns sum to the filtered constant, which is zero,
/// so the fit is made over the 17 remaining directions with zero induced
/// trace. This is also the `lambda -> 0+` limit of the ridge solution.
pub fn fit_coefficients<T: Scalar>(
    scalar_mag: &[T],
    flux_x: &[T],
    flux_y: &[T],
    flux_z: &[T],
    band: &BandpassSpec,
    ridge_lambda: f64,
) -> Result<TlCoefficients<T>, TlError> {
    check_same_len(&[scalar_mag.len(), flux_x.len(), flux_y.len(), flux_z.len()])?;
    let n = scalar_mag.len();
    if n < MIN_FIT_SAMPLES {
        return Err(TlError::TooShort { len: n, min: MIN_FIT_SAMPLES });
    }
    if !(ridge_lambda.is_finite() && ridge_lambda >= 0.0) {
        return Err(TlError::InvalidLambda(ridge_lambda));
    }
    if scalar_mag.iter().any(|v| v.is_nan()) {
        return Err(TlError::NanInput);
    }

    let u = DirectionCosines::from_flux(flux_x, flux_y, flux_z)?;
    let raw = build_design_matrix(&u)?;
    let filter = Bandpass::design(band)?;
    let filtered = raw.filtered(&filter)?;
    let y = filter.apply(scalar_mag)?;

    // trace-free reparameterisation: a33 = -a11 - a22
    let reduce = |m: &DesignMatrix<T>| -> Vec<Vec<T>> {
        let cols = m.columns();
        let mut out = Vec::with_capacity(N_TERMS - 1);
        for (k, col) in cols.iter().enumerate() {
            match k {
                A11 | A22 => out.push(col.iter().zip(&cols[A33]).map(|(&a, &b)| a - b).collect()),
                A33 => {}
                _ => out.push(col.clone()),
            }
        }
        out
    };
    let reduced = reduce(&filtered);
    let qr = QrSystem::factor(&reduced, &y);
    let sv = qr.singular_values();
    let sigma_min = sv.last().copied().unwrap_or_else(T::zero).to_f64_lossy();
    let scale = reduce(&raw)
        .iter()
        .flat_map(|col| col.iter())
        .fold(0.0f64, |s, &v| s + v.to_f64_lossy().powi(2))
        .sqrt();
    let condition = if sigma_min > 0.0 { scale / sigma_min } else { f64::INFINITY };

    let theta = if ridge_lambda == 0.0 {
        if !(condition <= singular_threshold::<T>()) {
            return Err(TlError::Singular { condition });
        }
        let z = qr.solve().ok_or(TlError::Singular { condition })?;
        let mut theta = [T::zero(); N_TERMS];
        let mut it = z.into_iter();
        for (k, slot) in theta.iter_mut().enumerate() {
            if k != A33 {
                *slot = it.next().unwrap();
            }
        }
        theta[A33] = -(theta[A11] + theta[A22]);
        theta
    } else {
        let root = T::from_f64(ridge_lambda.sqrt()).unwrap();
        let stacked: Vec<Vec<T>> = filtered
            .columns()
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let mut v = col.clone();
                v.extend((0..N_TERMS).map(|k| if k == j { root } else { T::zero() }));
                v
            })
            .collect();
        let mut rhs = y.clone();
        rhs.extend(std::iter::repeat_n(T::zero(), N_TERMS));
        let z = QrSystem::factor(&stacked, &rhs).solve().ok_or(TlError::Singular { condition })?;
        std::array::from_fn(|k| z[k])
    };

    Ok(TlCoefficients { theta, ridge_lambda, band: *band, condition: Some(condition) })
}

/// Modelled aircraft field `Delta theta` on unfiltered features.
pub fn predict_aircraft_field<T: Scalar>(
    coeffs: &TlCoefficients<T>,
    flux_x: &[T],
    flux_y: &[T],
    flux_z: &[T],
) -> Result<Vec<T>, TlError> {
    let u = DirectionCosines::from_flux(flux_x, flux_y, flux_z)?;
    Ok(build_design_matrix(&u)?.apply(&coeffs.theta))
}

/// Scalar measurement minus the modelled aircraft field.
pub fn compensate<T: Scalar>(
    coeffs: &TlCoefficients<T>,
    scalar_mag: &[T],
    flux_x: &[T],
    flux_y: &[T],
    flux_z: &[T],
) -> Result<Vec<T>, TlError> {
    check_same_len(&[scalar_mag.len(), flux_x.len()])?;
    if scalar_mag.iter().any(|v| v.is_nan()) {
        return Err(TlError::NanInput);
    }
    let aircraft = predict_aircraft_field(coeffs, flux_x, flux_y, flux_z)?;
    Ok(scalar_mag.iter().zip(&aircraft).map(|(&h, &a)| h - a).collect())
}
