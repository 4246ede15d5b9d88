//! Signal primitives used by calibration and evaluation: zero-phase Butterworth
//! bandpass filtering, per-sample central differences and linear detrending.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::scalar::{c, has_nan, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("input contains NaN")]
    NanInput,
    #[error("input too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("invalid bandpass spec: {0}")]
    InvalidSpec(String),
}

/// Passband edges, sample rate and total filter order of the calibration filter.
///
/// `order` is the order of the bandpass transfer function, so it must be even;
/// the analog lowpass prototype has order `order / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub pass1_hz: f64,
    pub pass2_hz: f64,
    pub fs_hz: f64,
    pub order: usize,
}

impl BandpassSpec {
    pub const DEFAULT_PASS1_HZ: f64 = 0.1;
    pub const DEFAULT_PASS2_HZ: f64 = 0.9;
    pub const DEFAULT_ORDER: usize = 4;

    pub fn new(pass1_hz: f64, pass2_hz: f64, fs_hz: f64, order: usize) -> Result<Self, SignalError> {
        let spec = Self { pass1_hz, pass2_hz, fs_hz, order };
        spec.validate()?;
        Ok(spec)
    }

    /// The 0.1-0.9 Hz calibration band at the given sample rate.
    pub fn calibration(fs_hz: f64) -> Result<Self, SignalError> {
        Self::new(Self::DEFAULT_PASS1_HZ, Self::DEFAULT_PASS2_HZ, fs_hz, Self::DEFAULT_ORDER)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let Self { pass1_hz, pass2_hz, fs_hz, order } = *self;
        if !(pass1_hz.is_finite() && pass2_hz.is_finite() && fs_hz.is_finite()) {
            return Err(SignalError::InvalidSpec("non-finite frequency".into()));
        }
        if !(pass1_hz > 0.0 && pass1_hz < pass2_hz && pass2_hz < fs_hz / 2.0) {
            return Err(SignalError::InvalidSpec(format!(
                "need 0 < pass1 < pass2 < fs/2, got pass1={pass1_hz} pass2={pass2_hz} fs={fs_hz}"
            )));
        }
        if order == 0 || order % 2 != 0 {
            return Err(SignalError::InvalidSpec(format!("order must be a positive even integer, got {order}")));
        }
        Ok(())
    }

    /// Minimum signal length accepted by [`bandpass`].
    pub fn min_len(&self) -> usize {
        3 * self.order + 1
    }
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self {
            pass1_hz: Self::DEFAULT_PASS1_HZ,
            pass2_hz: Self::DEFAULT_PASS2_HZ,
            fs_hz: 10.0,
            order: Self::DEFAULT_ORDER,
        }
    }
}

/// One second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Transposed direct form II state that holds the section at rest under a
    /// unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }

    fn response(&self, f_hz: f64, fs_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / fs_hz;
        let zi = Complex64::from_polar(1.0, -w);
        let zi2 = zi * zi;
        (self.b[0] + self.b[1] * zi + self.b[2] * zi2) / (self.a[0] + self.a[1] * zi + self.a[2] * zi2)
    }
}

/// A designed Butterworth bandpass, applied forward and backward for zero phase.
#[derive(Debug, Clone)]
pub struct Bandpass {
    spec: BandpassSpec,
    sections: Vec<Biquad>,
    zi: Vec<[f64; 2]>,
    settle: usize,
}

impl Bandpass {
    pub fn design(spec: &BandpassSpec) -> Result<Self, SignalError> {
        spec.validate()?;
        let n = spec.order / 2;
        let fs2 = 2.0 * spec.fs_hz;
        // prewarped analog edges
        let w1 = fs2 * (PI * spec.pass1_hz / spec.fs_hz).tan();
        let w2 = fs2 * (PI * spec.pass2_hz / spec.fs_hz).tan();
        let bw = w2 - w1;
        let w0_sq = w1 * w2;

        let mut analog = Vec::with_capacity(2 * n);
        for k in 0..n {
            let p = Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64);
            let half = p * bw / 2.0;
            let disc = (half * half - w0_sq).sqrt();
            analog.push(half + disc);
            analog.push(half - disc);
        }

        let fs2c = Complex64::new(fs2, 0.0);
        let mut gain = Complex64::new((bw * fs2).powi(n as i32), 0.0);
        let mut poles = Vec::with_capacity(2 * n);
        for s in &analog {
            gain /= fs2c - s;
            poles.push((fs2c + s) / (fs2c - s));
        }

        let mut sections = Vec::with_capacity(n);
        let mut real_poles = Vec::new();
        for p in &poles {
            let tol = 1e-12 * p.norm().max(1.0);
            if p.im > tol {
                sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * p.re, p.norm_sqr()] });
            } else if p.im.abs() <= tol {
                real_poles.push(p.re);
            }
        }
        real_poles.sort_by(|a, b| a.total_cmp(b));
        for pair in real_poles.chunks(2) {
            let (r1, r2) = (pair[0], pair[1]);
            sections.push(Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -(r1 + r2), r1 * r2] });
        }
        debug_assert_eq!(sections.len(), n);
        let gain = gain.re;
        for c in sections[0].b.iter_mut() {
            *c *= gain;
        }

        let mut zi = Vec::with_capacity(n);
        let mut scale = 1.0;
        for s in &sections {
            let [z1, z2] = s.step_state();
            zi.push([z1 * scale, z2 * scale]);
            scale *= s.dc_gain();
        }

        // samples for the slowest pole to decay below double-precision rounding
        let r_max = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let settle = if r_max <= 0.0 {
            0
        } else {
            ((1e-17f64).ln() / r_max.ln()).ceil().clamp(0.0, 1e6) as usize
        };

        Ok(Self { spec: *spec, sections, zi, settle })
    }

    pub fn spec(&self) -> &BandpassSpec {
        &self.spec
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Complex response of a single (forward) pass at `f_hz`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        self.sections.iter().map(|s| s.response(f_hz, self.spec.fs_hz)).product()
    }

    /// Zero-phase filtering of `x`.
    ///
    /// Both ends are extended by an odd reflection of `3 * order` samples,
    /// then held constant long enough for the slowest pole to settle. The
    /// forward pass starts from the step steady state of the first padded
    /// sample, so constants map to zero exactly.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, SignalError> {
        let n = x.len();
        let min = self.spec.min_len();
        if n < min {
            return Err(SignalError::TooShort { len: n, min });
        }
        if has_nan(x) {
            return Err(SignalError::NanInput);
        }
        let reflect = 3 * self.spec.order;
        let front = self.settle + reflect;
        let two = c::<T>(2.0);

        let mut ext = Vec::with_capacity(n + 2 * front);
        let head = two * x[0] - x[reflect];
        ext.extend(std::iter::repeat_n(head, self.settle));
        ext.extend((1..=reflect).rev().map(|i| two * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=reflect).map(|i| two * x[n - 1] - x[n - 1 - i]));
        let tail = two * x[n - 1] - x[n - 1 - reflect];
        ext.extend(std::iter::repeat_n(tail, self.settle));

        self.run(&mut ext);
        ext.reverse();
        self.run(&mut ext);
        ext.reverse();

        Ok(ext[front..front + n].to_vec())
    }

    fn run<T: Scalar>(&self, buf: &mut [T]) {
        let x0 = buf[0];
        for (sec, zi) in self.sections.iter().zip(&self.zi) {
            let [b0, b1, b2] = sec.b.map(c::<T>);
            let (a1, a2) = (c::<T>(sec.a[1]), c::<T>(sec.a[2]));
            let mut z1 = c::<T>(zi[0]) * x0;
            let mut z2 = c::<T>(zi[1]) * x0;
            for v in buf.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }
}

/// Zero-phase bandpass of `x` with a freshly designed filter.
pub fn bandpass<T: Scalar>(x: &[T], spec: &BandpassSpec) -> Result<Vec<T>, SignalError> {
    Bandpass::design(spec)?.apply(x)
}

/// Per-sample gradient: central differences inside, one-sided at the ends.
pub fn central_fdm<T: Scalar>(x: &[T]) -> Result<Vec<T>, SignalError> {
    check_finite_len(x, 3)?;
    let n = x.len();
    let half = c::<T>(0.5);
    let mut out = Vec::with_capacity(n);
    out.push(x[1] - x[0]);
    out.extend(x.windows(3).map(|w| (w[2] - w[0]) * half));
    out.push(x[n - 1] - x[n - 2]);
    Ok(out)
}

fn check_finite_len<T: Scalar>(x: &[T], min: usize) -> Result<(), SignalError> {
    if x.len() < min {
        return Err(SignalError::TooShort { len: x.len(), min });
    }
    if has_nan(x) {
        return Err(SignalError::NanInput);
    }
    Ok(())
}

/// Mean, slope and centre index of the least-squares line over the sample index.
fn centred_fit<T: Scalar>(x: &[T]) -> (T, T, T) {
    let n = x.len();
    let nf = T::from_usize(n).unwrap();
    let t_mean = c::<T>((n - 1) as f64 / 2.0);
    let mean = x.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (i, &v) in x.iter().enumerate() {
        let t = T::from_usize(i).unwrap() - t_mean;
        sxy = sxy + t * (v - mean);
        sxx = sxx + t * t;
    }
    (mean, sxy / sxx, t_mean)
}

/// Least-squares affine fit over the sample index, as `(value at index 0, slope)`.
pub fn linear_trend<T: Scalar>(x: &[T]) -> Result<(T, T), SignalError> {
    check_finite_len(x, 2)?;
    let (mean, slope, t_mean) = centred_fit(x);
    Ok((mean - slope * t_mean, slope))
}

/// `x` minus its least-squares line over the sample index.
pub fn detrend<T: Scalar>(x: &[T]) -> Result<Vec<T>, SignalError> {
    check_finite_len(x, 2)?;
    let (mean, slope, t_mean) = centred_fit(x);
    let mut out: Vec<T> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - mean) - slope * (T::from_usize(i).unwrap() - t_mean))
        .collect();
    // second pass pulls the residual mean down to rounding level
    let resid_mean = out.iter().fold(T::zero(), |a, &v| a + v) / T::from_usize(x.len()).unwrap();
    for v in out.iter_mut() {
        *v = *v - resid_mean;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    fn amplitude_mid(y: &[f64]) -> f64 {
        let n = y.len();
        y[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn spec_validation() {
        assert!(BandpassSpec::new(0.1, 0.9, 10.0, 4).is_ok());
        assert!(BandpassSpec::new(0.9, 0.1, 10.0, 4).is_err());
        assert!(BandpassSpec::new(0.1, 6.0, 10.0, 4).is_err());
        assert!(BandpassSpec::new(0.0, 0.9, 10.0, 4).is_err());
        assert!(BandpassSpec::new(0.1, 0.9, 10.0, 3).is_err());
        assert!(BandpassSpec::new(0.1, 0.9, 10.0, 0).is_err());
    }

    #[test]
    fn design_has_one_section_per_prototype_pole_and_is_stable() {
        for order in [2, 4, 6, 8] {
            let bp = Bandpass::design(&BandpassSpec::new(0.1, 0.9, 10.0, order).unwrap()).unwrap();
            assert_eq!(bp.sections().len(), order / 2);
            for s in bp.sections() {
                // roots of z^2 + a1 z + a2 inside the unit circle
                assert!(s.a[2].abs() < 1.0);
                assert!(s.a[1].abs() < 1.0 + s.a[2]);
            }
            // Butterworth bandpass peaks at unity at the geometric centre of the prewarped band
            let f_c = {
                let fs = 10.0;
                let w1 = (PI * 0.1 / fs).tan();
                let w2 = (PI * 0.9 / fs).tan();
                (w1 * w2).sqrt().atan() * fs / PI
            };
            assert_abs_diff_eq!(bp.response(f_c).norm(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dc_is_rejected() {
        let x = vec![42.0f64; 1000];
        let y = bandpass(&x, &BandpassSpec::default()).unwrap();
        assert_eq!(y.len(), 1000);
        assert!(y.iter().all(|v| v.abs() < 1e-3 * 42.0));
    }

    #[test]
    fn passband_and_stopband_gain() {
        let spec = BandpassSpec::default();
        let pass = bandpass(&sine(0.5, 10.0, 2000), &spec).unwrap();
        let a = amplitude_mid(&pass);
        assert!((0.95..=1.0).contains(&a), "passband amplitude {a}");
        let stop = bandpass(&sine(4.0, 10.0, 2000), &spec).unwrap();
        assert!(amplitude_mid(&stop) < 0.05);
    }

    #[test]
    fn in_band_sinusoid_keeps_phase() {
        let x = sine(0.5, 10.0, 2000);
        let y = bandpass(&x, &BandpassSpec::default()).unwrap();
        // best-aligned lag by cross-correlation over the interior
        let best = (-5i64..=5)
            .max_by(|&a, &b| {
                let cc = |lag: i64| -> f64 {
                    (500..1500).map(|i| x[i] * y[(i as i64 + lag) as usize]).sum()
                };
                cc(a).total_cmp(&cc(b))
            })
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn bandpass_rejects_bad_input() {
        let spec = BandpassSpec::default();
        assert_eq!(bandpass(&[1.0f64; 12], &spec), Err(SignalError::TooShort { len: 12, min: 13 }));
        let mut x = vec![0.0f64; 100];
        x[3] = f64::NAN;
        assert_eq!(bandpass(&x, &spec), Err(SignalError::NanInput));
        assert!(bandpass(&[0.0f64; 100], &BandpassSpec { order: 3, ..spec }).is_err());
    }

    #[test]
    fn short_signal_at_minimum_length() {
        let x: Vec<f64> = (0..13).map(|i| (i as f64 * 0.7).sin()).collect();
        let y = bandpass(&x, &BandpassSpec::default()).unwrap();
        assert_eq!(y.len(), 13);
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bandpass_in_single_precision() {
        let x: Vec<f32> = sine(0.5, 10.0, 2000).into_iter().map(|v| v as f32).collect();
        let y = bandpass(&x, &BandpassSpec::default()).unwrap();
        let a = y[500..1500].iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!((0.95..=1.0).contains(&a));
    }

    #[test]
    fn central_fdm_examples() {
        assert_eq!(central_fdm(&[0.0, 1.0, 2.0, 3.0]).unwrap(), vec![1.0; 4]);
        assert_eq!(central_fdm(&[5.0; 6]).unwrap(), vec![0.0; 6]);
        let sq: Vec<f64> = (0..5).map(|i| (i * i) as f64).collect();
        let d = central_fdm(&sq).unwrap();
        assert_eq!(&d[1..4], &[2.0, 4.0, 6.0]);
        assert_eq!(d[0], 1.0);
        assert_eq!(d[4], 7.0);
        assert!(central_fdm(&[1.0, 2.0]).is_err());
        assert_eq!(central_fdm(&[1.0, f64::NAN, 2.0]), Err(SignalError::NanInput));
    }

    #[test]
    fn detrend_examples() {
        assert_eq!(detrend(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(detrend(&[5.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(detrend(&[1.0]).is_err());
        assert_eq!(detrend(&[1.0, f64::NAN]), Err(SignalError::NanInput));

        let x: Vec<f64> = (0..1000).map(|i| 3.0 + 0.5 * i as f64 + (i as f64).sin()).collect();
        let s: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let d = detrend(&x).unwrap();
        let ds = detrend(&s).unwrap();
        for (a, b) in d.iter().zip(&ds) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let (_, slope) = linear_trend(&d).unwrap();
        assert!(slope.abs() < 1e-9);
    }

    #[test]
    fn linear_trend_recovers_line() {
        let x: Vec<f64> = (0..50).map(|i| -2.0 + 0.25 * i as f64).collect();
        let (a, b) = linear_trend(&x).unwrap();
        assert_abs_diff_eq!(a, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn detrend_f32() {
        let d = detrend(&[1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-6));
    }
}
