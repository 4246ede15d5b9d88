//! Magnetic anomaly grids: wavenumber-domain upward continuation,
//! bilinear/bicubic interpolation and gradients.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::scalar::{c, Scalar};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("map grid contains NaN")]
    NanInGrid,
    #[error("downward continuation (dz = {0} m) needs allow_downward and a wavenumber cutoff")]
    DownwardRejected(f64),
    #[error("point (lon {lon}, lat {lat}) outside map bounds")]
    OutOfBounds { lon: f64, lat: f64 },
    #[error("point (lon {lon}, lat {lat}) within one cell of the map edge")]
    NearBoundary { lon: f64, lat: f64 },
    #[error("map file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Relative tolerance on uniform axis spacing.
pub const AXIS_UNIFORMITY_TOL: f64 = 1e-6;

/// Regular lon/lat grid of anomaly values (nT). Row `j` holds latitude
/// `lat_deg[j]`, column `i` longitude `lon_deg[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap<T> {
    values: Vec<T>,
    lon_deg: Vec<T>,
    lat_deg: Vec<T>,
    pub dx_m: T,
    pub dy_m: T,
    pub alt_m: T,
}

fn check_axis<T: Scalar>(name: &str, axis: &[T]) -> Result<(), MapError> {
    if axis.len() < 2 {
        return Err(MapError::Invalid(format!("{name} axis needs at least 2 points")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(MapError::Invalid(format!("{name} axis has non-finite values")));
    }
    let step = (axis[axis.len() - 1] - axis[0]) / T::from_usize(axis.len() - 1).unwrap();
    if step <= T::zero() {
        return Err(MapError::Invalid(format!("{name} axis must be strictly ascending")));
    }
    for w in axis.windows(2) {
        let d = w[1] - w[0];
        if d <= T::zero() {
            return Err(MapError::Invalid(format!("{name} axis must be strictly ascending")));
        }
        if ((d - step) / step).abs().to_f64_lossy() > AXIS_UNIFORMITY_TOL.max(100.0 * T::epsilon().to_f64_lossy()) {
            return Err(MapError::Invalid(format!("{name} axis is not uniformly spaced")));
        }
    }
    Ok(())
}

impl<T: Scalar> AnomalyMap<T> {
    pub fn new(values: Vec<T>, lon_deg: Vec<T>, lat_deg: Vec<T>, dx_m: T, dy_m: T, alt_m: T) -> Result<Self, MapError> {
        check_axis("longitude", &lon_deg)?;
        check_axis("latitude", &lat_deg)?;
        if values.len() != lon_deg.len() * lat_deg.len() {
            return Err(MapError::Invalid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                lat_deg.len(),
                lon_deg.len()
            )));
        }
        if !(dx_m > T::zero() && dy_m > T::zero()) || !dx_m.is_finite() || !dy_m.is_finite() {
            return Err(MapError::Invalid("grid spacings must be positive".into()));
        }
        if !alt_m.is_finite() {
            return Err(MapError::Invalid("altitude must be finite".into()));
        }
        Ok(Self { values, lon_deg, lat_deg, dx_m, dy_m, alt_m })
    }

    /// Map whose values are `f(lon_deg, lat_deg)` at each node.
    pub fn from_fn(
        lon_deg: Vec<T>,
        lat_deg: Vec<T>,
        dx_m: T,
        dy_m: T,
        alt_m: T,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self, MapError> {
        let values = lat_deg.iter().flat_map(|&la| lon_deg.iter().map(move |&lo| (lo, la))).map(|(lo, la)| f(lo, la)).collect();
        Self::new(values, lon_deg, lat_deg, dx_m, dy_m, alt_m)
    }

    pub fn nx(&self) -> usize {
        self.lon_deg.len()
    }

    pub fn ny(&self) -> usize {
        self.lat_deg.len()
    }

    pub fn lon_deg(&self) -> &[T] {
        &self.lon_deg
    }

    pub fn lat_deg(&self) -> &[T] {
        &self.lat_deg
    }

    /// Row-major values, `ny * nx`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize) -> T {
        self.values[row * self.nx() + col]
    }

    pub fn with_values(&self, values: Vec<T>) -> Result<Self, MapError> {
        Self::new(values, self.lon_deg.clone(), self.lat_deg.clone(), self.dx_m, self.dy_m, self.alt_m)
    }

    pub fn mean(&self) -> T {
        self.values.iter().fold(T::zero(), |s, &v| s + v) / T::from_usize(self.values.len()).unwrap()
    }

    pub fn contains(&self, lon_deg: T, lat_deg: T) -> bool {
        let inside = |v: T, axis: &[T]| v >= axis[0] && v <= axis[axis.len() - 1];
        inside(lon_deg, &self.lon_deg) && inside(lat_deg, &self.lat_deg)
    }

    /// Text form: `nx ny alt_m dx_m dy_m`, the longitude vector, the latitude
    /// vector, then `ny` rows of `nx` values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {} {} {}", self.nx(), self.ny(), self.alt_m, self.dx_m, self.dy_m).unwrap();
        let join = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "{}", join(&self.lon_deg)).unwrap();
        writeln!(s, "{}", join(&self.lat_deg)).unwrap();
        for row in self.values.chunks(self.nx()) {
            writeln!(s, "{}", join(row)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| MapError::Format(format!("missing {what}")));
        let parse_row = |line: &str, what: &str| -> Result<Vec<T>, MapError> {
            line.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map(|v| T::from_f64(v).unwrap())
                        .map_err(|_| MapError::Format(format!("non-numeric {what} entry {tok:?}")))
                })
                .collect()
        };
        let header = next("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(MapError::Format(format!("header needs `nx ny alt_m dx_m dy_m`, got {header:?}")));
        }
        let nx: usize = fields[0].parse().map_err(|_| MapError::Format("bad nx".into()))?;
        let ny: usize = fields[1].parse().map_err(|_| MapError::Format("bad ny".into()))?;
        let hdr = parse_row(&fields[2..].join(" "), "header")?;
        let lon = parse_row(next("longitude line")?, "longitude")?;
        let lat = parse_row(next("latitude line")?, "latitude")?;
        if lon.len() != nx || lat.len() != ny {
            return Err(MapError::Format(format!(
                "axis lengths {}x{} disagree with header {nx}x{ny}",
                lon.len(),
                lat.len()
            )));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let row = parse_row(next(&format!("row {j}"))?, "value")?;
            if row.len() != nx {
                return Err(MapError::Format(format!("row {j} has {} values, expected {nx}", row.len())));
            }
            values.extend(row);
        }
        if lines.next().is_some() {
            return Err(MapError::Format(format!("more than {ny} rows")));
        }
        Self::new(values, lon, lat, hdr[1], hdr[2], hdr[0])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MapError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Angular wavenumber magnitude `sqrt(kx^2 + ky^2)` (rad/m) of each DFT bin of
/// an `ny x nx` grid, row-major.
pub fn create_k<T: Scalar>(ny: usize, nx: usize, dx_m: T, dy_m: T) -> Result<Vec<T>, MapError> {
    if nx < 2 || ny < 2 {
        return Err(MapError::Invalid(format!("grid {ny}x{nx} too small")));
    }
    if !(dx_m > T::zero() && dy_m > T::zero()) {
        return Err(MapError::Invalid("grid spacings must be positive".into()));
    }
    let kx = wavenumbers(nx, dx_m);
    let ky = wavenumbers(ny, dy_m);
    Ok(ky.iter().flat_map(|&b| kx.iter().map(move |&a| (a * a + b * b).sqrt())).collect())
}

/// `2 pi` times the DFT sample frequencies of an `n`-point axis.
fn wavenumbers<T: Scalar>(n: usize, d: T) -> Vec<T> {
    let scale = c::<T>(2.0) * T::PI() / (T::from_usize(n).unwrap() * d);
    (0..n)
        .map(|i| {
            let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
            c::<T>(m) * scale
        })
        .collect()
}

/// Options for [`upward_fft`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions<T> {
    /// Mirror-pad the grid to twice its size before transforming.
    pub pad: bool,
    pub allow_downward: bool,
    /// Wavenumbers above this (rad/m) are zeroed; required for downward continuation.
    pub k_cutoff: Option<T>,
}

impl<T> Default for ContinuationOptions<T> {
    fn default() -> Self {
        Self { pad: false, allow_downward: false, k_cutoff: None }
    }
}

impl<T> ContinuationOptions<T> {
    pub fn padded() -> Self {
        Self { pad: true, allow_downward: false, k_cutoff: None }
    }
}

fn fft2<T: Scalar>(data: &mut [Complex<T>], ny: usize, nx: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    for row in data.chunks_mut(nx) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(T::zero(), T::zero()); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        col_fft.process(&mut col);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
}

/// Continues the map from `alt_m` to `alt_m + dz_m` by multiplying its
/// spectrum with `exp(-|k| dz)`.
pub fn upward_fft<T: Scalar>(map: &AnomalyMap<T>, dz_m: T, opts: &ContinuationOptions<T>) -> Result<AnomalyMap<T>, MapError> {
    if map.values.iter().any(|v| v.is_nan()) {
        return Err(MapError::NanInGrid);
    }
    if !dz_m.is_finite() {
        return Err(MapError::Invalid("dz must be finite".into()));
    }
    if dz_m < T::zero() && (!opts.allow_downward || opts.k_cutoff.is_none()) {
        return Err(MapError::DownwardRejected(dz_m.to_f64_lossy()));
    }
    let (nx, ny) = (map.nx(), map.ny());
    let (ex, ey) = if opts.pad { (2 * nx, 2 * ny) } else { (nx, ny) };
    let mirror = |i: usize, n: usize| if i < n { i } else { 2 * n - 1 - i };

    let mut spec: Vec<Complex<T>> = (0..ey)
        .flat_map(|j| (0..ex).map(move |i| (mirror(j, ny), mirror(i, nx))))
        .map(|(j, i)| Complex::new(map.value(j, i), T::zero()))
        .collect();
    fft2(&mut spec, ey, ex, false);
    let k = create_k(ey, ex, map.dx_m, map.dy_m)?;
    for (s, &kk) in spec.iter_mut().zip(&k) {
        let keep = opts.k_cutoff.is_none_or(|kc| kk <= kc);
        let gain = if keep { (-kk * dz_m).exp() } else { T::zero() };
        *s = *s * gain;
    }
    fft2(&mut spec, ey, ex, true);
    let norm = T::from_usize(ex * ey).unwrap();
    let values = (0..ny).flat_map(|j| (0..nx).map(move |i| (j, i))).map(|(j, i)| spec[j * ex + i].re / norm).collect();
    let mut out = map.with_values(values)?;
    out.alt_m = map.alt_m + dz_m;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpMethod {
    #[default]
    Bilinear,
    /// Keys cubic convolution (a = -1/2) with linearly extrapolated edge nodes.
    Bicubic,
}

/// Continuous surrogate of a map over its bounding box.
#[derive(Debug, Clone)]
pub struct MapInterpolant<T> {
    map: AnomalyMap<T>,
    method: InterpMethod,
}

pub fn build_interpolant<T: Scalar>(map: &AnomalyMap<T>, method: InterpMethod) -> MapInterpolant<T> {
    MapInterpolant { map: map.clone(), method }
}

/// Cell index and fractional offset of `v` on `axis`.
fn locate<T: Scalar>(axis: &[T], v: T) -> (usize, T) {
    let n = axis.len();
    let i = axis.partition_point(|&a| a <= v).saturating_sub(1).min(n - 2);
    (i, (v - axis[i]) / (axis[i + 1] - axis[i]))
}

fn cubic_weights<T: Scalar>(t: T) -> ([T; 4], [T; 4]) {
    let half = c::<T>(0.5);
    let (t2, t3) = (t * t, t * t * t);
    let w = [
        half * (-t3 + c::<T>(2.0) * t2 - t),
        half * (c::<T>(3.0) * t3 - c::<T>(5.0) * t2 + c::<T>(2.0)),
        half * (c::<T>(-3.0) * t3 + c::<T>(4.0) * t2 + t),
        half * (t3 - t2),
    ];
    let dw = [
        half * (c::<T>(-3.0) * t2 + c::<T>(4.0) * t - T::one()),
        half * (c::<T>(9.0) * t2 - c::<T>(10.0) * t),
        half * (c::<T>(-9.0) * t2 + c::<T>(8.0) * t + T::one()),
        half * (c::<T>(3.0) * t2 - c::<T>(2.0) * t),
    ];
    (w, dw)
}

impl<T: Scalar> MapInterpolant<T> {
    pub fn map(&self) -> &AnomalyMap<T> {
        &self.map
    }

    pub fn method(&self) -> InterpMethod {
        self.method
    }

    /// Node value with linear extrapolation one node past each edge.
    fn node(&self, row: isize, col: isize) -> T {
        let clamp_lin = |k: isize, n: usize| -> (usize, usize, T) {
            // (index, neighbour, extrapolation weight)
            if k < 0 {
                (0, 1, T::one())
            } else if k >= n as isize {
                (n - 1, n - 2, T::one())
            } else {
                (k as usize, k as usize, T::zero())
            }
        };
        let (j, jn, wj) = clamp_lin(row, self.map.ny());
        let (i, i_n, wi) = clamp_lin(col, self.map.nx());
        let two = c::<T>(2.0);
        let along_col = |jj: usize| {
            if wi == T::zero() {
                self.map.value(jj, i)
            } else {
                two * self.map.value(jj, i) - self.map.value(jj, i_n)
            }
        };
        if wj == T::zero() {
            along_col(j)
        } else {
            two * along_col(j) - along_col(jn)
        }
    }

    /// Value and derivatives with respect to the fractional cell offsets.
    fn eval(&self, lon_deg: T, lat_deg: T) -> (T, T, T, usize, usize) {
        let (i, tx) = locate(&self.map.lon_deg, lon_deg);
        let (j, ty) = locate(&self.map.lat_deg, lat_deg);
        match self.method {
            InterpMethod::Bilinear => {
                let v00 = self.map.value(j, i);
                let v01 = self.map.value(j, i + 1);
                let v10 = self.map.value(j + 1, i);
                let v11 = self.map.value(j + 1, i + 1);
                let one = T::one();
                let bottom = (one - tx) * v00 + tx * v01;
                let top = (one - tx) * v10 + tx * v11;
                let value = (one - ty) * bottom + ty * top;
                let d_tx = (one - ty) * (v01 - v00) + ty * (v11 - v10);
                let d_ty = top - bottom;
                (value, d_tx, d_ty, i, j)
            }
            InterpMethod::Bicubic => {
                let (wx, dwx) = cubic_weights(tx);
                let (wy, dwy) = cubic_weights(ty);
                let (mut v, mut gx, mut gy) = (T::zero(), T::zero(), T::zero());
                for (a, (&wya, &dwya)) in wy.iter().zip(&dwy).enumerate() {
                    let row = j as isize - 1 + a as isize;
                    for (b, (&wxb, &dwxb)) in wx.iter().zip(&dwx).enumerate() {
                        let f = self.node(row, i as isize - 1 + b as isize);
                        v = v + wya * wxb * f;
                        gx = gx + wya * dwxb * f;
                        gy = gy + dwya * wxb * f;
                    }
                }
                (v, gx, gy, i, j)
            }
        }
    }

    fn check_inside(&self, lon_deg: T, lat_deg: T) -> Result<(), MapError> {
        if !self.map.contains(lon_deg, lat_deg) {
            return Err(MapError::OutOfBounds { lon: lon_deg.to_f64_lossy(), lat: lat_deg.to_f64_lossy() });
        }
        Ok(())
    }

    /// Interpolated anomaly (nT) at a point inside the bounding box.
    pub fn interp_at(&self, lon_deg: T, lat_deg: T) -> Result<T, MapError> {
        self.check_inside(lon_deg, lat_deg)?;
        Ok(self.eval(lon_deg, lat_deg).0)
    }

    /// Gradient `(d/dlon, d/dlat)` in nT/rad of the interpolating surface.
    /// The point must lie at least one cell inside the map edge.
    pub fn map_grad(&self, lon_deg: T, lat_deg: T) -> Result<[T; 2], MapError> {
        self.check_inside(lon_deg, lat_deg)?;
        let (lon, lat) = (&self.map.lon_deg, &self.map.lat_deg);
        let interior = |v: T, axis: &[T]| v >= axis[1] && v <= axis[axis.len() - 2];
        if !(interior(lon_deg, lon) && interior(lat_deg, lat)) {
            return Err(MapError::NearBoundary { lon: lon_deg.to_f64_lossy(), lat: lat_deg.to_f64_lossy() });
        }
        let (_, d_tx, d_ty, i, j) = self.eval(lon_deg, lat_deg);
        let per_rad = c::<T>(180.0) / T::PI();
        Ok([d_tx / (lon[i + 1] - lon[i]) * per_rad, d_ty / (lat[j + 1] - lat[j]) * per_rad])
    }
}
