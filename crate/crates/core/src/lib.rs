//! Aircraft magnetic interference compensation with the Tolles-Lawson model,
//! plus the anomaly-map, geodesy and scoring numerics around it.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common concrete choices.

// `!(a <= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod evaluation;
pub mod flight_data;
pub mod geodesy;
mod linalg;
pub mod map_tools;
pub mod scalar;
pub mod signal;
pub mod simulator;
pub mod tolles_lawson;

pub use evaluation::{evaluate_flight, rmse, rmse_detrended, EvalError, EvalReport, TruthSource};
pub use flight_data::{check_channels, load_flight, ChannelReport, FlightError, FlightFrame, LineId};
pub use geodesy::{delta_east, delta_lat, delta_lon, delta_north, Ellipsoid, GeodesyError};
pub use map_tools::{build_interpolant, create_k, upward_fft, AnomalyMap, InterpMethod, MapError, MapInterpolant};
pub use scalar::Scalar;
pub use signal::{bandpass, central_fdm, detrend, Bandpass, BandpassSpec, SignalError};
pub use simulator::{simulate_flight, simulate_survey_line, SimConfig, SimError, SimTruth};
pub use tolles_lawson::{
    build_design_matrix, compensate, fit_coefficients, predict_aircraft_field, DesignMatrix, DirectionCosines,
    TlCoefficients, TlError,
};

pub type TlCoefficientsF64 = TlCoefficients<f64>;
pub type TlCoefficientsF32 = TlCoefficients<f32>;
pub type DirectionCosinesF64 = DirectionCosines<f64>;
pub type DirectionCosinesF32 = DirectionCosines<f32>;
pub type DesignMatrixF64 = DesignMatrix<f64>;
pub type DesignMatrixF32 = DesignMatrix<f32>;
pub type AnomalyMapF64 = AnomalyMap<f64>;
pub type AnomalyMapF32 = AnomalyMap<f32>;
pub type MapInterpolantF64 = MapInterpolant<f64>;
pub type MapInterpolantF32 = MapInterpolant<f32>;
pub type EllipsoidF64 = Ellipsoid<f64>;
pub type EllipsoidF32 = Ellipsoid<f32>;
