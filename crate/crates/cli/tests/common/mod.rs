#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn magcomp(dir: &Path, args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_magcomp"));
    cmd.current_dir(dir).args(args).env_remove("MAGCOMP_SEED").env("RUST_LOG", "warn");
    if let Some(s) = seed {
        cmd.env("MAGCOMP_SEED", s);
    }
    cmd.output().expect("spawn magcomp")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub const CAL_CONFIG: &str = "\
seed = 1
fs_hz = 10
pattern = box
scalar_sigma_nT = 0.0
";

pub const NEAR_CONSTANT_CONFIG: &str = "\
seed = 1
pattern = straight
roll_amp_deg = 0.001
pitch_amp_deg = 0.001
yaw_amp_deg = 0.001
";

pub fn coeff_norm(text: &str) -> f64 {
    magcomp_core::TlCoefficients::<f64>::from_text(text).unwrap().norm()
}
