//! Command implementations behind the `kinrate` binary, split out as a
//! library so integration tests can drive them in-process.

pub mod certify;
pub mod chain_demo;
pub mod pipeline;
pub mod scenario;
pub mod simulate;
pub mod tabulate;
pub mod verify;

/// Shortest round-trip float for CSV cells; scientific notation outside a
/// readable magnitude band (plain `{}` would expand 1e-72 into a wall of
/// zeros).
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
