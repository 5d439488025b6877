//! Experiment reports: per-cell rows with Wilson intervals, a fixed CSV
//! column order, and a run manifest.
//!
//! Report rows are fully determined by `(config, master_seed)`; the manifest
//! additionally records wall time, so determinism checks compare CSV bytes.

use serde::Serialize;

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Half-width of the 95% Wilson interval.
pub fn wilson_half(successes: usize, n: usize) -> f64 {
    let (lo, hi) = wilson_interval(successes, n);
    (hi - lo) / 2.0
}

/// One grid cell of a sweep. Fields that a scenario does not produce stay
/// `None` and serialize as empty CSV entries.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CellRow {
    pub cell: usize,
    pub test: String,
    pub family: String,
    pub adversary: String,
    pub d: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: Option<f64>,
    pub n: usize,
    pub trials: usize,
    pub reject_rate_h0: Option<f64>,
    pub wilson_half_h0: Option<f64>,
    pub mean_stat_h0: Option<f64>,
    pub reject_rate_h1: Option<f64>,
    pub wilson_half_h1: Option<f64>,
    pub mean_stat_h1: Option<f64>,
    /// Scenario-specific scalar: measured shift, n*, recovery-success rate.
    pub measured: Option<f64>,
    /// The theoretical value `measured` is held against, where one exists.
    pub bound: Option<f64>,
    pub flag: String,
}

/// Run provenance; everything needed to reproduce the rows plus timing.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub schema_version: u32,
    pub config_sha256: String,
    pub code_version: String,
    pub master_seed: u64,
    pub calibration_c: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub manifest: RunManifest,
    pub rows: Vec<CellRow>,
}

pub const CSV_HEADER: &str = "cell,test,family,adversary,d,epsilon,alpha,gamma,n,trials,\
reject_rate_h0,wilson_half_h0,mean_stat_h0,reject_rate_h1,wilson_half_h1,mean_stat_h1,\
measured,bound,flag";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    /// Rows in the fixed documented column order. Formatting uses the
    /// shortest round-trip float representation, so bytes depend only on the
    /// values, never on parallelism.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.cell,
                r.test,
                r.family,
                r.adversary,
                r.d,
                r.epsilon,
                r.alpha,
                opt(r.gamma),
                r.n,
                r.trials,
                opt(r.reject_rate_h0),
                opt(r.wilson_half_h0),
                opt(r.mean_stat_h0),
                opt(r.reject_rate_h1),
                opt(r.wilson_half_h1),
                opt(r.mean_stat_h1),
                opt(r.measured),
                opt(r.bound),
                r.flag,
            ));
        }
        out
    }
}
