#![allow(dead_code)]

pub mod gradcheck;

use std::path::PathBuf;

use yesrate::numerics::{beta_cdf, digamma, log_beta, log_gamma};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

/// Worst observed error per function, as a fraction of its tolerance.
#[derive(Debug, Default)]
pub struct OracleSummary {
    pub points: usize,
    pub failures: Vec<String>,
    pub worst: Vec<(String, f64)>,
}

/// Compares every fixture row against the library.
///
/// Tolerances: log_gamma 1e-12 and digamma 1e-10, both scaled by
/// `max(1, |value|)`; log_beta 1e-12 scaled by the magnitude of its three
/// log-gamma terms; beta_cdf 1e-9 absolute.
pub fn check_numerics_oracle() -> OracleSummary {
    let mut rdr =
        csv::Reader::from_path(data_path("numerics_oracle.csv")).expect("fixture present");
    let mut summary = OracleSummary::default();
    let mut worst = std::collections::BTreeMap::<String, f64>::new();
    for rec in rdr.records() {
        let rec = rec.expect("fixture row");
        let f = &rec[0];
        let num = |i: usize| rec[i].parse::<f64>().expect("number");
        let (x, a, b, want) = (num(1), num(2), num(3), num(4));
        let (got, tol) = match f {
            "log_gamma" => (log_gamma(x).unwrap(), 1e-12 * want.abs().max(1.0)),
            "digamma" => (digamma(x).unwrap(), 1e-10 * want.abs().max(1.0)),
            "log_beta" => {
                let scale = log_gamma(a).unwrap().abs()
                    + log_gamma(b).unwrap().abs()
                    + log_gamma(a + b).unwrap().abs();
                (log_beta(a, b).unwrap(), 1e-12 * scale.max(1.0))
            }
            "beta_cdf" => (beta_cdf(x, a, b).unwrap(), 1e-9),
            other => panic!("unknown fixture function {other}"),
        };
        let ratio = (got - want).abs() / tol;
        let w = worst.entry(f.to_owned()).or_insert(0.0);
        *w = w.max(ratio);
        if !(ratio <= 1.0) {
            summary.failures.push(format!(
                "{f}(x={x}, a={a}, b={b}): got {got:e}, want {want:e}"
            ));
        }
        summary.points += 1;
    }
    summary.worst = worst.into_iter().collect();
    summary
}
