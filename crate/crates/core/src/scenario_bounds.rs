//! Violation levels `eps(k)` and feasibility certificates.
//!
//! For `N` samples and confidence `beta` the table splits `beta` uniformly
//! over `k = 0..N-1`:
//!
//! ```text
//! eps(k) = 1 - (beta / (N * C(N, k)))^(1 / (N - k)),   eps(N) = 1,
//! ```
//!
//! so that every term `C(N,k) (1 - eps(k))^(N-k)` equals `beta / N` and the
//! terms sum to `beta`. The published table is the running maximum of the
//! raw values, which keeps the sum at most `beta` and makes `eps`
//! nondecreasing in `k`.
//!
//! Values are stored as `ln(1 - eps)` so that levels within an ulp of one
//! (for `k` close to `N`) keep their complement.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::polytope::{HPolytope, ReductionReport};

/// Membership tolerance for certifying a point.
pub const POINT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonTable {
    n_samples: usize,
    beta: f64,
    /// `ln(1 - eps_raw(k))` for `k = 0..=N`.
    raw_log_complement: Vec<f64>,
    /// `ln(1 - eps(k))` after the monotone adjustment.
    log_complement: Vec<f64>,
}

impl EpsilonTable {
    pub fn new(n_samples: usize, beta: f64) -> Result<Self> {
        if n_samples < 1 {
            return Err(Error::InvalidParameters("need at least one sample".into()));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameters(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        let n = n_samples as u64;
        let log_share = beta.ln() - (n_samples as f64).ln();
        let mut raw = Vec::with_capacity(n_samples + 1);
        for k in 0..n {
            raw.push((log_share - ln_binomial(n, k)) / (n - k) as f64);
        }
        raw.push(f64::NEG_INFINITY);

        let mut adjusted = raw.clone();
        for k in 1..adjusted.len() {
            adjusted[k] = adjusted[k].min(adjusted[k - 1]);
        }
        Ok(Self {
            n_samples,
            beta,
            raw_log_complement: raw,
            log_complement: adjusted,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Monotone violation level; `1` for `k >= N`.
    pub fn eps(&self, k: usize) -> f64 {
        match self.log_complement.get(k) {
            Some(&lc) => -lc.exp_m1(),
            None => 1.0,
        }
    }

    /// Violation level before the monotone adjustment.
    pub fn eps_raw(&self, k: usize) -> f64 {
        match self.raw_log_complement.get(k) {
            Some(&lc) => -lc.exp_m1(),
            None => 1.0,
        }
    }

    /// `ln(1 - eps(k))`, raw or adjusted; `-inf` for `k >= N`. Keeps full
    /// precision where `eps(k)` rounds to one.
    pub fn log_complement(&self, k: usize, raw: bool) -> f64 {
        let logs = if raw {
            &self.raw_log_complement
        } else {
            &self.log_complement
        };
        logs.get(k).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.n_samples).map(|k| self.eps(k)).collect()
    }

    /// `sum_{k<N} C(N,k) (1 - eps(k))^(N-k)` in the log domain with
    /// compensated summation, for the raw or the adjusted table.
    pub fn condition_sum(&self, raw: bool) -> f64 {
        let logs = if raw {
            &self.raw_log_complement
        } else {
            &self.log_complement
        };
        let n = self.n_samples as u64;
        (0..n)
            .map(|k| (ln_binomial(n, k) + (n - k) as f64 * logs[k as usize]).exp())
            .collect::<CompensatedSum>()
            .value()
    }

    /// CSV with header `k,epsilon`, one row per `k = 0..=N`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,epsilon")?;
        for k in 0..=self.n_samples {
            writeln!(w, "{},{}", k, self.eps(k))?;
        }
        Ok(())
    }
}

/// What a certificate speaks about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Set,
    Point(Vec<f64>),
}

/// `P^N{ violation > epsilon } <= beta` for the subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub subject: Subject,
    pub k: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub n_samples: usize,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serialization cannot fail")
    }
}

/// Which kept rows count as support constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CertifyOptions {
    /// Also count facets of the deterministic set (conservative).
    pub count_deterministic: bool,
}

fn support_count(report: &ReductionReport, opts: CertifyOptions) -> usize {
    if opts.count_deterministic {
        report.facet_count
    } else {
        report.scenario_facet_count
    }
}

/// Certificate for the whole reduced set.
pub fn certify_set(
    table: &EpsilonTable,
    report: &ReductionReport,
    opts: CertifyOptions,
) -> Result<Certificate> {
    let k = support_count(report, opts);
    // Each scenario contributes at most one row, so more scenario facets than
    // samples means the report does not belong to this table.
    if report.scenario_facet_count > table.n_samples() {
        return Err(Error::FacetCountExceedsN {
            k,
            n: table.n_samples(),
        });
    }
    Ok(Certificate {
        subject: Subject::Set,
        k,
        epsilon: table.eps(k),
        beta: table.beta(),
        n_samples: table.n_samples(),
    })
}

/// Certificate for a point of the set; it inherits the set's level.
pub fn certify_point(
    table: &EpsilonTable,
    poly: &HPolytope,
    report: &ReductionReport,
    x: &[f64],
    opts: CertifyOptions,
) -> Result<Certificate> {
    if !poly.contains(x, POINT_TOL) {
        return Err(Error::PointNotInSet);
    }
    let mut cert = certify_set(table, report, opts)?;
    cert.subject = Subject::Point(x.to_vec());
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{reduce, Halfspace, RowOrigin};

    #[test]
    fn two_samples_half_confidence() {
        let t = EpsilonTable::new(2, 0.5).unwrap();
        assert!((t.eps(0) - 0.5).abs() < 1e-15);
        assert!((t.eps(1) - 0.875).abs() < 1e-15);
        assert_eq!(t.eps(2), 1.0);
        assert!((t.condition_sum(true) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_sample() {
        let t = EpsilonTable::new(1, 0.1).unwrap();
        assert!((t.eps(0) - 0.9).abs() < 1e-15);
        assert_eq!(t.eps(1), 1.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(EpsilonTable::new(0, 0.1), Err(Error::InvalidParameters(_))));
        assert!(matches!(EpsilonTable::new(5, 0.0), Err(Error::InvalidParameters(_))));
        assert!(matches!(EpsilonTable::new(5, 1.0), Err(Error::InvalidParameters(_))));
        assert!(matches!(EpsilonTable::new(5, f64::NAN), Err(Error::InvalidParameters(_))));
    }

    #[test]
    fn k_zero_closed_form() {
        let (n, beta) = (2000usize, 1e-6);
        let t = EpsilonTable::new(n, beta).unwrap();
        let expected = 1.0 - (beta / n as f64).powf(1.0 / n as f64);
        assert!((t.eps(0) - expected).abs() < 1e-14);
        // 50-digit evaluation.
        assert!((t.eps(0) - 0.010_651_077_762_740_155).abs() < 1e-14);
        assert!((t.eps(12) - 0.045_514_646_085_815_16).abs() < 1e-13);
    }

    #[test]
    fn csv_layout() {
        let t = EpsilonTable::new(2, 0.5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,epsilon\n0,0.5\n1,0.875\n2,1\n");
    }

    fn triangle() -> HPolytope {
        let mut p = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        p.push(Halfspace::new(vec![1.0, 1.0], 1.0).unwrap(), RowOrigin::Scenario(0))
            .unwrap();
        p
    }

    #[test]
    fn certificates() {
        let table = EpsilonTable::new(10, 1e-3).unwrap();
        let poly = triangle();
        let rep = reduce(&poly).unwrap();
        let set = certify_set(&table, &rep, CertifyOptions::default()).unwrap();
        assert_eq!(set.k, 1);
        assert_eq!(set.epsilon, table.eps(1));
        let conservative = certify_set(
            &table,
            &rep,
            CertifyOptions {
                count_deterministic: true,
            },
        )
        .unwrap();
        assert_eq!(conservative.k, 3);

        let inside = certify_point(&table, &poly, &rep, &[0.2, 0.2], CertifyOptions::default()).unwrap();
        assert_eq!(inside.epsilon, set.epsilon);
        assert_eq!(inside.subject, Subject::Point(vec![0.2, 0.2]));
        let boundary = certify_point(&table, &poly, &rep, &[0.5, 0.5 + 5e-8], CertifyOptions::default());
        assert!(boundary.is_ok());
        assert_eq!(
            certify_point(&table, &poly, &rep, &[0.9, 0.9], CertifyOptions::default()),
            Err(Error::PointNotInSet)
        );
        assert_eq!(
            inside.to_json(),
            format!(
                r#"{{"subject":{{"point":[0.2,0.2]}},"k":1,"epsilon":{},"beta":0.001,"n_samples":10}}"#,
                table.eps(1)
            )
        );
        assert!(set.to_json().starts_with(r#"{"subject":"set","k":1,"#));
    }

    #[test]
    fn support_count_above_n_rejected() {
        let table = EpsilonTable::new(2, 0.1).unwrap();
        let rep = ReductionReport {
            facet_count: 3,
            scenario_facet_count: 3,
            kept_rows: vec![0, 1, 2],
            removed_rows: vec![],
            interior_point: vec![0.0],
            chebyshev_radius: 1.0,
        };
        assert_eq!(
            certify_set(&table, &rep, CertifyOptions::default()),
            Err(Error::FacetCountExceedsN { k: 3, n: 2 })
        );
    }
}
