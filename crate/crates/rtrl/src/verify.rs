//! Verification suites rendered as tab-separated reports.
//!
//! ```text
//! suite      property          instances  max_residual  tolerance  result
//! theorem1   mrp_equal         20         0e0           1e-12      pass
//! ```

use std::fmt::Write as _;

use rtrl_core::suites::{run_suite, SuiteReport, SUITES};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{name}`; available suites: {}", SUITES.join(", "))]
    UnknownSuite { name: String },
    #[error("suite `{suite}` could not run: {source}")]
    Failed {
        suite: String,
        source: rtrl_core::Error,
    },
}

/// `all` runs every suite in order.
pub fn verify(name: &str) -> Result<Vec<SuiteReport>, VerifyError> {
    let names: Vec<&str> = if name == "all" {
        SUITES.to_vec()
    } else {
        vec![name]
    };
    names
        .into_iter()
        .map(|n| match run_suite(n) {
            None => Err(VerifyError::UnknownSuite {
                name: n.to_string(),
            }),
            Some(r) => r.map_err(|source| VerifyError::Failed {
                suite: n.to_string(),
                source,
            }),
        })
        .collect()
}

pub fn report_tsv(reports: &[SuiteReport]) -> String {
    let mut out = String::from("suite\tproperty\tinstances\tmax_residual\ttolerance\tresult\n");
    for r in reports {
        for p in &r.properties {
            let verdict = if p.passed { "pass" } else { "fail" };
            writeln!(
                out,
                "{}\t{}\t{}\t{:e}\t{:e}\t{verdict}",
                r.suite, p.property, p.instances, p.max_residual, p.tolerance
            )
            .unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_lists_the_available_ones() {
        let err = verify("theorem3").unwrap_err();
        let msg = err.to_string();
        for s in SUITES {
            assert!(msg.contains(s), "{msg}");
        }
    }

    #[test]
    fn report_has_one_line_per_property() {
        let reports = verify("theorem1").unwrap();
        let tsv = report_tsv(&reports);
        let n: usize = reports.iter().map(|r| r.properties.len()).sum();
        assert_eq!(tsv.lines().count(), n + 1);
        assert!(tsv
            .lines()
            .skip(1)
            .all(|l| l.split('\t').count() == 6 && l.ends_with("pass")));
    }
}
