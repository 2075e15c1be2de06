//! `imle verify`: run the numerical verification suites and write one report
//! CSV per suite. Exit status 0 iff every hard check passes.

use std::fs;
use std::path::Path;

use crate::report::{write_verify_csv, RowOutcome, VerifyRow};
use crate::verify::{
    suite_lemma1, suite_lemma2, suite_lemma3_psi, suite_tail_integral, suite_theorem1,
};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Lemma2,
    Lemma3Psi,
    Theorem1,
    TailIntegral,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma1" => Ok(Self::Lemma1),
            "lemma2" => Ok(Self::Lemma2),
            "lemma3-psi" => Ok(Self::Lemma3Psi),
            "theorem1" => Ok(Self::Theorem1),
            "tail-integral" => Ok(Self::TailIntegral),
            "all" => Ok(Self::All),
            other => Err(format!(
                "unknown suite {other:?} (lemma1, lemma2, lemma3-psi, theorem1, tail-integral, all)"
            )),
        }
    }
}

pub fn cmd_verify(suite: Suite, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let selected: Vec<(&str, Vec<VerifyRow>)> = match suite {
        Suite::Lemma1 => vec![("lemma1", suite_lemma1()?)],
        Suite::Lemma2 => vec![("lemma2", suite_lemma2(seed)?)],
        Suite::Lemma3Psi => vec![("lemma3-psi", suite_lemma3_psi(seed)?)],
        Suite::Theorem1 => vec![("theorem1", suite_theorem1(seed)?)],
        Suite::TailIntegral => vec![("tail-integral", suite_tail_integral(seed)?)],
        Suite::All => vec![
            ("lemma1", suite_lemma1()?),
            ("lemma2", suite_lemma2(seed)?),
            ("lemma3-psi", suite_lemma3_psi(seed)?),
            ("theorem1", suite_theorem1(seed)?),
            ("tail-integral", suite_tail_integral(seed)?),
        ],
    };
    let mut failures = Vec::new();
    for (name, rows) in &selected {
        let path = out_dir.join(format!("{name}.csv"));
        write_verify_csv(&path, rows)?;
        for row in rows {
            let mark = match row.outcome {
                RowOutcome::Pass => "pass",
                RowOutcome::Fail => "FAIL",
                RowOutcome::Info => "info",
            };
            println!(
                "[{mark}] {name}/{}: statistic {} expected {} tolerance {}",
                row.check_id, row.statistic, row.expected, row.tolerance
            );
            if row.outcome == RowOutcome::Fail {
                failures.push(format!("{name}/{}", row.check_id));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} verification check(s) failed: {}",
            failures.len(),
            failures.join(", ")
        )))
    }
}
