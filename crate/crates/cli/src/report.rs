//! Run outputs: a human-readable report, a results table and optional
//! artifacts (traces, placement tables, instance dumps).
//!
//! `results.csv` columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `scenario` | scenario name |
//! | `point` | grid point index (0 outside sweeps) |
//! | `slot` | online slot, 1-based (0 offline) |
//! | `profile` | association profile as `(3;1)`; the reduced profile online |
//! | `M` | cache size |
//! | `delta` | correctable bit errors |
//! | `measured` | transmitted bits over `F`, exact |
//! | `measured_decimal` | same, six decimals |
//! | `formula` | closed-form time, exact, or `-` |
//! | `formula_decimal` | same, six decimals, or `-` |
//! | `agree` | `yes`, `no`, or `n/a` when not comparable (random placement, M = 0) |
//! | `decoded` | `yes` when every user recovered its file bit-exactly |
//! | `verdict` | converse verdict or `-` |
//! | `coded_time` | codeword length over `F`, or `-` |
//! | `reference` | reference formula selected by the sweep, or `-` |

use std::fmt::Write as _;
use std::path::Path;

use codedcache::analytics::to_decimal;
use codedcache::{Profile, Rational};

pub const CSV_HEADER: &str = "scenario,point,slot,profile,M,delta,measured,measured_decimal,formula,formula_decimal,agree,decoded,verdict,coded_time,reference";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Yes,
    No,
    NotComparable,
}

impl Agreement {
    fn as_str(self) -> &'static str {
        match self {
            Agreement::Yes => "yes",
            Agreement::No => "no",
            Agreement::NotComparable => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub point: usize,
    pub slot: u64,
    pub profile: Profile,
    pub cache_size: Rational,
    pub delta: usize,
    pub measured: Rational,
    pub formula: Option<Rational>,
    pub agree: Agreement,
    pub decoded: bool,
    pub verdict: Option<String>,
    pub coded_time: Option<Rational>,
    pub reference: Option<Rational>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.decoded
            || self.agree == Agreement::No
            || self.verdict.as_deref().is_some_and(|v| v != "OPTIMAL")
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<Rational>| x.map_or("-".to_string(), |v| v.to_string());
        let dec =
            |x: Option<Rational>| x.map_or("-".to_string(), |v| format!("{:.6}", to_decimal(v)));
        let counts: Vec<String> = self
            .profile
            .counts()
            .iter()
            .map(|c| c.to_string())
            .collect();
        [
            self.scenario.clone(),
            self.point.to_string(),
            self.slot.to_string(),
            format!("({})", counts.join(";")),
            self.cache_size.to_string(),
            self.delta.to_string(),
            self.measured.to_string(),
            dec(Some(self.measured)),
            opt(self.formula),
            dec(self.formula),
            self.agree.as_str().to_string(),
            if self.decoded { "yes" } else { "no" }.to_string(),
            self.verdict.clone().unwrap_or_else(|| "-".into()),
            opt(self.coded_time),
            opt(self.reference),
        ]
        .join(",")
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: String,
    pub rows: Vec<ResultRow>,
    /// Extra files, `(name, contents)`.
    pub artifacts: Vec<(String, String)>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && !self.rows.iter().any(ResultRow::failed)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.report, "{}", text.as_ref());
    }

    pub fn fail(&mut self, text: impl Into<String>) {
        let text = text.into();
        self.line(format!("FAILURE: {text}"));
        self.failures.push(text);
    }

    /// Writes `report.txt`, `results.csv` and the artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &self.report)?;
        std::fs::write(dir.join("results.csv"), self.csv())?;
        for (name, body) in &self.artifacts {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// `7/4 = 7/4` style comparison.
pub fn comparison(measured: Rational, formula: Option<Rational>) -> String {
    match formula {
        Some(f) if f == measured => format!("{measured} = {f}"),
        Some(f) => format!("{measured} != {f}"),
        None => format!("{measured} (no closed form)"),
    }
}
