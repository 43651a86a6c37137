//! Run reports: JSON artifacts plus terse console summaries.
//!
//! A [`RunReport`] aggregates one [`ScenarioReport`] per executed scenario.
//! Every quantitative result keeps its worst margin, the location where it
//! was attained, and the tolerance it was judged against, so a red run can be
//! diagnosed from the artifact alone. Serialization is deterministic except
//! for the wall-clock fields (`created_unix_ms`, `runtime_ms`).

use std::path::Path;

use serde::Serialize;

use crate::diffusion::McCheckReport;
use crate::flowcheck::FlowCertificate;
use crate::harnack::HarnackReport;
use crate::{CoreError, Result};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridEchoReport {
    pub n_x: usize,
    pub n_steps: usize,
    pub dx: f64,
    pub dt: f64,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MassReport {
    pub max_drift_per_step: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub passed: bool,
    /// Margin tolerance resolved for this scenario's grid.
    pub tolerance: f64,
    pub grid: GridEchoReport,
    pub certificates: Vec<FlowCertificate>,
    pub checks: Vec<HarnackReport>,
    pub mc_checks: Vec<McCheckReport>,
    pub mass: Option<MassReport>,
    /// Failures outside the structured reports (skipped checks, aborts).
    pub notes: Vec<String>,
    pub runtime_ms: u128,
}

impl ScenarioReport {
    /// One line per result, suitable for console output.
    pub fn summary_lines(&self) -> Vec<String> {
        fn tag(ok: bool) -> &'static str {
            if ok {
                "PASS"
            } else {
                "FAIL"
            }
        }
        let mut out = Vec::new();
        out.push(format!(
            "[{}] {} ({} ms)",
            tag(self.passed),
            self.name,
            self.runtime_ms
        ));
        for c in &self.certificates {
            out.push(format!(
                "  [{}] certify {} min_margin={:.3e} at (t={:.3}, x={:?}) threshold={:.3}",
                tag(c.passed),
                c.condition,
                c.min_margin,
                c.margin_t,
                c.margin_x,
                c.threshold,
            ));
        }
        for r in &self.checks {
            out.push(format!(
                "  [{}] {} worst={:.3e} at (t={:.3}, x={:.3}) tol={:.1e} samples={}",
                tag(r.passed),
                r.check,
                r.worst_margin,
                r.worst_t,
                r.worst_x,
                r.tolerance,
                r.samples,
            ));
        }
        for m in &self.mc_checks {
            out.push(format!(
                "  [{}] {} at x={:.3} s={:.3}: est={:.5} target={:.5} err={:.2e} allow={:.2e}",
                tag(m.passed),
                m.check,
                m.x_eval,
                m.s_clock,
                m.estimate,
                m.target,
                (m.estimate - m.target).abs(),
                m.allowance,
            ));
        }
        if let Some(mass) = &self.mass {
            out.push(format!(
                "  [{}] mass drift per step {:.3e} (tol {:.1e})",
                tag(mass.passed),
                mass.max_drift_per_step,
                mass.tolerance,
            ));
        }
        for n in &self.notes {
            out.push(format!("  note: {n}"));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub created_unix_ms: u128,
    pub passed: bool,
    pub scenarios: Vec<ScenarioReport>,
}

impl RunReport {
    pub fn new(scenarios: Vec<ScenarioReport>) -> Self {
        RunReport {
            schema_version: crate::scenario::SCHEMA_VERSION,
            created_unix_ms: now_unix_ms(),
            passed: scenarios.iter().all(|s| s.passed),
            scenarios,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| CoreError::Config(format!("report serialization failed: {e}")))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .scenarios
            .iter()
            .flat_map(|s| s.summary_lines())
            .collect();
        let n_pass = self.scenarios.iter().filter(|s| s.passed).count();
        out.push(format!(
            "{}: {n_pass}/{} scenarios passed",
            if self.passed { "OK" } else { "FAILED" },
            self.scenarios.len(),
        ));
        out
    }
}

pub fn now_unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_scenario(passed: bool) -> ScenarioReport {
        ScenarioReport {
            name: "probe".into(),
            passed,
            tolerance: 1e-6,
            grid: GridEchoReport {
                n_x: 64,
                n_steps: 100,
                dx: 0.1,
                dt: 0.005,
                t0: 0.0,
                t1: 0.5,
            },
            certificates: Vec::new(),
            checks: Vec::new(),
            mc_checks: Vec::new(),
            mass: Some(MassReport {
                max_drift_per_step: 1e-15,
                tolerance: 1e-8,
                passed: true,
            }),
            notes: vec!["skipped nothing".into()],
            runtime_ms: 12,
        }
    }

    #[test]
    fn run_report_aggregates_pass_state() {
        let ok = RunReport::new(vec![dummy_scenario(true)]);
        assert!(ok.passed);
        let bad = RunReport::new(vec![dummy_scenario(true), dummy_scenario(false)]);
        assert!(!bad.passed);
        let lines = bad.summary_lines();
        assert!(lines.last().unwrap().contains("1/2 scenarios passed"));
        assert!(lines.iter().any(|l| l.contains("mass drift")));
    }

    #[test]
    fn json_round_trip_has_expected_fields() {
        let report = RunReport::new(vec![dummy_scenario(true)]);
        let text = report.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["scenarios"][0]["name"], "probe");
        assert_eq!(value["scenarios"][0]["mass"]["passed"], true);
    }
}
