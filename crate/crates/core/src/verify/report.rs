//! Human-readable rendering of a verification report.

use std::fmt;

use super::{CheckStatus, VerificationReport};

fn fmt_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case:       {}", self.case)?;
        writeln!(f, "domain:     {} (resolution {}, seed {})", self.domain, self.resolution, self.seed)?;
        if let Some(r) = &self.pd_region {
            writeln!(f, "pd region:  {r}")?;
        }
        writeln!(f)?;
        writeln!(f, "{:<40} {:<13} {:<7} {:>12}  witness", "check", "severity", "status", "worst")?;
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Unknown => "unknown",
            };
            let severity = format!("{:?}", c.severity).to_lowercase();
            let witness = c.witness.as_deref().map(fmt_point).unwrap_or_default();
            writeln!(
                f,
                "{:<40} {:<13} {:<7} {:>12.3e}  {}",
                c.id, severity, status, c.worst_violation, witness
            )?;
        }
        writeln!(f)?;
        write!(f, "overall: {}", self.overall)
    }
}
