use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One row of a run trace, describing iterate `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// Step taken from `x_k` (0 on the final record, where no step is taken).
    pub step: f64,
    pub x: Vec<f64>,
    /// Sampler attempts spent on the gradient at `x_k`.
    pub attempts: usize,
    pub residual: f64,
    /// Mean sampled objective at `x_k`, when a gradient was drawn there.
    pub obj_estimate: Option<f64>,
}

/// Empirical stand-ins for the variance and gradient-norm constants of the
/// convergence bounds: maxima over the run of the per-iteration estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sigma_sq: f64,
    pub eps_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub records: Vec<IterRecord>,
    pub output: Vec<f64>,
    pub output_residual: f64,
    pub diagnostics: Diagnostics,
    pub total_attempts: usize,
    /// Scenarios the problem flagged (e.g. a disconnected network sample).
    pub flagged_samples: usize,
    /// Set when a wall-clock limit cut the run short.
    pub stopped_early: bool,
    /// Dual multipliers after each step, for primal-dual methods.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multipliers: Vec<Vec<f64>>,
}

pub const CSV_HEADER: &str = "k,t_k,feasibility_residual,obj_estimate,attempts";

/// JSON-friendly run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub config: serde_json::Value,
    pub iterations: usize,
    pub final_point: Vec<f64>,
    pub feasibility_residual: f64,
    pub total_attempts: usize,
    pub flagged_samples: usize,
    pub stopped_early: bool,
    pub diagnostics: Diagnostics,
}

impl RunTrace {
    pub fn new(method: &str) -> Self {
        RunTrace {
            method: method.to_string(),
            records: Vec::new(),
            output: Vec::new(),
            output_residual: 0.0,
            diagnostics: Diagnostics::default(),
            total_attempts: 0,
            flagged_samples: 0,
            stopped_early: false,
            multipliers: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest residual over all iterates and the output.
    pub fn max_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.residual)
            .fold(self.output_residual, f64::max)
    }

    /// CSV with [`CSV_HEADER`]; `comment` lines are written first, each
    /// prefixed with `# `.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(s, "# {line}").unwrap();
            }
        }
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.records {
            let obj = r.obj_estimate.map(|v| v.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{},{}", r.k, r.step, r.residual, obj, r.attempts).unwrap();
        }
        s
    }

    pub fn summary(&self, config: serde_json::Value) -> RunSummary {
        RunSummary {
            method: self.method.clone(),
            config,
            iterations: self.records.len(),
            final_point: self.output.clone(),
            feasibility_residual: self.output_residual,
            total_attempts: self.total_attempts,
            flagged_samples: self.flagged_samples,
            stopped_early: self.stopped_early,
            diagnostics: self.diagnostics,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = RunTrace::new("xor-pgd");
        t.records.push(IterRecord {
            k: 1,
            step: 0.5,
            x: vec![0.0],
            attempts: 3,
            residual: 0.0,
            obj_estimate: Some(1.25),
        });
        t.records.push(IterRecord {
            k: 2,
            step: 0.0,
            x: vec![0.1],
            attempts: 0,
            residual: 0.0,
            obj_estimate: None,
        });
        let csv = t.to_csv(Some("config-hash abc"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config-hash abc");
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines[2], "1,0.5,0,1.25,3");
        assert_eq!(lines[3], "2,0,0,,0");
    }

    #[test]
    fn summary_round_trips() {
        let mut t = RunTrace::new("al-primal-dual");
        t.output = vec![0.5, 0.5];
        let s = t.summary(serde_json::json!({"beta": 1.0}));
        let text = serde_json::to_string(&s).unwrap();
        let back: RunSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
