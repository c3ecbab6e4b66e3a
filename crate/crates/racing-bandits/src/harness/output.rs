//! Result rendering: CSV / JSON tables, the metadata sidecar, and the
//! aggregate summary printed to stderr.
//!
//! The CSV schema is part of the crate's contract: the header is exactly
//! `experiment,agent,replication,step,arm,reward,cum_regret,samples_used`,
//! floats carry six significant digits, and `samples_used` is empty for
//! every row not produced by a race (non-racing agents and warm-up pulls).

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::runner::{RunResult, StepRow};

/// Exact column header of the result table.
pub const CSV_HEADER: &str = "experiment,agent,replication,step,arm,reward,cum_regret,samples_used";

/// Formats a float with six significant digits, choosing fixed or
/// scientific notation the way C's `%g` does: scientific when the decimal
/// exponent is below -4 or at least 6, fixed otherwise, with trailing
/// zeros trimmed either way.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x < 0.0 {
        return format!("-{}", fmt_sig(-x));
    }
    // Six significant digits via normalized scientific form "d.dddddEexp".
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("{:.5e} always contains an exponent");
    let exp: i32 = exp.parse().expect("{:.5e} exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 6, "six significant digits from {{:.5e}}");

    if (-4..6).contains(&exp) {
        if exp >= 0 {
            let int_len = (exp + 1) as usize;
            let int_part = &digits[..int_len];
            let frac = digits[int_len..].trim_end_matches('0');
            if frac.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac}")
            }
        } else {
            let lead = "0".repeat((-exp - 1) as usize);
            let frac_all = format!("{lead}{digits}");
            format!("0.{}", frac_all.trim_end_matches('0'))
        }
    } else {
        let frac = digits[1..].trim_end_matches('0');
        let mantissa = if frac.is_empty() {
            digits[..1].to_string()
        } else {
            format!("{}.{}", &digits[..1], frac)
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn csv_row(out: &mut String, experiment: &str, agent: &str, row: &StepRow) {
    out.push_str(experiment);
    out.push(',');
    out.push_str(agent);
    out.push(',');
    out.push_str(&row.replication.to_string());
    out.push(',');
    out.push_str(&row.step.to_string());
    out.push(',');
    out.push_str(&row.arm.to_string());
    out.push(',');
    out.push_str(&fmt_sig(row.reward));
    out.push(',');
    out.push_str(&fmt_sig(row.cum_regret));
    out.push(',');
    if let Some(n) = row.samples_used {
        out.push_str(&n.to_string());
    }
    out.push('\n');
}

/// Renders the full result table as CSV (header always present, even with
/// zero rows).
pub fn to_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        csv_row(
            &mut out,
            &result.experiment,
            &result.agent_names[row.agent],
            row,
        );
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    agent: &'a str,
    replication: usize,
    step: usize,
    arm: usize,
    reward: f64,
    cum_regret: f64,
    samples_used: Option<u64>,
}

/// Renders the full result table as a JSON array of row objects with the
/// same fields as the CSV columns; `samples_used` is `null` where the CSV
/// cell is empty.
pub fn to_json(result: &RunResult) -> Result<String> {
    let rows: Vec<JsonRow<'_>> = result
        .rows
        .iter()
        .map(|row| JsonRow {
            experiment: &result.experiment,
            agent: &result.agent_names[row.agent],
            replication: row.replication,
            step: row.step,
            arm: row.arm,
            reward: row.reward,
            cum_regret: row.cum_regret,
            samples_used: row.samples_used,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows)?;
    s.push('\n');
    Ok(s)
}

/// Writes the metadata sidecar (pretty JSON, no timestamps, deterministic).
pub fn write_metadata<W: Write>(mut w: W, result: &RunResult) -> Result<()> {
    let mut s = serde_json::to_string_pretty(&result.metadata)?;
    s.push('\n');
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Per-agent aggregate over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    /// Agent name as in the table.
    pub agent: String,
    /// Mean over replications of the final-step cumulative regret.
    pub mean_final_regret: f64,
    /// Half-width of the 95% normal-approximation confidence band
    /// (1.96 standard errors; zero with fewer than two replications).
    pub half_width: f64,
    /// Mean `samples_used` over all racing decisions, when any row has one.
    pub mean_samples: Option<f64>,
}

/// Aggregates final regrets (and racing sample counts) per agent.
/// With zero replications the summary is empty.
pub fn summarize(result: &RunResult) -> Vec<AgentSummary> {
    let n_agents = result.agent_names.len();
    // Final cumulative regret per (agent, replication): the last step seen.
    let mut finals: Vec<Vec<f64>> = vec![Vec::new(); n_agents];
    let mut last_rep: Vec<Option<usize>> = vec![None; n_agents];
    let mut samples_sum = vec![0.0f64; n_agents];
    let mut samples_n = vec![0u64; n_agents];
    for row in &result.rows {
        let a = row.agent;
        if last_rep[a] == Some(row.replication) {
            *finals[a].last_mut().expect("started replication") = row.cum_regret;
        } else {
            last_rep[a] = Some(row.replication);
            finals[a].push(row.cum_regret);
        }
        if let Some(n) = row.samples_used {
            samples_sum[a] += n as f64;
            samples_n[a] += 1;
        }
    }
    let mut out = Vec::with_capacity(n_agents);
    for (a, name) in result.agent_names.iter().enumerate() {
        let xs = &finals[a];
        if xs.is_empty() {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let half_width = if xs.len() >= 2 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        let mean_samples = if samples_n[a] > 0 {
            Some(samples_sum[a] / samples_n[a] as f64)
        } else {
            None
        };
        out.push(AgentSummary {
            agent: name.clone(),
            mean_final_regret: mean,
            half_width,
            mean_samples,
        });
    }
    out
}

/// Renders the aggregate table for stderr, one line per agent.
pub fn render_summary(summaries: &[AgentSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        out.push_str(&format!(
            "{}: final regret {} ± {}",
            s.agent,
            fmt_sig(s.mean_final_regret),
            fmt_sig(s.half_width)
        ));
        if let Some(m) = s.mean_samples {
            out.push_str(&format!(", mean samples per decision {}", fmt_sig(m)));
        }
        out.push('\n');
    }
    out
}
