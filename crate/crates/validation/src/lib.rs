//! Reporting helpers for the acceptance suite in `tests/acceptance.rs`.
//!
//! The suite lives in its own package so that it runs after every other test
//! target of the workspace.

use std::fmt;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    /// Whether every numeric condition held.
    pub conditions_met: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub time_limit: Duration,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.conditions_met && self.elapsed <= self.time_limit
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.2} s, limit {} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.time_limit.as_secs()
        )
    }
}

/// Accumulates the named sub-conditions of one criterion.
#[derive(Debug, Default)]
pub struct Conditions {
    parts: Vec<(String, bool)>,
}

impl Conditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, ok: bool, text: impl Into<String>) -> bool {
        self.parts.push((text.into(), ok));
        ok
    }

    pub fn all_met(&self) -> bool {
        self.parts.iter().all(|(_, ok)| *ok)
    }

    /// Semicolon-separated description with failing parts marked `!`.
    pub fn describe(&self) -> String {
        self.parts
            .iter()
            .map(|(t, ok)| if *ok { t.clone() } else { format!("!{t}") })
            .collect::<Vec<_>>()
            .join("; ")
    }
}
