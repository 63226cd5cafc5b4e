//! Run reports: one record per check, with a summary verdict.

use std::collections::BTreeMap;

use clifford_l2::identity::{Certificate, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    /// The mathematical statement the check traces back to.
    pub anchor: String,
    pub parameters: BTreeMap<String, Value>,
    pub verdict: Verdict,
    pub numbers: BTreeMap<String, Value>,
}

impl Record {
    pub fn new(id: &str, anchor: &str, ok: bool) -> Self {
        Record {
            id: id.to_string(),
            anchor: anchor.to_string(),
            parameters: BTreeMap::new(),
            verdict: Verdict::from_bool(ok),
            numbers: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn num(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.numbers.insert(key.to_string(), value.into());
        self
    }

    pub fn from_certificate(c: &Certificate, anchor: &str) -> Self {
        Record {
            id: c.identity.clone(),
            anchor: anchor.to_string(),
            parameters: BTreeMap::from([
                ("n".to_string(), Value::from(c.n)),
                ("scope".to_string(), Value::from(c.scope.clone())),
            ]),
            verdict: c.verdict,
            numbers: BTreeMap::from([
                ("checked".to_string(), Value::from(c.checked)),
                ("failures".to_string(), Value::from(c.failures)),
                ("detail".to_string(), Value::from(c.detail.clone())),
            ]),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub n: usize,
    pub seed: u64,
    pub records: Vec<Record>,
    pub summary: Verdict,
}

impl RunReport {
    pub fn new(command: &str, n: usize, seed: u64, records: Vec<Record>) -> Self {
        let summary = Verdict::from_bool(records.iter().all(Record::passed));
        RunReport {
            command: command.to_string(),
            n,
            seed,
            records,
            summary,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.passed()
    }

    pub fn record(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.passed())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is plain data");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_requires_every_record() {
        let ok = Record::new("a", "x", true);
        let bad = Record::new("b", "y", false).num("v", 1.5);
        assert!(RunReport::new("t", 1, 0, vec![ok.clone()]).passed());
        let r = RunReport::new("t", 1, 0, vec![ok, bad]);
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert!(r.to_json().contains("\"summary\": \"fail\""));
    }
}
