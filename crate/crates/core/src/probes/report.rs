use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub value: f64,
}

/// Outcome of one probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub params: Value,
    pub samples: Vec<Sample>,
    pub summary: Map<String, Value>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    /// Run-specific data (timings, host); excluded from comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

impl ProbeReport {
    pub fn new(probe: &str, params: Value) -> Self {
        ProbeReport {
            probe: probe.to_string(),
            params,
            samples: Vec::new(),
            summary: Map::new(),
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
            metadata: None,
        }
    }

    pub fn sample(&mut self, id: impl Into<String>, value: f64) {
        self.samples.push(Sample { id: id.into(), value });
    }

    pub fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }

    pub fn sample_value(&self, id: &str) -> Option<f64> {
        self.samples.iter().find(|s| s.id == id).map(|s| s.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with `metadata` removed; equal inputs give equal bytes.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.metadata = None;
        copy.to_json()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,value\n");
        for s in &self.samples {
            let id = if s.id.contains([',', '"']) {
                format!("\"{}\"", s.id.replace('"', "\"\""))
            } else {
                s.id.clone()
            };
            out.push_str(&format!("{id},{}\n", s.value));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv_shape() {
        let mut r = ProbeReport::new("demo", serde_json::json!({"p": 2.0}));
        r.sample("a", 1.5);
        r.sample("b,c", f64::NAN);
        r.put("max_ratio", 1.5);
        r.verdict = Verdict::Pass;
        r.metadata = Some(serde_json::json!({"elapsed_s": 0.1}));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["verdict"], "PASS");
        assert_eq!(v["samples"][0]["id"], "a");
        assert!(v["samples"][1]["value"].is_null());
        assert!(v.get("metadata").is_some());
        assert!(!r.deterministic_json().contains("metadata"));
        assert_eq!(r.to_csv(), "id,value\na,1.5\n\"b,c\",NaN\n");
    }
}
