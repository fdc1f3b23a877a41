//! JSON run reports with a fixed key order and 10 significant digits.

use serde_json::{Map, Number, Value};

/// `x` rounded to 10 significant digits; non-finite values become `null`.
pub fn round_sig(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

/// Top-level `inputs`, `config_echo`, `metrics`, `timings_ms`, each keeping
/// insertion order.
#[derive(Debug, Clone, Default)]
pub struct Report {
    inputs: Map<String, Value>,
    config_echo: Map<String, Value>,
    metrics: Map<String, Value>,
    timings_ms: Map<String, Value>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn echo(&mut self, entries: &[(&str, String)]) -> &mut Self {
        for (key, value) in entries {
            self.config_echo.insert((*key).to_string(), Value::String(value.clone()));
        }
        self
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), round_sig(value));
        self
    }

    /// Nested metric group, e.g. per-method score summaries.
    pub fn metric_group(&mut self, key: &str, values: &[(&str, f64)]) -> &mut Self {
        let group = values
            .iter()
            .map(|(k, v)| ((*k).to_string(), round_sig(*v)))
            .collect();
        self.metrics.insert(key.to_string(), Value::Object(group));
        self
    }

    pub fn timing(&mut self, key: &str, ms: f64) -> &mut Self {
        self.timings_ms.insert(key.to_string(), round_sig(ms));
        self
    }

    pub fn to_value(&self) -> Value {
        let mut top = Map::new();
        top.insert("inputs".into(), Value::Object(self.inputs.clone()));
        top.insert("config_echo".into(), Value::Object(self.config_echo.clone()));
        top.insert("metrics".into(), Value::Object(self.metrics.clone()));
        top.insert("timings_ms".into(), Value::Object(self.timings_ms.clone()));
        Value::Object(top)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        text.push('\n');
        text
    }
}
