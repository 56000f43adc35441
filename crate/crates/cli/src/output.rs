//! Line-oriented and JSON record rendering.
//!
//! Records are ordered key-value lists; the text form prints one `key=value`
//! per line, the JSON form one object with the same keys. Floats use the
//! shortest round-trip representation, so identical runs print identical
//! bytes.

use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Record {
    fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new() -> Self {
        Record::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.push((key.to_string(), value.into()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        // serde_json rejects non-finite numbers; keep them as strings.
        let v = serde_json::Number::from_f64(value)
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(value.to_string()));
        self.fields.push((key.to_string(), v));
    }

    fn render_scalar(value: &Value) -> String {
        match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            out.push_str(k);
            out.push('=');
            out.push_str(&Self::render_scalar(v));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut map = Map::new();
        for (k, v) in &self.fields {
            map.insert(k.clone(), v.clone());
        }
        let mut s = Value::Object(map).to_string();
        s.push('\n');
        s
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            self.to_json()
        } else {
            self.to_text()
        }
    }
}
