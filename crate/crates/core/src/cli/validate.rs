use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use super::config::{ExperimentSpec, ModelConfig, KINDS};
use crate::error::{Error, Result};
use crate::skew::SkewModel;

/// One violated invariant. `pointer` is a JSON pointer into the document;
/// `line` is set for syntax errors and for fields that could be located.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub pointer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.pointer_or_root(), self.message),
            None => write!(f, "{}: {}", self.pointer_or_root(), self.message),
        }
    }
}

impl Diagnostic {
    fn pointer_or_root(&self) -> &str {
        if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        }
    }
}

/// Schema check of a model, skew model or experiment file. An empty list
/// means the file is valid.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(validate_str(&text, path.parent()))
}

/// Like [`validate_config`] on a string; model paths are checked relative to
/// `base_dir` when given.
pub fn validate_str(text: &str, base_dir: Option<&Path>) -> Vec<Diagnostic> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            return vec![Diagnostic {
                pointer: String::new(),
                line: Some(e.line()),
                message: format!("not valid JSON: {e}"),
            }]
        }
    };
    let mut v = Validator { text, base_dir, out: Vec::new() };
    v.document(&value);
    v.out
}

struct Validator<'a> {
    text: &'a str,
    base_dir: Option<&'a Path>,
    out: Vec<Diagnostic>,
}

fn finite(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

impl Validator<'_> {
    fn push(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        let pointer = pointer.into();
        let line = self.locate(&pointer);
        self.out.push(Diagnostic { pointer, line, message: message.into() });
    }

    /// Line of the first occurrence of the last object key in `pointer`.
    fn locate(&self, pointer: &str) -> Option<usize> {
        let key = pointer.rsplit('/').find(|s| !s.is_empty() && s.parse::<usize>().is_err())?;
        let needle = format!("\"{key}\"");
        self.text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
    }

    fn document(&mut self, value: &Value) {
        let Some(obj) = value.as_object() else {
            self.push("", "expected a JSON object");
            return;
        };
        if obj.contains_key("kind") && !obj.contains_key("fiber") {
            self.experiment(obj);
        } else if obj.contains_key("base") || obj.contains_key("fiber") {
            self.skew_model("", value);
        } else if obj.contains_key("family") || obj.contains_key("maps") {
            self.model("", value);
        } else {
            self.push(
                "",
                "not a model, skew model or experiment spec: expected `kind`, `family`, `maps` or `base`/`fiber`",
            );
        }
    }

    fn model(&mut self, at: &str, value: &Value) {
        let before = self.out.len();
        let Some(obj) = value.as_object() else {
            self.push(at, "model must be an object or a path string");
            return;
        };
        if let Some(family) = obj.get("family") {
            self.family(at, obj, family);
        } else if let Some(maps) = obj.get("maps") {
            self.affine(at, maps);
            if let Some(x0) = obj.get("x0") {
                if finite(x0).is_none() {
                    self.push(format!("{at}/x0"), "x0 must be a finite number");
                }
            }
        } else {
            self.push(at, "model needs `maps` or `family`");
        }
        if self.out.len() == before {
            let built =
                serde_json::from_value::<ModelConfig>(value.clone()).map_err(Error::from).and_then(|m| m.build());
            if let Err(e) = built {
                self.push(at, e.to_string());
            }
        }
    }

    fn family(&mut self, at: &str, obj: &Map<String, Value>, family: &Value) {
        let mut range = |key: &str, lo: f64, hi: f64, closed_lo: bool| match obj.get(key).map(finite) {
            None => self.push(format!("{at}/{key}"), format!("missing `{key}`")),
            Some(None) => self.push(format!("{at}/{key}"), format!("`{key}` must be a finite number")),
            Some(Some(x)) => {
                let ok = (if closed_lo { x >= lo } else { x > lo }) && x < hi;
                if !ok {
                    let open = if closed_lo { "[" } else { "(" };
                    self.push(format!("{at}/{key}"), format!("`{key}` = {x} must lie in {open}{lo}, {hi})"));
                }
            }
        };
        match family.as_str() {
            Some("bernoulli") => range("lambda", 0.0, 1.0, false),
            Some("ap") => {
                range("a", 0.0, 1.0, true);
                range("p", 0.0, 1.0, false);
            }
            Some("heavy-tail") => {
                range("a", 0.0, 1.0, true);
                range("p0", 0.0, 1.0, false);
                if obj.get("tail").is_none() {
                    self.push(format!("{at}/tail"), "missing `tail`");
                }
                if !obj.get("n_max").is_some_and(|n| n.as_u64().is_some_and(|n| n >= 1)) {
                    self.push(format!("{at}/n_max"), "`n_max` must be a positive integer");
                }
            }
            _ => self.push(format!("{at}/family"), "family must be one of bernoulli, ap, heavy-tail"),
        }
    }

    fn affine(&mut self, at: &str, maps: &Value) {
        let Some(list) = maps.as_array() else {
            self.push(format!("{at}/maps"), "`maps` must be an array");
            return;
        };
        if list.is_empty() {
            self.push(format!("{at}/maps"), "at least one map is required");
            return;
        }
        let mut total = 0.0;
        let mut probs_ok = true;
        for (i, m) in list.iter().enumerate() {
            let here = format!("{at}/maps/{i}");
            let Some(o) = m.as_object() else {
                self.push(here, "map must be an object");
                probs_ok = false;
                continue;
            };
            if let Some(kind) = o.get("kind") {
                if kind.as_str() != Some("affine") {
                    self.push(
                        format!("{here}/kind"),
                        format!("unsupported map kind {kind}; model files take affine maps"),
                    );
                }
            }
            for (key, what) in [("a", "slope"), ("b", "offset")] {
                match o.get(key) {
                    None => self.push(format!("{here}/{key}"), format!("missing {what} `{key}`")),
                    Some(v) if finite(v).is_none() => {
                        self.push(format!("{here}/{key}"), format!("{what} must be a finite number, got {v}"))
                    }
                    _ => {}
                }
            }
            match o.get("p").map(finite) {
                None => {
                    self.push(format!("{here}/p"), "missing probability `p`");
                    probs_ok = false;
                }
                Some(Some(p)) if (0.0..=1.0).contains(&p) => total += p,
                Some(_) => {
                    self.push(format!("{here}/p"), "probability must be a number in [0, 1]");
                    probs_ok = false;
                }
            }
        }
        if probs_ok && (total - 1.0).abs() > 1e-9 {
            self.push(format!("{at}/maps"), format!("probabilities sum to {total}, expected 1"));
        }
    }

    fn skew_model(&mut self, at: &str, value: &Value) {
        let Some(obj) = value.as_object() else {
            self.push(at, "skew model must be an object or a path string");
            return;
        };
        for key in ["base", "fiber"] {
            if !obj.contains_key(key) {
                self.push(format!("{at}/{key}"), format!("missing `{key}` block"));
            }
        }
        if !(obj.contains_key("base") && obj.contains_key("fiber")) {
            return;
        }
        match serde_json::from_value::<SkewModel>(value.clone()) {
            Ok(mut m) => {
                if let Err(e) = m.validate() {
                    self.push(at, e.to_string());
                }
            }
            Err(e) => self.push(at, format!("malformed skew model: {e}")),
        }
    }

    fn source(&mut self, at: &str, value: &Value, skew: bool) {
        match value {
            Value::String(p) => {
                if let Some(dir) = self.base_dir {
                    let path = dir.join(p);
                    match std::fs::read_to_string(&path) {
                        Err(e) => self.push(at, format!("cannot read model file {}: {e}", path.display())),
                        Ok(text) => {
                            for d in validate_str(&text, path.parent()) {
                                self.out.push(Diagnostic {
                                    pointer: format!("{at}{}", d.pointer),
                                    line: None,
                                    message: format!("{}: {}", path.display(), d.message),
                                });
                            }
                        }
                    }
                }
            }
            v if skew => self.skew_model(at, v),
            v => self.model(at, v),
        }
    }

    fn experiment(&mut self, obj: &Map<String, Value>) {
        let kind = obj.get("kind").and_then(Value::as_str).unwrap_or_default();
        if !KINDS.contains(&kind) {
            self.push("/kind", format!("unknown kind `{kind}`; expected one of {}", KINDS.join(", ")));
            return;
        }
        let before = self.out.len();
        let required: &[&str] = match kind {
            "solve" | "certify" => &["model"],
            "ergodicity" => &["model", "n_grid", "chains"],
            "exp-moment" => &["a", "p", "b_values"],
            "tail" => &["a", "p"],
            "lipschitz" => &["lambdas", "h", "qs"],
            "closeness" => &["model0", "model1", "q"],
            "response" => &["lambdas", "h_schedule"],
            "skew-converge" => &["model", "k_grid", "realizations"],
            _ => &[],
        };
        for key in required {
            if !obj.contains_key(*key) {
                self.push(format!("/{key}"), format!("`{kind}` requires `{key}`"));
            }
        }
        for key in ["model", "model0", "model1"] {
            if let Some(m) = obj.get(key) {
                self.source(&format!("/{key}"), m, kind == "skew-converge" && key == "model");
            }
        }
        if let Some(m) = obj.get("iid_check").and_then(|c| c.get("model")) {
            self.source("/iid_check/model", m, false);
        }
        if let Some(seed) = obj.get("seed") {
            if seed.as_u64().is_none() {
                self.push("/seed", "seed must be a nonnegative integer");
            }
        }
        if self.out.len() == before {
            if let Err(e) = serde_json::from_value::<ExperimentSpec>(Value::Object(obj.clone())) {
                self.push("", format!("malformed `{kind}` spec: {e}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_model_is_clean() {
        let d = validate_str(
            r#"{"maps": [{"kind": "affine", "a": 0.5, "b": 0, "p": 0.5}, {"kind": "affine", "a": 0.5, "b": 0.5, "p": 0.5}]}"#,
            None,
        );
        assert!(d.is_empty(), "{d:?}");
        assert!(validate_str(r#"{"family": "bernoulli", "lambda": 0.5}"#, None).is_empty());
    }

    #[test]
    fn probability_sum_is_named() {
        let d = validate_str(r#"{"maps": [{"a": 0.5, "b": 0, "p": 0.4}, {"a": 0.5, "b": 0.5, "p": 0.5}]}"#, None);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].pointer, "/maps");
        assert!(d[0].message.contains("sum to 0.9"), "{}", d[0].message);
    }

    #[test]
    fn non_finite_slope() {
        let d = validate_str(r#"{"maps": [{"a": "inf", "b": 0, "p": 1}]}"#, None);
        assert_eq!(d[0].pointer, "/maps/0/a");
        assert!(d[0].message.contains("slope"));
        // an overflowing literal is rejected by the parser with its line
        let d = validate_str("{\"maps\": [\n{\"a\": 1e999, \"b\": 0, \"p\": 1}]}", None);
        assert_eq!(d[0].line, Some(2));
    }

    #[test]
    fn lists_every_violation() {
        let d = validate_str(
            r#"{"maps": [{"a": null, "b": 0, "p": 0.5}, {"kind": "sine", "a": 0.5, "b": "x", "p": 0.2}]}"#,
            None,
        );
        let pointers: Vec<&str> = d.iter().map(|d| d.pointer.as_str()).collect();
        assert_eq!(pointers, ["/maps/0/a", "/maps/1/kind", "/maps/1/b", "/maps"]);
    }

    #[test]
    fn experiment_checks() {
        let d = validate_str(r#"{"kind": "closeness", "model0": {"family": "bernoulli", "lambda": 1.5}}"#, None);
        let pointers: Vec<&str> = d.iter().map(|d| d.pointer.as_str()).collect();
        assert_eq!(pointers, ["/model1", "/q", "/model0/lambda"]);
        let d = validate_str(r#"{"kind": "explode"}"#, None);
        assert_eq!(d[0].pointer, "/kind");
    }

    #[test]
    fn skew_model_checks() {
        let ok =
            r#"{"base": {"kind": "rotation"}, "fiber": {"kind": "trig", "a": {"constant": 0.5}, "b": {"cos": [1]}}}"#;
        assert!(validate_str(ok, None).is_empty());
        let bad = r#"{"base": {"kind": "markov-shift", "transition": [[0.5, 0.4], [0.5, 0.5]]}, "fiber": {"kind": "symbolic", "maps": [{"a": 0.5, "b": 0}, {"a": 0.5, "b": 1}]}}"#;
        let d = validate_str(bad, None);
        assert!(d[0].message.contains("row 0"), "{d:?}");
    }

    #[test]
    fn syntax_error_has_line() {
        let d = validate_str("{\n\"maps\": [\n}", None);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, Some(3));
    }
}
