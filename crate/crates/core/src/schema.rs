//! Model descriptions shared by the CLI and the FFI layer.
//!
//! A model is given either as JSON (inline or in a file) or in the shorthand
//! `kind:key=val,...`. Scaled-process models join an intensity and a prior
//! with `@`, as in `stable:C=1,sigma=0.5@exponential:rate=1`.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::levy::LevyIntensity;
use crate::sp::SpModel;
use crate::species::GibbsModel;

/// Any model the tools can run.
#[derive(Debug, Clone)]
pub enum Model {
    Crm(LevyIntensity),
    Sp(SpModel),
    Species(GibbsModel),
}

const SPECIES_KINDS: [&str; 3] = ["dirichlet", "pitman_yor", "pitman-yor"];

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Crm(_) => "crm",
            Model::Sp(_) => "sp",
            Model::Species(_) => "species",
        }
    }

    pub fn to_json(&self) -> Result<Value> {
        match self {
            Model::Crm(l) => l.to_json(),
            Model::Sp(m) => m.to_json(),
            Model::Species(g) => g.to_json(),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::parse("model must be a JSON object"))?;
        if obj.contains_key("levy") {
            return Ok(Model::Sp(SpModel::from_json(v)?));
        }
        match obj.get("kind").and_then(Value::as_str) {
            Some(k) if SPECIES_KINDS.contains(&k) => Ok(Model::Species(GibbsModel::from_json(v)?)),
            Some(_) => Ok(Model::Crm(LevyIntensity::from_json(v)?)),
            None => Err(Error::parse("model needs a \"kind\" or a \"levy\" field")),
        }
    }

    /// Parses inline JSON, a path to a JSON file, or shorthand, in that order.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            return Model::from_json(&serde_json::from_str(t)?);
        }
        if !t.contains(':') && Path::new(t).is_file() {
            let body = std::fs::read_to_string(t)?;
            return Model::from_json(&serde_json::from_str(&body)?);
        }
        Model::from_json(&shorthand_to_json(t)?)
    }
}

/// `kind:key=val,...` as `{"kind": kind, "params": {key: val}}`; `upper` is
/// lifted out of the parameters.
fn single_to_json(text: &str) -> Result<Value> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let kind = kind.trim().replace('-', "_");
    if kind.is_empty() {
        return Err(Error::parse(format!("missing model kind in \"{text}\"")));
    }
    let mut params = Map::new();
    let mut out = Map::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = item
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("expected key=value, got \"{item}\"")))?;
        let num: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("value of \"{key}\" is not a number: \"{val}\"")))?;
        let key = key.trim();
        let target = if key == "upper" { &mut out } else { &mut params };
        if target.insert(key.to_string(), Value::from(num)).is_some() {
            return Err(Error::parse(format!("parameter \"{key}\" given twice")));
        }
    }
    out.insert("kind".into(), Value::from(kind));
    out.insert("params".into(), Value::Object(params));
    Ok(Value::Object(out))
}

/// Shorthand text as model JSON.
pub fn shorthand_to_json(text: &str) -> Result<Value> {
    match text.split_once('@') {
        Some((levy, prior)) => Ok(serde_json::json!({
            "levy": single_to_json(levy)?,
            "prior": single_to_json(prior)?,
        })),
        None => single_to_json(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_forms() {
        assert!(matches!(Model::parse("stable-beta:alpha=2,c=1,sigma=0.5").unwrap(), Model::Crm(_)));
        assert!(matches!(Model::parse("dirichlet:theta=1").unwrap(), Model::Species(_)));
        assert!(matches!(Model::parse("pitman-yor:sigma=0.5,theta=1").unwrap(), Model::Species(_)));
        let sp = Model::parse("stable:C=1,sigma=0.5@exponential:rate=2").unwrap();
        assert_eq!(
            sp.to_json().unwrap(),
            serde_json::json!({
                "levy": {"kind": "stable", "params": {"C": 1.0, "sigma": 0.5}},
                "prior": {"kind": "exponential", "params": {"rate": 2.0}}
            })
        );
        let restricted = Model::parse("stable:C=1,sigma=0.5,upper=1").unwrap();
        match restricted {
            Model::Crm(l) => assert_eq!(l.upper(), 1.0),
            _ => panic!("expected a CRM"),
        }
    }

    #[test]
    fn json_forms_and_errors() {
        let m = Model::parse(r#"{"kind":"gamma","params":{"theta":1}}"#).unwrap();
        assert_eq!(m.kind(), "crm");
        assert!(Model::parse("stable-beta:alpha=two").is_err());
        assert!(Model::parse("stable-beta:alpha=1,alpha=2").is_err());
        assert!(Model::parse("warp:x=1").is_err());
        assert!(Model::parse("{oops").is_err());
    }
}
