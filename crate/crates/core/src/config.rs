//! Plain-text `name = value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{DelayParams, DiffusionParams, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `name = value`", i + 1)))?;
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: bad key `{key}`", i + 1)));
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::Config(format!("`{key}`: `{s}` is not a finite number"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| Error::Config(format!("missing `{key}`")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Config(format!("`{key}`: `{s}` is not a nonnegative integer"))),
        }
    }

    pub fn i64_or(&self, key: &str, default: i64) -> Result<i64> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Config(format!("`{key}`: `{s}` is not an integer"))),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.f64("r")?, self.f64("a")?, self.f64("c")?, self.f64("m")?, self.f64("p")?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn diffusion_params(&self) -> Result<DiffusionParams> {
        DiffusionParams::new(self.f64("d1")?, self.f64("d2")?, self.f64("l")?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn delay_params(&self) -> Result<DelayParams> {
        DelayParams::new(self.f64("tau1")?, self.f64("tau2")?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn params_to_kv(q: &ModelParams, diff: Option<&DiffusionParams>, delay: Option<&DelayParams>) -> String {
    let mut cfg = KvConfig::default();
    for (k, v) in [("r", q.r), ("a", q.a), ("c", q.c), ("m", q.m), ("p", q.p)] {
        cfg.set(k, crate::output::fmt17(v));
    }
    if let Some(d) = diff {
        for (k, v) in [("d1", d.d1), ("d2", d.d2), ("l", d.l)] {
            cfg.set(k, crate::output::fmt17(v));
        }
    }
    if let Some(t) = delay {
        cfg.set("tau1", crate::output::fmt17(t.tau1));
        cfg.set("tau2", crate::output::fmt17(t.tau2));
    }
    cfg.to_text()
}

/// A spatial profile `a0 + sum a_k cos(k x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineProfile {
    pub constant: f64,
    pub terms: Vec<(f64, f64)>,
}

impl CosineProfile {
    pub fn constant(a0: f64) -> Self {
        Self { constant: a0, terms: Vec::new() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.constant + self.terms.iter().map(|(amp, k)| amp * (k * x).cos()).sum::<f64>()
    }

    /// Parses expressions such as `0.6 + 0.1*cos(2*x)` or `0.08 - 0.02*cos(2x)`.
    pub fn parse(expr: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse profile `{expr}`"));
        let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        let mut terms_raw = Vec::new();
        let mut start = 0;
        let bytes = compact.as_bytes();
        for i in 1..bytes.len() {
            let prev = bytes[i - 1];
            if (bytes[i] == b'+' || bytes[i] == b'-') && prev != b'e' && prev != b'E' && prev != b'(' && prev != b'*' {
                terms_raw.push(&compact[start..i]);
                start = i;
            }
        }
        terms_raw.push(&compact[start..]);

        let mut profile = CosineProfile::constant(0.0);
        for t in terms_raw {
            let (sign, body) = match t.as_bytes()[0] {
                b'+' => (1.0, &t[1..]),
                b'-' => (-1.0, &t[1..]),
                _ => (1.0, t),
            };
            if let Some(pos) = body.find("cos(") {
                let coef = match body[..pos].trim_end_matches('*') {
                    "" => 1.0,
                    s => s.parse::<f64>().map_err(|_| bad())?,
                };
                let inner = body[pos + 4..].strip_suffix(')').ok_or_else(bad)?;
                let k = match inner.strip_suffix('x').ok_or_else(bad)?.trim_end_matches('*') {
                    "" => 1.0,
                    s => s.parse::<f64>().map_err(|_| bad())?,
                };
                profile.terms.push((sign * coef, k));
            } else {
                profile.constant += sign * body.parse::<f64>().map_err(|_| bad())?;
            }
        }
        Ok(profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_roundtrips_params() {
        let q = ModelParams::reference(0.25, 1.4);
        let d = DiffusionParams::new(1.496, 0.000688, 2.0).unwrap();
        let t = DelayParams::new(2.2, 15.0).unwrap();
        let text = params_to_kv(&q, Some(&d), Some(&t));
        let cfg = KvConfig::parse(&text).unwrap();
        assert_eq!(cfg.model_params().unwrap(), q);
        assert_eq!(cfg.diffusion_params().unwrap(), d);
        assert_eq!(cfg.delay_params().unwrap(), t);
    }

    #[test]
    fn comments_and_errors() {
        let cfg = KvConfig::parse("# header\nr = 1.1 # trailing\n\n a=0.23\n").unwrap();
        assert_eq!(cfg.f64("r").unwrap(), 1.1);
        assert_eq!(cfg.f64("a").unwrap(), 0.23);
        assert!(KvConfig::parse("r 1.1").is_err());
        assert!(KvConfig::parse("r = 1\nr = 2").is_err());
        assert!(KvConfig::parse("r = x").unwrap().f64("r").is_err());
        assert!(KvConfig::parse("r = 1").unwrap().model_params().is_err());
    }

    #[test]
    fn profiles() {
        let p = CosineProfile::parse("0.6 + 0.1*cos(2*x)").unwrap();
        assert_eq!(p, CosineProfile { constant: 0.6, terms: vec![(0.1, 2.0)] });
        let p = CosineProfile::parse("0.08 - 0.02 cos(3x)").unwrap();
        assert_eq!(p, CosineProfile { constant: 0.08, terms: vec![(-0.02, 3.0)] });
        let p = CosineProfile::parse("1e-1 + cos(x) - 2.5e-3*cos(0.5*x)").unwrap();
        assert_eq!(p.terms, vec![(1.0, 1.0), (-2.5e-3, 0.5)]);
        assert!((p.eval(0.0) - (0.1 + 1.0 - 2.5e-3)).abs() < 1e-15);
        assert!(CosineProfile::parse("sin(x)").is_err());
        assert!(CosineProfile::parse("").is_err());
    }
}
