//! Parsing of the compact `family:key=value,...` names used in config files.

use crate::error::{Error, Result};

pub(crate) struct Tagged<'a> {
    pub tag: &'a str,
    pub args: Vec<Arg<'a>>,
}

pub(crate) enum Arg<'a> {
    Keyed(&'a str, &'a str),
    Positional(&'a str),
}

pub(crate) fn parse_tagged(s: &str) -> Tagged<'_> {
    let s = s.trim();
    let (tag, rest) = match s.split_once(':') {
        Some((t, r)) => (t.trim(), r.trim()),
        None => (s, ""),
    };
    let args = rest
        .split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| match a.split_once('=') {
            Some((k, v)) => Arg::Keyed(k.trim(), v.trim()),
            None => Arg::Positional(a),
        })
        .collect();
    Tagged { tag, args }
}

impl<'a> Tagged<'a> {
    /// Collect keyed arguments, rejecting unknown keys and positional ones.
    pub fn keyed(&self, allowed: &[&str]) -> Result<Vec<(&'a str, f64)>> {
        let mut out = Vec::new();
        for arg in &self.args {
            match arg {
                Arg::Keyed(k, v) => {
                    if !allowed.contains(k) {
                        return Err(Error::InvalidConfig(format!(
                            "unknown argument `{k}` for `{}`",
                            self.tag
                        )));
                    }
                    out.push((*k, parse_real(v)?));
                }
                Arg::Positional(v) => {
                    return Err(Error::InvalidConfig(format!(
                        "expected key=value for `{}`, got `{v}`",
                        self.tag
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn get(&self, allowed: &[&str], key: &str) -> Result<Option<f64>> {
        Ok(self
            .keyed(allowed)?
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v))
    }

    pub fn require(&self, allowed: &[&str], key: &str) -> Result<f64> {
        self.get(allowed, key)?
            .ok_or_else(|| Error::InvalidConfig(format!("`{}` requires `{key}=<value>`", self.tag)))
    }

    pub fn positional(&self) -> Result<Vec<f64>> {
        self.args
            .iter()
            .map(|a| match a {
                Arg::Positional(v) => parse_real(v),
                Arg::Keyed(k, _) => Err(Error::InvalidConfig(format!(
                    "unexpected key `{k}` for `{}`",
                    self.tag
                ))),
            })
            .collect()
    }
}

/// Parse a real number; `2^-12` style powers are accepted.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let base: f64 = base
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("not a number: `{s}`")))?;
        let exp: i32 = exp
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("not an integer exponent: `{s}`")))?;
        return Ok(base.powi(exp));
    }
    s.parse()
        .map_err(|_| Error::InvalidConfig(format!("not a number: `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_two() {
        assert_eq!(parse_real("2^-12").unwrap(), 1.0 / 4096.0);
        assert_eq!(parse_real(" 0.5 ").unwrap(), 0.5);
        assert!(parse_real("two").is_err());
    }

    #[test]
    fn tagged_forms() {
        let t = parse_tagged("cucker_smale:beta=5, theta=1");
        assert_eq!(t.tag, "cucker_smale");
        assert_eq!(t.require(&["beta", "theta"], "beta").unwrap(), 5.0);
        assert!(t.keyed(&["beta"]).is_err());

        let u = parse_tagged("uniform:-1,1");
        assert_eq!(u.positional().unwrap(), vec![-1.0, 1.0]);
        assert_eq!(parse_tagged("zero").args.len(), 0);
    }
}
