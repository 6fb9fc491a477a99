//! Complex literals such as `0.3+0.4i`, `-i`, `2.5e-3-1e-2i` or `1`.
//!
//! Formatting uses the shortest round-trip representation of each part, so
//! `parse(format(z)) == z` bit for bit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use weakval_core::C64;

/// A complex number that reads and writes as `re+imi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx(pub C64);

impl Cx {
    pub fn real(re: f64) -> Self {
        Cx(C64::new(re, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid complex literal `{0}`")]
pub struct LiteralError(pub String);

fn parse_real(s: &str, whole: &str) -> Result<f64, LiteralError> {
    match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| LiteralError(whole.to_string())),
    }
}

impl FromStr for Cx {
    type Err = LiteralError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(LiteralError(raw.to_string()));
        }
        let Some(body) = s.strip_suffix('i') else {
            let re = s.parse::<f64>().ok().filter(|x| x.is_finite());
            return re.map(Cx::real).ok_or_else(|| LiteralError(raw.to_string()));
        };
        // Split at the last sign that is neither leading nor an exponent sign.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => {
                let re = body[..k]
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| LiteralError(raw.to_string()))?;
                (re, parse_real(&body[k..], raw)?)
            }
            None => (0.0, parse_real(body, raw)?),
        };
        Ok(Cx(C64::new(re, im)))
    }
}

impl fmt::Display for Cx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let C64 { re, im } = self.0;
        if im == 0.0 && im.is_sign_positive() {
            return write!(f, "{re}");
        }
        if im.is_sign_negative() {
            write!(f, "{re}-{}i", -im)
        } else {
            write!(f, "{re}+{im}i")
        }
    }
}

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Cx::real(n as f64)),
            Raw::Float(x) => Ok(Cx::real(x)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
