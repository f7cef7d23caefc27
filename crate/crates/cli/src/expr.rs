//! Lengths given either literally or relative to the wavelength, e.g.
//! `2.5`, `2lambda`, `0.5*lambda`, `lambda/30`, `3λ/2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Length {
    Absolute(f64),
    /// Multiple of the wavelength.
    Wavelengths(f64),
}

impl Length {
    pub fn resolve(self, wavelength: f64) -> f64 {
        match self {
            Length::Absolute(v) => v,
            Length::Wavelengths(m) => m * wavelength,
        }
    }
}

fn number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

impl FromStr for Length {
    type Err = String;

    fn from_str(raw: &str) -> Result<Self, String> {
        let s = raw.trim().to_ascii_lowercase().replace('λ', "lambda");
        let Some(pos) = s.find("lambda") else {
            return number(&s).map(Length::Absolute);
        };
        let (head, tail) = (&s[..pos], &s[pos + "lambda".len()..]);
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { number(head)? };
        let tail = tail.trim();
        let divisor = if tail.is_empty() {
            1.0
        } else {
            let d = tail
                .strip_prefix('/')
                .ok_or_else(|| format!("cannot parse `{raw}` as a length"))?;
            let d = number(d)?;
            if d == 0.0 {
                return Err(format!("division by zero in `{raw}`"));
            }
            d
        };
        Ok(Length::Wavelengths(factor / divisor))
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Length::Absolute(v) => write!(f, "{v}"),
            Length::Wavelengths(m) => write!(f, "{m}lambda"),
        }
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Length::Absolute(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Length::Absolute(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        let cases = [
            ("2.5", Length::Absolute(2.5)),
            ("2lambda", Length::Wavelengths(2.0)),
            ("0.5*lambda", Length::Wavelengths(0.5)),
            ("lambda", Length::Wavelengths(1.0)),
            ("lambda/30", Length::Wavelengths(1.0 / 30.0)),
            ("3λ/2", Length::Wavelengths(1.5)),
            (" 4 Lambda ", Length::Wavelengths(4.0)),
        ];
        for (text, want) in cases {
            assert_eq!(text.parse::<Length>().unwrap(), want, "{text}");
        }
    }

    #[test]
    fn rejects_garbage() {
        for text in ["", "x", "2lambdas", "lambda/0", "lambda*2", "nan"] {
            assert!(text.parse::<Length>().is_err(), "{text}");
        }
    }

    #[test]
    fn json_round_trip() {
        for l in [Length::Absolute(0.2), Length::Wavelengths(3.0)] {
            let json = serde_json::to_string(&l).unwrap();
            assert_eq!(serde_json::from_str::<Length>(&json).unwrap(), l);
        }
    }

    #[test]
    fn resolves() {
        assert_eq!(Length::Wavelengths(2.0).resolve(1.5), 3.0);
        assert_eq!(Length::Absolute(2.0).resolve(1.5), 2.0);
    }
}
