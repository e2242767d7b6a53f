//! Angles written either as exact rational multiples of pi or as radians.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `num * pi / den` in lowest terms, or a plain radian value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AngleRepr", into = "String")]
pub enum Angle {
    PiMultiple { num: i64, den: u64 },
    Radians(f64),
}

impl Angle {
    pub fn pi_multiple(num: i64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter(
                "angle denominator must be nonzero".into(),
            ));
        }
        if num == 0 {
            return Ok(Angle::PiMultiple { num: 0, den: 1 });
        }
        let g = num.unsigned_abs().gcd(&den);
        let num = num / i64::try_from(g).expect("gcd divides num and fits in i64");
        Ok(Angle::PiMultiple { num, den: den / g })
    }

    pub fn from_radians(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Angle::Radians(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "angle must be finite, got {value}"
            )))
        }
    }

    pub fn radians(self) -> f64 {
        match self {
            Angle::PiMultiple { num, den } => num as f64 * PI / den as f64,
            Angle::Radians(r) => r,
        }
    }

    /// Orders by value in radians.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.radians().total_cmp(&other.radians())
    }
}

/// Parses `pi/18`, `-pi/12`, `2pi/3`, `2*pi/3`, `pi`, `π/4`, or a decimal
/// number of radians. Whitespace is ignored.
pub fn parse_angle(text: &str) -> Result<Angle> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidParameter(format!("cannot parse angle {text:?}"));
    if compact.is_empty() {
        return Err(bad());
    }
    let pi_at = compact
        .find("pi")
        .map(|i| (i, 2))
        .or_else(|| compact.find('π').map(|i| (i, 'π'.len_utf8())));
    let Some((at, width)) = pi_at else {
        let value: f64 = compact.parse().map_err(|_| bad())?;
        return Angle::from_radians(value).map_err(|_| bad());
    };

    let (head, tail) = (&compact[..at], &compact[at + width..]);
    let (negative, coefficient) = match head.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, head.strip_prefix('+').unwrap_or(head)),
    };
    let coefficient = coefficient.strip_suffix('*').unwrap_or(coefficient);
    let magnitude: u64 = if coefficient.is_empty() {
        1
    } else if coefficient.bytes().all(|b| b.is_ascii_digit()) {
        coefficient.parse().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    let den: u64 = match tail {
        "" => 1,
        _ => {
            let digits = tail.strip_prefix('/').ok_or_else(bad)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            digits.parse().map_err(|_| bad())?
        }
    };
    if den == 0 {
        return Err(bad());
    }
    let magnitude = i64::try_from(magnitude).map_err(|_| bad())?;
    Angle::pi_multiple(if negative { -magnitude } else { magnitude }, den)
}

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_angle(s)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Angle::PiMultiple { num: 0, .. } => f.write_str("0"),
            Angle::PiMultiple { num, den } => {
                let sign = if num < 0 { "-" } else { "" };
                let mag = num.unsigned_abs();
                if mag != 1 {
                    write!(f, "{sign}{mag}pi")?;
                } else {
                    write!(f, "{sign}pi")?;
                }
                if den != 1 {
                    write!(f, "/{den}")?;
                }
                Ok(())
            }
            Angle::Radians(r) => write!(f, "{r}"),
        }
    }
}

impl From<Angle> for String {
    fn from(a: Angle) -> Self {
        a.to_string()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Text(String),
    Number(f64),
}

impl TryFrom<AngleRepr> for Angle {
    type Error = Error;

    fn try_from(repr: AngleRepr) -> Result<Self> {
        match repr {
            AngleRepr::Text(t) => parse_angle(&t),
            AngleRepr::Number(v) => Angle::from_radians(v),
        }
    }
}
