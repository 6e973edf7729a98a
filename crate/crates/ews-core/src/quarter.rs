//! Calendar quarters as an integer time axis.
//!
//! A quarter is stored as the number of quarters since 1Q of year 0, so
//! ordering, distances and offsets are plain integer arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar quarter, e.g. 2008Q1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter(i32);

impl Quarter {
    /// Builds a quarter from a year and a quarter index in 1..=4.
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::param(
                "quarter",
                format!("quarter index must be 1..=4, got {quarter}"),
            ));
        }
        Ok(Quarter(year * 4 + i32::from(quarter) - 1))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(4)
    }

    /// Quarter index within the year, 1..=4.
    pub fn index(self) -> u8 {
        (self.0.rem_euclid(4) + 1) as u8
    }

    /// The quarter `n` steps later (or earlier for negative `n`).
    pub fn offset(self, n: i32) -> Self {
        Quarter(self.0 + n)
    }

    /// Signed number of quarters from `other` to `self`.
    pub fn quarters_since(self, other: Quarter) -> i32 {
        self.0 - other.0
    }

    /// All quarters from `self` through `end`, inclusive. Empty if `end < self`.
    pub fn through(self, end: Quarter) -> impl Iterator<Item = Quarter> {
        (self.0..=end.0).map(Quarter)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year(), self.index())
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Parses `"2008Q1"` (case-insensitive `Q`).
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::param("quarter", format!("expected e.g. 2008Q1, got {s:?}"));
        let pos = s.find(['Q', 'q']).ok_or_else(err)?;
        let year: i32 = s[..pos].parse().map_err(|_| err())?;
        let idx: u8 = s[pos + 1..].parse().map_err(|_| err())?;
        Quarter::new(year, idx)
    }
}

impl TryFrom<String> for Quarter {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_and_index_round_trip() {
        let q = Quarter::new(2008, 1).unwrap();
        assert_eq!(q.year(), 2008);
        assert_eq!(q.index(), 1);
        assert_eq!(q.to_string(), "2008Q1");
    }

    #[test]
    fn offsets_cross_year_boundaries() {
        let q = Quarter::new(2008, 1).unwrap();
        assert_eq!(q.offset(-1), Quarter::new(2007, 4).unwrap());
        assert_eq!(q.offset(4), Quarter::new(2009, 1).unwrap());
        assert_eq!(q.offset(-12), Quarter::new(2005, 1).unwrap());
        assert_eq!(q.offset(-5), Quarter::new(2006, 4).unwrap());
    }

    #[test]
    fn distances_are_signed() {
        let a = Quarter::new(2005, 2).unwrap();
        let b = Quarter::new(2008, 1).unwrap();
        assert_eq!(b.quarters_since(a), 11);
        assert_eq!(a.quarters_since(b), -11);
    }

    #[test]
    fn parse_accepts_lower_case_and_rejects_garbage() {
        assert_eq!("1995q3".parse::<Quarter>().unwrap(), Quarter::new(1995, 3).unwrap());
        assert!("1995".parse::<Quarter>().is_err());
        assert!("1995Q5".parse::<Quarter>().is_err());
        assert!("Q1".parse::<Quarter>().is_err());
    }

    #[test]
    fn through_is_inclusive() {
        let a = Quarter::new(2007, 3).unwrap();
        let b = Quarter::new(2008, 2).unwrap();
        let range: Vec<String> = a.through(b).map(|q| q.to_string()).collect();
        assert_eq!(range, ["2007Q3", "2007Q4", "2008Q1", "2008Q2"]);
        assert_eq!(b.through(a).count(), 0);
    }
}
