use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pallor site an image was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Eye,
    Tongue,
}

impl Site {
    pub fn name(self) -> &'static str {
        match self {
            Site::Eye => "eye",
            Site::Tongue => "tongue",
        }
    }

    /// Outer fold count used for this site's cross-validation.
    pub fn default_folds(self) -> usize {
        match self {
            Site::Eye => 5,
            Site::Tongue => 3,
        }
    }

    /// The two ROI names, in feature-schema order.
    pub fn roi_names(self) -> [&'static str; 2] {
        match self {
            Site::Eye => ["sclera", "conjunctiva"],
            Site::Tongue => ["inner", "outer"],
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eye" => Ok(Site::Eye),
            "tongue" => Ok(Site::Tongue),
            other => Err(Error::InvalidConfig(format!("unknown site {other:?}"))),
        }
    }
}

/// Severity grade: 0 normal, 1 anemia-like pallor, 2 other abnormality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Grade(u8);

impl Grade {
    pub const NORMAL: Grade = Grade(0);
    pub const PALLOR: Grade = Grade(1);
    pub const ABNORMAL: Grade = Grade(2);
    pub const ALL: [Grade; 3] = [Grade::NORMAL, Grade::PALLOR, Grade::ABNORMAL];

    pub fn new(value: u8) -> Result<Self> {
        if value <= 2 {
            Ok(Grade(value))
        } else {
            Err(Error::InvalidConfig(format!("grade {value} outside 0..=2")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for Grade {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Grade::new(value)
    }
}

impl From<Grade> for u8 {
    fn from(g: Grade) -> u8 {
        g.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Grade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("grade {s:?} is not an integer")))?;
        Grade::new(v)
    }
}
