use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::site::{Grade, Site};

/// Two cascaded binary decisions over the three grades.
///
/// Step 1 separates `step1.0` from `step1.1`; step 2 splits `step1.1` into `step2.0` vs `step2.1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyPlan {
    pub step1: (Vec<Grade>, Vec<Grade>),
    pub step2: (Vec<Grade>, Vec<Grade>),
}

fn join(grades: &[Grade]) -> String {
    grades.iter().map(Grade::to_string).collect::<Vec<_>>().join(",")
}

fn parse_set(s: &str) -> Result<Vec<Grade>> {
    let mut out: Vec<Grade> = s.split(',').map(str::parse).collect::<Result<_>>()?;
    let n = out.len();
    out.sort();
    out.dedup();
    if out.len() != n {
        return Err(Error::InvalidConfig(format!("repeated grade in {s:?}")));
    }
    Ok(out)
}

impl HierarchyPlan {
    pub fn new(step1: (Vec<Grade>, Vec<Grade>), step2: (Vec<Grade>, Vec<Grade>)) -> Result<Self> {
        let plan = Self { step1, step2 };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let mut all: Vec<Grade> = self.step1.0.iter().chain(&self.step1.1).copied().collect();
        all.sort();
        if all != Grade::ALL {
            return Err(Error::InvalidConfig(format!("step 1 of {self} must partition grades 0,1,2")));
        }
        let mut second: Vec<Grade> = self.step2.0.iter().chain(&self.step2.1).copied().collect();
        second.sort();
        let mut neg = self.step1.1.clone();
        neg.sort();
        if self.step2.0.is_empty() || self.step2.1.is_empty() || second != neg {
            return Err(Error::InvalidConfig(format!(
                "step 2 of {self} must split the step-1 negative set"
            )));
        }
        Ok(())
    }

    /// Default cascade: eye `0/1,2` then `1/2`, tongue `1/0,2` then `0/2`.
    pub fn for_site(site: Site) -> Self {
        let spec = match site {
            Site::Eye => "0/1,2",
            Site::Tongue => "1/0,2",
        };
        spec.parse().expect("preset hierarchy is valid")
    }

    pub fn step1_name(&self) -> String {
        format!("{}/{}", join(&self.step1.0), join(&self.step1.1))
    }

    pub fn step2_name(&self) -> String {
        format!("{}/{}", join(&self.step2.0), join(&self.step2.1))
    }

    pub fn step_names(&self) -> [String; 2] {
        [self.step1_name(), self.step2_name()]
    }

    /// Grades reached by the cascade for the given step outcomes.
    pub fn outcome(&self, step1_positive: bool, step2_positive: bool) -> &[Grade] {
        match (step1_positive, step2_positive) {
            (true, _) => &self.step1.0,
            (false, true) => &self.step2.0,
            (false, false) => &self.step2.1,
        }
    }
}

impl fmt::Display for HierarchyPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", self.step1_name(), self.step2_name())
    }
}

/// `"A/B"` or `"A/B;C/D"` with comma-separated grades. Without the second part, step 2 puts
/// the first grade of `B` against the remaining ones.
impl FromStr for HierarchyPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("hierarchy {s:?} is not of the form 0/1,2"));
        let split = |part: &str| -> Result<(Vec<Grade>, Vec<Grade>)> {
            let (a, b) = part.trim().split_once('/').ok_or_else(bad)?;
            Ok((parse_set(a).map_err(|_| bad())?, parse_set(b).map_err(|_| bad())?))
        };
        let (first, second) = match s.split_once(';') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let step1 = split(first)?;
        let step2 = match second {
            Some(b) => split(b)?,
            None => {
                let first_neg = s.split_once('/').ok_or_else(bad)?.1.split(',').next().ok_or_else(bad)?;
                let head: Grade = first_neg.trim().parse().map_err(|_| bad())?;
                (vec![head], step1.1.iter().copied().filter(|&g| g != head).collect())
            }
        };
        HierarchyPlan::new(step1, step2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let eye = HierarchyPlan::for_site(Site::Eye);
        assert_eq!(eye.step_names(), ["0/1,2".to_string(), "1/2".to_string()]);
        let tongue = HierarchyPlan::for_site(Site::Tongue);
        assert_eq!(tongue.step_names(), ["1/0,2".to_string(), "0/2".to_string()]);
    }

    #[test]
    fn parse_forms() {
        let p: HierarchyPlan = "2/1,0".parse().unwrap();
        assert_eq!(p.step1, (vec![Grade::ABNORMAL], vec![Grade::NORMAL, Grade::PALLOR]));
        assert_eq!(p.step2, (vec![Grade::PALLOR], vec![Grade::NORMAL]));
        let q: HierarchyPlan = "0/1,2;2/1".parse().unwrap();
        assert_eq!(q.step2_name(), "2/1");
        assert_eq!(q.to_string().parse::<HierarchyPlan>().unwrap(), q);
        for bad in ["0/1", "0,1/2", "0/1,2;0/1", "x/1,2", "0/0,1,2", "3/1,2"] {
            assert!(bad.parse::<HierarchyPlan>().is_err(), "{bad}");
        }
    }

    #[test]
    fn outcomes() {
        let p = HierarchyPlan::for_site(Site::Eye);
        assert_eq!(p.outcome(true, false), [Grade::NORMAL]);
        assert_eq!(p.outcome(false, true), [Grade::PALLOR]);
        assert_eq!(p.outcome(false, false), [Grade::ABNORMAL]);
    }
}
