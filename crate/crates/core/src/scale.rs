//! Finite ordinal certainty scales.
//!
//! A [`Degree`] is an exact rational in `[0, 1]`. Only ordinal operations are
//! ever applied to degrees: `min`, `max`, the order-reversing complement and
//! Gödel implication. A [`Scale`] names the admissible levels and guarantees
//! that every operation stays inside the level set.

use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A certainty (or possibility) degree in `[0, 1]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Degree(Ratio<i64>);

impl Degree {
    pub const ZERO: Degree = Degree(Ratio::new_raw(0, 1));
    pub const ONE: Degree = Degree(Ratio::new_raw(1, 1));

    /// Builds a degree from a fraction. Returns `None` outside `[0, 1]` or
    /// for a zero denominator.
    pub fn new(numerator: i64, denominator: i64) -> Option<Degree> {
        if denominator == 0 {
            return None;
        }
        let r = Ratio::new(numerator, denominator);
        if r < Ratio::zero() || r > Ratio::one() {
            return None;
        }
        Some(Degree(r))
    }

    pub fn numerator(self) -> i64 {
        *self.0.numer()
    }

    pub fn denominator(self) -> i64 {
        *self.0.denom()
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(self) -> bool {
        self.0.is_one()
    }

    pub fn min_combine(self, other: Degree) -> Degree {
        self.min(other)
    }

    pub fn max_combine(self, other: Degree) -> Degree {
        self.max(other)
    }

    /// `1 - a`. Stays on the level set of any symmetric [`Scale`].
    pub fn complement(self) -> Degree {
        Degree(Ratio::one() - self.0)
    }

    /// Gödel implication: `1` if `self <= other`, else `other`.
    pub fn godel_implies(self, other: Degree) -> Degree {
        if self <= other {
            Degree::ONE
        } else {
            other
        }
    }
}

impl fmt::Debug for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator() == 1 {
            write!(f, "{}", self.numerator())
        } else {
            write!(f, "{}/{}", self.numerator(), self.denominator())
        }
    }
}

impl Serialize for Degree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.numerator(), self.denominator()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Degree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (n, den) = <(i64, i64)>::deserialize(d)?;
        Degree::new(n, den).ok_or_else(|| serde::de::Error::custom("degree outside [0, 1]"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("a scale needs at least two levels")]
    TooFewLevels,
    #[error("level values must be strictly decreasing (at `{0}`)")]
    NotDecreasing(String),
    #[error("the first level must have value 1 and the last value 0")]
    BadEndpoints,
    #[error("duplicate level name `{0}`")]
    DuplicateName(String),
    #[error("scale is not symmetric: complement of `{name}` ({value}) is not a level")]
    NotSymmetric { name: String, value: Degree },
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("degree {0} is not a level of this scale")]
    NotALevel(Degree),
}

/// One named level of a scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub value: Degree,
}

/// Name normalisation: case-insensitive, spaces and underscores interchangeable.
pub fn normalize_level_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
        .collect()
}

/// A finite, totally ordered, complement-closed set of named degrees.
///
/// Besides the level names, a scale may carry *absence aliases*: words such
/// as `impossible` that qualify the certainty of a negated literal and map
/// onto an ordinary level (`impossible` = `certain` that the manifestation is
/// absent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    levels: Vec<Level>,
    absence: Vec<(String, String)>,
}

impl Scale {
    /// Validates and builds a scale from levels listed top (1) to bottom (0).
    pub fn new(levels: Vec<Level>) -> Result<Scale, ScaleError> {
        Scale::with_absence(levels, Vec::new())
    }

    pub fn with_absence(
        levels: Vec<Level>,
        absence: Vec<(String, String)>,
    ) -> Result<Scale, ScaleError> {
        if levels.len() < 2 {
            return Err(ScaleError::TooFewLevels);
        }
        if !levels[0].value.is_one() || !levels[levels.len() - 1].value.is_zero() {
            return Err(ScaleError::BadEndpoints);
        }
        for pair in levels.windows(2) {
            if pair[1].value >= pair[0].value {
                return Err(ScaleError::NotDecreasing(pair[1].name.clone()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for level in &levels {
            if !seen.insert(normalize_level_name(&level.name)) {
                return Err(ScaleError::DuplicateName(level.name.clone()));
            }
        }
        for level in &levels {
            let c = level.value.complement();
            if !levels.iter().any(|l| l.value == c) {
                return Err(ScaleError::NotSymmetric { name: level.name.clone(), value: level.value });
            }
        }
        let mut alias_names = std::collections::BTreeSet::new();
        for (alias, target) in &absence {
            if !alias_names.insert(normalize_level_name(alias)) {
                return Err(ScaleError::DuplicateName(alias.clone()));
            }
            let t = normalize_level_name(target);
            if !levels.iter().any(|l| normalize_level_name(&l.name) == t) {
                return Err(ScaleError::UnknownLevel(target.clone()));
            }
        }
        Ok(Scale { levels, absence })
    }

    /// certain=1, almost_certain=4/5, likely=3/5, doubtful=2/5, remote=1/5,
    /// possible=0, with absence aliases impossible, almost_impossible and
    /// unlikely.
    pub fn standard() -> Scale {
        let lv = |name: &str, n, d| Level { name: name.to_string(), value: Degree::new(n, d).unwrap() };
        Scale::with_absence(
            vec![
                lv("certain", 1, 1),
                lv("almost_certain", 4, 5),
                lv("likely", 3, 5),
                lv("doubtful", 2, 5),
                lv("remote", 1, 5),
                lv("possible", 0, 1),
            ],
            vec![
                ("impossible".into(), "certain".into()),
                ("almost_impossible".into(), "almost_certain".into()),
                ("unlikely".into(), "likely".into()),
            ],
        )
        .expect("standard scale is valid")
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn absence_aliases(&self) -> &[(String, String)] {
        &self.absence
    }

    pub fn level_of(&self, name: &str) -> Result<Degree, ScaleError> {
        let key = normalize_level_name(name);
        self.levels
            .iter()
            .find(|l| normalize_level_name(&l.name) == key)
            .map(|l| l.value)
            .ok_or_else(|| ScaleError::UnknownLevel(name.to_string()))
    }

    /// Resolves a word qualifying absence: an absence alias first, then any
    /// ordinary level name.
    pub fn absence_level_of(&self, name: &str) -> Result<Degree, ScaleError> {
        let key = normalize_level_name(name);
        if let Some((_, target)) = self.absence.iter().find(|(a, _)| normalize_level_name(a) == key) {
            return self.level_of(target);
        }
        self.level_of(name)
    }

    pub fn contains(&self, d: Degree) -> bool {
        self.levels.iter().any(|l| l.value == d)
    }

    pub fn name_of(&self, d: Degree) -> Option<&str> {
        self.levels.iter().find(|l| l.value == d).map(|l| l.name.as_str())
    }

    pub fn complement(&self, d: Degree) -> Result<Degree, ScaleError> {
        let c = d.complement();
        if self.contains(c) {
            Ok(c)
        } else {
            Err(ScaleError::NotALevel(c))
        }
    }

    /// Rank of a level from the bottom (0 for the zero level).
    pub fn rank_of(&self, d: Degree) -> Option<usize> {
        self.levels.iter().rev().position(|l| l.value == d)
    }

    /// Same level names and ordering, new values. Used to check that results
    /// depend only on the order of levels.
    pub fn revalued(&self, values: &[Degree]) -> Result<Scale, ScaleError> {
        let levels = self
            .levels
            .iter()
            .zip(values)
            .map(|(l, v)| Level { name: l.name.clone(), value: *v })
            .collect::<Vec<_>>();
        if levels.len() != self.levels.len() {
            return Err(ScaleError::TooFewLevels);
        }
        Scale::with_absence(levels, self.absence.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: i64, den: i64) -> Degree {
        Degree::new(n, den).unwrap()
    }

    #[test]
    fn level_lookup() {
        let s = Scale::standard();
        assert_eq!(s.level_of("certain").unwrap(), Degree::ONE);
        assert_eq!(s.level_of("almost certain").unwrap(), d(4, 5));
        assert_eq!(s.level_of("Almost_Certain").unwrap(), d(4, 5));
        assert_eq!(s.level_of("possible").unwrap(), Degree::ZERO);
        assert_eq!(s.level_of("FROZEN"), Err(ScaleError::UnknownLevel("FROZEN".into())));
        assert_eq!(s.absence_level_of("impossible").unwrap(), Degree::ONE);
        assert_eq!(s.absence_level_of("unlikely").unwrap(), d(3, 5));
        assert_eq!(s.absence_level_of("likely").unwrap(), d(3, 5));
    }

    #[test]
    fn operation_examples() {
        assert_eq!(Degree::ONE.min_combine(d(3, 5)), d(3, 5));
        assert_eq!(d(4, 5).min_combine(d(4, 5)), d(4, 5));
        assert_eq!(Degree::ZERO.min_combine(Degree::ONE), Degree::ZERO);
        assert_eq!(Degree::ONE.max_combine(d(3, 5)), Degree::ONE);
        assert_eq!(Degree::ZERO.max_combine(Degree::ZERO), Degree::ZERO);
        assert_eq!(d(3, 5).max_combine(d(4, 5)), d(4, 5));
        assert_eq!(Degree::ONE.complement(), Degree::ZERO);
        assert_eq!(d(4, 5).complement(), d(1, 5));
        assert_eq!(Degree::ZERO.complement(), Degree::ONE);
        assert_eq!(d(3, 5).godel_implies(d(4, 5)), Degree::ONE);
        assert_eq!(Degree::ONE.godel_implies(d(3, 5)), d(3, 5));
        assert_eq!(Degree::ONE.godel_implies(Degree::ZERO), Degree::ZERO);
    }

    #[test]
    fn rejects_asymmetric_scale() {
        let lv = |name: &str, n, den| Level { name: name.into(), value: d(n, den) };
        let err = Scale::new(vec![lv("certain", 1, 1), lv("almost", 4, 5), lv("possible", 0, 1)]);
        assert!(matches!(err, Err(ScaleError::NotSymmetric { .. })));
    }

    #[test]
    fn rejects_bad_shapes() {
        let lv = |name: &str, n, den| Level { name: name.into(), value: d(n, den) };
        assert_eq!(Scale::new(vec![lv("a", 1, 1)]), Err(ScaleError::TooFewLevels));
        assert_eq!(
            Scale::new(vec![lv("a", 4, 5), lv("b", 0, 1)]),
            Err(ScaleError::BadEndpoints)
        );
        assert_eq!(
            Scale::new(vec![lv("a", 1, 1), lv("b", 1, 2), lv("b", 1, 2), lv("c", 0, 1)]),
            Err(ScaleError::NotDecreasing("b".into()))
        );
        assert_eq!(
            Scale::new(vec![lv("a", 1, 1), lv("A", 0, 1)]),
            Err(ScaleError::DuplicateName("A".into()))
        );
    }

    #[test]
    fn scale_complement_checks_membership() {
        let s = Scale::standard();
        assert_eq!(s.complement(d(3, 5)).unwrap(), d(2, 5));
        assert_eq!(s.complement(d(1, 3)), Err(ScaleError::NotALevel(d(2, 3))));
        assert_eq!(s.name_of(d(2, 5)), Some("doubtful"));
        assert_eq!(s.rank_of(Degree::ONE), Some(5));
    }
}
