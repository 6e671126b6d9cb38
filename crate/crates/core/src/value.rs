use serde::{Serialize, Serializer};

/// Why a second subderivative is finite or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reason {
    InCone,
    OutsideCriticalCone,
}

/// Extended real value of a second subderivative. `+∞` is a tag, not a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

/// A second-subderivative evaluation with its itemized contributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondSubderivValue {
    pub value: ExtReal,
    pub reason: Reason,
    pub terms: Vec<(String, f64)>,
}

impl SecondSubderivValue {
    pub fn infinite() -> Self {
        Self { value: ExtReal::PosInfinity, reason: Reason::OutsideCriticalCone, terms: Vec::new() }
    }

    /// Finite value summed from labelled terms.
    pub fn from_terms(terms: Vec<(String, f64)>) -> Self {
        let total = terms.iter().map(|(_, v)| v).sum();
        Self { value: ExtReal::Finite(total), reason: Reason::InCone, terms }
    }

    pub fn finite(&self) -> Option<f64> {
        self.value.finite()
    }
}
