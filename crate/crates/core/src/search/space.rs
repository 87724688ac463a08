use std::fmt;

use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::rng::CounterRng;

/// One named search dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dim {
    /// Uniform on the open interval `(lo, hi)`.
    Continuous { name: String, lo: f64, hi: f64 },
    Categorical { name: String, values: Vec<String> },
}

impl Dim {
    pub fn continuous(name: &str, lo: f64, hi: f64) -> Self {
        Dim::Continuous { name: name.into(), lo, hi }
    }

    pub fn categorical<S: ToString>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Dim::Categorical { name: name.into(), values: values.into_iter().map(|v| v.to_string()).collect() }
    }

    pub fn name(&self) -> &str {
        match self {
            Dim::Continuous { name, .. } | Dim::Categorical { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSpace {
    pub dims: Vec<Dim>,
}

impl ParamSpace {
    pub fn new(dims: Vec<Dim>) -> Self {
        Self { dims }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.dims.is_empty() {
            return Err(SearchError::InvalidSpace("no dimensions".into()));
        }
        for (i, d) in self.dims.iter().enumerate() {
            if self.dims[..i].iter().any(|o| o.name() == d.name()) {
                return Err(SearchError::InvalidSpace(format!("duplicate dimension {:?}", d.name())));
            }
            match d {
                Dim::Continuous { name, lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return Err(SearchError::InvalidSpace(format!("{name}: need finite lo < hi, got ({lo}, {hi})")));
                }
                Dim::Categorical { name, values } if values.is_empty() => {
                    return Err(SearchError::InvalidSpace(format!("{name}: no categorical values")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(Dim::name)
    }
}

/// Coordinate of a sampled point: a real for continuous dimensions, an
/// index into the value list for categorical ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamValue {
    Real(f64),
    Choice(usize),
}

impl ParamValue {
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            ParamValue::Real(x) => Some(x),
            ParamValue::Choice(_) => None,
        }
    }

    pub fn as_choice(&self) -> Option<usize> {
        match *self {
            ParamValue::Choice(i) => Some(i),
            ParamValue::Real(_) => None,
        }
    }

    /// Human-readable value for ledgers.
    pub fn render(&self, dim: &Dim) -> String {
        match (self, dim) {
            (ParamValue::Choice(i), Dim::Categorical { values, .. }) => values[*i].clone(),
            _ => self.to_string(),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Real(x) => write!(f, "{x}"),
            ParamValue::Choice(i) => write!(f, "#{i}"),
        }
    }
}

pub type Point = Vec<ParamValue>;

/// `n` independent uniform draws; point `i` depends only on `(seed, i)`.
pub fn sample_params(space: &ParamSpace, n: usize, seed: u64) -> Result<Vec<Point>, SearchError> {
    space.validate()?;
    if n == 0 {
        return Err(SearchError::InvalidConfig("sample count must be at least 1".into()));
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = CounterRng::keyed(&[seed, i as u64, 0x9A8A]);
            space
                .dims
                .iter()
                .map(|d| match d {
                    Dim::Continuous { lo, hi, .. } => ParamValue::Real(lo + (hi - lo) * rng.open01()),
                    Dim::Categorical { values, .. } => ParamValue::Choice(rng.below(values.len() as u64) as usize),
                })
                .collect()
        })
        .collect())
}
