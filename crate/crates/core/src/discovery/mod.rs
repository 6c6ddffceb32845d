//! Equation discovery from derivative estimates: candidate libraries,
//! thresholded least squares and a term-subset evolutionary Pareto search.

pub mod library;
pub mod pareto;
pub mod stlsq;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::ReferenceEquation;
use crate::diff::DiffResult;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::stats;

pub use library::{build_library, polynomial_terms, CandidateLibrary};
pub use pareto::{
    brute_force_front, dominates, evolutionary_discover, EvolutionParams, ParetoFront, TermPool,
};
pub use stlsq::stlsq;

/// One factor of a product term: a named quantity raised to a power.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    /// A state (`x`, `u`) or a derivative id (`u_tt`).
    pub quantity: String,
    pub power: u32,
}

/// Product of factors; the empty product is the constant term `1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermSpec {
    factors: Vec<Factor>,
}

impl TermSpec {
    pub fn constant() -> Self {
        Self { factors: vec![] }
    }

    pub fn quantity(name: &str) -> Self {
        Self { factors: vec![Factor { quantity: name.into(), power: 1 }] }
    }

    /// Merges repeated quantities and sorts factors, so `y*x*x` and `x^2*y`
    /// compare equal.
    pub fn from_factors(factors: impl IntoIterator<Item = Factor>) -> Result<Self> {
        let mut merged: BTreeMap<String, u32> = BTreeMap::new();
        for f in factors {
            if f.power == 0 {
                return Err(Error::InvalidConfig(format!("zero power on `{}`", f.quantity)));
            }
            if f.quantity.is_empty() || f.quantity.contains(['*', '^']) {
                return Err(Error::InvalidConfig(format!("bad quantity name `{}`", f.quantity)));
            }
            *merged.entry(f.quantity).or_default() += f.power;
        }
        Ok(Self {
            factors: merged.into_iter().map(|(quantity, power)| Factor { quantity, power }).collect(),
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.power).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Column values over all nodes, with the combined validity mask.
    pub fn evaluate(&self, q: &Quantities) -> Result<(Vec<f64>, Vec<bool>)> {
        let n = q.len();
        let mut values = vec![1.0; n];
        let mut mask = vec![true; n];
        for f in &self.factors {
            let (v, m) = q
                .get(&f.quantity)
                .ok_or_else(|| Error::Library(format!("quantity `{}` is not available", f.quantity)))?;
            for i in 0..n {
                values[i] *= v[i].powi(f.power as i32);
                mask[i] &= m[i];
            }
        }
        Ok((values, mask))
    }
}

impl fmt::Display for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, fac) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            f.write_str(&fac.quantity)?;
            if fac.power > 1 {
                write!(f, "^{}", fac.power)?;
            }
        }
        Ok(())
    }
}

impl FromStr for TermSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Self::constant());
        }
        let factors = s
            .split('*')
            .map(|part| {
                let part = part.trim();
                let (name, power) = match part.split_once('^') {
                    Some((n, p)) => (
                        n,
                        p.parse::<u32>()
                            .map_err(|_| Error::Parse(format!("bad power in term `{s}`")))?,
                    ),
                    None => (part, 1),
                };
                Ok(Factor { quantity: name.to_string(), power })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_factors(factors)
    }
}

impl Serialize for TermSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TermSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Named node-wise quantities (states and derivative estimates) with their
/// validity masks, all over one grid.
#[derive(Debug, Clone, Default)]
pub struct Quantities {
    len: usize,
    items: BTreeMap<String, (Vec<f64>, Vec<bool>)>,
}

impl Quantities {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>, mask: Vec<bool>) -> Result<()> {
        if values.len() != mask.len() {
            return Err(Error::GridMismatch("mask length differs from values".into()));
        }
        if !self.items.is_empty() && values.len() != self.len {
            return Err(Error::GridMismatch(format!(
                "quantity `{name}` has {} nodes, expected {}",
                values.len(),
                self.len
            )));
        }
        self.len = values.len();
        self.items.insert(name.to_string(), (values, mask));
        Ok(())
    }

    pub fn insert_field(&mut self, name: &str, field: &Field) -> Result<()> {
        self.insert(name, field.values().to_vec(), vec![true; field.len()])
    }

    pub fn insert_estimate(&mut self, name: &str, est: &DiffResult) -> Result<()> {
        self.insert(name, est.derivative.values().to_vec(), est.valid_mask.clone())
    }

    pub fn get(&self, name: &str) -> Option<(&[f64], &[bool])> {
        self.items.get(name).map(|(v, m)| (v.as_slice(), m.as_slice()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.items.keys().map(|s| s.as_str())
    }
}

/// `lhs = sum coefficients[i] * terms[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationModel {
    pub lhs: TermSpec,
    pub terms: Vec<TermSpec>,
    pub coefficients: Vec<f64>,
    pub residual_mse: f64,
    pub complexity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTerm {
    pub id: TermSpec,
    pub coefficient: f64,
}

/// JSON form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub lhs: TermSpec,
    pub terms: Vec<ModelTerm>,
    pub residual_mse: f64,
    pub complexity: usize,
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

impl EquationModel {
    pub fn new(lhs: TermSpec, terms: Vec<TermSpec>, coefficients: Vec<f64>, residual_mse: f64) -> Self {
        assert_eq!(terms.len(), coefficients.len());
        let complexity = coefficients.iter().filter(|c| **c != 0.0).count();
        Self { lhs, terms, coefficients, residual_mse, complexity }
    }

    pub fn is_empty(&self) -> bool {
        self.complexity == 0
    }

    pub fn coefficient(&self, term: &TermSpec) -> Option<f64> {
        self.terms.iter().position(|t| t == term).map(|i| self.coefficients[i])
    }

    pub fn active_terms(&self) -> Vec<&TermSpec> {
        self.terms.iter().zip(&self.coefficients).filter(|(_, c)| **c != 0.0).map(|(t, _)| t).collect()
    }

    /// Mean squared residual on the nodes of `q` where every involved
    /// quantity is valid; used with clean truth to score a discovered
    /// equation independently of the data it was fitted on.
    pub fn residual_on(&self, q: &Quantities) -> Result<f64> {
        let (lhs, mut mask) = self.lhs.evaluate(q)?;
        let mut pred = vec![0.0; q.len()];
        for (t, c) in self.terms.iter().zip(&self.coefficients) {
            if *c == 0.0 {
                continue;
            }
            let (v, m) = t.evaluate(q)?;
            for i in 0..q.len() {
                pred[i] += c * v[i];
                mask[i] &= m[i];
            }
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..q.len() {
            if mask[i] {
                sum += (lhs[i] - pred[i]).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Library("no node is valid for every model term".into()));
        }
        Ok(sum / count as f64)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            lhs: self.lhs.clone(),
            terms: self
                .terms
                .iter()
                .zip(&self.coefficients)
                .map(|(id, &coefficient)| ModelTerm { id: id.clone(), coefficient })
                .collect(),
            residual_mse: self.residual_mse,
            complexity: self.complexity,
        }
    }

    pub fn from_document(doc: ModelDocument) -> Self {
        let (terms, coefficients) = doc.terms.into_iter().map(|t| (t.id, t.coefficient)).unzip();
        Self::new(doc.lhs, terms, coefficients, doc.residual_mse)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    /// `u_tt = -0.25 u_t - 3 u`
    pub fn equation_string(&self) -> String {
        let rhs: Vec<String> = self
            .terms
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(t, c)| if t.is_constant() { format!("{c}") } else { format!("{c} {t}") })
            .collect();
        if rhs.is_empty() {
            format!("{} = 0", self.lhs)
        } else {
            format!("{} = {}", self.lhs, rhs.join(" + "))
        }
    }
}

fn reference_terms(reference: &ReferenceEquation) -> Result<(TermSpec, Vec<TermSpec>)> {
    let lhs = reference.lhs.parse()?;
    let rhs = reference.rhs.iter().map(|(t, _)| t.parse()).collect::<Result<_>>()?;
    Ok((lhs, rhs))
}

/// True when the model has the reference's left-hand side and exactly its
/// set of active terms; coefficient values are ignored.
pub fn structure_match(model: &EquationModel, reference: &ReferenceEquation) -> bool {
    let Ok((lhs, rhs)) = reference_terms(reference) else {
        return false;
    };
    if model.lhs != lhs {
        return false;
    }
    let mut active: Vec<&TermSpec> = model.active_terms();
    let mut expected: Vec<&TermSpec> = rhs.iter().collect();
    active.sort();
    expected.sort();
    active == expected
}

/// Fraction of front members whose structure matches `reference`.
pub fn pareto_correct_share(front: &ParetoFront, reference: &ReferenceEquation) -> Result<f64> {
    if front.individuals.is_empty() {
        return Err(Error::Library("empty Pareto front".into()));
    }
    let hits = front.individuals.iter().filter(|m| structure_match(m, reference)).count();
    Ok(hits as f64 / front.individuals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

impl CoefficientStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Library("no coefficient values".into()));
        }
        let s = stats::sorted(values);
        Ok(Self {
            median: stats::quantile_sorted(&s, 0.5),
            q25: stats::quantile_sorted(&s, 0.25),
            q75: stats::quantile_sorted(&s, 0.75),
            min: s[0],
            max: s[s.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Order statistics of one coefficient across models. A model that lacks
/// the term in its library is an error; an inactive term counts as zero.
pub fn coefficient_stats(models: &[EquationModel], term: &TermSpec) -> Result<CoefficientStats> {
    if models.is_empty() {
        return Err(Error::Library("no models".into()));
    }
    let values = models
        .iter()
        .map(|m| {
            m.coefficient(term)
                .ok_or_else(|| Error::Library(format!("term `{term}` is not in the model library")))
        })
        .collect::<Result<Vec<_>>>()?;
    CoefficientStats::from_values(&values)
}
