//! Individuals, parameter layouts, and bound clipping.

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// One named, possibly vector-valued parameter of an individual.
///
/// Serialized as a `[name, values]` pair so trajectory lines stay compact.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedParam {
    pub name: String,
    pub values: Vec<f64>,
}

impl NamedParam {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        NamedParam { name: name.into(), values }
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        NamedParam::new(name, vec![value])
    }
}

impl Serialize for NamedParam {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        tup.serialize_element(&self.name)?;
        tup.serialize_element(&self.values)?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for NamedParam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = NamedParam;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [name, values] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<NamedParam, A::Error> {
                let name: String = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let values: Vec<f64> = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                Ok(NamedParam { name, values })
            }
        }
        deserializer.deserialize_tuple(2, PairVisitor)
    }
}

/// One candidate parameter set within a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub generation: u64,
    pub index: usize,
    pub params: Vec<NamedParam>,
}

impl Individual {
    pub fn new(generation: u64, index: usize, params: Vec<NamedParam>) -> Self {
        Individual { generation, index, params }
    }

    /// Total scalar dimension over all parameters.
    pub fn dim(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Concatenates all parameter components in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for p in &self.params {
            out.extend_from_slice(&p.values);
        }
        out
    }

    pub fn param(&self, name: &str) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.as_slice())
    }

    /// Checks that parameter names are unique and non-empty.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.params.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::config("parameter name must be non-empty"));
            }
            if p.name.contains(',') || p.name.contains('\n') {
                return Err(Error::config(format!(
                    "parameter name {:?} may not contain ',' or newlines",
                    p.name
                )));
            }
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::config(format!("duplicate parameter name {:?}", p.name)));
            }
        }
        Ok(())
    }
}

/// Declaration-ordered map from parameter names to their dimensions.
///
/// All individuals of a run share one layout; optimizers work on flattened
/// vectors and use the layout to rebuild named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    entries: Vec<(String, usize)>,
}

impl ParamLayout {
    pub fn new(entries: Vec<(String, usize)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("parameter layout is empty"));
        }
        for (i, (name, d)) in entries.iter().enumerate() {
            if *d == 0 {
                return Err(Error::config(format!("parameter {:?} has dimension 0", name)));
            }
            if entries[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::config(format!("duplicate parameter name {:?}", name)));
            }
        }
        Ok(ParamLayout { entries })
    }

    pub fn of(individual: &Individual) -> Result<Self> {
        individual.validate()?;
        ParamLayout::new(
            individual
                .params
                .iter()
                .map(|p| (p.name.clone(), p.values.len()))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(String, usize)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.iter().map(|(_, d)| d).sum()
    }

    /// Splits a flat vector back into named parameters.
    pub fn unflatten(&self, flat: &[f64]) -> Result<Vec<NamedParam>> {
        if flat.len() != self.dim() {
            return Err(Error::config(format!(
                "flat vector length {} does not match layout dimension {}",
                flat.len(),
                self.dim()
            )));
        }
        let mut out = Vec::with_capacity(self.entries.len());
        let mut offset = 0;
        for (name, d) in &self.entries {
            out.push(NamedParam::new(name.clone(), flat[offset..offset + d].to_vec()));
            offset += d;
        }
        Ok(out)
    }

    /// Checks an individual against this layout (names, order, dimensions).
    pub fn matches(&self, individual: &Individual) -> bool {
        individual.params.len() == self.entries.len()
            && individual
                .params
                .iter()
                .zip(&self.entries)
                .all(|(p, (n, d))| &p.name == n && p.values.len() == *d)
    }
}

/// Componentwise bounds for one named parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub name: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Integer-flagged parameters are rounded to nearest after clamping.
    #[serde(default)]
    pub integer: bool,
}

impl BoundSpec {
    pub fn uniform(name: impl Into<String>, dim: usize, lower: f64, upper: f64) -> Self {
        BoundSpec {
            name: name.into(),
            lower: vec![lower; dim],
            upper: vec![upper; dim],
            integer: false,
        }
    }

    pub fn integer(mut self) -> Self {
        self.integer = true;
        self
    }
}

/// Parameter bounds for a whole run, in layout order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    entries: Vec<BoundSpec>,
}

impl Bounds {
    pub fn new(entries: Vec<BoundSpec>) -> Result<Self> {
        for spec in &entries {
            if spec.lower.len() != spec.upper.len() {
                return Err(Error::config(format!(
                    "bounds for {:?}: lower and upper dimensions differ",
                    spec.name
                )));
            }
            if spec.lower.iter().zip(&spec.upper).any(|(l, u)| l > u) {
                return Err(Error::config(format!(
                    "bounds for {:?}: lower exceeds upper",
                    spec.name
                )));
            }
        }
        Ok(Bounds { entries })
    }

    pub fn entries(&self) -> &[BoundSpec] {
        &self.entries
    }

    pub fn for_name(&self, name: &str) -> Option<&BoundSpec> {
        self.entries.iter().find(|b| b.name == name)
    }

    /// Clamps every component into its bounds; integer-flagged parameters are
    /// rounded to nearest (half away from zero) after clamping.
    pub fn clip_individual(&self, individual: &Individual) -> Result<Individual> {
        let mut clipped = individual.clone();
        for param in &mut clipped.params {
            let spec = self.for_name(&param.name).ok_or_else(|| {
                Error::config(format!("no bounds declared for parameter {:?}", param.name))
            })?;
            if spec.lower.len() != param.values.len() {
                return Err(Error::config(format!(
                    "bounds for {:?} have dimension {}, parameter has {}",
                    param.name,
                    spec.lower.len(),
                    param.values.len()
                )));
            }
            for (i, v) in param.values.iter_mut().enumerate() {
                *v = v.clamp(spec.lower[i], spec.upper[i]);
                if spec.integer {
                    *v = v.round();
                }
            }
        }
        Ok(clipped)
    }

    /// Flattened lower/upper vectors aligned with the given layout.
    pub fn flattened(&self, layout: &ParamLayout) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lower = Vec::with_capacity(layout.dim());
        let mut upper = Vec::with_capacity(layout.dim());
        for (name, d) in layout.entries() {
            let spec = self
                .for_name(name)
                .ok_or_else(|| Error::config(format!("no bounds declared for parameter {:?}", name)))?;
            if spec.lower.len() != *d {
                return Err(Error::config(format!(
                    "bounds for {:?} have dimension {}, layout has {}",
                    name,
                    spec.lower.len(),
                    d
                )));
            }
            lower.extend_from_slice(&spec.lower);
            upper.extend_from_slice(&spec.upper);
        }
        Ok((lower, upper))
    }

    /// Flattened integer flags aligned with the given layout.
    pub fn flattened_integer_flags(&self, layout: &ParamLayout) -> Result<Vec<bool>> {
        let mut flags = Vec::with_capacity(layout.dim());
        for (name, d) in layout.entries() {
            let spec = self
                .for_name(name)
                .ok_or_else(|| Error::config(format!("no bounds declared for parameter {:?}", name)))?;
            flags.extend(std::iter::repeat(spec.integer).take(*d));
        }
        Ok(flags)
    }
}
