use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A purely relational vocabulary. Function symbols are relationalized on
/// ingestion (see [`crate::logic::FiniteStructure::from_json`]).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub relations: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new<S: Into<String>>(rels: impl IntoIterator<Item = (S, usize)>) -> Self {
        Signature {
            relations: rels.into_iter().map(|(s, a)| (s.into(), a)).collect(),
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn check(&self, name: &str, arity: usize) -> Result<()> {
        match self.arity(name) {
            None => Err(Error::UnknownSymbol(name.to_string())),
            Some(a) if a != arity => Err(Error::ArityMismatch {
                symbol: name.to_string(),
                expected: a,
                found: arity,
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
