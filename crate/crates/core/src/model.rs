//! Versioned JSON model documents.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::scalar::Scalar;
use crate::tree::{Node, Tree};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument<T> {
    format_version: u32,
    scalar: String,
    params: ForestParams,
    covariate_names: Vec<String>,
    response_names: Vec<String>,
    rescale_bounds: Vec<(T, T)>,
    z_train: Vec<Vec<T>>,
    trees: Vec<Vec<Node<T>>>,
}

#[derive(Deserialize)]
struct Header {
    format_version: Option<u32>,
    scalar: Option<String>,
}

fn syntax_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    let reason = match e.classify() {
        Category::Eof => format!("document truncated ({e})"),
        _ => e.to_string(),
    };
    // serde reports the offending key in its message; surface it as the field when present.
    let field = reason
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "document".to_string());
    Error::load(field, reason)
}

impl<T: Scalar> Forest<T> {
    pub fn to_json(&self) -> Vec<u8> {
        let doc = ModelDocument {
            format_version: FORMAT_VERSION,
            scalar: T::NAME.to_string(),
            params: self.params,
            covariate_names: self.covariate_names.clone(),
            response_names: self.response_names.clone(),
            rescale_bounds: self.bounds.clone(),
            z_train: self.z_train.rows().into_iter().map(|r| r.to_vec()).collect(),
            trees: self.trees.iter().map(|t| t.nodes().to_vec()).collect(),
        };
        serde_json::to_vec(&doc).expect("model document serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let header: Header = serde_json::from_slice(bytes).map_err(syntax_error)?;
        match header.format_version {
            Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::load(
                    "format_version",
                    format!("unsupported version {v}, expected {FORMAT_VERSION}"),
                ))
            }
            None => return Err(Error::load("format_version", "missing")),
        }
        match header.scalar.as_deref() {
            Some(s) if s == T::NAME => {}
            Some(s) => {
                return Err(Error::load(
                    "scalar",
                    format!("model stores `{s}`, requested `{}`", T::NAME),
                ))
            }
            None => return Err(Error::load("scalar", "missing")),
        }
        let doc: ModelDocument<T> = serde_json::from_slice(bytes).map_err(syntax_error)?;

        let n = doc.z_train.len();
        let d = doc.response_names.len();
        let p = doc.covariate_names.len();
        doc.params
            .validate(p, d)
            .map_err(|e| Error::load("params", e.to_string()))?;
        if n < 2 {
            return Err(Error::load("z_train", "fewer than 2 training rows"));
        }
        if doc.z_train.iter().any(|r| r.len() != d) {
            return Err(Error::load(
                "z_train",
                format!("every row must have {d} values"),
            ));
        }
        if doc.rescale_bounds.len() != d || doc.rescale_bounds.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Err(Error::load("rescale_bounds", format!("need {d} increasing pairs")));
        }
        if doc.trees.len() != doc.params.n_trees {
            return Err(Error::load(
                "trees",
                format!("{} trees, params say {}", doc.trees.len(), doc.params.n_trees),
            ));
        }
        let mut trees = Vec::with_capacity(doc.trees.len());
        for (t, nodes) in doc.trees.into_iter().enumerate() {
            for node in &nodes {
                match node {
                    Node::Leaf { members } => {
                        if members.is_empty() || members.iter().any(|&i| i >= n) {
                            return Err(Error::load(
                                "trees",
                                format!("tree {t} has an empty leaf or a member index out of range"),
                            ));
                        }
                    }
                    Node::Split { rule, .. } => {
                        if rule.feature >= p {
                            return Err(Error::load(
                                "trees",
                                format!("tree {t} splits on covariate {} of {p}", rule.feature),
                            ));
                        }
                    }
                }
            }
            let tree = Tree::from_nodes(nodes)
                .map_err(|e| Error::load("trees", format!("tree {t}: {e}")))?;
            trees.push(tree);
        }
        let z_train = Array2::from_shape_vec((n, d), doc.z_train.into_iter().flatten().collect())
            .map_err(|e| Error::load("z_train", e.to_string()))?;
        Ok(Forest {
            params: doc.params,
            covariate_names: doc.covariate_names,
            response_names: doc.response_names,
            bounds: doc.rescale_bounds,
            z_train,
            trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read(path)?)
    }
}
