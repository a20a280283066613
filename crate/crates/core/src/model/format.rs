//! JSON model files.
//!
//! ```json
//! {
//!   "states": ["s0", "s1"],
//!   "principals": [{"name": "alice", "discount": "2/3"}],
//!   "actions": [
//!     {"state": "s0", "action": "a", "reward": [3], "transitions": [{"to": "s0", "prob": 1}]}
//!   ]
//! }
//! ```
//!
//! Numbers may be JSON numbers (read exactly from their decimal text) or
//! `"p/q"` strings. Saving always writes `"p/q"` strings, states in
//! declaration order and actions sorted by name, so save/load/save is
//! byte-stable. Missing `reward` lists mean all-zero rewards.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{AsymMdp, AsymMdpBuilder};
use crate::numeric::{format_rational, parse_rational, NumericMode, Rational};

/// An exact number in a model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(pub Rational);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(de::Error::custom(format!(
                    "expected a number or \"p/q\" string, found {other}"
                )))
            }
        };
        parse_rational(&text).map(Num).map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePrincipal {
    name: String,
    discount: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTransition {
    to: String,
    prob: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAction {
    state: String,
    action: String,
    #[serde(default)]
    reward: Vec<Num>,
    transitions: Vec<FileTransition>,
}

/// Metadata attached to models produced by the 3-SAT reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionMeta {
    /// `"standard"` or `"zero-sum"`.
    pub variant: String,
    pub threshold: Num,
    pub num_vars: usize,
    pub clauses: Vec<[i64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDocument {
    states: Vec<String>,
    principals: Vec<FilePrincipal>,
    actions: Vec<FileAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reduction: Option<ReductionMeta>,
}

/// A model file: the model plus optional reduction metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub model: AsymMdp,
    pub reduction: Option<ReductionMeta>,
}

impl From<AsymMdp> for Document {
    fn from(model: AsymMdp) -> Self {
        Document {
            model,
            reduction: None,
        }
    }
}

/// Parses a document without semantic validation.
pub fn parse_unvalidated(text: &str) -> Result<Document> {
    let doc: FileDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut builder = AsymMdpBuilder::new().states(doc.states);
    for p in doc.principals {
        builder = builder.principal(p.name, p.discount.0);
    }
    for a in doc.actions {
        builder.push_action(
            a.state,
            a.action,
            a.reward.into_iter().map(|n| n.0).collect(),
            a.transitions.into_iter().map(|t| (t.to, t.prob.0)).collect(),
        );
    }
    Ok(Document {
        model: builder.build()?,
        reduction: doc.reduction,
    })
}

/// Parses and validates a document.
pub fn parse(text: &str, mode: NumericMode) -> Result<Document> {
    let doc = parse_unvalidated(text)?;
    doc.model.ensure_valid(mode)?;
    Ok(doc)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_document(path: &Path, mode: NumericMode) -> Result<Document> {
    parse(&read_text(path)?, mode)
}

pub fn load(path: &Path, mode: NumericMode) -> Result<AsymMdp> {
    load_document(path, mode).map(|d| d.model)
}

/// Canonical JSON text, terminated by a newline.
pub fn to_string(doc: &Document) -> String {
    let m = &doc.model;
    let file = FileDocument {
        states: m.states().iter().map(|s| s.name.clone()).collect(),
        principals: m
            .principals()
            .iter()
            .map(|p| FilePrincipal {
                name: p.name.clone(),
                discount: Num(p.discount.clone()),
            })
            .collect(),
        actions: m
            .states()
            .iter()
            .flat_map(|state| {
                state.actions.iter().map(move |a| FileAction {
                    state: state.name.clone(),
                    action: a.name.clone(),
                    reward: a.rewards.iter().cloned().map(Num).collect(),
                    transitions: a
                        .transitions
                        .iter()
                        .map(|t| FileTransition {
                            to: m.state_name(t.to).to_string(),
                            prob: Num(t.prob.clone()),
                        })
                        .collect(),
                })
            })
            .collect(),
        reduction: doc.reduction.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

pub fn save_document(doc: &Document, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(doc)).map_err(|e| Error::io(path, e))
}

pub fn save(model: &AsymMdp, path: &Path) -> Result<()> {
    save_document(&Document::from(model.clone()), path)
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}
