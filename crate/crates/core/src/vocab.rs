//! Verb vocabulary and verb-noun class lists.
//!
//! The order of verbs in a [`VerbVocabulary`] fixes the dimension order of every
//! score vector in the system, so every artifact that stores score vectors also
//! stores the vocabulary [fingerprint](VerbVocabulary::fingerprint).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, write_file, Error, Result};

/// Manner verbs say how an action is performed, result verbs the end state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerbType {
    Manner,
    Result,
}

impl fmt::Display for VerbType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerbType::Manner => f.write_str("Manner"),
            VerbType::Result => f.write_str("Result"),
        }
    }
}

impl FromStr for VerbType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Manner" => Ok(VerbType::Manner),
            "Result" => Ok(VerbType::Result),
            other => Err(other.to_string()),
        }
    }
}

const DEFAULT_VOCABULARY: &str = include_str!("../data/verbs.csv");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerbEntry {
    pub lemma: String,
    pub verb_type: VerbType,
}

/// Ordered, immutable list of verb lemmas with their manner/result tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VerbEntry>", into = "Vec<VerbEntry>")]
pub struct VerbVocabulary {
    verbs: Vec<String>,
    types: Vec<VerbType>,
    index: HashMap<String, usize>,
}

impl VerbVocabulary {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, VerbType)>,
        S: Into<String>,
    {
        let mut verbs = Vec::new();
        let mut types = Vec::new();
        let mut index = HashMap::new();
        for (lemma, verb_type) in entries {
            let lemma = lemma.into();
            if index.insert(lemma.clone(), verbs.len()).is_some() {
                return Err(Error::DuplicateLemma(lemma));
            }
            verbs.push(lemma);
            types.push(verb_type);
        }
        if verbs.is_empty() {
            return Err(Error::Empty("vocabulary"));
        }
        Ok(Self {
            verbs,
            types,
            index,
        })
    }

    /// Parses the `lemma,Manner|Result` line format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (lemma, tag) = line.rsplit_once(',').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `lemma,type`", lineno + 1))
            })?;
            let lemma = lemma.split_whitespace().collect::<Vec<_>>().join(" ");
            if lemma.is_empty() {
                return Err(Error::Parse(format!("line {}: empty lemma", lineno + 1)));
            }
            let verb_type = tag.trim().parse().map_err(|tag| Error::UnknownVerbType {
                line: lineno + 1,
                tag,
            })?;
            entries.push((lemma, verb_type));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_file_string())
    }

    pub fn to_file_string(&self) -> String {
        self.iter()
            .map(|(lemma, t)| format!("{lemma},{t}\n"))
            .collect()
    }

    /// The 90-verb list shipped with the crate (47 manner, 43 result).
    pub fn default_verbs() -> Self {
        Self::parse(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.verbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verbs.is_empty()
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn verb(&self, index: usize) -> Option<&str> {
        self.verbs.get(index).map(String::as_str)
    }

    pub fn verb_type(&self, index: usize) -> Option<VerbType> {
        self.types.get(index).copied()
    }

    pub fn index_of(&self, lemma: &str) -> Option<usize> {
        self.index.get(lemma).copied()
    }

    /// Like [`index_of`](Self::index_of) but also accepts `-` in place of the
    /// space in multi-word lemmas (`turn-off` for `turn off`).
    pub fn resolve(&self, lemma: &str) -> Result<usize> {
        self.index_of(lemma)
            .or_else(|| self.index_of(&lemma.replace('-', " ")))
            .ok_or_else(|| Error::UnknownVerb(lemma.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, VerbType)> + '_ {
        self.verbs
            .iter()
            .map(String::as_str)
            .zip(self.types.iter().copied())
    }

    /// `mask[j] == 1` iff verb `j` has type `t`.
    pub fn type_mask(&self, t: VerbType) -> Vec<u8> {
        self.types.iter().map(|&vt| u8::from(vt == t)).collect()
    }

    pub fn count(&self, t: VerbType) -> usize {
        self.types.iter().filter(|&&vt| vt == t).count()
    }

    /// SHA-256 over the canonical file form, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    pub fn check_fingerprint(&self, found: &str) -> Result<()> {
        let expected = self.fingerprint();
        if expected == found {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                expected,
                found: found.to_string(),
            })
        }
    }
}

impl TryFrom<Vec<VerbEntry>> for VerbVocabulary {
    type Error = Error;

    fn try_from(entries: Vec<VerbEntry>) -> Result<Self> {
        Self::from_entries(entries.into_iter().map(|e| (e.lemma, e.verb_type)))
    }
}

impl From<VerbVocabulary> for Vec<VerbEntry> {
    fn from(vocab: VerbVocabulary) -> Self {
        vocab
            .verbs
            .into_iter()
            .zip(vocab.types)
            .map(|(lemma, verb_type)| VerbEntry { lemma, verb_type })
            .collect()
    }
}

/// Verb-noun action classes of a public dataset, in class-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VnClassList {
    classes: Vec<(String, String)>,
    index: HashMap<(String, String), usize>,
}

impl VnClassList {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut classes = Vec::new();
        let mut index = HashMap::new();
        for (verb, noun) in pairs {
            let key = (verb.into(), noun.into());
            if index.insert(key.clone(), classes.len()).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate verb-noun class `{} {}`",
                    key.0, key.1
                )));
            }
            classes.push(key);
        }
        if classes.is_empty() {
            return Err(Error::Empty("verb-noun class list"));
        }
        Ok(Self { classes, index })
    }

    /// One `verb,noun` pair per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (verb, noun) = line.split_once(',').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `verb,noun`", lineno + 1))
            })?;
            pairs.push((verb.trim().to_string(), noun.trim().to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_to_string(path.as_ref())?)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, index: usize) -> Option<(&str, &str)> {
        self.classes
            .get(index)
            .map(|(v, n)| (v.as_str(), n.as_str()))
    }

    pub fn index_of(&self, verb: &str, noun: &str) -> Option<usize> {
        self.index
            .get(&(verb.to_string(), noun.to_string()))
            .copied()
    }
}
