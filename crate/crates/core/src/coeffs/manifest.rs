//! Conversation manifests: one JSON document per conversation.
//!
//! Paths inside a manifest are relative to the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::FeatureSequence;
use crate::coeffs::{load_sequence, CoeffLayout, CoeffSequence, IdentityCoeffs};
use crate::error::{Error, Result};
use crate::format;

/// Role of an interlocutor within one turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Listener,
    Speaker,
}

impl Role {
    pub fn from_indicator(r: u8) -> Option<Self> {
        match r {
            0 => Some(Role::Listener),
            1 => Some(Role::Speaker),
            _ => None,
        }
    }

    pub fn indicator(self) -> u8 {
        match self {
            Role::Listener => 0,
            Role::Speaker => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Role::Listener => Role::Speaker,
            Role::Speaker => Role::Listener,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningVocabulary {
    pub name: String,
    pub labels: Vec<String>,
}

impl ConditioningVocabulary {
    pub fn new(name: impl Into<String>, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn attitude3() -> Self {
        Self::new("attitude3", &["positive", "neutral", "negative"])
    }

    pub fn dialog_act4() -> Self {
        Self::new("dialog_act4", &["inform", "question", "agree", "feedback"])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.labels.is_empty() {
            return Err(format!("vocabulary `{}` has no labels", self.name));
        }
        let mut seen = HashSet::new();
        for l in &self.labels {
            if !seen.insert(l) {
                return Err(format!("vocabulary `{}` repeats label `{l}`", self.name));
            }
        }
        Ok(())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A conditioning value `e`: a label id inside a named vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningLabel {
    pub vocabulary: String,
    pub label_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub identity_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnEntry {
    pub turn_index: u32,
    /// `r_i`: 1 when P speaks, 0 when P listens.
    pub role_of_p: u8,
    /// `e_i` for P: an attitude when listening, a dialog act when speaking.
    pub conditioning: ConditioningLabel,
    /// The matching label for Q, needed only when Q is generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioning_q: Option<ConditioningLabel>,
    pub audio_feature_path: String,
    pub coeffs_p_path: String,
    pub coeffs_q_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationManifest {
    pub fps: f32,
    #[serde(default)]
    pub layout: CoeffLayout,
    pub vocabularies: Vec<ConditioningVocabulary>,
    /// Keyed by participant name, `"P"` and `"Q"`.
    pub participants: BTreeMap<String, Participant>,
    pub turns: Vec<TurnEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Parse,
    Contiguity,
    Role,
    Vocabulary,
    Conditioning,
    Participant,
    Unreadable,
    LengthMismatch,
    Layout,
    Fps,
    Empty,
}

/// One broken manifest invariant, located at a turn when applicable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub turn: Option<u32>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.turn {
            Some(t) => write!(f, "turn {t}: {:?}: {}", self.rule, self.detail),
            None => write!(f, "{:?}: {}", self.rule, self.detail),
        }
    }
}

fn violation(turn: Option<u32>, rule: Rule, detail: impl Into<String>) -> Violation {
    Violation {
        turn,
        rule,
        detail: detail.into(),
    }
}

impl ConversationManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = format::read_file(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        format::write_file(path, &bytes)
    }

    pub fn vocabulary(&self, name: &str) -> Option<&ConditioningVocabulary> {
        self.vocabularies.iter().find(|v| v.name == name)
    }

    /// Checks every manifest invariant, reading referenced files relative to
    /// `base_dir`. Never fails: problems, including unreadable files, come
    /// back as violations.
    pub fn validate(&self, base_dir: &Path) -> Vec<Violation> {
        let mut out = Vec::new();

        if !(self.fps > 0.0 && self.fps.is_finite()) {
            out.push(violation(
                None,
                Rule::Fps,
                format!("fps must be positive, got {}", self.fps),
            ));
        }
        if let Err(e) = self.layout.check() {
            out.push(violation(None, Rule::Layout, e.to_string()));
        }
        let mut names = HashSet::new();
        for v in &self.vocabularies {
            if let Err(e) = v.check() {
                out.push(violation(None, Rule::Vocabulary, e));
            }
            if !names.insert(&v.name) {
                out.push(violation(
                    None,
                    Rule::Vocabulary,
                    format!("vocabulary `{}` declared twice", v.name),
                ));
            }
        }
        for who in ["P", "Q"] {
            match self.participants.get(who) {
                None => out.push(violation(None, Rule::Participant, format!("participant {who} missing"))),
                Some(p) => match IdentityCoeffs::load(&base_dir.join(&p.identity_path)) {
                    Err(e) => out.push(violation(None, Rule::Unreadable, format!("identity of {who}: {e}"))),
                    Ok(id) if !id.matches(&self.layout) => out.push(violation(
                        None,
                        Rule::Layout,
                        format!("identity of {who} does not match the coefficient layout"),
                    )),
                    Ok(_) => {}
                },
            }
        }

        if self.turns.is_empty() {
            out.push(violation(None, Rule::Empty, "manifest has no turns"));
        }
        out.extend(self.contiguity_violations());

        for t in &self.turns {
            let at = Some(t.turn_index);
            if Role::from_indicator(t.role_of_p).is_none() {
                out.push(violation(
                    at,
                    Rule::Role,
                    format!("role indicator must be 0 or 1, got {}", t.role_of_p),
                ));
            }
            let labels =
                std::iter::once(("P", Some(&t.conditioning))).chain(std::iter::once(("Q", t.conditioning_q.as_ref())));
            for (who, label) in labels {
                let Some(label) = label else { continue };
                match self.vocabulary(&label.vocabulary) {
                    None => out.push(violation(
                        at,
                        Rule::Conditioning,
                        format!("{who} uses undeclared vocabulary `{}`", label.vocabulary),
                    )),
                    Some(v) if label.label_id >= v.len() => out.push(violation(
                        at,
                        Rule::Conditioning,
                        format!(
                            "{who} label {} outside `{}` ({} labels)",
                            label.label_id,
                            v.name,
                            v.len()
                        ),
                    )),
                    Some(_) => {}
                }
            }

            let audio = FeatureSequence::load(&base_dir.join(&t.audio_feature_path));
            let p = load_sequence(&base_dir.join(&t.coeffs_p_path), self.fps);
            let q = load_sequence(&base_dir.join(&t.coeffs_q_path), self.fps);
            for (what, err) in [
                ("audio features", audio.as_ref().err()),
                ("coefficients of P", p.as_ref().err()),
                ("coefficients of Q", q.as_ref().err()),
            ] {
                if let Some(e) = err {
                    out.push(violation(at, Rule::Unreadable, format!("{what}: {e}")));
                }
            }
            if let (Ok(a), Ok(p), Ok(q)) = (&audio, &p, &q) {
                if a.len() != p.len() || a.len() != q.len() {
                    out.push(violation(
                        at,
                        Rule::LengthMismatch,
                        format!("audio has {} frames, P has {}, Q has {}", a.len(), p.len(), q.len()),
                    ));
                }
                if a.is_empty() {
                    out.push(violation(at, Rule::Empty, "turn has no frames"));
                }
            }
        }
        out
    }

    fn contiguity_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut sorted: Vec<u32> = self.turns.iter().map(|t| t.turn_index).collect();
        sorted.sort_unstable();
        let mut reported = HashSet::new();
        for w in sorted.windows(2) {
            if w[0] == w[1] && reported.insert(w[0]) {
                out.push(violation(
                    Some(w[0]),
                    Rule::Contiguity,
                    format!("turn index {} appears more than once", w[0]),
                ));
            }
        }
        let mut distinct = sorted.clone();
        distinct.dedup();
        for (expected, &got) in (1u32..).zip(&distinct) {
            if got != expected {
                out.push(violation(
                    Some(got),
                    Rule::Contiguity,
                    format!("expected turn index {expected}, found {got}"),
                ));
                break;
            }
        }
        if out.is_empty() {
            let in_order = self.turns.windows(2).all(|w| w[0].turn_index < w[1].turn_index);
            if !in_order {
                out.push(violation(None, Rule::Contiguity, "turns are not listed in index order"));
            }
        }
        out
    }
}

/// Validates a manifest file, folding parse failures into the violation list.
pub fn validate_manifest_file(path: &Path) -> Vec<Violation> {
    match ConversationManifest::load(path) {
        Ok(m) => m.validate(path.parent().unwrap_or(Path::new("."))),
        Err(e) => vec![violation(None, Rule::Parse, e.to_string())],
    }
}

/// One fully loaded turn.
#[derive(Clone, Debug)]
pub struct Turn {
    pub index: u32,
    pub role_of_p: Role,
    pub conditioning: ConditioningLabel,
    pub conditioning_q: Option<ConditioningLabel>,
    pub audio: FeatureSequence,
    pub coeffs_p: CoeffSequence,
    pub coeffs_q: CoeffSequence,
}

/// A validated manifest together with all of its referenced data.
#[derive(Clone, Debug)]
pub struct Conversation {
    pub name: String,
    pub manifest: ConversationManifest,
    pub identity_p: IdentityCoeffs,
    pub identity_q: IdentityCoeffs,
    pub turns: Vec<Turn>,
}

impl Conversation {
    pub fn load(path: &Path) -> Result<Self> {
        let manifest = ConversationManifest::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let violations = manifest.validate(base);
        if !violations.is_empty() {
            return Err(Error::Manifest(violations));
        }
        let fps = manifest.fps;
        let mut turns = manifest
            .turns
            .iter()
            .map(|t| {
                Ok(Turn {
                    index: t.turn_index,
                    role_of_p: Role::from_indicator(t.role_of_p).expect("validated"),
                    conditioning: t.conditioning.clone(),
                    conditioning_q: t.conditioning_q.clone(),
                    audio: FeatureSequence::load(&base.join(&t.audio_feature_path))?,
                    coeffs_p: load_sequence(&base.join(&t.coeffs_p_path), fps)?,
                    coeffs_q: load_sequence(&base.join(&t.coeffs_q_path), fps)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        turns.sort_by_key(|t| t.index);
        let identity = |who: &str| IdentityCoeffs::load(&base.join(&manifest.participants[who].identity_path));
        let name = base
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Self {
            name,
            identity_p: identity("P")?,
            identity_q: identity("Q")?,
            manifest,
            turns,
        })
    }
}

/// Finds every `manifest.json` below `dir`, sorted by path.
pub fn discover_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.file_name().is_some_and(|n| n == "manifest.json") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn load_conversations(dir: &Path) -> Result<Vec<Conversation>> {
    discover_manifests(dir)?.iter().map(|p| Conversation::load(p)).collect()
}
