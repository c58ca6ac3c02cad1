//! Deterministic scripted provider for offline runs and tests.
//!
//! A script is a JSON list of rules:
//!
//! ```json
//! [
//!   {"tag": "watch_decision",
//!    "match": {"agent_id": "^agent_3$"},
//!    "responses": ["WATCH: i1\nSKIP: i2\nCONTRADICTION: no"],
//!    "repeat": true}
//! ]
//! ```
//!
//! A rule applies when its `tag` equals the call's template tag and every
//! `match` regex matches the corresponding binding. More specific rules (more
//! regex constraints) win; first-registered wins ties. Each rule's responses
//! are consumed in order; with `repeat` the last response repeats forever.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Bindings, TextProvider};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    pub tag: String,
    /// Binding name to regex; all must match for the rule to apply.
    #[serde(default)]
    pub r#match: std::collections::BTreeMap<String, String>,
    pub responses: Vec<String>,
    /// Repeat the last response instead of exhausting.
    #[serde(default)]
    pub repeat: bool,
}

struct CompiledRule {
    tag: String,
    matchers: Vec<(String, Regex)>,
    responses: Vec<String>,
    repeat: bool,
}

/// One recorded provider call, for test assertions.
#[derive(Debug, Clone)]
pub struct CallRecord {
    pub tag: String,
    pub prompt: String,
}

pub struct ScriptedProvider {
    rules: Vec<CompiledRule>,
    /// Per-rule consumption cursor; a mutex keeps parallel agents from
    /// interleaving reads of one rule's ordered list.
    cursors: Mutex<Vec<usize>>,
    log: Mutex<Vec<CallRecord>>,
    calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn from_rules(rules: Vec<ScriptRule>) -> Self {
        let compiled = rules
            .into_iter()
            .map(|r| CompiledRule {
                tag: r.tag,
                matchers: r
                    .r#match
                    .into_iter()
                    .map(|(k, v)| {
                        let re = Regex::new(&v).unwrap_or_else(|e| {
                            panic!("invalid script regex for binding `{k}`: {e}")
                        });
                        (k, re)
                    })
                    .collect(),
                responses: r.responses,
                repeat: r.repeat,
            })
            .collect::<Vec<_>>();
        let cursors = Mutex::new(vec![0; compiled.len()]);
        Self {
            rules: compiled,
            cursors,
            log: Mutex::new(Vec::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let rules: Vec<ScriptRule> = serde_json::from_str(json)
            .map_err(|e| Error::validation(format!("bad script JSON: {e}")))?;
        Ok(Self::from_rules(rules))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    /// Tags in call order, for loop-contract assertions.
    pub fn tag_sequence(&self) -> Vec<String> {
        self.log.lock().unwrap().iter().map(|c| c.tag.clone()).collect()
    }

    fn rule_matches(rule: &CompiledRule, tag: &str, bindings: &Bindings) -> bool {
        if rule.tag != tag {
            return false;
        }
        rule.matchers.iter().all(|(name, re)| {
            bindings
                .get(name)
                .map(|value| re.is_match(value))
                .unwrap_or(false)
        })
    }
}

impl TextProvider for ScriptedProvider {
    fn id(&self) -> &str {
        "scripted"
    }

    fn generate(&self, tag: &str, prompt: &str, bindings: &Bindings) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(CallRecord {
            tag: tag.to_string(),
            prompt: prompt.to_string(),
        });

        // Candidate rules ordered by specificity desc, registration order asc.
        let mut candidates: Vec<usize> = self
            .rules
            .iter()
            .enumerate()
            .filter(|(_, r)| Self::rule_matches(r, tag, bindings))
            .map(|(i, _)| i)
            .collect();
        candidates.sort_by_key(|&i| (usize::MAX - self.rules[i].matchers.len(), i));

        if candidates.is_empty() {
            return Err(Error::ScriptExhausted(format!(
                "no rule matches tag `{tag}` with bindings {bindings:?}"
            )));
        }

        let mut cursors = self.cursors.lock().unwrap();
        for idx in candidates {
            let rule = &self.rules[idx];
            let cursor = cursors[idx];
            if cursor < rule.responses.len() {
                cursors[idx] += 1;
                return Ok(rule.responses[cursor].clone());
            }
            if rule.repeat {
                if let Some(last) = rule.responses.last() {
                    return Ok(last.clone());
                }
            }
        }
        Err(Error::ScriptExhausted(format!(
            "all rules for tag `{tag}` are out of responses"
        )))
    }
}
