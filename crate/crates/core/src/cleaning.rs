//! The two text cleaning templates.
//!
//! Each template is an ordered rule table. A rule is a regular expression
//! and a replacement template; the special replacement [`LOWERCASE`] maps
//! the matched text to lowercase instead. The tables are versioned and the
//! version string is stored in every model bundle, so a bundle refuses to
//! score text with a cleaner that differs from the one it was trained with.
//!
//! Both templates are applied repeatedly until the text stops changing,
//! which makes them idempotent by construction.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use fancy_regex::Regex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledCorpus;

/// Replacement marker: lowercase the match.
pub const LOWERCASE: &str = "<lowercase>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CleanMode {
    #[serde(rename = "clean0")]
    Clean0,
    #[serde(rename = "clean1")]
    Clean1,
}

impl CleanMode {
    pub const ALL: [CleanMode; 2] = [CleanMode::Clean0, CleanMode::Clean1];

    pub fn name(self) -> &'static str {
        match self {
            CleanMode::Clean0 => "clean0",
            CleanMode::Clean1 => "clean1",
        }
    }

    /// Version of this mode's rule table.
    pub fn rules_version(self) -> &'static str {
        match self {
            CleanMode::Clean0 => "clean0-v1",
            CleanMode::Clean1 => "clean1-v1",
        }
    }

    pub fn rules(self) -> &'static [CleanRule] {
        match self {
            CleanMode::Clean0 => &CLEAN0.rules,
            CleanMode::Clean1 => &CLEAN1.rules,
        }
    }

    pub fn clean(self, text: &str) -> String {
        match self {
            CleanMode::Clean0 => CLEAN0.apply(text),
            CleanMode::Clean1 => CLEAN1.apply(text),
        }
    }
}

impl fmt::Display for CleanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CleanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0" | "clean0" => Ok(CleanMode::Clean0),
            "1" | "clean1" => Ok(CleanMode::Clean1),
            other => Err(format!("unknown cleaning mode `{other}` (expected 0 or 1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CleanRule {
    pub name: &'static str,
    pub pattern: &'static str,
    pub replacement: &'static str,
    pub order: u32,
}

struct RuleSet {
    rules: Vec<CleanRule>,
    compiled: Vec<Regex>,
}

impl RuleSet {
    fn new(table: &[(&'static str, &'static str, &'static str)]) -> Self {
        let rules: Vec<CleanRule> = table
            .iter()
            .enumerate()
            .map(|(i, &(name, pattern, replacement))| CleanRule {
                name,
                pattern,
                replacement,
                order: (i as u32 + 1) * 10,
            })
            .collect();
        let compiled = rules
            .iter()
            .map(|r| Regex::new(r.pattern).unwrap_or_else(|e| panic!("rule {}: {e}", r.name)))
            .collect();
        Self { rules, compiled }
    }

    fn apply_once(&self, text: &str) -> String {
        let mut current = text.to_string();
        for (rule, re) in self.rules.iter().zip(&self.compiled) {
            let next = if rule.replacement == LOWERCASE {
                re.replace_all(&current, |caps: &fancy_regex::Captures| caps[0].to_lowercase())
            } else {
                re.replace_all(&current, rule.replacement)
            };
            if let std::borrow::Cow::Owned(s) = next {
                current = s;
            }
        }
        current
    }

    fn apply(&self, text: &str) -> String {
        let mut current = self.apply_once(text);
        loop {
            let next = self.apply_once(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }
}

// Rule tables. Order in the table is application order.

const LOWER: (&str, &str, &str) = ("lowercase", r"[^\p{Ll}\s]+", LOWERCASE);
const WHITESPACE: (&str, &str, &str) = ("collapse-whitespace", r"\s+", " ");
const CHAR_RUN: (&str, &str, &str) = ("char-run-4-to-3", r"(.)\1{3,}", "$1$1$1");
const WORD_RUN: (&str, &str, &str) = ("word-run-3-to-2", r"\b(\w+)(?: \1\b){2,}", "$1 $1");
const TRIM: (&str, &str, &str) = ("trim", r"^ +| +$", "");

static CLEAN0: LazyLock<RuleSet> =
    LazyLock::new(|| RuleSet::new(&[LOWER, WHITESPACE, CHAR_RUN, WORD_RUN, TRIM]));

static CLEAN1: LazyLock<RuleSet> = LazyLock::new(|| {
    RuleSet::new(&[
        LOWER,
        ("markup", r"<[^<>]*>", " "),
        ("url", r"(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.)\S*", " "),
        ("ipv4", r"\b\d{1,3}(?:\.\d{1,3}){3}\b", " "),
        ("wiki-link", r"\[\[[^\[\]]*\]\]|\{\{[^{}]*\}\}", " "),
        (
            "user-reference",
            r"\b(?:user|user talk|talk|wikipedia|wp|special|file|image|category):\S*|@\w+",
            " ",
        ),
        (
            "ascii-emoticon",
            r"(?<!\S)(?:[:;=]-?[()\[\]dpo3/\\|*]|:'-?\(|x-?d+|<3|\^_*\^|-_+-|o_o)(?!\S)",
            " ",
        ),
        (
            "emoji",
            r"[\x{1F000}-\x{1FAFF}\x{2600}-\x{27BF}\x{2300}-\x{23FF}\x{2B00}-\x{2BFF}\x{FE00}-\x{FE0F}\x{200D}\x{20E3}\x{3030}\x{303D}\x{3297}\x{3299}\x{E0020}-\x{E007F}]",
            " ",
        ),
        ("non-ascii-token", r"\S*[^\x00-\x7F]\S*", " "),
        ("control", r"[\x00-\x1F\x7F]", " "),
        ("punctuation-run", r"([!?])[!?]+", "$1"),
        WHITESPACE,
        CHAR_RUN,
        WORD_RUN,
        TRIM,
    ])
});

/// Lowercase, collapse whitespace, collapse character runs of 4+ to 3 and
/// word runs of 3+ to 2.
pub fn clean0(text: &str) -> String {
    CleanMode::Clean0.clean(text)
}

/// Everything [`clean0`] does, plus removal of markup, URLs, IPv4
/// addresses, wiki/user references, emoticons, emoji and tokens containing
/// non-ASCII characters; `!`/`?` runs collapse to their first character.
/// The output is printable ASCII.
pub fn clean1(text: &str) -> String {
    CleanMode::Clean1.clean(text)
}

/// Cleans every item's text in place order. Targets, ids and labels are
/// untouched; texts that clean to nothing stay in the corpus.
pub fn clean_corpus(corpus: &LabeledCorpus, mode: CleanMode) -> LabeledCorpus {
    let mut out = corpus.clone();
    out.items.par_iter_mut().for_each(|item| {
        item.comment.text = mode.clean(&item.comment.text);
    });
    out
}

/// Human-readable dump of a mode's rule table.
pub fn dump_rules(mode: CleanMode) -> String {
    let mut out = format!("# {} ({})\n", mode.name(), mode.rules_version());
    out.push_str("order\tname\tpattern\treplacement\n");
    for rule in mode.rules() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:?}\n",
            rule.order, rule.name, rule.pattern, rule.replacement
        ));
    }
    out
}
