//! Screen verdicts and the parser that turns free-form model text into one.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseConfidence {
    /// The whole answer was a single polarity word.
    ExactToken,
    /// Polarity found inside a longer answer.
    Inferred,
    /// No polarity found; fell back to non-clone.
    Defaulted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenVerdict {
    pub is_clone: bool,
    pub raw_response: String,
    pub parse_confidence: ParseConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Session {
    SingleTurn,
    MultiTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    WithChallenge,
    WithoutChallenge,
}

/// One re-evaluation setting: conversation handling times challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChallengeCondition {
    pub session: Session,
    pub intervention: Intervention,
}

impl ChallengeCondition {
    pub const ALL: [ChallengeCondition; 4] = [
        ChallengeCondition::new(Session::SingleTurn, Intervention::WithChallenge),
        ChallengeCondition::new(Session::SingleTurn, Intervention::WithoutChallenge),
        ChallengeCondition::new(Session::MultiTurn, Intervention::WithChallenge),
        ChallengeCondition::new(Session::MultiTurn, Intervention::WithoutChallenge),
    ];

    pub const fn new(session: Session, intervention: Intervention) -> Self {
        Self {
            session,
            intervention,
        }
    }

    /// Short label, e.g. `ST+C` or `MT-C`.
    pub fn label(&self) -> &'static str {
        match (self.session, self.intervention) {
            (Session::SingleTurn, Intervention::WithChallenge) => "ST+C",
            (Session::SingleTurn, Intervention::WithoutChallenge) => "ST-C",
            (Session::MultiTurn, Intervention::WithChallenge) => "MT+C",
            (Session::MultiTurn, Intervention::WithoutChallenge) => "MT-C",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
    }
}

const POSITIVE: &[&str] = &["true", "yes"];
const NEGATIVE: &[&str] = &["false", "no"];
const SAME_WORDS: &[&str] = &["equivalent", "clone", "clones", "identical", "same"];
const DIFFERENT_WORDS: &[&str] = &["different", "differ", "inequivalent", "nonequivalent"];

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

fn polarity_word(w: &str) -> Option<bool> {
    if POSITIVE.contains(&w) {
        Some(true)
    } else if NEGATIVE.contains(&w) {
        Some(false)
    } else {
        None
    }
}

/// Reads a clone / non-clone answer out of arbitrary model text.
///
/// Total over all inputs. Matching is case-insensitive:
/// a bare `True`/`Yes`/`False`/`No` is an exact token; otherwise the first
/// such word anywhere wins; otherwise phrases like "not equivalent" or
/// "are clones" decide; anything else defaults to non-clone.
pub fn parse_screen_response(raw: &str) -> ScreenVerdict {
    let verdict = |is_clone, parse_confidence| ScreenVerdict {
        is_clone,
        raw_response: raw.into(),
        parse_confidence,
    };

    let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if let Some(p) = polarity_word(&stripped.to_lowercase()) {
        return verdict(p, ParseConfidence::ExactToken);
    }

    let ws = words(raw);
    if let Some(p) = ws.iter().find_map(|w| polarity_word(w)) {
        return verdict(p, ParseConfidence::Inferred);
    }

    let negated_same = ws.iter().enumerate().any(|(i, w)| {
        (w == "not" || w == "non" || w == "isn" || w == "aren")
            && ws[i + 1..]
                .iter()
                .take(3)
                .any(|n| SAME_WORDS.contains(&n.as_str()))
    });
    if negated_same || ws.iter().any(|w| DIFFERENT_WORDS.contains(&w.as_str())) {
        return verdict(false, ParseConfidence::Inferred);
    }
    if ws.iter().any(|w| SAME_WORDS.contains(&w.as_str())) {
        return verdict(true, ParseConfidence::Inferred);
    }
    verdict(false, ParseConfidence::Defaulted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> (bool, ParseConfidence) {
        let v = parse_screen_response(s);
        assert_eq!(v.raw_response, s);
        (v.is_clone, v.parse_confidence)
    }

    #[test]
    fn exact_tokens() {
        assert_eq!(parse("True"), (true, ParseConfidence::ExactToken));
        assert_eq!(parse("  false.\n"), (false, ParseConfidence::ExactToken));
        assert_eq!(parse("**YES**"), (true, ParseConfidence::ExactToken));
        assert_eq!(parse("`No`"), (false, ParseConfidence::ExactToken));
    }

    #[test]
    fn polarity_inside_prose() {
        assert_eq!(
            parse("No, these are not clones."),
            (false, ParseConfidence::Inferred)
        );
        assert_eq!(
            parse("After tracing both loops: True"),
            (true, ParseConfidence::Inferred)
        );
    }

    #[test]
    fn phrases_without_polarity_words() {
        assert_eq!(
            parse("They are not functionally equivalent."),
            (false, ParseConfidence::Inferred)
        );
        assert_eq!(
            parse("The outputs differ for negative n"),
            (false, ParseConfidence::Inferred)
        );
        assert_eq!(
            parse("Both functions are equivalent"),
            (true, ParseConfidence::Inferred)
        );
    }

    #[test]
    fn shrug_defaults_to_non_clone() {
        assert_eq!(parse("¯\\_(ツ)_/¯"), (false, ParseConfidence::Defaulted));
        assert_eq!(parse(""), (false, ParseConfidence::Defaulted));
    }

    #[test]
    fn words_inside_identifiers_do_not_count() {
        // "trueish" and "nothing" are not polarity tokens
        assert_eq!(parse("trueish nothing"), (false, ParseConfidence::Defaulted));
    }

    #[test]
    fn condition_labels_round_trip() {
        for c in ChallengeCondition::ALL {
            assert_eq!(ChallengeCondition::from_label(c.label()), Some(c));
        }
        assert_eq!(ChallengeCondition::from_label("mt+c").map(|c| c.session), Some(Session::MultiTurn));
        assert_eq!(ChallengeCondition::from_label("XX"), None);
    }
}
