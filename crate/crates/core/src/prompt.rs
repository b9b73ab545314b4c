//! Versioned prompt catalog and chat message construction.
//!
//! Templates live as text files under `prompts/` and use `{name}`
//! placeholders. Substitution is single-pass, so braces inside inserted code
//! are never re-expanded.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pair::CodePair;
use crate::screen::{ChallengeCondition, Intervention, ScreenVerdict, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub text: &'static str,
}

pub const SYSTEM: PromptTemplate = PromptTemplate {
    name: "system_v1",
    text: include_str!("../prompts/system_v1.txt"),
};
pub const SCREEN: PromptTemplate = PromptTemplate {
    name: "screen_v1",
    text: include_str!("../prompts/screen_v1.txt"),
};
pub const GEN_INPUTS: PromptTemplate = PromptTemplate {
    name: "gen_inputs_v1",
    text: include_str!("../prompts/gen_inputs_v1.txt"),
};
pub const CHALLENGE: PromptTemplate = PromptTemplate {
    name: "challenge_v1",
    text: include_str!("../prompts/challenge_v1.txt"),
};
pub const NEUTRAL: PromptTemplate = PromptTemplate {
    name: "neutral_v1",
    text: include_str!("../prompts/neutral_v1.txt"),
};

pub const CATALOG: [PromptTemplate; 5] = [SYSTEM, SCREEN, GEN_INPUTS, CHALLENGE, NEUTRAL];

impl PromptTemplate {
    /// Replaces every `{key}` found in `vars`; other braces are left alone.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let hit = after.find('}').and_then(|close| {
                let key = &after[..close];
                vars.iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| (*v, close))
            });
            match hit {
                Some((value, close)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out.trim_end().to_string()
    }
}

fn system() -> Message {
    Message::new(Role::System, SYSTEM.render(&[]))
}

fn screen_question(pair: &CodePair) -> String {
    SCREEN.render(&[("code_a", &pair.fragment_a), ("code_b", &pair.fragment_b)])
}

/// Messages for the first-stage clone question.
pub fn screen_messages(pair: &CodePair) -> Vec<Message> {
    vec![system(), Message::new(Role::User, screen_question(pair))]
}

/// Messages asking for `count` argument tuples for one fragment.
pub fn gen_inputs_messages(
    fragment: &str,
    entrypoint: &str,
    arity: usize,
    count: usize,
    avoid: &[Vec<Value>],
) -> Vec<Message> {
    let avoid = if avoid.is_empty() {
        "none".to_string()
    } else {
        serde_json::to_string(avoid).unwrap_or_else(|_| "none".to_string())
    };
    let count = count.to_string();
    let arity = arity.to_string();
    let body = GEN_INPUTS.render(&[
        ("count", &count),
        ("entrypoint", entrypoint),
        ("arity", &arity),
        ("code", fragment),
        ("avoid", &avoid),
    ]);
    vec![system(), Message::new(Role::User, body)]
}

fn follow_up(prior: &ScreenVerdict, intervention: Intervention) -> String {
    match intervention {
        Intervention::WithChallenge => {
            let claim = if prior.is_clone {
                "do not compute the same result for every input"
            } else {
                "compute the same result for every input"
            };
            CHALLENGE.render(&[("counter_claim", claim)])
        }
        Intervention::WithoutChallenge => NEUTRAL.render(&[]),
    }
}

/// Messages for re-evaluating a pair after a baseline screen.
///
/// Single-turn starts a fresh conversation: the clone question and the
/// follow-up share one user message and nothing from the baseline exchange
/// is included. Multi-turn replays the baseline question and answer and
/// appends the follow-up as a new user turn.
pub fn reevaluate_messages(
    pair: &CodePair,
    prior: &ScreenVerdict,
    condition: ChallengeCondition,
) -> Vec<Message> {
    let question = screen_question(pair);
    let follow = follow_up(prior, condition.intervention);
    match condition.session {
        Session::SingleTurn => vec![
            system(),
            Message::new(Role::User, alloc::format!("{question}\n\n{follow}")),
        ],
        Session::MultiTurn => vec![
            system(),
            Message::new(Role::User, question),
            Message::new(Role::Assistant, prior.raw_response.clone()),
            Message::new(Role::User, follow),
        ],
    }
}

/// Pulls argument tuples for an entrypoint of `arity` out of model text.
///
/// The first JSON array that parses anywhere in the text is taken as the
/// list of inputs; each element must be an array of exactly `arity` values
/// and other elements are dropped. A flat list is accepted for arity 1.
pub fn parse_generated_inputs(text: &str, arity: usize) -> Vec<Vec<Value>> {
    for (start, _) in text.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        let Some(Ok(Value::Array(items))) = stream.next() else {
            continue;
        };
        if items.is_empty() {
            continue;
        }
        let any_nested = items.iter().any(Value::is_array);
        let out: Vec<Vec<Value>> = if any_nested {
            items
                .into_iter()
                .filter_map(|item| match item {
                    Value::Array(args) if args.len() == arity => Some(args),
                    _ => None,
                })
                .collect()
        } else if arity == 1 {
            items.into_iter().map(|v| vec![v]).collect()
        } else {
            Vec::new()
        };
        return out;
    }
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::parse_screen_response;
    use serde_json::json;

    fn pair() -> CodePair {
        CodePair::new(
            "p",
            "def f(x):\n    return {x: 1}",
            "def g(x):\n    return dict([(x, 1)])",
            None,
        )
    }

    #[test]
    fn screen_prompt_contains_both_fragments_verbatim() {
        let msgs = screen_messages(&pair());
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs[1].content.contains("return {x: 1}"));
        assert!(msgs[1].content.contains("dict([(x, 1)])"));
        assert!(msgs[1].content.contains("True"));
        assert!(!msgs[1].content.contains("{code_a}"));
    }

    #[test]
    fn render_is_single_pass() {
        let p = CodePair::new("p", "{code_b}", "B", None);
        let msgs = screen_messages(&p);
        assert!(msgs[1].content.contains("```python\n{code_b}\n```"));
    }

    #[test]
    fn single_turn_without_challenge_is_fresh() {
        let prior = parse_screen_response("True -- the loops agree (baseline-marker-771)");
        let cond = ChallengeCondition::new(Session::SingleTurn, Intervention::WithoutChallenge);
        let msgs = reevaluate_messages(&pair(), &prior, cond);
        assert!(msgs.iter().all(|m| m.role != Role::Assistant));
        assert_eq!(msgs.len(), 2);
        let text = &msgs[1].content;
        assert!(!text.contains("baseline-marker-771"));
        assert!(!text.contains("wrong"));
        assert!(text.contains(NEUTRAL.render(&[]).as_str()));
    }

    #[test]
    fn multi_turn_with_challenge_replays_exchange() {
        let prior = parse_screen_response("False");
        let cond = ChallengeCondition::new(Session::MultiTurn, Intervention::WithChallenge);
        let msgs = reevaluate_messages(&pair(), &prior, cond);
        let roles: Vec<Role> = msgs.iter().map(|m| m.role).collect();
        assert_eq!(roles, [Role::System, Role::User, Role::Assistant, Role::User]);
        assert_eq!(msgs[1], screen_messages(&pair())[1]);
        assert_eq!(msgs[2].content, "False");
        assert!(msgs[3].content.contains("was wrong"));
        // prior said non-clone, so the dispute claims equivalence
        assert!(msgs[3].content.contains("functions compute the same result"));
    }

    #[test]
    fn challenge_text_opposes_prior() {
        let cond = ChallengeCondition::new(Session::SingleTurn, Intervention::WithChallenge);
        let yes = reevaluate_messages(&pair(), &parse_screen_response("True"), cond);
        assert!(yes[1].content.contains("do not compute the same result"));
        assert!(yes.iter().all(|m| m.role != Role::Assistant));
    }

    #[test]
    fn gen_prompt_lists_avoided_inputs() {
        let msgs = gen_inputs_messages("def f(n): return n", "f", 1, 3, &[vec![json!(5)]]);
        let body = &msgs[1].content;
        assert!(body.contains("Write 3 test inputs"));
        assert!(body.contains("`f`"));
        assert!(body.contains("[[5]]"));
        let fresh = gen_inputs_messages("def f(n): return n", "f", 1, 3, &[]);
        assert!(fresh[1].content.contains("inputs: none"));
    }

    #[test]
    fn extracts_plain_list() {
        assert_eq!(
            parse_generated_inputs("[[0],[5],[10]]", 1),
            vec![vec![json!(0)], vec![json!(5)], vec![json!(10)]]
        );
    }

    #[test]
    fn extracts_list_embedded_in_prose() {
        let text = "Sure! Here are inputs:\n```json\n[[1, 2], [3, 4]]\n```\nHope this helps [really].";
        assert_eq!(
            parse_generated_inputs(text, 2),
            vec![vec![json!(1), json!(2)], vec![json!(3), json!(4)]]
        );
    }

    #[test]
    fn drops_arity_mismatches() {
        assert_eq!(
            parse_generated_inputs("[[1, 2], [3], [4, 5, 6], [7, 8]]", 2),
            vec![vec![json!(1), json!(2)], vec![json!(7), json!(8)]]
        );
    }

    #[test]
    fn flat_list_only_for_unary() {
        assert_eq!(parse_generated_inputs("[1, 2]", 1).len(), 2);
        assert!(parse_generated_inputs("[1, 2]", 2).is_empty());
    }

    #[test]
    fn nothing_parseable() {
        assert!(parse_generated_inputs("no idea [", 1).is_empty());
        assert!(parse_generated_inputs("", 1).is_empty());
        assert!(parse_generated_inputs("[] then [[1]]", 1) == vec![vec![json!(1)]]);
    }
}
