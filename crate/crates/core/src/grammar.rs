//! Tagged trajectory grammar: parsing policy output, serializing actions,
//! and rendering prompts with judged-useless observations masked out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Judgment a policy attaches to an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    /// Case-insensitive read of a judge payload; surrounding whitespace is
    /// already trimmed by the parser.
    fn parse(payload: &str) -> Option<Verdict> {
        if payload.eq_ignore_ascii_case("yes") {
            Some(Verdict::Yes)
        } else if payload.eq_ignore_ascii_case("no") {
            Some(Verdict::No)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "Yes",
            Verdict::No => "No",
        })
    }
}

/// One tagged element of a policy response.
///
/// Search and answer payloads are stored trimmed and non-empty; think
/// payloads are kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Action {
    Think(String),
    Search(String),
    Judge(Verdict),
    Answer(String),
}

/// A document as it appeared in an observation block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedDoc {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

/// Retrieval results attached to a search step, plus their rendered form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub docs: Vec<ObservedDoc>,
    pub rendered: String,
}

/// One executed step: the action, any observation it produced, and the
/// judgment later bound to that observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<Verdict>,
}

impl Step {
    pub fn bare(action: Action) -> Step {
        Step {
            action,
            observation: None,
            judgment: None,
        }
    }
}

/// A complete episode trace from the grammar's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub question: String,
    pub steps: Vec<Step>,
    pub final_answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// An opening tag with no matching close tag before end of input.
    UnclosedTag(&'static str),
    /// A `<` that does not begin any known opening tag.
    UnknownTag,
    /// A close tag with no opening tag in front of it.
    UnexpectedCloseTag,
    /// Judge payload other than yes/no (case-insensitive).
    InvalidJudge,
    /// Search or answer payload empty after trimming.
    EmptyPayload(&'static str),
    /// Non-whitespace content after a closed answer tag.
    TextAfterAnswer,
    /// Non-whitespace content outside any tag.
    StrayText,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::UnclosedTag(tag) => write!(f, "unclosed <{tag}> tag"),
            ParseErrorKind::UnknownTag => f.write_str("unknown tag"),
            ParseErrorKind::UnexpectedCloseTag => f.write_str("close tag without opening tag"),
            ParseErrorKind::InvalidJudge => f.write_str("judge payload is not yes or no"),
            ParseErrorKind::EmptyPayload(tag) => write!(f, "empty <{tag}> payload"),
            ParseErrorKind::TextAfterAnswer => f.write_str("content after final answer"),
            ParseErrorKind::StrayText => f.write_str("text outside tags"),
        }
    }
}

/// Why a response failed to parse, and the byte offset where it went wrong.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

/// Flow-rule violations a trajectory can carry without failing to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleViolation {
    /// Answered while the most recent observation was judged useless.
    AnswerAfterNoJudge { step_index: usize },
    /// Searched again while an earlier observation was still unjudged.
    SearchWithoutJudge { step_index: usize },
    /// Episode ended with no answer.
    MissingAnswer,
    /// Judge tag with no unjudged observation to bind to.
    UnboundJudge { step_index: usize },
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("mask has {got} entries but trajectory has {expected} observations")]
    MaskLength { expected: usize, got: usize },
}

const TAGS: [(&str, &str, &str); 4] = [
    ("think", "<think>", "</think>"),
    ("search", "<search>", "</search>"),
    ("judge", "<judge>", "</judge>"),
    ("answer", "<answer>", "</answer>"),
];

/// Parses one policy response into actions.
///
/// Accepts only a sequence of known tags separated by whitespace, with at
/// most one answer, which must come last. Judge payloads must read yes or no
/// in any case; search and answer payloads must be non-empty after trimming.
/// Think payloads are free-form, including nested tag-like text, up to the
/// first `</think>`.
pub fn parse_response(text: &str) -> Result<Vec<Action>, ParseError> {
    let mut actions = Vec::new();
    let mut pos = 0;
    let mut answered = false;
    while pos < text.len() {
        let c = text[pos..].chars().next().expect("pos is a char boundary");
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        if answered {
            return Err(ParseError {
                kind: ParseErrorKind::TextAfterAnswer,
                offset: pos,
            });
        }
        if c != '<' {
            return Err(ParseError {
                kind: ParseErrorKind::StrayText,
                offset: pos,
            });
        }
        if text[pos..].starts_with("</") {
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedCloseTag,
                offset: pos,
            });
        }
        let Some(&(name, open, close)) = TAGS.iter().find(|(_, open, _)| text[pos..].starts_with(open))
        else {
            return Err(ParseError {
                kind: ParseErrorKind::UnknownTag,
                offset: pos,
            });
        };
        let body_start = pos + open.len();
        let Some(rel) = text[body_start..].find(close) else {
            return Err(ParseError {
                kind: ParseErrorKind::UnclosedTag(name),
                offset: pos,
            });
        };
        let payload = &text[body_start..body_start + rel];
        let action = match name {
            "think" => Action::Think(payload.to_string()),
            "search" | "answer" => {
                let trimmed = payload.trim();
                if trimmed.is_empty() {
                    return Err(ParseError {
                        kind: ParseErrorKind::EmptyPayload(name),
                        offset: body_start,
                    });
                }
                if name == "search" {
                    Action::Search(trimmed.to_string())
                } else {
                    answered = true;
                    Action::Answer(trimmed.to_string())
                }
            }
            _ => match Verdict::parse(payload.trim()) {
                Some(v) => Action::Judge(v),
                None => {
                    return Err(ParseError {
                        kind: ParseErrorKind::InvalidJudge,
                        offset: body_start,
                    });
                }
            },
        };
        actions.push(action);
        pos = body_start + rel + close.len();
    }
    Ok(actions)
}

/// Inverse of [`parse_response`] for well-formed actions: one tag per line.
pub fn serialize_actions(actions: &[Action]) -> String {
    let mut lines = Vec::with_capacity(actions.len());
    for action in actions {
        lines.push(match action {
            Action::Think(t) => format!("<think>{t}</think>"),
            Action::Search(q) => format!("<search>{q}</search>"),
            Action::Judge(v) => format!("<judge>{v}</judge>"),
            Action::Answer(a) => format!("<answer>{a}</answer>"),
        });
    }
    lines.join("\n")
}

/// Renders retrieval results as one "(title) text" line per document,
/// truncated to at most `char_cap` characters.
pub fn render_observation(docs: &[ObservedDoc], char_cap: usize) -> String {
    let joined = docs
        .iter()
        .map(|d| format!("({}) {}", d.title, d.text))
        .collect::<Vec<_>>()
        .join("\n");
    match joined.char_indices().nth(char_cap) {
        Some((byte_idx, _)) => joined[..byte_idx].to_string(),
        None => joined,
    }
}

/// The fixed prompt header every context starts with.
pub fn instruction_block(question: &str) -> String {
    format!(
        "Answer the given question step by step.\n\
         Instructions:\n\
         1. Reason inside <think> and </think> tags whenever new information arrives.\n\
         2. If external knowledge is needed, search with <search> query </search>.\n\
         3. When results arrive, evaluate their usefulness and state the judgment as <judge>Yes</judge> or <judge>No</judge>.\n\
         4. Follow these rules strictly:\n\
         \x20  a. If the information is useful and sufficient for a complete final answer, go to step 5.\n\
         \x20  b. If the information is useful but incomplete, search again with <search>...</search>.\n\
         \x20  c. If the information is not useful, search again; do not answer yet.\n\
         5. Give the final answer inside <answer>...</answer> tags and stop; no text may follow the answer.\n\
         Question: {question}\n"
    )
}

/// Renders the prompt for the next policy call: the instruction block, then
/// every step's tags in order. Observation blocks appear only where `mask`
/// is true; search tags and judge tags always remain. `mask` has one entry
/// per step that carries an observation, in step order.
pub fn render_context(
    question: &str,
    steps: &[Step],
    mask: &[bool],
) -> Result<String, GrammarError> {
    let expected = steps.iter().filter(|s| s.observation.is_some()).count();
    if mask.len() != expected {
        return Err(GrammarError::MaskLength {
            expected,
            got: mask.len(),
        });
    }
    let mut out = instruction_block(question);
    let mut obs_idx = 0;
    for step in steps {
        out.push_str(&serialize_actions(std::slice::from_ref(&step.action)));
        out.push('\n');
        if let Some(obs) = &step.observation {
            if mask[obs_idx] {
                out.push_str("<observation>");
                out.push_str(&obs.rendered);
                out.push_str("</observation>\n");
            }
            obs_idx += 1;
        }
        if let Some(v) = &step.judgment {
            if !matches!(step.action, Action::Judge(_)) {
                out.push_str(&format!("<judge>{v}</judge>\n"));
            }
        }
    }
    Ok(out)
}

/// Post-hoc structural check of the judge-then-act flow rules. The episode
/// engine detects timing-sensitive violations (unbound judges, searching past
/// an unjudged observation) as they happen; this inspects only the finished
/// trajectory.
pub fn validate_rules(trajectory: &Trajectory) -> Vec<RuleViolation> {
    let mut violations = Vec::new();
    if trajectory.final_answer.is_none() {
        violations.push(RuleViolation::MissingAnswer);
    }
    for (i, step) in trajectory.steps.iter().enumerate() {
        match &step.action {
            Action::Search(_) => {
                let unjudged_before = trajectory.steps[..i]
                    .iter()
                    .any(|s| s.observation.is_some() && s.judgment.is_none());
                if unjudged_before {
                    violations.push(RuleViolation::SearchWithoutJudge { step_index: i });
                }
            }
            Action::Judge(_) => {
                violations.push(RuleViolation::UnboundJudge { step_index: i });
            }
            Action::Answer(_) => {
                let last_observed = trajectory.steps[..i]
                    .iter()
                    .rev()
                    .find(|s| s.observation.is_some());
                if last_observed.and_then(|s| s.judgment) == Some(Verdict::No) {
                    violations.push(RuleViolation::AnswerAfterNoJudge { step_index: i });
                }
            }
            Action::Think(_) => {}
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_turn() {
        let text = "<think>need the creator</think>\n<search>show creator</search>";
        let actions = parse_response(text).unwrap();
        assert_eq!(
            actions,
            vec![
                Action::Think("need the creator".into()),
                Action::Search("show creator".into()),
            ]
        );
    }

    #[test]
    fn parses_judge_case_insensitively() {
        let actions = parse_response("<judge> YES </judge><judge>no</judge>").unwrap();
        assert_eq!(
            actions,
            vec![Action::Judge(Verdict::Yes), Action::Judge(Verdict::No)]
        );
    }

    #[test]
    fn rejects_invalid_judge_payload() {
        let err = parse_response("<judge>maybe</judge>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::InvalidJudge);
        assert_eq!(err.offset, 7);
    }

    #[test]
    fn rejects_unclosed_tag() {
        let err = parse_response("<search>dangling").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnclosedTag("search"));
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn rejects_unknown_and_stray() {
        let err = parse_response("<recall>x</recall>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownTag);
        let err = parse_response("hello <think>x</think>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::StrayText);
        assert_eq!(err.offset, 0);
        let err = parse_response("</think>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedCloseTag);
    }

    #[test]
    fn rejects_content_after_answer() {
        let err = parse_response("<answer>1987</answer> trailing").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::TextAfterAnswer);
        let err = parse_response("<answer>1987</answer><search>more</search>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::TextAfterAnswer);
        assert!(parse_response("<answer>1987</answer>\n  ").is_ok());
    }

    #[test]
    fn rejects_empty_search_and_answer() {
        let err = parse_response("<search>   </search>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::EmptyPayload("search"));
        let err = parse_response("<answer></answer>").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::EmptyPayload("answer"));
    }

    #[test]
    fn think_payload_is_verbatim() {
        let actions = parse_response("<think>  keep <tags> and spaces  </think>").unwrap();
        assert_eq!(
            actions,
            vec![Action::Think("  keep <tags> and spaces  ".into())]
        );
    }

    #[test]
    fn empty_response_parses_to_no_actions() {
        assert_eq!(parse_response("").unwrap(), vec![]);
        assert_eq!(parse_response(" \n\t ").unwrap(), vec![]);
    }

    #[test]
    fn serialize_then_parse_round_trips() {
        let actions = vec![
            Action::Think("weigh the options".into()),
            Action::Search("first query".into()),
            Action::Judge(Verdict::No),
            Action::Search("second query".into()),
            Action::Judge(Verdict::Yes),
            Action::Answer("1987".into()),
        ];
        let text = serialize_actions(&actions);
        assert_eq!(parse_response(&text).unwrap(), actions);
        assert_eq!(serialize_actions(&parse_response(&text).unwrap()), text);
    }

    #[test]
    fn observation_rendering_truncates_at_char_cap() {
        let docs = vec![
            ObservedDoc {
                doc_id: "d1".into(),
                title: "First".into(),
                text: "alpha beta".into(),
            },
            ObservedDoc {
                doc_id: "d2".into(),
                title: "Second".into(),
                text: "gamma delta".into(),
            },
        ];
        let full = render_observation(&docs, 2000);
        assert_eq!(full, "(First) alpha beta\n(Second) gamma delta");
        let capped = render_observation(&docs, 10);
        assert_eq!(capped, "(First) al");
        assert_eq!(render_observation(&docs, 0), "");
        // Caps count characters, so multi-byte text never splits mid-char.
        let accented = vec![ObservedDoc {
            doc_id: "d3".into(),
            title: "É".into(),
            text: "études".into(),
        }];
        assert_eq!(render_observation(&accented, 5), "(É) é");
    }

    #[test]
    fn context_masks_noed_observations_but_keeps_tags() {
        let obs = |text: &str| Observation {
            docs: vec![ObservedDoc {
                doc_id: "d".into(),
                title: "T".into(),
                text: text.into(),
            }],
            rendered: format!("(T) {text}"),
        };
        let steps = vec![
            Step {
                action: Action::Search("first".into()),
                observation: Some(obs("useless body")),
                judgment: Some(Verdict::No),
            },
            Step {
                action: Action::Search("second".into()),
                observation: Some(obs("useful body")),
                judgment: Some(Verdict::Yes),
            },
        ];
        let ctx = render_context("Q?", &steps, &[false, true]).unwrap();
        assert!(ctx.contains("<search>first</search>"));
        assert!(!ctx.contains("useless body"));
        assert!(ctx.contains("<judge>No</judge>"));
        assert!(ctx.contains("<observation>(T) useful body</observation>"));
        assert!(ctx.starts_with("Answer the given question step by step."));
        assert!(ctx.contains("Question: Q?\n"));
    }

    #[test]
    fn context_rejects_wrong_mask_length() {
        let steps = vec![Step::bare(Action::Think("x".into()))];
        let err = render_context("Q", &steps, &[true]).unwrap_err();
        assert!(matches!(err, GrammarError::MaskLength { expected: 0, got: 1 }));
    }

    #[test]
    fn unjudged_observation_stays_visible() {
        let steps = vec![Step {
            action: Action::Search("q".into()),
            observation: Some(Observation {
                docs: vec![],
                rendered: "fresh result".into(),
            }),
            judgment: None,
        }];
        let ctx = render_context("Q", &steps, &[true]).unwrap();
        assert!(ctx.contains("<observation>fresh result</observation>"));
        // The tag example in the header is the only judge mention.
        let body = ctx.split("Question: Q\n").nth(1).unwrap();
        assert!(!body.contains("<judge>"));
    }

    #[test]
    fn validate_flags_all_rule_breaks() {
        let obs = Observation {
            docs: vec![],
            rendered: "r".into(),
        };
        let t = Trajectory {
            question: "Q".into(),
            steps: vec![
                Step {
                    action: Action::Search("a".into()),
                    observation: Some(obs.clone()),
                    judgment: None,
                },
                Step {
                    action: Action::Search("b".into()),
                    observation: Some(obs),
                    judgment: Some(Verdict::No),
                },
                Step::bare(Action::Judge(Verdict::Yes)),
                Step::bare(Action::Answer("x".into())),
            ],
            final_answer: Some("x".into()),
        };
        let v = validate_rules(&t);
        assert!(v.contains(&RuleViolation::SearchWithoutJudge { step_index: 1 }));
        assert!(v.contains(&RuleViolation::UnboundJudge { step_index: 2 }));
        assert!(v.contains(&RuleViolation::AnswerAfterNoJudge { step_index: 3 }));
        assert!(!v.contains(&RuleViolation::MissingAnswer));

        let unanswered = Trajectory {
            question: "Q".into(),
            steps: vec![],
            final_answer: None,
        };
        assert_eq!(validate_rules(&unanswered), vec![RuleViolation::MissingAnswer]);
    }

    #[test]
    fn clean_trajectory_validates_empty() {
        let t = Trajectory {
            question: "Q".into(),
            steps: vec![
                Step {
                    action: Action::Search("a".into()),
                    observation: Some(Observation {
                        docs: vec![],
                        rendered: "r".into(),
                    }),
                    judgment: Some(Verdict::Yes),
                },
                Step::bare(Action::Answer("x".into())),
            ],
            final_answer: Some("x".into()),
        };
        assert!(validate_rules(&t).is_empty());
    }
}
