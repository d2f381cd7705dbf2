//! Property tests for the trajectory grammar: serialization and parsing are
//! inverse on well-formed action sequences, and the parser never panics.

use proptest::prelude::*;

use requery_core::grammar::{
    parse_response, serialize_actions, Action, ParseErrorKind, Verdict,
};
use requery_core::eval::normalize_answer;

/// Trimmed, non-empty, tag-free payloads for search and answer.
fn word_payload() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-zA-Z0-9]{1,8}", 1..5).prop_map(|words| words.join(" "))
}

/// Think payloads are kept verbatim, so anything without a tag opener must
/// survive the round trip, including leading and trailing whitespace.
fn think_payload() -> impl Strategy<Value = String> {
    prop::string::string_regex("[^<]{0,60}").unwrap()
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        think_payload().prop_map(Action::Think),
        word_payload().prop_map(Action::Search),
        prop_oneof![Just(Verdict::Yes), Just(Verdict::No)].prop_map(Action::Judge),
    ]
}

fn action_sequence() -> impl Strategy<Value = Vec<Action>> {
    (
        prop::collection::vec(action(), 0..8),
        prop::option::of(word_payload()),
    )
        .prop_map(|(mut actions, answer)| {
            if let Some(a) = answer {
                actions.push(Action::Answer(a));
            }
            actions
        })
}

proptest! {
    #[test]
    fn serialization_round_trips(actions in action_sequence()) {
        let text = serialize_actions(&actions);
        let parsed = parse_response(&text).unwrap();
        prop_assert_eq!(parsed, actions);
    }

    #[test]
    fn serialization_is_stable_under_reparse(actions in action_sequence()) {
        let once = serialize_actions(&actions);
        let twice = serialize_actions(&parse_response(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn parser_never_panics(text in ".{0,200}") {
        let _ = parse_response(&text);
    }

    #[test]
    fn nothing_may_follow_an_answer(
        actions in action_sequence(),
        trailer in word_payload(),
    ) {
        let mut text = serialize_actions(&actions);
        text.push_str("\n<answer>fin</answer>\n<think>");
        text.push_str(&trailer);
        text.push_str("</think>");
        // Whether the sequence already answered or the appended answer is
        // the first, the trailing think tag breaks the same rule.
        let err = parse_response(&text).unwrap_err();
        prop_assert_eq!(err.kind, ParseErrorKind::TextAfterAnswer);
    }

    #[test]
    fn normalization_is_idempotent(text in ".{0,120}") {
        let once = normalize_answer(&text);
        prop_assert_eq!(normalize_answer(&once), once.clone());
    }
}
