//! Deterministic synthetic fixtures: small corpora with known retrieval
//! structure, used by tests, demos, and the command-line workflows.
//!
//! The two-hop fixture is built so that the question shares no token with
//! the document holding the answer; only a follow-up query formed from the
//! bridging entity can retrieve it. That makes success depend on judging
//! the first result useless and reformulating.

use crate::corpus::{Corpus, Document, Origin};
use crate::forge::{BenchSample, SampleKind};

/// A corpus paired with the samples answerable from it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Corpus,
    pub samples: Vec<BenchSample>,
}

const MAX_FIXTURE: usize = 256;

const SHOW_A: [&str; 16] = [
    "Brindle", "Copper", "Dapple", "Ember", "Fable", "Garnet", "Hollow", "Ivory", "Juniper",
    "Kestrel", "Lantern", "Maple", "Nimbus", "Orchard", "Pebble", "Quill",
];
const SHOW_B: [&str; 16] = [
    "Alley", "Borough", "Canyon", "Delta", "Estuary", "Fjord", "Grove", "Harbor", "Inlet",
    "Jetty", "Knoll", "Lagoon", "Mesa", "Nook", "Oasis", "Plateau",
];
const FIRST: [&str; 16] = [
    "Alda", "Bram", "Cleo", "Dovan", "Edric", "Fenna", "Galen", "Hesper", "Imre", "Jorun",
    "Kaelis", "Lisbet", "Maren", "Noll", "Odalys", "Petrin",
];
const LAST: [&str; 16] = [
    "Ashgrove", "Birchfield", "Caskwell", "Dunmore", "Ellerby", "Farrowmere", "Gladhollow",
    "Hartwick", "Ingleside", "Jasperline", "Kindlestone", "Larkspur", "Mosswood", "Netherfield",
    "Oakhurst", "Pinefell",
];
const TOWN: [&str; 16] = [
    "Avenwick", "Bellmarsh", "Corvane", "Drellin", "Eastmoor", "Falwick", "Gormere", "Hallowell",
    "Istwick", "Jorndale", "Kelmswood", "Loftmere", "Marrowgate", "Nulbrook", "Ostwick",
    "Pellford",
];
const PLACE_A: [&str; 16] = [
    "Amber", "Basalt", "Cedar", "Drift", "Echo", "Flint", "Gale", "Heath", "Iris", "Jade",
    "Kelp", "Loam", "Mist", "Nectar", "Opal", "Pumice",
];
const PLACE_B: [&str; 16] = [
    "Bastion", "Cove", "Dale", "Edge", "Fields", "Gate", "Haven", "Isle", "Junction", "Keep",
    "Landing", "Marsh", "Narrows", "Outpost", "Pier", "Quay",
];

/// Filler documents that match generic question words but never hold an
/// answer. Their prose deliberately contains no capitalized multi-word run
/// and no four-digit number, so they cannot donate a pivot entity or a
/// spurious year.
fn distractors() -> Vec<Document> {
    let doc = |id: &str, title: &str, text: &str| Document {
        id: id.into(),
        title: title.into(),
        text: text.into(),
        origin: Origin::Base,
    };
    vec![
        doc(
            "lore-0",
            "Almanac",
            "An almanac lists the creator of each entry beside the creator of the next.",
        ),
        doc(
            "lore-1",
            "Gazette",
            "The gazette credits a creator for every column, yet no creator signs twice.",
        ),
        doc(
            "lore-2",
            "Ledger",
            "This ledger names the creator of record and the creator of revisions.",
        ),
        doc(
            "lore-3",
            "Registry",
            "A registry binds each creator to one entry, never to another creator.",
        ),
        doc(
            "lore-4",
            "Catalogue",
            "The catalogue prints the creator of a work beneath its title.",
        ),
    ]
}

/// Two lowercase letters unique to `i`, appended to every invented word so
/// no token is shared across samples. Uniqueness pins retrieval: a query
/// naming one sample's entities can only match that sample's documents.
fn suffix(i: usize) -> String {
    let hi = (b'a' + (i / 16) as u8) as char;
    let lo = (b'a' + (i % 16) as u8) as char;
    format!("{hi}{lo}")
}

fn show_name(i: usize) -> String {
    let s = suffix(i);
    format!("{}{s} {}{s}", SHOW_A[i % 16], SHOW_B[(i / 16) % 16])
}

fn person_name(i: usize) -> String {
    let s = suffix(i);
    format!("{}{s} {}{s}", FIRST[i % 16], LAST[(i / 16) % 16])
}

fn town_name(i: usize) -> String {
    format!("{}{}", TOWN[i % 16], suffix(i))
}

fn fixture_year(i: usize) -> String {
    (1900 + (i * 13) % 100).to_string()
}

fn original_sample(id: String, question: String, gold: Vec<String>) -> BenchSample {
    BenchSample {
        sample_id: id,
        question,
        gold,
        kind: SampleKind::Original,
        entity_map: None,
        support_doc_ids: None,
    }
}

/// `n` samples whose answers need two retrieval hops. For sample `i` the
/// question names a show, the show document names its creator, and only the
/// creator document holds the answer year; the creator document shares zero
/// tokens with the question.
pub fn two_hop_fixture(n: usize) -> Fixture {
    assert!(n <= MAX_FIXTURE, "fixture supports at most {MAX_FIXTURE} samples");
    let mut docs = Vec::with_capacity(2 * n + 5);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let show = show_name(i);
        let person = person_name(i);
        let town = town_name(i);
        let year = fixture_year(i);
        // The show name appears twice and the question's common words (the,
        // creator, of) once. Repetition keeps the show document ahead of the
        // distractors at every corpus size: spreading those common words over
        // all show documents pins their document frequency near half the
        // corpus, so distractor scores on them stay flat as n grows.
        docs.push(Document {
            id: format!("show-{i:03}"),
            title: show.clone(),
            text: format!(
                "{show} is an animated television series and the creator of {show} is {person}."
            ),
            origin: Origin::Base,
        });
        docs.push(Document {
            id: format!("person-{i:03}"),
            title: person.clone(),
            text: format!("{person}, an illustrator active since {year}, grew up near {town}."),
            origin: Origin::Base,
        });
        samples.push(original_sample(
            format!("hop2-{i:03}"),
            format!("When was the creator of {show} born?"),
            vec![year],
        ));
    }
    docs.extend(distractors());
    Fixture {
        corpus: Corpus::new(docs).expect("fixture documents are valid"),
        samples,
    }
}

/// `n` samples answerable from the first retrieval: the question names the
/// person whose document holds the answer year.
pub fn single_hop_fixture(n: usize) -> Fixture {
    assert!(n <= MAX_FIXTURE, "fixture supports at most {MAX_FIXTURE} samples");
    let mut docs = Vec::with_capacity(n + 5);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let person = person_name(i);
        let town = town_name(i);
        let year = fixture_year(i);
        docs.push(Document {
            id: format!("person-{i:03}"),
            title: person.clone(),
            text: format!("{person}, an illustrator active since {year}, grew up near {town}."),
            origin: Origin::Base,
        });
        samples.push(original_sample(
            format!("hop1-{i:03}"),
            format!("Since when is {person} active?"),
            vec![year],
        ));
    }
    docs.extend(distractors());
    Fixture {
        corpus: Corpus::new(docs).expect("fixture documents are valid"),
        samples,
    }
}

/// Seed questions for the forge: each names a person and a place as
/// capitalized spans and carries a year answer, so entity substitution has
/// material to work with. Gold years stay below 1900, outside both the base
/// corpus years and the range the template rewriter draws from, so no corpus
/// document can ever answer an unrewritten seed.
pub fn forge_seeds(n: usize) -> Vec<BenchSample> {
    assert!(n <= MAX_FIXTURE, "fixture supports at most {MAX_FIXTURE} samples");
    (0..n)
        .map(|i| {
            let person = format!("{} {}", FIRST[i % 16], LAST[(i / 16) % 16]);
            let place = format!("{} {}", PLACE_A[i % 16], PLACE_B[(i / 16) % 16]);
            let year = (1850 + (i * 7) % 50).to_string();
            original_sample(
                format!("seed-{i:03}"),
                format!("In which year did {person} first visit {place}?"),
                vec![year],
            )
        })
        .collect()
}

/// A small neutral corpus for forging against. It holds the years 1900
/// through 1907 so year substitution has real collisions to reject.
pub fn forge_base_corpus() -> Corpus {
    let doc = |id: &str, title: &str, text: &str| Document {
        id: id.into(),
        title: title.into(),
        text: text.into(),
        origin: Origin::Base,
    };
    Corpus::new(vec![
        doc(
            "base-0",
            "Municipal Archive",
            "The municipal archive opened to readers in 1900 and has never closed.",
        ),
        doc(
            "base-1",
            "Rail Timetable",
            "A rail timetable from 1901 shows four departures each morning.",
        ),
        doc(
            "base-2",
            "Harvest Records",
            "Harvest records note an unusually dry season in 1902.",
        ),
        doc(
            "base-3",
            "Bridge Survey",
            "The bridge survey of 1903 recommended new pilings within a decade.",
        ),
        doc(
            "base-4",
            "Census Notes",
            "Census notes from 1904 count more households than the prior round.",
        ),
        doc(
            "base-5",
            "Tide Tables",
            "Tide tables printed in 1905 were sold at the harbor office.",
        ),
        doc(
            "base-6",
            "School Register",
            "The school register for 1906 lists three new classrooms.",
        ),
        doc(
            "base-7",
            "Market Bulletin",
            "A market bulletin from 1907 fixes the toll for loaded carts.",
        ),
    ])
    .expect("base documents are valid")
}
