use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CaptionFeatures, PatchCountBin, Severity, SizeVariation};
use crate::raster::{GridCell, SpatialPattern};

/// The fixed sentence for a mask without change, followed by its lexical variants.
pub const NO_CHANGE_SENTENCES: [&str; 4] = [
    "no forest loss is detected",
    "no deforestation is observed",
    "no forest change is visible",
    "no tree cover loss is detected",
];

const INTENSIFIERS: [&str; 2] = ["", "some"];

const LOSS_NOUNS: [&str; 5] = [
    "forest loss",
    "forest degradation",
    "deforestation",
    "tree cover loss",
    "forest clearing",
];

const VERBS: [&str; 5] = ["is visible", "is detected", "is noted", "is observed", "can be seen"];

/// `(lead, singular noun, plural noun)` for concentrated change.
const CONCENTRATED: [(&str, &str, &str); 3] = [
    ("mainly located in the", "area", "areas"),
    ("largely concentrated in the", "section", "sections"),
    ("predominantly found in the", "region", "regions"),
];

const SCATTERED: [&str; 3] = [
    "scattered across multiple regions",
    "dispersed throughout the scene",
    "spread across the whole image",
];

const SINGLE_PATCH: [&str; 2] = ["occurring in a single patch", "forming one contiguous patch"];
const FEW_PATCHES: [&str; 2] = ["occurring in a few patches", "spread over a few separate patches"];
const MANY_PATCHES: [&str; 2] = ["occurring in many small patches", "split into many small patches"];

const RELATIVE_LEADS: [&str; 2] = ["which are", "that are"];
const STANDALONE_LEAD: &str = "with patches";

const VARIATIONS: [SizeVariation; 4] = [
    SizeVariation::Similar,
    SizeVariation::Some,
    SizeVariation::Large,
    SizeVariation::High,
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Location,
    Patches,
    Variation,
}

fn join_cells(cells: &[GridCell]) -> String {
    match cells {
        [] => String::new(),
        [only] => only.name().to_string(),
        [init @ .., last] => {
            let head: Vec<_> = init.iter().map(|c| c.name()).collect();
            format!("{} and {}", head.join(" "), last.name())
        }
    }
}

/// Renders one caption for `features`; the same `(features, seed)` always gives the same
/// sentence.
///
/// The sentence is severity phrase, loss noun and verb, followed by the location, patch
/// and size-variation phrases in a seeded order. The size-variation phrase takes its
/// relative form ("which are ...") directly after the patch phrase and a standalone form
/// ("with patches ...") anywhere else.
pub fn render_caption(features: &CaptionFeatures, seed: u64) -> String {
    if features.patch_count == 0 || features.severity == Severity::No {
        return NO_CHANGE_SENTENCES[0].to_string();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, options: &[&'static str]| *options.choose(rng).unwrap();

    let mut words: Vec<String> = Vec::new();
    let intensifier = pick(&mut rng, &INTENSIFIERS);
    if !intensifier.is_empty() {
        words.push(intensifier.into());
    }
    words.push(features.severity.adjective().into());
    words.push(pick(&mut rng, &LOSS_NOUNS).into());
    words.push(pick(&mut rng, &VERBS).into());

    let location = match &features.location.pattern {
        SpatialPattern::Concentrated(cells) => {
            let (lead, one, many) = *CONCENTRATED.choose(&mut rng).unwrap();
            let noun = if cells.len() == 1 { one } else { many };
            format!("{lead} {} {noun}", join_cells(cells))
        }
        SpatialPattern::Scattered => pick(&mut rng, &SCATTERED).into(),
        SpatialPattern::Empty => String::new(),
    };
    let patches = match features.patch_bin() {
        PatchCountBin::Single => pick(&mut rng, &SINGLE_PATCH),
        PatchCountBin::Few => pick(&mut rng, &FEW_PATCHES),
        PatchCountBin::Many | PatchCountBin::None => pick(&mut rng, &MANY_PATCHES),
    };
    let relative_lead = pick(&mut rng, &RELATIVE_LEADS);

    let mut order = vec![Slot::Location, Slot::Patches];
    if features.patch_count > 1 {
        order.push(Slot::Variation);
    }
    order.shuffle(&mut rng);

    for (i, slot) in order.iter().enumerate() {
        match slot {
            Slot::Location if !location.is_empty() => words.push(location.clone()),
            Slot::Location => {}
            Slot::Patches => words.push(patches.into()),
            Slot::Variation => {
                let lead = if i > 0 && order[i - 1] == Slot::Patches {
                    relative_lead
                } else {
                    STANDALONE_LEAD
                };
                words.push(format!("{lead} {}", features.size_variation.phrase()));
            }
        }
    }
    words.join(" ")
}

/// Every token the generator can emit.
pub fn lexicon() -> BTreeSet<&'static str> {
    let mut phrases: Vec<&'static str> = Vec::new();
    phrases.extend(NO_CHANGE_SENTENCES);
    phrases.extend(INTENSIFIERS);
    phrases.extend(LOSS_NOUNS);
    phrases.extend(VERBS);
    for (lead, one, many) in CONCENTRATED {
        phrases.extend([lead, one, many]);
    }
    phrases.extend(SCATTERED);
    phrases.extend(SINGLE_PATCH);
    phrases.extend(FEW_PATCHES);
    phrases.extend(MANY_PATCHES);
    phrases.extend(RELATIVE_LEADS);
    phrases.push(STANDALONE_LEAD);
    phrases.push("and");
    phrases.extend(VARIATIONS.map(SizeVariation::phrase));
    phrases.extend(Severity::LADDER.map(Severity::adjective));
    phrases.extend(GridCell::ALL.map(GridCell::name));
    phrases.iter().flat_map(|p| p.split_whitespace()).collect()
}
