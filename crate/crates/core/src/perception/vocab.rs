//! Label vocabularies: foreground stoplists and the background allowlist.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub const ADJECTIVES: &[&str] = &[
    "ancient", "athletic", "beautiful", "classic", "clean", "clear", "close-up", "crowded",
    "decorative", "dark", "empty", "fresh", "healthy", "high", "indoor", "light", "long", "modern",
    "narrow", "new", "old", "outdoor", "peaceful", "quiet", "rainy", "remote", "romantic", "sharp",
    "shiny", "short", "silent", "single", "small", "smooth", "soft", "spicy", "square", "strong",
    "stunning", "sweet", "tall", "tiny", "traditional", "warm", "wet", "wide", "wooden",
];

pub const VERBS: &[&str] = &[
    "act", "add", "adjust", "aid", "appear", "applause", "approach", "archery", "arrest",
    "assemble", "attach", "attend", "auction", "back", "baking", "balance", "bend", "blow", "boil",
    "bounce", "build", "burn", "buy", "call", "carry", "carve", "catch", "celebrate", "cheer",
    "climb", "close", "cook", "cool", "cover", "create", "crochet", "crush", "cry", "cut", "dance",
    "decorate", "deliver", "dive", "dribble", "drift", "drink", "drive", "drop", "eat", "exercise",
    "feed", "fight", "fill", "find", "fit", "float", "fly", "fold", "freeze", "fry", "gather",
    "give", "glow", "glue", "go", "graze", "greet", "grow", "guard", "guide", "hang", "harvest",
    "hide", "hike", "hit", "hold", "hug", "hunt", "illuminate", "install", "jog", "jump", "kick",
    "knit", "laugh", "launch", "lay", "lead", "lean", "learn", "leave", "lie", "lift", "load",
    "locate", "lock", "look", "lose", "make", "measure", "milk", "mix", "move", "open", "pack",
    "paint", "peel", "perform", "pick", "plant", "play", "plow", "pour", "practice", "prepare",
    "press", "print", "pull", "punch", "push", "put", "read", "receive", "reflect", "relax",
    "release", "remove", "repair", "rescue", "reveal", "ride", "rise", "roll", "rub", "run",
    "sail", "scatter", "see", "sell", "send", "serve", "sew", "shake", "shape", "shear", "shine",
    "shoot", "shout", "show", "shovel", "sing", "sip", "sit", "skate", "ski", "sleep", "slice",
    "slide", "smell", "smile", "smoke", "snap", "snow", "soak", "sort", "sow", "speak", "spill",
    "spin", "splash", "split", "spread", "spring", "sprinkle", "squeeze", "stab", "stand", "start",
    "stare", "steam", "stir", "stitch", "stop", "store", "stretch", "strike", "stroll", "study",
    "stuff", "swirl", "swing", "take", "talk", "teach", "tear", "tell", "think", "throw", "tick",
    "tie", "toast", "touch", "tour", "tow", "train", "trim", "trip", "type", "unlock", "use",
    "vacuum", "walk", "wash", "watch", "wave", "wear", "weave", "weld", "widen", "wipe", "write",
    "zip", "kiss",
];

pub const COLORS: &[&str] = &[
    "aqua", "amber", "beige", "black", "blue", "bronze", "brown", "gold", "gray", "green", "lilac",
    "orange", "pink", "purple", "red", "silver", "teal", "violet", "white", "yellow",
];

pub const REPEATED_CHARACTER_DESCRIPTIONS: &[&str] = &[
    "person man", "person woman", "person girl", "person boy", "man person", "woman person",
    "girl person", "boy person", "girl woman", "boy man", "woman girl", "boy man",
];

pub const BACKGROUND_ALLOWLIST: &[&str] = &[
    "sky", "water", "ocean", "sea", "river", "lake", "forest", "mountain", "desert", "field",
    "city", "cityscape", "city skyline", "night sky", "evening sky", "snow", "snowfield",
    "iceberg", "beach", "sand", "grassland", "grassy", "meadow", "garden", "park", "jungle",
    "island", "cave", "mountain range", "valley", "dune", "hill", "hillside", "horizon", "skyline",
    "background", "scenery", "landscape", "countryside", "farmland", "village", "road",
    "road trip", "street", "street corner", "street scene", "path", "trail", "outdoor", "outcrop",
    "rocky", "coast", "coastline", "shore", "shoreline", "riverbank", "river valley",
    "mountain lake", "riverbed", "mountain stream", "mountain pass", "mountain village",
    "mountaineer", "mountain view", "mountain snowy", "waterfall", "cascade",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Drop any label found in a stoplist.
    Foreground,
    /// Keep only labels found in the allowlist.
    Background,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForegroundStoplists {
    pub adjectives: Vec<String>,
    pub verbs: Vec<String>,
    pub colors: Vec<String>,
    pub repeated_character_descriptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyConfig {
    pub foreground_stoplists: ForegroundStoplists,
    pub background_allowlist: Vec<String>,
}

fn normalize(words: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<String> {
    let mut seen = HashSet::new();
    words
        .into_iter()
        .map(|w| w.as_ref().trim().to_lowercase())
        .filter(|w| !w.is_empty() && seen.insert(w.clone()))
        .collect()
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        Self {
            foreground_stoplists: ForegroundStoplists {
                adjectives: normalize(ADJECTIVES),
                verbs: normalize(VERBS),
                colors: normalize(COLORS),
                repeated_character_descriptions: normalize(REPEATED_CHARACTER_DESCRIPTIONS),
            },
            background_allowlist: normalize(BACKGROUND_ALLOWLIST),
        }
    }
}

impl VocabularyConfig {
    /// Lowercases and deduplicates every list in place.
    pub fn normalized(self) -> Self {
        let s = self.foreground_stoplists;
        Self {
            foreground_stoplists: ForegroundStoplists {
                adjectives: normalize(s.adjectives),
                verbs: normalize(s.verbs),
                colors: normalize(s.colors),
                repeated_character_descriptions: normalize(s.repeated_character_descriptions),
            },
            background_allowlist: normalize(self.background_allowlist),
        }
    }

    pub fn stoplisted(&self) -> impl Iterator<Item = &str> {
        let s = &self.foreground_stoplists;
        s.adjectives
            .iter()
            .chain(&s.verbs)
            .chain(&s.colors)
            .chain(&s.repeated_character_descriptions)
            .map(String::as_str)
    }
}

/// Filters tagger output. Matching is exact on the lowercased label; order
/// is preserved and duplicates are dropped.
pub fn filter_labels<S: AsRef<str>>(
    labels: &[S],
    mode: FilterMode,
    vocab: &VocabularyConfig,
) -> Vec<String> {
    let stop: HashSet<&str> = vocab.stoplisted().collect();
    let allow: HashSet<&str> = vocab.background_allowlist.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    labels
        .iter()
        .map(|l| l.as_ref().trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .filter(|l| match mode {
            FilterMode::Foreground => !stop.contains(l.as_str()),
            FilterMode::Background => allow.contains(l.as_str()),
        })
        .filter(|l| seen.insert(l.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn list_sizes() {
        let v = VocabularyConfig::default();
        let s = &v.foreground_stoplists;
        assert_eq!(s.adjectives.len(), 47);
        assert_eq!(s.verbs.len(), 223);
        assert_eq!(s.colors.len(), 20);
        // "boy man" is listed twice.
        assert_eq!(REPEATED_CHARACTER_DESCRIPTIONS.len(), 12);
        assert_eq!(s.repeated_character_descriptions.len(), 11);
        assert_eq!(v.background_allowlist.len(), 67);
    }

    #[test]
    fn foreground_examples() {
        let v = VocabularyConfig::default();
        assert_eq!(filter_labels(&["blue", "dog"], FilterMode::Foreground, &v), ["dog"]);
        assert_eq!(filter_labels(&["kiss", "sky"], FilterMode::Foreground, &v), ["sky"]);
        assert_eq!(
            filter_labels(&["person man", "person", "man"], FilterMode::Foreground, &v),
            ["person", "man"]
        );
    }

    #[test]
    fn background_example() {
        let v = VocabularyConfig::default();
        assert_eq!(filter_labels(&["sky", "dog"], FilterMode::Background, &v), ["sky"]);
    }

    #[test]
    fn case_and_duplicates() {
        let v = VocabularyConfig::default();
        assert_eq!(
            filter_labels(&["Dog", "dog", "RED", "cat"], FilterMode::Foreground, &v),
            ["dog", "cat"]
        );
    }

    #[test]
    fn matching_is_not_substring() {
        let v = VocabularyConfig::default();
        assert_eq!(filter_labels(&["redwood"], FilterMode::Foreground, &v), ["redwood"]);
        assert!(filter_labels(&["skyscraper"], FilterMode::Background, &v).is_empty());
    }

    proptest! {
        #[test]
        fn filtering_is_idempotent_and_sound(
            picks in proptest::collection::vec(0usize..400, 0..30),
            background in any::<bool>(),
        ) {
            let v = VocabularyConfig::default();
            let pool: Vec<&str> = ADJECTIVES.iter().chain(VERBS).chain(COLORS)
                .chain(BACKGROUND_ALLOWLIST).copied()
                .chain(["dog", "car", "person", "table"]).collect();
            let labels: Vec<&str> = picks.iter().map(|&i| pool[i % pool.len()]).collect();
            let mode = if background { FilterMode::Background } else { FilterMode::Foreground };
            let once = filter_labels(&labels, mode, &v);
            prop_assert_eq!(filter_labels(&once, mode, &v), once.clone());
            for l in &once {
                match mode {
                    FilterMode::Foreground => prop_assert!(!v.stoplisted().any(|s| s == l)),
                    FilterMode::Background => prop_assert!(v.background_allowlist.contains(l)),
                }
            }
        }
    }
}
