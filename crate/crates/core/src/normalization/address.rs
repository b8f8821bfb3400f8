//! Rule-based address segmentation and canonical rendering.
//!
//! Tokens are split on whitespace and commas. Extraction order: `#`-prefixed
//! unit tokens, a trailing six-digit postal code, a trailing country, a
//! trailing state, then a leading block number (`blk 201`, `block 201` or a
//! bare `201`). Whatever is left is the street name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{normalize_text, AddressComponents};

/// State and country names recognised at the end of an address. Entries may
/// span several words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressVocabulary {
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub countries: Vec<String>,
}

impl Default for AddressVocabulary {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            states: s(&[
                "johor", "kedah", "kelantan", "melaka", "negeri sembilan", "pahang", "penang", "perak", "perlis",
                "sabah", "sarawak", "selangor", "terengganu", "kuala lumpur", "central region", "east region",
                "north region", "north-east region", "west region",
            ]),
            countries: s(&["singapore", "malaysia", "indonesia", "brunei", "thailand", "philippines", "vietnam"]),
        }
    }
}

impl AddressVocabulary {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        let mut v: AddressVocabulary = toml::from_str(text)?;
        v.states = v.states.iter().map(|s| normalize_text(s)).filter(|s| !s.is_empty()).collect();
        v.countries = v.countries.iter().map(|s| normalize_text(s)).filter(|s| !s.is_empty()).collect();
        Ok(v)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

fn is_postal(token: &str) -> bool {
    token.len() == 6 && token.bytes().all(|b| b.is_ascii_digit())
}

fn is_block_number(token: &str) -> bool {
    let digits = token.bytes().take_while(u8::is_ascii_digit).count();
    digits > 0 && token.bytes().skip(digits).all(|b| b.is_ascii_alphabetic())
}

/// Removes the longest vocabulary entry matching the tail of `tokens`.
fn take_suffix(tokens: &mut Vec<String>, vocab: &[String]) -> Option<String> {
    let mut best: Option<(usize, &String)> = None;
    for entry in vocab {
        let words: Vec<&str> = entry.split(' ').collect();
        let k = words.len();
        if k == 0 || k > tokens.len() {
            continue;
        }
        let tail = &tokens[tokens.len() - k..];
        if tail.iter().map(String::as_str).eq(words.iter().copied()) && best.is_none_or(|(bk, _)| k > bk) {
            best = Some((k, entry));
        }
    }
    let (k, entry) = best?;
    tokens.truncate(tokens.len() - k);
    Some(entry.clone())
}

fn take_postal(tokens: &mut Vec<String>) -> Option<String> {
    if tokens.last().is_some_and(|t| is_postal(t)) {
        tokens.pop()
    } else {
        None
    }
}

pub fn parse_address_with(raw: &str, vocab: &AddressVocabulary) -> AddressComponents {
    let normalized = normalize_text(raw);
    let mut tokens: Vec<String> =
        normalized.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(str::to_string).collect();

    let units: Vec<String> = tokens.iter().filter(|t| t.starts_with('#')).cloned().collect();
    tokens.retain(|t| !t.starts_with('#'));
    let unit = (!units.is_empty()).then(|| units.join(" "));

    let mut postal_code = take_postal(&mut tokens);
    let country = take_suffix(&mut tokens, &vocab.countries);
    if postal_code.is_none() {
        postal_code = take_postal(&mut tokens);
    }
    let state = take_suffix(&mut tokens, &vocab.states);
    if postal_code.is_none() {
        postal_code = take_postal(&mut tokens);
    }

    let block_number = match tokens.first().map(String::as_str) {
        Some("blk" | "blk." | "block") if tokens.get(1).is_some_and(|t| is_block_number(t)) => {
            let b = tokens.remove(1);
            tokens.remove(0);
            Some(b)
        }
        Some(t) if is_block_number(t) => Some(tokens.remove(0)),
        _ => None,
    };
    let street_name = (!tokens.is_empty()).then(|| tokens.join(" "));

    AddressComponents { block_number, street_name, unit, postal_code, state, country, raw: raw.to_string() }
}

/// Parses with the built-in state/country vocabulary.
pub fn parse_address(raw: &str) -> AddressComponents {
    parse_address_with(raw, &AddressVocabulary::default())
}

/// Block, unit, street, state, country, then postal code, space separated.
pub fn canonical_address_string(c: &AddressComponents) -> String {
    [&c.block_number, &c.unit, &c.street_name, &c.state, &c.country, &c.postal_code]
        .into_iter()
        .filter_map(|x| x.as_deref())
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &str) -> Option<String> {
        Some(s.to_string())
    }

    #[test]
    fn block_street_country_postal() {
        let a = parse_address("Blk 201 Tampines Street 21 Singapore 520201");
        assert_eq!(a.block_number, c("201"));
        assert_eq!(a.street_name, c("tampines street 21"));
        assert_eq!(a.country, c("singapore"));
        assert_eq!(a.postal_code, c("520201"));
        assert_eq!(a.state, None);
        assert_eq!(a.raw, "Blk 201 Tampines Street 21 Singapore 520201");
    }

    #[test]
    fn empty_input() {
        let a = parse_address("");
        assert_eq!(a, AddressComponents::default());
        assert!(a.is_empty());
    }

    #[test]
    fn bare_number_is_block() {
        let a = parse_address("10 Simei Street 1");
        assert_eq!(a.block_number, c("10"));
        assert_eq!(a.street_name, c("simei street 1"));
        assert_eq!(a.postal_code, None);
    }

    #[test]
    fn unit_state_and_commas() {
        let a = parse_address("12A, Jalan Besar #03-04, Johor, Malaysia");
        assert_eq!(a.block_number, c("12a"));
        assert_eq!(a.unit, c("#03-04"));
        assert_eq!(a.street_name, c("jalan besar"));
        assert_eq!(a.state, c("johor"));
        assert_eq!(a.country, c("malaysia"));
    }

    #[test]
    fn unparseable_text_goes_to_street() {
        let a = parse_address("Somewhere Near The Park");
        assert_eq!(a.street_name, c("somewhere near the park"));
        assert_eq!(a.block_number, None);
        let b = parse_address("blk abc road");
        assert_eq!(b.street_name, c("blk abc road"));
    }

    #[test]
    fn multi_word_state() {
        let a = parse_address("5 Jalan Ampang Kuala Lumpur Malaysia 50450");
        // five digits is not a postal code here
        assert_eq!(a.postal_code, None);
        assert_eq!(a.street_name, c("jalan ampang kuala lumpur malaysia 50450"));
        let b = parse_address("5 Jalan Ampang Kuala Lumpur Malaysia");
        assert_eq!(b.state, c("kuala lumpur"));
        assert_eq!(b.street_name, c("jalan ampang"));
    }

    #[test]
    fn render_order() {
        let a = AddressComponents {
            block_number: c("201"),
            street_name: c("tampines street 21"),
            country: c("singapore"),
            ..Default::default()
        };
        assert_eq!(canonical_address_string(&a), "201 tampines street 21 singapore");
        assert_eq!(canonical_address_string(&AddressComponents::default()), "");
    }

    #[test]
    fn render_ignores_construction_order() {
        let a = AddressComponents {
            postal_code: c("520201"),
            country: c("singapore"),
            street_name: c("tampines ave 5"),
            block_number: c("9"),
            ..Default::default()
        };
        let b = AddressComponents {
            block_number: c("9"),
            street_name: c("tampines ave 5"),
            country: c("singapore"),
            postal_code: c("520201"),
            ..Default::default()
        };
        assert_eq!(canonical_address_string(&a), canonical_address_string(&b));
        assert_eq!(canonical_address_string(&a), "9 tampines ave 5 singapore 520201");
    }

    #[test]
    fn custom_vocabulary() {
        let v = AddressVocabulary::from_toml("states = [\"East Coast\"]\ncountries = [\"Atlantis\"]").unwrap();
        let a = parse_address_with("3 Shell Road East Coast Atlantis", &v);
        assert_eq!(a.state, c("east coast"));
        assert_eq!(a.country, c("atlantis"));
    }

    fn token() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("blk".to_string()),
            Just("block".to_string()),
            Just("singapore".to_string()),
            Just("johor".to_string()),
            Just("kuala".to_string()),
            Just("lumpur".to_string()),
            Just("#01-23".to_string()),
            Just(",".to_string()),
            "[0-9]{1,3}[a-c]?",
            "[0-9]{6}",
            "[A-Za-z]{1,8}",
        ]
    }

    proptest! {
        #[test]
        fn parse_render_parse_is_stable(tokens in proptest::collection::vec(token(), 0..9)) {
            let raw = tokens.join(" ");
            let first = parse_address(&raw);
            let again = parse_address(&canonical_address_string(&first));
            prop_assert!(first.same_components(&again), "{raw:?}: {first:?} vs {again:?}");
        }

        #[test]
        fn components_are_trimmed_lowercase(raw in "[ A-Za-z0-9#,-]{0,40}") {
            let a = parse_address(&raw);
            for (_, comp) in a.components() {
                if let Some(s) = comp {
                    prop_assert!(!s.is_empty());
                    prop_assert_eq!(s.trim(), s.as_str());
                    prop_assert_eq!(s.to_lowercase(), s.clone());
                }
            }
        }
    }
}
