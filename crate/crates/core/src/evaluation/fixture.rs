//! Seeded synthetic multi-source POI corpora with ground-truth match labels.
//!
//! Real-world places ("entities") are laid out uniformly over a square whose
//! size gives the requested neighbourhood density. Each entity gets a name
//! and a street-grid address; POIs that share a building share its block,
//! street and postal code. A fraction of entities is re-emitted by one or two
//! further sources with perturbed names, addresses and coordinates. Every
//! cross-source pair within the radius is labelled, match iff both records
//! come from the same entity.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::matcher::{Label, LabeledPair};
use crate::model::{GeoPoint, StandardPoi};
use crate::normalization::parse_address;
use crate::similarity::{neighbors_within, SpatialGridIndex, DEFAULT_RADIUS_M, EARTH_RADIUS_M};

pub const SOURCE_NAMES: [&str; 5] = ["onemap", "sla", "google", "here", "osm"];

/// Per-copy probabilities of each kind of disagreement between sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Largest displacement of any record from its entity's location.
    pub jitter_m: f64,
    pub token_swap: f64,
    pub abbreviation: f64,
    pub branch_suffix: f64,
    pub typo: f64,
    /// The copy is listed under an unrelated name.
    pub alias: f64,
    /// Each optional address part (block, unit, postal code, country).
    pub drop_address_field: f64,
    pub missing_name: f64,
    pub missing_address: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            jitter_m: 30.0,
            token_swap: 0.3,
            abbreviation: 0.5,
            branch_suffix: 0.25,
            typo: 0.2,
            alias: 0.01,
            drop_address_field: 0.3,
            missing_name: 0.01,
            missing_address: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub seed: u64,
    pub n_pois: usize,
    pub n_sources: usize,
    /// Fraction of entities listed by more than one source.
    pub duplicate_rate: f64,
    /// Fraction of duplicated entities listed by a third source.
    pub triple_rate: f64,
    /// Fraction of entities belonging to a chain brand (same name at
    /// different places).
    pub chain_rate: f64,
    /// Expected number of other entities within `radius_m` of an entity.
    pub mean_neighbors: f64,
    pub radius_m: f64,
    pub origin: GeoPoint,
    pub extraction_date: NaiveDate,
    pub perturbation: Perturbation,
}

impl FixtureConfig {
    pub fn new(seed: u64, n_pois: usize, n_sources: usize, duplicate_rate: f64) -> Self {
        Self {
            seed,
            n_pois,
            n_sources,
            duplicate_rate,
            triple_rate: 0.15,
            chain_rate: 0.06,
            mean_neighbors: 15.7,
            radius_m: DEFAULT_RADIUS_M,
            origin: GeoPoint { lat: 1.30, lon: 103.80 },
            extraction_date: NaiveDate::from_ymd_opt(2021, 8, 1).expect("valid date"),
            perturbation: Perturbation::default(),
        }
    }

    /// The hand-labelled study region's size and match rate: 1,227 POIs
    /// from five sources with about 2.3% of candidate pairs matching.
    pub fn labelled_region(seed: u64) -> Self {
        Self::new(seed, 1227, 5, 0.14)
    }

    /// City-scale corpus: 12,106 POIs from five sources collapsing to
    /// roughly 8,700 distinct places.
    pub fn city_scale(seed: u64) -> Self {
        Self::new(seed, 12_106, 5, 0.34)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.duplicate_rate > 0.0 && self.duplicate_rate < 1.0) {
            return Err(format!("duplicate_rate {} outside (0, 1)", self.duplicate_rate));
        }
        if self.n_sources == 0 {
            return Err("n_sources must be at least 1".into());
        }
        if !(self.mean_neighbors > 0.0 && self.radius_m > 0.0) {
            return Err("mean_neighbors and radius_m must be positive".into());
        }
        for (name, p) in [("triple_rate", self.triple_rate), ("chain_rate", self.chain_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub pois: Vec<StandardPoi>,
    /// Every cross-source pair within the radius, canonical and sorted.
    pub pairs: Vec<LabeledPair>,
    /// Entity number of every POI id.
    pub entity_of: BTreeMap<String, usize>,
}

impl Fixture {
    pub fn match_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.label.is_match()).count()
    }

    pub fn match_rate(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.match_count() as f64 / self.pairs.len() as f64
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entity_of.values().collect::<std::collections::BTreeSet<_>>().len()
    }

    /// The corpus as each source would publish it: newline-delimited GeoJSON
    /// features in the layout read by the file-backed source, grouped by
    /// source. Standardising them with the default GeoJSON profile gives
    /// back `pois`.
    pub fn raw_features(&self) -> BTreeMap<String, Vec<Value>> {
        let mut out: BTreeMap<String, Vec<Value>> = BTreeMap::new();
        for p in &self.pois {
            let mut props = serde_json::Map::new();
            props.insert("native_id".into(), p.native_id().into());
            if let Some(n) = &p.name {
                props.insert("name".into(), n.clone().into());
            }
            if let Some(a) = &p.address {
                props.insert("address".into(), a.raw.clone().into());
            }
            props.insert("place_type".into(), p.place_types.iter().cloned().collect::<Vec<_>>().into());
            props.insert("tags".into(), p.tags.iter().cloned().collect::<Vec<_>>().into());
            props.insert("date".into(), p.extraction_date.to_string().into());
            out.entry(p.source.clone()).or_default().push(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [p.point.lon, p.point.lat] },
                "properties": props,
            }));
        }
        out
    }
}

const ADJECTIVES: &[&str] = &[
    "golden", "lucky", "happy", "royal", "jade", "silver", "grand", "little", "bright", "eastern", "western", "old",
    "new", "red", "green", "blue", "sunny", "prosperity", "harmony", "fortune", "emerald", "crystal", "orchid",
    "lotus", "phoenix", "dragon", "tiger", "peach", "pearl", "ocean", "rainbow", "maple", "cosy", "urban", "vintage",
    "humble", "noble", "swift", "gentle", "family",
];
const NOUNS: &[&str] = &[
    "garden", "palace", "house", "corner", "kitchen", "village", "star", "moon", "river", "hill", "bay", "bridge",
    "court", "field", "harbour", "island", "leaf", "bamboo", "lantern", "spoon", "wok", "basket", "cottage", "tree",
    "stone", "window", "bell", "crown", "fountain", "meadow", "orchard", "compass", "anchor", "sail", "feather",
    "mountain", "valley", "lighthouse", "canopy", "terrace",
];
const PEOPLE: &[&str] = &[
    "ah seng", "ah hock", "mdm lim", "uncle tan", "auntie ong", "kumar", "siti", "mr teo", "lao wang", "ah kow",
    "mr ravi", "mdm goh", "ahmad", "mei ling", "ah boon", "chong", "hassan", "devi", "mr chua", "ah lian",
];
const CATEGORIES: &[(&str, &str)] = &[
    ("restaurant", "restaurant"),
    ("cafe", "cafe"),
    ("coffee shop", "cafe"),
    ("bakery", "bakery"),
    ("clinic", "doctor"),
    ("dental surgery", "dentist"),
    ("hair salon", "hair_care"),
    ("pharmacy", "pharmacy"),
    ("minimart", "convenience_store"),
    ("hardware", "hardware_store"),
    ("tuition centre", "school"),
    ("bookstore", "book_store"),
    ("florist", "florist"),
    ("optical", "optician"),
    ("laundry", "laundry"),
    ("fitness studio", "gym"),
    ("bar", "bar"),
    ("noodle house", "restaurant"),
    ("seafood restaurant", "restaurant"),
    ("trading", "store"),
];
const BRANDS: &[(&str, &str)] = &[
    ("7-eleven", "convenience_store"),
    ("cheers", "convenience_store"),
    ("mcdonald's", "restaurant"),
    ("starbucks", "cafe"),
    ("kopitiam", "restaurant"),
    ("guardian", "pharmacy"),
    ("watsons", "pharmacy"),
    ("popular bookstore", "book_store"),
    ("ntuc fairprice", "supermarket"),
    ("toast box", "cafe"),
    ("ya kun kaya toast", "cafe"),
    ("old chang kee", "bakery"),
];
const TOWNS: &[&str] = &[
    "tampines", "simei", "bedok", "pasir ris", "serangoon", "hougang", "toa payoh", "bishan", "clementi", "jurong",
    "yishun", "woodlands", "ang mo kio", "geylang", "queenstown", "bukit batok",
];
const STREET_KINDS: &[&str] = &["street", "avenue", "road", "drive", "central"];
const ABBREVIATIONS: &[(&str, &str)] = &[
    ("street", "st"),
    ("avenue", "ave"),
    ("road", "rd"),
    ("drive", "dr"),
    ("central", "ctrl"),
    ("restaurant", "rest"),
    ("centre", "ctr"),
    ("coffee shop", "coffeeshop"),
    ("singapore", "sg"),
    ("surgery", "surg"),
    ("trading", "trdg"),
    ("mountain", "mt"),
    ("blk", "block"),
];

/// Building-grid cell size; POIs in one cell share a street address.
const BUILDING_M: f64 = 60.0;

struct Entity {
    x: f64,
    y: f64,
    name: String,
    place_type: String,
    block: String,
    street: String,
    unit: String,
    postal: String,
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty list")
}

fn fresh_name<R: Rng>(rng: &mut R) -> (String, String) {
    let (category, place_type) = *CATEGORIES.choose(rng).expect("categories");
    let name = match rng.gen_range(0..10) {
        0..=4 => format!("{} {} {category}", pick(rng, ADJECTIVES), pick(rng, NOUNS)),
        5..=7 => format!("{} {category}", pick(rng, PEOPLE)),
        _ => format!("{} {category}", pick(rng, NOUNS)),
    };
    (name, place_type.to_string())
}

fn building_address(x: f64, y: f64) -> (String, String, String) {
    let col = (x / BUILDING_M).floor() as i64;
    let row = (y / BUILDING_M).floor() as i64;
    let town = TOWNS[((col / 12 + 3 * (row / 12)).rem_euclid(TOWNS.len() as i64)) as usize];
    let band = row.div_euclid(2);
    let kind = STREET_KINDS[band.rem_euclid(STREET_KINDS.len() as i64) as usize];
    let street = format!("{town} {kind} {}", 1 + band.rem_euclid(90));
    let block = 100 + (col * 37 + row * 11).rem_euclid(880);
    let postal = format!("{:06}", 100_000 + (col * 7919 + row * 104_729).rem_euclid(800_000));
    (block.to_string(), street, postal)
}

fn abbreviate<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut out = text.to_string();
    for (long, short) in ABBREVIATIONS {
        if rng.gen_bool(0.7) {
            out = out.split(' ').collect::<Vec<_>>().join(" ");
            let padded = format!(" {out} ");
            out = padded.replace(&format!(" {long} "), &format!(" {short} ")).trim().to_string();
        }
    }
    out
}

fn typo<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut words: Vec<Vec<char>> = text.split(' ').map(|w| w.chars().collect()).collect();
    let long: Vec<usize> = (0..words.len()).filter(|&i| words[i].len() >= 4).collect();
    let Some(&w) = long.choose(rng) else {
        return text.to_string();
    };
    let word = &mut words[w];
    let i = rng.gen_range(1..word.len());
    let letter = (b'a' + rng.gen_range(0..26u8)) as char;
    match rng.gen_range(0..4) {
        0 => word[i] = letter,
        1 => {
            word.remove(i);
        }
        2 => word.insert(i, letter),
        _ => word.swap(i - 1, i),
    }
    words.into_iter().map(|w| w.into_iter().collect::<String>()).collect::<Vec<_>>().join(" ")
}

fn perturb_name<R: Rng>(rng: &mut R, e: &Entity, p: &Perturbation) -> String {
    if rng.gen_bool(p.alias) {
        return fresh_name(rng).0;
    }
    let mut name = e.name.clone();
    if rng.gen_bool(p.token_swap) {
        let mut tokens: Vec<&str> = name.split(' ').collect();
        tokens.rotate_left(1);
        name = tokens.join(" ");
    }
    if rng.gen_bool(p.abbreviation) {
        name = abbreviate(rng, &name);
    }
    if rng.gen_bool(p.branch_suffix) {
        let town = e.street.split(' ').next().unwrap_or("central");
        name = match rng.gen_range(0..4) {
            0 => format!("{name} ({town})"),
            1 => format!("{name} @ {}", e.street),
            2 => format!("{name} pte ltd"),
            _ => format!("{name} outlet"),
        };
    }
    if rng.gen_bool(p.typo) {
        name = typo(rng, &name);
    }
    name
}

fn address_text<R: Rng>(rng: &mut R, e: &Entity, p: Option<&Perturbation>) -> String {
    let keep = |rng: &mut R| p.is_none_or(|p| !rng.gen_bool(p.drop_address_field));
    let mut parts = Vec::new();
    if keep(rng) {
        parts.push(format!("blk {}", e.block));
    }
    parts.push(e.street.clone());
    if keep(rng) {
        parts.push(e.unit.clone());
    }
    if keep(rng) {
        parts.push("singapore".to_string());
    }
    if keep(rng) {
        parts.push(e.postal.clone());
    }
    let mut text = parts.join(" ");
    if let Some(p) = p {
        if rng.gen_bool(p.abbreviation) {
            text = abbreviate(rng, &text);
        }
        if rng.gen_bool(p.typo / 2.0) {
            text = typo(rng, &text);
        }
    }
    text
}

fn jitter<R: Rng>(rng: &mut R, x: f64, y: f64, max_m: f64) -> (f64, f64) {
    let r = max_m * rng.gen::<f64>().sqrt();
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    (x + r * t.cos(), y + r * t.sin())
}

fn to_point(origin: GeoPoint, x: f64, y: f64) -> GeoPoint {
    let lat = origin.lat + (y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    let round = |v: f64| (v * 1e7).round() / 1e7;
    GeoPoint { lat: round(lat), lon: round(lon) }
}

pub fn source_names(n: usize) -> Vec<String> {
    (0..n).map(|i| SOURCE_NAMES.get(i).map_or_else(|| format!("source{}", i + 1), |s| s.to_string())).collect()
}

/// Generates a corpus; deterministic for a given configuration.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<Fixture, String> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = &cfg.perturbation;
    let sources = source_names(cfg.n_sources);
    let mean_copies = 1.0 + cfg.duplicate_rate * (1.0 + cfg.triple_rate);
    let expected_entities = (cfg.n_pois as f64 / mean_copies).max(1.0);
    let side = (expected_entities * std::f64::consts::PI * cfg.radius_m.powi(2) / cfg.mean_neighbors).sqrt();

    let mut pois: Vec<StandardPoi> = Vec::with_capacity(cfg.n_pois);
    let mut entity_of = BTreeMap::new();
    let mut counters = vec![0usize; sources.len()];
    let mut entity_id = 0;
    while pois.len() < cfg.n_pois {
        let (x, y) = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        let (name, place_type) = if rng.gen_bool(cfg.chain_rate) {
            let (b, t) = *BRANDS.choose(&mut rng).expect("brands");
            (b.to_string(), t.to_string())
        } else {
            fresh_name(&mut rng)
        };
        let (block, street, postal) = building_address(x, y);
        let unit = format!("#{:02}-{:02}", rng.gen_range(1..6), rng.gen_range(1..60));
        let e = Entity { x, y, name, place_type, block, street, unit, postal };

        let mut copies = 1;
        if sources.len() > 1 && rng.gen_bool(cfg.duplicate_rate) {
            copies += 1;
            if sources.len() > 2 && rng.gen_bool(cfg.triple_rate) {
                copies += 1;
            }
        }
        copies = copies.min(cfg.n_pois - pois.len());
        let chosen: Vec<usize> = rand::seq::index::sample(&mut rng, sources.len(), copies).into_vec();
        for (k, &s) in chosen.iter().enumerate() {
            let perturb = (k > 0).then_some(p);
            let (px, py) = jitter(&mut rng, e.x, e.y, if k == 0 { p.jitter_m / 3.0 } else { p.jitter_m });
            counters[s] += 1;
            let native = format!("{:06}", counters[s]);
            let mut poi = StandardPoi::new(&sources[s], &native, to_point(cfg.origin, px, py), cfg.extraction_date);
            let name = match perturb {
                Some(p) => perturb_name(&mut rng, &e, p),
                None => e.name.clone(),
            };
            if !rng.gen_bool(p.missing_name) {
                poi = poi.with_name(&name);
            }
            let address = address_text(&mut rng, &e, perturb);
            // An absent address is represented as empty components, as the
            // standardiser produces for a record without one.
            let address = if rng.gen_bool(p.missing_address) { String::new() } else { address };
            poi = poi.with_address(parse_address(&address));
            if rng.gen_bool(0.9) {
                poi = poi.with_place_types([e.place_type.as_str()]);
            }
            if rng.gen_bool(0.3) {
                poi = poi.with_tags([format!("opening_hours={}", ["09:00-21:00", "24/7", "10:00-22:00"][rng.gen_range(0..3)])]);
            }
            entity_of.insert(poi.id.clone(), entity_id);
            pois.push(poi);
        }
        entity_id += 1;
    }
    pois.sort_by(|a, b| a.id.cmp(&b.id));

    let index = SpatialGridIndex::build(&pois, cfg.radius_m);
    let mut pairs = Vec::new();
    for (i, poi) in pois.iter().enumerate() {
        for (j, _) in neighbors_within(&index, &pois, i, cfg.radius_m, true) {
            if pois[j].id > poi.id {
                let same = entity_of[&poi.id] == entity_of[&pois[j].id];
                pairs.push(LabeledPair::new(&poi.id, &pois[j].id, Label::from_bool(same)));
            }
        }
    }
    pairs.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(Fixture { pois, pairs, entity_of })
}
