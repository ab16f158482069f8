//! Three-axis tactic classification: abstraction level, functional
//! category and axiom tier.
//!
//! A [`TacticDb`] holds one [`TacticRecord`] per tactic name. New names are
//! classified by [`classify_tactic`], which tries, in order, an exact entry
//! in the database, variant inheritance (`simp!` from `simp`), the longest
//! matching prefix family, and finally gives up with
//! [`TaxonomyError::NoRuleMatched`]. The variant suffix alphabet, the prefix
//! family table and the mathlib directory to category map are JSON data
//! files (see `data/`), so the vocabulary can grow without code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::to_canonical_string;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("abstraction level {0} is outside 0..=4")]
    InvalidLevel(i64),
    #[error("category name must be non-empty")]
    EmptyCategory,
    #[error("fallback category must be named \"Uncategorized\", got {0:?}")]
    BadFallbackCategory(String),
    #[error("tactic name must be non-empty")]
    EmptyName,
    #[error("no classification rule matched tactic `{name}`; probe it or add a static entry")]
    NoRuleMatched { name: String },
    #[error("axiom set contains sorryAx: the proof is incomplete")]
    SorryDetected,
    #[error("tactic database is empty")]
    EmptyDb,
    #[error("duplicate tactic `{0}`")]
    DuplicateTactic(String),
    #[error("record key `{key}` does not match record name `{name}`")]
    KeyMismatch { key: String, name: String },
    #[error("variant `{name}` has invalid base: {reason}")]
    InvalidVariant { name: String, reason: String },
    #[error("unknown axiom tier {0:?}")]
    UnknownTier(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TaxonomyError> = std::result::Result<T, E>;

/// Longest allowed `base_of_variant` chain.
pub const MAX_VARIANT_HOPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct AbstractionLevel(u8);

impl AbstractionLevel {
    pub const ATOMIC: Self = Self(0);
    pub const ORGANIZATION: Self = Self(1);
    pub const NORMALIZATION: Self = Self(2);
    pub const DECISION: Self = Self(3);
    pub const DOMAIN: Self = Self(4);

    pub fn new(value: u8) -> Result<Self> {
        Self::try_from(i64::from(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for AbstractionLevel {
    type Error = TaxonomyError;

    fn try_from(v: i64) -> Result<Self> {
        if (0..=4).contains(&v) {
            Ok(Self(v as u8))
        } else {
            Err(TaxonomyError::InvalidLevel(v))
        }
    }
}

impl From<AbstractionLevel> for u8 {
    fn from(l: AbstractionLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for AbstractionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategorySource {
    CoreReferenceHeading,
    MathlibModulePath,
    Fallback,
}

pub const UNCATEGORIZED: &str = "Uncategorized";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCategory")]
pub struct FunctionalCategory {
    name: String,
    source: CategorySource,
}

#[derive(Deserialize)]
struct RawCategory {
    name: String,
    source: CategorySource,
}

impl TryFrom<RawCategory> for FunctionalCategory {
    type Error = TaxonomyError;

    fn try_from(raw: RawCategory) -> Result<Self> {
        Self::new(raw.name, raw.source)
    }
}

impl FunctionalCategory {
    pub fn new(name: impl Into<String>, source: CategorySource) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(TaxonomyError::EmptyCategory);
        }
        if source == CategorySource::Fallback && name != UNCATEGORIZED {
            return Err(TaxonomyError::BadFallbackCategory(name));
        }
        Ok(Self { name, source })
    }

    pub fn uncategorized() -> Self {
        Self { name: UNCATEGORIZED.to_owned(), source: CategorySource::Fallback }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> CategorySource {
        self.source
    }
}

/// Axiom tier, ordered from weakest to strongest logical commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxiomTier {
    StronglyConstructive,
    WeaklyConstructive,
    Classical,
}

impl AxiomTier {
    pub const ALL: [AxiomTier; 3] = [Self::StronglyConstructive, Self::WeaklyConstructive, Self::Classical];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StronglyConstructive => "strongly_constructive",
            Self::WeaklyConstructive => "weakly_constructive",
            Self::Classical => "classical",
        }
    }
}

impl fmt::Display for AxiomTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxiomTier {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "strongly_constructive" | "strong" => Ok(Self::StronglyConstructive),
            "weakly_constructive" | "weak" => Ok(Self::WeaklyConstructive),
            "classical" => Ok(Self::Classical),
            _ => Err(TaxonomyError::UnknownTier(s.to_owned())),
        }
    }
}

pub const PROPEXT: &str = "propext";
pub const QUOT_SOUND: &str = "Quot.sound";
pub const FUNEXT: &str = "funext";
pub const CLASSICAL_CHOICE: &str = "Classical.choice";
pub const SORRY_AX: &str = "sorryAx";

pub const KNOWN_AXIOMS: [&str; 4] = [PROPEXT, QUOT_SOUND, FUNEXT, CLASSICAL_CHOICE];
const WEAK_AXIOMS: [&str; 3] = [PROPEXT, QUOT_SOUND, FUNEXT];

/// Set of axiom names reported by `#print axioms`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AxiomSet(BTreeSet<String>);

impl AxiomSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, axiom: impl Into<String>) -> bool {
        self.0.insert(axiom.into())
    }

    pub fn contains(&self, axiom: &str) -> bool {
        self.0.contains(axiom)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &AxiomSet) -> AxiomSet {
        AxiomSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &AxiomSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl<S: Into<String>> FromIterator<S> for AxiomSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        AxiomSet(iter.into_iter().map(Into::into).collect())
    }
}

/// Maps an axiom set onto the tier lattice.
///
/// Axioms outside [`KNOWN_AXIOMS`] escalate to `Classical` with a warning.
pub fn tier_of_axioms(axioms: &AxiomSet) -> Result<AxiomTier> {
    if axioms.contains(SORRY_AX) {
        return Err(TaxonomyError::SorryDetected);
    }
    let mut tier = AxiomTier::StronglyConstructive;
    for axiom in axioms.iter() {
        let t = if WEAK_AXIOMS.contains(&axiom) {
            AxiomTier::WeaklyConstructive
        } else {
            if axiom != CLASSICAL_CHOICE {
                log::warn!("unknown axiom `{axiom}` escalated to the classical tier");
            }
            AxiomTier::Classical
        };
        tier = tier.max(t);
    }
    Ok(tier)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Static,
    VariantInherited,
    PrefixRule,
    Probed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticRecord {
    pub name: String,
    pub defining_module: String,
    pub level: AbstractionLevel,
    pub category: FunctionalCategory,
    pub tier: AxiomTier,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_of_variant: Option<String>,
}

/// Tactic records keyed by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacticDb {
    registry_version: String,
    records: BTreeMap<String, TacticRecord>,
}

#[derive(Serialize, Deserialize)]
struct DbFile {
    registry_version: String,
    records: Vec<TacticRecord>,
}

impl TacticDb {
    pub fn new(registry_version: impl Into<String>) -> Self {
        Self { registry_version: registry_version.into(), records: BTreeMap::new() }
    }

    /// Builds a database, checking name uniqueness and variant links.
    pub fn from_records(registry_version: impl Into<String>, records: impl IntoIterator<Item = TacticRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            if r.name.is_empty() {
                return Err(TaxonomyError::EmptyName);
            }
            if map.contains_key(&r.name) {
                return Err(TaxonomyError::DuplicateTactic(r.name));
            }
            map.insert(r.name.clone(), r);
        }
        let db = Self { registry_version: registry_version.into(), records: map };
        db.validate()?;
        Ok(db)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DbFile = serde_json::from_str(text)?;
        Self::from_records(file.registry_version, file.records)
    }

    /// Canonical JSON with records sorted by name.
    pub fn to_json(&self) -> Result<String> {
        let file = DbFile { registry_version: self.registry_version.clone(), records: self.records.values().cloned().collect() };
        Ok(to_canonical_string(&file)?)
    }

    /// The bundled static base.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/static_base.json")).expect("bundled static base is valid")
    }

    fn validate(&self) -> Result<()> {
        for (key, r) in &self.records {
            if key != &r.name {
                return Err(TaxonomyError::KeyMismatch { key: key.clone(), name: r.name.clone() });
            }
            let invalid = |reason: &str| TaxonomyError::InvalidVariant { name: r.name.clone(), reason: reason.to_owned() };
            match (&r.provenance, &r.base_of_variant) {
                (Provenance::VariantInherited, None) => return Err(invalid("variant-inherited record has no base")),
                (Provenance::VariantInherited, Some(base)) if base == &r.name => return Err(invalid("record is its own base")),
                (Provenance::VariantInherited, Some(base)) if !self.records.contains_key(base) => {
                    return Err(invalid(&format!("base `{base}` is not in the database")))
                }
                (p, Some(_)) if *p != Provenance::VariantInherited => {
                    return Err(invalid("only variant-inherited records may name a base"))
                }
                _ => {}
            }
            if self.variant_hops(&r.name).is_none() {
                return Err(invalid(&format!("base chain is cyclic or longer than {MAX_VARIANT_HOPS} hops")));
            }
        }
        Ok(())
    }

    /// Number of `base_of_variant` links from `name` to a non-variant record,
    /// or `None` if the chain is broken, cyclic or too long.
    pub fn variant_hops(&self, name: &str) -> Option<usize> {
        let mut current = self.records.get(name)?;
        for hops in 0..=MAX_VARIANT_HOPS {
            match (&current.provenance, &current.base_of_variant) {
                (Provenance::VariantInherited, Some(base)) => current = self.records.get(base)?,
                _ => return Some(hops),
            }
        }
        None
    }

    /// Adds or replaces a record, re-validating variant links.
    pub fn upsert(&mut self, record: TacticRecord) -> Result<()> {
        if record.name.is_empty() {
            return Err(TaxonomyError::EmptyName);
        }
        let previous = self.records.insert(record.name.clone(), record.clone());
        if let Err(e) = self.validate() {
            match previous {
                Some(p) => self.records.insert(p.name.clone(), p),
                None => self.records.remove(&record.name),
            };
            return Err(e);
        }
        Ok(())
    }

    pub fn registry_version(&self) -> &str {
        &self.registry_version
    }

    pub fn get(&self, name: &str) -> Option<&TacticRecord> {
        self.records.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.records.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in name order.
    pub fn records(&self) -> impl Iterator<Item = &TacticRecord> {
        self.records.values()
    }
}

/// Registry metadata for a tactic, as exported from a Lean toolchain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub defining_module: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_heading: Option<String>,
}

impl RegistryEntry {
    pub fn new(defining_module: impl Into<String>) -> Self {
        Self { defining_module: defining_module.into(), reference_heading: None }
    }

    pub fn with_heading(mut self, heading: impl Into<String>) -> Self {
        self.reference_heading = Some(heading.into());
        self
    }
}

/// A tactic-name prefix that fixes level and tier for every member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixFamily {
    pub prefix: String,
    pub level: AbstractionLevel,
    pub tier: AxiomTier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRules {
    pub variant_suffixes: Vec<String>,
    pub families: Vec<PrefixFamily>,
    /// `Mathlib.Tactic.<Dir>` directory name → category name.
    pub mathlib_categories: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct SuffixFile {
    suffixes: Vec<String>,
}

#[derive(Deserialize)]
struct FamilyFile {
    families: Vec<PrefixFamily>,
}

#[derive(Deserialize)]
struct CategoryFile {
    categories: BTreeMap<String, String>,
}

impl ClassificationRules {
    pub fn from_json(suffixes: &str, families: &str, categories: &str) -> Result<Self> {
        let suffixes: SuffixFile = serde_json::from_str(suffixes)?;
        let families: FamilyFile = serde_json::from_str(families)?;
        let categories: CategoryFile = serde_json::from_str(categories)?;
        Ok(Self {
            variant_suffixes: suffixes.suffixes.into_iter().filter(|s| !s.is_empty()).collect(),
            families: families.families,
            mathlib_categories: categories.categories,
        })
    }

    pub fn bundled() -> Self {
        Self::from_json(
            include_str!("../data/variant_suffixes.json"),
            include_str!("../data/prefix_families.json"),
            include_str!("../data/mathlib_categories.json"),
        )
        .expect("bundled classification rules are valid")
    }

    /// Longest registered prefix of `name`; ties go to the first listed family.
    pub fn family_for(&self, name: &str) -> Option<&PrefixFamily> {
        let mut best: Option<&PrefixFamily> = None;
        for f in &self.families {
            if name.starts_with(&f.prefix) && best.is_none_or(|b| f.prefix.len() > b.prefix.len()) {
                best = Some(f);
            }
        }
        best
    }

    /// Category from registry metadata alone.
    pub fn category_from_registry(&self, entry: &RegistryEntry) -> FunctionalCategory {
        let module = entry.defining_module.as_str();
        let is_core = ["Init", "Std", "Lean"].iter().any(|root| module == *root || module.starts_with(&format!("{root}.")));
        if is_core {
            if let Some(h) = entry.reference_heading.as_deref().map(str::trim).filter(|h| !h.is_empty()) {
                return FunctionalCategory { name: h.to_owned(), source: CategorySource::CoreReferenceHeading };
            }
        }
        if let Some(dir) = module.strip_prefix("Mathlib.Tactic.").and_then(|rest| rest.split('.').next()).filter(|d| !d.is_empty()) {
            let name = self.mathlib_categories.get(dir).cloned().unwrap_or_else(|| humanize(dir));
            return FunctionalCategory { name, source: CategorySource::MathlibModulePath };
        }
        FunctionalCategory::uncategorized()
    }

    // Nearest existing base reachable by stripping suffixes, breadth first.
    fn variant_base<'a>(&self, name: &str, db: &'a TacticDb) -> Option<&'a TacticRecord> {
        let mut frontier = vec![name.to_owned()];
        for _ in 0..MAX_VARIANT_HOPS {
            let mut next = Vec::new();
            for cand in &frontier {
                for suffix in &self.variant_suffixes {
                    let Some(stripped) = cand.strip_suffix(suffix.as_str()) else { continue };
                    if stripped.is_empty() {
                        continue;
                    }
                    if let Some(base) = db.get(stripped) {
                        if db.variant_hops(stripped).is_some_and(|h| h < MAX_VARIANT_HOPS) {
                            return Some(base);
                        }
                    }
                    next.push(stripped.to_owned());
                }
            }
            frontier = next;
        }
        None
    }
}

// "NormNum" -> "Norm Num", "FieldSimp" -> "Field Simp"
fn humanize(dir: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for c in dir.chars() {
        if c == '_' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        out.push(c);
    }
    out
}

/// Assigns a record to `name` by the first matching rule.
pub fn classify_tactic(name: &str, entry: &RegistryEntry, db: &TacticDb, rules: &ClassificationRules) -> Result<TacticRecord> {
    if name.is_empty() {
        return Err(TaxonomyError::EmptyName);
    }
    if let Some(existing) = db.get(name) {
        return Ok(existing.clone());
    }
    if let Some(base) = rules.variant_base(name, db) {
        return Ok(TacticRecord {
            name: name.to_owned(),
            defining_module: entry.defining_module.clone(),
            level: base.level,
            category: base.category.clone(),
            tier: base.tier,
            provenance: Provenance::VariantInherited,
            base_of_variant: Some(base.name.clone()),
        });
    }
    if let Some(family) = rules.family_for(name) {
        return Ok(TacticRecord {
            name: name.to_owned(),
            defining_module: entry.defining_module.clone(),
            level: family.level,
            category: rules.category_from_registry(entry),
            tier: family.tier,
            provenance: Provenance::PrefixRule,
            base_of_variant: None,
        });
    }
    Err(TaxonomyError::NoRuleMatched { name: name.to_owned() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierDistribution {
    pub strongly_fraction: f64,
    pub weakly_fraction: f64,
    pub classical_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TierCounts {
    pub strongly: usize,
    pub weakly: usize,
    pub classical: usize,
}

pub fn tier_counts(db: &TacticDb) -> TierCounts {
    let mut c = TierCounts::default();
    for r in db.records() {
        match r.tier {
            AxiomTier::StronglyConstructive => c.strongly += 1,
            AxiomTier::WeaklyConstructive => c.weakly += 1,
            AxiomTier::Classical => c.classical += 1,
        }
    }
    c
}

pub fn taxonomy_stats(db: &TacticDb) -> Result<TierDistribution> {
    if db.is_empty() {
        return Err(TaxonomyError::EmptyDb);
    }
    let c = tier_counts(db);
    let total = db.len() as f64;
    Ok(TierDistribution {
        strongly_fraction: c.strongly as f64 / total,
        weakly_fraction: c.weakly as f64 / total,
        classical_fraction: c.classical as f64 / total,
    })
}
