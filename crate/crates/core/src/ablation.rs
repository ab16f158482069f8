//! Tactic ablation sets, lemma whitelists and the enforcer config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, LexError};
use crate::taxonomy::{AbstractionLevel, AxiomTier, TacticDb};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("tactic database is empty")]
    EmptyDb,
    #[error("selector constrains nothing")]
    EmptySelector,
    #[error("selection is empty")]
    EmptySelection,
    #[error("position {position} is past the end of a corpus of {len} proofs")]
    IndexOutOfRange { position: usize, len: usize },
    #[error("unknown tactics: {}", .0.join(", "))]
    UnknownTactic(Vec<String>),
    #[error("duplicate theorem id {0:?}")]
    DuplicateTheorem(String),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("{theorem_id}: {source}")]
    Lex { theorem_id: String, source: LexError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Filter over the tactic database. Absent axes do not constrain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSelector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<BTreeSet<AbstractionLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<BTreeSet<AxiomTier>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named_tactics: Option<BTreeSet<String>>,
}

impl SliceSelector {
    pub fn tiers(tiers: impl IntoIterator<Item = AxiomTier>) -> Self {
        Self { tiers: Some(tiers.into_iter().collect()), ..Self::default() }
    }

    pub fn levels(levels: impl IntoIterator<Item = AbstractionLevel>) -> Self {
        Self { levels: Some(levels.into_iter().collect()), ..Self::default() }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.levels.is_none() && self.categories.is_none() && self.tiers.is_none() && self.named_tactics.is_none()
    }

    fn has_axis_filter(&self) -> bool {
        self.levels.is_some() || self.categories.is_some() || self.tiers.is_some()
    }
}

/// Names matching every present axis of `selector`, plus `named_tactics`,
/// closed over variants of selected bases.
///
/// A selector with only `named_tactics` selects just those names (and their
/// variants); axis filters are not implied.
pub fn build_ablation_set(db: &TacticDb, selector: &SliceSelector) -> Result<BTreeSet<String>, AblationError> {
    if db.is_empty() {
        return Err(AblationError::EmptyDb);
    }
    if selector.is_unconstrained() {
        return Err(AblationError::EmptySelector);
    }
    let mut selected: BTreeSet<String> = BTreeSet::new();
    if selector.has_axis_filter() {
        for r in db.records() {
            let level_ok = selector.levels.as_ref().is_none_or(|s| s.contains(&r.level));
            let cat_ok = selector.categories.as_ref().is_none_or(|s| s.contains(r.category.name()));
            let tier_ok = selector.tiers.as_ref().is_none_or(|s| s.contains(&r.tier));
            if level_ok && cat_ok && tier_ok {
                selected.insert(r.name.clone());
            }
        }
    }
    if let Some(named) = &selector.named_tactics {
        selected.extend(named.iter().cloned());
    }
    close_over_variants(db, &mut selected);
    if selected.is_empty() {
        return Err(AblationError::EmptySelection);
    }
    Ok(selected)
}

fn close_over_variants(db: &TacticDb, selected: &mut BTreeSet<String>) {
    loop {
        let added: Vec<String> = db
            .records()
            .filter(|r| !selected.contains(&r.name))
            .filter(|r| r.base_of_variant.as_ref().is_some_and(|b| selected.contains(b)))
            .map(|r| r.name.clone())
            .collect();
        if added.is_empty() {
            return;
        }
        selected.extend(added);
    }
}

/// Reserved words of Lean 4 commands and term syntax. Tactic names are not
/// listed: they are ordinary identifiers to the whitelist.
pub const KEYWORDS: &[&str] = &[
    "Prop", "Sort", "Type", "abbrev", "at", "attribute", "axiom", "by", "calc", "class", "def", "deriving",
    "do", "else", "end", "example", "export", "for", "from", "fun", "have", "if", "import", "in",
    "inductive", "instance", "lemma", "let", "local", "macro", "match", "mutual", "namespace", "nomatch",
    "noncomputable", "opaque", "open", "partial", "private", "protected", "return", "section", "set_option", "show",
    "structure", "suffices", "syntax", "then", "theorem", "universe", "unsafe", "variable", "where", "with",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

/// All identifier tokens outside comments and string literals, minus
/// keywords.
pub fn extract_identifiers(lean_text: &str) -> Result<BTreeSet<String>, LexError> {
    let code = lexer::strip_comments(lean_text)?;
    Ok(lexer::identifiers(&code)?.into_iter().filter(|w| !is_keyword(w)).map(str::to_owned).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectProof {
    pub theorem_id: String,
    pub lean_text: String,
}

/// Proofs of a project in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProjectCorpus {
    proofs: Vec<ProjectProof>,
}

impl ProjectCorpus {
    pub fn new(proofs: Vec<ProjectProof>) -> Result<Self, AblationError> {
        let mut seen = BTreeSet::new();
        for p in &proofs {
            if !seen.insert(p.theorem_id.as_str()) {
                return Err(AblationError::DuplicateTheorem(p.theorem_id.clone()));
            }
        }
        Ok(Self { proofs })
    }

    /// One `{"theorem_id", "lean_text"}` object per non-blank line.
    pub fn from_jsonl(text: &str) -> Result<Self, AblationError> {
        let mut proofs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let p: ProjectProof =
                serde_json::from_str(line).map_err(|e| AblationError::MalformedRecord { line: i + 1, reason: e.to_string() })?;
            proofs.push(p);
        }
        Self::new(proofs)
    }

    pub fn load(path: &Path) -> Result<Self, AblationError> {
        Self::from_jsonl(&read(path)?)
    }

    pub fn proofs(&self) -> &[ProjectProof] {
        &self.proofs
    }

    pub fn len(&self) -> usize {
        self.proofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proofs.is_empty()
    }

    pub fn position_of(&self, theorem_id: &str) -> Option<usize> {
        self.proofs.iter().position(|p| p.theorem_id == theorem_id)
    }
}

fn read(path: &Path) -> Result<String, AblationError> {
    std::fs::read_to_string(path).map_err(|source| AblationError::Io { path: path.to_owned(), source })
}

/// Identifiers used by proofs before `position`, restricted to
/// `known_lemmas` when given.
pub fn build_whitelist(
    corpus: &ProjectCorpus,
    position: usize,
    known_lemmas: Option<&BTreeSet<String>>,
) -> Result<Vec<String>, AblationError> {
    if position > corpus.len() {
        return Err(AblationError::IndexOutOfRange { position, len: corpus.len() });
    }
    let mut used = BTreeSet::new();
    for p in &corpus.proofs[..position] {
        let ids = extract_identifiers(&p.lean_text).map_err(|source| AblationError::Lex { theorem_id: p.theorem_id.clone(), source })?;
        used.extend(ids);
    }
    Ok(match known_lemmas {
        Some(known) => used.intersection(known).cloned().collect(),
        None => used.into_iter().collect(),
    })
}

/// Newline-delimited identifiers; blank lines and surrounding whitespace
/// are ignored.
pub fn parse_known_lemmas(text: &str) -> BTreeSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect()
}

pub fn load_known_lemmas(path: &Path) -> Result<BTreeSet<String>, AblationError> {
    Ok(parse_known_lemmas(&read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub label: String,
    pub taxonomy_version: String,
    pub forbidden_tactics: Vec<String>,
    pub lemma_whitelist: Option<Vec<String>>,
}

impl AblationConfig {
    pub fn is_forbidden(&self, tactic: &str) -> bool {
        self.forbidden_tactics.binary_search_by(|t| t.as_str().cmp(tactic)).is_ok()
    }

    pub fn file_name(&self) -> String {
        config_file_name(&self.label)
    }

    pub fn to_canonical_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("config has no non-string keys")
    }

    pub fn from_json(text: &str) -> Result<Self, AblationError> {
        let mut c: Self = serde_json::from_str(text)?;
        c.forbidden_tactics.sort();
        c.forbidden_tactics.dedup();
        if let Some(w) = &mut c.lemma_whitelist {
            w.sort();
            w.dedup();
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, AblationError> {
        Self::from_json(&read(path)?)
    }
}

pub fn config_file_name(label: &str) -> String {
    format!("{label}.ablation.json")
}

/// Builds the config and its canonical text. Every forbidden name must be
/// in `db`.
pub fn emit_config<I, S>(
    forbidden: I,
    whitelist: Option<&[String]>,
    label: &str,
    db: &TacticDb,
) -> Result<(AblationConfig, String), AblationError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let forbidden: BTreeSet<String> = forbidden.into_iter().map(|s| s.as_ref().to_owned()).collect();
    let unknown: Vec<String> = forbidden.iter().filter(|n| !db.contains(n)).cloned().collect();
    if !unknown.is_empty() {
        return Err(AblationError::UnknownTactic(unknown));
    }
    let config = AblationConfig {
        label: label.to_owned(),
        taxonomy_version: db.registry_version().to_owned(),
        forbidden_tactics: forbidden.into_iter().collect(),
        lemma_whitelist: whitelist.map(|w| w.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()),
    };
    let text = config.to_canonical_json();
    Ok((config, text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn keyword_table_is_sorted() {
        assert!(KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identifiers_examples() {
        assert_eq!(extract_identifiers("exact Nat.add_comm a b").unwrap(), set(&["exact", "Nat.add_comm", "a", "b"]));
        assert_eq!(extract_identifiers("-- uses Nat.add_comm\nrfl").unwrap(), set(&["rfl"]));
        assert_eq!(extract_identifiers("exact foo \"Nat.mul_comm\"").unwrap(), set(&["exact", "foo"]));
        assert_eq!(extract_identifiers("").unwrap(), BTreeSet::new());
        assert_eq!(extract_identifiers("theorem t : True := by trivial").unwrap(), set(&["t", "True", "trivial"]));
    }

    fn corpus() -> ProjectCorpus {
        ProjectCorpus::new(vec![
            ProjectProof { theorem_id: "a".into(), lean_text: "by rw [Nat.add_comm]".into() },
            ProjectProof { theorem_id: "b".into(), lean_text: "by exact Nat.mul_comm x y".into() },
            ProjectProof { theorem_id: "c".into(), lean_text: "by simp [Nat.succ_le]".into() },
        ])
        .unwrap()
    }

    #[test]
    fn whitelist_examples() {
        let c = corpus();
        let known = set(&["Nat.add_comm", "Nat.mul_comm", "Nat.succ_le"]);
        assert!(build_whitelist(&c, 0, Some(&known)).unwrap().is_empty());
        assert_eq!(build_whitelist(&c, 2, Some(&known)).unwrap(), vec!["Nat.add_comm", "Nat.mul_comm"]);
        assert_eq!(build_whitelist(&c, 2, Some(&set(&["Nat.mul_comm"]))).unwrap(), vec!["Nat.mul_comm"]);
        assert!(matches!(build_whitelist(&c, 4, None), Err(AblationError::IndexOutOfRange { position: 4, len: 3 })));
        let all = build_whitelist(&c, 1, None).unwrap();
        assert_eq!(all, vec!["Nat.add_comm", "rw"]);
    }

    #[test]
    fn duplicate_theorem_rejected() {
        let p = ProjectProof { theorem_id: "a".into(), lean_text: String::new() };
        assert!(matches!(ProjectCorpus::new(vec![p.clone(), p]), Err(AblationError::DuplicateTheorem(_))));
    }

    #[test]
    fn jsonl_corpus() {
        let c = ProjectCorpus::from_jsonl("{\"theorem_id\":\"x\",\"lean_text\":\"rfl\"}\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert!(matches!(ProjectCorpus::from_jsonl("{}"), Err(AblationError::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn known_lemmas_file() {
        assert_eq!(parse_known_lemmas("Nat.add_comm\n\n  Nat.mul_comm \r\n"), set(&["Nat.add_comm", "Nat.mul_comm"]));
    }

    #[test]
    fn classical_slice_on_bundled_db() {
        let db = TacticDb::bundled();
        let s = build_ablation_set(&db, &SliceSelector::tiers([AxiomTier::Classical])).unwrap();
        for name in ["by_contra", "contrapose", "push_neg", "choose", "field_simp", "field_simp!"] {
            assert!(s.contains(name), "{name}");
        }
    }

    #[test]
    fn named_tactics_pull_in_variants() {
        let db = TacticDb::bundled();
        let sel = SliceSelector { named_tactics: Some(set(&["simp"])), ..Default::default() };
        let s = build_ablation_set(&db, &sel).unwrap();
        for name in ["simp", "simp!", "simp?", "simp_arith"] {
            assert!(s.contains(name), "{name}");
        }
    }

    #[test]
    fn unconstrained_selector_rejected() {
        let db = TacticDb::bundled();
        assert!(matches!(build_ablation_set(&db, &SliceSelector::default()), Err(AblationError::EmptySelector)));
    }

    #[test]
    fn empty_level_slice() {
        let db = TacticDb::bundled();
        let sel = SliceSelector {
            levels: Some([AbstractionLevel::DOMAIN].into()),
            tiers: Some([AxiomTier::StronglyConstructive].into()),
            ..Default::default()
        };
        assert!(matches!(build_ablation_set(&db, &sel), Err(AblationError::EmptySelection)));
    }

    #[test]
    fn emit_plain_and_unknown() {
        let db = TacticDb::bundled();
        let (c, text) = emit_config(Vec::<String>::new(), None, "plain", &db).unwrap();
        assert!(c.forbidden_tactics.is_empty());
        assert!(text.ends_with("}\n"));
        let keys: Vec<usize> =
            ["\"label\"", "\"taxonomy_version\"", "\"forbidden_tactics\"", "\"lemma_whitelist\""].iter().map(|k| text.find(k).unwrap()).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(!text.lines().any(|l| l.ends_with(' ')));
        match emit_config(["simp", "no_such_tactic"], None, "x", &db) {
            Err(AblationError::UnknownTactic(names)) => assert_eq!(names, vec!["no_such_tactic"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_round_trip() {
        let db = TacticDb::bundled();
        let wl = vec!["b".to_string(), "a".to_string(), "a".to_string()];
        let (c, text) = emit_config(["push_neg", "by_contra"], Some(&wl), "ablated", &db).unwrap();
        assert_eq!(c.lemma_whitelist.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(AblationConfig::from_json(&text).unwrap(), c);
        assert!(c.is_forbidden("by_contra") && !c.is_forbidden("simp"));
        assert_eq!(c.file_name(), "ablated.ablation.json");
    }

    fn arb_selector() -> impl Strategy<Value = SliceSelector> {
        let tiers = proptest::option::of(proptest::sample::subsequence(AxiomTier::ALL.to_vec(), 0..=3));
        let levels = proptest::option::of(proptest::sample::subsequence(vec![0u8, 1, 2, 3, 4], 0..=5));
        (tiers, levels).prop_map(|(t, l)| SliceSelector {
            tiers: t.map(|v| v.into_iter().collect()),
            levels: l.map(|v| v.into_iter().map(|x| AbstractionLevel::new(x).unwrap()).collect()),
            ..Default::default()
        })
    }

    fn result_set(db: &TacticDb, sel: &SliceSelector) -> BTreeSet<String> {
        match build_ablation_set(db, sel) {
            Ok(s) => s,
            Err(AblationError::EmptySelection | AblationError::EmptySelector) => BTreeSet::new(),
            Err(e) => panic!("{e}"),
        }
    }

    proptest! {
        #[test]
        fn monotone_in_tier_axis(sel in arb_selector(), extra in proptest::sample::select(AxiomTier::ALL.to_vec())) {
            let db = TacticDb::bundled();
            let Some(tiers) = &sel.tiers else { return Ok(()) };
            let mut bigger = sel.clone();
            let mut t = tiers.clone();
            t.insert(extra);
            bigger.tiers = Some(t);
            prop_assert!(result_set(&db, &sel).is_subset(&result_set(&db, &bigger)));
        }

        #[test]
        fn closed_over_variants(sel in arb_selector()) {
            let db = TacticDb::bundled();
            let s = result_set(&db, &sel);
            for r in db.records() {
                if let Some(base) = &r.base_of_variant {
                    if s.contains(base) {
                        prop_assert!(s.contains(&r.name));
                    }
                }
            }
        }

        #[test]
        fn whitelist_monotone(p in 0usize..=3, q in 0usize..=3) {
            let c = corpus();
            let (p, q) = (p.min(q), p.max(q));
            let a: BTreeSet<_> = build_whitelist(&c, p, None).unwrap().into_iter().collect();
            let b: BTreeSet<_> = build_whitelist(&c, q, None).unwrap().into_iter().collect();
            prop_assert!(a.is_subset(&b));
        }
    }
}
