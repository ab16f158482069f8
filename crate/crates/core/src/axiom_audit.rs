//! Empirical axiom audit.
//!
//! Every tactic is run against six probe theorems, each followed by a
//! `#print axioms` directive. Running Lean happens elsewhere; this module
//! writes the probe sources, reads the captured tool output back, and
//! reconciles the probed tier with the static assignment. Reconciliation
//! only ever raises a tier.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::to_canonical_string;
use crate::taxonomy::{tier_of_axioms, AxiomSet, Provenance, TacticDb, TacticRecord, TaxonomyError};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("parse error at byte {offset}: expected {expected}")]
    Parse { offset: usize, expected: String },
    #[error("probe for `{found}` passed to reconciliation of `{expected}`")]
    MismatchedTactic { expected: String, found: String },
    #[error("axiom report names theorem `{found}`, expected `{expected}`")]
    MismatchedTheorem { expected: String, found: String },
    #[error("tactic `{0}` is not in the database")]
    UnknownTactic(String),
    #[error("no captured output for probe {0}")]
    MissingOutput(PathBuf),
    #[error("probe file {0} does not end with a `#print axioms` line")]
    MalformedProbe(PathBuf),
    #[error("unknown probe kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AuditError + '_ {
    move |source| AuditError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    NatArithmetic,
    IntInequality,
    PropositionalLogic,
    SimpleRewrite,
    RealPositivity,
    ExistentialWitness,
}

impl ProbeKind {
    /// Canonical order.
    pub const ALL: [ProbeKind; 6] = [
        Self::NatArithmetic,
        Self::IntInequality,
        Self::PropositionalLogic,
        Self::SimpleRewrite,
        Self::RealPositivity,
        Self::ExistentialWitness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NatArithmetic => "nat_arithmetic",
            Self::IntInequality => "int_inequality",
            Self::PropositionalLogic => "propositional_logic",
            Self::SimpleRewrite => "simple_rewrite",
            Self::RealPositivity => "real_positivity",
            Self::ExistentialWitness => "existential_witness",
        }
    }

    pub fn parse(s: &str) -> Result<Self, AuditError> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| AuditError::UnknownKind(s.to_owned()))
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeSource {
    pub kind: ProbeKind,
    pub tactic_name: String,
    pub theorem_name: String,
    pub lean_text: String,
}

impl ProbeSource {
    /// The tactic script between `:= by` and the trailing `#print axioms`.
    pub fn proof_body(&self) -> &str {
        let start = self.lean_text.find(":= by\n").map_or(0, |i| i + ":= by\n".len());
        let end = self.lean_text.rfind("\n#print axioms").unwrap_or(self.lean_text.len());
        self.lean_text[start..end].trim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub kind: ProbeKind,
    pub tactic_name: String,
    succeeded: bool,
    axioms: AxiomSet,
}

impl ProbeResult {
    pub fn success(kind: ProbeKind, tactic_name: impl Into<String>, axioms: AxiomSet) -> Self {
        Self { kind, tactic_name: tactic_name.into(), succeeded: true, axioms }
    }

    pub fn failure(kind: ProbeKind, tactic_name: impl Into<String>) -> Self {
        Self { kind, tactic_name: tactic_name.into(), succeeded: false, axioms: AxiomSet::new() }
    }

    pub fn succeeded(&self) -> bool {
        self.succeeded
    }

    pub fn axioms(&self) -> &AxiomSet {
        &self.axioms
    }
}

#[derive(Deserialize)]
struct TemplateFile {
    header: String,
    statements: BTreeMap<ProbeKind, String>,
}

/// Theorem statements for the six probe kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeTemplates {
    header: String,
    statements: BTreeMap<ProbeKind, String>,
}

impl ProbeTemplates {
    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        let file: TemplateFile = serde_json::from_str(text)?;
        if let Some(missing) = ProbeKind::ALL.iter().find(|k| !file.statements.contains_key(k)) {
            return Err(AuditError::UnknownKind(format!("missing template for {missing}")));
        }
        Ok(Self { header: file.header, statements: file.statements })
    }

    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/probe_templates.json")).expect("bundled probe templates are valid")
    }

    pub fn render(&self, kind: ProbeKind, tactic_name: &str) -> ProbeSource {
        let theorem_name = format!("probe_{}_{}", kind.as_str(), lean_safe(tactic_name));
        let statement = &self.statements[&kind];
        let lean_text = format!(
            "{header}\n\ntheorem {theorem_name} {statement} := by\n  {tactic_name}\n\n#print axioms {theorem_name}\n",
            header = self.header
        );
        ProbeSource { kind, tactic_name: tactic_name.to_owned(), theorem_name, lean_text }
    }
}

/// ASCII identifier fragment: `[A-Za-z0-9_]` kept, other bytes as `_xHH`.
pub fn lean_safe(name: &str) -> String {
    let mut out = String::new();
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_x{b:02x}"));
        }
    }
    out
}

pub fn generate_probe_suite(tactic_name: &str) -> Vec<ProbeSource> {
    generate_probe_suite_with(&ProbeTemplates::bundled(), tactic_name)
}

pub fn generate_probe_suite_with(templates: &ProbeTemplates, tactic_name: &str) -> Vec<ProbeSource> {
    ProbeKind::ALL.iter().map(|&k| templates.render(k, tactic_name)).collect()
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn fail<T>(&self, expected: &str) -> Result<T, AuditError> {
        Err(AuditError::Parse { offset: self.pos, expected: expected.to_owned() })
    }

    fn skip_ws(&mut self) -> usize {
        let n = self.rest().len() - self.rest().trim_start().len();
        self.pos += n;
        n
    }

    fn ws1(&mut self) -> Result<(), AuditError> {
        if self.skip_ws() == 0 {
            return self.fail("whitespace");
        }
        Ok(())
    }

    fn lit(&mut self, s: &str) -> Result<(), AuditError> {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            Ok(())
        } else {
            self.fail(&format!("`{s}`"))
        }
    }

    fn words(&mut self, words: &[&str]) -> Result<(), AuditError> {
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                self.ws1()?;
            }
            self.lit(w)?;
        }
        Ok(())
    }
}

/// Parses the output of `#print axioms <name>`.
///
/// Accepted shapes (interior whitespace, including newlines, is flexible):
///
/// ```text
/// '<name>' depends on axioms: [<a1>, <a2>, ...]
/// '<name>' does not depend on any axioms
/// ```
pub fn parse_print_axioms(tool_output: &str) -> Result<(String, AxiomSet), AuditError> {
    let mut c = Cursor { src: tool_output, pos: 0 };
    c.skip_ws();
    c.lit("'")?;
    let name_start = c.pos;
    // The name may itself contain primes; it ends at the quote that is followed by the verb.
    let mut name_end = None;
    for (i, _) in c.rest().match_indices('\'') {
        let after = &c.rest()[i + 1..];
        let trimmed = after.trim_start();
        if trimmed.len() < after.len() && (trimmed.starts_with("depends") || trimmed.starts_with("does")) {
            name_end = Some(name_start + i);
            break;
        }
    }
    let Some(name_end) = name_end else {
        return c.fail("closing quote followed by `depends` or `does`");
    };
    if name_end == name_start {
        return c.fail("theorem name");
    }
    let name = tool_output[name_start..name_end].to_owned();
    c.pos = name_end + 1;
    c.ws1()?;

    let mut axioms = AxiomSet::new();
    if c.rest().starts_with("does") {
        c.words(&["does", "not", "depend", "on", "any", "axioms"])?;
    } else {
        c.words(&["depends", "on", "axioms"])?;
        c.skip_ws();
        c.lit(":")?;
        c.skip_ws();
        c.lit("[")?;
        c.skip_ws();
        if !c.rest().starts_with(']') {
            loop {
                let len = c.rest().find(|ch: char| ch.is_whitespace() || matches!(ch, ',' | '[' | ']')).unwrap_or(c.rest().len());
                if len == 0 {
                    return c.fail("axiom name");
                }
                axioms.insert(&c.rest()[..len]);
                c.pos += len;
                c.skip_ws();
                if c.rest().starts_with(',') {
                    c.pos += 1;
                    c.skip_ws();
                } else {
                    break;
                }
            }
        }
        c.lit("]")?;
    }
    c.skip_ws();
    if !c.rest().is_empty() {
        return c.fail("end of output");
    }
    Ok((name, axioms))
}

/// Inverse of [`parse_print_axioms`], listing axioms in sorted order.
pub fn render_print_axioms(theorem_name: &str, axioms: &AxiomSet) -> String {
    if axioms.is_empty() {
        format!("'{theorem_name}' does not depend on any axioms")
    } else {
        let list: Vec<&str> = axioms.iter().collect();
        format!("'{theorem_name}' depends on axioms: [{}]", list.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Severity {
    Error,
    Warning,
    Info,
}

// Recognizes `[<file>:<line>:<col>: ]<severity>:` message headers.
fn diagnostic_header(line: &str) -> Option<(Severity, &str)> {
    let mut body = line;
    let mut parts = line.splitn(4, ':');
    if let (Some(_file), Some(l), Some(c), Some(rest)) = (parts.next(), parts.next(), parts.next(), parts.next()) {
        if !l.is_empty() && l.bytes().all(|b| b.is_ascii_digit()) && !c.is_empty() && c.bytes().all(|b| b.is_ascii_digit()) {
            body = rest.trim_start();
        }
    }
    for (tag, sev) in [("error:", Severity::Error), ("warning:", Severity::Warning), ("info:", Severity::Info)] {
        if let Some(rest) = body.strip_prefix(tag) {
            return Some((sev, rest.trim_start()));
        }
    }
    if body == "error" || body.starts_with("error ") {
        return Some((Severity::Error, ""));
    }
    None
}

/// Turns one captured probe run into a [`ProbeResult`].
///
/// Any `error` diagnostic marks the probe unsuccessful. Otherwise warnings
/// are dropped, `info:` prefixes are removed, and what remains must be a
/// well-formed axiom report for `theorem_name`.
pub fn interpret_probe_output(kind: ProbeKind, tactic_name: &str, theorem_name: &str, output: &str) -> Result<ProbeResult, AuditError> {
    let mut kept = Vec::new();
    for line in output.lines() {
        match diagnostic_header(line) {
            Some((Severity::Error, _)) => return Ok(ProbeResult::failure(kind, tactic_name)),
            Some((Severity::Warning, _)) => {}
            Some((Severity::Info, rest)) => kept.push(rest),
            None => kept.push(line),
        }
    }
    let (name, axioms) = parse_print_axioms(&kept.join("\n"))?;
    if name != theorem_name {
        return Err(AuditError::MismatchedTheorem { expected: theorem_name.to_owned(), found: name });
    }
    Ok(ProbeResult::success(kind, tactic_name, axioms))
}

/// Upgrades the record's tier when the union of successful probe axioms
/// lands in a stronger tier. Never lowers a tier; never touches level or
/// category.
pub fn reconcile_tier(static_record: &TacticRecord, probes: &[ProbeResult]) -> Result<TacticRecord, AuditError> {
    if let Some(p) = probes.iter().find(|p| p.tactic_name != static_record.name) {
        return Err(AuditError::MismatchedTactic { expected: static_record.name.clone(), found: p.tactic_name.clone() });
    }
    let successful: Vec<&ProbeResult> = probes.iter().filter(|p| p.succeeded).collect();
    if successful.is_empty() {
        return Ok(static_record.clone());
    }
    let union = successful.iter().fold(AxiomSet::new(), |acc, p| acc.union(&p.axioms));
    let probed = tier_of_axioms(&union)?;
    if probed > static_record.tier {
        Ok(TacticRecord { tier: probed, provenance: Provenance::Probed, base_of_variant: None, ..static_record.clone() })
    } else {
        Ok(static_record.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub tactic: String,
    pub kind: ProbeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeManifest {
    pub probes: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `<tactic>/<kind>.lean` for every tactic plus `manifest.json`.
pub fn write_probe_bundle(dir: &Path, tactics: &[String]) -> Result<ProbeManifest, AuditError> {
    let templates = ProbeTemplates::bundled();
    let mut manifest = ProbeManifest::default();
    for tactic in tactics {
        let sub = lean_safe(tactic);
        let sub_dir = dir.join(&sub);
        fs::create_dir_all(&sub_dir).map_err(io_err(&sub_dir))?;
        for probe in generate_probe_suite_with(&templates, tactic) {
            let rel = format!("{sub}/{}.lean", probe.kind);
            let path = dir.join(&rel);
            fs::write(&path, &probe.lean_text).map_err(io_err(&path))?;
            manifest.probes.push(ManifestEntry { file: rel, tactic: tactic.clone(), kind: probe.kind });
        }
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, to_canonical_string(&manifest)?).map_err(io_err(&path))?;
    Ok(manifest)
}

fn theorem_name_of(path: &Path, lean_text: &str) -> Result<String, AuditError> {
    lean_text
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.trim().strip_prefix("#print axioms"))
        .map(|n| n.trim().to_owned())
        .filter(|n| !n.is_empty())
        .ok_or_else(|| AuditError::MalformedProbe(path.to_owned()))
}

/// Reads every probe in a bundle together with its captured `.txt` output.
pub fn read_probe_bundle(dir: &Path) -> Result<Vec<ProbeResult>, AuditError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: ProbeManifest = serde_json::from_str(&text)?;
    let mut results = Vec::with_capacity(manifest.probes.len());
    for entry in &manifest.probes {
        let lean_path = dir.join(&entry.file);
        let lean_text = fs::read_to_string(&lean_path).map_err(io_err(&lean_path))?;
        let theorem = theorem_name_of(&lean_path, &lean_text)?;
        let out_path = lean_path.with_extension("txt");
        if !out_path.exists() {
            return Err(AuditError::MissingOutput(out_path));
        }
        let output = fs::read_to_string(&out_path).map_err(io_err(&out_path))?;
        results.push(interpret_probe_output(entry.kind, &entry.tactic, &theorem, &output)?);
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditChange {
    pub tactic: String,
    pub from: crate::taxonomy::AxiomTier,
    pub to: crate::taxonomy::AxiomTier,
}

/// Reconciles every probed tactic of `db` and returns the updated database
/// along with the tiers that moved.
pub fn audit(db: &TacticDb, results: &[ProbeResult]) -> Result<(TacticDb, Vec<AuditChange>), AuditError> {
    let mut by_tactic: BTreeMap<&str, Vec<ProbeResult>> = BTreeMap::new();
    for r in results {
        by_tactic.entry(r.tactic_name.as_str()).or_default().push(r.clone());
    }
    let mut updated = db.clone();
    let mut changes = Vec::new();
    for (tactic, probes) in by_tactic {
        let record = db.get(tactic).ok_or_else(|| AuditError::UnknownTactic(tactic.to_owned()))?;
        let reconciled = reconcile_tier(record, &probes)?;
        if reconciled.tier != record.tier {
            changes.push(AuditChange { tactic: tactic.to_owned(), from: record.tier, to: reconciled.tier });
        }
        updated.upsert(reconciled)?;
    }
    Ok((updated, changes))
}
