//! Phase state machine driving an agent and a checker toward a Lean proof.
//!
//! [`step`] is the pure transition function. [`run`] performs the provider
//! calls each phase needs, charges them to the [`Budget`], appends one
//! [`TraceEvent`] per call and feeds the results back into [`step`].
//!
//! Placeholders in scaffolds are the token `sorry`. The Implement phase asks
//! the agent for one fragment per placeholder of the current scaffold and
//! splices them in, then checks the result and re-checks it once more
//! before reporting success.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ablation::AblationConfig;
use crate::lexer::{self, SpanKind};

pub const PLACEHOLDER: &str = "sorry";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    SetUp,
    Evaluate,
    Strategize,
    Decompose,
    Scaffold,
    Implement,
    Iterate,
    Solved,
    Blocked,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Solved | Phase::Blocked)
    }

    /// The phase the retry ladder falls back to once retries of `self` run out.
    fn fallback(self) -> Phase {
        match self {
            Phase::Implement => Phase::Scaffold,
            Phase::Scaffold => Phase::Decompose,
            _ => Phase::Strategize,
        }
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("cannot step from terminal phase {0:?}")]
    TerminalStateStep(Phase),
    #[error("{budget} budget underflow")]
    BudgetUnderflow { budget: &'static str },
    #[error("event {event} does not apply to phase {phase:?}")]
    UnexpectedEvent { phase: Phase, event: &'static str },
    #[error("theorem statement is empty")]
    EmptyStatement,
    #[error("script: {0}")]
    SchemaError(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Provider-side failures. They never abort a run; they route into Iterate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider failure: {0}")]
    Failure(String),
    #[error("provider missed its {0:?} deadline")]
    Deadline(Duration),
    #[error("script has no {op} response #{attempt}")]
    ScriptExhausted { op: &'static str, attempt: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub theorem_statement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal_proof: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationConfig>,
}

impl Goal {
    pub fn new(theorem_statement: impl Into<String>) -> Result<Self, OrchestratorError> {
        let theorem_statement = theorem_statement.into();
        if theorem_statement.trim().is_empty() {
            return Err(OrchestratorError::EmptyStatement);
        }
        Ok(Self { theorem_statement, informal_proof: None, ablation: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_agent_calls: u32,
    pub max_checker_calls: u32,
    pub max_iterations: u32,
    #[serde(default)]
    pub agent_calls: u32,
    #[serde(default)]
    pub checker_calls: u32,
    #[serde(default)]
    pub iterations: u32,
}

impl Budget {
    pub fn new(max_agent_calls: u32, max_checker_calls: u32, max_iterations: u32) -> Self {
        Self { max_agent_calls, max_checker_calls, max_iterations, agent_calls: 0, checker_calls: 0, iterations: 0 }
    }

    pub fn agent_remaining(&self) -> u32 {
        self.max_agent_calls - self.agent_calls
    }

    pub fn checker_remaining(&self) -> u32 {
        self.max_checker_calls - self.checker_calls
    }

    pub fn iterations_remaining(&self) -> u32 {
        self.max_iterations - self.iterations
    }

    /// Name of the first exhausted dimension, if any.
    pub fn exhausted(&self) -> Option<&'static str> {
        if self.agent_remaining() == 0 {
            Some("agent")
        } else if self.checker_remaining() == 0 {
            Some("checker")
        } else if self.iterations_remaining() == 0 {
            Some("iteration")
        } else {
            None
        }
    }

    fn charge(used: &mut u32, max: u32, budget: &'static str) -> Result<(), OrchestratorError> {
        if *used >= max {
            return Err(OrchestratorError::BudgetUnderflow { budget });
        }
        *used += 1;
        Ok(())
    }

    pub fn charge_agent(&mut self) -> Result<(), OrchestratorError> {
        Self::charge(&mut self.agent_calls, self.max_agent_calls, "agent")
    }

    pub fn charge_checker(&mut self) -> Result<(), OrchestratorError> {
        Self::charge(&mut self.checker_calls, self.max_checker_calls, "checker")
    }

    pub fn charge_iteration(&mut self) -> Result<(), OrchestratorError> {
        Self::charge(&mut self.iterations, self.max_iterations, "iteration")
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::new(64, 64, 16)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub success: bool,
    #[serde(default)]
    pub messages: Vec<String>,
    #[serde(default)]
    pub forbidden_uses: Vec<String>,
    #[serde(default)]
    pub unresolved_placeholders: usize,
}

impl Diagnostics {
    /// Compiles, with no forbidden tactics and nothing left to fill.
    pub fn is_clean(&self) -> bool {
        self.success && self.forbidden_uses.is_empty() && self.unresolved_placeholders == 0
    }

    /// Compiles with no forbidden tactics; placeholders allowed.
    pub fn accepts_scaffold(&self) -> bool {
        self.success && self.forbidden_uses.is_empty()
    }
}

pub trait AgentProvider {
    fn evaluate_difficulty(&mut self, goal: &Goal, context: &str, deadline: Duration) -> Result<String, ProviderError>;
    fn draft_informal(&mut self, goal: &Goal, deadline: Duration) -> Result<String, ProviderError>;
    fn decompose(&mut self, informal: &str, deadline: Duration) -> Result<Vec<String>, ProviderError>;
    fn scaffold(&mut self, steps: &[String], deadline: Duration) -> Result<String, ProviderError>;
    fn fill_placeholder(&mut self, scaffold: &str, index: usize, diagnostics: &Diagnostics, deadline: Duration) -> Result<String, ProviderError>;
}

pub trait CheckerProvider {
    fn check(&mut self, lean_text: &str, ablation: Option<&AblationConfig>, deadline: Duration) -> Result<Diagnostics, ProviderError>;
}

/// Byte ranges of `sorry` tokens outside comments and strings. Text that
/// does not lex is treated as having none.
pub fn placeholder_spans(lean_text: &str) -> Vec<(usize, usize)> {
    lexer::scan(lean_text)
        .map(|spans| {
            spans
                .into_iter()
                .filter(|s| s.kind == SpanKind::Identifier && &lean_text[s.start..s.end] == PLACEHOLDER)
                .map(|s| (s.start, s.end))
                .collect()
        })
        .unwrap_or_default()
}

/// Replaces the placeholders of `scaffold`, in order, by `fragments`.
pub fn splice(scaffold: &str, fragments: &[String]) -> String {
    let spans = placeholder_spans(scaffold);
    let mut out = String::with_capacity(scaffold.len());
    let mut pos = 0;
    for ((start, end), frag) in spans.iter().zip(fragments) {
        out.push_str(&scaffold[pos..*start]);
        out.push_str(frag);
        pos = *end;
    }
    out.push_str(&scaffold[pos..]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Same-phase retries before falling back one phase.
    pub same_phase_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { same_phase_retries: 2 }
    }
}

/// Artifacts accumulated across phases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workspace {
    pub evaluation: Option<String>,
    pub informal: Option<String>,
    pub steps: Vec<String>,
    pub scaffold: Option<String>,
    pub scaffold_diagnostics: Option<Diagnostics>,
    pub candidate: Option<String>,
    pub last_diagnostics: Diagnostics,
    pub failed_phase: Option<Phase>,
    pub retries: BTreeMap<Phase, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub phase: Phase,
    pub goal: Goal,
    pub budget: Budget,
    pub policy: RetryPolicy,
    pub workspace: Workspace,
    pub blocked_reason: Option<String>,
}

impl State {
    pub fn new(goal: Goal, budget: Budget, policy: RetryPolicy) -> Self {
        Self { phase: Phase::SetUp, goal, budget, policy, workspace: Workspace::default(), blocked_reason: None }
    }
}

/// Result of the provider calls one phase made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    SetUpDone,
    /// The phase cannot be afforded with the remaining budget.
    Exhausted(&'static str),
    Evaluated(Result<String, ProviderError>),
    Drafted(Result<String, ProviderError>),
    Decomposed(Result<Vec<String>, ProviderError>),
    Scaffolded { text: String, check: Result<Diagnostics, ProviderError> },
    ScaffoldFailed(ProviderError),
    Implemented { text: String, check: Result<Diagnostics, ProviderError>, verify: Option<Result<Diagnostics, ProviderError>> },
    ImplementFailed(ProviderError),
    Iterated,
}

impl Event {
    fn name(&self) -> &'static str {
        match self {
            Event::SetUpDone => "SetUpDone",
            Event::Exhausted(_) => "Exhausted",
            Event::Evaluated(_) => "Evaluated",
            Event::Drafted(_) => "Drafted",
            Event::Decomposed(_) => "Decomposed",
            Event::Scaffolded { .. } => "Scaffolded",
            Event::ScaffoldFailed(_) => "ScaffoldFailed",
            Event::Implemented { .. } => "Implemented",
            Event::ImplementFailed(_) => "ImplementFailed",
            Event::Iterated => "Iterated",
        }
    }
}

fn fail(mut s: State, phase: Phase, diag: Diagnostics) -> State {
    s.workspace.failed_phase = Some(phase);
    s.workspace.last_diagnostics = diag;
    s.phase = Phase::Iterate;
    s
}

fn provider_diag(e: &ProviderError) -> Diagnostics {
    Diagnostics { success: false, messages: vec![e.to_string()], ..Diagnostics::default() }
}

fn after_evaluate(goal: &Goal) -> Phase {
    if goal.informal_proof.is_some() {
        Phase::Decompose
    } else {
        Phase::Strategize
    }
}

/// Pure transition function.
pub fn step(state: &State, event: &Event) -> Result<State, OrchestratorError> {
    if state.phase.is_terminal() {
        return Err(OrchestratorError::TerminalStateStep(state.phase));
    }
    let mut s = state.clone();
    let unexpected = || OrchestratorError::UnexpectedEvent { phase: state.phase, event: event.name() };
    if let Event::Exhausted(budget) = event {
        s.blocked_reason = Some(format!("{budget} budget exhausted before {:?}", state.phase));
        s.phase = Phase::Blocked;
        return Ok(s);
    }
    let next = match (state.phase, event) {
        (Phase::SetUp, Event::SetUpDone) => {
            s.phase = Phase::Evaluate;
            s
        }
        (Phase::Evaluate, Event::Evaluated(r)) => match r {
            Ok(text) => {
                s.workspace.evaluation = Some(text.clone());
                s.phase = after_evaluate(&s.goal);
                s
            }
            Err(e) => fail(s, Phase::Evaluate, provider_diag(e)),
        },
        (Phase::Strategize, Event::Drafted(r)) => match r {
            Ok(text) => {
                s.workspace.informal = Some(text.clone());
                s.phase = Phase::Decompose;
                s
            }
            Err(e) => fail(s, Phase::Strategize, provider_diag(e)),
        },
        (Phase::Decompose, Event::Decomposed(r)) => match r {
            Ok(steps) => {
                s.workspace.steps = steps.clone();
                s.phase = Phase::Scaffold;
                s
            }
            Err(e) => fail(s, Phase::Decompose, provider_diag(e)),
        },
        (Phase::Scaffold, Event::ScaffoldFailed(e)) => fail(s, Phase::Scaffold, provider_diag(e)),
        (Phase::Scaffold, Event::Scaffolded { text, check }) => match check {
            Ok(d) if d.accepts_scaffold() => {
                s.workspace.scaffold = Some(text.clone());
                s.workspace.scaffold_diagnostics = Some(d.clone());
                s.workspace.last_diagnostics = d.clone();
                s.phase = Phase::Implement;
                s
            }
            Ok(d) => fail(s, Phase::Scaffold, d.clone()),
            Err(e) => fail(s, Phase::Scaffold, provider_diag(e)),
        },
        (Phase::Implement, Event::ImplementFailed(e)) => fail(s, Phase::Implement, provider_diag(e)),
        (Phase::Implement, Event::Implemented { text, check, verify }) => {
            s.workspace.candidate = Some(text.clone());
            match (check, verify) {
                (Ok(d), Some(Ok(v))) if d.is_clean() && v.is_clean() => {
                    s.workspace.last_diagnostics = v.clone();
                    s.phase = Phase::Solved;
                    s
                }
                (Ok(d), Some(Ok(v))) if d.is_clean() => fail(s, Phase::Implement, v.clone()),
                (Ok(d), Some(Err(e))) if d.is_clean() => fail(s, Phase::Implement, provider_diag(e)),
                (Ok(d), _) => fail(s, Phase::Implement, d.clone()),
                (Err(e), _) => fail(s, Phase::Implement, provider_diag(e)),
            }
        }
        (Phase::Iterate, Event::Iterated) => {
            if let Some(budget) = s.budget.exhausted() {
                s.blocked_reason = Some(format!("{budget} budget exhausted"));
                s.phase = Phase::Blocked;
                return Ok(s);
            }
            s.budget.charge_iteration()?;
            let failed = s.workspace.failed_phase.take().ok_or_else(unexpected)?;
            let failed = if failed == Phase::Evaluate { after_evaluate(&s.goal) } else { failed };
            let used = s.workspace.retries.entry(failed).or_insert(0);
            let target = if *used < s.policy.same_phase_retries {
                *used += 1;
                failed
            } else {
                *used = 0;
                failed.fallback()
            };
            s.phase = target;
            s
        }
        _ => return Err(unexpected()),
    };
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Checker,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub seq: u64,
    pub phase: Phase,
    pub action: String,
    pub role: Role,
    /// SHA-256 of the request and response text, for provider calls.
    pub digest: Option<String>,
    pub outcome: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn push(&mut self, phase: Phase, action: &str, role: Role, digest: Option<String>, outcome: String) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent { seq, phase, action: action.to_owned(), role, digest, outcome });
    }

    pub fn count(&self, role: Role) -> usize {
        self.events.iter().filter(|e| e.role == role).count()
    }

    /// Phases in trace order with consecutive repeats collapsed.
    pub fn phase_sequence(&self) -> Vec<Phase> {
        let mut out: Vec<Phase> = self.events.iter().map(|e| e.phase).collect();
        out.dedup();
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<Vec<TraceEvent>, _>>()?;
        Ok(Self { events })
    }
}

fn digest(op: &str, request: &str, response: &str) -> String {
    let mut h = Sha256::new();
    for part in [op, request, response] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn outcome_of<T>(r: &Result<T, ProviderError>, ok: impl FnOnce(&T) -> String) -> String {
    match r {
        Ok(v) => ok(v),
        Err(e) => format!("error: {e}"),
    }
}

fn diag_outcome(d: &Diagnostics) -> String {
    format!(
        "success={} placeholders={} forbidden=[{}]",
        d.success,
        d.unresolved_placeholders,
        d.forbidden_uses.join(",")
    )
}

fn response_text<T: Serialize>(r: &Result<T, ProviderError>) -> String {
    match r {
        Ok(v) => serde_json::to_string(v).unwrap_or_default(),
        Err(e) => e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Solved { lean_text: String },
    Blocked { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub outcome: Outcome,
    pub trace: Trace,
    pub budget: Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub policy: RetryPolicy,
    /// Deadline handed to every provider call.
    pub call_deadline: Duration,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { policy: RetryPolicy::default(), call_deadline: Duration::from_secs(600) }
    }
}

struct Driver<'a, A: ?Sized, C: ?Sized> {
    agent: &'a mut A,
    checker: &'a mut C,
    trace: Trace,
    deadline: Duration,
}

impl<A: AgentProvider + ?Sized, C: CheckerProvider + ?Sized> Driver<'_, A, C> {
    fn agent_call<T: Serialize>(
        &mut self,
        budget: &mut Budget,
        phase: Phase,
        action: &str,
        request: &str,
        call: impl FnOnce(&mut A, Duration) -> Result<T, ProviderError>,
        describe: impl FnOnce(&T) -> String,
    ) -> Result<Result<T, ProviderError>, OrchestratorError> {
        budget.charge_agent()?;
        let r = call(self.agent, self.deadline);
        let d = digest(action, request, &response_text(&r));
        self.trace.push(phase, action, Role::Agent, Some(d), outcome_of(&r, describe));
        Ok(r)
    }

    fn check(
        &mut self,
        budget: &mut Budget,
        phase: Phase,
        action: &str,
        text: &str,
        ablation: Option<&AblationConfig>,
    ) -> Result<Result<Diagnostics, ProviderError>, OrchestratorError> {
        budget.charge_checker()?;
        let r = self.checker.check(text, ablation, self.deadline);
        let d = digest(action, text, &response_text(&r));
        self.trace.push(phase, action, Role::Checker, Some(d), outcome_of(&r, diag_outcome));
        Ok(r)
    }

    fn note(&mut self, phase: Phase, action: &str, outcome: String) {
        self.trace.push(phase, action, Role::None, None, outcome);
    }
}

/// Agent and checker calls the phase will make.
fn phase_cost(s: &State) -> (u32, u32) {
    match s.phase {
        Phase::Evaluate | Phase::Strategize | Phase::Decompose => (1, 0),
        Phase::Scaffold => (1, 1),
        Phase::Implement => {
            let holes = s.workspace.scaffold.as_deref().map_or(0, |t| placeholder_spans(t).len());
            (holes as u32, 2)
        }
        _ => (0, 0),
    }
}

/// Drives the state machine until it reaches Solved or Blocked.
pub fn run<A, C>(goal: &Goal, agent: &mut A, checker: &mut C, budget: Budget, options: RunOptions) -> Result<RunReport, OrchestratorError>
where
    A: AgentProvider + ?Sized,
    C: CheckerProvider + ?Sized,
{
    if goal.theorem_statement.trim().is_empty() {
        return Err(OrchestratorError::EmptyStatement);
    }
    let mut state = State::new(goal.clone(), budget, options.policy);
    let mut driver = Driver { agent, checker, trace: Trace::default(), deadline: options.call_deadline };
    while !state.phase.is_terminal() {
        let (agent_need, checker_need) = phase_cost(&state);
        let event = if state.budget.agent_remaining() < agent_need {
            Event::Exhausted("agent")
        } else if state.budget.checker_remaining() < checker_need {
            Event::Exhausted("checker")
        } else {
            run_phase(&mut driver, &mut state)?
        };
        state = step(&state, &event)?;
        match state.phase {
            Phase::Solved => driver.note(Phase::Solved, "finish", "solved".into()),
            Phase::Blocked => {
                let reason = state.blocked_reason.clone().unwrap_or_default();
                driver.note(Phase::Blocked, "finish", reason)
            }
            _ => {}
        }
    }
    let outcome = match state.phase {
        Phase::Solved => Outcome::Solved { lean_text: state.workspace.candidate.clone().unwrap_or_default() },
        _ => Outcome::Blocked { reason: state.blocked_reason.clone().unwrap_or_default() },
    };
    Ok(RunReport { outcome, trace: driver.trace, budget: state.budget })
}

fn run_phase<A, C>(d: &mut Driver<'_, A, C>, state: &mut State) -> Result<Event, OrchestratorError>
where
    A: AgentProvider + ?Sized,
    C: CheckerProvider + ?Sized,
{
    let phase = state.phase;
    let goal = state.goal.clone();
    let budget = &mut state.budget;
    let ws = &state.workspace;
    Ok(match phase {
        Phase::SetUp => {
            d.note(phase, "set_up", "ok".into());
            Event::SetUpDone
        }
        Phase::Evaluate => {
            let context = ws.last_diagnostics.messages.join("\n");
            let r = d.agent_call(budget, phase, "evaluate_difficulty", &goal.theorem_statement, |a, t| a.evaluate_difficulty(&goal, &context, t), |_| "ok".into())?;
            Event::Evaluated(r)
        }
        Phase::Strategize => {
            let r = d.agent_call(budget, phase, "draft_informal", &goal.theorem_statement, |a, t| a.draft_informal(&goal, t), |_| "ok".into())?;
            Event::Drafted(r)
        }
        Phase::Decompose => {
            let informal = ws.informal.clone().or_else(|| goal.informal_proof.clone()).unwrap_or_default();
            let r = d.agent_call(budget, phase, "decompose", &informal, |a, t| a.decompose(&informal, t), |s| format!("{} steps", s.len()))?;
            Event::Decomposed(r)
        }
        Phase::Scaffold => {
            let steps = ws.steps.clone();
            let request = steps.join("\n");
            match d.agent_call(budget, phase, "scaffold", &request, |a, t| a.scaffold(&steps, t), |_| "ok".into())? {
                Ok(text) => {
                    let check = d.check(budget, phase, "check_scaffold", &text, goal.ablation.as_ref())?;
                    Event::Scaffolded { text, check }
                }
                Err(e) => Event::ScaffoldFailed(e),
            }
        }
        Phase::Implement => {
            let scaffold = ws.scaffold.clone().unwrap_or_default();
            let diagnostics = ws.last_diagnostics.clone();
            let holes = placeholder_spans(&scaffold).len();
            let mut fragments = Vec::with_capacity(holes);
            for index in 0..holes {
                let request = format!("{index}\n{scaffold}");
                match d.agent_call(budget, phase, "fill_placeholder", &request, |a, t| a.fill_placeholder(&scaffold, index, &diagnostics, t), |_| "ok".into())? {
                    Ok(f) => fragments.push(f),
                    Err(e) => return Ok(Event::ImplementFailed(e)),
                }
            }
            let text = splice(&scaffold, &fragments);
            let check = d.check(budget, phase, "check", &text, goal.ablation.as_ref())?;
            let verify = match &check {
                Ok(diag) if diag.is_clean() => Some(d.check(budget, phase, "verify", &text, goal.ablation.as_ref())?),
                _ => None,
            };
            Event::Implemented { text, check, verify }
        }
        Phase::Iterate => {
            let failed = ws.failed_phase.map_or_else(String::new, |p| format!("{p:?}"));
            d.note(phase, "iterate", format!("after {failed}: {}", ws.last_diagnostics.messages.join("; ")));
            Event::Iterated
        }
        Phase::Solved | Phase::Blocked => return Err(OrchestratorError::TerminalStateStep(phase)),
    })
}

/// One scripted response: a value, or `{"error": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Scripted<T> {
    Error { error: String },
    Ok(T),
}

impl<T: Clone> Scripted<T> {
    fn get(&self) -> Result<T, ProviderError> {
        match self {
            Scripted::Ok(v) => Ok(v.clone()),
            Scripted::Error { error } => Err(ProviderError::Failure(error.clone())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorPattern {
    /// Substring of the checked text that triggers the error.
    pub contains: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerScript {
    #[serde(default)]
    pub error_patterns: Vec<ErrorPattern>,
}

/// Canned responses per agent operation, consumed in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub evaluate: Vec<Scripted<String>>,
    #[serde(default)]
    pub strategize: Vec<Scripted<String>>,
    #[serde(default)]
    pub decompose: Vec<Scripted<Vec<String>>>,
    #[serde(default)]
    pub scaffold: Vec<Scripted<String>>,
    #[serde(default)]
    pub implement: Vec<Scripted<String>>,
    #[serde(default)]
    pub checker: CheckerScript,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, OrchestratorError> {
        serde_json::from_str(text).map_err(|e| OrchestratorError::SchemaError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|source| OrchestratorError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone)]
pub struct MockAgent {
    script: Script,
    cursor: BTreeMap<&'static str, usize>,
}

impl MockAgent {
    fn next<T: Clone>(cursor: &mut BTreeMap<&'static str, usize>, op: &'static str, list: &[Scripted<T>]) -> Result<T, ProviderError> {
        let i = cursor.entry(op).or_insert(0);
        let attempt = *i;
        *i += 1;
        list.get(attempt).ok_or(ProviderError::ScriptExhausted { op, attempt })?.get()
    }
}

impl AgentProvider for MockAgent {
    fn evaluate_difficulty(&mut self, _: &Goal, _: &str, _: Duration) -> Result<String, ProviderError> {
        Self::next(&mut self.cursor, "evaluate", &self.script.evaluate)
    }

    fn draft_informal(&mut self, _: &Goal, _: Duration) -> Result<String, ProviderError> {
        Self::next(&mut self.cursor, "strategize", &self.script.strategize)
    }

    fn decompose(&mut self, _: &str, _: Duration) -> Result<Vec<String>, ProviderError> {
        Self::next(&mut self.cursor, "decompose", &self.script.decompose)
    }

    fn scaffold(&mut self, _: &[String], _: Duration) -> Result<String, ProviderError> {
        Self::next(&mut self.cursor, "scaffold", &self.script.scaffold)
    }

    fn fill_placeholder(&mut self, _: &str, _: usize, _: &Diagnostics, _: Duration) -> Result<String, ProviderError> {
        Self::next(&mut self.cursor, "implement", &self.script.implement)
    }
}

/// Lexical stand-in for Lean: counts `sorry` tokens, flags forbidden
/// tactic words and fires scripted error patterns.
#[derive(Debug, Clone, Default)]
pub struct MockChecker {
    script: CheckerScript,
}

impl MockChecker {
    pub fn new(script: CheckerScript) -> Self {
        Self { script }
    }

    pub fn permissive() -> Self {
        Self::default()
    }
}

impl CheckerProvider for MockChecker {
    fn check(&mut self, lean_text: &str, ablation: Option<&AblationConfig>, _: Duration) -> Result<Diagnostics, ProviderError> {
        let code = lexer::strip_comments(lean_text).map_err(|e| ProviderError::Failure(e.to_string()))?;
        let mut messages: Vec<String> =
            self.script.error_patterns.iter().filter(|p| code.contains(&p.contains)).map(|p| p.message.clone()).collect();
        let words = lexer::tactic_words(&code).map_err(|e| ProviderError::Failure(e.to_string()))?;
        let unresolved_placeholders = words.iter().filter(|w| **w == PLACEHOLDER).count();
        let mut forbidden_uses: Vec<String> = match ablation {
            Some(cfg) => words.iter().filter(|w| cfg.is_forbidden(w)).map(|w| w.to_string()).collect(),
            None => Vec::new(),
        };
        forbidden_uses.sort();
        forbidden_uses.dedup();
        for t in &forbidden_uses {
            messages.push(format!("tactic '{t}' is not allowed"));
        }
        if unresolved_placeholders > 0 {
            messages.push(format!("declaration uses 'sorry' ({unresolved_placeholders})"));
        }
        let success = self.script.error_patterns.iter().all(|p| !code.contains(&p.contains)) && forbidden_uses.is_empty();
        Ok(Diagnostics { success, messages, forbidden_uses, unresolved_placeholders })
    }
}

/// Replay providers for `script`.
pub fn mock_providers(script: Script) -> (MockAgent, MockChecker) {
    let checker = MockChecker::new(script.checker.clone());
    (MockAgent { script, cursor: BTreeMap::new() }, checker)
}

/// Adapter for an external program speaking the line protocol: one JSON
/// request object on stdin (`{"op": ..., ...}`), one JSON object on stdout,
/// either `{"ok": value}` or `{"error": "message"}`. Each call spawns the
/// program afresh; a call that outlives its deadline is killed.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    program: PathBuf,
    args: Vec<String>,
}

impl CommandProvider {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self { program: program.into(), args }
    }

    fn call(&self, request: Value, deadline: Duration) -> Result<Value, ProviderError> {
        let failure = |m: String| ProviderError::Failure(format!("{}: {m}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| failure(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut line = request.to_string();
        line.push('\n');
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        // A child that exits without reading stdin is reported through its output.
        let _ = stdin.write_all(line.as_bytes());
        drop(stdin);
        let start = Instant::now();
        loop {
            match child.try_wait().map_err(|e| failure(e.to_string()))? {
                Some(_) => break,
                None if start.elapsed() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ProviderError::Deadline(deadline));
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        }
        let out = reader.join().map_err(|_| failure("reader panicked".into()))?.map_err(|e| failure(e.to_string()))?;
        let response: Value = serde_json::from_str(out.trim()).map_err(|e| failure(format!("bad response: {e}")))?;
        match (response.get("ok"), response.get("error")) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(Value::String(m))) => Err(ProviderError::Failure(m.clone())),
            _ => Err(failure("response must have exactly one of \"ok\" or \"error\"".into())),
        }
    }

    fn call_as<T: serde::de::DeserializeOwned>(&self, request: Value, deadline: Duration) -> Result<T, ProviderError> {
        let v = self.call(request, deadline)?;
        serde_json::from_value(v).map_err(|e| ProviderError::Failure(format!("bad response payload: {e}")))
    }
}

impl AgentProvider for CommandProvider {
    fn evaluate_difficulty(&mut self, goal: &Goal, context: &str, deadline: Duration) -> Result<String, ProviderError> {
        self.call_as(json!({"op": "evaluate_difficulty", "goal": goal, "context": context}), deadline)
    }

    fn draft_informal(&mut self, goal: &Goal, deadline: Duration) -> Result<String, ProviderError> {
        self.call_as(json!({"op": "draft_informal", "goal": goal}), deadline)
    }

    fn decompose(&mut self, informal: &str, deadline: Duration) -> Result<Vec<String>, ProviderError> {
        self.call_as(json!({"op": "decompose", "informal": informal}), deadline)
    }

    fn scaffold(&mut self, steps: &[String], deadline: Duration) -> Result<String, ProviderError> {
        self.call_as(json!({"op": "scaffold", "steps": steps}), deadline)
    }

    fn fill_placeholder(&mut self, scaffold: &str, index: usize, diagnostics: &Diagnostics, deadline: Duration) -> Result<String, ProviderError> {
        self.call_as(json!({"op": "fill_placeholder", "scaffold": scaffold, "index": index, "diagnostics": diagnostics}), deadline)
    }
}

impl CheckerProvider for CommandProvider {
    fn check(&mut self, lean_text: &str, ablation: Option<&AblationConfig>, deadline: Duration) -> Result<Diagnostics, ProviderError> {
        self.call_as(json!({"op": "check", "lean_text": lean_text, "ablation": ablation}), deadline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goal() -> Goal {
        Goal::new("theorem t : 1 + 1 = 2").unwrap()
    }

    fn state(phase: Phase) -> State {
        let mut s = State::new(goal(), Budget::new(10, 10, 3), RetryPolicy::default());
        s.phase = phase;
        s
    }

    #[test]
    fn setup_goes_to_evaluate() {
        assert_eq!(step(&state(Phase::SetUp), &Event::SetUpDone).unwrap().phase, Phase::Evaluate);
    }

    #[test]
    fn evaluate_branches_on_informal_proof() {
        let ev = Event::Evaluated(Ok("easy".into()));
        assert_eq!(step(&state(Phase::Evaluate), &ev).unwrap().phase, Phase::Strategize);
        let mut s = state(Phase::Evaluate);
        s.goal.informal_proof = Some("by arithmetic".into());
        assert_eq!(step(&s, &ev).unwrap().phase, Phase::Decompose);
    }

    #[test]
    fn implement_clean_is_solved() {
        let clean = Diagnostics { success: true, ..Default::default() };
        let ev = Event::Implemented { text: "x".into(), check: Ok(clean.clone()), verify: Some(Ok(clean)) };
        assert_eq!(step(&state(Phase::Implement), &ev).unwrap().phase, Phase::Solved);
        let dirty = Diagnostics { success: true, forbidden_uses: vec!["by_contra".into()], ..Default::default() };
        let ev = Event::Implemented { text: "x".into(), check: Ok(dirty), verify: None };
        assert_eq!(step(&state(Phase::Implement), &ev).unwrap().phase, Phase::Iterate);
    }

    #[test]
    fn iterate_with_iterations_spent_blocks() {
        let mut s = state(Phase::Iterate);
        s.budget.iterations = s.budget.max_iterations;
        s.workspace.failed_phase = Some(Phase::Implement);
        let next = step(&s, &Event::Iterated).unwrap();
        assert_eq!(next.phase, Phase::Blocked);
    }

    #[test]
    fn terminal_steps_rejected() {
        for p in [Phase::Solved, Phase::Blocked] {
            assert!(matches!(step(&state(p), &Event::SetUpDone), Err(OrchestratorError::TerminalStateStep(_))));
        }
    }

    #[test]
    fn mismatched_event_rejected() {
        assert!(matches!(step(&state(Phase::SetUp), &Event::Iterated), Err(OrchestratorError::UnexpectedEvent { .. })));
    }

    #[test]
    fn retry_ladder() {
        let mut s = state(Phase::Iterate);
        s.budget = Budget::new(100, 100, 100);
        let mut targets = Vec::new();
        for _ in 0..4 {
            s.phase = Phase::Iterate;
            s.workspace.failed_phase = Some(Phase::Implement);
            s = step(&s, &Event::Iterated).unwrap();
            targets.push(s.phase);
        }
        assert_eq!(targets, vec![Phase::Implement, Phase::Implement, Phase::Scaffold, Phase::Implement]);
        s.phase = Phase::Iterate;
        s.workspace.failed_phase = Some(Phase::Evaluate);
        assert_eq!(step(&s, &Event::Iterated).unwrap().phase, Phase::Strategize);
    }

    #[test]
    fn splice_fills_in_order() {
        let scaffold = "by\n  have h := sorry -- sorry\n  exact sorry";
        assert_eq!(placeholder_spans(scaffold).len(), 2);
        let out = splice(scaffold, &["rfl".into(), "h".into()]);
        assert_eq!(out, "by\n  have h := rfl -- sorry\n  exact h");
    }

    #[test]
    fn empty_statement_rejected() {
        assert!(matches!(Goal::new("  "), Err(OrchestratorError::EmptyStatement)));
    }

    #[test]
    fn mock_checker_reports() {
        let cfg = AblationConfig {
            label: "a".into(),
            taxonomy_version: "v".into(),
            forbidden_tactics: vec!["by_contra".into(), "push_neg".into()],
            lemma_whitelist: None,
        };
        let mut c = MockChecker::new(CheckerScript {
            error_patterns: vec![ErrorPattern { contains: "bad_lemma".into(), message: "unknown identifier".into() }],
        });
        let d = c.check("by\n  by_contra h\n  push_neg at h\n  sorry -- by_contra", Some(&cfg), Duration::ZERO).unwrap();
        assert!(!d.success);
        assert_eq!(d.forbidden_uses, vec!["by_contra", "push_neg"]);
        assert_eq!(d.unresolved_placeholders, 1);
        let d = c.check("exact bad_lemma", None, Duration::ZERO).unwrap();
        assert!(!d.success && d.messages == vec!["unknown identifier"]);
        assert!(c.check("by simp", Some(&cfg), Duration::ZERO).unwrap().is_clean());
    }

    #[test]
    fn script_schema_is_strict() {
        assert!(Script::from_json("{}").is_ok());
        assert!(matches!(Script::from_json("{\"evaluat\": []}"), Err(OrchestratorError::SchemaError(_))));
        let s = Script::from_json("{\"evaluate\": [\"ok\", {\"error\": \"down\"}]}").unwrap();
        assert_eq!(s.evaluate[1], Scripted::Error { error: "down".into() });
    }

    #[test]
    fn empty_script_fails_first_call() {
        let (mut a, _) = mock_providers(Script::default());
        assert_eq!(a.evaluate_difficulty(&goal(), "", Duration::ZERO), Err(ProviderError::ScriptExhausted { op: "evaluate", attempt: 0 }));
    }

    #[test]
    fn zero_agent_budget_blocks_immediately() {
        let (mut a, mut c) = mock_providers(Script::default());
        let r = run(&goal(), &mut a, &mut c, Budget::new(0, 5, 5), RunOptions::default()).unwrap();
        assert!(matches!(r.outcome, Outcome::Blocked { .. }));
        assert!(r.trace.len() <= 2, "{:?}", r.trace);
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let mut t = Trace::default();
        t.push(Phase::SetUp, "set_up", Role::None, None, "ok".into());
        t.push(Phase::Evaluate, "evaluate_difficulty", Role::Agent, Some(digest("a", "b", "c")), "ok".into());
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn digest_is_length_prefixed() {
        assert_ne!(digest("ab", "c", ""), digest("a", "bc", ""));
        assert_eq!(digest("a", "b", "c").len(), 64);
    }
}
