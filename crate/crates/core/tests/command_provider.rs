#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proofspace::orchestrator::{run, AgentProvider, CheckerProvider, CommandProvider, ProviderError, RunOptions};
use proofspace::{Budget, Goal, Outcome, Phase};

const AGENT: &str = r#"#!/bin/sh
req=$(cat)
case "$req" in
  *'"op":"evaluate_difficulty"'*) printf '%s\n' '{"ok":"easy"}' ;;
  *'"op":"draft_informal"'*) printf '%s\n' '{"ok":"evaluate both sides"}' ;;
  *'"op":"decompose"'*) printf '%s\n' '{"ok":["compute"]}' ;;
  *'"op":"scaffold"'*) printf '%s\n' '{"ok":"theorem t : 2 + 2 = 4 := by\n  sorry"}' ;;
  *'"op":"fill_placeholder"'*) printf '%s\n' '{"ok":"norm_num"}' ;;
  *) printf '%s\n' '{"error":"unknown op"}' ;;
esac
"#;

const CHECKER: &str = r#"#!/bin/sh
req=$(cat)
case "$req" in
  *sorry*) printf '%s\n' '{"ok":{"success":true,"unresolved_placeholders":1}}' ;;
  *) printf '%s\n' '{"ok":{"success":true}}' ;;
esac
"#;

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

#[test]
fn external_providers_drive_a_run_to_solved() {
    let dir = tempfile::tempdir().unwrap();
    let mut agent = CommandProvider::new(script(dir.path(), "agent.sh", AGENT), Vec::new());
    let mut checker = CommandProvider::new(script(dir.path(), "checker.sh", CHECKER), Vec::new());
    let goal = Goal::new("theorem t : 2 + 2 = 4").unwrap();
    let opts = RunOptions { call_deadline: Duration::from_secs(20), ..RunOptions::default() };
    let report = run(&goal, &mut agent, &mut checker, Budget::default(), opts).unwrap();
    assert_eq!(report.outcome, Outcome::Solved { lean_text: "theorem t : 2 + 2 = 4 := by\n  norm_num".into() });
    assert_eq!(report.trace.phase_sequence().last(), Some(&Phase::Solved));
}

#[test]
fn slow_provider_is_killed_at_the_deadline() {
    let dir = tempfile::tempdir().unwrap();
    let mut slow = CommandProvider::new(script(dir.path(), "slow.sh", "#!/bin/sh\nsleep 10\n"), Vec::new());
    let start = Instant::now();
    let r = slow.check("x", None, Duration::from_millis(200));
    assert!(matches!(r, Err(ProviderError::Deadline(_))), "{r:?}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn error_responses_and_garbage_are_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut failing = CommandProvider::new(script(dir.path(), "fail.sh", "#!/bin/sh\ncat >/dev/null\necho '{\"error\":\"no idea\"}'\n"), Vec::new());
    assert_eq!(failing.decompose("x", Duration::from_secs(20)), Err(ProviderError::Failure("no idea".into())));
    let mut garbage = CommandProvider::new(script(dir.path(), "garbage.sh", "#!/bin/sh\ncat >/dev/null\necho not json\n"), Vec::new());
    assert!(matches!(garbage.decompose("x", Duration::from_secs(20)), Err(ProviderError::Failure(_))));
    let mut missing = CommandProvider::new(dir.path().join("absent"), Vec::new());
    assert!(matches!(missing.decompose("x", Duration::from_secs(20)), Err(ProviderError::Failure(_))));
}
