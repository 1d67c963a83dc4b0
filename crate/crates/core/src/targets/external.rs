//! Out-of-process targets.
//!
//! The child reads one input file path per line on stdin and answers each
//! with one JSON object line on stdout:
//! `{"valid": bool, "coverage": [ids...], "note": "..."}`. If the child
//! dies or answers garbage, the execution is reported invalid with the
//! reserved crash branch `total_branches - 1` and the child is restarted.

use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::{BranchSet, ExecutionFeedback, Target};
use crate::grammar::Grammar;

struct Process {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalTarget {
    argv: Vec<String>,
    name: String,
    grammar: Grammar,
    total: u32,
    scratch: PathBuf,
    counter: AtomicU64,
    proc: Mutex<Option<Process>>,
}

impl ExternalTarget {
    /// Starts `argv`; `total_branches` must leave room for the crash id.
    pub fn new(argv: Vec<String>, grammar: Grammar, total_branches: u32) -> io::Result<Self> {
        if argv.is_empty() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty command"));
        }
        let scratch = std::env::temp_dir().join(format!("bonsai-ext-{}", std::process::id()));
        std::fs::create_dir_all(&scratch)?;
        let proc = spawn(&argv)?;
        Ok(ExternalTarget {
            name: format!("ext:{}", argv.join(" ")),
            argv,
            grammar,
            total: total_branches.max(1),
            scratch,
            counter: AtomicU64::new(0),
            proc: Mutex::new(Some(proc)),
        })
    }

    pub fn crash_branch(&self) -> u32 {
        self.total - 1
    }

    fn ask(&self, path: &std::path::Path) -> Result<ExecutionFeedback, String> {
        let mut guard = self.proc.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(spawn(&self.argv).map_err(|e| e.to_string())?);
        }
        let p = guard.as_mut().expect("process present");
        let result = (|| {
            writeln!(p.stdin, "{}", path.display()).map_err(|e| e.to_string())?;
            p.stdin.flush().map_err(|e| e.to_string())?;
            let mut line = String::new();
            if p.stdout.read_line(&mut line).map_err(|e| e.to_string())? == 0 {
                return Err("target exited".to_owned());
            }
            serde_json::from_str::<ExecutionFeedback>(&line).map_err(|e| e.to_string())
        })();
        if result.is_err() {
            *guard = None;
        }
        result
    }
}

fn spawn(argv: &[String]) -> io::Result<Process> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()?;
    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
    Ok(Process { child, stdin, stdout })
}

impl Target for ExternalTarget {
    fn name(&self) -> &str {
        &self.name
    }

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn execute(&self, input: &str) -> ExecutionFeedback {
        let k = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.scratch.join(format!("in_{k}.txt"));
        let outcome = std::fs::write(&path, input).map_err(|e| e.to_string()).and_then(|()| self.ask(&path));
        let _ = std::fs::remove_file(&path);
        match outcome {
            Ok(mut fb) => {
                let crash = self.crash_branch();
                fb.coverage = fb.coverage.iter().filter(|&id| id < crash).collect();
                fb
            }
            Err(e) => ExecutionFeedback {
                valid: false,
                coverage: BranchSet::from_iter([self.crash_branch()]),
                note: format!("crash: {e}"),
            },
        }
    }

    fn total_branches(&self) -> u32 {
        self.total
    }
}

impl Drop for ExternalTarget {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.scratch);
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    fn toy() -> Grammar {
        parse_grammar(crate::grammars::TOY).unwrap()
    }

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    #[test]
    fn speaks_the_line_protocol() {
        let script = r#"while read p; do n=$(wc -c < "$p"); echo "{\"valid\": true, \"coverage\": [$n], \"note\": \"ok\"}"; done"#;
        let t = ExternalTarget::new(sh(script), toy(), 64).unwrap();
        let fb = t.execute("pass pass");
        assert!(fb.valid);
        assert_eq!(fb.coverage.iter().collect::<Vec<_>>(), vec![9]);
        assert_eq!(t.execute("x").coverage.iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn crashes_map_to_reserved_branch() {
        let t = ExternalTarget::new(sh("read p; exit 1"), toy(), 16).unwrap();
        for _ in 0..2 {
            let fb = t.execute("pass");
            assert!(!fb.valid);
            assert_eq!(fb.coverage.iter().collect::<Vec<_>>(), vec![15]);
        }
    }

    #[test]
    fn missing_command_is_an_error() {
        assert!(ExternalTarget::new(vec!["/nonexistent/bonsai-target".into()], toy(), 8).is_err());
    }
}
