//! SMT-LIB2 client for an external solver process.
//!
//! Each query runs inside a `(push 1)`/`(pop 1)` frame, so declarations and
//! assertions never leak between queries. When a query needs a different
//! logic than the one the process was configured with, the session issues
//! `(reset)` and reconfigures. Every exchange ends with an `(echo ...)`
//! marker so the reader always knows where an answer stops.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::logic::{Kind, Op, Sort, Term, Valuation, Value};

pub const DEFAULT_COMMAND: &str = "z3 -in";
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const SOLVER_ENV: &str = "OGRE_SOLVER";
/// Extra wall-clock time granted on top of the solver-side timeout before
/// the process is killed.
const WATCHDOG_GRACE_MS: u64 = 2_000;
const SYNC: &str = "ogre-sync";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver command is empty")]
    EmptyCommand,
    #[error("cannot start solver `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not answer the handshake: {0}")]
    Handshake(String),
}

/// How to start the solver and how long a query may take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub command: String,
    pub timeout_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: DEFAULT_COMMAND.to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

impl SolverConfig {
    /// Command precedence: explicit flag, then `OGRE_SOLVER`, then the default.
    pub fn resolve(flag: Option<&str>, timeout_ms: Option<u64>) -> SolverConfig {
        let command = flag
            .map(str::to_string)
            .or_else(|| std::env::var(SOLVER_ENV).ok().filter(|s| !s.trim().is_empty()))
            .unwrap_or_else(|| DEFAULT_COMMAND.to_string());
        SolverConfig {
            command,
            timeout_ms: timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS).max(1),
        }
    }
}

/// A closed satisfiability query.
#[derive(Debug, Clone, Default)]
pub struct Query {
    pub decls: Vec<(String, Sort)>,
    pub assertions: Vec<Term>,
}

impl Query {
    /// Declares every free variable of the assertions, in name order.
    pub fn from_assertions(assertions: Vec<Term>) -> Query {
        let mut vars = std::collections::BTreeSet::new();
        for a in &assertions {
            vars.extend(a.free_vars());
        }
        Query {
            decls: vars.into_iter().collect(),
            assertions,
        }
    }

    pub fn logic(&self) -> &'static str {
        if self.assertions.iter().any(is_nonlinear) {
            "QF_NIA"
        } else {
            "QF_LIA"
        }
    }

    /// The query as a standalone script ending in `(check-sat)`.
    pub fn to_script(&self) -> String {
        let mut s = format!("(set-logic {})\n", self.logic());
        self.write_body(&mut s);
        s.push_str("(check-sat)\n");
        s
    }

    fn write_body(&self, s: &mut String) {
        for (name, sort) in &self.decls {
            s.push_str(&format!("(declare-fun {name} () {sort})\n"));
        }
        for a in &self.assertions {
            s.push_str(&format!("(assert {a})\n"));
        }
    }
}

/// True when the term leaves linear integer arithmetic.
pub fn is_nonlinear(t: &Term) -> bool {
    t.post_order().iter().any(|n| match n.kind() {
        Kind::App(Op::Mul, cs) => cs.iter().filter(|c| c.as_int().is_none()).count() > 1,
        Kind::App(Op::Div | Op::Mod, cs) => cs[1].as_int().is_none(),
        _ => false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

pub trait Solver {
    fn check(&mut self, q: &Query) -> SatResult;
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    logic: Option<&'static str>,
    pending_pop: bool,
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A solver process plus the bookkeeping needed to reuse it across queries.
pub struct SmtSession {
    config: SolverConfig,
    proc: Option<Running>,
    sync_counter: u64,
    queries: u64,
}

impl SmtSession {
    /// Starts the solver immediately so that spawn failures surface here.
    pub fn start(config: SolverConfig) -> Result<SmtSession, SolverError> {
        let mut s = SmtSession {
            config,
            proc: None,
            sync_counter: 0,
            queries: 0,
        };
        s.spawn()?;
        Ok(s)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn spawn(&mut self) -> Result<(), SolverError> {
        let mut parts = self.config.command.split_whitespace();
        let program = parts.next().ok_or(SolverError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                command: self.config.command.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        self.proc = Some(Running {
            child,
            stdin,
            lines: rx,
            logic: None,
            pending_pop: false,
        });
        // Handshake: the solver must echo back before we trust it.
        self.exchange("")
            .map(|_| ())
            .map_err(|e| {
                self.proc = None;
                SolverError::Handshake(e)
            })
    }

    fn kill(&mut self) {
        self.proc = None;
    }

    /// Sends `commands` followed by a sync marker; returns the lines the
    /// solver printed before the marker.
    fn exchange(&mut self, commands: &str) -> Result<Vec<String>, String> {
        self.sync_counter += 1;
        let marker = format!("{SYNC}-{}", self.sync_counter);
        let deadline = Duration::from_millis(self.config.timeout_ms + WATCHDOG_GRACE_MS);
        let proc = self.proc.as_mut().ok_or("solver not running")?;
        let payload = format!("{commands}(echo \"{marker}\")\n");
        proc.stdin
            .write_all(payload.as_bytes())
            .and_then(|_| proc.stdin.flush())
            .map_err(|e| format!("write to solver failed: {e}"))?;
        let start = Instant::now();
        let mut out = Vec::new();
        loop {
            let left = deadline.saturating_sub(start.elapsed());
            match proc.lines.recv_timeout(left) {
                Ok(line) => {
                    let l = line.trim();
                    if l == marker || l == format!("\"{marker}\"") {
                        return Ok(out);
                    }
                    if !l.is_empty() {
                        out.push(l.to_string());
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err("solver timed out".into()),
                Err(RecvTimeoutError::Disconnected) => return Err("solver process exited".into()),
            }
        }
    }

    fn ensure_running(&mut self) -> Result<(), String> {
        if self.proc.is_none() {
            self.spawn().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn configure(&mut self, logic: &'static str) -> String {
        let proc = self.proc.as_mut().expect("running");
        let mut pre = String::new();
        if proc.pending_pop {
            pre.push_str("(pop 1)\n");
            proc.pending_pop = false;
        }
        if proc.logic != Some(logic) {
            if proc.logic.is_some() {
                pre.push_str("(reset)\n");
            }
            pre.push_str("(set-option :print-success false)\n(set-option :produce-models true)\n");
            pre.push_str(&format!("(set-option :timeout {})\n", self.config.timeout_ms));
            pre.push_str(&format!("(set-logic {logic})\n"));
            proc.logic = Some(logic);
        }
        pre
    }

    fn run_query(&mut self, q: &Query) -> Result<SatResult, String> {
        self.ensure_running()?;
        let mut script = self.configure(q.logic());
        script.push_str("(push 1)\n");
        q.write_body(&mut script);
        script.push_str("(check-sat)\n");
        self.proc.as_mut().expect("running").pending_pop = true;
        let lines = self.exchange(&script)?;
        let answer = answer_line(&lines)?;
        match answer.as_str() {
            "unsat" => Ok(SatResult::Unsat),
            "unknown" => {
                let reason = self
                    .exchange("(get-info :reason-unknown)\n")
                    .map(|l| l.join(" "))
                    .unwrap_or_default();
                Ok(SatResult::Unknown(format!("solver returned unknown {reason}").trim().to_string()))
            }
            "sat" => {
                if q.decls.is_empty() {
                    return Ok(SatResult::Sat(Valuation::new()));
                }
                let names: Vec<&str> = q.decls.iter().map(|(n, _)| n.as_str()).collect();
                let lines = self.exchange(&format!("(get-value ({}))\n", names.join(" ")))?;
                if let Some(e) = lines.iter().find(|l| l.starts_with("(error")) {
                    return Err(format!("model query failed: {e}"));
                }
                let model = parse_model(&lines.join(" "), &q.decls)?;
                Ok(SatResult::Sat(model))
            }
            other => Err(format!("unexpected solver answer `{other}`")),
        }
    }
}

fn answer_line(lines: &[String]) -> Result<String, String> {
    if let Some(e) = lines.iter().find(|l| l.starts_with("(error")) {
        return Err(format!("solver error: {e}"));
    }
    lines
        .iter()
        .rev()
        .find(|l| matches!(l.as_str(), "sat" | "unsat" | "unknown"))
        .cloned()
        .ok_or_else(|| format!("no check-sat answer in {lines:?}"))
}

impl Solver for SmtSession {
    fn check(&mut self, q: &Query) -> SatResult {
        self.queries += 1;
        match self.run_query(q) {
            Ok(r) => r,
            Err(reason) => {
                // State of the process is unknown after a failure; start fresh next time.
                log::warn!("solver failure: {reason}");
                self.kill();
                SatResult::Unknown(reason)
            }
        }
    }
}

/// Runs `body` with a fresh session; the process is reaped even if `body`
/// panics.
pub fn with_session<R>(
    config: &SolverConfig,
    body: impl FnOnce(&mut SmtSession) -> R,
) -> Result<R, SolverError> {
    let mut s = SmtSession::start(config.clone())?;
    Ok(body(&mut s))
}

#[derive(Debug)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexp(text: &str) -> Result<Sexp, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut atom = String::new();
    let flush = |atom: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !atom.is_empty() {
            stack.last_mut().expect("stack").push(Sexp::Atom(std::mem::take(atom)));
        }
    };
    for c in text.chars() {
        match c {
            '(' => {
                flush(&mut atom, &mut stack);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut atom, &mut stack);
                let done = stack.pop().ok_or("unbalanced model")?;
                stack.last_mut().ok_or("unbalanced model")?.push(Sexp::List(done));
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack);
    let mut top = stack.pop().ok_or("unbalanced model")?;
    if !stack.is_empty() || top.len() != 1 {
        return Err(format!("malformed model `{text}`"));
    }
    Ok(top.remove(0))
}

fn sexp_value(e: &Sexp, sort: Sort) -> Result<Value, String> {
    match (e, sort) {
        (Sexp::Atom(a), Sort::Bool) => match a.as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("bad Bool value `{a}`")),
        },
        (Sexp::Atom(a), Sort::Int) => a.parse().map(Value::Int).map_err(|_| format!("bad Int value `{a}`")),
        (Sexp::List(xs), Sort::Int) => match xs.as_slice() {
            [Sexp::Atom(m), inner] if m == "-" => match sexp_value(inner, Sort::Int)? {
                Value::Int(v) => Ok(Value::Int(-v)),
                _ => unreachable!(),
            },
            _ => Err("unsupported Int value shape".into()),
        },
        _ => Err("unsupported value shape".into()),
    }
}

fn parse_model(text: &str, decls: &[(String, Sort)]) -> Result<Valuation, String> {
    let Sexp::List(pairs) = parse_sexp(text)? else {
        return Err(format!("malformed model `{text}`"));
    };
    let mut val = Valuation::new();
    for p in &pairs {
        match p {
            Sexp::List(kv) if kv.len() == 2 => {
                let Sexp::Atom(name) = &kv[0] else {
                    return Err("model key is not a symbol".into());
                };
                let sort = decls
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, s)| *s)
                    .ok_or_else(|| format!("model mentions undeclared `{name}`"))?;
                val.insert(name.clone(), sexp_value(&kv[1], sort)?);
            }
            _ => return Err("malformed model entry".into()),
        }
    }
    if val.len() != decls.len() {
        return Err("model is missing declared constants".into());
    }
    Ok(val)
}

/// True when a solver binary can be started with the resolved configuration.
pub fn solver_available(config: &SolverConfig) -> bool {
    SmtSession::start(config.clone()).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, Decls};

    fn session() -> Option<SmtSession> {
        SmtSession::start(SolverConfig::resolve(None, None)).ok()
    }

    fn decls() -> Decls {
        [("x".to_string(), Sort::Int), ("z".to_string(), Sort::Int)].into_iter().collect()
    }

    #[test]
    fn model_parsing() {
        let d = vec![("x".to_string(), Sort::Int), ("b".to_string(), Sort::Bool)];
        let m = parse_model("((x (- 3)) (b true))", &d).unwrap();
        assert_eq!(m["x"], Value::Int(-3));
        assert_eq!(m["b"], Value::Bool(true));
        assert!(parse_model("((x 1)", &d).is_err());
        assert!(parse_model("((x 1))", &d).is_err());
    }

    #[test]
    fn logic_detection() {
        let d = decls();
        assert!(!is_nonlinear(&parse_formula("(> (* 2 x) (div x 3))", &d).unwrap()));
        assert!(is_nonlinear(&parse_formula("(> (div z x) 0)", &d).unwrap()));
        assert!(is_nonlinear(&parse_formula("(> (* z x) 0)", &d).unwrap()));
    }

    #[test]
    fn sat_unsat_and_isolation() {
        let Some(mut s) = session() else {
            eprintln!("solver unavailable; skipping");
            return;
        };
        let d = decls();
        let unsat = Query::from_assertions(vec![parse_formula("(and (> x 0) (< x 1))", &d).unwrap()]);
        assert_eq!(s.check(&unsat), SatResult::Unsat);
        let sat = Query::from_assertions(vec![parse_formula("(> x 0)", &d).unwrap()]);
        match s.check(&sat) {
            SatResult::Sat(m) => assert!(m["x"].as_int().unwrap() >= 1),
            other => panic!("{other:?}"),
        }
        // A nonlinear query forces a logic switch, then back.
        let nl = Query::from_assertions(vec![parse_formula("(and (> x 0) (= (div z x) 3) (= z 7))", &d).unwrap()]);
        assert!(matches!(s.check(&nl), SatResult::Sat(_)));
        assert_eq!(s.check(&unsat), SatResult::Unsat);
        // Order does not matter: the second query sees none of the first's assertions.
        let neg = Query::from_assertions(vec![parse_formula("(< x 0)", &d).unwrap()]);
        assert!(matches!(s.check(&neg), SatResult::Sat(_)));
    }

    #[test]
    fn missing_solver_fails_at_start() {
        let cfg = SolverConfig {
            command: "/nonexistent/solver-binary".into(),
            timeout_ms: 100,
        };
        assert!(matches!(SmtSession::start(cfg), Err(SolverError::Spawn { .. })));
        assert!(matches!(
            SmtSession::start(SolverConfig { command: " ".into(), timeout_ms: 1 }),
            Err(SolverError::EmptyCommand)
        ));
    }

    #[test]
    fn dead_process_yields_unknown() {
        let Some(mut s) = session() else { return };
        s.proc.as_mut().unwrap().child.kill().unwrap();
        let q = Query::from_assertions(vec![parse_formula("(> x 0)", &decls()).unwrap()]);
        assert!(matches!(s.check(&q), SatResult::Unknown(_)));
        // The next query respawns.
        assert!(matches!(s.check(&q), SatResult::Sat(_)));
    }

    #[test]
    fn with_session_reaps_on_panic() {
        if session().is_none() {
            return;
        }
        let r = std::panic::catch_unwind(|| {
            with_session(&SolverConfig::default(), |_s| panic!("body failed")).unwrap();
        });
        assert!(r.is_err());
    }
}
