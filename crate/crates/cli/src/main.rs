//! `ogre`: turns invariant-domain proofs of Petri programs into
//! Owicki-Gries certificates and validates them.

mod run;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ogre_core::annotation::{focused_og, ghost_encoding, imperial_og, naive_og, ImperialOptions, OgAnnotation};
use ogre_core::domain::{abstract_reach, certify_domain, is_safe, InvariantDomain};
use ogre_core::empire::{build_naive_empire, build_saturated_empire, check_empire_valid, Empire};
use ogre_core::focus::compute_focus;
use ogre_core::petri::{co_marked, co_related, explore, validate_program, PetriProgram, DEFAULT_MARKING_LIMIT};
use ogre_core::solver::{SmtSession, SolverConfig};
use ogre_core::validator::{
    discharge_all, dump_vcs, generate_vcs_for, verdict_of, Mode, Report, VcOutcome, VcResult, Verdict, DEFAULT_ORACLE_BOUND,
};

use run::{Fail, Run, EXIT_OK, EXIT_REFUTED, EXIT_UNKNOWN};

#[derive(Parser, Debug)]
#[command(name = "ogre", version, about = "Owicki-Gries certificates for one-safe Petri programs")]
struct Cli {
    /// Print a machine-readable JSON object on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Write the run manifest (input/output hashes, modes, timings) here.
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Solver command line; overrides OGRE_SOLVER.
    #[arg(long, global = true, value_name = "CMD")]
    solver: Option<String>,
    /// Per-query solver timeout.
    #[arg(long, global = true, value_name = "MS")]
    timeout_ms: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural and one-safety diagnostics for a program.
    Check { program: PathBuf },
    /// Reachable markings, optionally with co-relation and co-marking.
    Reach {
        program: PathBuf,
        #[arg(long)]
        co: bool,
    },
    /// Certifies the domain's post operator and checks that it proves safety.
    DomainCheck { program: PathBuf, domain: PathBuf },
    /// Builds an empire and checks its validity conditions.
    Empire {
        program: PathBuf,
        domain: PathBuf,
        #[arg(long, value_enum, default_value_t = EmpireMode::Saturated)]
        mode: EmpireMode,
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Generates a certificate; imperial styles also write empire.json and
    /// the focused style focus.json next to the output.
    Annotate {
        program: PathBuf,
        domain: PathBuf,
        #[arg(long, value_enum, default_value_t = Style::ImperialFocused)]
        style: Style,
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Discharges every verification condition of a certificate.
    Validate {
        program: PathBuf,
        og: PathBuf,
        /// Write one SMT-LIB2 script per condition into DIR.
        #[arg(long, value_name = "DIR")]
        dump_vcs: Option<PathBuf>,
        /// Value bound of the enumerating refuter; implies `--mode both` unless a mode is given.
        #[arg(long, value_name = "N")]
        oracle_bound: Option<i64>,
        #[arg(long, value_enum)]
        mode: Option<CheckMode>,
        #[arg(long, default_value_t = 1, value_name = "N")]
        jobs: usize,
    },
    /// Size, ghost-update and ghost-variable counts of a certificate.
    Stats {
        og: PathBuf,
        /// Program the certificate annotates; supplies variable sorts.
        #[arg(long, value_name = "PATH")]
        program: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EmpireMode {
    Naive,
    Saturated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Style {
    Naive,
    Imperial,
    ImperialFocused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckMode {
    Smt,
    Oracle,
    Both,
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// What a finished command reports.
struct Outcome {
    code: u8,
    json: Value,
    text: String,
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_program(run: &mut Run, path: &Path) -> Result<PetriProgram, Fail> {
    let text = run.read(path)?;
    PetriProgram::from_json(&text).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn load_domain(run: &mut Run, path: &Path, p: &PetriProgram) -> Result<InvariantDomain, Fail> {
    let text = run.read(path)?;
    InvariantDomain::from_json(&text, p).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn load_og(run: &mut Run, path: &Path, p: &PetriProgram) -> Result<OgAnnotation, Fail> {
    let text = run.read(path)?;
    OgAnnotation::from_json(&text, p).map_err(|e| Fail::usage(format!("{}: {e}", path.display())))
}

fn session(cfg: &SolverConfig) -> Result<SmtSession, Fail> {
    Ok(SmtSession::start(cfg.clone())?)
}

fn cmd_check(run: &mut Run, program: &Path) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    let diags = run.stage("check", || validate_program(&p));
    let mut text = String::new();
    for d in &diags {
        writeln!(text, "{d}").unwrap();
    }
    if diags.is_empty() {
        writeln!(text, "ok: {} places, {} transitions", p.places.len(), p.transitions.len()).unwrap();
    }
    Ok(Outcome {
        code: if diags.is_empty() { EXIT_OK } else { EXIT_REFUTED },
        json: json!({ "ok": diags.is_empty(), "places": p.places.len(), "transitions": p.transitions.len(), "diagnostics": diags }),
        text,
    })
}

fn cmd_reach(run: &mut Run, program: &Path, co: bool) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    run.mode("co", co);
    let g = run.stage("explore", || explore(&p, DEFAULT_MARKING_LIMIT))?;
    let mut text = format!("{} reachable markings\n", g.len());
    for m in &g.markings {
        writeln!(text, "  {}", p.show_marking(m)).unwrap();
    }
    let mut out = json!({
        "count": g.len(),
        "markings": g.markings.iter().map(|m| p.marking_names(m)).collect::<Vec<_>>(),
    });
    if co {
        let rel = co_related(&p, &g);
        let cm = co_marked(&p, &g);
        let pairs: Vec<[&str; 2]> = rel.pairs().iter().map(|(a, b)| [p.place_name(*a), p.place_name(*b)]).collect();
        let marked: Vec<[&str; 2]> = cm.pairs().iter().map(|(q, t)| [p.place_name(*q), p.trans(*t).name.as_str()]).collect();
        writeln!(text, "{} co-related pairs", pairs.len()).unwrap();
        for [a, b] in &pairs {
            writeln!(text, "  {a} {b}").unwrap();
        }
        writeln!(text, "{} co-marked pairs", marked.len()).unwrap();
        for [q, t] in &marked {
            writeln!(text, "  {q} @ {t}").unwrap();
        }
        out["co_related"] = json!(pairs);
        out["co_marked"] = json!(marked
            .iter()
            .map(|[q, t]| json!({ "place": q, "transition": t }))
            .collect::<Vec<_>>());
    }
    Ok(Outcome { code: EXIT_OK, json: out, text })
}

fn cmd_domain_check(run: &mut Run, cfg: &SolverConfig, program: &Path, domain: &Path) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    let d = load_domain(run, domain, &p)?;
    let mut s = session(cfg)?;
    let cert = run.stage("certify", || certify_domain(&p, &d, &mut s));
    let reach = run.stage("abstract-reach", || abstract_reach(&p, &d, &mut s))?;
    let safety = is_safe(&p, &reach);
    let offending: Vec<Value> = safety
        .offending
        .iter()
        .map(|(m, l)| json!({ "marking": p.marking_names(m), "law": d.formula(l).to_string() }))
        .collect();
    let mut text = format!(
        "post operator: {} obligations, {} violations, {} undecided\n",
        cert.obligations,
        cert.violations.len(),
        cert.unknown.len()
    );
    for v in &cert.violations {
        writeln!(text, "  component {}: {} --{}--> {} fails", v.component, v.from, v.transition, v.to).unwrap();
    }
    writeln!(
        text,
        "safety: {} ({} abstract configurations)",
        if safety.safe { "proved" } else { "not proved" },
        reach.configs.len()
    )
    .unwrap();
    for o in &offending {
        writeln!(text, "  error marking {} carries {}", o["marking"], o["law"]).unwrap();
    }
    let code = if !cert.violations.is_empty() || !safety.safe {
        EXIT_REFUTED
    } else if !cert.unknown.is_empty() {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        code,
        json: json!({
            "certified": cert.certified(),
            "obligations": cert.obligations,
            "violations": cert.violations,
            "unknown": cert.unknown,
            "safe": safety.safe,
            "abstract_configurations": reach.configs.len(),
            "offending": offending,
        }),
        text,
    })
}

fn describe_empire(p: &PetriProgram, d: &InvariantDomain, e: &Empire) -> String {
    let mut text = String::new();
    for (q, s) in e.states.iter().enumerate() {
        writeln!(text, "  q{q} {} {}", s.territory.show(p), d.formula(&s.law)).unwrap();
    }
    for (&(q, t), &q2) in &e.edges {
        writeln!(text, "  q{q} --{}--> q{q2}", p.trans(t).name).unwrap();
    }
    text
}

fn cmd_empire(
    run: &mut Run,
    cfg: &SolverConfig,
    program: &Path,
    domain: &Path,
    mode: EmpireMode,
    output: Option<&Path>,
) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    let d = load_domain(run, domain, &p)?;
    run.mode("mode", value_name(mode));
    let mut s = session(cfg)?;
    let e = run.stage("build", || match mode {
        EmpireMode::Naive => build_naive_empire(&p, &d, &mut s),
        EmpireMode::Saturated => build_saturated_empire(&p, &d, &mut s),
    })?;
    let report = run.stage("check", || check_empire_valid(&p, &d, &e, &mut s))?;
    if let Some(path) = output {
        run.write(path, &pretty(&e.to_raw(&p, &d)))?;
    }
    let mut text = format!("{} empire: {} states, {} edges\n", value_name(mode), e.len(), e.edges.len());
    text += &describe_empire(&p, &d, &e);
    for v in &report.violations {
        writeln!(text, "violation {} at q{}: {}", v.condition, v.state, v.detail).unwrap();
    }
    for u in &report.unknown {
        writeln!(text, "undecided: {u}").unwrap();
    }
    writeln!(text, "valid: {}", report.valid()).unwrap();
    let code = if !report.violations.is_empty() {
        EXIT_REFUTED
    } else if !report.unknown.is_empty() {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        code,
        json: json!({
            "mode": value_name(mode),
            "states": e.len(),
            "edges": e.edges.len(),
            "valid": report.valid(),
            "violations": report.violations,
            "unknown": report.unknown,
            "diagnostics": e.diagnostics,
            "empire": e.to_raw(&p, &d),
        }),
        text,
    })
}

fn sibling(output: &Path, name: &str) -> PathBuf {
    output.parent().map_or_else(|| PathBuf::from(name), |d| d.join(name))
}

fn cmd_annotate(
    run: &mut Run,
    cfg: &SolverConfig,
    program: &Path,
    domain: &Path,
    style: Style,
    output: Option<&Path>,
) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    let d = load_domain(run, domain, &p)?;
    run.mode("style", value_name(style));
    let mut s = session(cfg)?;
    let opts = ImperialOptions::default();
    let mut extra: Vec<(PathBuf, String)> = Vec::new();
    let og = match style {
        Style::Naive => run.stage("annotate", || naive_og(&p, &d, &mut s))?,
        Style::Imperial | Style::ImperialFocused => {
            let e = run.stage("empire", || build_saturated_empire(&p, &d, &mut s))?;
            let report = run.stage("empire-check", || check_empire_valid(&p, &d, &e, &mut s))?;
            if !report.valid() {
                return Err(if report.violations.is_empty() {
                    Fail::unknown(format!("empire validity undecided: {:?}", report.unknown))
                } else {
                    Fail::refuted(format!("empire violates {}", report.violations[0].condition))
                });
            }
            let og = if style == Style::Imperial {
                run.stage("annotate", || imperial_og(&p, &d, &e, opts))?
            } else {
                let f = run.stage("focus", || compute_focus(&p, &d, &e, &mut s))?;
                let og = run.stage("annotate", || focused_og(&p, &d, &e, &f, opts, &mut s))?;
                if let Some(out) = output {
                    extra.push((sibling(out, "focus.json"), pretty(&f.to_raw(&p, &e))));
                }
                og
            };
            if let Some(out) = output {
                let mut raw = e.to_raw(&p, &d);
                raw.ghost_values = Some(ghost_encoding(&p, &e, opts.share_ghost_values)?.iter().map(|v| *v as i64).collect());
                extra.insert(0, (sibling(out, "empire.json"), pretty(&raw)));
            }
            og
        }
    };
    let og_text = og.to_json(&p) + "\n";
    let m = og.metrics();
    let mut text = format!(
        "{} certificate: size {}, {} ghost updates, {} ghost variables\n",
        value_name(style),
        m.size,
        m.ghost_updates,
        m.ghost_vars
    );
    let mut files = Vec::new();
    if let Some(out) = output {
        run.write(out, &og_text)?;
        files.push(out.display().to_string());
        for (path, content) in &extra {
            run.write(path, content)?;
            files.push(path.display().to_string());
        }
        for f in &files {
            writeln!(text, "wrote {f}").unwrap();
        }
    } else if !run_json_mode() {
        text += &og_text;
    }
    Ok(Outcome {
        code: EXIT_OK,
        json: json!({
            "style": value_name(style),
            "metrics": m,
            "files": files,
            "og": og.to_raw(&p),
        }),
        text,
    })
}

/// Set once from the parsed flags before any command runs.
static JSON_MODE: std::sync::OnceLock<bool> = std::sync::OnceLock::new();

fn run_json_mode() -> bool {
    JSON_MODE.get().copied().unwrap_or(false)
}

struct ValidateArgs<'a> {
    program: &'a Path,
    og: &'a Path,
    dump_vcs: Option<&'a Path>,
    oracle_bound: Option<i64>,
    mode: Option<CheckMode>,
    jobs: usize,
}

fn cmd_validate(run: &mut Run, cfg: &SolverConfig, a: ValidateArgs) -> Result<Outcome, Fail> {
    let p = load_program(run, a.program)?;
    let og = load_og(run, a.og, &p)?;
    let bound = a.oracle_bound.unwrap_or(DEFAULT_ORACLE_BOUND);
    if bound < 0 {
        return Err(Fail::usage("--oracle-bound must be non-negative"));
    }
    let mode = match a.mode.unwrap_or(if a.oracle_bound.is_some() { CheckMode::Both } else { CheckMode::Smt }) {
        CheckMode::Smt => Mode::Smt,
        CheckMode::Oracle => Mode::Oracle { bound },
        CheckMode::Both => Mode::Both { bound },
    };
    match mode {
        Mode::Smt => run.mode("mode", "smt"),
        Mode::Oracle { bound } => run.mode("mode", format!("oracle({bound})")),
        Mode::Both { bound } => run.mode("mode", format!("both({bound})")),
    }
    run.mode("jobs", a.jobs.max(1));
    let vcs = run.stage("generate", || generate_vcs_for(&p, &og)).map_err(Fail::usage)?;
    if let Some(dir) = a.dump_vcs {
        dump_vcs(&vcs, dir).map_err(Fail::usage)?;
        for vc in &vcs {
            let path = dir.join(format!("{}.smt2", vc.name()));
            let bytes = std::fs::read(&path).map_err(|e| Fail::usage(format!("cannot read back {}: {e}", path.display())))?;
            run.record_output(&path, &bytes);
        }
    }
    let start = std::time::Instant::now();
    let results = run.stage("discharge", || discharge_all(&vcs, &p, &og, mode, cfg, a.jobs));
    let report = Report {
        verdict: verdict_of(&results),
        vcs: vcs
            .iter()
            .zip(results)
            .map(|(vc, result)| VcOutcome {
                name: vc.name(),
                kind: vc.kind,
                result,
            })
            .collect(),
        timing_ms: start.elapsed().as_millis(),
    };
    let mut text = format!("verdict: {} ({} conditions, {} ms)\n", report.verdict, report.vcs.len(), report.timing_ms);
    for v in &report.vcs {
        match &v.result {
            VcResult::Sat { model } => {
                let shown: Vec<String> = model.iter().map(|(k, x)| format!("{k}={x}")).collect();
                writeln!(text, "  {} refuted: {}", v.name, shown.join(" ")).unwrap();
            }
            VcResult::Unknown { reason } => writeln!(text, "  {} unknown: {reason}", v.name).unwrap(),
            _ => {}
        }
    }
    let code = match report.verdict {
        Verdict::Valid | Verdict::BoundedValid => EXIT_OK,
        Verdict::Invalid => EXIT_REFUTED,
        Verdict::Unknown => EXIT_UNKNOWN,
    };
    Ok(Outcome {
        code,
        json: serde_json::to_value(&report).expect("serializable"),
        text,
    })
}

fn cmd_stats(run: &mut Run, og_path: &Path, program: &Path) -> Result<Outcome, Fail> {
    let p = load_program(run, program)?;
    let og = load_og(run, og_path, &p)?;
    let m = og.metrics();
    Ok(Outcome {
        code: EXIT_OK,
        json: json!(m),
        text: format!("size {}\nghost_updates {}\nghost_vars {}\n", m.size, m.ghost_updates, m.ghost_vars),
    })
}

fn execute(cli: &Cli, run: &mut Run) -> Result<Outcome, Fail> {
    let cfg = SolverConfig::resolve(cli.solver.as_deref(), cli.timeout_ms);
    match &cli.command {
        Command::Check { program } => cmd_check(run, program),
        Command::Reach { program, co } => cmd_reach(run, program, *co),
        Command::DomainCheck { program, domain } => cmd_domain_check(run, &cfg, program, domain),
        Command::Empire { program, domain, mode, output } => cmd_empire(run, &cfg, program, domain, *mode, output.as_deref()),
        Command::Annotate { program, domain, style, output } => cmd_annotate(run, &cfg, program, domain, *style, output.as_deref()),
        Command::Validate {
            program,
            og,
            dump_vcs,
            oracle_bound,
            mode,
            jobs,
        } => cmd_validate(
            run,
            &cfg,
            ValidateArgs {
                program,
                og,
                dump_vcs: dump_vcs.as_deref(),
                oracle_bound: *oracle_bound,
                mode: *mode,
                jobs: *jobs,
            },
        ),
        Command::Stats { og, program } => cmd_stats(run, og, program),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check { .. } => "check",
        Command::Reach { .. } => "reach",
        Command::DomainCheck { .. } => "domain-check",
        Command::Empire { .. } => "empire",
        Command::Annotate { .. } => "annotate",
        Command::Validate { .. } => "validate",
        Command::Stats { .. } => "stats",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { run::EXIT_USAGE } else { EXIT_OK });
        }
    };
    JSON_MODE.set(cli.json).expect("set once");
    let mut run = Run::new(command_name(&cli.command));
    let code = match execute(&cli, &mut run) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            } else {
                print!("{}", out.text);
            }
            out.code
        }
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "error": f.message, "exit_code": f.code }));
            }
            eprintln!("ogre: {}", f.message);
            f.code
        }
    };
    run.manifest.exit_code = code;
    if let Some(path) = &cli.manifest {
        if let Err(e) = std::fs::write(path, serde_json::to_string_pretty(&run.manifest).expect("serializable") + "\n") {
            eprintln!("ogre: cannot write manifest {}: {e}", path.display());
            return ExitCode::from(run::EXIT_USAGE);
        }
    }
    ExitCode::from(code)
}
