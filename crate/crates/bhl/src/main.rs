//! Command-line front end: execute programs over scenarios, compute
//! p-values, generate weakest preconditions and verification conditions,
//! model-check formulas, and check proof scripts.
//!
//! Exit codes: 0 on success (program ran, formula valid, proof accepted);
//! 1 on a negative verdict (counterexample or rejected proof); 2 on usage,
//! parse, or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser as ClapParser, Subcommand, ValueEnum};
use serde_json::json;

use bhl::examples::EXAMPLES;
use bhl::kripke::{build_model, check_valid, judgment_holds, JudgmentVerdict, Verdict};
use bhl::proof::script::parse_proof_script;
use bhl::proof::{check_proof, ProofVerdict};
use bhl::scenario::{parse_scenario, Scenario};
use bhl::semantics::{run, run_canonical, trace, RunResult};
use bhl::stats::{p_value, TestDef};
use bhl::syntax::parser::{parse_formula_text, parse_program_file};
use bhl::syntax::Tail;
use bhl::wp::{vc_gen, weakest_pre};

#[derive(ClapParser)]
#[command(name = "bhl", version, about = "Verifier toolkit for statistical hypothesis testing programs")]
struct Cli {
    /// Execution step budget for runs and model construction.
    #[arg(long, global = true, env = "BHL_BUDGET", default_value_t = 1_000_000)]
    budget: u64,
    /// Override the scenario's sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Which interleavings of `||` to explore.
    #[arg(long, global = true, value_enum, default_value_t = Interleavings::All)]
    interleavings: Interleavings,
    /// Override the bound for integer-variable interpretations.
    #[arg(long, global = true)]
    int_bound: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print full world traces where applicable.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Interleavings {
    /// Left-first sequentialization only.
    Canonical,
    /// Exhaustive interleaving of parallel components.
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    JsonLike,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a program over a scenario's initial worlds.
    Run {
        /// Program file; defaults to the scenario's own program block.
        program: Option<PathBuf>,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Compute a p-value for a test over CSV datasets (one real per line).
    Pvalue {
        /// Test kind; currently `ztest2` (two-sample Z).
        #[arg(long)]
        test: String,
        /// Comma-separated CSV paths, one per dataset component.
        #[arg(long, value_delimiter = ',')]
        data: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = TailArg::Two)]
        tail: TailArg,
    },
    /// Print the weakest precondition of a program for a postcondition.
    Wp {
        program: PathBuf,
        #[arg(long)]
        post: String,
    },
    /// Generate verification conditions for {pre} program {post}.
    Vc {
        program: PathBuf,
        #[arg(long, default_value = "true")]
        pre: String,
        #[arg(long)]
        post: String,
    },
    /// Check a formula, or a {pre} program {post} judgment, on a scenario's model.
    ModelCheck {
        scenario: PathBuf,
        #[arg(long, conflicts_with_all = ["pre", "post"])]
        formula: Option<String>,
        /// With --post: check the judgment over the scenario's program.
        #[arg(long, requires = "post")]
        pre: Option<String>,
        #[arg(long)]
        post: Option<String>,
    },
    /// Check a proof script, optionally against a scenario for semantic side conditions.
    CheckProof {
        script: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Write the bundled example files into a directory.
    Examples {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TailArg {
    Two,
    Upper,
    Lower,
}

impl From<TailArg> for Tail {
    fn from(t: TailArg) -> Tail {
        match t {
            TailArg::Two => Tail::Two,
            TailArg::Upper => Tail::Upper,
            TailArg::Lower => Tail::Lower,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Twelve significant digits, enough to pin the Monte-Carlo kernels.
fn fmt_real(x: f64) -> String {
    format!("{x:.12}")
}

fn read_to_string(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_csv(path: &Path) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse::<f64>()
                .map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

fn load_scenario(cli: &Cli, path: &Path) -> Result<Scenario, String> {
    let mut s = parse_scenario(&read_to_string(path)?).map_err(|e| e.to_string())?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(b) = cli.int_bound {
        s.decls.int_bound = Some(b);
    }
    Ok(s)
}

fn dispatch(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.cmd {
        Cmd::Run { program, scenario } => cmd_run(cli, program.as_deref(), scenario),
        Cmd::Pvalue {
            test,
            data,
            sigma,
            tail,
        } => cmd_pvalue(cli, test, data, *sigma, *tail),
        Cmd::Wp { program, post } => cmd_wp(cli, program, post),
        Cmd::Vc { program, pre, post } => cmd_vc(cli, program, pre, post),
        Cmd::ModelCheck {
            scenario,
            formula,
            pre,
            post,
        } => cmd_model_check(cli, scenario, formula.as_deref(), pre.as_deref(), post.as_deref()),
        Cmd::CheckProof { script, scenario } => cmd_check_proof(cli, script, scenario.as_deref()),
        Cmd::Examples { dir } => cmd_examples(dir),
    }
}

fn cmd_run(cli: &Cli, program: Option<&Path>, scenario: &Path) -> Result<ExitCode, String> {
    let scn = load_scenario(cli, scenario)?;
    let (decls, prog) = match program {
        Some(p) => {
            let pf = parse_program_file(&read_to_string(p)?).map_err(|e| e.to_string())?;
            // run over the scenario's worlds, but with the program's pairs
            // registered so history counters resolve
            let mut decls = scn.decls.clone();
            for (d, t) in &pf.decls.pairs {
                decls.add_pair(d.clone(), t.clone());
            }
            (decls, pf.program)
        }
        None => match &scn.program {
            Some(c) => (scn.decls.clone(), c.clone()),
            None => return Err("scenario has no program block; pass a program file".into()),
        },
    };
    let worlds = scn.initial_worlds().map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for (i, w) in worlds.iter().enumerate() {
        let RunResult {
            finals,
            exhausted,
            warnings,
        } = match cli.interleavings {
            Interleavings::Canonical => run_canonical(&decls, &prog, w, cli.budget),
            Interleavings::All => run(&decls, &prog, w, cli.budget),
        }
        .map_err(|e| e.to_string())?;
        report.push((i, finals, exhausted, warnings));
    }
    match cli.format {
        Format::Text => {
            for (i, finals, exhausted, warnings) in &report {
                println!("world {i}: {} final(s){}", finals.len(), if *exhausted { " [budget exhausted]" } else { "" });
                for w in warnings {
                    println!("  warning: {w}");
                }
                if cli.trace {
                    for f in finals {
                        println!("{}", indent(&trace(f), 2));
                    }
                }
            }
        }
        Format::JsonLike => {
            let doc = json!({
                "command": "run",
                "worlds": report.iter().map(|(i, finals, exhausted, warnings)| json!({
                    "world": i,
                    "finals": finals.iter().map(|f| trace(f)).collect::<Vec<_>>(),
                    "exhausted": exhausted,
                    "warnings": warnings,
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pvalue(
    cli: &Cli,
    test: &str,
    data: &[PathBuf],
    sigma: f64,
    tail: TailArg,
) -> Result<ExitCode, String> {
    if test != "ztest2" {
        return Err(format!("unsupported test kind `{test}` (expected `ztest2`)"));
    }
    if data.len() != 2 {
        return Err(format!("ztest2 needs 2 datasets, got {}", data.len()));
    }
    let datasets: Vec<Vec<f64>> = data
        .iter()
        .map(|p| read_csv(p))
        .collect::<Result<_, _>>()?;
    let def = TestDef::Z {
        sigma,
        tail: tail.into(),
    };
    let p = p_value(&def, &datasets).map_err(|e| e.to_string())?;
    match cli.format {
        Format::Text => println!("p = {}", fmt_real(p.value)),
        Format::JsonLike => {
            let doc = json!({
                "command": "pvalue",
                "p": p.value,
                "stderr": p.stderr,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_wp(cli: &Cli, program: &Path, post: &str) -> Result<ExitCode, String> {
    let pf = parse_program_file(&read_to_string(program)?).map_err(|e| e.to_string())?;
    let phi = parse_formula_text(post, &pf.decls).map_err(|e| e.to_string())?;
    let wp = weakest_pre(&pf.decls, &pf.program, &phi).map_err(|e| e.to_string())?;
    match cli.format {
        Format::Text => println!("{wp}"),
        Format::JsonLike => {
            let doc = json!({ "command": "wp", "wp": wp.to_string() });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_vc(cli: &Cli, program: &Path, pre: &str, post: &str) -> Result<ExitCode, String> {
    let pf = parse_program_file(&read_to_string(program)?).map_err(|e| e.to_string())?;
    let psi = parse_formula_text(pre, &pf.decls).map_err(|e| e.to_string())?;
    let phi = parse_formula_text(post, &pf.decls).map_err(|e| e.to_string())?;
    let vcs = vc_gen(&pf.decls, &pf.program, &psi, &phi).map_err(|e| e.to_string())?;
    match cli.format {
        Format::Text => {
            for (name, f) in &vcs.obligations {
                println!("{name}: {f}");
            }
        }
        Format::JsonLike => {
            let doc = json!({
                "command": "vc",
                "wp": vcs.wp.to_string(),
                "obligations": vcs.obligations.iter()
                    .map(|(n, f)| json!({ "name": n, "formula": f.to_string() }))
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_model_check(
    cli: &Cli,
    scenario: &Path,
    formula: Option<&str>,
    pre: Option<&str>,
    post: Option<&str>,
) -> Result<ExitCode, String> {
    let scn = load_scenario(cli, scenario)?;
    let model = build_model(&scn, cli.budget).map_err(|e| e.to_string())?;
    if let Some(src) = formula {
        let f = parse_formula_text(src, &model.decls).map_err(|e| e.to_string())?;
        return match check_valid(&model, &f).map_err(|e| e.to_string())? {
            Verdict::Valid => {
                emit_verdict(cli, "model-check", "valid", None);
                Ok(ExitCode::SUCCESS)
            }
            Verdict::Counterexample { world, interp } => {
                let detail = format!(
                    "world {world}{}{}",
                    if interp.is_empty() { String::new() } else { format!(" under {interp:?}") },
                    if cli.trace { format!("\n{}", trace(&model.worlds[world])) } else { String::new() }
                );
                emit_verdict(cli, "model-check", "counterexample", Some(&detail));
                Ok(ExitCode::from(1))
            }
        };
    }
    let post = post.ok_or("pass --formula, or --post (with optional --pre)")?;
    let prog = scn
        .program
        .clone()
        .ok_or("judgment checking needs a scenario with a program block")?;
    let psi = match pre {
        Some(s) => parse_formula_text(s, &model.decls).map_err(|e| e.to_string())?,
        None => bhl::syntax::Formula::Bool(true),
    };
    let phi = parse_formula_text(post, &model.decls).map_err(|e| e.to_string())?;
    let res = judgment_holds(&model, &psi, &prog, &phi, cli.budget).map_err(|e| e.to_string())?;
    match res.verdict {
        JudgmentVerdict::Holds => {
            emit_verdict(cli, "model-check", "holds", None);
            Ok(ExitCode::SUCCESS)
        }
        JudgmentVerdict::Counterexample { world, trace: t } => {
            let detail = format!("final world {world}\n{t}");
            emit_verdict(cli, "model-check", "counterexample", Some(&detail));
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_check_proof(cli: &Cli, script: &Path, scenario: Option<&Path>) -> Result<ExitCode, String> {
    let sc = parse_proof_script(&read_to_string(script)?).map_err(|e| e.to_string())?;
    let model = match scenario {
        Some(p) => Some(build_model(&load_scenario(cli, p)?, cli.budget).map_err(|e| e.to_string())?),
        None => None,
    };
    let report = check_proof(&sc, model.as_ref());
    match cli.format {
        Format::Text => {
            match &report.verdict {
                ProofVerdict::Accepted => println!("Accepted"),
                ProofVerdict::Rejected { reason, path } => println!("Rejected at {path}: {reason}"),
            }
            for a in &report.assumed {
                println!("assumed: {a}");
            }
            for s in &report.scenario_checked {
                println!("scenario-checked: {s}");
            }
            if cli.trace {
                for d in &report.discharged {
                    println!("discharged: {d}");
                }
            }
        }
        Format::JsonLike => {
            let (verdict, reason, path) = match &report.verdict {
                ProofVerdict::Accepted => ("accepted", None, None),
                ProofVerdict::Rejected { reason, path } => {
                    ("rejected", Some(reason.clone()), Some(path.clone()))
                }
            };
            let doc = json!({
                "command": "check-proof",
                "verdict": verdict,
                "reason": reason,
                "path": path,
                "assumed": report.assumed,
                "scenario_checked": report.scenario_checked,
                "discharged": report.discharged,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    Ok(if report.accepted() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_examples(dir: &Path) -> Result<ExitCode, String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for e in EXAMPLES {
        let path = dir.join(e.name);
        fs::write(&path, e.text).map_err(|er| format!("{}: {er}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_verdict(cli: &Cli, command: &str, verdict: &str, detail: Option<&str>) {
    match cli.format {
        Format::Text => {
            println!("{verdict}");
            if let Some(d) = detail {
                println!("{d}");
            }
        }
        Format::JsonLike => {
            let doc = json!({
                "command": command,
                "verdict": verdict,
                "detail": detail,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
}

fn indent(s: &str, n: usize) -> String {
    let pad = " ".repeat(n);
    s.lines()
        .map(|l| format!("{pad}{l}"))
        .collect::<Vec<_>>()
        .join("\n")
}
