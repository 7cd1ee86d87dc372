//! `irvo`: check, merge, classify, render and format IRVO models.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use irvo::classify::{classify_with, DeviceProfile};
use irvo::dsl::{self, ParseDiagnostic};
use irvo::render::{to_dot, RenderOptions};
use irvo::taskmap::{self, TaskError, TaskTree};
use irvo::validate::{check, Severity};
use irvo::Model;

#[derive(Parser)]
#[command(name = "irvo", version, about = "Check, merge, classify and render IRVO interaction models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Threshold {
    Error,
    Warning,
    Info,
}

#[derive(Subcommand)]
enum Command {
    /// Lint models. Exit 1 if any model has an error finding, 2 if a file
    /// cannot be read or parsed.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Least severe finding to display (counts are not affected).
        #[arg(long, value_enum, default_value = "info")]
        severity_threshold: Threshold,
    },
    /// Merge the models linked to an irvo-tree/1 task tree.
    Merge {
        tree: PathBuf,
        /// Write the merged model here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the synthesized model of every task, not only the root.
        #[arg(long)]
        all_nodes: bool,
        /// Identifier alias file (`old = new` per line), applied before merging.
        #[arg(long)]
        aliases: Option<PathBuf>,
    },
    /// Print the interaction-style label and tool-object cases.
    Classify {
        path: PathBuf,
        /// Device profile: one standard transducer id per line.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Write DOT.
    Render {
        path: PathBuf,
        /// Output file (standard output if omitted).
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        hide_dashed: bool,
        #[arg(long)]
        hide_transducers: bool,
        #[arg(long)]
        no_place_clusters: bool,
    },
    /// Print the canonical form of a model (`.irvo` or irvo-json/1 input).
    Fmt {
        path: PathBuf,
        /// Emit irvo-json/1 instead of `.irvo` text.
        #[arg(long)]
        json: bool,
    },
}

/// Failure that maps to an exit code, with a message for standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn findings(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn diagnostics(path: &Path, diags: &[ParseDiagnostic]) -> String {
    diags.iter().map(|d| format!("{}:{d}", path.display())).collect::<Vec<_>>().join("\n")
}

fn load(path: &Path) -> Result<(Model, String), Failure> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let m = dsl::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        return Ok((m, String::new()));
    }
    match dsl::parse_with_warnings(&text) {
        Ok(p) => Ok((p.model, diagnostics(path, &p.warnings))),
        Err(diags) => Err(Failure::usage(diagnostics(path, &diags))),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::usage(format!("cannot write output: {e}")))
        }
    }
}

struct Checked {
    stdout: String,
    stderr: String,
    code: u8,
}

fn check_one(path: &Path, format: Format, threshold: Severity) -> Checked {
    let (model, warnings) = match load(path) {
        Ok(x) => x,
        Err(f) => return Checked { stdout: String::new(), stderr: f.message, code: f.code },
    };
    let report = check(&model);
    let stdout = match format {
        Format::Json => format!("{}\n", report.to_json()),
        Format::Text => {
            let mut s = String::new();
            for f in report.findings.iter().filter(|f| f.severity <= threshold) {
                s.push_str(&format!("{}: {f}\n", path.display()));
            }
            let c = report.summary;
            s.push_str(&format!(
                "{}: {} error(s), {} warning(s), {} info(s)\n",
                path.display(),
                c.errors,
                c.warnings,
                c.infos
            ));
            s
        }
    };
    Checked { stdout, stderr: warnings, code: u8::from(report.has_errors()) }
}

fn cmd_check(paths: &[PathBuf], format: Format, threshold: Threshold) -> u8 {
    let threshold = match threshold {
        Threshold::Error => Severity::Error,
        Threshold::Warning => Severity::Warning,
        Threshold::Info => Severity::Info,
    };
    let results: Vec<Checked> = std::thread::scope(|s| {
        let handles: Vec<_> = paths.iter().map(|p| s.spawn(move || check_one(p, format, threshold))).collect();
        handles.into_iter().map(|h| h.join().expect("checker thread panicked")).collect()
    });
    let mut code = 0;
    for r in results {
        print!("{}", r.stdout);
        if !r.stderr.is_empty() {
            eprintln!("{}", r.stderr);
        }
        code = code.max(r.code);
    }
    code
}

fn cmd_merge(tree_path: &Path, out: Option<&Path>, all_nodes: bool, aliases: Option<&Path>) -> Result<(), Failure> {
    let tree =
        TaskTree::from_json(&read(tree_path)?).map_err(|e| Failure::usage(format!("{}: {e}", tree_path.display())))?;
    let base = tree_path.parent().unwrap_or(Path::new("."));
    let mut links = tree.resolve_links(base).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(a) = aliases {
        let map = taskmap::parse_aliases(&read(a)?).map_err(|e| Failure::usage(format!("{}: {e}", a.display())))?;
        for (task, m) in links.iter_mut() {
            *m = taskmap::apply_aliases(m, &map).map_err(|e| Failure::findings(format!("task `{task}`: {e}")))?;
        }
    }
    let factored = taskmap::factor_links(&tree, &links);
    let all = taskmap::synthesize(&tree, &factored).map_err(|e| match e {
        TaskError::UncoveredLeaf(_) | TaskError::Merge(..) => Failure::findings(e.to_string()),
        other => Failure::usage(other.to_string()),
    })?;
    let root = &all[&tree.root.id];

    let mut notes = Vec::new();
    let models: Vec<Model> = factored.values().cloned().collect();
    if let Ok((_, n)) = taskmap::merge_with_notes(&models) {
        notes.extend(n.iter().map(|n| format!("note: {n}")));
    }
    for task in factored.keys().filter(|t| !links.contains_key(*t)) {
        notes.push(format!("note: shared model factored onto task `{task}`"));
    }
    notes.extend(taskmap::odd_configurations(root, &factored).iter().map(ToString::to_string));

    let text = if all_nodes {
        let mut s = String::new();
        for n in tree.root.nodes() {
            s.push_str(&format!("# task {}\n{}", n.id, dsl::serialize(&all[&n.id])));
        }
        s
    } else {
        dsl::serialize(root)
    };
    write_out(out, &text)?;
    for n in notes {
        eprintln!("{n}");
    }
    Ok(())
}

fn cmd_classify(path: &Path, profiles: Option<&Path>, format: Format) -> Result<(), Failure> {
    let (model, _) = load(path)?;
    let profile = match profiles {
        Some(p) => DeviceProfile::parse(&read(p)?),
        None => DeviceProfile::default(),
    };
    let c = classify_with(&model, &profile);
    let text = match format {
        Format::Json => format!("{}\n", serde_json::to_string(&c).expect("classification serializes")),
        Format::Text => {
            let cases: Vec<String> = c.cases.iter().map(ToString::to_string).collect();
            let cases = if cases.is_empty() { "none".to_string() } else { cases.join(", ") };
            format!("{}\ncases: {cases}\n", c.label)
        }
    };
    write_out(None, &text)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Check { paths, format, severity_threshold } => Ok(cmd_check(&paths, format, severity_threshold)),
        Command::Merge { tree, out, all_nodes, aliases } => {
            cmd_merge(&tree, out.as_deref(), all_nodes, aliases.as_deref()).map(|()| 0)
        }
        Command::Classify { path, profiles, format } => cmd_classify(&path, profiles.as_deref(), format).map(|()| 0),
        Command::Render { path, dot, hide_dashed, hide_transducers, no_place_clusters } => {
            let (model, _) = load(&path)?;
            let options = RenderOptions {
                show_dashed: !hide_dashed,
                show_transducers: !hide_transducers,
                cluster_places: !no_place_clusters,
            };
            write_out(dot.as_deref(), &to_dot(&model, &options)).map(|()| 0)
        }
        Command::Fmt { path, json } => {
            let (model, _) = load(&path)?;
            let text = if json { format!("{}\n", dsl::to_json(&model)) } else { dsl::serialize(&model) };
            write_out(None, &text).map(|()| 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("irvo: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
