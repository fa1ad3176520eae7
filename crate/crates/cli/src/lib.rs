//! The `xacmet` command line. [`run`] is the whole program minus process
//! plumbing, so tests can drive it in-process.

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use xacmet::corpus::generate_corpus;
use xacmet::graph::{export_graph_dot, XacGraph};
use xacmet::harness::{differential_check_with, enumerate_requests, sample_requests};
use xacmet::model::{Policy, Request};
use xacmet::oracle::{batch_evaluate, coverage_of, evaluate};
use xacmet::paths::{Granularity, PathSet, DEFAULT_PATH_CAP};
use xacmet::reference::ReferencePdp;
use xacmet::tree::{build_tree, export_tree_dot};
use xacmet::xml::{parse_policy, parse_request, write_request, write_response};

#[derive(Debug, Parser)]
#[command(name = "xacmet", version, about = "Model-based test oracle for XACML 2.0 policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
    Xacml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GranularityArg {
    Rule,
    Element,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Rule => Granularity::Rule,
            GranularityArg::Element => Granularity::Element,
        }
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, conflicts_with_all = ["text", "json", "dot", "xacml"])]
    format: Option<Format>,
    /// Same as --format text.
    #[arg(long, conflicts_with_all = ["json", "dot", "xacml"])]
    text: bool,
    /// Same as --format json.
    #[arg(long, conflicts_with_all = ["dot", "xacml"])]
    json: bool,
    /// Same as --format dot.
    #[arg(long, conflicts_with = "xacml")]
    dot: bool,
    /// Same as --format xacml.
    #[arg(long)]
    xacml: bool,
}

impl OutputArgs {
    fn chosen(&self) -> Option<Format> {
        self.format.or(if self.text {
            Some(Format::Text)
        } else if self.json {
            Some(Format::Json)
        } else if self.dot {
            Some(Format::Dot)
        } else if self.xacml {
            Some(Format::Xacml)
        } else {
            None
        })
    }

    /// The chosen format, or `default`; rejects formats the command lacks.
    fn resolve(&self, command: &str, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
        let format = self.chosen().unwrap_or(default);
        if allowed.contains(&format) {
            Ok(format)
        } else {
            let name = format!("{format:?}").to_lowercase();
            Err(Failure::Usage(format!("`{command}` does not support --format {name}")))
        }
    }
}

#[derive(Debug, Args)]
struct PathArgs {
    /// Split unsatisfied outcomes per rule or per failing element.
    #[arg(long, value_enum, default_value = "rule")]
    granularity: GranularityArg,
    /// Abort when a policy has more evaluation paths than this.
    #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
    max_paths: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the XAC-Tree of a policy.
    Tree {
        policy: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print the colored XAC-Graph of a policy.
    Graph {
        policy: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the ordered evaluation paths with their constraints.
    Paths {
        policy: PathBuf,
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Expected decision and covered path for one request.
    Eval {
        policy: PathBuf,
        request: PathBuf,
        /// Also print the observed outcomes and the covered path's constraints.
        #[arg(long)]
        explain: bool,
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write `<name>.response.xml` next to each request and print a summary.
    Oracle {
        policy: PathBuf,
        /// Request files, or directories of request files.
        #[arg(required = true)]
        requests: Vec<PathBuf>,
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Path coverage of a request set (enumerated when none is given).
    Coverage {
        policy: PathBuf,
        requests: Vec<PathBuf>,
        /// Truncate the enumerated request set.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the oracle with the reference evaluator on enumerated requests.
    Diff {
        /// Policies to check.
        #[arg(required_unless_present = "corpus", conflicts_with = "corpus")]
        policies: Vec<PathBuf>,
        /// Check this many generated policies instead.
        #[arg(long)]
        corpus: Option<usize>,
        /// Seed of the generated corpus.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncate each enumerated request set.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        paths: PathArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write enumerated (or seeded random) requests as XACML files.
    GenRequests {
        policy: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Truncate the enumeration.
        #[arg(long, conflicts_with = "random")]
        limit: Option<usize>,
        /// Sample this many random requests instead of enumerating.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Why a command stopped.
enum Failure {
    /// Bad invocation or unreadable input: exit 2.
    Usage(String),
    /// Oracle and reference disagree: exit 1, output already written.
    Disagreement,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_policy(path: &Path) -> Result<Policy, Failure> {
    parse_policy(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_request(path: &Path) -> Result<Request, Failure> {
    parse_request(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn is_response(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".response.xml"))
}

/// Expands directories into their `.xml` files (responses excluded), sorted.
fn request_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "xml") && !is_response(p))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn response_path(request: &Path) -> PathBuf {
    let stem = request
        .file_stem()
        .map_or_else(|| "request".into(), |s| s.to_string_lossy().into_owned());
    request.with_file_name(format!("{stem}.response.xml"))
}

fn build_paths(policy: &Policy, args: &PathArgs) -> Result<PathSet, Failure> {
    Ok(PathSet::build(policy, args.granularity.into(), args.max_paths)?)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    use Format::*;
    match command {
        Command::Tree { policy, output } => {
            let format = output.resolve("tree", Dot, &[Dot, Text, Json])?;
            let tree = build_tree(&load_policy(&policy)?);
            let text = match format {
                Dot => export_tree_dot(&tree),
                Text => report::tree_text(&tree),
                _ => report::to_json(&report::tree_json(&tree)),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Graph { policy, output } => {
            let format = output.resolve("graph", Dot, &[Dot, Text, Json])?;
            let graph = XacGraph::from_policy(&load_policy(&policy)?)?;
            let text = match format {
                Dot => export_graph_dot(&graph),
                Text => report::graph_text(&graph),
                _ => report::to_json(&report::graph_json(&graph)),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Paths { policy, paths, output } => {
            let format = output.resolve("paths", Text, &[Text, Json])?;
            let set = build_paths(&load_policy(&policy)?, &paths)?;
            let text = match format {
                Text => report::paths_text(&set),
                _ => report::to_json(&report::paths_json(&set)),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Eval {
            policy,
            request,
            explain,
            paths,
            output,
        } => {
            let format = output.resolve("eval", Text, &[Text, Json, Xacml])?;
            let policy = load_policy(&policy)?;
            let request = load_request(&request)?;
            let set = build_paths(&policy, &paths)?;
            let result = evaluate(&set, &request);
            let text = match format {
                Text => report::eval_text(&set, &result, explain),
                Json => report::to_json(&report::eval_json(&set, &result, explain)),
                _ => write_response(result.verdict),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Oracle {
            policy,
            requests,
            paths,
            output,
        } => {
            let format = output.resolve("oracle", Text, &[Text, Json])?;
            let set = build_paths(&load_policy(&policy)?, &paths)?;
            let files = request_files(&requests)?;
            let loaded = files.iter().map(|f| load_request(f)).collect::<Result<Vec<_>, _>>()?;
            let results = batch_evaluate(&set, &loaded);
            let mut rows = Vec::new();
            for (file, result) in files.iter().zip(&results) {
                let target = response_path(file);
                fs::write(&target, write_response(result.verdict))
                    .map_err(|e| Failure::Usage(format!("{}: {e}", target.display())))?;
                rows.push((file, target, result));
            }
            let text = match format {
                Text => {
                    let mut text = String::new();
                    for (file, target, result) in &rows {
                        text.push_str(&format!(
                            "{}: {} (path #{}) -> {}\n",
                            file.display(),
                            result.verdict,
                            result.covered_path_rank,
                            target.display()
                        ));
                    }
                    let covered = coverage_of(&set, &results);
                    text.push_str(&format!(
                        "{} requests, {}/{} paths covered\n",
                        results.len(),
                        covered.covered_paths,
                        covered.total_paths
                    ));
                    text
                }
                _ => report::to_json(&serde_json::json!({
                    "format_version": report::FORMAT_VERSION,
                    "policy_id": set.policy().id(),
                    "results": rows.iter().map(|(file, target, result)| serde_json::json!({
                        "request": file.display().to_string(),
                        "response": target.display().to_string(),
                        "verdict": result.verdict.name(),
                        "covered_path_rank": result.covered_path_rank,
                    })).collect::<Vec<_>>(),
                })),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Coverage {
            policy,
            requests,
            limit,
            paths,
            output,
        } => {
            let format = output.resolve("coverage", Text, &[Text, Json])?;
            let policy = load_policy(&policy)?;
            let set = build_paths(&policy, &paths)?;
            let loaded = if requests.is_empty() {
                enumerate_requests(&policy, limit)?
            } else {
                request_files(&requests)?
                    .iter()
                    .map(|f| load_request(f))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let report = coverage_of(&set, &batch_evaluate(&set, &loaded));
            let text = match format {
                Text => report::coverage_text(policy.id(), &report),
                _ => report::to_json(&report::coverage_json(policy.id(), &report)),
            };
            out.write_all(text.as_bytes())?;
        }
        Command::Diff {
            policies,
            corpus,
            seed,
            limit,
            paths,
            output,
        } => {
            let format = output.resolve("diff", Text, &[Text, Json])?;
            let policies = match corpus {
                Some(n) => generate_corpus(seed, n),
                None => policies.iter().map(|p| load_policy(p)).collect::<Result<Vec<_>, _>>()?,
            };
            let mut reports = Vec::new();
            for policy in &policies {
                let set = build_paths(policy, &paths)?;
                let requests = enumerate_requests(policy, limit)?;
                reports.push(differential_check_with(&set, &requests, &ReferencePdp));
            }
            let text = match format {
                Text => report::diff_text(&reports),
                _ => report::to_json(&report::diff_json(&reports)),
            };
            out.write_all(text.as_bytes())?;
            if reports.iter().any(|r| !r.all_agree()) {
                return Err(Failure::Disagreement);
            }
        }
        Command::GenRequests {
            policy,
            out: dir,
            limit,
            random,
            seed,
            output,
        } => {
            output.resolve("gen-requests", Xacml, &[Xacml])?;
            let policy = load_policy(&policy)?;
            let requests = match random {
                Some(n) => sample_requests(&policy, n, seed),
                None => enumerate_requests(&policy, limit)?,
            };
            fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            let width = requests.len().to_string().len().max(4);
            for (i, request) in requests.iter().enumerate() {
                let file = dir.join(format!("request_{:0width$}.xml", i + 1));
                fs::write(&file, write_request(request))
                    .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            }
            writeln!(out, "wrote {} requests to {}", requests.len(), dir.display())?;
        }
    }
    Ok(())
}

/// Runs the command line `args` (program name first). Returns the exit
/// status: 0 on success, 1 when `diff` finds a disagreement, 2 on usage or
/// input errors, which are reported as one line on `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Disagreement) => 1,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "error: {}", message.lines().next().unwrap_or_default());
            2
        }
    }
}
