use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use pc4pm_core::analysis::{data_utility, disclosure_risk};
use pc4pm_core::anon::KeyMode;
use pc4pm_core::connector;
use pc4pm_core::guidance::{GuideQuery, Registry};
use pc4pm_core::knowledge::KnowledgeKind;
use pc4pm_core::repo::{Content, EntryKind, EnvKeyStore, JobRunner, JobSpec, JobState, KeyStore, Repository};
use pc4pm_core::server::{serve, AppState};
use pc4pm_core::stats::variants;
use pc4pm_core::Error;

#[derive(Parser)]
#[command(name = "pc4pm", version, about = "Privacy-preserving transformations and analyses for event logs")]
struct Cli {
    /// Repository directory.
    #[arg(long, env = "PC4PM_REPO", default_value = "pc4pm-repo", global = true)]
    repo: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Store an XES log or ELA file.
    Upload {
        file: PathBuf,
        #[arg(long)]
        name: Option<String>,
        /// xes or ela; guessed from the file when omitted.
        #[arg(long)]
        kind: Option<String>,
    },
    /// List live entries.
    List,
    /// Print an entry and a summary of its content.
    Show { id: String },
    /// Write an entry's content to a file, or stdout.
    Export {
        id: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a technique on an entry and wait for it.
    Run {
        /// Operation name, or a technique id with a single operation.
        technique: String,
        input: String,
        /// Parameter as name=value; values parse as JSON when they can.
        #[arg(short = 'p', long = "param")]
        params: Vec<String>,
        /// Parameters as a JSON object, merged before --param.
        #[arg(long)]
        params_json: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Seconds to wait.
        #[arg(long, default_value_t = 600)]
        timeout: u64,
    },
    /// Disclosure risk of a log.
    Risk {
        id: String,
        #[arg(long, default_value = "set")]
        kind: String,
        #[arg(short, long, default_value_t = 1)]
        l: usize,
    },
    /// Data utility of an anonymized log against its original.
    Utility { original: String, anonymized: String },
    /// List techniques matching the given dimensions.
    Guide {
        #[arg(long)]
        pmps: Option<String>,
        #[arg(long)]
        pmac: Option<String>,
        #[arg(long)]
        prps: Option<String>,
        #[arg(long)]
        prac: Option<String>,
    },
    /// Print an entry's ancestry.
    Lineage { id: String },
    /// Hide an entry from listings.
    Delete { id: String },
    /// Print the technique registry.
    Techniques,
    /// Decode a connector abstraction into a directly-follows graph.
    Decode {
        id: String,
        /// Key reference; the secret is read from PC4PM_KEY_<REF>.
        #[arg(long)]
        key_ref: String,
        /// Candidate activity labels, comma separated.
        #[arg(long, value_delimiter = ',')]
        activities: Vec<String>,
        /// Take candidate labels from a stored log.
        #[arg(long)]
        dictionary: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 4)]
        pool: usize,
    },
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn param_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn runner(repo: Arc<Repository>, pool: usize) -> JobRunner {
    JobRunner::new(repo, Arc::new(Registry::builtin().clone()), Arc::new(EnvKeyStore), pool)
}

fn run(cli: Cli) -> Result<(), Error> {
    let repo = Arc::new(Repository::open(&cli.repo)?);
    match cli.command {
        Command::Upload { file, name, kind } => {
            let data = std::fs::read(&file)?;
            let kind = match kind {
                Some(k) => EntryKind::parse(&k)
                    .ok_or_else(|| Error::InvalidOperation(format!("unknown kind `{k}`, expected xes or ela")))?,
                None => EntryKind::guess(file.to_str(), &data),
            };
            let name = name.unwrap_or_else(|| {
                file.file_name().map_or_else(|| "upload".into(), |n| n.to_string_lossy().into_owned())
            });
            print(&serde_json::to_value(repo.store(&data, kind, &name, &[], None)?).expect("json"));
        }
        Command::List => {
            for e in repo.list()? {
                println!("{}\t{}\t{}\t{}", e.entry_id, e.kind.as_str(), e.technique.as_deref().unwrap_or("-"), e.name);
            }
        }
        Command::Show { id } => {
            let entry = repo.entry(&id)?;
            let summary = match repo.load(&id)? {
                Content::Log(log) => json!({
                    "traces": log.traces.len(),
                    "events": log.event_count(),
                    "variants": variants(&log).len(),
                    "privacy_metadata": log.privacy_metadata.records.len(),
                }),
                Content::Abstraction(ela) => json!({
                    "abstraction_kind": ela.header.abstraction_kind,
                    "rows": ela.rows.len(),
                }),
            };
            print(&json!({ "entry": entry, "summary": summary }));
        }
        Command::Export { id, output } => {
            let bytes = repo.content(&id)?;
            match output {
                Some(path) => std::fs::write(path, bytes)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes)?;
                }
            }
        }
        Command::Run { technique, input, params, params_json, seed, workers, timeout } => {
            let mut map = match params_json {
                Some(raw) => match serde_json::from_str::<Value>(&raw) {
                    Ok(Value::Object(m)) => m,
                    _ => return Err(Error::InvalidOperation("--params-json must be a JSON object".into())),
                },
                None => Map::new(),
            };
            for p in params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidOperation(format!("parameter `{p}` is not name=value")))?;
                map.insert(k.to_owned(), param_value(v));
            }
            let runner = runner(repo, 1);
            let job_id = runner.submit(JobSpec {
                technique_id: technique,
                inputs: vec![input],
                params: map,
                seed,
                worker_count: workers,
            })?;
            let status = runner.wait(&job_id, Duration::from_secs(timeout))?;
            print(&serde_json::to_value(&status).expect("json"));
            if status.status != JobState::Done {
                return Err(Error::InvalidOperation(status.error.unwrap_or_else(|| "job did not finish".into())));
            }
        }
        Command::Risk { id, kind, l } => {
            let kind = KnowledgeKind::parse(&kind)
                .ok_or_else(|| Error::InvalidOperation(format!("unknown knowledge kind `{kind}`")))?;
            print(&serde_json::to_value(disclosure_risk(&repo.load_log(&id)?, kind, l)?).expect("json"));
        }
        Command::Utility { original, anonymized } => {
            let report = data_utility(&repo.load_log(&original)?, &repo.load_log(&anonymized)?);
            print(&serde_json::to_value(report).expect("json"));
        }
        Command::Guide { pmps, pmac, prps, prac } => {
            let mut q = Map::new();
            for (k, v) in [("pmps", pmps), ("pmac", pmac), ("prps", prps), ("prac", prac)] {
                if let Some(v) = v {
                    q.insert(k.into(), Value::String(v));
                }
            }
            let query: GuideQuery = serde_json::from_value(Value::Object(q))
                .map_err(|e| Error::InvalidOperation(format!("bad guide query: {e}")))?;
            for id in Registry::builtin().filter(&query) {
                println!("{id}");
            }
        }
        Command::Lineage { id } => {
            let lineage = repo.lineage(&id)?;
            let depth = lineage.depth();
            let mut v = serde_json::to_value(lineage).expect("json");
            v["depth"] = json!(depth);
            print(&v);
        }
        Command::Delete { id } => print(&serde_json::to_value(repo.delete(&id)?).expect("json")),
        Command::Techniques => print(&serde_json::to_value(Registry::builtin()).expect("json")),
        Command::Decode { id, key_ref, activities, dictionary } => {
            let ela = match repo.load(&id)? {
                Content::Abstraction(ela) => ela,
                Content::Log(_) => return Err(Error::InvalidOperation(format!("entry {id} is not an abstraction"))),
            };
            let mut labels: BTreeSet<String> = activities.into_iter().filter(|a| !a.is_empty()).collect();
            if let Some(dict) = dictionary {
                labels.extend(repo.load_log(&dict)?.alphabet());
            }
            let key = EnvKeyStore.key(&key_ref, KeyMode::PseudonymizeDeterministic)?;
            print(&serde_json::to_value(connector::decode(&ela, &key, &labels)?).expect("json"));
        }
        Command::Serve { addr, pool } => {
            let state = AppState { runner: Arc::new(runner(repo, pool)) };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(addr, state))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if let Error::ParameterValidation(errs) = &e {
                for p in errs {
                    eprintln!("  {}: {}", p.param, p.message);
                }
            }
            ExitCode::FAILURE
        }
    }
}
