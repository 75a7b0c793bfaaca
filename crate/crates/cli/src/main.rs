mod adapter;
mod manifest;

use std::fs;
use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use inrob_core::fem::parse_fem;
use inrob_core::harness::{
    aggregate, export_table, parse_report, parse_table, print_table, render_aggregate, serve_mil,
};
use inrob_core::testgen::{parse_suite, print_suite};
use inrob_core::tioa::extend_model;
use inrob_core::{
    execute_suite, generate_suite, parse_network, parse_rules, parse_test_purposes, print_network,
    validate, CaseKind, DeviationRuleSet, FaultSpec, GenerationConfig, MilInterpreter, Outcome,
    Role, TestPurposeSet, TestSuite, TimedNetwork,
};
use thiserror::Error;

use adapter::{Descriptor, Resolved};
use manifest::Manifest;

const ASSET_ENV: &str = "INROB_ASSET_DIR";

#[derive(Debug, Error)]
enum Failure {
    /// Bad invocation; exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input, or a failed verification; exit status 1.
    #[error("{0}")]
    Failed(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Failed(e.to_string())
    }
}

type CliResult = Result<ExitCode, Failure>;

#[derive(Parser)]
#[command(name = "inrob", version, about = "Interoperability and robustness testing for master-slave subsystems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check model, purpose, rule, fault, suite and table files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Network used to resolve locations in `.drs` files.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Write the network extended with its deviation rules.
    Extend {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate nominal and robustness test cases.
    Gen {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        purposes: Option<PathBuf>,
        /// Fault file, or `none` for nominal cases only.
        #[arg(long)]
        faults: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
        #[arg(long, default_value_t = 32)]
        max_depth: usize,
        #[arg(long, value_enum, default_value_t = RoleArg::Slave)]
        sut: RoleArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Execute a suite and write text and CSV reports.
    Run {
        suite: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        adapter_master: Option<Descriptor>,
        #[arg(long)]
        adapter_slave: Option<Descriptor>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Wall-clock milliseconds per model time unit for external adapters.
        #[arg(long, default_value_t = 10)]
        unit_ms: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Merge run reports into one table per model pair.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the transition table of one role.
    Export {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = RoleArg::Slave)]
        role: RoleArg,
        /// Export the network as written instead of its extension.
        #[arg(long)]
        nominal: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a model interpreter over the wire protocol.
    Serve {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = RoleArg::Slave)]
        role: RoleArg,
        #[arg(long)]
        nominal: bool,
        /// Listen on this address instead of standard input and output.
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, default_value_t = 10)]
        unit_ms: u64,
    },
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Master,
    Slave,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Master => Role::Master,
            RoleArg::Slave => Role::Slave,
        }
    }
}

fn asset_dir() -> PathBuf {
    std::env::var_os(ASSET_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets"))
}

fn or_asset(p: &Option<PathBuf>, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| asset_dir().join(name))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<TimedNetwork, Failure> {
    let net = parse_network(&read(path)?).map_err(|ds| {
        let lines: Vec<String> = ds.iter().map(|d| format!("{}:{d}", path.display())).collect();
        Failure::Failed(lines.join("\n"))
    })?;
    let report = validate(&net);
    if !report.is_valid() {
        let lines: Vec<String> = report.errors.iter().map(|e| format!("{}: {e}", path.display())).collect();
        return Err(Failure::Failed(lines.join("\n")));
    }
    Ok(net)
}

struct Loaded {
    nominal: TimedNetwork,
    extended: TimedNetwork,
    rules: DeviationRuleSet,
}

fn load_models(inputs: &Inputs, manifest: &mut Manifest) -> Result<Loaded, Failure> {
    let net_path = or_asset(&inputs.network, "obdh_slp.tioa");
    let net_text = read(&net_path)?;
    manifest.input("network", &net_path, net_text.as_bytes());
    let nominal = load_network(&net_path)?;
    // the bundled rules only apply to the bundled network
    let rules_path = match (&inputs.rules, &inputs.network) {
        (Some(p), _) => Some(p.clone()),
        (None, None) => Some(asset_dir().join("obdh_slp.drs")),
        (None, Some(_)) => None,
    };
    let rules = match rules_path {
        None => DeviationRuleSet::default(),
        Some(p) => {
            let text = read(&p)?;
            manifest.input("rules", &p, text.as_bytes());
            parse_rules(&text, Some(&nominal)).map_err(|d| Failure::Failed(format!("{}:{d}", p.display())))?
        }
    };
    let extended = extend_model(&nominal, &rules).map_err(|e| Failure::Failed(e.to_string()))?;
    Ok(Loaded {
        nominal,
        extended,
        rules,
    })
}

fn create_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Failed(format!("{}: {e}", out.display())))
}

fn cmd_validate(paths: &[PathBuf], network: &Option<PathBuf>) -> CliResult {
    let context = match network {
        Some(p) => Some(load_network(p)?),
        None => None,
    };
    let mut errors = 0;
    let mut report = |path: &Path, msg: String| {
        eprintln!("{}:{msg}", path.display());
        errors += 1;
    };
    for path in paths {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                report(path, format!(" {e}"));
                continue;
            }
        };
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "tioa" => match parse_network(&text) {
                Err(ds) => ds.iter().for_each(|d| report(path, d.to_string())),
                Ok(net) => {
                    let v = validate(&net);
                    for w in &v.warnings {
                        eprintln!("{}: warning: {w}", path.display());
                    }
                    v.errors.iter().for_each(|e| report(path, format!(" {e}")));
                }
            },
            "tp" => {
                if let Err(d) = parse_test_purposes(&text) {
                    report(path, d.to_string());
                }
            }
            "drs" => {
                if let Err(d) = parse_rules(&text, context.as_ref()) {
                    report(path, d.to_string());
                }
            }
            "fem" => {
                if let Err(e) = parse_fem(&text) {
                    report(path, format!(" {e}"));
                }
            }
            "suite" => {
                if let Err(e) = parse_suite(&text) {
                    report(path, format!(" {e}"));
                }
            }
            "table" => {
                if let Err(e) = parse_table(&text) {
                    report(path, format!(" {e}"));
                }
            }
            _ => report(path, " unknown file kind (expected .tioa, .tp, .drs, .fem, .suite or .table)".into()),
        }
    }
    if errors > 0 {
        eprintln!("{errors} error(s) in {} file(s)", paths.len());
        Ok(ExitCode::from(1))
    } else {
        println!("ok {} file(s)", paths.len());
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_extend(inputs: &Inputs, out: &Path) -> CliResult {
    let mut manifest = Manifest::new("extend");
    let models = load_models(inputs, &mut manifest)?;
    create_dir(out)?;
    let path = out.join(format!("{}.ext.tioa", models.extended.name));
    manifest.output(&path, &print_network(&models.extended))?;
    manifest.write(out)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

struct GenSettings<'a> {
    purposes: &'a Option<PathBuf>,
    faults: &'a Option<String>,
    cfg: GenerationConfig,
    out: &'a Path,
}

fn load_faults(arg: &Option<String>, manifest: &mut Manifest) -> Result<Vec<FaultSpec>, Failure> {
    let path = match arg.as_deref() {
        Some("none") => return Ok(Vec::new()),
        Some(p) => PathBuf::from(p),
        None => asset_dir().join("default.fem"),
    };
    let text = read(&path)?;
    manifest.input("faults", &path, text.as_bytes());
    Ok(parse_fem(&text)
        .map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?
        .faults)
}

fn cmd_gen(inputs: &Inputs, s: GenSettings<'_>) -> CliResult {
    let started = Instant::now();
    let mut manifest = Manifest::new("gen");
    manifest.setting("seed", s.cfg.seed);
    manifest.setting("horizon", s.cfg.horizon);
    manifest.setting("max_depth", s.cfg.max_depth);
    manifest.setting("sut", s.cfg.sut);
    let models = load_models(inputs, &mut manifest)?;
    let tp_path = or_asset(s.purposes, "slp_purposes.tp");
    let tp_text = read(&tp_path)?;
    manifest.input("purposes", &tp_path, tp_text.as_bytes());
    let purposes =
        parse_test_purposes(&tp_text).map_err(|d| Failure::Failed(format!("{}:{d}", tp_path.display())))?;
    let faults = load_faults(s.faults, &mut manifest)?;

    // one purpose at a time so a bad purpose does not hide the others
    let parts: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = purposes
            .purposes
            .iter()
            .map(|p| {
                let one = TestPurposeSet {
                    purposes: vec![p.clone()],
                };
                let (m, faults, cfg) = (&models, &faults, &s.cfg);
                scope.spawn(move || generate_suite(&m.nominal, &m.extended, &one, faults, &m.rules, cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator panicked")).collect()
    });
    let mut suite = TestSuite {
        network: models.nominal.name.clone(),
        cases: Vec::new(),
    };
    let mut failed = 0;
    for (p, part) in purposes.purposes.iter().zip(parts) {
        match part {
            Ok(part) => suite.cases.extend(part.cases),
            Err(e) => {
                eprintln!("purpose {}: {e}", p.name);
                failed += 1;
            }
        }
    }
    create_dir(s.out)?;
    let path = s.out.join(format!("{}.suite", suite.network));
    manifest.output(&path, &print_suite(&suite))?;
    manifest.write(s.out)?;
    let (n, r) = (suite.count(CaseKind::Nominal), suite.count(CaseKind::Robustness));
    println!("nominal {n} robustness {r} total {}", n + r);
    eprintln!("wrote {} in {} ms", path.display(), started.elapsed().as_millis());
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

struct RunSettings<'a> {
    master: &'a Option<Descriptor>,
    slave: &'a Option<Descriptor>,
    jobs: Option<usize>,
    unit: Duration,
    out: &'a Path,
}

fn cmd_run(suite_path: &Path, inputs: &Inputs, s: RunSettings<'_>) -> CliResult {
    let mut manifest = Manifest::new("run");
    let models = load_models(inputs, &mut manifest)?;
    let text = read(suite_path)?;
    manifest.input("suite", suite_path, text.as_bytes());
    let suite = parse_suite(&text).map_err(|e| Failure::Failed(format!("{}: {e}", suite_path.display())))?;
    if suite.network != models.nominal.name && !suite.cases.is_empty() {
        return Err(Failure::Failed(format!(
            "suite is for network `{}`, the loaded network is `{}`",
            suite.network, models.nominal.name
        )));
    }
    let master = s.master.clone().unwrap_or(Descriptor::Mil);
    let slave = s.slave.clone().unwrap_or(Descriptor::Mil);
    manifest.setting("adapter_master", &master);
    manifest.setting("adapter_slave", &slave);
    let load = |d: &Descriptor| Resolved::load(d, &models.nominal, &models.extended).map_err(Failure::Failed);
    let (master, slave) = (load(&master)?, load(&slave)?);
    let with_peer = s.master.is_some() && s.slave.is_some();
    let jobs = s
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let unit = s.unit;
    let factory = |role: Role| match role {
        Role::Master => master.build(role, unit),
        Role::Slave => slave.build(role, unit),
    };
    let report = execute_suite(&suite, &models.extended, &factory, with_peer, jobs)
        .map_err(|e| Failure::Failed(e.to_string()))?;

    create_dir(s.out)?;
    let stem = suite_path
        .file_stem()
        .and_then(|x| x.to_str())
        .unwrap_or("suite");
    manifest.output(&s.out.join(format!("{stem}.report")), &report.to_text())?;
    manifest.output(&s.out.join(format!("{stem}.csv")), &report.to_csv())?;
    manifest.write(s.out)?;
    let mut bad = 0;
    for kind in [CaseKind::Nominal, CaseKind::Robustness] {
        let t = report.tally(kind);
        bad += t.fail + t.inconclusive;
        println!(
            "{} run {} pass {} fail {} inconclusive {}",
            kind.as_str(),
            t.run,
            t.pass,
            t.fail,
            t.inconclusive
        );
    }
    for v in report.verdicts.iter().filter(|v| v.outcome != Outcome::Pass) {
        eprintln!("{} {}: {}", v.case_id, v.outcome, v.reason.as_deref().unwrap_or("-"));
    }
    Ok(if bad > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_report(paths: &[PathBuf], out: &Option<PathBuf>) -> CliResult {
    let mut reports = Vec::new();
    for p in paths {
        reports.push(parse_report(&read(p)?).map_err(|e| Failure::Failed(format!("{}: {e}", p.display())))?);
    }
    let rows = aggregate(&reports).map_err(|e| Failure::Failed(e.to_string()))?;
    let table = render_aggregate(&rows);
    print!("{table}");
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut manifest = Manifest::new("report");
        for (p, r) in paths.iter().zip(&reports) {
            manifest.input("report", p, r.to_text().as_bytes());
        }
        manifest.output(&dir.join("aggregate.txt"), &table)?;
        manifest.write(dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(inputs: &Inputs, role: Role, nominal: bool, out: &Option<PathBuf>) -> CliResult {
    let mut manifest = Manifest::new("export");
    let models = load_models(inputs, &mut manifest)?;
    let net = if nominal { &models.nominal } else { &models.extended };
    let text = print_table(&export_table(net, role));
    match out {
        None => print!("{text}"),
        Some(dir) => {
            create_dir(dir)?;
            let path = dir.join(format!("{}.{role}.table", net.name));
            manifest.output(&path, &text)?;
            manifest.write(dir)?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(inputs: &Inputs, role: Role, nominal: bool, listen: &Option<String>, unit: Duration) -> CliResult {
    let mut manifest = Manifest::new("serve");
    let models = load_models(inputs, &mut manifest)?;
    let net = if nominal { models.nominal } else { models.extended };
    let failed = |e: inrob_core::harness::AdapterError| Failure::Failed(e.to_string());
    match listen {
        None => {
            let subject = Box::new(MilInterpreter::new(&net, role));
            serve_mil(subject, BufReader::new(io::stdin()), io::stdout(), unit).map_err(failed)?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr)?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                let subject = Box::new(MilInterpreter::new(&net, role));
                if let Err(e) = serve_mil(subject, reader, stream, unit) {
                    eprintln!("session ended: {e}");
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Validate { paths, network } => cmd_validate(&paths, &network),
        Command::Extend { inputs, out } => cmd_extend(&inputs, &out),
        Command::Gen {
            inputs,
            purposes,
            faults,
            seed,
            horizon,
            max_depth,
            sut,
            out,
        } => {
            let cfg = GenerationConfig {
                horizon,
                max_depth,
                seed,
                sut: sut.into(),
                ..GenerationConfig::default()
            };
            cfg.check().map_err(|e| Failure::Usage(e.to_string()))?;
            cmd_gen(
                &inputs,
                GenSettings {
                    purposes: &purposes,
                    faults: &faults,
                    cfg,
                    out: &out,
                },
            )
        }
        Command::Run {
            suite,
            inputs,
            adapter_master,
            adapter_slave,
            jobs,
            unit_ms,
            out,
        } => {
            if jobs == Some(0) {
                return Err(Failure::Usage("--jobs must be at least 1".into()));
            }
            cmd_run(
                &suite,
                &inputs,
                RunSettings {
                    master: &adapter_master,
                    slave: &adapter_slave,
                    jobs,
                    unit: Duration::from_millis(unit_ms),
                    out: &out,
                },
            )
        }
        Command::Report { reports, out } => cmd_report(&reports, &out),
        Command::Export {
            inputs,
            role,
            nominal,
            out,
        } => cmd_export(&inputs, role.into(), nominal, &out),
        Command::Serve {
            inputs,
            role,
            nominal,
            listen,
            unit_ms,
        } => cmd_serve(&inputs, role.into(), nominal, &listen, Duration::from_millis(unit_ms)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
