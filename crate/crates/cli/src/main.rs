use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use vecop_core::delaymodel::DelayTable;
use vecop_core::experiment::{report, result_document, sweep, ResultTable, SweepConfig};
use vecop_core::formulation::{census, export_lp, formulate, Instance, SolveResult};
use vecop_core::scenario::{generate_default, parse_scenario, DEFAULT_SCENARIO_JSON};
use vecop_core::solver::{solve, Limits};
use vecop_core::{make_weights, Error, ObjectiveWeights, ProcessingSetting, Scenario, WeightPreset, WeightRequest};

#[derive(Parser)]
#[command(name = "vecop", version, about = "Power/delay placement of vehicle processing demands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario document and print its hash.
    Validate(ScenarioArg),
    /// Emit the seeded parking-lot scenario.
    Gen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the feasible links.
    Links {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        setting: SettingArg,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print delay lookup tables.
    Table {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        setting: SettingArg,
        /// Link id; all links when omitted.
        #[arg(long)]
        link: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the mixed-integer model as LP text.
    Export {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print variable and constraint counts.
        #[arg(long)]
        stats: bool,
    },
    /// Solve one instance.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Result document path.
        #[arg(short, long, alias = "json")]
        output: Option<PathBuf>,
    },
    /// Run the demand sweep over settings and objectives.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated demand sizes in kbit/s; empty for none.
        #[arg(long, default_value = "1000,2000,3000,4000,5000,6000")]
        demands: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec!["VEHICLES_ONLY".to_string(), "VEHICLES_AND_EDGE".to_string(), "CLOUD_ONLY".to_string()])]
        settings: Vec<String>,
        /// Objectives separated by ;: power, delay, joint or custom:wp,wd
        #[arg(long, value_delimiter = ';', default_values_t = vec!["power".to_string(), "joint".to_string()])]
        objectives: Vec<String>,
        /// MIPS per kbit/s.
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        limits: LimitArgs,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        plotdata: Option<PathBuf>,
    },
    /// Comparison metrics from a sweep CSV.
    Report {
        /// Sweep CSV to read.
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario document; the built-in parking lot when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SettingArg {
    /// VEHICLES_ONLY, VEHICLES_AND_EDGE or CLOUD_ONLY; the document's when omitted.
    #[arg(long)]
    setting: Option<String>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value_t = Limits::default().max_nodes)]
    max_nodes: usize,
    /// Solve beyond the node limit.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ProblemArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    setting: SettingArg,
    /// power, delay, joint or custom:wp,wd
    #[arg(long, default_value = "power")]
    objective: String,
    /// Overrides every demand's traffic (kbit/s).
    #[arg(long)]
    demand: Option<f64>,
    /// MIPS per kbit/s.
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    limits: LimitArgs,
}

enum Objective {
    Power,
    Delay,
    Joint,
    Custom(f64, f64),
}

fn usage(message: String) -> Failure {
    Failure { code: 1, message }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } | Error::InsufficientCapacity { .. } => 3,
            Error::TooLarge(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn parse_objective(text: &str) -> std::result::Result<Objective, Failure> {
    match text {
        "power" => Ok(Objective::Power),
        "delay" => Ok(Objective::Delay),
        "joint" => Ok(Objective::Joint),
        _ => {
            let Some(pair) = text.strip_prefix("custom:") else {
                return Err(usage(format!("unknown objective {text:?}")));
            };
            let parts: Vec<&str> = pair.split(',').collect();
            match parts.as_slice() {
                [a, b] => match (a.trim().parse(), b.trim().parse()) {
                    (Ok(a), Ok(b)) => Ok(Objective::Custom(a, b)),
                    _ => Err(usage(format!("bad custom weights {pair:?}"))),
                },
                _ => Err(usage(format!("custom weights need two values, got {pair:?}"))),
            }
        }
    }
}

fn parse_setting(text: &str) -> std::result::Result<ProcessingSetting, Failure> {
    ProcessingSetting::parse(text).ok_or_else(|| usage(format!("unknown setting {text:?}")))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(path: Option<&PathBuf>, text: &str) -> Outcome {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(arg: &ScenarioArg) -> std::result::Result<Scenario, Failure> {
    let text = match &arg.scenario {
        Some(p) => read(p)?,
        None => DEFAULT_SCENARIO_JSON.to_string(),
    };
    Ok(parse_scenario(&text)?)
}

fn with_setting(s: Scenario, arg: &SettingArg) -> std::result::Result<Scenario, Failure> {
    match &arg.setting {
        Some(t) => Ok(s.with_setting(parse_setting(t)?)),
        None => Ok(s),
    }
}

fn limits(args: &LimitArgs) -> Limits {
    Limits {
        max_nodes: args.max_nodes,
        force: args.force,
        ..Limits::default()
    }
}

fn problem(args: &ProblemArgs) -> std::result::Result<(Instance, Objective, Limits), Failure> {
    let objective = parse_objective(&args.objective)?;
    let mut s = with_setting(load_scenario(&args.scenario)?, &args.setting)?;
    if let Some(rho) = args.rho {
        s.settings.mips_per_kbps = rho;
    }
    if let Some(kbps) = args.demand {
        s = vecop_core::experiment::with_traffic(&s, kbps);
    }
    Ok((Instance::new(s)?, objective, limits(&args.limits)))
}

fn weights_for(inst: &Instance, objective: &Objective, limits: &Limits) -> std::result::Result<ObjectiveWeights, Failure> {
    Ok(match objective {
        Objective::Power => ObjectiveWeights::power_only(),
        Objective::Delay => ObjectiveWeights::delay_only(),
        Objective::Custom(wp, wd) => make_weights(WeightRequest::Custom {
            w_power: *wp,
            w_delay: *wd,
        })?,
        Objective::Joint => {
            let p = solve(inst, &ObjectiveWeights::power_only(), limits)?;
            let t = solve(inst, &ObjectiveWeights::delay_only(), limits)?;
            make_weights(WeightRequest::JointEqual {
                power_optimum: p.total_power,
                delay_optimum: t.max_delay,
            })?
        }
    })
}

fn summary(inst: &Instance, r: &SolveResult) -> String {
    let mut out = format!(
        "total_power_W {}\nmax_delay_ms {}\nobjective {}\nweights {} {}\n",
        r.total_power,
        r.max_delay * 1e3,
        r.objective_value,
        r.weights.w_power,
        r.weights.w_delay
    );
    for d in &r.allocation.demands {
        for s in &d.serving {
            let route: Vec<&str> = s.route.iter().map(|l| inst.links.links[*l].id.as_str()).collect();
            out.push_str(&format!(
                "serve {} at {} fraction {} route [{}]\n",
                inst.scenario.demands[d.demand].id,
                inst.scenario.nodes[s.node].id,
                s.fraction,
                route.join(" ")
            ));
        }
    }
    out
}

fn tables_csv(tables: &[&DelayTable<f64>]) -> String {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        let text = t.to_csv();
        if i == 0 {
            out.push_str(&text);
        } else {
            out.extend(text.lines().skip(1).map(|l| format!("{l}\n")));
        }
    }
    out
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate(arg) => {
            let s = load_scenario(&arg)?;
            println!("ok {}", s.hash());
        }
        Command::Gen { seed, output } => emit(output.as_ref(), &generate_default(seed).emit())?,
        Command::Links { scenario, setting, csv } => {
            let inst = Instance::new(with_setting(load_scenario(&scenario)?, &setting)?)?;
            emit(csv.as_ref(), &inst.links.to_csv())?;
        }
        Command::Table {
            scenario,
            setting,
            link,
            csv,
        } => {
            let inst = Instance::new(with_setting(load_scenario(&scenario)?, &setting)?)?;
            let tables: Vec<&DelayTable<f64>> = match &link {
                Some(id) => {
                    let l = inst
                        .links
                        .link_by_id(id)
                        .ok_or_else(|| usage(format!("no link {id:?}")))?;
                    vec![&inst.tables[l]]
                }
                None => inst.tables.iter().collect(),
            };
            emit(csv.as_ref(), &tables_csv(&tables))?;
        }
        Command::Export { problem: args, output, stats } => {
            let (inst, objective, limits) = problem(&args)?;
            let w = weights_for(&inst, &objective, &limits)?;
            let model = formulate(&inst, &w)?;
            emit(output.as_ref(), &export_lp(&model))?;
            if stats {
                let text = census(&inst).to_text();
                if output.is_some() {
                    print!("{text}");
                } else {
                    eprint!("{text}");
                }
            }
        }
        Command::Solve { problem: args, output } => {
            let (inst, objective, limits) = problem(&args)?;
            let w = weights_for(&inst, &objective, &limits)?;
            let r = solve(&inst, &w, &limits)?;
            print!("{}", summary(&inst, &r));
            if let Some(p) = output {
                let doc = result_document(&inst, &r);
                write(&p, &(serde_json::to_string_pretty(&doc).expect("document serializes") + "\n"))?;
            }
        }
        Command::Sweep {
            scenario,
            demands,
            settings,
            objectives,
            rho,
            limits: limit_args,
            threads,
            csv,
            json,
            plotdata,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(rho) = rho {
                s.settings.mips_per_kbps = rho;
            }
            let settings = settings.iter().map(|t| parse_setting(t)).collect::<std::result::Result<Vec<_>, _>>()?;
            let mut presets = Vec::new();
            let mut custom = None;
            for o in &objectives {
                presets.push(match parse_objective(o)? {
                    Objective::Power => WeightPreset::PowerOnly,
                    Objective::Joint => WeightPreset::JointEqual,
                    Objective::Custom(wp, wd) => {
                        custom = Some(make_weights(WeightRequest::Custom {
                            w_power: wp,
                            w_delay: wd,
                        })?);
                        WeightPreset::Custom
                    }
                    Objective::Delay => {
                        custom = Some(ObjectiveWeights::delay_only());
                        WeightPreset::Custom
                    }
                });
            }
            let demands = demands
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| usage(format!("bad demand size {t:?}"))))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let config = SweepConfig {
                demands_kbps: demands,
                settings,
                objectives: presets,
                custom,
                limits: limits(&limit_args),
                threads,
            };
            let table = sweep(&s, &config)?;
            emit(csv.as_ref(), &table.to_csv())?;
            if let Some(p) = plotdata {
                write(&p, &table.to_plotdata())?;
            }
            if let Some(p) = json {
                write(&p, &(serde_json::to_string_pretty(&table).expect("table serializes") + "\n"))?;
            }
        }
        Command::Report { input, csv, json } => {
            let table = ResultTable::from_csv(&read(&input)?)?;
            let rep = report(&table)?;
            match &csv {
                Some(p) => write(p, &rep.to_csv())?,
                None => print!("{}", rep.summary()),
            }
            if let Some(p) = json {
                write(&p, &(serde_json::to_string_pretty(&rep).expect("report serializes") + "\n"))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
