//! Flag parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qetlab_core::cooling::OperationFamily;
use qetlab_core::netsim::AttackScenario;
use qetlab_core::{Boundary, UnitVector};

use crate::commands::{self, Format, Output, Table};
use crate::config::{
    load_or_default, parse_axis, read_json, AnalyticConfig, CoolingRunConfig, DumpConfig, ModelConfig,
    ProtocolConfig, ScenarioConfig, StateStage,
};
use crate::error::{exit, LabError, LabResult};
use crate::validation::{select, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "qetlab", version, about = "Energy teleportation and distribution on transverse-field Ising chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infinite-chain correlators, determinants and energies.
    Analytic(AnalyticArgs),
    /// One supplier, one consumer.
    Qet(ProtocolArgs),
    /// One supplier, any number of consumers, optional adversary.
    Qed(ProtocolArgs),
    /// Supplier's best local cooling after the measurement.
    Cooling(CoolingArgs),
    /// Message-passing session with authentication and ledgers.
    Netsim(NetsimArgs),
    /// Acceptance suite.
    Validate(ValidateArgs),
    /// Write or check a serialized state.
    DumpState(DumpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundaryArg {
    Periodic,
    Open,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Open => Boundary::Open,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of sites.
    #[arg(long = "N", visible_alias = "sites")]
    pub sites: Option<usize>,
    /// Transverse field.
    #[arg(long)]
    pub h: Option<f64>,
    /// Coupling ratio J/h, 0 <= lambda <= 1.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Coupling J; sets lambda = J/h.
    #[arg(long = "J", conflicts_with = "lambda", allow_negative_numbers = true)]
    pub j: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
}

impl ModelArgs {
    fn apply(&self, m: &mut ModelConfig) {
        if let Some(n) = self.sites {
            m.sites = n;
        }
        if let Some(h) = self.h {
            m.h = h;
        }
        if let Some(l) = self.lambda {
            m.lambda = l;
        }
        if let Some(j) = self.j {
            m.lambda = j / m.h;
        }
        if let Some(b) = self.boundary {
            m.boundary = b.into();
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableArg {
    Correlators,
    Energies,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// JSON config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Largest correlator index.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Consumer distances for the energy table.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<usize>>,
    /// Consumer spacing for the distributed energy.
    #[arg(long)]
    pub spacing: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Table written in CSV mode.
    #[arg(long, value_enum, default_value = "correlators")]
    pub table: TableArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn axis_arg(s: &str) -> Result<UnitVector, String> {
    parse_axis(s)
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub supplier: Option<i64>,
    /// Single consumer offset from the supplier.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "consumers")]
    pub d: Option<i64>,
    /// Consumer offsets from the supplier, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub consumers: Option<Vec<i64>>,
    /// Supplier measurement axis: x, y, z or three components.
    #[arg(long, value_parser = axis_arg)]
    pub supplier_axis: Option<UnitVector>,
    #[arg(long, value_parser = axis_arg)]
    pub consumer_axis: Option<UnitVector>,
    /// Adversary offset from the supplier.
    #[arg(long, allow_negative_numbers = true)]
    pub adversary: Option<i64>,
    #[arg(long, value_parser = axis_arg)]
    pub adversary_axis: Option<UnitVector>,
    /// Adversary feedback angle; defaults to the nearest consumer's.
    #[arg(long, allow_negative_numbers = true)]
    pub theta_d: Option<f64>,
    #[arg(long)]
    pub min_separation: Option<usize>,
    #[arg(long)]
    pub exactness_floor: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ProtocolArgs {
    fn apply(&self, p: &mut ProtocolConfig) {
        self.model.apply(&mut p.model);
        if let Some(s) = self.supplier {
            p.supplier_site = s;
        }
        if let Some(d) = self.d {
            p.consumers = vec![d];
        }
        if let Some(c) = &self.consumers {
            p.consumers = c.clone();
        }
        if let Some(a) = self.supplier_axis {
            p.supplier_axis = a;
        }
        if let Some(a) = self.consumer_axis {
            p.consumer_axis = a;
        }
        if self.adversary.is_some() {
            p.adversary = self.adversary;
        }
        if let Some(a) = self.adversary_axis {
            p.adversary_axis = a;
        }
        if self.theta_d.is_some() {
            p.theta_d = self.theta_d;
        }
        if let Some(v) = self.min_separation {
            p.min_separation = v;
        }
        if let Some(v) = self.exactness_floor {
            p.exactness_floor = v;
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Unitary,
    TwoElement,
}

#[derive(Debug, Args)]
pub struct CoolingArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub supplier: Option<i64>,
    #[arg(long, value_parser = axis_arg)]
    pub supplier_axis: Option<UnitVector>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Grid points per Euler angle for seeding.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Consumer spacing for the distributed-energy reference.
    #[arg(long)]
    pub spacing: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Honest,
    Eavesdrop,
    Impersonate,
}

#[derive(Debug, Args)]
pub struct NetsimArgs {
    /// Scenario document: {model, nodes, scenario, seed, ...}.
    #[arg(long, required_unless_present = "replay", conflicts_with = "replay")]
    pub scenario: Option<PathBuf>,
    /// Check a recorded JSON-lines log.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario kind in the document.
    #[arg(long, value_enum)]
    pub attack: Option<ScenarioArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Criteria to run: numbers, names or groups (ising, chain, protocol, cooling, netsim).
    #[arg(long, default_value = "all")]
    pub only: String,
    /// JSON tolerance overrides; may only tighten the defaults.
    #[arg(long)]
    pub tolerances: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    Ground,
    Measured,
    Qed,
    Cooled,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub stage: Option<StageArg>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub consumers: Option<Vec<i64>>,
    /// Validate a dump instead of writing one.
    #[arg(long, conflicts_with_all = ["stage", "consumers"])]
    pub load: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> LabResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| LabError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn finish(out: Option<&Path>, o: Output) -> LabResult<i32> {
    emit(out, &o.text)?;
    Ok(o.code)
}

pub fn run(cli: Cli) -> LabResult<i32> {
    match cli.command {
        Command::Analytic(a) => {
            let mut cfg: AnalyticConfig = load_or_default(a.config.as_deref())?;
            if let Some(v) = a.lambda {
                cfg.lambda = v;
            }
            if let Some(v) = a.h {
                cfg.h = v;
            }
            if let Some(v) = a.nmax {
                cfg.nmax = v;
            }
            if let Some(v) = a.distances {
                cfg.distances = v;
            }
            if let Some(v) = a.spacing {
                cfg.spacing = v;
            }
            let format = match a.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            };
            let table = match a.table {
                TableArg::Correlators => Table::Correlators,
                TableArg::Energies => Table::Energies,
            };
            finish(a.out.as_deref(), commands::analytic(&cfg, format, table)?)
        }
        Command::Qet(a) => protocol_command("qet", a),
        Command::Qed(a) => protocol_command("qed", a),
        Command::Cooling(a) => {
            let mut cfg: CoolingRunConfig = load_or_default(a.config.as_deref())?;
            a.model.apply(&mut cfg.model);
            if let Some(v) = a.supplier {
                cfg.supplier_site = v;
            }
            if let Some(v) = a.supplier_axis {
                cfg.supplier_axis = v;
            }
            if let Some(f) = a.family {
                cfg.family = match f {
                    FamilyArg::Unitary => OperationFamily::Unitary,
                    FamilyArg::TwoElement => OperationFamily::TwoElement,
                };
            }
            if let Some(v) = a.grid {
                cfg.grid = v;
            }
            if let Some(v) = a.tolerance {
                cfg.tolerance = v;
            }
            if let Some(v) = a.max_iterations {
                cfg.max_iterations = v;
            }
            if let Some(v) = a.spacing {
                cfg.spacing = v;
            }
            finish(a.out.as_deref(), commands::cooling(&cfg)?)
        }
        Command::Netsim(a) => {
            if let Some(path) = &a.replay {
                return finish(a.out.as_deref(), commands::netsim_replay(path)?);
            }
            let path = a.scenario.as_deref().expect("clap requires --scenario or --replay");
            let mut cfg: ScenarioConfig = read_json(path)?;
            if let Some(s) = a.seed {
                cfg.session.seed = s;
            }
            if let Some(s) = a.attack {
                cfg.session.scenario = match s {
                    ScenarioArg::Honest => AttackScenario::Honest,
                    ScenarioArg::Eavesdrop => AttackScenario::Eavesdrop,
                    ScenarioArg::Impersonate => AttackScenario::Impersonate,
                };
            }
            finish(a.out.as_deref(), commands::netsim_run(&cfg)?)
        }
        Command::Validate(a) => {
            let ids = select(&a.only)?;
            let tol = match &a.tolerances {
                Some(p) => Tolerances::load(p)?,
                None => Tolerances::default(),
            };
            let (text, json) = commands::validate(&ids, &tol)?;
            if let Some(p) = &a.out {
                emit(Some(p), &json)?;
            }
            finish(None, text)
        }
        Command::DumpState(a) => {
            if let Some(path) = &a.load {
                return finish(a.out.as_deref(), commands::load_state(path)?);
            }
            let mut cfg: DumpConfig = load_or_default(a.config.as_deref())?;
            a.model.apply(&mut cfg.protocol.model);
            if let Some(c) = &a.consumers {
                cfg.protocol.consumers = c.clone();
            }
            if let Some(s) = a.stage {
                cfg.stage = match s {
                    StageArg::Ground => StateStage::Ground,
                    StageArg::Measured => StateStage::Measured,
                    StageArg::Qed => StateStage::Qed,
                    StageArg::Cooled => StateStage::Cooled,
                };
            }
            finish(a.out.as_deref(), commands::dump_state(&cfg)?)
        }
    }
}

fn protocol_command(name: &str, a: ProtocolArgs) -> LabResult<i32> {
    let mut cfg: ProtocolConfig = load_or_default(a.config.as_deref())?;
    a.apply(&mut cfg);
    finish(a.out.as_deref(), commands::protocol(name, &cfg)?)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qetlab: error: {e}");
            e.exit_code()
        }
    }
}
