//! Subcommand bodies. Each takes a fully resolved configuration and returns
//! the bytes to write plus the exit code; nothing here reads flags.

use std::path::Path;

use qetlab_core::analytic::{analytic_energies_with, AnalyticEnergies, CorrelatorTable, EnergyConfig, Provenance};
use qetlab_core::cooling::{cooling_state, minimize_residual, closed_form_optimal_ops, CoolingConfig, CoolingReport};
use qetlab_core::netsim::{replay, run_session, AttackScenario, Event, LedgerEntry, SessionLog};
use qetlab_core::protocol::{adversary_energy, measure_supplier, run_qed, AdversaryOutcome};
use qetlab_core::{ChainModel, PartyConfig, PlacementRules, ProtocolReport};
use serde::{Deserialize, Serialize};

use crate::config::{
    AnalyticConfig, CoolingRunConfig, DumpConfig, ProtocolConfig, ScenarioConfig, StateStage,
};
use crate::error::{exit, LabError, LabResult};
use crate::format::{csv_float, to_json_line, to_json_pretty, write_csv, Envelope, TOOL, VERSION};
use crate::state_io::{StateDump, StateSummary};
use crate::validation::{run_all, CriterionResult, Tolerances};

/// Largest accepted `|Tr[ρ⁽⁶⁾H] − (E_S − E_C)|` before a run is declared
/// numerically broken.
pub const BOOKKEEPING_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, code: exit::OK }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Correlators,
    Energies,
}

#[derive(Debug, Serialize)]
pub struct AnalyticReport {
    pub correlators: CorrelatorTable,
    pub energies: AnalyticEnergies,
}

pub fn analytic(cfg: &AnalyticConfig, format: Format, table: Table) -> LabResult<Output> {
    crate::config::check_lambda(cfg.lambda)?;
    let correlators = CorrelatorTable::build(cfg.lambda, cfg.nmax, Provenance::Quadrature)?;
    let ecfg = EnergyConfig {
        spacing: cfg.spacing,
        ..EnergyConfig::default()
    };
    let energies = analytic_energies_with(cfg.h, cfg.lambda, &cfg.distances, &ecfg)?;
    let text = match format {
        Format::Json => to_json_pretty(&Envelope::new(
            "analytic",
            cfg,
            &AnalyticReport {
                correlators,
                energies,
            },
        ))?,
        Format::Csv => {
            let config = to_json_line(cfg)?;
            let mut meta = vec![
                ("tool", TOOL.to_string()),
                ("version", VERSION.to_string()),
                ("command", "analytic".to_string()),
                ("config", config.trim_end().to_string()),
            ];
            let mut buf = Vec::new();
            match table {
                Table::Correlators => {
                    meta.push(("eps_over_h", csv_float(Some(correlators.eps_over_h))));
                    let rows: Vec<Vec<String>> = correlators
                        .rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.n.to_string(),
                                csv_float(Some(r.g)),
                                csv_float(r.delta),
                                csv_float(r.delta_closed),
                                csv_float(r.delta_asym),
                            ]
                        })
                        .collect();
                    write_csv(&mut buf, &meta, &["n", "G", "Delta", "Delta_closed", "Delta_asym"], &rows)?;
                }
                Table::Energies => {
                    meta.push(("e_a", csv_float(Some(energies.e_a))));
                    meta.push(("e_r", csv_float(Some(energies.e_r))));
                    meta.push(("e_c", csv_float(Some(energies.distributed.e_c))));
                    let rows: Vec<Vec<String>> = energies
                        .rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.d.to_string(),
                                csv_float(Some(r.xi)),
                                csv_float(Some(r.eta)),
                                csv_float(Some(r.theta)),
                                csv_float(Some(r.e_b)),
                                csv_float(r.e_b_asym),
                            ]
                        })
                        .collect();
                    write_csv(&mut buf, &meta, &["d", "xi", "eta", "theta", "E_B", "E_B_asym"], &rows)?;
                }
            }
            String::from_utf8(buf).expect("CSV output is UTF-8")
        }
    };
    Ok(Output::ok(text))
}

#[derive(Debug, Serialize)]
pub struct ProtocolOutput<'a> {
    #[serde(flatten)]
    pub report: &'a ProtocolReport,
    pub bookkeeping_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryOutcome>,
}

/// `qet` and `qed`; `qet` insists on exactly one consumer.
pub fn protocol(command: &str, cfg: &ProtocolConfig) -> LabResult<Output> {
    if command == "qet" && cfg.consumers.len() != 1 {
        return Err(LabError::Config(format!(
            "qet takes exactly one consumer, got {}; use qed for several",
            cfg.consumers.len()
        )));
    }
    let model = cfg.model.build()?;
    let supplier = cfg.supplier();
    let consumers = cfg.consumer_parties();
    let rules = cfg.rules();
    let (report, adversary) = match cfg.adversary_party() {
        Some(adv) => {
            let (run, out) = adversary_energy(&model, &supplier, &consumers, &adv, cfg.theta_d, &rules)?;
            (run.report, Some(out))
        }
        None => (run_qed(&model, &supplier, &consumers, &rules)?.report, None),
    };
    let defect = report.bookkeeping_defect();
    let text = to_json_pretty(&Envelope::new(
        command,
        cfg,
        &ProtocolOutput {
            report: &report,
            bookkeeping_defect: defect,
            adversary,
        },
    ))?;
    let code = if defect <= BOOKKEEPING_LIMIT {
        exit::OK
    } else {
        exit::NUMERICAL
    };
    Ok(Output { text, code })
}

/// Consumers every `spacing` sites on both sides of the supplier, as many
/// as the placement rules admit on this chain.
pub fn spaced_consumers(
    model: &ChainModel,
    supplier: &PartyConfig,
    template: &PartyConfig,
    spacing: usize,
    rules: &PlacementRules,
) -> Vec<PartyConfig> {
    let mut chosen: Vec<PartyConfig> = Vec::new();
    if spacing == 0 {
        return chosen;
    }
    let reach = model.sites() as i64;
    let mut m = 1i64;
    while m * (spacing as i64) < reach {
        for sign in [1i64, -1] {
            let site = supplier.site + sign * m * spacing as i64;
            let candidate = PartyConfig::consumer(site, template.axis);
            chosen.push(candidate);
            if rules.check(model, supplier, &chosen, None).is_err() {
                chosen.pop();
            }
        }
        m += 1;
    }
    chosen
}

#[derive(Debug, Serialize)]
pub struct CoolingOutput {
    #[serde(flatten)]
    pub report: CoolingReport,
    /// Infinite-chain `E_R` for the model's `h` and `λ`.
    pub e_r_analytic: f64,
    /// Consumer sites used for the finite-chain distributed energy.
    pub consumer_sites: Vec<i64>,
    pub e_c_finite: f64,
    pub bound_satisfied_finite: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

pub fn cooling(cfg: &CoolingRunConfig) -> LabResult<Output> {
    if !(cfg.tolerance.is_finite() && cfg.tolerance > 0.0) {
        return Err(LabError::Config(format!("tolerance = {} must be positive", cfg.tolerance)));
    }
    let model = cfg.model.build()?;
    let supplier = PartyConfig::supplier(cfg.supplier_site, cfg.supplier_axis);
    let rules = PlacementRules::default();
    let template = PartyConfig::consumer(0, qetlab_core::UnitVector::X);
    let consumers = spaced_consumers(&model, &supplier, &template, cfg.spacing, &rules);
    let e_c_finite = if consumers.is_empty() {
        0.0
    } else {
        run_qed(&model, &supplier, &consumers, &rules)?.report.e_c
    };
    let analytic = analytic_energies_with(
        cfg.model.h,
        cfg.model.lambda,
        &[],
        &EnergyConfig {
            spacing: cfg.spacing.max(1),
            ..EnergyConfig::default()
        },
    )?;
    let result = minimize_residual(
        &model,
        &supplier,
        &CoolingConfig {
            family: cfg.family,
            grid: cfg.grid,
            tolerance: cfg.tolerance,
            max_iterations: cfg.max_iterations,
        },
    )?;
    let finite = result.report(e_c_finite);
    let out = CoolingOutput {
        report: result.report(analytic.distributed.e_c),
        e_r_analytic: analytic.e_r,
        consumer_sites: consumers.iter().map(|c| c.site).collect(),
        e_c_finite,
        bound_satisfied_finite: finite.bound_satisfied,
        iterations: result.iterations,
        evaluations: result.evaluations,
    };
    let text = to_json_pretty(&Envelope::new("cooling", cfg, &out))?;
    // unconverged output is still written, flagged by `converged: false`
    let code = if result.converged { exit::OK } else { exit::NUMERICAL };
    Ok(Output { text, code })
}

/// One line of a netsim JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header {
        tool: String,
        version: String,
        config: ScenarioConfig,
    },
    Event(Event),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub scenario: AttackScenario,
    pub mu: u8,
    pub ledgers: Vec<LedgerEntry>,
    pub report: ProtocolReport,
    pub final_energy: f64,
    pub conservation_defect: f64,
}

fn scenario_rules(cfg: &ScenarioConfig) -> PlacementRules {
    PlacementRules {
        min_separation: cfg.min_separation,
        exactness_floor: cfg.exactness_floor,
    }
}

pub fn netsim_run(cfg: &ScenarioConfig) -> LabResult<Output> {
    let model = cfg.model.build()?;
    let log = run_session(&model, &cfg.session, &scenario_rules(cfg))?;
    let mut text = to_json_line(&Record::Header {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: cfg.clone(),
    })?;
    for e in &log.events {
        text.push_str(&to_json_line(&Record::Event(e.clone()))?);
    }
    text.push_str(&to_json_line(&Record::Summary(Summary {
        seed: log.seed,
        scenario: log.scenario,
        mu: log.mu,
        ledgers: log.ledgers.clone(),
        report: log.report.clone(),
        final_energy: log.final_energy,
        conservation_defect: log.conservation_defect(),
    }))?);
    let code = if log.report.bookkeeping_defect() <= BOOKKEEPING_LIMIT {
        exit::OK
    } else {
        exit::NUMERICAL
    };
    Ok(Output { text, code })
}

#[derive(Debug, Serialize)]
pub struct ReplayReport {
    pub events: usize,
    pub ledgers_match: bool,
    pub rerun_matches: bool,
    pub ledgers: Vec<LedgerEntry>,
}

/// Folds a recorded log back into ledgers and re-runs its scenario; both
/// must reproduce the file bit for bit.
pub fn netsim_replay(path: &Path) -> LabResult<Output> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut header = None;
    let mut events = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate() {
        let record: Record = serde_json::from_str(line)
            .map_err(|e| LabError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match record {
            Record::Header { config, .. } => header = Some(config),
            Record::Event(e) => events.push(e),
            Record::Summary(s) => summary = Some(s),
        }
    }
    let (Some(config), Some(summary)) = (header, summary) else {
        return Err(LabError::Config(format!("{}: missing header or summary", path.display())));
    };
    let log = SessionLog {
        seed: summary.seed,
        scenario: summary.scenario,
        mu: summary.mu,
        events,
        ledgers: summary.ledgers.clone(),
        report: summary.report.clone(),
        final_energy: summary.final_energy,
    };
    let replayed = replay(&log);
    let ledgers_match = replayed.len() == summary.ledgers.len()
        && replayed
            .iter()
            .zip(&summary.ledgers)
            .all(|(a, b)| a.node == b.node && a.balance.to_bits() == b.balance.to_bits());
    let rerun_matches = netsim_run(&config)?.text == text;
    let report = ReplayReport {
        events: log.events.len(),
        ledgers_match,
        rerun_matches,
        ledgers: replayed,
    };
    let out = to_json_pretty(&Envelope::new("netsim-replay", &config, &report))?;
    let code = if ledgers_match && rerun_matches {
        exit::OK
    } else {
        exit::VALIDATION
    };
    Ok(Output { text: out, code })
}

#[derive(Debug, Serialize)]
pub struct ValidationReport<'a> {
    pub criteria: &'a [CriterionResult],
    pub passed: usize,
    pub failed: usize,
}

/// Runs the selected criteria. Returns one text line per criterion and the
/// JSON report (which leaves out timings, so it is deterministic).
pub fn validate(ids: &[u8], tol: &Tolerances) -> LabResult<(Output, String)> {
    tol.check()?;
    let results = run_all(ids, tol)?;
    let passed = results.iter().filter(|r| r.passed).count();
    let failed = results.len() - passed;
    let mut text: String = results.iter().map(|r| format!("{r}\n")).collect();
    text.push_str(&format!("{passed} passed, {failed} failed\n"));
    let json = to_json_pretty(&Envelope::new(
        "validate",
        tol,
        &ValidationReport {
            criteria: &results,
            passed,
            failed,
        },
    ))?;
    let code = if failed == 0 { exit::OK } else { exit::VALIDATION };
    Ok((Output { text, code }, json))
}

pub fn dump_state(cfg: &DumpConfig) -> LabResult<Output> {
    let p = &cfg.protocol;
    let model = p.model.build()?;
    let supplier = p.supplier();
    let state = match cfg.stage {
        StateStage::Ground => model.ground_state(),
        StateStage::Measured => measure_supplier(&model, &supplier)?.0.to_state()?,
        StateStage::Qed => run_qed(&model, &supplier, &p.consumer_parties(), &p.rules())?
            .final_state
            .to_state()?,
        StateStage::Cooled => cooling_state(&model, &supplier, &closed_form_optimal_ops())?,
    };
    let dump = StateDump::from_state(&state)?;
    // a 10-site density matrix has 2^20 entries; keep it on one line
    Ok(Output::ok(to_json_line(&Envelope::new("dump-state", cfg, &dump))?))
}

pub fn load_state(path: &Path) -> LabResult<Output> {
    let dump = StateDump::load(path)?;
    let summary: StateSummary = dump.validate()?;
    let source = path.display().to_string();
    Ok(Output::ok(to_json_pretty(&Envelope::new("dump-state-load", &source, &summary))?))
}
