use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use twinfield::formats::{
    read_json, report_json, to_json, write_sweep_csv, write_text, ModelSettings, RequestsFile, TallyFile,
    TallyMetadata,
};
use twinfield::netplan::{
    max_pairs_bruteforce, network_rate, schedule, validate_plan, CapacityReport, MuInventory, MuLossModel, MuSpec,
    NetworkReport, NetworkSetup, PairingPlan, PortMode, BRUTEFORCE_MAX_USERS,
};
use twinfield::paramopt::{sweep as run_sweep, ParamBounds, SweepParams};
use twinfield::photon::{simulate as run_simulation, ChannelSpec, SimulationConfig, FIBER_LOSS_DB_PER_KM};
use twinfield::sns::{analyze, AnalysisOptions, AoppMeasurement, KeyRateReport, ProtocolParams, RateConversion, SecurityParams};
use twinfield::{Error, Result};

use crate::trace::flatten;
use crate::Global;

fn resolve(g: &Global, path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match &g.config_dir {
        Some(dir) if dir.join(path).exists() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

fn conversion(g: &Global) -> Result<RateConversion> {
    let c = RateConversion {
        clock_hz: g.clock_hz,
        signal_duty: g.duty,
    };
    c.to_bps(0.0)?;
    Ok(c)
}

fn sim_config(g: &Global) -> Result<SimulationConfig> {
    Ok(SimulationConfig {
        mode: g.mode,
        seed: g.seed,
        conversion: conversion(g)?,
        ..Default::default()
    })
}

fn port_mode(g: &Global) -> PortMode {
    if g.strict_ports {
        PortMode::Strict
    } else {
        PortMode::Inclusive
    }
}

fn security(g: &Global, path: &Option<PathBuf>) -> Result<SecurityParams> {
    let sec = match path {
        Some(p) => read_json(&resolve(g, p))?,
        None => SecurityParams::default(),
    };
    sec.validate()?;
    Ok(sec)
}

fn emit<T: Serialize>(g: &Global, kind: &str, settings: &ModelSettings, data: &T, text: &[String]) -> Result<()> {
    let json = report_json(kind, settings, data);
    if let Some(out) = &g.out {
        write_text(out, &json)?;
    }
    let mut stdout = std::io::stdout().lock();
    let lines = if g.json { vec![json] } else { text.to_vec() };
    for line in lines {
        writeln!(stdout, "{line}").map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(())
}

fn report_lines(report: &KeyRateReport) -> Vec<String> {
    let mut lines = vec![format!(
        "R = {:.6e} bit/pulse = {:.6e} bit/s ({})",
        report.rate_per_pulse,
        report.rate_bps,
        match &report.reason {
            None => "feasible".to_string(),
            Some(r) => format!("infeasible: {r}"),
        }
    )];
    let v = serde_json::to_value(report).expect("reports serialize");
    lines.extend(flatten(&v));
    lines
}

fn status(report: &KeyRateReport) -> u8 {
    if report.feasible {
        0
    } else {
        3
    }
}

#[derive(Args, Debug)]
pub struct KeyrateArgs {
    #[arg(long)]
    tally: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    security: Option<PathBuf>,
    /// Raw-key bits used to reconstruct pairing statistics; 0 uses the
    /// whole key.
    #[arg(long, default_value_t = 0)]
    aopp_subsample: u64,
}

#[derive(Serialize)]
struct KeyrateOutput<'a> {
    metadata: &'a TallyMetadata,
    aopp_measurement: AoppMeasurement,
    report: KeyRateReport,
}

pub fn keyrate(g: &Global, a: &KeyrateArgs) -> Result<u8> {
    let file: TallyFile = read_json(&resolve(g, &a.tally))?;
    let params: ProtocolParams = read_json(&resolve(g, &a.params))?;
    params.validate()?;
    let sec = security(g, &a.security)?;
    let cfg = sim_config(g)?;
    let tally = file.to_tally(&params, &cfg.filter)?;
    let subsample = if a.aopp_subsample == 0 { u64::MAX } else { a.aopp_subsample };
    let measured = if tally.raw_key_length() > 0.0 {
        file.aopp_measurement(&tally, subsample, g.seed)?
    } else {
        AoppMeasurement::default()
    };
    let opts = AnalysisOptions {
        aggregation: cfg.aggregation,
        conversion: cfg.conversion,
    };
    let report = analyze(&tally, &params, &sec, &measured, &opts)?;
    let settings = ModelSettings::new(&cfg, port_mode(g), &MuLossModel::default());
    let out = KeyrateOutput {
        metadata: &file.metadata,
        aopp_measurement: measured,
        report,
    };
    emit(g, "keyrate", &settings, &out, &report_lines(&out.report))?;
    Ok(status(&out.report))
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    params: PathBuf,
    /// Sent pulse pairs.
    #[arg(long, short = 'n', default_value_t = 1e10)]
    pulses: f64,
    #[arg(long)]
    security: Option<PathBuf>,
    /// Write the simulated tally here, in the ingestible tally format.
    #[arg(long)]
    tally_out: Option<PathBuf>,
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<u8> {
    let ch: ChannelSpec = read_json(&resolve(g, &a.channel))?;
    let params: ProtocolParams = read_json(&resolve(g, &a.params))?;
    let sec = security(g, &a.security)?;
    let cfg = sim_config(g)?;
    let sim = run_simulation(&params, &ch, a.pulses, &sec, &cfg)?;
    let mut file = TallyFile::from_tally(
        &sim.tally,
        TallyMetadata {
            pulses: a.pulses,
            loss_db: Some(ch.total_loss_db()),
            pair: None,
        },
    );
    file.aopp = Some(sim.aopp);
    if let Some(path) = &a.tally_out {
        write_text(path, &to_json(&file))?;
    }
    let settings = ModelSettings::new(&cfg, port_mode(g), &MuLossModel::default());
    #[derive(Serialize)]
    struct Out<'a> {
        tally: &'a TallyFile,
        report: &'a KeyRateReport,
    }
    let out = Out {
        tally: &file,
        report: &sim.report,
    };
    emit(g, "simulation", &settings, &out, &report_lines(&sim.report))?;
    Ok(status(&sim.report))
}

/// Parsed numeric range argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

/// `from:to:step`, a comma list, or a single value.
pub fn parse_range(s: &str) -> std::result::Result<Values, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values: Vec<f64> = match parts.as_slice() {
        [from, to, step] => {
            let (from, to, step) = (num(from)?, num(to)?, num(step)?);
            if !(step > 0.0 && to >= from) {
                return Err(format!("range '{s}' needs from <= to and a positive step"));
            }
            let count = ((to - from) / step + 1e-9).floor() as usize;
            (0..=count).map(|k| from + step * k as f64).collect()
        }
        [_] => s.split(',').map(num).collect::<std::result::Result<_, _>>()?,
        _ => return Err(format!("range '{s}' must be from:to:step or a comma list")),
    };
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(format!("range '{s}' must be non-negative"));
    }
    Ok(Values(values))
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("x").required(true).args(["loss_db", "km"])))]
#[command(group(clap::ArgGroup::new("p").required(true).args(["params", "optimize"])))]
pub struct SweepArgs {
    /// Channel template; its per-arm losses are replaced at each point.
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Re-optimize the parameters at every point.
    #[arg(long)]
    optimize: bool,
    /// Optimizer bounds; defaults apply when absent.
    #[arg(long, requires = "optimize")]
    bounds: Option<PathBuf>,
    /// Total loss in dB: from:to:step or a comma list.
    #[arg(long, value_parser = parse_range)]
    loss_db: Option<Values>,
    /// Total fiber length in km: from:to:step or a comma list.
    #[arg(long, value_parser = parse_range)]
    km: Option<Values>,
    #[arg(long, short = 'n', default_value_t = 1e10)]
    pulses: f64,
    #[arg(long)]
    security: Option<PathBuf>,
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<u8> {
    let template: ChannelSpec = match &a.channel {
        Some(p) => read_json(&resolve(g, p))?,
        None => ChannelSpec::default(),
    };
    let params = match (&a.params, &a.bounds) {
        (Some(p), _) => SweepParams::Fixed(read_json(&resolve(g, p))?),
        (None, Some(b)) => SweepParams::Optimize(read_json::<ParamBounds>(&resolve(g, b))?),
        (None, None) => SweepParams::Optimize(ParamBounds::default()),
    };
    let losses: Vec<f64> = match (&a.loss_db, &a.km) {
        (Some(l), _) => l.0.clone(),
        (None, Some(k)) => k.0.iter().map(|km| km * FIBER_LOSS_DB_PER_KM).collect(),
        (None, None) => unreachable!("clap requires one of --loss-db and --km"),
    };
    let sec = security(g, &a.security)?;
    let rows = run_sweep(&template, &losses, a.pulses, &sec, &params, &sim_config(g)?)?;
    match &g.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            write_sweep_csv(&rows, f)?;
        }
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(0)
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    #[arg(long)]
    inventory: PathBuf,
}

#[derive(Serialize)]
struct OracleCheck {
    mu: MuSpec,
    formula: u64,
    exhaustive: Option<u64>,
}

pub fn capacity(g: &Global, a: &CapacityArgs) -> Result<u8> {
    let inv: MuInventory = read_json(&resolve(g, &a.inventory))?;
    let report = inv.total_capacity(port_mode(g))?;
    let mut checks = Vec::new();
    for grp in &report.groups {
        let exhaustive = if grp.mu.n_users <= BRUTEFORCE_MAX_USERS {
            Some(max_pairs_bruteforce(&grp.mu)?)
        } else {
            None
        };
        checks.push(OracleCheck {
            mu: grp.mu,
            formula: grp.capacity_each,
            exhaustive,
        });
    }
    #[derive(Serialize)]
    struct Out<'a> {
        capacity: &'a CapacityReport,
        oracle: &'a [OracleCheck],
    }
    let mut text = vec![
        format!(
            "ports used {} of {} ({:?}{})",
            report.ports.used,
            report.ports.available,
            report.ports.mode,
            if report.ports.at_limit { ", at limit" } else { "" }
        ),
        format!("total capacity {} pairs", report.total_capacity),
    ];
    for c in &checks {
        text.push(format!(
            "  ({},{}) formula {} exhaustive {}",
            c.mu.n_users,
            c.mu.ports_per_user,
            c.formula,
            c.exhaustive.map_or("-".to_string(), |v| v.to_string())
        ));
    }
    text.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    let settings = ModelSettings::new(&sim_config(g)?, port_mode(g), &MuLossModel::default());
    emit(
        g,
        "capacity",
        &settings,
        &Out {
            capacity: &report,
            oracle: &checks,
        },
        &text,
    )?;
    Ok(0)
}

fn all_pairs(users: &[u32]) -> Vec<(u32, u32)> {
    users
        .iter()
        .enumerate()
        .flat_map(|(k, &a)| users[k + 1..].iter().map(move |&b| (a, b)))
        .collect()
}

fn requests_from(g: &Global, path: &Option<PathBuf>, users: Option<u32>, default_users: u32) -> Result<RequestsFile> {
    match path {
        Some(p) => read_json(&resolve(g, p)),
        None => {
            let active: Vec<u32> = (0..users.unwrap_or(default_users)).collect();
            let requests = all_pairs(&active);
            Ok(RequestsFile {
                active_users: active,
                requests,
            })
        }
    }
}

fn inventory_users(inv: &MuInventory) -> u32 {
    inv.groups().iter().map(|grp| grp.mu.n_users * grp.count).sum()
}

fn plan_lines(plan: &PairingPlan) -> Vec<String> {
    let mut text = vec![format!(
        "served {} of {} requested pairs ({})",
        plan.served(),
        plan.served() + plan.unserved.len(),
        if plan.exact { "optimal" } else { "greedy" }
    )];
    for x in &plan.assignments {
        let mu = plan.units[x.mu_id].mu;
        text.push(format!(
            "  {}-{} on MU {} ({},{})",
            x.user_a, x.user_b, x.mu_id, mu.n_users, mu.ports_per_user
        ));
    }
    text
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    inventory: PathBuf,
    /// Requests file; without it users 0..N-1 all request keys pairwise.
    #[arg(long)]
    requests: Option<PathBuf>,
    /// Active users when no requests file is given.
    #[arg(long)]
    users: Option<u32>,
}

pub fn plan(g: &Global, a: &PlanArgs) -> Result<u8> {
    let inv: MuInventory = read_json(&resolve(g, &a.inventory))?;
    let req = requests_from(g, &a.requests, a.users, inventory_users(&inv))?;
    let plan = schedule(&inv, &req.active_users, &req.requests, port_mode(g))?;
    validate_plan(&plan, &req.requests)?;
    let settings = ModelSettings::new(&sim_config(g)?, port_mode(g), &MuLossModel::default());
    emit(g, "plan", &settings, &plan, &plan_lines(&plan))?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct NetworkArgs {
    /// MU inventory; defaults to the 32-port example inventory.
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Total user-to-user fiber in km: one value, from:to:step or a list.
    #[arg(long, value_parser = parse_range)]
    distance_km: Values,
    #[arg(long, short = 'n', default_value_t = 1e11)]
    pulses: f64,
    /// Active users 0..N-1, all requesting pairwise; defaults to every
    /// user the inventory can attach.
    #[arg(long)]
    users: Option<u32>,
    #[arg(long)]
    requests: Option<PathBuf>,
    /// Fixed protocol parameters; otherwise chosen by effective loss.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    security: Option<PathBuf>,
    /// Loss per binary splitting stage inside an MU.
    #[arg(long, default_value_t = 1.0)]
    stage_loss_db: f64,
    /// Write per-distance totals (or per-pair rates for one distance) as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct DistanceRow {
    km: f64,
    total_rate_per_pulse: f64,
    total_rate_bps: f64,
    best_pair_bps: f64,
    worst_pair_bps: f64,
    pairs: usize,
    failed: usize,
}

#[derive(Serialize)]
struct PairRow {
    user_a: u32,
    user_b: u32,
    mu_id: usize,
    n_users: u32,
    ports_per_user: u32,
    effective_loss_db: f64,
    rate_per_pulse: f64,
    rate_bps: f64,
    feasible: bool,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn network(g: &Global, a: &NetworkArgs) -> Result<u8> {
    let inv = match &a.inventory {
        Some(p) => read_json(&resolve(g, p))?,
        None => MuInventory::example_32_port(),
    };
    if !(a.stage_loss_db.is_finite() && a.stage_loss_db >= 0.0) {
        return Err(Error::InvalidParams("--stage-loss-db must be non-negative".into()));
    }
    let req = requests_from(g, &a.requests, a.users, inventory_users(&inv))?;
    let plan = schedule(&inv, &req.active_users, &req.requests, port_mode(g))?;
    validate_plan(&plan, &req.requests)?;
    let params = match &a.params {
        Some(p) => Some(read_json::<ProtocolParams>(&resolve(g, p))?),
        None => None,
    };
    let setup = NetworkSetup {
        params,
        security: security(g, &a.security)?,
        pulses: a.pulses,
        loss_model: MuLossModel {
            stage_loss_db: a.stage_loss_db,
        },
        sim: sim_config(g)?,
    };
    let mut distances = a.distance_km.0.clone();
    distances.sort_by(f64::total_cmp);
    let mut reports: Vec<(f64, NetworkReport)> = Vec::new();
    for &km in &distances {
        let ch = ChannelSpec::symmetric_km(km);
        ch.validate()?;
        reports.push((km, network_rate(&plan, &setup, |_, _| ch)?));
    }
    let rows: Vec<DistanceRow> = reports
        .iter()
        .map(|(km, r)| DistanceRow {
            km: *km,
            total_rate_per_pulse: r.total_rate_per_pulse,
            total_rate_bps: r.total_rate_bps,
            best_pair_bps: r.best_pair().map_or(0.0, |p| p.rate_bps),
            worst_pair_bps: r.worst_pair().map_or(0.0, |p| p.rate_bps),
            pairs: r.pairs.len(),
            failed: r.failed,
        })
        .collect();
    if let Some(path) = &a.csv {
        if let [(_, r)] = reports.as_slice() {
            let pairs: Vec<PairRow> = r
                .pairs
                .iter()
                .map(|p| PairRow {
                    user_a: p.user_a,
                    user_b: p.user_b,
                    mu_id: p.mu_id,
                    n_users: p.mu.n_users,
                    ports_per_user: p.mu.ports_per_user,
                    effective_loss_db: p.effective_loss_db,
                    rate_per_pulse: p.rate_per_pulse,
                    rate_bps: p.rate_bps,
                    feasible: p.feasible,
                })
                .collect();
            write_csv(path, &pairs)?;
        } else {
            write_csv(path, &rows)?;
        }
    }
    let mut text = vec![format!(
        "{} pairs scheduled, {} unserved",
        plan.served(),
        plan.unserved.len()
    )];
    text.push(format!(
        "{:>8} {:>14} {:>14} {:>12} {:>12} {:>7}",
        "km", "bit/pulse", "bit/s", "best bit/s", "worst bit/s", "failed"
    ));
    for r in &rows {
        text.push(format!(
            "{:>8.1} {:>14.4e} {:>14.4e} {:>12.4e} {:>12.4e} {:>7}",
            r.km, r.total_rate_per_pulse, r.total_rate_bps, r.best_pair_bps, r.worst_pair_bps, r.failed
        ));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        plan: &'a PairingPlan,
        distances: Vec<NetworkAt<'a>>,
    }
    #[derive(Serialize)]
    struct NetworkAt<'a> {
        km: f64,
        network: &'a NetworkReport,
    }
    let out = Out {
        plan: &plan,
        distances: reports.iter().map(|(km, r)| NetworkAt { km: *km, network: r }).collect(),
    };
    let settings = ModelSettings::new(&setup.sim, port_mode(g), &setup.loss_model);
    emit(g, "network", &settings, &out, &text)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("10:20:5").unwrap().0, vec![10.0, 15.0, 20.0]);
        assert_eq!(parse_range("0:1:0.25").unwrap().0.len(), 5);
        assert_eq!(parse_range("3,1").unwrap().0, vec![3.0, 1.0]);
        assert_eq!(parse_range("7").unwrap().0, vec![7.0]);
        assert!(parse_range("5:1:1").is_err());
        assert!(parse_range("a").is_err());
        assert!(parse_range("-1").is_err());
    }
}
