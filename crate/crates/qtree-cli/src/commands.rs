//! Subcommand drivers: turn a resolved [`RunConfig`] into tables.

use std::time::Instant;

use qtree::classical::{percolation_fixed_point, pool_evolve_classical, ClassicalConfig};
use qtree::output::{
    num, push_pool_rows, push_scan_rows, PoolRun, Table, ASYMMETRY_COLUMNS, CONTOUR_COLUMNS, REPLICA_COLUMNS,
    SCALING_COLUMNS, SU2_COLUMNS, U1_COLUMNS, VELOCITY_COLUMNS,
};
use qtree::replica::{asymmetry_map, build_expansion, forced_pool, iterate_moments, replica_grid, ForcedConfig};
use qtree::su2::{depth_series_partial, grid_angles, node_table, EnumerateConfig};
use qtree::u1::{bracket, classify, pool_evolve, PoolConfig, Protocol};
use qtree::wavefront::{
    find_critical_p, minimize_lambda, scaling_constants_su2, su2_contour, Family, VelocityCurve,
};
use qtree::{Error, Execution};

use crate::config::{Command, ConfigError, RunConfig};
use crate::selftest::{self, Fault};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] Error),
}

/// What a run produced. `failure` is set when the run stopped early but
/// the tables still hold everything finished before it.
#[derive(Debug, Default)]
pub struct Report {
    pub table: Option<Table>,
    /// Extra tables with their destination paths.
    pub extra: Vec<(String, Table)>,
    /// Human-readable results for stdout.
    pub lines: Vec<String>,
    pub failure: Option<Error>,
    /// Selftest verdict.
    pub checks_failed: usize,
}

/// Progress lines on stderr.
pub struct Progress {
    quiet: bool,
    start: Instant,
}

impl Progress {
    pub fn new(quiet: bool) -> Self {
        Self { quiet, start: Instant::now() }
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("[{:>8.1}s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
        }
    }
}

fn table_for(cfg: &RunConfig, columns: &[&str]) -> Table {
    let mut t = Table::new(columns);
    t.meta("generator", format!("qtree {}", env!("CARGO_PKG_VERSION")));
    for (k, v) in cfg.echo() {
        t.meta(k, v);
    }
    t
}

pub fn run(cfg: &RunConfig, fault: Fault, progress: &Progress) -> Result<Report, RunError> {
    match cfg.command {
        Command::U1Pool => u1_pool(cfg, progress),
        Command::U1Classical => u1_classical(cfg, progress),
        Command::KppVelocity => kpp_velocity(cfg),
        Command::KppCritical => kpp_critical(),
        Command::Su2Enum => su2_enum(cfg, progress),
        Command::Su2Replica => su2_replica(cfg, progress),
        Command::Su2Forced => su2_forced(cfg),
        Command::Selftest => Ok(run_selftest(cfg, fault)?),
    }
}

fn bracket_line(label: &str, what: &str, scan: &[(f64, Vec<qtree::stats::LogTypical>)]) -> String {
    if scan.len() < 2 {
        return format!("{label}: a single p, no bracket");
    }
    let phases: Result<Vec<_>, Error> = scan.iter().map(|(p, s)| classify(s).map(|c| (*p, c))).collect();
    match phases.and_then(|ph| bracket(&ph)) {
        Ok(b) => format!("{label}: {what} in [{}, {}]", b.lo, b.hi),
        Err(e) => format!("{label}: {e}"),
    }
}

fn u1_pool(cfg: &RunConfig, progress: &Progress) -> Result<Report, RunError> {
    let d = cfg.usize("d")?;
    let protocols: Vec<Protocol> = match cfg.string("protocol")?.as_str() {
        "both" => vec![Protocol::Purification, Protocol::Sharpening],
        other => vec![other.parse()?],
    };
    let (pool_size, k_max, seed) = (cfg.usize("pool_size")?, cfg.usize("k_max")?, cfg.u64("seed")?);
    let mut table = table_for(cfg, U1_COLUMNS);
    let mut lines = Vec::new();
    let d_label = d.to_string();
    for protocol in protocols {
        let mut scan = Vec::new();
        for p in cfg.p_values()? {
            let t0 = Instant::now();
            let pc = PoolConfig { pool_size, k_max, seed, ..PoolConfig::new(d, p, protocol) };
            let series: Vec<_> = pool_evolve(&pc)?.iter().map(|g| g.primary(protocol)).collect();
            let run = PoolRun { d: &d_label, p, protocol: protocol.name(), pool_size, seed };
            push_pool_rows(&mut table, &run, &series)?;
            progress.note(format!("{} d={d} p={p} done in {:.1}s", protocol.name(), t0.elapsed().as_secs_f64()));
            scan.push((p, series));
        }
        let what = if protocol == Protocol::Purification { "p_c" } else { "p_#" };
        lines.push(bracket_line(protocol.name(), what, &scan));
    }
    Ok(Report { table: Some(table), lines, ..Report::default() })
}

fn u1_classical(cfg: &RunConfig, progress: &Progress) -> Result<Report, RunError> {
    let (pool_size, k_max, seed) = (cfg.usize("pool_size")?, cfg.usize("k_max")?, cfg.u64("seed")?);
    let mut table = table_for(cfg, U1_COLUMNS);
    let mut scan = Vec::new();
    let mut lines = Vec::new();
    for p in cfg.p_values()? {
        let t0 = Instant::now();
        let cc = ClassicalConfig { pool_size, k_max, seed, ..ClassicalConfig::new(p) };
        let series = pool_evolve_classical(&cc)?;
        let run = PoolRun { d: "inf", p, protocol: Protocol::Sharpening.name(), pool_size, seed };
        push_pool_rows(&mut table, &run, &series)?;
        progress.note(format!("classical p={p} done in {:.1}s", t0.elapsed().as_secs_f64()));
        lines.push(format!("percolation <Z> at p = {p}: {}", percolation_fixed_point(p)?));
        scan.push((p, series));
    }
    lines.push(bracket_line("sharpening", "p_#", &scan));
    Ok(Report { table: Some(table), lines, ..Report::default() })
}

fn velocity_curve(cfg: &RunConfig) -> Result<(VelocityCurve, String), RunError> {
    Ok(match cfg.string("family")?.as_str() {
        "u1-d1" => {
            let p = cfg.f64("p")?;
            (VelocityCurve::U1D1 { p }, format!("p={p}"))
        }
        "u1-dinf" => {
            let p = cfg.f64("p")?;
            (VelocityCurve::U1Dinf { p }, format!("p={p}"))
        }
        _ => {
            let theta1 = cfg.f64("theta1")?;
            let theta2 = match cfg.opt_f64("theta2")? {
                Some(t) => t,
                None => su2_contour(&[theta1]).first().map(|x| x.1).ok_or_else(|| ConfigError::Invalid {
                    key: "theta1".into(),
                    msg: format!("no contour point at θ1 = {theta1}; set theta2"),
                })?,
            };
            (VelocityCurve::Su2P1 { theta1, theta2 }, format!("theta1={theta1};theta2={theta2}"))
        }
    })
}

fn kpp_velocity(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut lines = Vec::new();
    let table = match cfg.string("curve")?.as_str() {
        "velocity" => {
            let (curve, params) = velocity_curve(cfg)?;
            let mut t = table_for(cfg, VELOCITY_COLUMNS);
            let family = cfg.string("family")?;
            for lambda in cfg.lambda_values()? {
                let v = curve.eval(lambda)?;
                t.push(vec![family.clone(), params.clone(), num(lambda), num(v)])?;
            }
            let m = minimize_lambda(&curve)?;
            lines.push(format!("lambda* = {}, v(lambda*) = {}", m.lambda_star, m.v_min));
            t
        }
        "contour" => {
            let n = cfg.usize("grid")?;
            let mut t = table_for(cfg, CONTOUR_COLUMNS);
            for (a, b) in su2_contour(&grid_angles(n)) {
                t.push(vec![num(a), num(b)])?;
            }
            lines.push(format!("{} contour points", t.len()));
            t
        }
        _ => {
            let n = cfg.usize("grid")?;
            let mut t = table_for(cfg, SCALING_COLUMNS);
            for (a, b) in su2_contour(&grid_angles(n)) {
                let (kappa, k) = scaling_constants_su2(a, b)?;
                t.push(vec![num(a), num(b), num(kappa), num(k)])?;
            }
            lines.push(format!("{} contour points with scaling constants", t.len()));
            t
        }
    };
    Ok(Report { table: Some(table), lines, ..Report::default() })
}

fn kpp_critical() -> Result<Report, RunError> {
    let pc = find_critical_p(Family::U1D1)?;
    let ps = find_critical_p(Family::U1Dinf)?;
    let lc = minimize_lambda(&VelocityCurve::U1D1 { p: pc })?;
    let ls = minimize_lambda(&VelocityCurve::U1Dinf { p: ps })?;
    let lines = vec![
        format!("p_c = {pc:.10} (d = 1, lambda* = {:.10})", lc.lambda_star),
        format!("p_# = {ps:.10} (d = inf, lambda* = {:.10})", ls.lambda_star),
    ];
    Ok(Report { lines, ..Report::default() })
}

fn su2_enum(cfg: &RunConfig, progress: &Progress) -> Result<Report, RunError> {
    let (p, k_max, budget) = (cfg.f64("p")?, cfg.usize("k_max")?, cfg.usize("budget")?);
    let mut table = table_for(cfg, SU2_COLUMNS);
    let mut failure = None;
    if let (Some(t1), Some(t2)) = (cfg.opt_f64("theta1")?, cfg.opt_f64("theta2")?) {
        let ec = EnumerateConfig { budget, ..EnumerateConfig::new(t1, t2, p, k_max) };
        let (points, err) = depth_series_partial(&ec);
        push_scan_rows(&mut table, &points)?;
        failure = err;
    } else {
        let n = cfg.usize("grid")?;
        let angles = grid_angles(n);
        let t0 = Instant::now();
        let results = Execution::Parallel.map(n * n, |i| {
            let ec = EnumerateConfig {
                budget,
                exec: Execution::Sequential,
                ..EnumerateConfig::new(angles[i / n], angles[i % n], p, k_max)
            };
            depth_series_partial(&ec)
        });
        for (points, err) in results {
            push_scan_rows(&mut table, &points)?;
            if failure.is_none() {
                failure = err;
            }
        }
        progress.note(format!("{n}×{n} grid at k ≤ {k_max} done in {:.1}s", t0.elapsed().as_secs_f64()));
    }
    let lines = vec![format!("{} rows", table.len())];
    Ok(Report { table: Some(table), lines, failure, ..Report::default() })
}

fn su2_replica(cfg: &RunConfig, progress: &Progress) -> Result<Report, RunError> {
    let (p, n, k_max) = (cfg.f64("p")?, cfg.usize("n")?, cfg.usize("k_max")?);
    let mut table = table_for(cfg, REPLICA_COLUMNS);
    let mut extra = Vec::new();
    let mut lines = Vec::new();
    if let (Some(t1), Some(t2)) = (cfg.opt_f64("theta1")?, cfg.opt_f64("theta2")?) {
        let e = build_expansion(n, &node_table(t1, t2, p)?)?;
        for s in iterate_moments(&e, k_max)? {
            table.push(vec![num(t1), num(t2), num(p), n.to_string(), s.k.to_string(), num(s.r)])?;
        }
    } else {
        let g = cfg.usize("grid")?;
        let angles = grid_angles(g);
        let t0 = Instant::now();
        let r = replica_grid(&angles, p, n, k_max, Execution::Parallel)?;
        progress.note(format!("{g}×{g} replica grid done in {:.1}s", t0.elapsed().as_secs_f64()));
        for (i, ri) in r.iter().enumerate() {
            let (a, b) = (angles[i / g], angles[i % g]);
            table.push(vec![num(a), num(b), num(p), n.to_string(), k_max.to_string(), num(*ri)])?;
        }
        let dr = asymmetry_map(&angles, g, &r)?;
        let max = dr.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        lines.push(format!("max |delta r| = {max}"));
        if let Some(path) = cfg.raw("asymmetry_output") {
            let mut t = table_for(cfg, ASYMMETRY_COLUMNS);
            for (i, x) in dr.iter().enumerate() {
                t.push(vec![num(angles[i / g]), num(angles[i % g]), num(*x)])?;
            }
            extra.push((path.to_string(), t));
        }
    }
    Ok(Report { table: Some(table), extra, lines, ..Report::default() })
}

fn su2_forced(cfg: &RunConfig) -> Result<Report, RunError> {
    let (t1, t2, p) = (cfg.f64("theta1")?, cfg.f64("theta2")?, cfg.f64("p")?);
    let fc = ForcedConfig {
        pool_size: cfg.usize("pool_size")?,
        k_max: cfg.usize("k_max")?,
        seed: cfg.u64("seed")?,
        ..ForcedConfig::new(t1, t2, p)
    };
    let series = forced_pool(&fc)?;
    let mut table = table_for(cfg, REPLICA_COLUMNS);
    for (k, r) in series.iter().enumerate() {
        table.push(vec![num(t1), num(t2), num(p), "0".into(), k.to_string(), num(*r)])?;
    }
    let lines = vec![format!("mean r at k = {}: {}", fc.k_max, series.last().copied().unwrap_or(f64::NAN))];
    Ok(Report { table: Some(table), lines, ..Report::default() })
}

fn run_selftest(cfg: &RunConfig, fault: Fault) -> Result<Report, ConfigError> {
    let checks = selftest::run(cfg.u64("seed")?, fault);
    let lines = checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    Ok(Report { lines, checks_failed: checks.iter().filter(|c| !c.passed).count(), ..Report::default() })
}
