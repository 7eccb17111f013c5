//! Command implementations. Each writes its table or report to `out`.

use std::fs;
use std::io::Write;
use std::path::Path;

use coherent_rx::feedforward::{exact_evaluation, optimize_plan_sequence, PlanOptimum, PLAN_FTOL};
use coherent_rx::single_channel::{single_channel_error, BETA_TOL};
use coherent_rx::{
    helstrom_bound, homodyne_error, kennedy_error, optimize_plan, BinaryEnsemble, ChannelPlan,
    DetectorModel, Error, ErrorReport, Method, SimConfig, Strategy,
};
use serde_json::{json, Map, Value};

use crate::cli::{
    BoundsArgs, Cli, Command, CurvesArgs, DetectorArgs, OptimizeArgs, ScheduleArg, SimulateArgs,
    StrategyArg, SweepArgs,
};
use crate::error::CliError;
use crate::format::{Cell, Table, SIGNIFICANT_DIGITS};
use crate::grid::{parse_grid, parse_interval, parse_list};
use crate::parallel::{par_map_grid, simulate_parallel};
use crate::plan_file::{DetectorSpec, PlanFile};

/// Header of every series file written by `curves`.
pub const CURVE_HEADER: [&str; 7] = ["m", "receiver", "error_rate", "beta_opt", "N", "std_error", "seed"];

/// Slack allowed when checking emitted rates against the Helstrom bound.
const BOUND_SLACK: f64 = 1e-12;

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    match &cli.command {
        Command::Bounds(a) => bounds(a, out),
        Command::SweepBeta(a) => sweep_beta(a, out),
        Command::Optimize(a) => optimize(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Curves(a) => curves(a, out),
    }
}

/// Maps a core failure onto the CLI's error classes.
fn core_err(err: Error) -> CliError {
    match err {
        Error::Domain { .. } | Error::Contract(_) => CliError::Usage(err.to_string()),
        Error::BranchBudget { branches, budget } => CliError::Numeric(format!(
            "outcome tree has {branches:e} branches, over the exact budget of {budget:e}; \
             estimate this plan with `simulate --mc`"
        )),
        _ => CliError::Numeric(err.to_string()),
    }
}

fn ensemble(m: f64, p1: f64) -> Result<BinaryEnsemble, CliError> {
    BinaryEnsemble::bpsk(m, p1).map_err(|e| CliError::Usage(format!("invalid prior or signal: {e}")))
}

fn detector(a: &DetectorArgs) -> Result<DetectorModel, CliError> {
    DetectorSpec {
        kind: a.detector,
        efficiency: a.efficiency,
        dark_mean: a.dark_mean,
        n_max: None,
    }
    .to_model()
}

fn homodyne_cell(m: f64, p1: f64) -> Result<Cell, CliError> {
    // Only defined for equal priors.
    if p1 == 0.5 {
        Ok(Cell::Num(homodyne_error(m).map_err(core_err)?))
    } else {
        Ok(Cell::Empty)
    }
}

fn bounds<W: Write>(a: &BoundsArgs, out: &mut W) -> Result<(), CliError> {
    let grid = parse_grid(&a.m)?;
    let mut table = Table::new(&["m", "p1", "helstrom", "kennedy", "homodyne"]);
    for &m in &grid {
        let e = ensemble(m, a.p1)?;
        table.push(vec![
            m.into(),
            a.p1.into(),
            helstrom_bound(&e).into(),
            kennedy_error(m, a.p1).map_err(core_err)?.into(),
            homodyne_cell(m, a.p1)?,
        ]);
    }
    table.write(out, a.json)
}

fn sweep_beta<W: Write>(a: &SweepArgs, out: &mut W) -> Result<(), CliError> {
    if a.points < 2 {
        return Err(CliError::Usage(format!("--points must be at least 2, got {}", a.points)));
    }
    let (lo, hi) = parse_interval(&a.beta_range)?;
    if lo < 0.0 {
        return Err(CliError::Usage(format!("increments must be >= 0, got {lo}")));
    }
    let e = ensemble(a.m, a.p1)?;
    let strategy = match a.strategy {
        StrategyArg::OnOff => Strategy::OnOff,
        StrategyArg::Pnr => Strategy::Pnr,
    };
    let step = (hi - lo) / (a.points - 1) as f64;
    let betas: Vec<f64> = (0..a.points)
        .map(|i| if i + 1 == a.points { hi } else { lo + step * i as f64 })
        .collect();
    let rates = par_map_grid(&betas, |b| single_channel_error(&e, b, strategy));
    let mut table = Table::new(&["beta", "error_rate"]);
    for (b, r) in betas.iter().zip(rates) {
        table.push(vec![(*b).into(), r.map_err(core_err)?.into()]);
    }
    table.write(out, a.json)
}

fn join(xs: &[f64]) -> Cell {
    Cell::Text(
        xs.iter()
            .map(|&x| crate::format::fmt_num(x))
            .collect::<Vec<_>>()
            .join(";"),
    )
}

fn optimize<W: Write>(a: &OptimizeArgs, out: &mut W) -> Result<(), CliError> {
    if a.channels == 0 {
        return Err(CliError::Usage("--channels must be at least 1".into()));
    }
    let grid = parse_grid(&a.m)?;
    let det = detector(&a.detector)?;
    let ensembles = grid.iter().map(|&m| ensemble(m, a.p1)).collect::<Result<Vec<_>, _>>()?;
    let results = par_map_grid(&grid, |m| {
        let e = BinaryEnsemble::bpsk(m, a.p1)?;
        optimize_plan(a.channels, &e, !a.inhomogeneous, det)
    });
    let mut table = Table::new(&["m", "N", "error_rate", "helstrom", "beta_opt", "betas", "fractions"]);
    for ((m, e), r) in grid.iter().zip(&ensembles).zip(results) {
        let PlanOptimum { plan, error_rate } = r.map_err(core_err)?;
        table.push(vec![
            (*m).into(),
            a.channels.into(),
            error_rate.into(),
            helstrom_bound(e).into(),
            plan.beta_schedule()[0].into(),
            join(plan.beta_schedule()),
            join(plan.energy_fractions()),
        ]);
    }
    table.write(out, a.json)
}

fn flag_plan(a: &SimulateArgs, det: DetectorModel) -> Result<ChannelPlan, CliError> {
    let betas: Option<Vec<f64>> = a.beta.as_deref().map(|s| parse_list(s, "beta")).transpose()?;
    let fractions: Option<Vec<f64>> =
        a.fractions.as_deref().map(|s| parse_list(s, "fraction")).transpose()?;
    let n = a
        .channels
        .or_else(|| betas.as_ref().filter(|b| b.len() > 1).map(Vec::len))
        .or_else(|| fractions.as_ref().map(Vec::len))
        .unwrap_or(1);
    if n == 0 {
        return Err(CliError::Usage("--channels must be at least 1".into()));
    }
    let plan = match (a.schedule, betas) {
        (Some(ScheduleArg::Asymptotic), _) => {
            if fractions.is_some() {
                return Err(CliError::Usage(
                    "the asymptotic schedule uses an even split; drop --fractions".into(),
                ));
            }
            ChannelPlan::asymptotic(n, a.m, det)
        }
        (None, Some(b)) => {
            let betas = match b.len() {
                1 => vec![b[0]; n],
                len if len == n => b,
                len => {
                    return Err(CliError::Usage(format!(
                        "{len} increments given for {n} channels"
                    )))
                }
            };
            match fractions {
                Some(f) => ChannelPlan::new(f, betas, det),
                None => ChannelPlan::homogeneous(betas, det),
            }
        }
        (None, None) => {
            return Err(CliError::Usage(
                "a plan needs --plan FILE, --beta LIST or --schedule asymptotic".into(),
            ))
        }
    };
    plan.map_err(|e| CliError::Usage(format!("invalid plan: {e}")))
}

fn report_json(r: &ErrorReport, a: &SimulateArgs, n: usize) -> Value {
    let num = |x: f64| Cell::Num(x).to_json();
    let mut obj = Map::new();
    obj.insert(
        "method".into(),
        Value::from(match r.method {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
        }),
    );
    obj.insert("error_rate".into(), num(r.error_rate));
    obj.insert("std_error".into(), num(r.std_error));
    obj.insert("trials".into(), Value::from(r.trials));
    obj.insert("seed".into(), r.seed.map_or(Value::Null, Value::from));
    obj.insert("m".into(), num(a.m));
    obj.insert("p1".into(), num(a.p1));
    obj.insert("channels".into(), Value::from(n));
    Value::Object(obj)
}

fn simulate<W: Write>(a: &SimulateArgs, out: &mut W) -> Result<(), CliError> {
    let e = ensemble(a.m, a.p1)?;
    let plan = match &a.plan {
        Some(path) => PlanFile::read(path)?.to_plan()?,
        None => flag_plan(a, detector(&a.detector)?)?,
    };
    let report = if a.exact {
        let exact = exact_evaluation(&plan, &e).map_err(core_err)?;
        ErrorReport::exact(exact.error_rate)
    } else {
        let cfg = SimConfig::new(a.trials, a.seed).with_shards(a.shards);
        simulate_parallel(&plan, &e, &cfg).map_err(core_err)?
    };
    serde_json::to_writer(&mut *out, &report_json(&report, a, plan.n_channels()))
        .map_err(CliError::io)?;
    writeln!(out)?;
    Ok(())
}

fn write_table(table: &Table, path: &Path, json: bool) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    table.write(&mut w, json)?;
    w.flush()?;
    Ok(())
}

fn curve_row(m: f64, receiver: &str, rate: Cell, beta_opt: Cell, n: Cell) -> Vec<Cell> {
    vec![m.into(), receiver.into(), rate, beta_opt, n, Cell::Empty, Cell::Empty]
}

fn curves<W: Write>(a: &CurvesArgs, out: &mut W) -> Result<(), CliError> {
    let mut grid = parse_grid(&a.m)?;
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut channels: Vec<usize> = parse_list(&a.channels, "channel")?;
    if channels.contains(&0) {
        return Err(CliError::Usage("channel counts must be at least 1".into()));
    }
    channels.sort_unstable();
    channels.dedup();
    let det = detector(&a.detector)?;
    let ensembles = grid.iter().map(|&m| ensemble(m, a.p1)).collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", a.out.display())))?;

    let n_max = *channels.last().expect("parse_list yields at least one value");
    let optima = par_map_grid(&grid, |m| {
        let e = BinaryEnsemble::bpsk(m, a.p1)?;
        optimize_plan_sequence(n_max, &e, !a.inhomogeneous, det)
    });
    let optima = optima.into_iter().collect::<Result<Vec<_>, _>>().map_err(core_err)?;

    let helstrom: Vec<f64> = ensembles.iter().map(helstrom_bound).collect();
    let mut series: Vec<(String, Table)> = Vec::new();
    let mut baseline = |name: &str, rate: &dyn Fn(usize, f64) -> Result<Cell, CliError>| {
        let mut t = Table::new(&CURVE_HEADER);
        for (i, &m) in grid.iter().enumerate() {
            t.push(curve_row(m, name, rate(i, m)?, Cell::Empty, Cell::Empty));
        }
        series.push((name.to_string(), t));
        Ok::<_, CliError>(())
    };
    baseline("helstrom", &|i, _| Ok(helstrom[i].into()))?;
    baseline("kennedy", &|_, m| Ok(kennedy_error(m, a.p1).map_err(core_err)?.into()))?;
    if a.p1 == 0.5 {
        baseline("homodyne", &|_, m| homodyne_cell(m, a.p1))?;
    } else {
        // Homodyne is only modeled for equal priors; keep the file, without rows.
        series.push(("homodyne".into(), Table::new(&CURVE_HEADER)));
    }
    for &n in &channels {
        let name = format!("receiver_n{n}");
        let mut t = Table::new(&CURVE_HEADER);
        for (i, &m) in grid.iter().enumerate() {
            let opt = &optima[i][n - 1];
            t.push(curve_row(
                m,
                &name,
                opt.error_rate.into(),
                opt.plan.beta_schedule()[0].into(),
                n.into(),
            ));
        }
        series.push((name, t));
    }

    for (name, t) in &series {
        for (i, row) in t.rows.iter().enumerate() {
            if let Cell::Num(rate) = row[2] {
                if rate < helstrom[i] - BOUND_SLACK {
                    return Err(CliError::Numeric(format!(
                        "{name} at m = {} reports {rate:e}, below the Helstrom bound {:e}",
                        grid[i], helstrom[i]
                    )));
                }
            }
        }
    }

    let ext = if a.json { "jsonl" } else { "csv" };
    let mut files = Vec::new();
    for (name, t) in &series {
        let file = format!("{name}.{ext}");
        write_table(t, &a.out.join(&file), a.json)?;
        files.push(file);
    }
    let manifest = json!({
        "command": "curves",
        "flags": {
            "m": a.m,
            "channels": channels,
            "p1": a.p1,
            "inhomogeneous": a.inhomogeneous,
            "detector": DetectorSpec::from_model(&det),
            "json": a.json,
        },
        "grid": grid,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": a.seed,
        "tolerances": {
            "beta": BETA_TOL,
            "plan_ftol": PLAN_FTOL,
            "helstrom_slack": BOUND_SLACK,
            "significant_digits": SIGNIFICANT_DIGITS,
        },
        "files": files,
    });
    let path = a.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(CliError::io)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    writeln!(out, "wrote {} series to {}", series.len(), a.out.display())?;
    Ok(())
}
