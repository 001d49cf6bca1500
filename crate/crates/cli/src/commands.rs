use std::fmt::Write as _;
use std::str::FromStr;

use clap::ValueEnum;
use cvqn::decomposition::{lexicographic_orderings, sample_orderings, MAX_EXHAUSTIVE_USERS};
use cvqn::sim::{estimate_all, read_block, simulate, write_block, write_csv, EstimateReport};
use cvqn::{
    decompose_orderings, key_rate, DecompositionTable, NetworkParams, Ordering, RateMode,
    TrustModel,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{CliError, Command, Format, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustSelection {
    All,
    One(TrustModel),
}

impl TrustSelection {
    pub fn models(self) -> Vec<TrustModel> {
        match self {
            TrustSelection::All => TrustModel::ALL.to_vec(),
            TrustSelection::One(t) => vec![t],
        }
    }
}

impl FromStr for TrustSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(TrustSelection::All);
        }
        s.parse().map(TrustSelection::One).map_err(|e: cvqn::Error| e.to_string())
    }
}

/// `all` or a 1-based user number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserSelection {
    All,
    One(usize),
}

impl FromStr for UserSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(UserSelection::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(UserSelection::One(k)),
            _ => Err(format!("user must be `all` or a number from 1, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderSpec {
    All,
    Sample { count: usize, seed: u64 },
    Explicit(Vec<Ordering>),
}

impl FromStr for OrderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_orders(s)
    }
}

pub fn parse_orders(s: &str) -> Result<OrderSpec, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("all") {
        return Ok(OrderSpec::All);
    }
    if let Some(rest) = s.strip_prefix("sample:") {
        let mut parts = rest.split(':');
        let count = parts
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .filter(|&c| c > 0)
            .ok_or_else(|| format!("bad sample count in {s:?}"))?;
        let seed = match parts.next() {
            Some(p) => p.parse().map_err(|_| format!("bad sample seed in {s:?}"))?,
            None => 0,
        };
        if parts.next().is_some() {
            return Err(format!("expected sample:K[:SEED], got {s:?}"));
        }
        return Ok(OrderSpec::Sample { count, seed });
    }
    s.split(';')
        .map(|o| o.parse::<Ordering>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(OrderSpec::Explicit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Line loss in dB before a uniform 1:M split.
    #[value(name = "loss_db")]
    LossDb,
    /// Block size, log-spaced.
    #[value(name = "N")]
    N,
    /// Modulation variance in SNU.
    #[value(name = "V_M")]
    ModulationVariance,
    /// Excess noise of every user in mSNU.
    #[value(name = "epsilon")]
    Epsilon,
}

impl SweepParam {
    fn column(self) -> &'static str {
        match self {
            SweepParam::LossDb => "loss_db",
            SweepParam::N => "N",
            SweepParam::ModulationVariance => "V_M",
            SweepParam::Epsilon => "epsilon_msnu",
        }
    }

    fn apply(self, base: &NetworkParams, x: f64) -> Result<NetworkParams, CliError> {
        let mut p = base.clone();
        match self {
            SweepParam::LossDb => {
                let eta = 10f64.powf(-x / 10.0) / p.num_users() as f64;
                for u in &mut p.users {
                    u.transmittance = eta;
                    u.interval = None;
                }
            }
            SweepParam::N => p.block_size = x.round() as u64,
            SweepParam::ModulationVariance => p.modulation_variance = x,
            SweepParam::Epsilon => {
                for u in &mut p.users {
                    u.excess_noise = x * 1e-3;
                    u.interval = None;
                }
            }
        }
        p.validate()
            .map_err(|e| CliError::Config(format!("{} = {x}: {e}", self.column())))?;
        Ok(p)
    }

    fn grid(self, from: f64, to: f64, steps: usize) -> Result<Vec<f64>, CliError> {
        if steps == 0 {
            return Err(CliError::Config("steps must be at least 1".into()));
        }
        if !from.is_finite() || !to.is_finite() {
            return Err(CliError::Config("sweep bounds must be finite".into()));
        }
        if steps == 1 {
            return Ok(vec![from]);
        }
        if to <= from {
            return Err(CliError::Config(format!(
                "sweep range must increase, got {from} to {to}"
            )));
        }
        let log = self == SweepParam::N;
        if log && from <= 0.0 {
            return Err(CliError::Config("N sweep needs positive bounds".into()));
        }
        let (a, b) = if log { (from.log10(), to.log10()) } else { (from, to) };
        Ok((0..steps)
            .map(|i| {
                let t = a + (b - a) * i as f64 / (steps - 1) as f64;
                if log {
                    10f64.powf(t)
                } else {
                    t
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyrateRow {
    /// 1-based.
    pub user: usize,
    pub rates: Vec<(TrustModel, f64)>,
    pub non_positive: Vec<TrustModel>,
}

pub fn keyrate_rows(
    params: &NetworkParams,
    trust: TrustSelection,
    user: UserSelection,
    mode: RateMode,
) -> Result<Vec<KeyrateRow>, CliError> {
    let users: Vec<usize> = match user {
        UserSelection::All => (0..params.num_users()).collect(),
        UserSelection::One(k) if k <= params.num_users() => vec![k - 1],
        UserSelection::One(k) => {
            return Err(CliError::Config(format!(
                "user {k} does not exist; the network has {} users",
                params.num_users()
            )))
        }
    };
    let models = trust.models();
    let jobs: Vec<(usize, TrustModel)> = users
        .iter()
        .flat_map(|&k| models.iter().map(move |&t| (k, t)))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(k, t)| key_rate(params, t, k, mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reports
        .chunks(models.len())
        .map(|chunk| KeyrateRow {
            user: chunk[0].user + 1,
            rates: chunk.iter().map(|r| (r.trust, r.rate)).collect(),
            non_positive: chunk.iter().filter(|r| r.non_positive).map(|r| r.trust).collect(),
        })
        .collect())
}

pub fn decompose_table(
    params: &NetworkParams,
    orders: &OrderSpec,
    mode: RateMode,
) -> Result<DecompositionTable, CliError> {
    let m = params.num_users();
    let list = match orders {
        OrderSpec::All => {
            if m > MAX_EXHAUSTIVE_USERS {
                return Err(CliError::Guard(format!(
                    "{m} users would need {m}! orderings; `--orders all` is limited to {MAX_EXHAUSTIVE_USERS} users, use `--orders sample:K` instead"
                )));
            }
            lexicographic_orderings(m)?
        }
        OrderSpec::Sample { count, seed } => sample_orderings(m, *count, *seed)?,
        OrderSpec::Explicit(list) => list.clone(),
    };
    Ok(decompose_orderings(params, &list, mode)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// 1-based.
    pub user: usize,
    pub finite: Vec<(TrustModel, f64)>,
    pub asymptotic: Vec<(TrustModel, f64)>,
}

pub fn sweep_rows(
    base: &NetworkParams,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: usize,
    trust: TrustSelection,
) -> Result<Vec<SweepRow>, CliError> {
    let grid = param.grid(from, to, steps)?;
    let points = grid
        .iter()
        .map(|&x| param.apply(base, x).map(|p| (x, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let per_point = points
        .par_iter()
        .map(|(x, p)| {
            let fin = keyrate_rows(p, trust, UserSelection::All, RateMode::Finite)?;
            let asym = keyrate_rows(p, trust, UserSelection::All, RateMode::Asymptotic)?;
            Ok(fin
                .into_iter()
                .zip(asym)
                .map(|(f, a)| SweepRow {
                    value: *x,
                    user: f.user,
                    finite: f.rates,
                    asymptotic: a.rates,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn estimate_report(
    params: &NetworkParams,
    block: &cvqn::SymbolBlock,
) -> Result<EstimateReport, CliError> {
    if block.num_users() != params.num_users() {
        return Err(CliError::Input(format!(
            "block has {} users, config has {}",
            block.num_users(),
            params.num_users()
        )));
    }
    let noises: Vec<f64> = params.users.iter().map(|u| u.trusted_noise).collect();
    Ok(estimate_all(
        &block.moments(),
        params.modulation_variance,
        params.detector_efficiency,
        &noises,
        params.eps_pe,
    )?)
}

fn num(x: f64) -> String {
    format!("{x:.8}")
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn render_keyrate(rows: &[KeyrateRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("user");
            for (t, _) in rows.first().map(|r| r.rates.as_slice()).unwrap_or(&[]) {
                write!(s, ",{t}").unwrap();
            }
            s.push('\n');
            for r in rows {
                write!(s, "{}", r.user).unwrap();
                for (_, v) in &r.rates {
                    write!(s, ",{}", num(*v)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut o = serde_json::Map::new();
                    o.insert("user".into(), r.user.into());
                    for (t, v) in &r.rates {
                        o.insert(t.to_string(), (*v).into());
                    }
                    o.insert(
                        "non_positive".into(),
                        r.non_positive.iter().map(|t| t.to_string()).collect::<Vec<_>>().into(),
                    );
                    o.into()
                })
                .collect();
            json(&rows)
        }
    }
}

fn decompose_summary(t: &DecompositionTable) -> String {
    format!(
        "rows={} joint_rate={} max_row_spread={:.3e}",
        t.rows.len(),
        num(t.joint_rate),
        t.max_row_spread
    )
}

fn render_decompose(t: &DecompositionTable, m: usize, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("order");
            for k in 1..=m {
                write!(s, ",K{k}").unwrap();
            }
            s.push_str(",row_sum\n");
            for row in &t.rows {
                write!(s, "\"{}\"", row.order).unwrap();
                for k in 0..m {
                    write!(s, ",{}", num(row.contribution_of(k).unwrap_or(f64::NAN))).unwrap();
                }
                writeln!(s, ",{}", num(row.row_sum)).unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = t
                .rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "order": row.order.to_string(),
                        "contributions": (0..m).map(|k| row.contribution_of(k)).collect::<Vec<_>>(),
                        "row_sum": row.row_sum,
                    })
                })
                .collect();
            json(&serde_json::json!({
                "rows": rows,
                "joint_rate": t.joint_rate,
                "max_row_spread": t.max_row_spread,
            }))
        }
    }
}

fn render_sweep(rows: &[SweepRow], param: SweepParam, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("{},user", param.column());
            if let Some(r) = rows.first() {
                for (t, _) in &r.finite {
                    write!(s, ",{t}_finite").unwrap();
                }
                for (t, _) in &r.asymptotic {
                    write!(s, ",{t}_asymptotic").unwrap();
                }
            }
            s.push('\n');
            for r in rows {
                write!(s, "{},{}", r.value, r.user).unwrap();
                for (_, v) in r.finite.iter().chain(&r.asymptotic) {
                    write!(s, ",{}", num(*v)).unwrap();
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut o = serde_json::Map::new();
                    o.insert(param.column().into(), r.value.into());
                    o.insert("user".into(), r.user.into());
                    for (t, v) in &r.finite {
                        o.insert(format!("{t}_finite"), (*v).into());
                    }
                    for (t, v) in &r.asymptotic {
                        o.insert(format!("{t}_asymptotic"), (*v).into());
                    }
                    o.into()
                })
                .collect();
            json(&rows)
        }
    }
}

fn render_estimate(report: &EstimateReport, params: &NetworkParams, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => {
            let mut s = String::from(
                "user,trusted_noise_msnu,transmittance,loss_db,excess_noise_msnu,transmittance_min,transmittance_max,excess_noise_min_msnu,excess_noise_max_msnu,flags\n",
            );
            for (e, u) in report.users.iter().zip(&params.users) {
                let mut flags = Vec::new();
                if e.negative_excess_noise {
                    flags.push("negative_excess_noise");
                }
                if e.negative_gain {
                    flags.push("negative_gain");
                }
                writeln!(
                    s,
                    "{},{:.2},{:.6},{:.2},{:.4},{:.6},{:.6},{:.4},{:.4},{}",
                    e.user + 1,
                    u.trusted_noise * 1e3,
                    e.transmittance,
                    -10.0 * e.transmittance.log10(),
                    e.excess_noise * 1e3,
                    e.region.transmittance.0,
                    e.region.transmittance.1,
                    e.region.excess_noise.0 * 1e3,
                    e.region.excess_noise.1 * 1e3,
                    flags.join("|")
                )
                .unwrap();
            }
            s
        }
    }
}

pub(crate) fn dispatch(
    command: &Command,
    config: &RunConfig,
    format: Format,
) -> Result<Output, CliError> {
    let params = config.params()?;
    let config_mode = config.mode().unwrap_or(RateMode::Finite);
    match command {
        Command::Keyrate { trust, user, mode } => {
            let rows = keyrate_rows(&params, *trust, *user, mode.unwrap_or(config_mode))?;
            let notes = rows
                .iter()
                .flat_map(|r| {
                    r.non_positive
                        .iter()
                        .map(move |t| format!("user {} {t}: no positive key (reported as 0)", r.user))
                })
                .collect();
            Ok(Output {
                table: render_keyrate(&rows, format),
                notes,
            })
        }
        Command::Decompose { orders, mode } => {
            let t = decompose_table(&params, orders, mode.unwrap_or(config_mode))?;
            Ok(Output {
                table: render_decompose(&t, params.num_users(), format),
                notes: vec![decompose_summary(&t)],
            })
        }
        Command::Sweep {
            param,
            from,
            to,
            steps,
            trust,
        } => {
            let rows = sweep_rows(&params, *param, *from, *to, *steps, *trust)?;
            Ok(Output {
                table: render_sweep(&rows, *param, format),
                notes: Vec::new(),
            })
        }
        Command::Simulate {
            symbols,
            seed,
            out,
            csv,
        } => {
            let block = simulate(&params, *symbols, *seed)?;
            write_block(&block, out)?;
            let mut notes = vec![format!(
                "{} symbols, {} users, seed {} -> {}",
                symbols,
                params.num_users(),
                seed,
                out.display()
            )];
            if let Some(path) = csv {
                let file = std::fs::File::create(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                write_csv(&block, std::io::BufWriter::new(file))?;
                notes.push(format!("csv -> {}", path.display()));
            }
            Ok(Output {
                table: String::new(),
                notes,
            })
        }
        Command::Estimate { input, emit_config } => {
            let block = read_block(input)?;
            let report = estimate_report(&params, &block)?;
            let mut notes = vec![format!("n = {}, eps_pe = {:e}", report.n, report.eps_pe)];
            if let Some(path) = emit_config {
                let estimated = report.apply_to(&params)?;
                std::fs::write(path, RunConfig::from_params(&estimated).to_toml())
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                notes.push(format!("config -> {}", path.display()));
            }
            Ok(Output {
                table: render_estimate(&report, &params, format),
                notes,
            })
        }
    }
}
