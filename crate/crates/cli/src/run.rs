use crate::config::{self, overlay, params, BoundKind, RateKind, SamplerKind, VerifyMode};
use crate::{Cli, CliError, Command, Format};
use catastrophe_core::coupling::{max_discrepancy, simulate_coupled_with};
use catastrophe_core::exact::{
    default_n_states, tail_bounds, tail_probability, transient_distribution,
};
use catastrophe_core::lab::{self, is_estimate_tail, ldp_sandwich, lln_sup_check};
use catastrophe_core::process::{self, Sampler};
use catastrophe_core::rates::{self, ExtReal, ScalingSpec};
use catastrophe_core::rng::replica_rng;
use clap::CommandFactory;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;

pub const OUT_DIR_VAR: &str = "CATASTROPHE_OUT_DIR";

struct Emit {
    csv: String,
    json: serde_json::Value,
}

macro_rules! overlay_model {
    ($cfg:expr, $m:expr) => {
        overlay!($cfg, $m; lambda, mu, alpha)
    };
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn ext(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => num(x),
        ExtReal::PosInf => "inf".into(),
    }
}

fn envelope(command: &str, cfg: &impl Serialize, result: serde_json::Value) -> serde_json::Value {
    json!({ "command": command, "config": cfg, "result": result })
}

/// Exits with a usage error when `flag` is absent and no config file is given.
fn require(cli: &Cli, sub: &str, present: bool, flag: &str) {
    if present || cli.config.is_some() {
        return;
    }
    let mut cmd = Cli::command();
    cmd.build();
    let sub_cmd = cmd.find_subcommand_mut(sub).expect("known subcommand");
    sub_cmd
        .error(
            clap::error::ErrorKind::MissingRequiredArgument,
            format!("the argument '{flag}' is required unless --config is given"),
        )
        .exit();
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_deref();
    let (name, emit) = match &cli.command {
        Command::Simulate(args) => {
            require(cli, "simulate", args.horizon.is_some(), "--horizon");
            let mut cfg: config::SimulateConfig = config::load(path)?;
            overlay_model!(cfg, args.model);
            overlay!(cfg, args; horizon, init, sampler, replicas, seed);
            ("simulate", simulate(&cfg)?)
        }
        Command::Exact(args) => {
            require(cli, "exact", args.t.is_some(), "--t");
            let mut cfg: config::ExactConfig = config::load(path)?;
            overlay_model!(cfg, args.model);
            overlay!(cfg, args; t, init, n_states, tol, threshold);
            ("exact", exact(&cfg)?)
        }
        Command::Rate(args) => {
            require(cli, "rate", args.which.is_some(), "--which");
            let mut cfg: config::RateConfig = config::load(path)?;
            overlay_model!(cfg, args.model);
            overlay!(cfg, args; which, k, c, x_grid);
            ("rate", rate(&cfg)?)
        }
        Command::Bounds(args) => {
            require(cli, "bounds", args.which.is_some(), "--which");
            let mut cfg: config::BoundsConfig = config::load(path)?;
            overlay!(cfg, args; which, beta, z, u, a, v, delta, phi);
            ("bounds", bounds(&cfg)?)
        }
        Command::Couple(args) => {
            require(cli, "couple", args.horizon.is_some(), "--horizon");
            let mut cfg: config::CoupleConfig = config::load(path)?;
            overlay_model!(cfg, args.model);
            overlay!(cfg, args; x0, y0, horizon, replicas, seed);
            ("couple", couple(&cfg)?)
        }
        Command::Verify(args) => {
            require(cli, "verify", args.mode.is_some(), "--mode");
            let mut cfg: config::VerifyConfig = config::load(path)?;
            overlay_model!(cfg, args.model);
            overlay!(cfg, args; mode, b, a, x, t_grid, tol, n, eps, seed);
            let pool = match args.workers {
                Some(0) => return Err(CliError::Config("workers must be positive".into())),
                Some(w) => Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(w)
                        .build()
                        .map_err(|e| CliError::Config(e.to_string()))?,
                ),
                None => None,
            };
            let emit = match pool {
                Some(pool) => pool.install(|| verify(&cfg))?,
                None => verify(&cfg)?,
            };
            ("verify", emit)
        }
    };
    write_out(cli, name, emit)
}

fn destination(cli: &Cli, name: &str) -> Option<PathBuf> {
    if let Some(p) = &cli.output {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUT_DIR_VAR)?;
    let ext = match cli.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Some(PathBuf::from(dir).join(format!("{name}.{ext}")))
}

fn write_out(cli: &Cli, name: &str, emit: Emit) -> Result<(), CliError> {
    let text = match cli.format {
        Format::Csv => emit.csv,
        Format::Json => serde_json::to_string_pretty(&emit.json).expect("serializable") + "\n",
    };
    match destination(cli, name) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| {
                    CliError::Io(format!("cannot create {}: {e}", parent.display()))
                })?;
            }
            std::fs::write(&path, text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

fn simulate(cfg: &config::SimulateConfig) -> Result<Emit, CliError> {
    let p = params(cfg.lambda, cfg.mu, cfg.alpha)?;
    if cfg.replicas == 0 {
        return Err(CliError::Config("replicas must be positive".into()));
    }
    if cfg.replicas == 1 {
        let mut rng = replica_rng(cfg.seed, 0);
        let tr = match cfg.sampler {
            SamplerKind::Embedded => {
                process::simulate_embedded_with(&p, cfg.horizon, cfg.init, &mut rng)?
            }
            SamplerKind::Decomposed => {
                process::simulate_decomposed_with(&p, cfg.horizon, cfg.init, &mut rng)?
            }
        };
        let mut csv = String::from("time,state\n");
        writeln!(csv, "{},{}", num(0.0), tr.initial_state).unwrap();
        for &(t, s) in &tr.events {
            writeln!(csv, "{},{s}", num(t)).unwrap();
        }
        let json = envelope("simulate", cfg, serde_json::to_value(&tr).unwrap());
        return Ok(Emit { csv, json });
    }
    let sampler = match cfg.sampler {
        SamplerKind::Embedded => Sampler::Embedded,
        SamplerKind::Decomposed => Sampler::Decomposed,
    };
    let states =
        process::terminal_states(&p, sampler, cfg.horizon, cfg.init, cfg.seed, cfg.replicas)?;
    let hist = catastrophe_core::gof::histogram(&states);
    let mut csv = String::from("state,count\n");
    for (s, c) in hist.iter().enumerate() {
        writeln!(csv, "{s},{c}").unwrap();
    }
    let json = envelope("simulate", cfg, json!({ "histogram": hist }));
    Ok(Emit { csv, json })
}

fn exact(cfg: &config::ExactConfig) -> Result<Emit, CliError> {
    let p = params(cfg.lambda, cfg.mu, cfg.alpha)?;
    let top = cfg.threshold.unwrap_or(cfg.init).max(cfg.init) as u64;
    let n_states = cfg
        .n_states
        .unwrap_or_else(|| default_n_states(&p, cfg.t, top));
    let cfg = &config::ExactConfig {
        n_states: Some(n_states),
        ..cfg.clone()
    };
    let dist = transient_distribution(&p, cfg.t, cfg.init, n_states, cfg.tol)?;
    if let Some(m) = cfg.threshold {
        let tail = tail_probability(&dist, m)?;
        let (lo, hi) = tail_bounds(&dist, m)?;
        let mut csv = String::from("threshold,log_tail,log_lower,log_upper\n");
        writeln!(
            csv,
            "{m},{},{},{}",
            num(tail.value()),
            num(lo.value()),
            num(hi.value())
        )
        .unwrap();
        let json = envelope(
            "exact",
            cfg,
            json!({
                "n_states": n_states,
                "log_tail": tail,
                "log_lower": lo,
                "log_upper": hi,
                "truncation_mass": dist.truncation_mass,
                "certified_log_bound": dist.certified_log_bound,
            }),
        );
        return Ok(Emit { csv, json });
    }
    let mut csv = String::from("state,probability,log_probability\n");
    for j in 0..dist.n_states() {
        writeln!(
            csv,
            "{j},{},{}",
            num(dist.probability(j)),
            num(dist.log_probability(j).value())
        )
        .unwrap();
    }
    let json = envelope("exact", cfg, serde_json::to_value(&dist).unwrap());
    Ok(Emit { csv, json })
}

fn rate(cfg: &config::RateConfig) -> Result<Emit, CliError> {
    let p = params(cfg.lambda, cfg.mu, cfg.alpha)?;
    if matches!(cfg.which, RateKind::Jk) && !(cfg.k > 0.0) {
        return Err(CliError::Config(format!(
            "k must be positive (got {})",
            cfg.k
        )));
    }
    if matches!(cfg.which, RateKind::Window) && !(cfg.c > 0.0) {
        return Err(CliError::Config(format!(
            "c must be positive (got {})",
            cfg.c
        )));
    }
    let grid = config::parse_grid(&cfg.x_grid)?;
    let values: Vec<ExtReal> = grid
        .iter()
        .map(|&x| match cfg.which {
            RateKind::I1 => rates::rate_i1(x, &p),
            RateKind::Jk => rates::rate_jk(x, &p, cfg.k),
            RateKind::I2 => rates::rate_i2(x),
            RateKind::Window => rates::rate_poisson_window(x, &p, cfg.c),
        })
        .collect();
    let mut csv = String::from("x,rate\n");
    for (x, v) in grid.iter().zip(&values) {
        writeln!(csv, "{},{}", num(*x), ext(*v)).unwrap();
    }
    let rows: Vec<_> = grid
        .iter()
        .zip(&values)
        .map(|(x, v)| json!({ "x": x, "rate": v }))
        .collect();
    Ok(Emit {
        csv,
        json: envelope("rate", cfg, json!(rows)),
    })
}

fn bounds(cfg: &config::BoundsConfig) -> Result<Emit, CliError> {
    let log_bound = match cfg.which {
        BoundKind::PoissonLower => rates::poisson_lower_tail_bound(cfg.beta, cfg.z, cfg.u)?,
        BoundKind::CatastropheSum => {
            rates::catastrophe_sum_bound(cfg.a, cfg.v, cfg.delta, cfg.phi)?
        }
    };
    let csv = format!(
        "log_bound,bound\n{},{}\n",
        num(log_bound.value()),
        num(log_bound.value().exp())
    );
    Ok(Emit {
        csv,
        json: envelope("bounds", cfg, json!({ "log_bound": log_bound })),
    })
}

fn couple(cfg: &config::CoupleConfig) -> Result<Emit, CliError> {
    use rayon::prelude::*;
    let p = params(cfg.lambda, cfg.mu, cfg.alpha)?;
    if cfg.replicas == 0 {
        return Err(CliError::Config("replicas must be positive".into()));
    }
    if cfg.replicas == 1 {
        let ct = simulate_coupled_with(
            &p,
            cfg.x0,
            cfg.y0,
            cfg.horizon,
            &mut replica_rng(cfg.seed, 0),
        )?;
        let mut csv = String::from("time,x,y\n");
        writeln!(csv, "{},{},{}", num(0.0), ct.x0, ct.y0).unwrap();
        for &(t, x, y) in &ct.events {
            writeln!(csv, "{},{x},{y}", num(t)).unwrap();
        }
        let result = json!({ "trajectory": ct, "max_discrepancy": max_discrepancy(&ct) });
        return Ok(Emit {
            csv,
            json: envelope("couple", cfg, result),
        });
    }
    let rows = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let ct = simulate_coupled_with(
                &p,
                cfg.x0,
                cfg.y0,
                cfg.horizon,
                &mut replica_rng(cfg.seed, i),
            )?;
            let (x, y) = ct.final_states();
            Ok((max_discrepancy(&ct), x, y))
        })
        .collect::<Result<Vec<_>, catastrophe_core::Error>>()?;
    let mut csv = String::from("replica,max_discrepancy,final_x,final_y\n");
    for (i, (d, x, y)) in rows.iter().enumerate() {
        writeln!(csv, "{i},{d},{x},{y}").unwrap();
    }
    let gap = cfg.x0.abs_diff(cfg.y0);
    let worst = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let result = json!({
        "initial_gap": gap,
        "worst_discrepancy": worst,
        "paths_over_initial_gap": rows.iter().filter(|r| r.0 > gap).count(),
        "max_discrepancy": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
    });
    Ok(Emit {
        csv,
        json: envelope("couple", cfg, result),
    })
}

fn verify(cfg: &config::VerifyConfig) -> Result<Emit, CliError> {
    let p = params(cfg.lambda, cfg.mu, cfg.alpha)?;
    let spec = ScalingSpec::new(cfg.b, cfg.a)?;
    if cfg.t_grid.is_empty() {
        return Err(CliError::Config("t_grid is empty".into()));
    }
    let mut csv = String::new();
    let result = match cfg.mode {
        VerifyMode::Curve => {
            let r = lab::empirical_rate_curve(&p, &spec, cfg.x, &cfg.t_grid, cfg.tol)?;
            csv = r.to_csv();
            serde_json::to_value(&r).unwrap()
        }
        VerifyMode::Sandwich => {
            csv.push_str("T,threshold,window,clamped,log_lower,log_upper\n");
            let mut rows = Vec::new();
            for &t in &cfg.t_grid {
                let s = ldp_sandwich(&p, &spec, cfg.x, t)?;
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    num(t),
                    s.threshold,
                    num(s.window),
                    s.clamped,
                    num(s.lower.value()),
                    num(s.upper.value())
                )
                .unwrap();
                rows.push(json!({ "T": t, "sandwich": s }));
            }
            json!(rows)
        }
        VerifyMode::Is => {
            csv.push_str("T,log_estimate,rel_std_err,hits,samples\n");
            let mut rows = Vec::new();
            for &t in &cfg.t_grid {
                let e = is_estimate_tail(&p, &spec, cfg.x, t, cfg.n, cfg.seed)?;
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    num(t),
                    num(e.estimate.value()),
                    num(e.rel_std_err),
                    e.hits,
                    e.samples
                )
                .unwrap();
                rows.push(json!({ "T": t, "estimate": e }));
            }
            json!(rows)
        }
        VerifyMode::Lln => {
            csv.push_str("T,eps,fraction\n");
            let mut rows = Vec::new();
            for &t in &cfg.t_grid {
                let f = lln_sup_check(&p, &spec, t, cfg.eps, cfg.n, cfg.seed)?;
                writeln!(csv, "{},{},{}", num(t), num(cfg.eps), num(f)).unwrap();
                rows.push(json!({ "T": t, "fraction": f }));
            }
            json!(rows)
        }
    };
    Ok(Emit {
        csv,
        json: envelope("verify", cfg, result),
    })
}
