//! Command-line interface: calibrate, export the terminal-wealth curve and
//! the strategy surface, and run the Monte Carlo validation suite.
//!
//! Exit codes: 0 success, 1 validation failed, 2 configuration/input errors,
//! 3 infeasible constraint, 4 domain/capability/numeric errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use povar::config::{GridSpec, Parts, RunConfig};
use povar::error::{Error, Result};
use povar::market::{simulate_under_p, state_price};
use povar::montecarlo::{run_validation, ValidationSettings};
use povar::solver::{optimal_terminal_wealth, solve, solve_lambda1, Solution};
use povar::strategy::{StrategyContext, TIME_GUARD};

#[derive(Parser)]
#[command(
    name = "povar",
    version,
    about = "Optimal investment under a partially observed drift with VaR-type floor constraints"
)]
struct Cli {
    /// TOML configuration file; omitted = the built-in reference scenario.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// Override the RNG seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override the Monte Carlo path count.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,

    /// Override the state-price grid "min:max:count" for `curve`.
    #[arg(long, global = true, value_name = "SPEC", allow_hyphen_values = true)]
    grid: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the optimal terminal wealth and write solution.json.
    Solve {
        /// Print the effective configuration as TOML and exit.
        #[arg(long)]
        emit_config: bool,
    },
    /// Export the terminal wealth map x*(ξ) against the unconstrained payoff
    /// to curve.csv.
    Curve,
    /// Export wealth, position and invested fraction over a (t, y) grid to
    /// strategy.csv.
    Strategy {
        /// Override the time grid "min:max:count".
        #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
        t_grid: Option<String>,
        /// Override the observation grid "min:max:count".
        #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
        y_grid: Option<String>,
    },
    /// Run the Monte Carlo diagnostic suite and write validation.json.
    Validate {
        /// Additionally dump sampled terminal states to paths.csv.
        #[arg(long)]
        dump_paths: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.output.seed = seed;
    }
    if let Some(paths) = cli.paths {
        if paths == 0 {
            return Err(Error::InvalidInput("--paths must be positive".into()));
        }
        cfg.output.paths = paths;
    }
    if let Some(grid) = &cli.grid {
        GridSpec::parse(grid)?; // fail early with a config-class error
        cfg.output.grid = grid.clone();
    }
    for warning in cfg.warnings() {
        eprintln!("warning: {warning}");
    }
    Ok(cfg)
}

fn write_text(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, content)?;
    Ok(path)
}

fn to_json_line(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn print_solution(sol: &Solution) {
    let xi_upper = sol.xi_upper.map_or("none".to_string(), |v| format!("{v}"));
    println!(
        "regime={:?} lambda1={} xi_lower={} xi_upper={} budget_residual={}",
        sol.regime, sol.lambda1, sol.xi_lower, xi_upper, sol.budget_residual
    );
    for (i, p) in sol.constraint_prob.iter().enumerate() {
        println!("constraint_prob[{i}]={p}");
    }
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Solve { emit_config } => {
            if *emit_config {
                print!("{}", cfg.to_toml_string());
                return Ok(0);
            }
            let parts = cfg.to_parts()?;
            let sol = solve(
                &parts.prior,
                &parts.params,
                &parts.utility,
                &parts.constraint,
                parts.floor,
            )?;
            let path = write_text(&cli.out, "solution.json", &to_json_line(&sol))?;
            print_solution(&sol);
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Curve => cmd_curve(&cli, &cfg),
        Command::Strategy { t_grid, y_grid } => {
            cmd_strategy(&cli, &cfg, t_grid.as_deref(), y_grid.as_deref())
        }
        Command::Validate { dump_paths } => cmd_validate(&cli, &cfg, *dump_paths),
    }
}

fn cmd_curve(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    let parts = cfg.to_parts()?;
    let Parts {
        prior,
        params,
        utility,
        constraint,
        floor,
    } = &parts;
    let sol = solve(prior, params, utility, constraint, *floor)?;
    // Unconstrained reference payoff at its own multiplier.
    let (lambda_merton, _) = solve_lambda1(prior, params, utility, 0.0, None)?;
    let grid = GridSpec::parse(&cfg.output.grid)?;
    let mut csv = String::from("xi,x_star,x_merton\n");
    for xi in grid.points() {
        let x_star = optimal_terminal_wealth(&sol, utility, *floor, xi)?;
        let x_merton = utility.inverse_marginal(lambda_merton * xi)?;
        csv.push_str(&format!("{xi},{x_star},{x_merton}\n"));
    }
    let path = write_text(&cli.out, "curve.csv", &csv)?;
    print_solution(&sol);
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_strategy(
    cli: &Cli,
    cfg: &RunConfig,
    t_grid: Option<&str>,
    y_grid: Option<&str>,
) -> Result<i32> {
    let parts = cfg.to_parts()?;
    let sol = solve(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &parts.constraint,
        parts.floor,
    )?;
    let ctx = StrategyContext::new(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &sol,
        parts.floor,
    )?;
    let t_spec = GridSpec::parse(t_grid.unwrap_or(&cfg.output.t_grid))?;
    let y_spec = GridSpec::parse(y_grid.unwrap_or(&cfg.output.y_grid))?;
    let latest = parts.params.horizon - TIME_GUARD;
    if t_spec.start < 0.0 || t_spec.stop > latest {
        return Err(Error::Domain(format!(
            "strategy time grid must stay within [0, T − {TIME_GUARD:e}] = [0, {latest}]"
        )));
    }
    let mut csv = String::from("t,y,wealth,pi,pi_fraction\n");
    for t in t_spec.points() {
        for y in y_spec.points() {
            let wealth = ctx.h(t, y)?;
            let pi = ctx.pi_star(t, y)?;
            let fraction = pi / (wealth);
            csv.push_str(&format!("{t},{y},{wealth},{pi},{fraction}\n"));
        }
    }
    let path = write_text(&cli.out, "strategy.csv", &csv)?;
    println!(
        "strategy surface over {} x {} points (regime={:?})",
        t_spec.count, y_spec.count, sol.regime
    );
    println!("wrote {}", path.display());
    Ok(0)
}

fn cmd_validate(cli: &Cli, cfg: &RunConfig, dump_paths: bool) -> Result<i32> {
    let parts = cfg.to_parts()?;
    let settings = ValidationSettings {
        n_paths: cfg.output.paths,
        replication_paths: cfg.output.replication_paths,
        step_counts: cfg.output.steps.clone(),
        fsd_pairs: cfg.output.fsd_pairs,
        seed: cfg.output.seed,
    };
    let report = run_validation(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &parts.constraint,
        parts.floor,
        &settings,
    )?;
    let path = write_text(&cli.out, "validation.json", &to_json_line(&report))?;
    if dump_paths {
        let sol = solve(
            &parts.prior,
            &parts.params,
            &parts.utility,
            &parts.constraint,
            parts.floor,
        )?;
        let n = cfg.output.paths.min(10_000);
        let bundle = simulate_under_p(&parts.prior, &parts.params, n, 1, settings.seed)?;
        let wealth: Vec<f64> = (0..n)
            .map(|i| {
                let xi = state_price(
                    &parts.prior,
                    &parts.params,
                    parts.params.horizon,
                    bundle.terminal_y(i),
                );
                optimal_terminal_wealth(&sol, &parts.utility, parts.floor, xi)
            })
            .collect::<Result<_>>()?;
        let mut file = fs::File::create(cli.out.join("paths.csv"))?;
        bundle.write_terminal_csv(&mut file, Some(&wealth))?;
        file.flush()?;
        println!("wrote {}", cli.out.join("paths.csv").display());
    }
    for check in &report.constraint {
        println!(
            "constraint{}: estimate={} stderr={} target={} {}",
            check
                .belief_index
                .map_or(String::new(), |i| format!("[{i}]")),
            check.estimate,
            check.stderr,
            check.target,
            verdict(check.pass)
        );
    }
    println!(
        "budget: estimate={} stderr={} residual={} {}",
        report.budget.estimate,
        report.budget.stderr,
        report.budget.quadrature_residual,
        verdict(report.budget.pass)
    );
    if let Some(w) = &report.wealth_identity {
        println!(
            "wealth identity: h(0,0)={} x0={} {}",
            w.h00,
            w.x0,
            verdict(w.pass)
        );
    }
    if let Some(r) = &report.replication {
        for res in &r.results {
            println!(
                "replication[{} steps]: rms={} mean_abs={}",
                res.n_steps, res.rms_error, res.mean_abs_error
            );
        }
        println!(
            "replication halving factors: {:?} {}",
            r.halving_factors,
            verdict(r.pass)
        );
    }
    if let Some(f) = &report.fsd {
        println!(
            "fsd monotonicity: {} pairs, {} violations {}",
            f.n_pairs,
            f.violations,
            verdict(f.pass)
        );
    }
    println!("validation: {}", verdict(report.pass));
    println!("wrote {}", path.display());
    Ok(if report.pass { 0 } else { 1 })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
