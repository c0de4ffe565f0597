use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

use qsf_core::drl::{
    evaluate, extract_pulse, train, Checkpoint, EnvConfig, ErrorSampling, PPOConfig, Phase, PolicyNetwork,
    RewardSchedule, StopReason,
};
use qsf_core::grape::{amplitudes_to_pulse, grape_optimize, GrapeConfig, GrapeInit, GrapeStatus};
use qsf_core::io::{load_json, load_pulse, write_pulse};
use qsf_core::qubit::scan::fmt_f64;
use qsf_core::qubit::{
    evolve_pulse, mhz_to_rad_per_s, relative_grid, scan_robustness, ControlField, DensityMatrix, ErrorPair, GridAxis,
    PulseSequence,
};
use qsf_core::sta::{
    ansatz_theta, detuning_from_theta, discretize, minimize_qsl, optimize_sensitivity, qsl_time, series_theta,
    AngleTrajectory, AnsatzParameter, Route, SensitivityTarget, SeriesCoefficients, MAX_QSL_ORDER,
};
use qsf_core::Error;

use crate::args::*;
use crate::manifest::Run;

fn field_from(args: &FieldArgs) -> Result<ControlField> {
    Ok(ControlField::from_mhz(args.omega_mhz, args.delta_max)?)
}

fn parse_alphas(text: &str) -> Result<SeriesCoefficients> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad coefficient {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeriesCoefficients::new(values)?)
}

#[derive(Debug, Serialize)]
struct SynthReport {
    route: Route,
    parameter: Value,
    #[serde(rename = "T_s")]
    duration_s: f64,
    #[serde(rename = "qsl_omega_T")]
    omega_t: f64,
    peak_detuning_rad_per_s: f64,
    steps: usize,
    nominal_population: f64,
}

/// Trajectory → detuning → piecewise-constant pulse, plus report and pulse files.
fn synthesize(run: &mut Run, traj: &AngleTrajectory, route: Route, parameter: Value, steps: usize) -> Result<SynthReport> {
    let continuous = detuning_from_theta(traj)?;
    let pulse = discretize(&continuous, steps)?;
    let report = SynthReport {
        route,
        parameter: parameter.clone(),
        duration_s: traj.duration(),
        omega_t: traj.field().omega() * traj.duration(),
        peak_detuning_rad_per_s: continuous.peak(),
        steps,
        nominal_population: qsf_core::qubit::final_population(&pulse, &ErrorPair::NONE)?,
    };
    let mut meta = Map::new();
    meta.insert("source".into(), json!(format!("sta-{route}")));
    meta.insert("parameter".into(), parameter);
    run.write_with("pulse.json", |out| write_pulse(out, &pulse, meta))?;
    run.write_json("report.json", &report)?;
    Ok(report)
}

pub fn sta(run: &mut Run, cmd: StaCommand) -> Result<()> {
    match cmd {
        StaCommand::Ansatz { a, synth } => {
            let field = field_from(&synth.field)?;
            run.set_config(&json!({"route": "ansatz", "a": a, "field": field, "samples": synth.samples, "steps": synth.steps}))?;
            let traj = ansatz_theta(AnsatzParameter::new(a)?, field, synth.samples)?;
            let report = synthesize(run, &traj, Route::Ansatz, json!(a), synth.steps)?;
            println!("ansatz a={a}: T = {:.4} ns, Omega*T = {:.6}", report.duration_s * 1e9, report.omega_t);
        }
        StaCommand::Series { alphas, synth } => {
            let field = field_from(&synth.field)?;
            let coeffs = parse_alphas(&alphas)?;
            run.set_config(&json!({"route": "series", "alphas": coeffs, "field": field, "samples": synth.samples, "steps": synth.steps}))?;
            let traj = series_theta(&coeffs, field, synth.samples)?;
            let report = synthesize(run, &traj, Route::Series, json!(coeffs), synth.steps)?;
            println!("series {:?}: T = {:.4} ns, Omega*T = {:.6}", coeffs.alphas(), report.duration_s * 1e9, report.omega_t);
        }
        StaCommand::Optimize { route, target, synth } => {
            let field = field_from(&synth.field)?;
            let target: SensitivityTarget = target.parse()?;
            let route = match route {
                RouteArg::Ansatz => Route::Ansatz,
                RouteArg::Series => Route::Series,
            };
            run.set_config(&json!({"route": route, "target": target, "field": field, "samples": synth.samples, "steps": synth.steps}))?;
            let best = optimize_sensitivity(route, target, &field)?;
            run.write_json("optimizer_report.json", &best)?;
            let traj = match route {
                Route::Ansatz => ansatz_theta(AnsatzParameter::new(best.parameter)?, field, synth.samples)?,
                Route::Series => series_theta(&SeriesCoefficients::new(vec![best.parameter])?, field, synth.samples)?,
            };
            synthesize(run, &traj, route, json!(best.parameter), synth.steps)?;
            println!(
                "{route} / {target}: parameter = {:.6}, residual = {:.3e}, T = {:.4} ns",
                best.parameter,
                best.residual,
                best.duration_s * 1e9
            );
        }
    }
    Ok(())
}

pub fn qsl(run: &mut Run, args: QslArgs) -> Result<()> {
    let omega = mhz_to_rad_per_s(args.omega_mhz);
    if !(omega.is_finite() && omega > 0.0) {
        bail!(Error::InvalidParameter(format!("omega must be > 0, got {} MHz", args.omega_mhz)));
    }
    let (coefficients, omega_t, converged) = match (args.order, args.alphas.as_deref()) {
        (Some(order), _) => {
            if order == 0 || order > MAX_QSL_ORDER {
                bail!(Error::InvalidParameter(format!("order must be in 1..={MAX_QSL_ORDER}, got {order}")));
            }
            let best = minimize_qsl(order)?;
            (best.coefficients, best.omega_t, best.converged)
        }
        (None, Some(text)) => {
            let coeffs = parse_alphas(text)?;
            let omega_t = qsl_time(&coeffs);
            (coeffs, omega_t, true)
        }
        (None, None) => bail!(Error::InvalidParameter("give --order or --alphas".into())),
    };
    run.set_config(&json!({"order": args.order, "alphas": args.alphas, "omega_rad_per_s": omega}))?;
    let report = json!({
        "coefficients": coefficients,
        "qsl_omega_T": omega_t,
        "T_s": omega_t / omega,
        "converged": converged,
    });
    run.write_json("qsl_report.json", &report)?;
    println!("Omega*T = {omega_t:.6} ({:.4} ns), alphas = {:?}", omega_t / omega * 1e9, coefficients.alphas());
    if !converged {
        bail!(Error::OptimizationFailed("QSL minimization did not converge".into()));
    }
    Ok(())
}

fn error_pair(field: &ControlField, errors: &ErrorArgs) -> Result<ErrorPair> {
    let err = ErrorPair::relative(field, errors.delta_err, errors.omega_err);
    err.check_finite()?;
    Ok(err)
}

pub fn sim(run: &mut Run, args: SimArgs) -> Result<()> {
    let (pulse, _) = load_pulse(&args.pulse)?;
    let err = error_pair(pulse.field(), &args.errors)?;
    run.set_config(&json!({"pulse": args.pulse, "delta_err_rel": args.errors.delta_err, "omega_err_rel": args.errors.omega_err}))?;
    let states = evolve_pulse(&DensityMatrix::ground(), &pulse, &err)?;
    let name = file_name(&args.out)?;
    run.write_with(&name, |out| {
        use std::io::Write;
        writeln!(out, "step,t_s,population")?;
        for (k, rho) in states.iter().enumerate() {
            writeln!(out, "{k},{},{}", fmt_f64(k as f64 * pulse.dt()), fmt_f64(rho.population_excited()))?;
        }
        Ok(())
    })?;
    let last = states.last().expect("trajectory includes the initial state").population_excited();
    println!("final population {last:.12}");
    Ok(())
}

pub fn scan(run: &mut Run, args: ScanArgs) -> Result<()> {
    let (pulse, _) = load_pulse(&args.pulse)?;
    let delta_axis: GridAxis = args.delta_grid.parse()?;
    let omega_axis: GridAxis = args.omega_grid.parse()?;
    run.set_config(&json!({"pulse": args.pulse, "delta_grid": delta_axis, "omega_grid": omega_axis}))?;
    let grid = relative_grid(pulse.field(), &delta_axis, &omega_axis);
    let table = scan_robustness(&pulse, &grid)?;
    let name = file_name(&args.out)?;
    run.write_with(&name, |out| table.write_csv(out))?;
    println!("{} points, min population {:.12}", table.rows.len(), table.min_population());
    Ok(())
}

/// Artifacts always land in --out-dir; only the file name of --out is used.
fn file_name(path: &Path) -> Result<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .with_context(|| format!("{} has no file name", path.display()))
}

fn env_config(args: &EnvArgs, phase: Option<Phase>, seed: u64) -> Result<EnvConfig> {
    if let Some(path) = &args.env {
        let cfg: EnvConfig = load_json(path)?;
        cfg.validate()?;
        return Ok(cfg);
    }
    let field = field_from(&args.field)?;
    let range = args.error_range;
    let error_sampling = match args.errors {
        ErrorMode::None => ErrorSampling::None,
        ErrorMode::SingleDelta => ErrorSampling::SingleDelta { range },
        ErrorMode::SingleOmega => ErrorSampling::SingleOmega { range },
        ErrorMode::Hybrid => ErrorSampling::Hybrid { range },
    };
    let schedule = args.schedule.unwrap_or(match phase {
        Some(Phase::Finetune) => ScheduleArg::Finetune,
        _ => ScheduleArg::Pretrain,
    });
    let reward_schedule = match schedule {
        ScheduleArg::Trivial => RewardSchedule::Trivial,
        ScheduleArg::Pretrain => RewardSchedule::Pretrain,
        ScheduleArg::Finetune => RewardSchedule::Finetune {
            threshold: args.threshold,
            constant: 1.0,
            boundary_bonus: args.boundary_bonus,
        },
    };
    let cfg = EnvConfig {
        field,
        n_steps: args.n_steps,
        total_time: args.time_ns * 1e-9,
        error_sampling,
        reward_schedule,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn ppo_config(args: &PpoArgs, seed: u64, allow_fresh: bool) -> Result<PPOConfig> {
    let mut cfg: PPOConfig = match &args.ppo {
        Some(path) => load_json(path)?,
        None => PPOConfig::default(),
    };
    cfg.seed = seed;
    if let Some(n) = args.episodes {
        cfg.max_episodes = n;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if args.no_plateau {
        cfg.plateau.enabled = false;
    }
    cfg.allow_fresh_finetune |= allow_fresh;
    cfg.validate()?;
    Ok(cfg)
}

fn read_checkpoint(path: &Path) -> Result<PolicyNetwork> {
    let file = std::fs::File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    Ok(Checkpoint::read(std::io::BufReader::new(file))?.network)
}

fn write_checkpoint(run: &mut Run, name: &str, net: &PolicyNetwork) -> Result<()> {
    let ckpt = Checkpoint::new(net.clone());
    run.write_with(name, |out| ckpt.write(out))?;
    Ok(())
}

fn write_extracted(run: &mut Run, prefix: &str, net: &PolicyNetwork, env: &EnvConfig) -> Result<PulseSequence> {
    let extracted = extract_pulse(net, env)?;
    let mut meta = Map::new();
    meta.insert("source".into(), json!(format!("drl-{prefix}")));
    meta.insert("actions".into(), json!(extracted.actions));
    run.write_with(&format!("{prefix}_pulse.json"), |out| write_pulse(out, &extracted.pulse, meta))?;
    Ok(extracted.pulse)
}

pub fn drl(run: &mut Run, cmd: DrlCommand, seed: u64) -> Result<()> {
    let (phase, env_args, ppo_args, checkpoint_in, allow_fresh) = match cmd {
        DrlCommand::Pretrain { env, ppo } => (Phase::Pretrain, env, ppo, None, false),
        DrlCommand::Finetune { env, ppo, checkpoint_in, allow_fresh } => {
            if checkpoint_in.is_none() && !allow_fresh {
                bail!(Error::InvalidParameter(
                    "drl finetune requires --checkpoint-in (or --allow-fresh to start from scratch)".into()
                ));
            }
            (Phase::Finetune, env, ppo, checkpoint_in, allow_fresh)
        }
        DrlCommand::Evaluate { env, checkpoint_in } => return drl_evaluate(run, &env, &checkpoint_in, seed),
    };
    let env = env_config(&env_args, Some(phase), seed)?;
    let ppo = ppo_config(&ppo_args, seed, allow_fresh)?;
    run.set_config(&json!({"phase": phase, "env": env, "ppo": ppo, "checkpoint_in": checkpoint_in}))?;
    let init = checkpoint_in.as_deref().map(read_checkpoint).transpose()?;
    let prefix = match phase {
        Phase::Pretrain => "pretrain",
        Phase::Finetune => "finetune",
    };

    let outcome = train(&env, &ppo, phase, init)?;
    write_checkpoint(run, &format!("{prefix}_checkpoint.json"), &outcome.best)?;
    write_checkpoint(run, &format!("{prefix}_checkpoint_last.json"), &outcome.last)?;
    run.write_with(&format!("{prefix}_rewards.csv"), |out| outcome.record.write_csv(out))?;
    write_extracted(run, prefix, &outcome.best, &env)?;
    run.write_json(
        &format!("{prefix}_eval.json"),
        &json!({"best": outcome.best_eval, "evaluations": outcome.record.evaluations, "stop": outcome.stop}),
    )?;
    println!(
        "{prefix}: {} episodes, stop {:?}, nominal population {:.6}, min over eval errors {:.6}",
        outcome.record.episode_rewards.len(),
        outcome.stop,
        outcome.best_eval.nominal_population,
        outcome.best_eval.min_population
    );
    if let StopReason::Diverged { message } = outcome.stop {
        bail!(Error::Diverged(message));
    }
    Ok(())
}

fn drl_evaluate(run: &mut Run, env_args: &EnvArgs, checkpoint: &Path, seed: u64) -> Result<()> {
    let env = env_config(env_args, None, seed)?;
    run.set_config(&json!({"env": env, "checkpoint_in": checkpoint}))?;
    let net = read_checkpoint(checkpoint)?;
    write_extracted(run, "evaluate", &net, &env)?;
    let result = evaluate(&net, &env)?;
    run.write_json("evaluate_eval.json", &result)?;
    println!(
        "nominal population {:.6}, mean {:.6}, min {:.6}",
        result.nominal_population, result.mean_population, result.min_population
    );
    Ok(())
}

fn parse_grape_init(text: &str, omega: f64) -> Result<GrapeInit> {
    let (kind, value) = text.split_once(':').unwrap_or((text, ""));
    let number = || {
        value
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad number {value:?} in --init {text:?}")))
    };
    Ok(match kind {
        "linear" => GrapeInit::LinearRamp { delta_max: number()? * omega },
        "constant" => GrapeInit::Constant { value: number()? * omega },
        "custom" => GrapeInit::Custom { amplitudes: load_pulse(Path::new(value))?.0.deltas().to_vec() },
        _ => bail!(Error::InvalidParameter(format!("--init must be linear:, constant: or custom:, got {text:?}"))),
    })
}

pub fn grape(run: &mut Run, args: GrapeArgs) -> Result<()> {
    let omega = mhz_to_rad_per_s(args.field.omega_mhz);
    let field = ControlField::from_mhz(args.field.omega_mhz, args.field.delta_max)?;
    let cfg = match &args.config {
        Some(path) => load_json::<GrapeConfig>(path)?,
        None => GrapeConfig {
            m_steps: args.m_steps,
            total_time: args.time_ns * 1e-9,
            learning_rate: args.learning_rate,
            max_iterations: args.max_iterations,
            init: parse_grape_init(&args.init, omega)?,
            target_fidelity: args.target,
            line_search: !args.no_line_search,
        },
    };
    cfg.validate()?;
    run.set_config(&json!({"grape": cfg, "field": field}))?;
    let result = grape_optimize(&cfg, &field)?;
    let pulse = amplitudes_to_pulse(&result.amplitudes, &cfg, &field)?;
    let mut meta = Map::new();
    meta.insert("source".into(), json!("grape"));
    run.write_with("grape_pulse.json", |out| write_pulse(out, &pulse, meta))?;
    run.write_with("grape_history.csv", |out| result.write_history_csv(out))?;
    run.write_json(
        "grape_report.json",
        &json!({"status": result.status, "fidelity": result.fidelity(), "iterations": result.iterations()}),
    )?;
    println!("GRAPE {:?}: fidelity {:.9} after {} iterations", result.status, result.fidelity(), result.iterations());
    if result.status != GrapeStatus::Converged {
        bail!(Error::OptimizationFailed(format!(
            "GRAPE stopped at fidelity {} below target {} ({:?})",
            result.fidelity(),
            cfg.target_fidelity,
            result.status
        )));
    }
    Ok(())
}
