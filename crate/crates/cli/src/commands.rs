use std::fmt::Write as _;

use anyhow::Context;
use rayon::prelude::*;
use shellsim::adjoint::{gradcheck, random_linear_loss, GradcheckOptions};
use shellsim::optimize::{cmaes_optimize, gd_optimize, hybrid_optimize, optimize_parameters, Method, OptimizerReport, TrajectoryResult};
use shellsim::tasks::{OptimizationMode, Task};

use crate::manifest::{self, Loaded};
use crate::output::{self, Meta};
use crate::{Cli, CliError, Command};

/// Largest scene and horizon `gradcheck` accepts.
const GRADCHECK_MAX_DOFS: usize = 600;
const GRADCHECK_MAX_STEPS: usize = 12;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config { path: "--config".into(), message: "a manifest is required".into() })?;
    let loaded = manifest::load(path)?;
    if cli.stride == 0 {
        return Err(CliError::Config { path: "--stride".into(), message: "must be positive".into() });
    }
    let task = Task::new(&loaded.spec)?;
    let command = match cli.command {
        Command::Rollout => "rollout",
        Command::Optimize => "optimize",
        Command::Identify => "identify",
        Command::Gradcheck => "gradcheck",
        Command::Export => "export",
    };
    let meta = Meta { command, config_hash: loaded.hash.clone(), task: task.id().to_string() };
    match cli.command {
        Command::Rollout => rollout(cli, &loaded, &task, &meta),
        Command::Optimize => optimize(cli, &loaded, &task, &meta),
        Command::Identify => identify(cli, &loaded, &task, &meta),
        Command::Gradcheck => check(cli, &loaded, &task, &meta),
        Command::Export => export(cli, &task, &meta),
    }
}

fn trajectory(loaded: &Loaded, task: &Task) -> Result<Vec<Vec<f64>>, CliError> {
    match &loaded.manifest.rollout.trajectory {
        Some(p) => {
            let t = output::read_trajectory(&loaded.dir.join(p))?;
            if t.len() != task.spec.horizon || t.iter().any(|r| r.len() != task.action_len()) {
                return Err(CliError::Config {
                    path: "rollout.trajectory".into(),
                    message: format!("expected {} x {} actions", task.spec.horizon, task.action_len()),
                });
            }
            Ok(t)
        }
        None => Ok(task.default_trajectory()),
    }
}

fn rollout(cli: &Cli, loaded: &Loaded, task: &Task, meta: &Meta) -> Result<(), CliError> {
    let traj = trajectory(loaded, task)?;
    let frames = cli.out.join("frames");
    output::write_frames(&frames, &task.scene, &task.scene.initial, 0, meta)?;
    let mut io_error = None;
    let res = task.rollout_observed(&traj, false, |t, state| {
        let step = t + 1;
        if step % cli.stride == 0 || step == traj.len() {
            if let Err(e) = output::write_frames(&frames, &task.scene, state, step, meta) {
                io_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let mut csv = meta.header(&[]);
    csv.push_str("step,reward,feasible,newton_iters\n");
    let bad = res.infeasible.map(|_| res.rewards.len() - 1);
    for (t, (r, it)) in res.rewards.iter().zip(&res.newton_iters).enumerate() {
        writeln!(csv, "{},{r:e},{},{it}", t + 1, Some(t) != bad).unwrap();
    }
    output::write(&cli.out.join("rewards.csv"), &csv)?;
    let summary = format!(
        "{}reward = {:e}\nreported = {:e}\nfeasible = {}\ninfeasibility = \"{:?}\"\nsteps = {}\nclamped_steps = {}\nunreliable = {}\nstate_hash = \"{}\"\n",
        meta.header(&[]),
        res.report.reward,
        res.report.reported,
        res.feasible(),
        res.infeasible,
        res.rewards.len(),
        res.clamped_steps,
        res.unreliable,
        res.state.hash()
    );
    output::write(&cli.out.join("summary.toml"), &summary)?;
    println!("{}: reward {:.6e} feasible {} state {}", task.id(), res.report.reported, res.feasible(), res.state.hash());
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    let cap = rayon::current_num_threads();
    rayon::ThreadPoolBuilder::new().num_threads(jobs.clamp(1, cap.max(1))).build().map_err(|e| CliError::Other(e.into()))
}

fn optimize(cli: &Cli, loaded: &Loaded, task: &Task, meta: &Meta) -> Result<(), CliError> {
    let opt = &loaded.manifest.optimizer;
    let method = cli.method.unwrap_or(opt.method);
    let budget = cli.budget.unwrap_or(opt.budget);
    let seeds = if cli.seed.is_empty() { opt.seeds.clone() } else { cli.seed.clone() };
    if seeds.is_empty() {
        return Err(CliError::Config { path: "optimizer.seeds".into(), message: "at least one seed is required".into() });
    }
    if task.spec.mode != OptimizationMode::Trajectory {
        return Err(CliError::Config { path: "task.task".into(), message: format!("{} is an inverse-design task; use identify", task.id()) });
    }
    if method == Method::Hybrid && budget < 50 {
        return Err(CliError::Config { path: "optimizer.budget".into(), message: "hybrid needs at least 50 episodes".into() });
    }
    let init = trajectory(loaded, task)?;
    let results: Vec<TrajectoryResult> = pool(cli.jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match method {
                Method::Gd => gd_optimize(task, &init, budget, &opt.gd),
                Method::Cmaes => cmaes_optimize(task, budget, &opt.cma, seed),
                Method::Hybrid => hybrid_optimize(task, budget, &opt.cma, &opt.gd, seed),
            })
            .collect::<Result<_, _>>()
    })?;
    let mut all_feasible = true;
    for (seed, r) in seeds.iter().zip(&results) {
        let dir = cli.out.join(format!("seed_{seed}"));
        let extra = [format!("method {method}"), format!("seed {seed}"), format!("budget {budget}")];
        let mut csv = meta.header(&extra);
        let mut body = Vec::new();
        r.report.write_csv(&mut body).context("formatting report")?;
        csv.push_str(&String::from_utf8(body).context("report encoding")?);
        output::write(&dir.join("report.csv"), &csv)?;
        output::write(&dir.join("best_trajectory.txt"), &output::trajectory_text(meta, &r.trajectory, task.scene.h))?;
        let feasible = r.report.feasible_found();
        all_feasible &= feasible;
        let summary = format!(
            "{}best = {:e}\nfeasible = {feasible}\nevaluations = {}\n",
            meta.header(&extra),
            r.report.best(),
            r.report.evaluations()
        );
        output::write(&dir.join("summary.toml"), &summary)?;
        println!("seed {seed}: best {:.6e} feasible {feasible} evaluations {}", r.report.best(), r.report.evaluations());
    }
    output::write(&cli.out.join("aggregate.csv"), &aggregate(meta, method, &results.iter().map(|r| &r.report).collect::<Vec<_>>()))?;
    if all_feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible)
    }
}

/// Mean and standard deviation over seeds of the prefix maximum per episode.
fn aggregate(meta: &Meta, method: Method, reports: &[&OptimizerReport]) -> String {
    let mut s = meta.header(&[format!("method {method}"), format!("seeds {}", reports.len())]);
    s.push_str("episode,mean_prefix_max,std_prefix_max\n");
    let len = reports.iter().map(|r| r.episodes.len()).min().unwrap_or(0);
    for e in 0..len {
        let v: Vec<f64> = reports.iter().map(|r| r.episodes[e].prefix_max).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        writeln!(s, "{e},{mean:e},{:e}", var.sqrt()).unwrap();
    }
    s
}

fn identify(cli: &Cli, loaded: &Loaded, task: &Task, meta: &Meta) -> Result<(), CliError> {
    if task.spec.mode != OptimizationMode::Parameters {
        return Err(CliError::Config { path: "task.task".into(), message: format!("{} is not an inverse-design task", task.id()) });
    }
    let opt = &loaded.manifest.optimizer;
    let iterations = cli.budget.unwrap_or(opt.iterations);
    let params = &task.spec.params;
    let r = optimize_parameters(task, params, iterations, &opt.params)?;
    let mut csv = meta.header(&[format!("iterations {iterations}")]);
    let mut body = Vec::new();
    r.report.write_csv(&mut body).context("formatting report")?;
    csv.push_str(&String::from_utf8(body).context("report encoding")?);
    output::write(&cli.out.join("report.csv"), &csv)?;
    let mut hist = meta.header(&[]);
    let names: Vec<String> = params.iter().map(|p| p.to_string()).collect();
    writeln!(hist, "episode,{}", names.join(",")).unwrap();
    for (e, v) in r.history.iter().enumerate() {
        let cells: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        writeln!(hist, "{e},{}", cells.join(",")).unwrap();
    }
    output::write(&cli.out.join("params.csv"), &hist)?;
    let mut summary = meta.header(&[]);
    for (p, v) in &r.values {
        writeln!(summary, "\"{p}\" = {v:e}").unwrap();
        println!("{p}: {v:.6e}");
    }
    writeln!(summary, "best_reward = {:e}", r.report.best()).unwrap();
    output::write(&cli.out.join("summary.toml"), &summary)?;
    if r.report.feasible_found() || iterations == 0 {
        Ok(())
    } else {
        Err(CliError::Infeasible)
    }
}

fn check(cli: &Cli, loaded: &Loaded, task: &Task, meta: &Meta) -> Result<(), CliError> {
    let dofs = task.scene.num_dofs();
    if dofs > GRADCHECK_MAX_DOFS {
        return Err(CliError::Config { path: "task.resolution".into(), message: format!("{dofs} DoFs, gradcheck allows {GRADCHECK_MAX_DOFS}") });
    }
    if task.spec.horizon > GRADCHECK_MAX_STEPS {
        return Err(CliError::Config {
            path: "task.horizon".into(),
            message: format!("{} steps, gradcheck allows {GRADCHECK_MAX_STEPS}", task.spec.horizon),
        });
    }
    let g = &loaded.manifest.gradcheck;
    let traj = trajectory(loaded, task)?;
    let (wx, wr) = random_linear_loss(&task.scene, g.loss_seed);
    let opts = GradcheckOptions { eps: g.eps, newton_tolerance: g.newton_tolerance, components: None };
    let report = gradcheck(&task.scene, &traj, &wx, &wr, &opts)?;
    let mut csv = meta.header(&[format!("eps {:e}", g.eps)]);
    csv.push_str("step,component,analytic,fd,rel_err,excluded\n");
    for c in &report.coords {
        writeln!(csv, "{},{},{:e},{:e},{:e},{}", c.step, c.component, c.analytic, c.fd, c.rel_err.unwrap_or(f64::NAN), c.rel_err.is_none())
            .unwrap();
    }
    output::write(&cli.out.join("gradcheck.csv"), &csv)?;
    println!("coordinates      {}", report.coords.len());
    println!("excluded         {} ({:.1}%)", report.excluded(), 100.0 * report.excluded_fraction());
    println!("below 1e-3       {:.1}%", 100.0 * report.fraction_below(1e-3));
    println!("max rel. error   {:.3e}", report.max_rel_err());
    println!("gate             {}", if report.passes() { "PASS" } else { "FAIL" });
    if report.passes() {
        Ok(())
    } else {
        Err(CliError::GradcheckFailed)
    }
}

fn export(cli: &Cli, task: &Task, meta: &Meta) -> Result<(), CliError> {
    let s = &task.scene;
    output::write_frames(&cli.out.join("scene"), s, &s.initial, 0, meta)?;
    let mut summary = meta.header(&[]);
    writeln!(summary, "vertices = {}\ndofs = {}\nhinges = {}", s.num_vertices(), s.num_dofs(), s.num_hinges()).unwrap();
    writeln!(summary, "action_len = {}\nhorizon = {}\nfloor = {:e}", task.action_len(), task.spec.horizon, task.floor).unwrap();
    if let Some(o) = task.oracle {
        writeln!(summary, "oracle = {o:e}").unwrap();
    }
    writeln!(summary, "state_hash = \"{}\"", s.initial.hash()).unwrap();
    for b in &s.bodies {
        writeln!(summary, "\n[[body]]\nname = \"{}\"\nclass = \"{:?}\"\nvertices = {}", b.name, b.class, b.num_vertices()).unwrap();
    }
    output::write(&cli.out.join("scene.toml"), &summary)?;
    println!("{}: {} bodies, {} DoFs", task.id(), s.bodies.len(), s.num_dofs());
    Ok(())
}
