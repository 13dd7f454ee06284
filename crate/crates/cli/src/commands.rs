use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use windfarm::env::{build_env, config_for_id, layout_for, load_scale_for, sampler_for, EnvConfig, FarmEnv, SimulatorKind, WindSeries};
use windfarm::eval::{
    condition_config, evaluate_score, extract_weights, grid_search_oracle, transfer_finetune, AdaptedEnv, EvalWeights,
    Objective, OracleGrid, ResultTable, SearchMode, ScoreReport,
};
use windfarm::marl::{metrics_to_text, train as train_run, Learner, MarlEnv, MultiAgentPolicy};
use windfarm::wake::FreeStreamConditions;

use crate::config::{scenario_label, usage, ExperimentConfig, ExperimentError, Result};
use crate::output::{num, run_dir, version_stamp, write_csv, write_text, CHECKPOINT_STEM, CONFIG_FILE, METRICS_FILE};

fn require_decentralized(env: &EnvConfig, id: &str) -> Result<()> {
    if env.decentralized {
        Ok(())
    } else {
        usage(format!("`{id}` is a centralized id; the multi-agent learners need the `Dec_` form"))
    }
}

/// Trains one run per seed, `jobs` runs at a time. Returns the run directories.
pub fn train(cfg: &ExperimentConfig, force: bool, jobs: usize) -> Result<Vec<PathBuf>> {
    require_decentralized(&cfg.env, &cfg.env_id)?;
    let dirs: Vec<PathBuf> = cfg.seeds.iter().map(|&s| run_dir(&cfg.out, cfg.algo, cfg.scenario, s)).collect();
    let taken: Vec<String> = dirs
        .iter()
        .filter(|d| d.join(METRICS_FILE).exists() || d.join(format!("{CHECKPOINT_STEM}.manifest")).exists())
        .map(|d| d.display().to_string())
        .collect();
    if !taken.is_empty() && !force {
        return usage(format!("runs already exist (pass --force to overwrite): {}", taken.join(", ")));
    }
    let jobs = jobs.max(1);
    let mut results: Vec<Result<()>> = Vec::new();
    for chunk in cfg.seeds.iter().zip(&dirs).collect::<Vec<_>>().chunks(jobs) {
        let batch: Vec<Result<()>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|&(&seed, dir)| s.spawn(move || train_one(cfg, seed, dir))).collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|_| usage("training thread panicked"))).collect()
        });
        results.extend(batch);
    }
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(dirs)
}

fn train_one(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let env_cfg = EnvConfig { seed, ..cfg.env.clone() };
    let make = || build_env(env_cfg.clone());
    log::info!("{}: training {} for {} steps", dir.display(), cfg.algo, cfg.total_steps);
    let outcome = train_run(&make, cfg.algo, &cfg.train, cfg.total_steps, seed)?;
    if let Some(last) = outcome.metrics.last() {
        log::info!("{}: final score {:.3}, power {:.2} MW", dir.display(), last.score, last.power_sum);
    }
    write_text(&dir.join(METRICS_FILE), &metrics_to_text(&outcome.metrics))?;
    write_text(&dir.join(CONFIG_FILE), &cfg.to_text())?;
    let extra = [
        ("env_id", cfg.env_id.clone()),
        ("scenario", scenario_label(cfg.scenario).to_string()),
        ("seed", seed.to_string()),
        ("steps", cfg.total_steps.to_string()),
        ("version", version_stamp()),
    ];
    outcome.learner.save(&dir.join(CHECKPOINT_STEM), &extra)?;
    Ok(())
}

/// Loads a checkpoint from its stem or from a run directory holding one.
pub fn load_checkpoint(path: &Path) -> Result<(Learner, windfarm::marl::Checkpoint)> {
    let stem = if path.is_dir() { path.join(CHECKPOINT_STEM) } else { path.with_extension("") };
    let ck = windfarm::marl::Checkpoint::load(&stem)
        .map_err(|e| ExperimentError::Usage(format!("cannot read checkpoint {}: {e}", stem.display())))?;
    Ok((Learner::from_checkpoint(&ck)?, ck))
}

fn label_of(path: &Path) -> String {
    let p = if path.is_dir() { path } else { path.parent().unwrap_or(path) };
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "policy".into())
}

/// Deterministic episodes of each checkpoint (or the greedy policy) for every seed.
///
/// Writes `trajectory.csv` (one line per step) and `evaluate.csv` (one line per episode).
pub fn evaluate(cfg: &ExperimentConfig, checkpoints: &[PathBuf]) -> Result<PathBuf> {
    require_decentralized(&cfg.env, &cfg.env_id)?;
    std::fs::create_dir_all(&cfg.out)?;
    let probe = build_env(cfg.env.clone())?;
    let m = probe.num_agents();
    let mut policies: Vec<(String, MultiAgentPolicy)> = Vec::new();
    if checkpoints.is_empty() {
        policies.push(("greedy".into(), MultiAgentPolicy::zero(m, probe.obs_dim(), probe.action_high())));
    }
    for c in checkpoints {
        policies.push((label_of(c), load_checkpoint(c)?.0.policy));
    }
    let mut header = vec!["policy", "seed", "step", "reward", "power_w", "load_raw"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend((0..m).map(|i| format!("yaw_{i}")));
    let mut traj = Vec::new();
    let mut summary = Vec::new();
    for (name, policy) in &policies {
        for &seed in &cfg.seeds {
            let env_cfg = EnvConfig { seed, ..cfg.env.clone() };
            let mut env = AdaptedEnv::for_policy(build_env(env_cfg)?, policy.obs_dim(), policy.act_dim())?;
            let mut obs = env.reset(Some(seed))?;
            let (mut ret, mut power, mut load) = (0.0, 0.0, 0.0);
            for step in 0..env.episode_len() {
                let s = env.step(&policy.act(&obs)?)?;
                let r = s.rewards.iter().sum::<f64>() / s.rewards.len() as f64;
                ret += r;
                power += s.info.power_total_w / 1e6;
                load += s.info.load_raw;
                let mut row = vec![name.clone(), seed.to_string(), step.to_string(), num(r), num(s.info.power_total_w), num(s.info.load_raw)];
                row.extend(env.farm().targets().iter().map(|a| num(a.yaw_deg)));
                traj.push(row);
                obs = s.observations;
                if s.terminated {
                    break;
                }
            }
            summary.push(vec![name.clone(), seed.to_string(), num(ret), num(power), num(load)]);
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&cfg.out.join("trajectory.csv"), &header_refs, &traj)?;
    let path = cfg.out.join("evaluate.csv");
    write_csv(&path, &["policy", "seed", "return", "power_sum_mw", "load_sum"], &summary)?;
    Ok(path)
}

/// The evaluation weights: from `series` if given, else the layout's default wind series.
pub fn weights_for(env: &EnvConfig, series: Option<&Path>) -> Result<EvalWeights> {
    let series = match series {
        Some(p) => WindSeries::load(p)?,
        None => WindSeries::default_for(layout_for(env)?.prevailing_dir),
    };
    Ok(extract_weights(&series)?)
}

/// Options of [`score`].
#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    /// Run directories or checkpoint stems; every run under `out` when empty.
    pub runs: Vec<PathBuf>,
    /// Evaluation environment ids, one column each; the experiment's id when empty.
    pub eval_envs: Vec<String>,
    pub series: Option<PathBuf>,
    pub episode_len: usize,
}

/// Output of [`score`].
#[derive(Debug, Clone)]
pub struct ScoreOutput {
    pub score: ResultTable,
    pub power: ResultTable,
    pub load: ResultTable,
    pub missing: Vec<PathBuf>,
}

fn discover_runs(out: &Path) -> Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    if out.is_dir() {
        for e in std::fs::read_dir(out)? {
            let p = e?.path();
            if p.is_dir() && (p.join(METRICS_FILE).exists() || p.join(format!("{CHECKPOINT_STEM}.manifest")).exists()) {
                runs.push(p);
            }
        }
    }
    runs.sort();
    Ok(runs)
}

/// Row label `ALGO / scenario` from a run directory name such as `ippo_i_seed0`.
fn row_from_dir(path: &Path) -> String {
    let name = label_of(path);
    let mut parts = name.split('_');
    match (parts.next(), parts.next()) {
        (Some(a), Some(s)) => format!("{} / {}", a.to_uppercase(), s.to_uppercase()),
        _ => name,
    }
}

/// Table 5 to 7 style report: weighted score, power and load per run, mean ± std over seeds.
///
/// Writes `score.txt`, `score.csv`, `score_conditions.csv` and `weights.csv`
/// under the output directory. Runs without a checkpoint are listed and left as gaps.
pub fn score(cfg: &ExperimentConfig, opts: &ScoreOptions) -> Result<ScoreOutput> {
    let runs = if opts.runs.is_empty() { discover_runs(&cfg.out)? } else { opts.runs.clone() };
    if runs.is_empty() {
        return usage(format!("no runs found under {}", cfg.out.display()));
    }
    let eval_envs = if opts.eval_envs.is_empty() { vec![cfg.env_id.clone()] } else { opts.eval_envs.clone() };
    let weights = weights_for(&cfg.env, opts.series.as_deref())?;
    let mut tables = [ResultTable::new("Score"), ResultTable::new("Sum of total power output (MW)"), ResultTable::new("Sum of load indicators")];
    let weights_line = format!(
        "weights: {}",
        weights
            .conditions
            .iter()
            .zip(&weights.weights)
            .map(|(c, w)| format!("({}, {}):{:.4}", num(c.u_inf), num(c.phi_inf), w))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let mut cond_rows = Vec::new();
    let mut missing = Vec::new();
    for run in &runs {
        let loaded = load_checkpoint(run);
        for id in &eval_envs {
            let idc = config_for_id(id)?;
            require_decentralized(&idc, id)?;
            let base = EnvConfig { layout: idc.layout.clone(), simulator: idc.simulator, ..cfg.env.clone() };
            let col = id.clone();
            let (learner, ck) = match &loaded {
                Ok(x) => x,
                Err(_) => {
                    let row = row_from_dir(run);
                    for t in tables.iter_mut() {
                        t.declare(&row, &col);
                    }
                    continue;
                }
            };
            let row = format!(
                "{} / {}",
                learner.algo.to_string().to_uppercase(),
                ck.meta.get("scenario").cloned().unwrap_or_else(|| "?".into())
            );
            let p = &learner.policy;
            let make = |c: &windfarm::eval::Condition| -> windfarm::Result<AdaptedEnv> {
                AdaptedEnv::for_policy(build_env(condition_config(&base, *c, opts.episode_len))?, p.obs_dim(), p.act_dim())
            };
            let rep = evaluate_score(p, &make, &weights, opts.episode_len, 0)?;
            tables[0].push(&row, &col, rep.score);
            tables[1].push(&row, &col, rep.power_sum_mw);
            tables[2].push(&row, &col, rep.load_sum);
            let seed = ck.meta.get("seed").cloned().unwrap_or_default();
            for (j, c) in rep.conditions.iter().enumerate() {
                cond_rows.push(vec![
                    label_of(run),
                    row.clone(),
                    seed.clone(),
                    col.clone(),
                    j.to_string(),
                    num(c.condition.u_inf),
                    num(c.condition.phi_inf),
                    num(c.weight),
                    num(c.episode_return),
                    num(c.power_sum_mw),
                    num(c.load_sum),
                ]);
            }
        }
        if loaded.is_err() {
            missing.push(run.clone());
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut text = String::new();
    let mut csv_rows = Vec::new();
    for t in tables.iter_mut() {
        t.header.push(weights_line.clone());
        t.header.push(version_stamp());
        for m in &missing {
            t.header.push(format!("missing checkpoint: {}", m.display()));
        }
        text.push_str(&t.render_text());
        text.push('\n');
        for line in t.to_csv().lines().skip(1) {
            let mut f: Vec<String> = vec![t.title.clone()];
            f.extend(line.split(',').map(String::from));
            csv_rows.push(f);
        }
    }
    write_text(&cfg.out.join("score.txt"), &text)?;
    write_csv(&cfg.out.join("score.csv"), &["table", "row", "col", "mean", "std", "n"], &csv_rows)?;
    write_csv(
        &cfg.out.join("score_conditions.csv"),
        &["run", "row", "seed", "eval_env", "condition", "u_inf", "phi_inf", "weight", "return", "power_sum_mw", "load_sum"],
        &cond_rows,
    )?;
    write_text(&cfg.out.join("weights.csv"), &weights.to_csv())?;
    let [score, power, load] = tables;
    Ok(ScoreOutput { score, power, load, missing })
}

/// Re-aggregates `score_conditions.csv` into one report per `(run, eval_env)`.
pub fn reaggregate(path: &Path) -> Result<Vec<(String, String, ScoreReport)>> {
    let (_, rows) = crate::output::read_csv(path)?;
    let mut out: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let key = (r[0].clone(), r[3].clone());
        let line = format!("{},{},{},{},{},{},{}\n", r[4], r[5], r[6], r[7], r[8], r[9], r[10]);
        match out.iter_mut().find(|(a, b, _)| (a.clone(), b.clone()) == key) {
            Some(entry) => entry.2.push_str(&line),
            None => out.push((key.0, key.1, format!("{}\n{line}", ScoreReport::CSV_HEADER))),
        }
    }
    out.into_iter().map(|(a, b, text)| Ok((a, b, ScoreReport::parse_csv(&text)?))).collect()
}

/// Options of [`oracle`].
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub mode: SearchMode,
    /// Maximize the environment reward instead of power.
    pub reward_objective: bool,
    /// Every condition of the evaluation weights instead of the configured wind.
    pub all_conditions: bool,
    pub grid: OracleGrid,
}

/// Grid-search optimum per wind condition, written to `oracle.csv`.
pub fn oracle(cfg: &ExperimentConfig, opts: &OracleOptions) -> Result<PathBuf> {
    if cfg.env.simulator != SimulatorKind::Static {
        return usage("the oracle searches the static model; use a `_Static` id");
    }
    let layout = layout_for(&cfg.env)?;
    let weights = if opts.all_conditions {
        weights_for(&cfg.env, cfg.env.series.as_deref())?
    } else {
        EvalWeights::single(cfg.env.wind_speed, cfg.env.wind_direction.unwrap_or(layout.prevailing_dir))
    };
    let objective = if opts.reward_objective {
        Objective::Reward { alpha: cfg.env.alpha, load_scale: load_scale_for(&cfg.env, &layout)? }
    } else {
        Objective::Power
    };
    let mut header: Vec<String> = [
        "condition", "u_inf", "phi_inf", "weight", "objective", "greedy_power_w", "power_w", "gain", "greedy_objective",
        "best_objective", "evaluations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..layout.len()).map(|i| format!("yaw_{i}")));
    let mut rows = Vec::new();
    for (j, (c, w)) in weights.conditions.iter().zip(&weights.weights).enumerate() {
        let cond = FreeStreamConditions::new(c.u_inf, c.phi_inf).with_ti(cfg.env.turbulence_intensity);
        let r = grid_search_oracle(&layout, &cond, opts.grid, objective, opts.mode).map_err(|e| match opts.mode {
            SearchMode::Exhaustive => ExperimentError::Usage(format!("{e} (try --mode coordinate-descent)")),
            _ => e.into(),
        })?;
        let mut row = vec![
            j.to_string(),
            num(c.u_inf),
            num(c.phi_inf),
            num(*w),
            if opts.reward_objective { "reward" } else { "power" }.to_string(),
            num(r.greedy_power_w),
            num(r.power_w),
            num(r.power_gain()),
            num(r.greedy_objective),
            num(r.objective),
            r.evaluations.to_string(),
        ];
        row.extend(r.yaws.iter().map(|&y| num(y)));
        rows.push(row);
    }
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("oracle.csv");
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &refs, &rows)?;
    Ok(path)
}

/// Zero-shot evaluation and fine-tuning of a static-trained checkpoint on a dynamic environment.
///
/// Per seed, writes `transfer_seed<k>/` with the fine-tuning metrics, the
/// zero-shot and greedy trajectories and the fine-tuned checkpoint; a summary
/// goes to `transfer.csv`.
pub fn transfer(cfg: &ExperimentConfig, checkpoint: &Path, steps: usize) -> Result<PathBuf> {
    require_decentralized(&cfg.env, &cfg.env_id)?;
    if cfg.env.simulator != SimulatorKind::Dynamic {
        return usage("transfer targets a dynamic environment; use a `_Dynamic` id");
    }
    let mut summary = Vec::new();
    for &seed in &cfg.seeds {
        let (learner, _) = load_checkpoint(checkpoint)?;
        let env_cfg = EnvConfig { seed, ..cfg.env.clone() };
        let make = || -> windfarm::Result<FarmEnv> { build_env(env_cfg.clone()) };
        let dir = cfg.out.join(format!("transfer_seed{seed}"));
        std::fs::create_dir_all(&dir)?;
        let rep = transfer_finetune(learner, &make, &cfg.train, steps, seed, &mut |row, _| {
            log::info!("seed {seed}: step {} power {:.2} MW load {:.3}", row.step, row.power_sum, row.load_raw);
            Ok(())
        })?;
        let traj: Vec<Vec<String>> = (0..rep.greedy.power_w.len().min(rep.zero_shot.power_w.len()))
            .map(|k| {
                vec![
                    k.to_string(),
                    num(rep.greedy.power_w[k]),
                    num(rep.zero_shot.power_w[k]),
                    num(rep.greedy.load_raw[k]),
                    num(rep.zero_shot.load_raw[k]),
                ]
            })
            .collect();
        write_csv(
            &dir.join("zero_shot.csv"),
            &["step", "greedy_power_w", "zero_shot_power_w", "greedy_load_raw", "zero_shot_load_raw"],
            &traj,
        )?;
        write_text(&dir.join(METRICS_FILE), &metrics_to_text(&rep.finetune))?;
        rep.learner.save(
            &dir.join(CHECKPOINT_STEM),
            &[("env_id", cfg.env_id.clone()), ("seed", seed.to_string()), ("version", version_stamp())],
        )?;
        let final_power = rep.finetune.last().map(|r| r.power_sum);
        summary.push(vec![
            seed.to_string(),
            num(rep.greedy.power_sum_mw()),
            num(rep.zero_shot.power_sum_mw()),
            num(rep.zero_shot_gain),
            final_power.map(num).unwrap_or_default(),
            rep.final_gain().map(num).unwrap_or_default(),
        ]);
    }
    let path = cfg.out.join("transfer.csv");
    write_csv(&path, &["seed", "greedy_power_mw", "zero_shot_power_mw", "zero_shot_gain", "final_power_mw", "final_gain"], &summary)?;
    Ok(path)
}

/// Serves dynamic-simulator episodes over TCP until `episodes` have run (forever when `None`).
pub fn serve_bridge(cfg: &ExperimentConfig, endpoint: &str, episodes: Option<usize>, on_bound: &mut dyn FnMut(std::net::SocketAddr)) -> Result<usize> {
    let layout = layout_for(&cfg.env)?;
    let mut sampler = sampler_for(&cfg.env, &layout)?;
    let listener = TcpListener::bind(endpoint)?;
    on_bound(listener.local_addr()?);
    let timeout = Duration::from_secs_f64(cfg.env.bridge_timeout_s);
    Ok(windfarm::bridge::serve_tcp(&listener, &layout, &mut sampler, episodes, timeout)?)
}
