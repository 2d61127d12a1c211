use mefm_core::dgp::{derive_child_seed, gen_dataset, PresetOverrides};
use mefm_core::harness::{run_replications, NormalityTask, Tasks};

use crate::io::{csv_string, write_atomic, write_series};
use crate::{CliError, SimulateArgs};

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    if !(0.0 < args.theta && args.theta < 1.0) {
        return Err(CliError::usage(format!(
            "--theta {} not in (0, 1)",
            args.theta
        )));
    }
    let tasks = parse_tasks(&args.tasks, args.theta)?;

    let overrides = PresetOverrides {
        p: args.p,
        q: args.q,
        t_factor: args.tfactor,
        t_len: args.t,
        param: args.param,
        seed: Some(args.seed),
    };
    let config =
        super::resolve_config(args.setting.as_deref(), args.config.as_deref(), &overrides)?;

    if args.dump_config {
        print!("{}", config.to_kv_string());
        return Ok(());
    }
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| CliError::usage("--out is required unless --dump-config is given"))?;
    super::ensure_out_dir(out)?;

    let summary = run_replications(&config, args.reps, &tasks, args.seed)?;

    write_atomic(&out.join("config.txt"), config.to_kv_string().as_bytes())?;

    if args.export_series {
        let mut first = config.clone();
        first.seed = derive_child_seed(args.seed, 0);
        let (series, _) = gen_dataset(&first)?;
        write_series(&out.join("series.csv"), &series)?;
    }

    let metrics_rows = summary.metrics.iter().flat_map(|(name, values)| {
        values
            .iter()
            .enumerate()
            .map(move |(rep, v)| vec![(rep + 1).to_string(), name.clone(), v.to_string()])
    });
    write_atomic(
        &out.join("metrics.csv"),
        csv_string("rep,metric,value", metrics_rows).as_bytes(),
    )?;

    let agg_rows = summary.aggregates.iter().map(|(name, agg)| {
        vec![
            name.clone(),
            agg.mean.to_string(),
            agg.sd.to_string(),
            agg.median.to_string(),
        ]
    });
    write_atomic(
        &out.join("aggregate.csv"),
        csv_string("metric,mean,sd,median", agg_rows).as_bytes(),
    )?;

    if !summary.rank_frequencies.is_empty() {
        let freq_rows = summary
            .rank_frequencies
            .iter()
            .map(|((kr, kc), freq)| vec![kr.to_string(), kc.to_string(), freq.to_string()]);
        write_atomic(
            &out.join("rank_freq.csv"),
            csv_string("kr,kc,frequency", freq_rows).as_bytes(),
        )?;
    }

    let info = format!(
        "setting={}\nreps={}\nfailures={}\nseed={}\n",
        args.setting.as_deref().unwrap_or("(file)"),
        summary.reps,
        summary.failures,
        args.seed
    );
    write_atomic(&out.join("run_info.txt"), info.as_bytes())?;

    println!(
        "simulate: {} replications done ({} failed), outputs in {}",
        summary.reps,
        summary.failures,
        out.display()
    );
    Ok(())
}

fn parse_tasks(spec: &str, theta: f64) -> Result<Tasks, CliError> {
    let mut tasks = Tasks {
        theta: Some(theta),
        ..Default::default()
    };
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part {
            "fit" => tasks.fit = true,
            "ranks" => tasks.ranks = true,
            "test" => tasks.test = true,
            "normality" => tasks.normality = Some(NormalityTask::default()),
            other => return Err(CliError::usage(format!("unknown task `{other}`"))),
        }
    }
    if !(tasks.fit || tasks.ranks || tasks.test || tasks.normality.is_some()) {
        return Err(CliError::usage("at least one task is required"));
    }
    Ok(tasks)
}
