//! Command-line front end. Every command writes `manifest.json` into its output
//! directory; `rvwalk replay <manifest>` re-runs it.

mod args;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::moments;
use crate::rng::RNG_ID;
use crate::scaling::{self, build_sequences, classify_regime};
use crate::stats::Verdict;
use crate::suites::{self, Scale, SuiteOptions, Thresholds};
use crate::walk::{self, parse_checkpoints, WalkConfig};
use crate::TOOL_VERSION;

pub use args::{Cli, Command};
use args::{RegimeArgs, ReplayArgs, SimulateArgs, TablesArgs, TimescaleArgs, VerifyArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Arguments after the program name, with config-file values inlined and the
    /// output directory removed.
    pub argv: Vec<String>,
    pub parameters: serde_json::Value,
    pub master_seed: Option<u64>,
    pub tool_version: String,
    pub rng: String,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub exit_code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_resource_limit() {
        EXIT_RESOURCE
    } else {
        EXIT_INVALID
    }
}

/// Parse and run; returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let raw: Vec<String> = match args.into_iter().map(|a| a.into_string()).collect() {
        Ok(v) => v,
        Err(_) => {
            eprintln!("error: arguments must be valid UTF-8");
            return EXIT_INVALID;
        }
    };
    let merged = match args::merge_config(&raw) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let argv = args::strip_out_dir(&merged[1..]);
    match run(cli.command, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Run {
    out_dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    fn new(command: &str, out_dir: &Path, argv: Vec<String>, parameters: serde_json::Value, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                schema_version: 1,
                command: command.into(),
                argv,
                parameters,
                master_seed: seed,
                tool_version: TOOL_VERSION.into(),
                rng: RNG_ID.into(),
                outputs: Vec::new(),
                wall_time_s: 0.0,
                exit_code: EXIT_OK,
            },
            start: Instant::now(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.manifest.outputs.push(name.into());
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let mut f = self.create(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    fn finish(mut self, code: i32) -> Result<RunManifest> {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        self.manifest.exit_code = code;
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(self.out_dir.join(MANIFEST_FILE), text)?;
        Ok(self.manifest)
    }
}

fn run(command: Command, argv: Vec<String>) -> Result<i32> {
    match command {
        Command::Regime(a) => cmd_regime(a, argv),
        Command::Simulate(a) => cmd_simulate(a, argv),
        Command::Verify(a) => cmd_verify(a, argv),
        Command::Tables(a) => cmd_tables(a, argv),
        Command::Timescale(a) => cmd_timescale(a, argv),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn cmd_regime(a: RegimeArgs, argv: Vec<String>) -> Result<i32> {
    let spec = a.memory.to_spec()?;
    let report = classify_regime(&spec, a.p)?;
    let json = serde_json::to_string_pretty(&report)?;
    if a.json {
        println!("{json}");
    } else {
        println!("family         {}", report.family);
        println!("gamma          {}", report.gamma);
        println!("p              {}", report.p);
        println!("p_c            {}", report.p_c);
        println!("p_hat          {}", report.p_hat);
        println!("regime         {:?}", report.regime);
        println!("v bounded      {:?}", report.v_bounded);
        println!("scale          {}", report.predicted_scale.expression);
        if let Some(s) = &report.predicted_scale.sigma_sq_asymptotic {
            println!("sigma_n^2      ~ {s}");
        }
        if let Some(v) = report.predicted_scale.limit_variance {
            println!("limit variance {v}");
        }
        println!("limit          {:?}", report.limit_kind);
        for n in &report.notes {
            println!("note: {n}");
        }
    }
    let mut run = Run::new("regime", &a.out_dir, argv, json!({ "spec": spec, "p": a.p }), None)?;
    run.write_text("regime.json", &(json + "\n"))?;
    run.finish(EXIT_OK)?;
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs, mut argv: Vec<String>) -> Result<i32> {
    let spec = a.memory.to_spec()?;
    let innovation = args::parse_innovation(&a.innovation)?;
    let checkpoints = parse_checkpoints(&a.checkpoints, a.n)?;
    let mut config = WalkConfig::new(spec, a.p, innovation, a.n, a.seed)
        .with_checkpoints(checkpoints)
        .with_martingales(a.record_martingales)
        .with_sampler(a.sampler.into());
    if let Some(cap) = a.memory_cap {
        config.memory_cap_bytes = cap;
    }
    config.validate()?;
    args::pin_seed(&mut argv, a.seed);
    let params = json!({ "config": config, "replicas": a.replicas, "threads": a.threads, "binary": a.binary });
    let mut run = Run::new("simulate", &a.out_dir, argv, params, Some(a.seed))?;
    let trajs = walk::simulate_batch(&config, a.replicas, a.seed, a.threads)?;
    if a.binary {
        let mut f = run.create("trajectories.bin")?;
        walk::write_trajectories_binary(&trajs, &mut f)?;
        f.flush()?;
    } else {
        let mut f = run.create("trajectories.csv")?;
        walk::write_trajectories_csv(&trajs, &mut f)?;
        f.flush()?;
    }
    if a.record_martingales {
        let (rl, rn) = trajs
            .iter()
            .filter_map(|t| t.martingales.as_ref())
            .fold((0.0f64, 0.0f64), |(l, n), m| (l.max(m.max_residual_l), n.max(m.max_residual_n)));
        if let serde_json::Value::Object(m) = &mut run.manifest.parameters {
            m.insert("max_identity_residual".into(), json!({ "l": rl, "n": rn, "tolerance": walk::IDENTITY_TOL }));
        }
    }
    let manifest = run.finish(EXIT_OK)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, mut argv: Vec<String>) -> Result<i32> {
    let infos: Vec<&suites::SuiteInfo> = if a.suite == "all" {
        suites::SUITES.iter().collect()
    } else {
        vec![suites::find_suite(&a.suite).ok_or_else(|| {
            Error::InvalidInput(format!("unknown suite {:?}; known: all, {}", a.suite, suites::suite_names().join(", ")))
        })?]
    };
    let opts = SuiteOptions {
        scale: if a.quick { Scale::Quick } else { Scale::Full },
        seed: a.seed,
        threads: a.threads,
        thresholds: Thresholds { z: a.z, min_p: a.min_p },
    };
    args::pin_seed(&mut argv, a.seed);
    let mut run = Run::new("verify", &a.out_dir, argv, json!({ "suite": a.suite, "options": opts }), Some(a.seed))?;
    let mut failed = false;
    for info in infos {
        let report = suites::run_info(info, &opts)?;
        print!("{}", report.render_text());
        failed |= report.verdict == Verdict::Fail;
        run.write_text(&format!("{}.json", info.name), &(report.to_json() + "\n"))?;
        run.write_text(&format!("{}.txt", info.name), &report.render_text())?;
        if !report.plot.is_empty() {
            let csv = format!("{}_plot.csv", info.name);
            let mut f = run.create(&csv)?;
            report.write_plot_csv(&mut f)?;
            f.flush()?;
            if a.gnuplot {
                let mut series: Vec<&str> = report.plot.iter().map(|r| r.series.as_str()).collect();
                series.dedup();
                run.write_text(&format!("{}.gp", info.name), &args::gnuplot_series(&csv, &series))?;
            }
        }
    }
    let code = if failed { EXIT_VERIFY_FAILED } else { EXIT_OK };
    run.finish(code)?;
    Ok(code)
}

fn cmd_tables(a: TablesArgs, argv: Vec<String>) -> Result<i32> {
    let spec = a.memory.to_spec()?;
    let n = usize::try_from(a.n).map_err(|_| Error::ResourceLimit(format!("n = {} exceeds the address space", a.n)))?;
    let mut params = json!({ "spec": spec, "p": a.p, "n": a.n, "moments": a.moments });
    let table = build_sequences(&spec, a.p, n)?;
    let moment_table = if a.moments {
        let innovation = args::parse_innovation(&a.innovation)?;
        params["innovation"] = json!(innovation);
        Some(if innovation.is_sign_valued() {
            moments::rademacher_fourth_moments(&spec, a.p, n)?
        } else if innovation.finite_variance() {
            moments::second_moments(&spec, a.p, n, innovation.variance())?
        } else {
            return Err(Error::InvalidInput("moment tables need innovations with finite variance".into()));
        })
    } else {
        None
    };
    let mut run = Run::new("tables", &a.out_dir, argv, params, None)?;
    let mut f = run.create("sequences.csv")?;
    table.write_csv(&mut f)?;
    f.flush()?;
    if let Some(m) = &moment_table {
        let mut f = run.create("moments.csv")?;
        m.write_csv(&mut f)?;
        f.flush()?;
    }
    run.write_text("regime.json", &(serde_json::to_string_pretty(&table.regime)? + "\n"))?;
    if a.gnuplot {
        run.write_text("tables.gp", &args::gnuplot_tables(moment_table.is_some()))?;
    }
    let manifest = run.finish(EXIT_OK)?;
    println!("wrote {} to {}", manifest.outputs.join(", "), a.out_dir.display());
    Ok(EXIT_OK)
}

fn cmd_timescale(a: TimescaleArgs, mut argv: Vec<String>) -> Result<i32> {
    let spec = a.resolve_spec()?;
    let mode = a.mode.into();
    let ts = args::parse_list(&a.t)?;
    let points: Vec<scaling::TimescalePoint> =
        ts.iter().map(|&t| scaling::exploratory_timescale(&spec, mode, t, a.n)).collect::<Result<_>>()?;
    args::pin_seed(&mut argv, a.seed);
    let mut run = Run::new(
        "timescale",
        &a.out_dir,
        argv,
        json!({ "spec": spec, "mode": mode, "n": a.n, "t": ts, "replicas": a.replicas, "max_steps": a.max_steps }),
        Some(a.seed),
    )?;
    println!("slow convergence; no acceptance");
    for q in &points {
        match q.scale {
            Some(s) => println!("t = {:<8} index {:<14} scale {s:.6e}", q.t, q.index),
            None => println!("t = {:<8} index {:<14} scale none", q.t, q.index),
        }
    }
    let mut f = run.create("timescale.csv")?;
    {
        let mut w = csv::Writer::from_writer(&mut f);
        w.write_record(["t", "index", "scale"])?;
        for q in &points {
            w.write_record([q.t.to_string(), q.index.to_string(), q.scale.map(|s| s.to_string()).unwrap_or_default()])?;
        }
        w.flush()?;
    }
    f.flush()?;
    if a.replicas > 0 {
        let report = suites::timescale_report(&spec, mode, a.n, &ts, a.replicas, a.seed, a.threads, a.max_steps)?;
        print!("{}", report.render_text());
        run.write_text("timescale_report.json", &(report.to_json() + "\n"))?;
    }
    run.finish(EXIT_OK)?;
    Ok(EXIT_OK)
}

fn cmd_replay(a: ReplayArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.manifest)?;
    let m: RunManifest = serde_json::from_str(&text)?;
    let mut args: Vec<OsString> = vec!["rvwalk".into()];
    args.extend(m.argv.iter().map(OsString::from));
    args.push("--out-dir".into());
    args.push(a.out_dir.into_os_string());
    Ok(main_with_args(args))
}
