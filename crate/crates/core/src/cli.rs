//! Command-line front-end.
//!
//! ```text
//! dogd run (<config.cfg> | --preset <name>) [--out <dir>]
//! dogd verify --suite <name> [--seed <s>]
//! dogd plotdata <trace.csv> --x steps --y gap|regret|net_err [--out <file>]
//! ```
//!
//! Exit status is 0 iff every assertion passed; output lines are
//! machine-parsable `PASS`/`FAIL` per check.

use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::harness::{
    preset_names, preset_text, run_experiment, sweep, ExperimentConfig, ReferenceCache,
};
use crate::suites::{run_suite, SUITE_NAMES};
use crate::trace::Algorithm;

const USAGE: &str = "usage:\n  dogd run (<config.cfg> | --preset <name>) [--out <dir>]\n  dogd verify --suite <name> [--seed <s>]\n  dogd plotdata <trace.csv> --x steps --y gap|regret|net_err [--out <file>]\n";

pub fn main_with_args(args: &[String]) -> i32 {
    let outcome = match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("verify") => cmd_verify(&args[1..]),
        Some("plotdata") => cmd_plotdata(&args[1..]),
        Some("--help") | Some("-h") | None => {
            print!("{USAGE}");
            eprintln!("presets: {}", preset_names().join(", "));
            eprintln!("suites:  {}", SUITE_NAMES.join(", "));
            return if args.is_empty() { 1 } else { 0 };
        }
        Some(other) => Err(Error::Config(format!("unknown subcommand {other:?}"))),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}

fn take_flag(args: &mut Vec<String>, flag: &str) -> Result<Option<String>> {
    if let Some(pos) = args.iter().position(|a| a == flag) {
        if pos + 1 >= args.len() {
            return Err(Error::Config(format!("flag {flag} needs a value")));
        }
        let value = args.remove(pos + 1);
        args.remove(pos);
        Ok(Some(value))
    } else {
        Ok(None)
    }
}

fn cmd_run(raw: &[String]) -> Result<i32> {
    let mut args: Vec<String> = raw.to_vec();
    let preset = take_flag(&mut args, "--preset")?;
    let out = take_flag(&mut args, "--out")?;
    let (label, text) = match (preset, args.first()) {
        (Some(name), None) => {
            let text = preset_text(&name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {name:?}; known presets: {}",
                    preset_names().join(", ")
                ))
            })?;
            (name, text.to_string())
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("config not found: {path}: {e}")))?;
            (path.clone(), text)
        }
        _ => return Err(Error::Config("run needs a config path or --preset".into())),
    };
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(dir) = out {
        cfg.output_dir = Some(PathBuf::from(dir));
    }
    let cache_dir = cfg.output_dir.as_ref().map(|d| d.join("refcache"));
    let mut cache = ReferenceCache::new(cache_dir);

    if let Some(sweep_spec) = cfg.sweep.clone() {
        let (cells, csv) = sweep(&cfg, &sweep_spec, &mut cache)?;
        let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
        println!(
            "sweep over {} ({} values x {} seeds): {} cells, {} failed",
            sweep_spec.param,
            sweep_spec.values.len(),
            sweep_spec.seeds.len(),
            cells.len(),
            failed
        );
        if let Some(dir) = &cfg.output_dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("sweep.csv"), &csv)?;
            fs::write(dir.join("config.cfg"), &text)?;
            println!("wrote {}", dir.join("sweep.csv").display());
        }
        for line in csv.lines().filter(|l| l.starts_with("#agg")) {
            println!("{line}");
        }
        return Ok(if failed == 0 { 0 } else { 1 });
    }

    let result = run_experiment(&cfg, &text, &mut cache).map_err(|e| {
        eprintln!("--- config echo ---\n{text}-------------------");
        e
    })?;

    println!(
        "experiment {label}: n = {}, slem = {:.4}",
        result.graph.n, result.matrix.slem
    );
    println!(
        "{:<12} {:>16} {:>14} {:>10}",
        "algorithm", "final_worst_gap", "regret_per_T", "slope"
    );
    for run in &result.runs {
        let regret = run
            .regret
            .as_ref()
            .map(|r| format!("{:.6}", r.per_step_avg))
            .unwrap_or_else(|| "-".into());
        let slope = run
            .slope
            .map(|s| format!("{:.3}", s.slope))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>16.6} {:>14} {:>10}",
            run.algorithm.name(),
            run.final_worst_gap(),
            regret,
            slope
        );
    }

    // The n = 1 sanity preset doubles as the serial-reduction check whenever
    // both engines ran on the same single-node experiment.
    let dogd_run = result.runs.iter().find(|r| r.algorithm == Algorithm::Dogd);
    let serial_run = result
        .runs
        .iter()
        .find(|r| r.algorithm == Algorithm::SerialLazy);
    if let (Some(d), Some(s)) = (dogd_run, serial_run) {
        let identical = traces_bitwise_equal(&d.trace, &s.trace);
        println!(
            "reduction check: {}",
            if identical { "PASS" } else { "FAIL" }
        );
        if !identical {
            return Ok(1);
        }
    }
    for path in &result.written {
        println!("wrote {}", path.display());
    }
    Ok(0)
}

/// Bit-for-bit equality of recorded iterates and round averages.
pub fn traces_bitwise_equal(a: &crate::trace::RunTrace, b: &crate::trace::RunTrace) -> bool {
    if a.recorded.len() != b.recorded.len() || a.marks.len() != b.marks.len() {
        return false;
    }
    let eq = |x: &[f64], y: &[f64]| {
        x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits())
    };
    for (ra, rb) in a.recorded.iter().zip(&b.recorded) {
        if ra.global_step != rb.global_step {
            return false;
        }
        for (wa, wb) in ra.w.iter().zip(&rb.w) {
            if !eq(wa, wb) {
                return false;
            }
        }
        for (za, zb) in ra.z.iter().zip(&rb.z) {
            if !eq(za, zb) {
                return false;
            }
        }
    }
    for (ma, mb) in a.marks.iter().zip(&b.marks) {
        for (wa, wb) in ma.w_hat.iter().zip(&mb.w_hat) {
            if !eq(wa, wb) {
                return false;
            }
        }
    }
    true
}

fn cmd_verify(raw: &[String]) -> Result<i32> {
    let mut args: Vec<String> = raw.to_vec();
    let suite = take_flag(&mut args, "--suite")?
        .ok_or_else(|| Error::Config(format!("verify needs --suite, one of {SUITE_NAMES:?}")))?;
    let seed: u64 = take_flag(&mut args, "--seed")?
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("bad seed {s:?}")))
        })
        .transpose()?
        .unwrap_or(42);
    let checks = run_suite(&suite, seed)?;
    let mut all_pass = true;
    for c in &checks {
        println!(
            "{} {} — {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        all_pass &= c.pass;
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_plotdata(raw: &[String]) -> Result<i32> {
    let mut args: Vec<String> = raw.to_vec();
    let x = take_flag(&mut args, "--x")?.unwrap_or_else(|| "steps".into());
    let y = take_flag(&mut args, "--y")?.unwrap_or_else(|| "gap".into());
    let out = take_flag(&mut args, "--out")?;
    let path = args
        .first()
        .ok_or_else(|| Error::Config("plotdata needs a trace CSV path".into()))?;
    if x != "steps" {
        return Err(Error::Config(format!("unsupported --x {x:?}; only steps")));
    }
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
    let series = plot_series(&text, &y)?;
    let mut output = format!("steps,{y}\n");
    // Down-sample long series to at most 600 rows, always keeping the last.
    let stride = if series.len() <= 600 {
        1
    } else {
        series.len().div_ceil(599)
    };
    for (i, (step, value)) in series.iter().enumerate() {
        if i % stride == 0 || i + 1 == series.len() {
            output.push_str(&format!("{step},{value}\n"));
        }
    }
    match out {
        Some(path) => fs::write(path, output)?,
        None => print!("{output}"),
    }
    Ok(0)
}

/// Reduce a trace CSV to a two-column series over global steps: worst-node
/// gap, worst-node network error, or cumulative regret.
fn plot_series(text: &str, y: &str) -> Result<Vec<(usize, f64)>> {
    let col = match y {
        "gap" => 4usize,
        "net_err" => 5,
        "regret" => 6,
        _ => {
            return Err(Error::Config(format!(
                "unsupported --y {y:?}; expected gap, net_err or regret"
            )))
        }
    };
    let mut series: Vec<(usize, f64)> = Vec::new();
    let mut cumulative = 0.0;
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            let expect = "round,t,step,node,gap,net_err,regret_inc";
            if line.trim() != expect {
                return Err(Error::Csv {
                    line: 1,
                    reason: format!("unexpected header {line:?}; expected {expect:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Csv {
                line: lineno + 1,
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let step: usize = fields[2].parse().map_err(|_| Error::Csv {
            line: lineno + 1,
            reason: format!("bad step {:?}", fields[2]),
        })?;
        let value: f64 = fields[col].parse().map_err(|_| Error::Csv {
            line: lineno + 1,
            reason: format!("bad value {:?}", fields[col]),
        })?;
        rows += 1;
        if y == "regret" {
            cumulative += value;
            match series.last_mut() {
                Some((s, v)) if *s == step => *v = cumulative,
                _ => series.push((step, cumulative)),
            }
        } else {
            match series.last_mut() {
                Some((s, v)) if *s == step => *v = v.max(value),
                _ => series.push((step, value)),
            }
        }
    }
    if rows == 0 {
        return Err(Error::Csv {
            line: 1,
            reason: "empty trace".into(),
        });
    }
    Ok(series)
}
