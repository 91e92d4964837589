use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use distcode::decoder::OutcomeKind;
use distcode::format::{g12, round12};
use distcode::montecarlo::{
    compare_bound, compare_detection, empirical_gep, run_detection_trials, run_trials, ErrorModel,
};
use distcode::scenario::{ChannelSpec, Scenario};
use distcode::{binary_entropy, detection_bound, BoundReport, CodeIndexVector, EntropyUnit};

#[derive(Parser)]
#[command(
    name = "distcode",
    version,
    about = "Error exponents, bounds and simulations for distributed channel coding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the exponent breakdown of every term the scenario's bounds use.
    Exponents(Common),
    /// Write the applicable bound reports.
    Bound(Common),
    /// Run decoding trials and compare the estimate with the bound.
    Simulate(Run),
    /// Run region detection trials and compare with the detection bound.
    Detect(Run),
    /// Check that the rate sits between the capacities of decodable and
    /// undecodable channel states of a compound BSC.
    #[command(name = "gate-sec4")]
    Gate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trial JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

enum Failure {
    Input(anyhow::Error),
    Verdict,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Exponents(c) => exponents(&c),
        Command::Bound(c) => bound(&c),
        Command::Simulate(r) => simulate(&r),
        Command::Detect(r) => detect(&r),
        Command::Gate(c) => gate(&c),
    }
}

fn setup(c: &Common) -> anyhow::Result<Scenario> {
    if c.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(c.threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let scenario = Scenario::load(&c.scenario)?;
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    Ok(scenario)
}

fn write(dir: &Path, name: &str, body: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> anyhow::Result<()> {
    write(dir, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn num(x: f64) -> Value {
    json!(round12(x))
}

fn verdict_label(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Every report `bound` writes: the simulation bound, plus one per
/// partition cell and one per detection-transmitted vector where available.
fn reports(s: &Scenario) -> anyhow::Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    if let Some((report, part)) = s.bound()? {
        if part.cells().count() > 1 {
            for (d, r) in part.cells() {
                out.push(match &s.margin {
                    Some(m) if report.bound == "margin" => {
                        distcode::gep_bound_margin(&s.model, d, r, m, &s.alpha, s.n)?
                    }
                    _ => distcode::gep_bound_d(&s.model, d, r, &s.alpha, s.n)?,
                });
            }
        }
        out.insert(0, report);
    }
    if let Some(cells) = &s.detection {
        for g in s.model.code_space().iter() {
            out.push(detection_bound(&s.model, &g, cells, &s.alpha, s.n)?);
        }
    }
    Ok(out)
}

fn exponents(c: &Common) -> Outcome {
    let s = setup(c)?;
    let mut rows = BTreeMap::new();
    for report in reports(&s)? {
        for t in report.terms {
            let key = (t.kind, t.d, t.s, t.g.clone(), t.other.clone());
            rows.entry(key).or_insert(t.exponent);
        }
    }
    let mut csv = String::from("kind,D,S,g,other,exponent,rho,s\n");
    for ((kind, d, sub, g, other), e) in &rows {
        let _ = writeln!(
            csv,
            "{},\"{d}\",\"{sub}\",\"{g}\",\"{other}\",{},{},{}",
            kind.label(),
            g12(e.value),
            e.rho.map(g12).unwrap_or_default(),
            g12(e.s)
        );
    }
    write(&c.out, "exponents.csv", &csv)?;
    println!(
        "{} exponents written to {}",
        rows.len(),
        c.out.join("exponents.csv").display()
    );
    Ok(())
}

fn report_json(r: &BoundReport) -> Value {
    json!({
        "bound": r.bound,
        "N": r.n,
        "value": num(r.value),
        "log_raw": num(r.log_raw),
        "vacuous": r.vacuous,
        "heuristic": r.heuristic,
        "terms": r.terms.len(),
    })
}

fn bound(c: &Common) -> Outcome {
    let s = setup(c)?;
    let all = reports(&s)?;
    let mut csv = format!("{}\n", BoundReport::CSV_HEADER);
    for r in &all {
        csv.push_str(&r.csv_rows());
    }
    write(&c.out, "bound.csv", &csv)?;
    let partition = s.bound()?.map(|(_, p)| {
        p.cells()
            .map(|(d, r)| json!({"D": d.iter().map(|u| u + 1).collect::<Vec<_>>(), "region": r.iter().map(|g| &g.0).collect::<Vec<_>>()}))
            .collect::<Vec<_>>()
    });
    write_json(
        &c.out,
        "bound.json",
        &json!({"partition": partition, "reports": all.iter().map(report_json).collect::<Vec<_>>()}),
    )?;
    for r in &all {
        println!(
            "{} N={} value={} raw={}{}",
            r.bound,
            r.n,
            g12(r.value),
            g12(r.raw()),
            if r.heuristic {
                " (heuristic partition)"
            } else {
                ""
            }
        );
    }
    Ok(())
}

fn overrides(r: &Run, s: &mut Scenario) -> anyhow::Result<()> {
    if let Some(t) = r.trials {
        if t == 0 {
            bail!("schema error at `trials`: must be at least 1");
        }
        s.trials = t;
    }
    if let Some(seed) = r.seed {
        s.seed = seed;
    }
    Ok(())
}

fn simulate(r: &Run) -> Outcome {
    let mut s = setup(&r.common)?;
    overrides(r, &mut s)?;
    let bound = s.bound()?;
    let mut exp = s.experiment();
    if let Some((_, part)) = &bound {
        exp.partition = part.clone();
    }
    let records = run_trials(&exp, s.trials, s.seed)?;
    let est = empirical_gep(&records, &s.model, &s.alpha, s.n);

    let mut csv = String::from("g,trials,errors,p_hat\n");
    for st in &est.strata {
        let _ = writeln!(
            csv,
            "\"{}\",{},{},{}",
            st.g,
            st.trials,
            st.errors,
            g12(st.p_hat)
        );
    }
    write(&r.common.out, "trials.csv", &csv)?;

    let (mut correct, mut wrong, mut collisions) = (0u64, 0u64, 0u64);
    for rec in &records {
        match rec.outcome.user_one() {
            None => collisions += 1,
            Some(d) if d == (rec.w[0], rec.g.get(0)) => correct += 1,
            Some(_) => wrong += 1,
        }
    }
    let verdict = bound
        .as_ref()
        .map(|(b, _)| compare_bound(&est, b))
        .transpose()?;
    let error_model = match s.error_model {
        ErrorModel::Relaxed => "relaxed",
        ErrorModel::Strict => "strict",
        ErrorModel::Margin => "margin",
    };
    let summary = json!({
        "name": s.name,
        "N": s.n,
        "trials": s.trials,
        "seed": s.seed,
        "error_model": error_model,
        "estimate": num(est.point),
        "std_error": num(est.std_error),
        "unestimated": est.unestimated.iter().map(|g| &g.0).collect::<Vec<_>>(),
        "bound": bound.as_ref().map(|(b, _)| num(b.value)),
        "bound_raw": bound.as_ref().map(|(b, _)| num(b.raw())),
        "vacuous": bound.as_ref().map(|(b, _)| b.vacuous),
        "verdict": verdict.as_ref().map(|v| verdict_label(v.pass)),
        "outcomes": {"decoded_correct": correct, "decoded_wrong": wrong, "collision": collisions},
    });
    write_json(&r.common.out, "summary.json", &summary)?;

    if let Some(path) = &r.trace {
        let mut lines = String::new();
        for rec in &records {
            let decoded = match &rec.outcome.kind {
                OutcomeKind::Decoded { w1, g1, .. } => json!({"w1": w1, "g1": g1}),
                OutcomeKind::Collision => Value::Null,
            };
            let line = json!({"trial": rec.trial, "g": rec.g.0, "w": rec.w, "decoded": decoded, "error": rec.error});
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
        fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?;
    }

    print!("estimate={} sigma={}", g12(est.point), g12(est.std_error));
    match &verdict {
        Some(v) => {
            println!(" bound={} {}", g12(v.bound), verdict_label(v.pass));
            if !v.complete {
                eprintln!("some code index vectors were never simulated");
            }
            if !v.pass {
                return Err(Failure::Verdict);
            }
        }
        None => println!(),
    }
    Ok(())
}

fn detect(r: &Run) -> Outcome {
    let mut s = setup(&r.common)?;
    overrides(r, &mut s)?;
    if s.detection.is_none() {
        return Err(anyhow!(
            "integrity error at `detection`: the detect subcommand needs a detection partition"
        )
        .into());
    }
    let exp = s.experiment();
    let records = run_detection_trials(&exp, s.trials, s.seed)?;
    let verdicts = compare_detection(&records, &exp)?;

    let mut csv = String::from("g,trials,errors,p_hat,bound\n");
    for v in &verdicts {
        let _ = writeln!(
            csv,
            "\"{}\",{},{},{},{}",
            v.g,
            v.trials,
            v.errors,
            g12(v.p_hat),
            g12(v.bound)
        );
    }
    write(&r.common.out, "detect.csv", &csv)?;
    let pass = verdicts.iter().all(|v| v.pass);
    let summary = json!({
        "name": s.name,
        "N": s.n,
        "trials": s.trials,
        "seed": s.seed,
        "vectors": verdicts.iter().map(|v| json!({
            "g": v.g.0,
            "p_hat": num(v.p_hat),
            "std_error": num(v.std_error),
            "bound": num(v.bound),
            "verdict": verdict_label(v.pass),
        })).collect::<Vec<_>>(),
        "verdict": verdict_label(pass),
    });
    write_json(&r.common.out, "summary.json", &summary)?;
    if let Some(path) = &r.trace {
        let mut lines = String::new();
        for rec in &records {
            lines.push_str(&serde_json::to_string(rec)?);
            lines.push('\n');
        }
        fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?;
    }
    for v in &verdicts {
        println!(
            "{} p_hat={} sigma={} bound={} {}",
            v.g,
            g12(v.p_hat),
            g12(v.std_error),
            g12(v.bound),
            verdict_label(v.pass)
        );
    }
    println!("{}", verdict_label(pass));
    if pass {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn gate(c: &Common) -> Outcome {
    let s = setup(c)?;
    let ChannelSpec::BscCompound {
        crossovers, rate, ..
    } = &s.channel
    else {
        return Err(anyhow!(
            "schema error at `channel.type`: the gate needs a bsc_compound channel"
        )
        .into());
    };
    let r_bits = rate / EntropyUnit::Bits.to_nats();
    let margin = s.margin.clone().unwrap_or_default();
    // states that must stay decodable: the margin, or the region without one
    let decodable = if margin.is_empty() {
        &s.region
    } else {
        &margin
    };
    let (mut low, mut high) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut rows = Vec::new();
    for (state, &p) in crossovers.iter().enumerate() {
        let g = CodeIndexVector(vec![0, state]);
        let cap = 1.0 - binary_entropy(p, EntropyUnit::Bits)?;
        let role = if s.region.contains(&g) {
            "region"
        } else if margin.contains(&g) {
            "margin"
        } else {
            "outside"
        };
        if decodable.contains(&g) {
            high = high.min(cap);
        } else if role == "outside" {
            low = low.max(cap);
        }
        println!(
            "state {} p={} capacity={} bits ({role})",
            state + 1,
            g12(p),
            g12(cap)
        );
        rows.push(
            json!({"state": state + 1, "p": num(p), "capacity_bits": num(cap), "role": role}),
        );
    }
    let pass = low < r_bits && r_bits < high;
    println!(
        "{} < {} < {}: {}",
        g12(low),
        g12(r_bits),
        g12(high),
        verdict_label(pass)
    );
    write_json(
        &c.out,
        "gate.json",
        &json!({
            "rate_bits": num(r_bits),
            "lower": if low.is_finite() { num(low) } else { Value::Null },
            "upper": if high.is_finite() { num(high) } else { Value::Null },
            "states": rows,
            "verdict": verdict_label(pass),
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}
