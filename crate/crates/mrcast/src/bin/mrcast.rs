use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mrcast::bounds::{
    bias_bound_lemma1, bound_report, deviation_bound_prop1, deviation_bound_prop2, epsilon_lemma1,
};
use mrcast::common_info::verify_common_variable;
use mrcast::dist::{nats_to_bits, tv};
use mrcast::error::Error;
use mrcast::oracles::{
    brute_force_gk, exact_bias, exact_selected_distribution_hier, exact_selected_distribution_mrc,
};
use mrcast::protocol::{hier_single_shots, run_naive_unicast, Scheme, Validated};
use mrcast::scenario::{
    load_scenario_file, report_file, report_to_json, run_trials, ScenarioFile,
};

/// Exploration and verification tool for remote sample generation over
/// broadcast and unicast links.
#[derive(Parser)]
#[command(name = "mrcast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Naive,
    Hier,
    Both,
}

impl From<SchemeArg> for Scheme {
    fn from(v: SchemeArg) -> Scheme {
        match v {
            SchemeArg::Naive => Scheme::Naive,
            SchemeArg::Hier => Scheme::Hierarchical,
            SchemeArg::Both => Scheme::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    /// Per-decoder proposal count of the naive scheme.
    #[value(name = "n")]
    N,
    /// Stage-one proposal count.
    #[value(name = "n_c")]
    NC,
    /// Refinement slack (nats).
    #[value(name = "t")]
    T,
    /// Block-stage slack (nats).
    #[value(name = "t_c")]
    TC,
    /// Transmissions per run.
    #[value(name = "K", alias = "k")]
    K,
}

#[derive(Subcommand)]
enum Command {
    /// Print the block decomposition of the scenario's joint prior.
    Gk {
        scenario: PathBuf,
        /// Emit a machine-readable JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Execute the scenario and write a report.
    Run {
        scenario: PathBuf,
        /// Override the scenario's mode.
        #[arg(long)]
        scheme: Option<SchemeArg>,
        /// Independent trials under derived sub-seeds.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for trials; defaults to MRCAST_WORKERS or 1.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate the analytical guarantees without sampling.
    Bounds {
        scenario: PathBuf,
        /// Override the refinement slack (nats).
        #[arg(long)]
        t: Option<f64>,
        /// Override the block-stage slack (nats).
        #[arg(long)]
        tc: Option<f64>,
    },
    /// Verify exact oracles, bounds, and simulation agreement.
    #[command(name = "oracle-check")]
    OracleCheck {
        scenario: PathBuf,
        /// Single-shot simulations per decoder for the 3-sigma comparison.
        #[arg(long, default_value_t = 100_000)]
        sims: usize,
    },
    /// Sweep one parameter and emit a CSV table.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InfeasibleEnumeration { .. } => 3,
        Error::RejectionCapExceeded { .. }
        | Error::DegenerateWeights
        | Error::IndexOutOfRange { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> mrcast::Result<ExitCode> {
    match cli.command {
        Command::Gk { scenario, json } => cmd_gk(&scenario, json),
        Command::Run {
            scenario,
            scheme,
            trials,
            out,
            workers,
        } => cmd_run(&scenario, scheme.map(Into::into), trials, out, workers),
        Command::Bounds { scenario, t, tc } => cmd_bounds(&scenario, t, tc),
        Command::OracleCheck { scenario, sims } => cmd_oracle_check(&scenario, sims),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => cmd_sweep(&scenario, param, &values, out),
    }
}

fn load_validated(path: &PathBuf) -> mrcast::Result<(ScenarioFile, Validated)> {
    let file = load_scenario_file(path)?;
    let validated = file.validate()?;
    Ok((file, validated))
}

fn cmd_gk(path: &PathBuf, json: bool) -> mrcast::Result<ExitCode> {
    let (_, v) = load_validated(path)?;
    let report = verify_common_variable(&v.scenario.joint, &v.gk);
    if json {
        let obj = serde_json::json!({
            "blocks": v.gk.block_count,
            "cgk_nats": v.gk.cgk_nats,
            "cgk_bits": nats_to_bits(v.gk.cgk_nats),
            "p_c": v.gk.p_c.mass(),
            "side1_blocks": v.gk.partition1.labels(),
            "side2_blocks": v.gk.partition2.labels(),
            "independence_residual": report.independence_residual,
            "mismatch_probability": report.mismatch_probability,
            "maximal": report.maximal,
        });
        println!("{}", serde_json::to_string_pretty(&obj).expect("json"));
    } else {
        println!("blocks: {}", v.gk.block_count);
        println!(
            "C_GK: {:.6} nats ({:.6} bits)",
            v.gk.cgk_nats,
            nats_to_bits(v.gk.cgk_nats)
        );
        let masses: Vec<String> = v.gk.p_c.mass().iter().map(|m| format!("{m:.6}")).collect();
        println!("p_C: [{}]", masses.join(", "));
        for c in 0..v.gk.block_count {
            let side1: Vec<&str> = v
                .gk
                .partition1
                .block_symbols(c)
                .into_iter()
                .map(|s| v.scenario.joint.alphabet1().symbol(s))
                .collect();
            let side2: Vec<&str> = v
                .gk
                .partition2
                .block_symbols(c)
                .into_iter()
                .map(|s| v.scenario.joint.alphabet2().symbol(s))
                .collect();
            println!(
                "block {c}: side1 {{{}}} side2 {{{}}}",
                side1.join(", "),
                side2.join(", ")
            );
        }
        println!(
            "conditional independence residual: {:.3e}",
            report.independence_residual
        );
        println!(
            "label agreement mismatch probability: {:.3e}",
            report.mismatch_probability
        );
        println!("maximal: {}", report.maximal);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(
    path: &PathBuf,
    scheme: Option<Scheme>,
    trials: usize,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> mrcast::Result<ExitCode> {
    if trials < 1 {
        return Err(Error::invalid_scenario("trials", "need at least one trial"));
    }
    let (file, v) = load_validated(path)?;
    let workers = workers
        .or_else(|| {
            std::env::var("MRCAST_WORKERS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(1)
        .max(1);
    let body = run_trials(&file, scheme, trials, workers).map_err(|err| {
        if exit_code_for(&err) == 4 {
            eprintln!(
                "sampling fault under seed {} label {:?}",
                v.scenario.params.seed, v.scenario.params.label
            );
        }
        err
    })?;
    let report = report_file(file, body);
    let json = report_to_json(&report);
    match out {
        Some(path) => {
            std::fs::write(&path, json)?;
            println!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(path: &PathBuf, t: Option<f64>, tc: Option<f64>) -> mrcast::Result<ExitCode> {
    let (mut file, _) = load_validated(path)?;
    if let Some(t) = t {
        file.params.t = t;
    }
    if let Some(tc) = tc {
        file.params.t_c = tc;
    }
    let v = file.validate()?;
    let sc = &v.scenario;
    println!("t = {} nats, t_c = {} nats", sc.params.t, sc.params.t_c);
    println!(
        "blocks: {}  C_GK: {:.6} nats  n_c: {}",
        v.gk.block_count, v.gk.cgk_nats, v.sizes.n_c
    );
    for i in 0..2 {
        let target = &sc.targets[i];
        let prior = &v.marginals[i];
        let f = &sc.functions[i];
        let eps = epsilon_lemma1(target, prior, sc.params.t)?;
        let l1 = bias_bound_lemma1(f, target, prior, sc.params.t)?;
        let hier = bound_report(
            f,
            target,
            prior,
            &v.partitions[i],
            sc.params.t_c,
            sc.params.t,
            v.sizes.n_c,
            &v.sizes.n_ref[i],
        )?;
        let dev1 = deviation_bound_prop1(f, target, prior, sc.params.t, sc.params.reps.max(1), 0.05)?;
        let dev2 = deviation_bound_prop2(
            f,
            target,
            prior,
            &v.partitions[i],
            sc.params.t_c,
            sc.params.t,
            sc.params.reps.max(1),
            0.05,
        )?;
        println!("decoder {i}:");
        println!(
            "  single-stage: epsilon = {:.6}  bias bound = {:.6}  confidence = {:.4}{}",
            eps,
            l1.bound,
            l1.confidence,
            if l1.vacuous { "  [vacuous]" } else { "" }
        );
        println!(
            "  two-stage:    epsilon = {:.6}  epsilon_bar = {:.6}  bias bound = {:.6}  confidence = {:.4}{}",
            hier.epsilon,
            hier.epsilon_bar,
            hier.bias_bound,
            hier.bias_confidence,
            if hier.vacuous { "  [vacuous]" } else { "" }
        );
        match hier.bias_bound_simplified {
            Some(s) => println!("  simplified bias bound: {s:.6}"),
            None => println!("  simplified bias bound: n/a (needs epsilon <= 1/9)"),
        }
        println!(
            "  tv bound: {:.6} (raw {:.6}){}",
            hier.tv_bound,
            hier.tv_bound_raw,
            if hier.tv_vacuous { "  [vacuous]" } else { "" }
        );
        match hier.avg_complexity {
            Some(a) => println!("  avg complexity bound: {a:.4} raw draws per transmission"),
            None => println!("  avg complexity bound: n/a (needs n_c >= 2)"),
        }
        println!(
            "  estimator deviation (eps_star = 0.05, K = {}):",
            sc.params.reps.max(1)
        );
        println!(
            "    single-stage: {:.6} (bias {:.6} + fluctuation {:.6}) confidence {:.4}",
            dev1.total, dev1.bias_term, dev1.fluctuation_term, dev1.confidence
        );
        println!(
            "    two-stage:    {:.6} (bias {:.6} + fluctuation {:.6}) confidence {:.4}",
            dev2.total, dev2.bias_term, dev2.fluctuation_term, dev2.confidence
        );
        println!("    formula: {}", dev2.formula);
    }
    Ok(ExitCode::SUCCESS)
}

struct CheckTable {
    failures: usize,
}

impl CheckTable {
    fn new() -> Self {
        CheckTable { failures: 0 }
    }
    fn row(&mut self, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn cmd_oracle_check(path: &PathBuf, sims: usize) -> mrcast::Result<ExitCode> {
    let (_, v) = load_validated(path)?;
    let sc = &v.scenario;
    let mut table = CheckTable::new();

    // Structure checks against the decomposition in use.
    let report = verify_common_variable(&sc.joint, &v.gk);
    table.row(
        "common-variable agreement",
        report.agreement_ok,
        format!("P[g1 != g2] = {:.3e}", report.mismatch_probability),
    );
    table.row(
        "conditional independence",
        report.independence_ok,
        format!("residual = {:.3e}", report.independence_residual),
    );
    table.row(
        "partition maximality",
        report.maximal,
        "no block splits further".into(),
    );
    match brute_force_gk(&sc.joint) {
        Ok((p1, p2)) => {
            let same = p1 == v.gk.partition1 && p2 == v.gk.partition2;
            table.row(
                "exhaustive partition search",
                same,
                if same {
                    "matches the decomposition in use".into()
                } else {
                    "found a different maximal partition".into()
                },
            );
        }
        Err(Error::InfeasibleEnumeration { summands, ceiling }) => {
            return Err(Error::InfeasibleEnumeration { summands, ceiling });
        }
        Err(e) => return Err(e),
    }

    // Exact laws, exact biases, bound verdicts.
    let mut hier_exact = Vec::new();
    for i in 0..2 {
        let target = &sc.targets[i];
        let prior = &v.marginals[i];
        let f = &sc.functions[i];

        let naive_law = exact_selected_distribution_mrc(target, prior, v.sizes.naive_n[i])?;
        let naive_bias = exact_bias(f, &naive_law.pmf, target);
        let l1 = bias_bound_lemma1(f, target, prior, sc.params.t)?;
        if !l1.vacuous {
            table.row(
                &format!("decoder {i} naive bias within bound"),
                naive_bias <= l1.bound + 1e-12,
                format!("bias {naive_bias:.6} vs bound {:.6}", l1.bound),
            );
        } else {
            println!(
                "[SKIP] decoder {i} naive bias bound is vacuous ({:.4}); exact bias {naive_bias:.6}",
                l1.bound
            );
        }

        let law = exact_selected_distribution_hier(
            target,
            prior,
            &v.partitions[i],
            v.sizes.n_c,
            &v.sizes.n_ref[i],
        )?;
        let bias = exact_bias(f, &law.pmf, target);
        let bounds = bound_report(
            f,
            target,
            prior,
            &v.partitions[i],
            sc.params.t_c,
            sc.params.t,
            v.sizes.n_c,
            &v.sizes.n_ref[i],
        )?;
        if !bounds.vacuous {
            table.row(
                &format!("decoder {i} two-stage bias within bound"),
                bias <= bounds.bias_bound + 1e-12,
                format!("bias {bias:.6} vs bound {:.6}", bounds.bias_bound),
            );
        } else {
            println!(
                "[SKIP] decoder {i} two-stage bias bound is vacuous; exact bias {bias:.6}"
            );
        }
        let d = tv(&law.pmf, target);
        if !bounds.tv_vacuous {
            table.row(
                &format!("decoder {i} selected law within tv bound"),
                d <= bounds.tv_bound + 1e-12,
                format!("tv {d:.6} vs bound {:.6}", bounds.tv_bound),
            );
        } else {
            println!(
                "[SKIP] decoder {i} tv bound is vacuous (raw {:.4}); exact tv {d:.6}",
                bounds.tv_bound_raw
            );
        }
        println!(
            "decoder {i}: exact two-stage law [{}] (enumerated {} terms)",
            law.pmf
                .mass()
                .iter()
                .map(|m| format!("{m:.6}"))
                .collect::<Vec<_>>()
                .join(", "),
            law.enumeration_size
        );
        hier_exact.push(law.pmf);
    }

    // Simulation against the oracle, three-sigma multinomial bands.
    if sims > 0 {
        let shots = hier_single_shots(&v, sims)?;
        for i in 0..2 {
            let exact = &hier_exact[i];
            let mut counts = vec![0usize; exact.len()];
            for &s in &shots[i] {
                counts[s] += 1;
            }
            let mut ok = true;
            let mut worst = 0.0f64;
            for sym in 0..exact.len() {
                let p = exact.prob(sym);
                let freq = counts[sym] as f64 / sims as f64;
                let sigma = (p * (1.0 - p) / sims as f64).sqrt();
                let dev = (freq - p).abs();
                worst = worst.max(dev - 3.0 * sigma);
                if dev > 3.0 * sigma + 1e-9 {
                    ok = false;
                }
            }
            table.row(
                &format!("decoder {i} simulation matches oracle ({sims} shots)"),
                ok,
                format!("worst deviation past 3 sigma: {worst:.3e}"),
            );
        }

        let naive_reps = {
            let mut scenario = sc.clone();
            scenario.params.reps = sims;
            scenario.params.label = format!("{}/oracle-sims", sc.params.label);
            mrcast::protocol::validate(scenario)?
        };
        let naive_run = run_naive_unicast(&naive_reps)?;
        for i in 0..2 {
            let exact =
                exact_selected_distribution_mrc(&sc.targets[i], &v.marginals[i], v.sizes.naive_n[i])?;
            let mut ok = true;
            let mut worst = 0.0f64;
            for sym in 0..exact.pmf.len() {
                let p = exact.pmf.prob(sym);
                let freq = naive_run.decoders[i].empirical_law[sym];
                let sigma = (p * (1.0 - p) / sims as f64).sqrt();
                let dev = (freq - p).abs();
                worst = worst.max(dev - 3.0 * sigma);
                if dev > 3.0 * sigma + 1e-9 {
                    ok = false;
                }
            }
            table.row(
                &format!("decoder {i} naive simulation matches oracle ({sims} shots)"),
                ok,
                format!("worst deviation past 3 sigma: {worst:.3e}"),
            );
        }
    }

    if table.failures > 0 {
        eprintln!("{} check(s) failed", table.failures);
        return Ok(ExitCode::from(5));
    }
    println!("all checks passed");
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    path: &PathBuf,
    param: SweepParam,
    values: &[f64],
    out: Option<PathBuf>,
) -> mrcast::Result<ExitCode> {
    let (file, _) = load_validated(path)?;
    let mut csv = String::from(
        "param,value,scheme,bias_1,bias_2,tv_1,tv_2,total_bits,epsilon,epsilon_bar,bias_bound,tv_bound_raw,avg_complexity,fluctuation\n",
    );
    let param_name = match param {
        SweepParam::N => "n",
        SweepParam::NC => "n_c",
        SweepParam::T => "t",
        SweepParam::TC => "t_c",
        SweepParam::K => "K",
    };
    for &value in values {
        let mut f = file.clone();
        let mut overrides = f.params.n_overrides.clone().unwrap_or_default();
        match param {
            SweepParam::N => {
                let n = positive_integer(value, "n")?;
                overrides.naive = Some(vec![n, n]);
                f.params.n_overrides = Some(overrides);
            }
            SweepParam::NC => {
                overrides.n_c = Some(positive_integer(value, "n_c")?);
                f.params.n_overrides = Some(overrides);
            }
            SweepParam::T => f.params.t = value,
            SweepParam::TC => f.params.t_c = value,
            SweepParam::K => f.params.k = positive_integer(value, "K")?,
        }
        let body = run_trials(&f, None, 1, 1)?;
        let v = f.validate()?;
        let sc = &v.scenario;

        for (scheme, section) in [("naive", &body.naive), ("hierarchical", &body.hierarchical)] {
            let Some(section) = section else { continue };
            let run = &section.runs[0];
            let bias: Vec<String> = run
                .decoders
                .iter()
                .map(|d| d.abs_bias.map_or("".into(), |b| format!("{b:.9}")))
                .collect();
            let tvs: Vec<String> = run
                .decoders
                .iter()
                .map(|d| d.tv_to_target.map_or("".into(), |t| format!("{t:.9}")))
                .collect();
            let (eps, eps_bar, bias_bound, tv_raw, avg, fluct) = if scheme == "naive" {
                let eps = epsilon_lemma1(&sc.targets[0], &v.marginals[0], sc.params.t)?;
                let l1 = bias_bound_lemma1(&sc.functions[0], &sc.targets[0], &v.marginals[0], sc.params.t)?;
                let dev = deviation_bound_prop1(
                    &sc.functions[0],
                    &sc.targets[0],
                    &v.marginals[0],
                    sc.params.t,
                    sc.params.reps.max(1),
                    0.05,
                )?;
                (eps, f64::NAN, l1.bound, f64::NAN, f64::NAN, dev.fluctuation_term)
            } else {
                let b = bound_report(
                    &sc.functions[0],
                    &sc.targets[0],
                    &v.marginals[0],
                    &v.partitions[0],
                    sc.params.t_c,
                    sc.params.t,
                    v.sizes.n_c,
                    &v.sizes.n_ref[0],
                )?;
                let dev = deviation_bound_prop2(
                    &sc.functions[0],
                    &sc.targets[0],
                    &v.marginals[0],
                    &v.partitions[0],
                    sc.params.t_c,
                    sc.params.t,
                    sc.params.reps.max(1),
                    0.05,
                )?;
                (
                    b.epsilon,
                    b.epsilon_bar,
                    b.bias_bound,
                    b.tv_bound_raw,
                    b.avg_complexity.unwrap_or(f64::NAN),
                    dev.fluctuation_term,
                )
            };
            csv.push_str(&format!(
                "{param_name},{value},{scheme},{},{},{},{},{:.6},{eps:.9},{eps_bar:.9},{bias_bound:.9},{tv_raw:.9},{avg:.9},{fluct:.9}\n",
                bias[0], bias[1], tvs[0], tvs[1], run.cost.total_bits
            ));
        }
    }
    match out {
        Some(path) => {
            std::fs::write(&path, csv)?;
            println!("sweep written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn positive_integer(value: f64, what: &str) -> mrcast::Result<usize> {
    if value < 1.0 || value.fract() != 0.0 {
        return Err(Error::invalid_scenario(
            "sweep-values",
            format!("{what} must be a positive integer, got {value}"),
        ));
    }
    Ok(value as usize)
}
