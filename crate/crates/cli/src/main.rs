use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use besov_lab::atoms::AtomicField;
use besov_lab::domain::BoxDomain;
use besov_lab::experiments::{
    emit_lemma_table, emit_report, load_report, read_verdicts, run_all, run_lemma_le,
    ExperimentConfig,
};
use besov_lab::norms::fixtures::Indicator;
use besov_lab::norms::{besov_norm, seminorm, HSampling, NormEstimate, SeminormSettings};
use besov_lab::psi::{classify_condition, slow_variation_deviation, summability_partial};
use besov_lab::sequences::{build_lambda_blocks, build_rearranged, BlockSequence};
use besov_lab::{Error, PsiDescriptor};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

const TABLES_HELP: &str = "\
Output tables (columns are stable):
  lemma_le.csv    m,n,partial_sum
  sequence.csv    tier,J,y,quantity,value   tiers exact|control; quantities mixed_norm,
                  window_mass, forced_bound (per J) and coverage_count, sup_diagnostic (per probe y)
  pathology.csv   tier,J,y,quantity,value   tiers grid|exact; quantities lp_norm_2d,
                  seminorm_2d, besov_norm_2d, mixed_norm (per J), partial_seminorm and
                  sup_diagnostic (per probe y)
  verdicts.json   verdicts derived from the tables above
  trends.svg      depth against each trend, log-log";

#[derive(Parser, Debug)]
#[command(
    name = "besov-lab",
    version,
    about = "Restriction-failure experiments for Besov spaces of generalized smoothness"
)]
struct Cli {
    /// Experiment configuration (JSON); defaults to the flagship setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the configured Psi against the summability condition.
    PsiCheck {
        /// Depth of the reported partial sums of Psi(2^-j)^kappa.
        #[arg(long, default_value_t = 4096)]
        depth: u64,
    },
    /// Build the block sequence and write it as JSON.
    SeqBuild {
        /// Defaults to the deepest J_diag.
        #[arg(long)]
        depth: Option<u64>,
        /// Skip the rearrangement.
        #[arg(long)]
        raw: bool,
    },
    /// Check a block-sequence JSON file: invariants, rearrangement and
    /// randomized cell spot checks.
    SeqVerify {
        blocks: PathBuf,
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Evaluate the counterexample field at points from a CSV file with
    /// columns x1,x2; writes x1,x2,f.
    FieldEval {
        points: PathBuf,
        /// Defaults to the deepest J.
        #[arg(long)]
        depth: Option<u64>,
        /// Also write the support boxes as JSON to this path.
        #[arg(long)]
        boxes: Option<PathBuf>,
    },
    /// Grid estimate of a norm, written as JSON.
    NormEst {
        #[arg(long, value_enum, default_value_t = Target::Field)]
        target: Target,
        /// Probe of the partial map.
        #[arg(long, default_value_t = 1.5)]
        y: f64,
        /// Defaults to the deepest J.
        #[arg(long)]
        depth: Option<u64>,
        /// Deepest dyadic t-level; defaults to depth + 3.
        #[arg(long)]
        j_max: Option<u32>,
    },
    /// Partial sums of the series test; writes lemma_le.csv.
    LemmaLe,
    /// Full run: series test, exact sequence tier and grid tier.
    #[command(after_help = TABLES_HELP)]
    PathologyRun,
    /// Recompute verdicts (and the plot) from the CSV tables in --out.
    #[command(after_help = TABLES_HELP)]
    Report,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Target {
    /// Indicator of [0, 1], seminorm with the config's s, p, q, M.
    Indicator,
    /// The 2-D field, classical norm.
    Field,
    /// The partial map at --y, generalized q = inf seminorm.
    Partial,
}

fn load_config(path: Option<&Path>) -> besov_lab::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::flagship()),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn out_dir(cli: &Cli, config: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn psi_check(config: &ExperimentConfig, depth: u64) -> serde_json::Value {
    let kappa = config.params.kappa();
    let report = |desc: &PsiDescriptor| {
        json!({
            "family": desc.family_name(),
            "descriptor": desc,
            "classification": classify_condition(desc, kappa),
            "summability_partial": summability_partial(desc, kappa, depth),
            "slow_variation_deviation_half": slow_variation_deviation(desc, 0.5, 64).ok(),
        })
    };
    json!({
        "kappa": if kappa.is_finite() { json!(kappa) } else { json!("inf") },
        "depth": depth,
        "psi": report(&config.psi),
        "control_psi": report(&config.control_psi),
    })
}

fn seq_verify(blocks: &BlockSequence, samples: usize, seed: u64) -> serde_json::Value {
    let mut problems = blocks.check_invariants();
    let expected = blocks.rearrange();
    for j in 0..=blocks.depth() {
        if blocks.level(j).start != expected.level(j).start {
            problems.push(format!(
                "level {j}: window start differs from the sliding-window rearrangement"
            ));
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0usize;
    for _ in 0..samples {
        let j = rng.gen_range(0..=blocks.depth().min(63));
        let size = 1u128 << j;
        let offset = rng.gen_range(0..size);
        let lvl = blocks.level(j);
        let start: u128 = lvl.start.to_string().parse().expect("start < 2^63");
        let on: u128 = lvl.on_count.to_string().parse().expect("count <= 2^63");
        let expect = (offset + size - start) % size < on;
        if blocks.is_on(j, &BigUint::from(offset)) != expect {
            problems.push(format!(
                "cell ({j}, {offset}) disagrees with the cyclic window"
            ));
        }
        checked += 1;
    }
    json!({ "ok": problems.is_empty(), "depth": blocks.depth(), "spot_checks": checked, "seed": seed, "problems": problems })
}

fn field_eval(field: &AtomicField, points: &Path) -> Result<String> {
    let mut reader =
        csv::Reader::from_path(points).with_context(|| format!("reading {}", points.display()))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["x1", "x2", "f"])?;
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            bail!("expected two columns x1,x2, got {}", record.len());
        }
        let x1: f64 = record[0].trim().parse().context("parsing x1")?;
        let x2: f64 = record[1].trim().parse().context("parsing x2")?;
        let f = field.eval_f(&[x1, x2]);
        writer.write_record([x1.to_string(), x2.to_string(), f.to_string()])?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

fn norm_est(
    config: &ExperimentConfig,
    target: Target,
    y: f64,
    depth: u64,
    j_max: u32,
) -> Result<NormEstimate> {
    let p = &config.params;
    let mut settings = SeminormSettings {
        s: p.s(),
        p: p.p(),
        q: p.q(),
        m: p.m(),
        j_max,
        sampling: HSampling::default_for(2),
    };
    let refine = config.grid.refine;
    Ok(match target {
        Target::Indicator => {
            settings.sampling = HSampling::default_for(1);
            let res = 2f64.powi(-(j_max as i32) - 3 - refine as i32);
            let domain = BoxDomain::single(vec![0.0], vec![1.0], res)?;
            besov_norm(
                &Indicator::unit_interval(),
                &PsiDescriptor::constant(1.0),
                &settings,
                &domain,
            )?
        }
        Target::Field => {
            let field = AtomicField::build(&config.psi, p, depth)?;
            besov_norm(
                &field,
                &PsiDescriptor::constant(1.0),
                &settings,
                &field.support_boxes(refine),
            )?
        }
        Target::Partial => {
            settings.sampling = HSampling::default_for(1);
            settings.q = f64::INFINITY;
            let field = AtomicField::build(&config.psi, p, depth)?;
            let g = field.partial_map(y)?;
            seminorm(&g, &config.psi, &settings, &g.support_boxes(refine))?
        }
    })
}

fn run(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::PsiCheck { depth } => {
            write_output(
                out,
                &(serde_json::to_string_pretty(&psi_check(config, *depth))? + "\n"),
            )?;
        }
        Command::SeqBuild { depth, raw } => {
            let depth = depth.unwrap_or(*config.j_diag.last().expect("validated"));
            let blocks = if *raw {
                build_lambda_blocks(&config.psi, &config.params, depth)?
            } else {
                build_rearranged(&config.psi, &config.params, depth)?
            };
            write_output(out, &(blocks.to_json()? + "\n"))?;
        }
        Command::SeqVerify { blocks, samples } => {
            let text = fs::read_to_string(blocks)
                .with_context(|| format!("reading {}", blocks.display()))?;
            let seq = BlockSequence::from_json(&text)?;
            let summary = seq_verify(&seq, *samples, cli.seed);
            write_output(out, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
            if summary["ok"] != json!(true) {
                bail!("block sequence failed verification");
            }
        }
        Command::FieldEval {
            points,
            depth,
            boxes,
        } => {
            let depth = depth.unwrap_or(*config.j_list.last().expect("validated"));
            let field = AtomicField::build(&config.psi, &config.params, depth)?;
            write_output(out, &field_eval(&field, points)?)?;
            if let Some(path) = boxes {
                let json = serde_json::to_string_pretty(&field.support_boxes(config.grid.refine))?;
                write_output(Some(path), &(json + "\n"))?;
            }
        }
        Command::NormEst {
            target,
            y,
            depth,
            j_max,
        } => {
            let depth = depth.unwrap_or(*config.j_list.last().expect("validated"));
            let j_max = j_max.unwrap_or(depth as u32 + 3);
            let start = Instant::now();
            let est = norm_est(config, *target, *y, depth, j_max)?;
            let mut value = serde_json::to_value(&est)?;
            value["wall_time_ms"] = json!(start.elapsed().as_millis() as u64);
            write_output(out, &(serde_json::to_string_pretty(&value)? + "\n"))?;
        }
        Command::LemmaLe => {
            let dir = out_dir(cli, config);
            let report = run_lemma_le(&config.lemma, |_| 1.0)?;
            eprintln!("wrote {}", emit_lemma_table(&report, &dir)?.display());
            println!("{}", serde_json::to_string_pretty(&report.verdicts)?);
        }
        Command::PathologyRun => {
            let dir = out_dir(cli, config);
            let report = run_all(config)?;
            for path in emit_report(&report, &dir, config.emit_svg)? {
                eprintln!("wrote {}", path.display());
            }
            println!("{}", serde_json::to_string_pretty(&report.verdicts)?);
        }
        Command::Report => {
            let dir = out_dir(cli, config);
            let report = load_report(config, &dir)?;
            let recorded = read_verdicts(&dir).ok();
            emit_report(&report, &dir, config.emit_svg)?;
            match recorded {
                Some(v) if v == report.verdicts => {
                    eprintln!("verdicts.json reproduced from the tables")
                }
                Some(_) => eprintln!("verdicts.json differed from the tables and was rewritten"),
                None => eprintln!("verdicts.json written"),
            }
            println!("{}", serde_json::to_string_pretty(&report.verdicts)?);
        }
    }
    Ok(())
}

fn is_validation(err: &anyhow::Error) -> bool {
    matches!(err.downcast_ref::<Error>(), Some(Error::Validation(_)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 2 } else { 1 })
        }
    }
}
