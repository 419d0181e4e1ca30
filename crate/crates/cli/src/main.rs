//! `fc`: answer questions, evaluate datasets and run the harness tools
//! over a TSV knowledge base (the bundled toy KB by default).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use fc_kbqa::harness::{
    bench, evaluate, export_negatives, load_dataset, negatives_jsonl, run_pilot, verify_gold, DatasetItem,
    TrainInventory, DEFAULT_NEGATIVES,
};
use fc_kbqa::kb::{KnowledgeBase, LoadOptions};
use fc_kbqa::pipeline::{Pipeline, PipelineConfig};
use fc_kbqa::retrieval::{scorer_by_name, SCORER_NAMES};
use fc_kbqa::skeleton::{skeleton_scorer_by_name, SKELETON_SCORER_NAMES};
use fc_kbqa::toy;

#[derive(Parser)]
#[command(name = "fc", version, about = "Fine-to-coarse KBQA over s-expression logical forms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Knowledge base TSV; the bundled toy KB when omitted.
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Drop dangling facts and keep ill-typed ones instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
    /// Question-component scorer.
    #[arg(long, global = true, default_value = "tfidf")]
    scorer: String,
    #[arg(long, global = true, default_value = "heuristic")]
    skeleton_scorer: String,
    /// Keep relation pairs licensed by the ontology alone.
    #[arg(long, global = true)]
    ontology_only_rr: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one question.
    Answer {
        #[arg(long)]
        question: String,
        /// Also print the composition trace as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// EM/F1 by generalization split.
    Eval {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Check every gold expression against the KB first.
        #[arg(long)]
        verify_gold: bool,
    },
    /// Coarse versus fine selection on one-hop questions.
    Pilot {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test_comp: Option<PathBuf>,
        #[arg(long)]
        test_zero: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-stage timings.
    Bench {
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Same-domain negatives for every gold relation and class.
    ExportNegatives {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NEGATIVES)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Candidates and pair sets for one question, as JSON.
    DumpPairs {
        #[arg(long)]
        question: String,
    },
}

fn load_kb(c: &Common) -> Result<KnowledgeBase> {
    let opts = LoadOptions { strict: !c.lenient };
    match &c.kb {
        Some(p) => Ok(KnowledgeBase::load_with(p, opts)?),
        None => Ok(toy::toy_kb()),
    }
}

fn pipeline(c: &Common, kb: KnowledgeBase) -> Result<Pipeline> {
    let Some(scorer) = scorer_by_name(&c.scorer, &kb) else {
        bail!("unknown scorer `{}` (have: {})", c.scorer, SCORER_NAMES.join(", "));
    };
    let Some(sk) = skeleton_scorer_by_name(&c.skeleton_scorer) else {
        bail!(
            "unknown skeleton scorer `{}` (have: {})",
            c.skeleton_scorer,
            SKELETON_SCORER_NAMES.join(", ")
        );
    };
    let mut config = PipelineConfig::default();
    config.pairs.ontology_only_rr = c.ontology_only_rr;
    Ok(Pipeline::with_scorers(kb, config, scorer, sk))
}

fn dataset(path: &Option<PathBuf>, fallback: impl FnOnce() -> Vec<DatasetItem>) -> Result<Vec<DatasetItem>> {
    match path {
        Some(p) => Ok(load_dataset(p)?),
        None => Ok(fallback()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| anyhow!("writing {}: {e}", path.display()))
}

fn write_json(path: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    if let Some(p) = path {
        write(p, &(serde_json::to_string_pretty(value)? + "\n"))?;
    }
    Ok(())
}

/// `Ok(true)` when some item failed.
fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match cli.command {
        Command::Answer { question, trace } => {
            let p = pipeline(c, load_kb(c)?)?;
            let pred = p.answer(&question)?;
            let out = serde_json::json!({
                "question": question,
                "masked": pred.link.masked,
                "expression": pred.composition.expression().map(|e| e.to_string()),
                "answers": pred.answers,
                "timings": pred.timings,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            if trace {
                print!("{}", pred.composition.trace_jsonl());
            }
            Ok(pred.composition.expression().is_none())
        }
        Command::Eval {
            train,
            test,
            report,
            verify_gold: verify,
        } => {
            let kb = load_kb(c)?;
            let train = dataset(&train, toy::toy_train)?;
            let test = dataset(&test, toy::toy_dataset)?;
            let mut bad = false;
            if verify {
                for (qid, problem) in verify_gold(&train, &kb).into_iter().chain(verify_gold(&test, &kb)) {
                    eprintln!("{qid}: {problem}");
                    bad = true;
                }
            }
            let p = pipeline(c, kb)?;
            let r = evaluate(&p, &TrainInventory::from_items(&train), &test);
            print!("{}", r.table());
            for (kind, n) in &r.failures {
                println!("failures {kind:?}: {n}");
            }
            for s in &r.skipped {
                println!("skipped {}: {}", s.qid, s.reason);
            }
            write_json(&report, &r)?;
            Ok(bad || r.has_failures())
        }
        Command::Pilot {
            train,
            test_comp,
            test_zero,
            report,
        } => {
            let kb = load_kb(c)?;
            let (t, tc, tz) = toy::pilot_data();
            let train = dataset(&train, || t)?;
            let comp = dataset(&test_comp, || tc)?;
            let zero = dataset(&test_zero, || tz)?;
            let Some(scorer) = scorer_by_name(&c.scorer, &kb) else {
                bail!("unknown scorer `{}` (have: {})", c.scorer, SCORER_NAMES.join(", "));
            };
            let r = run_pilot(&train, &comp, &zero, scorer.as_ref(), &kb)?;
            print!("{}", r.table());
            write_json(&report, &r)?;
            Ok(r.splits.iter().any(|s| !s.skipped.is_empty()))
        }
        Command::Bench { test, report } => {
            let test = dataset(&test, toy::toy_dataset)?;
            let p = pipeline(c, load_kb(c)?)?;
            let r = bench(&p, &test)?;
            print!("{}", r.table());
            write_json(&report, &r)?;
            Ok(false)
        }
        Command::ExportNegatives { dataset: d, n, seed, out } => {
            let kb = load_kb(c)?;
            let items = dataset(&d, toy::toy_dataset)?;
            let recs = export_negatives(&items, &kb, n, seed);
            let text = negatives_jsonl(&recs);
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
            Ok(false)
        }
        Command::DumpPairs { question } => {
            let p = pipeline(c, load_kb(c)?)?;
            let (link, cands) = p.candidates(&question)?;
            let pairs = p.pairs(&cands);
            let out = serde_json::json!({
                "masked": link.masked,
                "candidates": cands,
                "pairs": pairs,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FC_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
