use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use idiombench::adjudicate::DEFAULT_THETA;
use idiombench::classify::{
    evaluate_classifier, save_model, train_classifier, BackendRegistry, TrainConfig,
};
use idiombench::corpus::{class_stats, ingest, split, write_split, RecordFormat, SplitRatios};
use idiombench::dialogue::{perplexity, DecodingConfig, TrainableLanguageModel};
use idiombench::stats::{aggregate_runs, two_sample_ttest, RunSeries};
use idiombench::transcripts::{build_experiment1, build_experiment2, load_pairs};
use idiombench_service::lm::{encode_pairs, load_backend, new_backend, perplexity_runs, LmResponder};
use idiombench_service::service::{batch_report, AnnotationService};
use idiombench_service::{data_dir, http};

#[derive(Parser)]
#[command(name = "idiombench", version, about = "Idiom classification, generation and blinded human evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, clean and split a labelled corpus.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        format: Option<RecordFormat>,
        #[arg(long, default_value = "80:10:10")]
        ratios: SplitRatios,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "corpus")]
        name: String,
    },
    /// Fit a classifier backend and save it.
    TrainClassifier {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, default_value = "ngram-linear")]
        backend: String,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 6)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved classifier; writes line-delimited JSON records.
    EvalClassifier {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train (or with --init, fine-tune) a language model on dialogue pairs.
    TrainLm {
        #[arg(long, default_value = "bigram")]
        backend: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample one response per prompt line.
    Generate {
        #[arg(long, default_value = "bigram")]
        backend: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        prompt_file: PathBuf,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 0.7)]
        p: f64,
        #[arg(long, default_value_t = 0.8)]
        temp: f64,
        #[arg(long, default_value_t = 200)]
        max_len: usize,
        #[arg(long, default_value_t = 3)]
        no_repeat_ngram: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Perplexity over one or more evaluation files, as mean (sd) over runs.
    Perplexity {
        #[arg(long, default_value = "bigram")]
        backend: String,
        /// Saved model to score; otherwise one is trained per run from --train.
        #[arg(long, conflicts_with = "train")]
        model: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        fine_tune: Option<PathBuf>,
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of the training pairs each run sees.
        #[arg(long, default_value_t = 0.9)]
        subsample: f64,
    },
    /// Build a blinded transcript and store it in the data directory.
    BuildTranscript {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        experiment: u8,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        id: String,
        #[arg(long)]
        idioms: PathBuf,
        #[arg(long)]
        dialogue: PathBuf,
        /// NAME=MODEL_FILE; give twice for experiment 2.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
        #[arg(long, default_value = "bigram")]
        backend: String,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Recompute a transcript's report from the stored files.
    Report {
        transcript: String,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Welch two-sample t-test on comma-separated run values.
    Ttest {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

fn read_corpus(path: &Path) -> Result<Vec<idiombench::corpus::IdiomSample>> {
    let format = RecordFormat::detect(path)?;
    Ok(ingest(path, format)?)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, format, ratios, seed, out, name } => {
            let format = match format {
                Some(f) => f,
                None => RecordFormat::detect(&input)?,
            };
            let corpus = ingest(&input, format)?;
            let s = split(&corpus, ratios, seed)?;
            let manifest = write_split(&s, &out, &name, format)?;
            println!("{}", class_stats(&corpus));
            println!(
                "split {}/{}/{} written to {}",
                manifest.sizes[0],
                manifest.sizes[1],
                manifest.sizes[2],
                out.display()
            );
        }
        Command::TrainClassifier { train, dev, backend, batch_size, epochs, seed, out } => {
            let train = read_corpus(&train)?;
            let dev = match dev {
                Some(p) => read_corpus(&p)?,
                None => Vec::new(),
            };
            let cfg = TrainConfig { backend, batch_size, epochs, seed };
            let registry = BackendRegistry::default();
            let (model, report) = train_classifier(&registry, &train, &dev, &cfg)?;
            for e in &report.epochs {
                match e.dev_accuracy {
                    Some(acc) => println!("epoch {} loss {:.4} dev accuracy {:.4}", e.epoch, e.train_loss, acc),
                    None => println!("epoch {} loss {:.4}", e.epoch, e.train_loss),
                }
            }
            save_model(model.as_ref(), Some(&cfg), &out)?;
            println!("model saved to {}", out.display());
        }
        Command::EvalClassifier { model, data, out } => {
            let m = BackendRegistry::default().load(&model)?;
            let samples = read_corpus(&data)?;
            let eval = evaluate_classifier(m.as_ref(), &samples)?;
            let mut text = String::new();
            for line in eval.report_lines(m.name(), &file_label(&data)) {
                text.push_str(&serde_json::to_string(&line)?);
                text.push('\n');
            }
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            eprintln!(
                "accuracy {:.4} weighted F1 {:.4} macro F1 {:.4}",
                eval.metrics.accuracy, eval.metrics.weighted_f1, eval.metrics.macro_f1
            );
            eprint!("{}", eval.confusion.render());
        }
        Command::TrainLm { backend, data, init, out } => {
            let mut model = match init {
                Some(p) => load_backend(&backend, &p)?,
                None => new_backend(&backend)?,
            };
            let pairs = load_pairs(&data)?;
            model.fit(&encode_pairs(&pairs));
            model.save(&out)?;
            println!("{} pairs, {} transitions, saved to {}", pairs.len(), model.observed_transitions(), out.display());
        }
        Command::Generate { backend, model, prompt_file, k, p, temp, max_len, no_repeat_ngram, seed } => {
            let cfg = DecodingConfig { top_k: k, top_p: p, temperature: temp, max_len, no_repeat_ngram, seed };
            let responder = LmResponder::new(backend.clone(), load_backend(&backend, &model)?, cfg)?;
            let prompts = fs::read_to_string(&prompt_file)
                .with_context(|| format!("reading {}", prompt_file.display()))?;
            let mut stdout = std::io::stdout().lock();
            for prompt in prompts.lines().filter(|l| !l.trim().is_empty()) {
                let response = responder.generate(prompt)?;
                writeln!(stdout, "{}", serde_json::json!({ "prompt": prompt, "response": response }))?;
            }
        }
        Command::Perplexity { backend, model, train, fine_tune, data, runs, seed, subsample } => {
            let evals = data
                .iter()
                .map(|p| Ok((file_label(p), load_pairs(p)?)))
                .collect::<Result<Vec<_>>>()?;
            println!("{:<24} {:>20}", "data", "perplexity mean (sd)");
            if let Some(path) = model {
                let m = load_backend(&backend, &path)?;
                for (name, pairs) in &evals {
                    let r = perplexity(&m, &encode_pairs(pairs))?;
                    println!("{:<24} {:>20.2}", name, r.perplexity);
                }
                return Ok(());
            }
            let Some(train) = train else {
                bail!("either --model or --train is required");
            };
            let train = load_pairs(&train)?;
            let ft = fine_tune.map(|p| load_pairs(&p)).transpose()?;
            for (name, summary, _) in perplexity_runs(&backend, &train, ft.as_deref(), &evals, runs, seed, subsample)? {
                println!("{:<24} {:>20}", name, summary.to_string());
            }
        }
        Command::BuildTranscript { experiment, seed, id, idioms, dialogue, models, backend, data } => {
            let dir = data_dir(data);
            let idioms = load_pairs(&idioms)?;
            let dialogue = load_pairs(&dialogue)?;
            let responders = models
                .iter()
                .enumerate()
                .map(|(i, arg)| {
                    let (name, path) = arg
                        .split_once('=')
                        .with_context(|| format!("--model {arg:?} is not NAME=FILE"))?;
                    let cfg = DecodingConfig { seed: seed.wrapping_add(i as u64), ..Default::default() };
                    Ok(LmResponder::new(name, load_backend(&backend, Path::new(path))?, cfg)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let t = match (experiment, responders.as_slice()) {
                (1, [m]) => build_experiment1(&id, &idioms, &dialogue, m, seed)?,
                (2, [a, b]) => build_experiment2(&id, &idioms, &dialogue, a, b, seed)?,
                (1, _) => bail!("experiment 1 takes exactly one --model"),
                _ => bail!("experiment 2 takes exactly two --model"),
            };
            let mut svc = AnnotationService::open(&dir)?;
            let s = svc.create_transcript(&t)?;
            println!(
                "transcript {} (experiment {}, {} items, {} credibility) stored in {}",
                s.transcript_id,
                experiment,
                s.items,
                t.credibility_count(),
                dir.display()
            );
        }
        Command::Serve { port, host, data } => {
            let dir = data_dir(data);
            let svc = AnnotationService::open(&dir)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = http::bind(SocketAddr::new(host, port)).await?;
                log::info!("serving {} on {}", dir.display(), listener.local_addr()?);
                eprintln!("listening on http://{}", listener.local_addr()?);
                http::serve(listener, svc).await
            })?;
        }
        Command::Report { transcript, theta, json, data } => {
            let r = batch_report(&data_dir(data), &transcript, theta)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{}", r.render_table());
            }
        }
        Command::Ttest { a, b, alpha } => {
            let (a, b) = (RunSeries::new("a", a)?, RunSeries::new("b", b)?);
            let r = two_sample_ttest(&a, &b, alpha)?;
            println!("a: {}", aggregate_runs(&a));
            println!("b: {}", aggregate_runs(&b));
            println!(
                "t = {:.4}, df = {:.2}, p = {:.3e}{}",
                r.t,
                r.df,
                r.p_value,
                if r.significant { " (significant)" } else { "" }
            );
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
