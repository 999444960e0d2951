use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ran_debias::config::{parse_lambda, parse_number_list, PipelineConfig};
use ran_debias::debias::{
    debias_with_neighbours, DebiasConfig, OptimizerConfig, DEFAULT_THETA_R,
};
use ran_debias::embedding::{load_embedding_file, save_embedding_file, EmbeddingSet};
use ran_debias::geometry::{default_gender_pairs, load_gender_pairs, GenderDirection};
use ran_debias::gipe::{gipe, BiasNetwork, DEFAULT_EPSILON};
use ran_debias::kbc::{
    classify_vocabulary, default_seed_set, load_word_list, Classification, Dictionary,
    KnowledgeBase, WordLists,
};
use ran_debias::neighbours::{top_k_neighbours, NeighbourTable, DEFAULT_K};
use ran_debias::eval::{
    analogy_accuracy, load_google_analogies, load_msr_analogies, load_sembias,
    load_similarity_pairs, sembias_eval, similarity_spearman, DEFAULT_ANALOGY_EPS,
};

#[derive(Parser)]
#[command(
    name = "ran-debias",
    about = "Gender-debias word embeddings and audit proximity bias",
    version
)]
struct Cli {
    /// key = value configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition the vocabulary into preserve and debias sets
    Classify(ClassifyArgs),
    /// Optimize debias-set vectors and write the debiased embedding
    Debias(DebiasArgs),
    /// Build the bias network and report GIPE at each threshold
    Audit(AuditArgs),
    /// Run the intrinsic evaluation suite
    Eval(EvalArgs),
    /// Write top-k neighbour lists for a word set
    Neighbors(NeighborsArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    /// Embedding file (token + space-separated components per line)
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Stop-word list, one token per line
    #[arg(long)]
    stop_words: Option<PathBuf>,
    /// Seed list of gender-specific references (default: built-in set)
    #[arg(long)]
    seed: Option<PathBuf>,
    /// Gendered-name list
    #[arg(long)]
    names: Option<PathBuf>,
    /// Dictionary file `headword<TAB>definition` (repeatable)
    #[arg(long = "dictionary")]
    dictionaries: Vec<PathBuf>,
    /// Output directory for vp.txt, vd.txt and provenance.tsv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Expected embedding dimension
    #[arg(long)]
    expected_dim: Option<usize>,
}

#[derive(Args)]
struct DebiasArgs {
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Output path for the debiased embedding
    #[arg(long)]
    out: Option<PathBuf>,
    /// Preserve-set token file from a classify run
    #[arg(long)]
    preserve: Option<PathBuf>,
    /// Debias-set token file from a classify run
    #[arg(long = "debias-set")]
    debias_set: Option<PathBuf>,
    /// Classify inline instead of reading set files
    #[arg(long)]
    stop_words: Option<PathBuf>,
    #[arg(long)]
    seed: Option<PathBuf>,
    #[arg(long)]
    names: Option<PathBuf>,
    #[arg(long = "dictionary")]
    dictionaries: Vec<PathBuf>,
    /// Gender-pair file `female male` per line (default: built-in ten pairs)
    #[arg(long)]
    gender_pairs: Option<PathBuf>,
    /// Objective weights `repulsion,attraction,neutralization`
    #[arg(long)]
    lambda: Option<String>,
    /// Repulsion-set indirect-bias threshold
    #[arg(long)]
    theta_r: Option<f64>,
    /// Neighbours per word
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Optimization trace output (TSV)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Neighbour-table cache: reused when present, written after computing
    #[arg(long)]
    neighbour_cache: Option<PathBuf>,
    /// Decimal places in the output embedding
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long)]
    expected_dim: Option<usize>,
}

#[derive(Args)]
struct AuditArgs {
    /// Embedding under audit
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Non-debiased embedding for edge weights (default: the audited one)
    #[arg(long)]
    reference_embedding: Option<PathBuf>,
    /// Query word set, one token per line (default: the whole vocabulary)
    #[arg(long)]
    words: Option<PathBuf>,
    /// Comma-separated thresholds, e.g. 0.03,0.05,0.07
    #[arg(long)]
    theta_s: Option<String>,
    /// Denominator guard for node weights
    #[arg(long)]
    epsilon: Option<f64>,
    /// Neighbours per word
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gender_pairs: Option<PathBuf>,
    /// Directory for per-threshold gipe_<theta>.tsv reports
    #[arg(long)]
    out: Option<PathBuf>,
    /// Neighbour-table cache: reused when valid, written after computing
    #[arg(long)]
    neighbour_cache: Option<PathBuf>,
    #[arg(long)]
    expected_dim: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// SemBias instances: four tab-separated `a:b` pairs per line
    #[arg(long)]
    sembias: Option<PathBuf>,
    /// Google-format analogy file (`: section` headers; repeatable)
    #[arg(long = "analogy")]
    analogy: Vec<PathBuf>,
    /// MSR-format analogy file (4 tokens per line; repeatable)
    #[arg(long = "msr")]
    msr: Vec<PathBuf>,
    /// Similarity file `a b score` (repeatable)
    #[arg(long = "similarity")]
    similarity: Vec<PathBuf>,
    /// Shift constant inside 3CosMul
    #[arg(long)]
    analogy_eps: Option<f64>,
    /// Directory for per-dataset reports
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    expected_dim: Option<usize>,
}

#[derive(Args)]
struct NeighborsArgs {
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Query word set, one token per line (default: the whole vocabulary)
    #[arg(long)]
    words: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Output file in the neighbour-cache format
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    expected_dim: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(workers) = cli.workers.or(config.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Classify(args) => cmd_classify(args, &config),
        Command::Debias(args) => cmd_debias(args, &config),
        Command::Audit(args) => cmd_audit(args, &config),
        Command::Eval(args) => cmd_eval(args, &config),
        Command::Neighbors(args) => cmd_neighbors(args, &config),
    }
}

fn require(path: Option<PathBuf>, what: &str) -> anyhow::Result<PathBuf> {
    path.with_context(|| format!("missing required input: {what} (flag or config)"))
}

fn load_set(path: &Path, expected_dim: Option<usize>) -> anyhow::Result<EmbeddingSet> {
    let outcome = load_embedding_file(path, expected_dim)
        .with_context(|| format!("loading embedding {}", path.display()))?;
    if outcome.duplicates > 0 {
        eprintln!(
            "warning: {} duplicate token(s) in {} (first occurrence kept)",
            outcome.duplicates,
            path.display()
        );
    }
    Ok(outcome.set)
}

fn load_list(path: &Path) -> anyhow::Result<HashSet<String>> {
    load_word_list(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
    .with_context(|| format!("reading word list {}", path.display()))
}

fn load_word_lists(
    stop_words: Option<&Path>,
    seed: Option<&Path>,
    names: Option<&Path>,
) -> anyhow::Result<WordLists> {
    let stop = match stop_words {
        Some(p) => load_list(p)?,
        None => HashSet::new(),
    };
    let seed = match seed {
        Some(p) => load_list(p)?,
        None => default_seed_set(),
    };
    let names = match names {
        Some(p) => load_list(p)?,
        None => HashSet::new(),
    };
    Ok(WordLists::new(stop, seed, names)?)
}

fn load_knowledge_base(paths: &[PathBuf]) -> anyhow::Result<KnowledgeBase> {
    let mut dictionaries = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        dictionaries.push(
            Dictionary::load(name, BufReader::new(file))
                .with_context(|| format!("reading dictionary {}", path.display()))?,
        );
    }
    Ok(KnowledgeBase::new(dictionaries)?)
}

/// Gender direction from a pair file (or the built-in list), keeping only
/// pairs fully inside the vocabulary.
fn gender_direction_for(
    set: &EmbeddingSet,
    pairs_path: Option<&Path>,
) -> anyhow::Result<GenderDirection> {
    let pairs = match pairs_path {
        Some(p) => load_gender_pairs(BufReader::new(
            File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))?,
        None => default_gender_pairs(),
    };
    let usable: Vec<(String, String)> = pairs
        .iter()
        .filter(|(f, m)| set.vocab().contains(f) && set.vocab().contains(m))
        .cloned()
        .collect();
    let dropped = pairs.len() - usable.len();
    if dropped > 0 {
        eprintln!("warning: {dropped} gender pair(s) outside the vocabulary were skipped");
    }
    Ok(GenderDirection::compute(set, &usable)?)
}

fn cmd_classify(args: ClassifyArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let embedding = require(args.embedding.or_else(|| config.embedding.clone()), "embedding")?;
    let out_dir = require(args.out.or_else(|| config.out.clone()), "output directory")?;
    let expected_dim = args.expected_dim.or(config.expected_dim);

    // Read every input before writing anything, so a bad path cannot leave
    // partial output behind.
    let set = load_set(&embedding, expected_dim)?;
    let lists = load_word_lists(
        args.stop_words.or_else(|| config.stop_words.clone()).as_deref(),
        args.seed.or_else(|| config.seed_words.clone()).as_deref(),
        args.names.or_else(|| config.names.clone()).as_deref(),
    )?;
    let dict_paths = if args.dictionaries.is_empty() {
        config.dictionaries.clone()
    } else {
        args.dictionaries
    };
    let kb = load_knowledge_base(&dict_paths)?;

    let classification = classify_vocabulary(set.vocab(), &lists, &kb);

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    write_token_file(&out_dir.join("vp.txt"), &set, |t| {
        classification.is_preserved(t)
    })?;
    write_token_file(&out_dir.join("vd.txt"), &set, |t| {
        !classification.is_preserved(t)
    })?;
    let mut prov = BufWriter::new(File::create(out_dir.join("provenance.tsv"))?);
    writeln!(prov, "token\tstage")?;
    for token in set.vocab().words() {
        let stage = classification.stage(token).expect("classified token");
        writeln!(prov, "{token}\t{}", stage.label())?;
    }
    prov.flush()?;

    for (stage, count) in classification.stage_counts() {
        println!("stage\t{}\t{count}", stage.label());
    }
    println!("preserve\t{}", classification.preserve().len());
    println!("debias\t{}", classification.debias().len());
    Ok(())
}

fn write_token_file(
    path: &Path,
    set: &EmbeddingSet,
    mut keep: impl FnMut(&str) -> bool,
) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for token in set.vocab().words() {
        if keep(token) {
            writeln!(w, "{token}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Classification from set files when provided, otherwise computed inline
/// from word lists and dictionaries.
fn classification_for(
    set: &EmbeddingSet,
    preserve: Option<&Path>,
    debias: Option<&Path>,
    stop_words: Option<&Path>,
    seed: Option<&Path>,
    names: Option<&Path>,
    dictionaries: &[PathBuf],
) -> anyhow::Result<Classification> {
    match (preserve, debias) {
        (Some(p), Some(d)) => {
            let vp = load_list(p)?;
            let vd = load_list(d)?;
            Ok(Classification::from_sets(vp, vd)?)
        }
        (None, None) => {
            if dictionaries.is_empty() {
                bail!(
                    "no classification available: pass --preserve/--debias-set files \
                     or word lists plus at least one --dictionary for inline classification"
                );
            }
            let lists = load_word_lists(stop_words, seed, names)?;
            let kb = load_knowledge_base(dictionaries)?;
            Ok(classify_vocabulary(set.vocab(), &lists, &kb))
        }
        _ => bail!("--preserve and --debias-set must be given together"),
    }
}

/// Loads a usable cache if `path` exists and covers the query set at the
/// requested depth (longer lists are truncated); otherwise computes the
/// table and writes it back to `path` when given.
fn neighbour_table_for(
    set: &EmbeddingSet,
    queries: &[String],
    k: usize,
    cache: Option<&Path>,
) -> anyhow::Result<NeighbourTable> {
    if let Some(path) = cache {
        if path.exists() {
            let table = NeighbourTable::read_cache(BufReader::new(File::open(path)?))
                .with_context(|| format!("reading neighbour cache {}", path.display()))?;
            let full_depth = k.min(set.len().saturating_sub(1));
            let covers = queries
                .iter()
                .all(|q| table.get(q).is_some_and(|l| l.len() >= full_depth));
            if covers {
                eprintln!("reusing neighbour cache {}", path.display());
                return Ok(table.truncated(k));
            }
            eprintln!(
                "neighbour cache {} does not cover the query set; recomputing",
                path.display()
            );
        }
    }
    let table = top_k_neighbours(set, queries, k)?;
    if let Some(path) = cache {
        let mut w = BufWriter::new(File::create(path)?);
        table.write_cache(&mut w)?;
        w.flush()?;
        eprintln!("wrote neighbour cache {}", path.display());
    }
    Ok(table)
}

fn cmd_debias(args: DebiasArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let embedding = require(args.embedding.or_else(|| config.embedding.clone()), "embedding")?;
    let out = require(args.out.or_else(|| config.out.clone()), "output path")?;

    let weights = match args.lambda {
        Some(s) => parse_lambda(&s)?,
        None => config.lambda.unwrap_or_default(),
    };
    let mut optimizer = OptimizerConfig::default();
    if let Some(lr) = args.learning_rate.or(config.learning_rate) {
        optimizer.learning_rate = lr;
    }
    if let Some(steps) = args.max_steps.or(config.max_steps) {
        optimizer.max_steps = steps;
    }
    if let Some(tol) = args.tolerance.or(config.tolerance) {
        optimizer.tolerance = tol;
    }
    if let Some(b1) = config.beta1 {
        optimizer.beta1 = b1;
    }
    if let Some(b2) = config.beta2 {
        optimizer.beta2 = b2;
    }
    if let Some(eps) = config.adam_epsilon {
        optimizer.epsilon = eps;
    }
    let cfg = DebiasConfig {
        weights,
        theta_r: args.theta_r.or(config.theta_r).unwrap_or(DEFAULT_THETA_R),
        k: args.k.or(config.k).unwrap_or(DEFAULT_K),
        optimizer,
    };
    cfg.optimizer.validate()?;

    let set = load_set(&embedding, args.expected_dim.or(config.expected_dim))?;
    let classification = classification_for(
        &set,
        args.preserve.or_else(|| config.preserve_file.clone()).as_deref(),
        args.debias_set.or_else(|| config.debias_file.clone()).as_deref(),
        args.stop_words.or_else(|| config.stop_words.clone()).as_deref(),
        args.seed.or_else(|| config.seed_words.clone()).as_deref(),
        args.names.or_else(|| config.names.clone()).as_deref(),
        &if args.dictionaries.is_empty() {
            config.dictionaries.clone()
        } else {
            args.dictionaries
        },
    )?;
    let direction = gender_direction_for(
        &set,
        args.gender_pairs.or_else(|| config.gender_pairs.clone()).as_deref(),
    )?;

    let debias_words: Vec<String> = set
        .vocab()
        .words()
        .iter()
        .filter(|w| classification.debias().contains(*w))
        .cloned()
        .collect();
    let cache = args.neighbour_cache.or_else(|| config.neighbour_cache.clone());
    let result = if debias_words.is_empty() {
        ran_debias::debias::debias_all(&set, &classification, &direction, &cfg)?
    } else {
        let table = neighbour_table_for(&set, &debias_words, cfg.k, cache.as_deref())?;
        debias_with_neighbours(&set, &classification, &direction, &cfg, &table)?
    };

    let precision = args.precision.or(config.precision).unwrap_or(6);
    save_embedding_file(&result.debiased, &out, precision)
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(trace_path) = args.trace.or_else(|| config.trace.clone()) {
        let mut w = BufWriter::new(File::create(&trace_path)?);
        result.write_trace_tsv(&mut w)?;
        w.flush()?;
    }

    let mean = |f: fn(&ran_debias::debias::TraceEntry) -> f64| {
        if result.trace.is_empty() {
            0.0
        } else {
            result.trace.iter().map(|(_, e)| f(e)).sum::<f64>() / result.trace.len() as f64
        }
    };
    println!("debiased\t{}", result.trace.len());
    println!("failures\t{}", result.failures.len());
    println!("mean_initial_objective\t{:.6}", mean(|e| e.initial_objective));
    println!("mean_final_objective\t{:.6}", mean(|e| e.final_objective));
    for (token, reason) in &result.failures {
        eprintln!("failed\t{token}\t{reason}");
    }
    Ok(())
}

fn cmd_audit(args: AuditArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let embedding = require(args.embedding.or_else(|| config.embedding.clone()), "embedding")?;
    let expected_dim = args.expected_dim.or(config.expected_dim);
    let eval_set = load_set(&embedding, expected_dim)?;
    let reference_path = args
        .reference_embedding
        .or_else(|| config.reference_embedding.clone());
    let reference_set = match &reference_path {
        Some(p) => Some(load_set(p, expected_dim)?),
        None => None,
    };
    let reference = reference_set.as_ref().unwrap_or(&eval_set);

    let thresholds = match args.theta_s {
        Some(s) => parse_number_list("theta_s", &s)?,
        None => config.theta_s.clone().unwrap_or_else(|| vec![0.03, 0.05, 0.07]),
    };
    if thresholds.is_empty() {
        bail!("no theta_s thresholds given");
    }
    let epsilon = args.epsilon.or(config.epsilon).unwrap_or(DEFAULT_EPSILON);
    let n = args.k.or(config.k).unwrap_or(DEFAULT_K);

    let words: Vec<String> = match args.words.or_else(|| config.words.clone()) {
        Some(path) => {
            let requested = load_list(&path)?;
            let mut usable: Vec<String> = eval_set
                .vocab()
                .words()
                .iter()
                .filter(|w| requested.contains(*w) && reference.vocab().contains(w))
                .cloned()
                .collect();
            let dropped = requested.len() - usable.len();
            if dropped > 0 {
                eprintln!("warning: {dropped} query word(s) outside the vocabularies were skipped");
            }
            usable.shrink_to_fit();
            usable
        }
        None => eval_set
            .vocab()
            .words()
            .iter()
            .filter(|w| reference.vocab().contains(w))
            .cloned()
            .collect(),
    };
    if words.is_empty() {
        bail!("audit query set is empty");
    }

    // The direction comes from the reference (original) embedding, matching
    // the edge-weight rule for debiased inputs.
    let direction = gender_direction_for(
        reference,
        args.gender_pairs.or_else(|| config.gender_pairs.clone()).as_deref(),
    )?;

    let cache = args.neighbour_cache.or_else(|| config.neighbour_cache.clone());
    let table = neighbour_table_for(&eval_set, &words, n, cache.as_deref())?;
    let network = BiasNetwork::from_neighbour_table(&table, reference, &direction)?;

    let out_dir = args.out.or_else(|| config.out.clone());
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for theta in &thresholds {
        let report = gipe(&network, *theta, epsilon)?;
        if let Some(dir) = &out_dir {
            let path = dir.join(format!("gipe_{theta}.tsv"));
            let mut w = BufWriter::new(File::create(&path)?);
            report.write_tsv(&mut w)?;
            w.flush()?;
        }
        println!(
            "GIPE\ttheta_s={theta}\tepsilon={epsilon}\twords={}\tvalue={:.6}",
            report.per_word.len(),
            report.gipe
        );
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let embedding = require(args.embedding.or_else(|| config.embedding.clone()), "embedding")?;
    let set = load_set(&embedding, args.expected_dim.or(config.expected_dim))?;
    let analogy_eps = args
        .analogy_eps
        .or(config.analogy_eps)
        .unwrap_or(DEFAULT_ANALOGY_EPS);

    let sembias = args.sembias.or_else(|| config.sembias.clone());
    let analogy = if args.analogy.is_empty() {
        config.analogy.clone()
    } else {
        args.analogy
    };
    let msr = if args.msr.is_empty() { config.msr.clone() } else { args.msr };
    let similarity = if args.similarity.is_empty() {
        config.similarity.clone()
    } else {
        args.similarity
    };
    if sembias.is_none() && analogy.is_empty() && msr.is_empty() && similarity.is_empty() {
        bail!("nothing to evaluate: pass --sembias, --analogy, --msr or --similarity");
    }

    let out_dir = args.out.or_else(|| config.out.clone());
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut summary: Vec<String> = Vec::new();

    if let Some(path) = sembias {
        let instances = load_sembias(BufReader::new(File::open(&path)?))
            .with_context(|| format!("reading {}", path.display()))?;
        let scores = sembias_eval(&set, &instances)?;
        summary.push(format!(
            "sembias\tdefinition={:.2}\tstereotype={:.2}\tnone={:.2}\tevaluated={}\tskipped={}",
            scores.definition_pct,
            scores.stereotype_pct,
            scores.none_pct,
            scores.evaluated,
            scores.skipped
        ));
    }

    for (paths, msr_format) in [(&analogy, false), (&msr, true)] {
        for path in paths {
            let file = BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            );
            let sections = if msr_format {
                load_msr_analogies(file)?
            } else {
                load_google_analogies(file)?
            };
            let report = analogy_accuracy(&set, &sections, analogy_eps)?;
            let name = path.display();
            for s in &report.sections {
                summary.push(format!(
                    "analogy\t{name}\t{}\taccuracy={:.4}\tcorrect={}\tanswered={}\tskipped={}",
                    s.name, s.accuracy, s.correct, s.answered, s.skipped
                ));
            }
            summary.push(format!(
                "analogy\t{name}\toverall\taccuracy={:.4}\tcorrect={}\tanswered={}\tskipped={}",
                report.accuracy, report.correct, report.answered, report.skipped
            ));
        }
    }

    for path in &similarity {
        let pairs = load_similarity_pairs(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))?;
        let report = similarity_spearman(&set, &pairs)?;
        summary.push(format!(
            "similarity\t{}\tspearman={:.4}\tused={}\tskipped={}",
            path.display(),
            report.rho,
            report.used,
            report.skipped
        ));
    }

    for line in &summary {
        println!("{line}");
    }
    if let Some(dir) = &out_dir {
        let mut w = BufWriter::new(File::create(dir.join("eval_summary.tsv"))?);
        for line in &summary {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_neighbors(args: NeighborsArgs, config: &PipelineConfig) -> anyhow::Result<()> {
    let embedding = require(args.embedding.or_else(|| config.embedding.clone()), "embedding")?;
    let out = require(args.out.or_else(|| config.out.clone()), "output path")?;
    let set = load_set(&embedding, args.expected_dim.or(config.expected_dim))?;
    let k = args.k.or(config.k).unwrap_or(DEFAULT_K);

    let words: Vec<String> = match args.words.or_else(|| config.words.clone()) {
        Some(path) => {
            let requested = load_list(&path)?;
            set.vocab()
                .words()
                .iter()
                .filter(|w| requested.contains(*w))
                .cloned()
                .collect()
        }
        None => set.vocab().words().to_vec(),
    };
    if words.is_empty() {
        bail!("no query words");
    }

    let table = top_k_neighbours(&set, &words, k)?;
    let mut w = BufWriter::new(File::create(&out)?);
    table.write_cache(&mut w)?;
    w.flush()?;
    println!("neighbours\t{}\tk={k}", table.len());
    Ok(())
}
