//! Command-line surface: TSV loaders, argument parsing and command dispatch.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.
//! Every failure writes exactly one diagnostic line to the error stream.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::coarse::{discover_clusters, truncated_svd, TermDocMatrix, DEFAULT_Q, DEFAULT_TOP_TERMS};
use crate::embeddings::{load_embeddings, DocVecTable, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{export_csv, sweep_k, EvalCase, SweepResult};
use crate::knn::{Cascade, KnnIndex, LabeledRef, NeighborSource, DEFAULT_K};
use crate::strategies::{Strategy, StrategyInputs};
use crate::text_model::{build_corpus_stats, tfidf, Document};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

fn split_tsv(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r').split('\t').collect()
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads `id \t title \t fine_label [\t coarse_label]` lines.
pub fn load_refs<R: BufRead>(source: R) -> Result<Vec<LabeledRef>> {
    let mut refs = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_tsv(&line);
        let (id, title, fine, coarse) = match cols.as_slice() {
            [id, title, fine] => (*id, *title, *fine, None),
            [id, title, fine, coarse] => (*id, *title, *fine, Some(*coarse)),
            _ => {
                return Err(parse_err(
                    lineno,
                    format!("expected 3 or 4 tab-separated columns, found {}", cols.len()),
                ))
            }
        };
        if fine.is_empty() {
            return Err(parse_err(lineno, "empty fine label"));
        }
        if !ids.insert(id.to_owned()) {
            return Err(parse_err(lineno, format!("duplicate id {id:?}")));
        }
        refs.push(LabeledRef {
            doc: Document::new(id, title),
            fine_label: fine.to_owned(),
            coarse_label: coarse.filter(|c| !c.is_empty()).map(str::to_owned),
        });
    }
    Ok(refs)
}

/// Reads `id \t title \t gold_label` lines. With `require_gold` unset the
/// gold column may be omitted.
pub fn load_queries<R: BufRead>(source: R, require_gold: bool) -> Result<Vec<(Document, Option<String>)>> {
    let mut queries = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_tsv(&line);
        let (id, title, gold) = match cols.as_slice() {
            [id, title, gold] => (*id, *title, Some(*gold)),
            [id, title] if !require_gold => (*id, *title, None),
            _ => {
                return Err(parse_err(
                    lineno,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ))
            }
        };
        if require_gold && gold.is_some_and(str::is_empty) {
            return Err(parse_err(lineno, "empty gold label"));
        }
        if !ids.insert(id.to_owned()) {
            return Err(parse_err(lineno, format!("duplicate id {id:?}")));
        }
        queries.push((Document::new(id, title), gold.map(str::to_owned)));
    }
    Ok(queries)
}

#[derive(Debug, Parser)]
#[command(name = "titlesim", version, about = "kNN job title classification with BOW, averaged embeddings and Word Mover's Distance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Print `query_id<TAB>predicted_label` for every query
    Classify(CommonArgs),
    /// Print the accuracy at one k
    Evaluate(CommonArgs),
    /// Accuracy for every k in a range, as CSV
    #[command(name = "sweep-k")]
    SweepK(CommonArgs),
    /// SVD-based coarse clusters of the reference titles
    #[command(name = "discover-taxonomy")]
    DiscoverTaxonomy(CommonArgs),
    /// Vocabulary size, dimension and vector norms of an embedding file
    #[command(name = "embeddings-info")]
    EmbeddingsInfo(CommonArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// bow, avgw2v, wmd or docvec
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "k-min")]
    pub k_min: Option<usize>,
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    /// Exact WMD evaluations before lower-bound pruning starts
    #[arg(long)]
    pub prefetch: Option<usize>,
    #[arg(long)]
    pub refs: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub docvecs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Route each query through the coarse stage first
    #[arg(long)]
    pub cascade: bool,
    #[arg(long = "q-threshold")]
    pub q_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Evaluate,
    SweepK,
    DiscoverTaxonomy,
    EmbeddingsInfo,
}

/// Validated settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub strategy: Option<Strategy>,
    pub refs: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub docvecs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub prefetch: Option<usize>,
    pub cascade: bool,
    pub q_threshold: f64,
}

fn require(path: &Option<PathBuf>, flag: &str, command: &str) -> std::result::Result<(), String> {
    match path {
        Some(_) => Ok(()),
        None => Err(format!("{command} requires --{flag}")),
    }
}

impl RunConfig {
    /// Checks flag combinations; the error is the usage diagnostic.
    pub fn from_cli(cli: Cli) -> std::result::Result<Self, String> {
        let (command, args) = match cli.command {
            CliCommand::Classify(a) => (Command::Classify, a),
            CliCommand::Evaluate(a) => (Command::Evaluate, a),
            CliCommand::SweepK(a) => (Command::SweepK, a),
            CliCommand::DiscoverTaxonomy(a) => (Command::DiscoverTaxonomy, a),
            CliCommand::EmbeddingsInfo(a) => (Command::EmbeddingsInfo, a),
        };
        let name = match command {
            Command::Classify => "classify",
            Command::Evaluate => "evaluate",
            Command::SweepK => "sweep-k",
            Command::DiscoverTaxonomy => "discover-taxonomy",
            Command::EmbeddingsInfo => "embeddings-info",
        };
        let strategy = args
            .strategy
            .as_deref()
            .map(|s| s.parse::<Strategy>().map_err(|_| format!("--strategy: unknown strategy {s:?} (expected bow, avgw2v, wmd or docvec)")))
            .transpose()?;

        let config = RunConfig {
            command,
            strategy,
            refs: args.refs,
            queries: args.queries,
            embeddings: args.embeddings,
            docvecs: args.docvecs,
            out: args.out,
            k: args.k.unwrap_or(DEFAULT_K),
            k_min: args.k_min.unwrap_or(1),
            k_max: args.k_max.unwrap_or(DEFAULT_K),
            prefetch: args.prefetch,
            cascade: args.cascade,
            q_threshold: args.q_threshold.unwrap_or(DEFAULT_Q),
        };

        match command {
            Command::Classify | Command::Evaluate | Command::SweepK => {
                let strategy = strategy.ok_or_else(|| format!("{name} requires --strategy"))?;
                require(&config.refs, "refs", name)?;
                require(&config.queries, "queries", name)?;
                if strategy.needs_embeddings() {
                    require(&config.embeddings, "embeddings", &format!("strategy {strategy}"))?;
                }
                if strategy == Strategy::DocVec {
                    require(&config.docvecs, "docvecs", "strategy docvec")?;
                }
                if config.k == 0 {
                    return Err("--k must be at least 1".into());
                }
                if config.k_min == 0 || config.k_min > config.k_max {
                    return Err(format!(
                        "--k-min/--k-max: need 1 <= k-min <= k-max, got {} and {}",
                        config.k_min, config.k_max
                    ));
                }
                if command == Command::SweepK && config.prefetch.is_some_and(|p| p < config.k_max) {
                    return Err("--prefetch must be at least --k-max".into());
                }
                if command != Command::SweepK && config.prefetch.is_some_and(|p| p < config.k) {
                    return Err("--prefetch must be at least --k".into());
                }
            }
            Command::DiscoverTaxonomy => require(&config.refs, "refs", name)?,
            Command::EmbeddingsInfo => require(&config.embeddings, "embeddings", name)?,
        }
        if !(config.q_threshold > 0.0 && config.q_threshold <= 1.0) {
            return Err(format!("--q-threshold must lie in (0, 1], got {}", config.q_threshold));
        }
        Ok(config)
    }
}

/// Data error tagged with the file it came from.
struct DataError(String);

impl DataError {
    fn at(path: &Path, err: Error) -> Self {
        DataError(format!("{}: {err}", path.display()))
    }
}

impl From<Error> for DataError {
    fn from(err: Error) -> Self {
        DataError(err.to_string())
    }
}

type DataResult<T> = std::result::Result<T, DataError>;

fn open(path: &Path) -> DataResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| DataError::at(path, e.into()))
}

fn read_with<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T>) -> DataResult<T> {
    f(open(path)?).map_err(|e| DataError::at(path, e))
}

fn load_table(path: &Path) -> DataResult<EmbeddingTable> {
    read_with(path, load_embeddings)
}

/// Parses `args` (without the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("titlesim")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{err}");
                return EXIT_OK;
            }
            let text = err.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{first}");
            return EXIT_USAGE;
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(config) => run(&config, stdout, stderr),
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}

pub fn run(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut out = Vec::new();
    let result = match config.command {
        Command::Classify => run_classify(config, &mut out, stderr),
        Command::Evaluate => run_evaluate(config, &mut out, stderr),
        Command::SweepK => run_sweep(config, &mut out, stderr),
        Command::DiscoverTaxonomy => run_discover(config, &mut out),
        Command::EmbeddingsInfo => run_info(config, &mut out),
    };
    match result {
        Ok(()) => {
            if let Err(e) = stdout.write_all(&out).and_then(|_| stdout.flush()) {
                let _ = writeln!(stderr, "error: stdout: {e}");
                return EXIT_DATA;
            }
            EXIT_OK
        }
        Err(DataError(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

enum Model {
    Flat(KnnIndex),
    Cascade(Cascade),
}

impl Model {
    fn source(&self) -> &dyn NeighborSource {
        match self {
            Model::Flat(index) => index,
            Model::Cascade(cascade) => cascade,
        }
    }

    fn warnings(&self) -> Vec<String> {
        match self {
            Model::Flat(index) => index.warnings().to_vec(),
            Model::Cascade(cascade) => cascade.warnings(),
        }
    }
}

fn build_model(config: &RunConfig, stderr: &mut dyn Write) -> DataResult<Model> {
    let strategy = config.strategy.expect("validated");
    let refs_path = config.refs.as_deref().expect("validated");
    let refs = read_with(refs_path, load_refs)?;
    if refs.is_empty() {
        return Err(DataError::at(refs_path, Error::NoRepresentableRefs));
    }
    let stats = build_corpus_stats(refs.iter().map(|r| &r.doc)).map_err(|e| DataError::at(refs_path, e))?;
    let table = match (&config.embeddings, strategy.needs_embeddings()) {
        (Some(path), true) => Some(load_table(path)?),
        _ => None,
    };
    let docvecs = match (&config.docvecs, strategy) {
        (Some(path), Strategy::DocVec) => Some(read_with(path, DocVecTable::load)?),
        _ => None,
    };
    let inputs = Arc::new(StrategyInputs {
        stats: Some(stats),
        table,
        docvecs,
    });
    let model = if config.cascade {
        let mut cascade = Cascade::from_refs(refs, strategy, inputs, config.q_threshold, DEFAULT_TOP_TERMS)
            .map_err(|e| DataError::at(refs_path, e))?;
        if let Some(p) = config.prefetch {
            cascade = cascade.with_prefetch(p);
        }
        Model::Cascade(cascade)
    } else {
        let mut index = KnnIndex::build(refs, strategy, inputs).map_err(|e| DataError::at(refs_path, e))?;
        if let Some(p) = config.prefetch {
            index = index.with_prefetch(p);
        }
        Model::Flat(index)
    };
    let warnings = model.warnings();
    if !warnings.is_empty() {
        let _ = writeln!(
            stderr,
            "warning: {} skipped {} unrepresentable reference(s); first: {}",
            refs_path.display(),
            warnings.len(),
            warnings[0]
        );
    }
    Ok(model)
}

fn load_cases(config: &RunConfig) -> DataResult<Vec<EvalCase>> {
    let path = config.queries.as_deref().expect("validated");
    let queries = read_with(path, |r| load_queries(r, true))?;
    if queries.is_empty() {
        return Err(DataError::at(path, Error::InvalidArgument("no queries".into())));
    }
    Ok(queries
        .into_iter()
        .map(|(query, gold)| EvalCase {
            query,
            gold_label: gold.unwrap_or_default(),
        })
        .collect())
}

fn run_classify(config: &RunConfig, out: &mut Vec<u8>, stderr: &mut dyn Write) -> DataResult<()> {
    let path = config.queries.as_deref().expect("validated");
    let queries = read_with(path, |r| load_queries(r, false))?;
    let model = build_model(config, stderr)?;
    for (query, _) in &queries {
        // Unclassifiable queries keep their line with an empty label.
        let label = model
            .source()
            .classify(query, config.k)
            .map(|p| p.label)
            .unwrap_or_default();
        writeln!(out, "{}\t{label}", query.id).expect("write to memory");
    }
    Ok(())
}

fn write_csv(config: &RunConfig, result: &SweepResult, out: &mut Vec<u8>) -> DataResult<()> {
    match &config.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| DataError::at(path, e.into()))?;
            export_csv(result, std::io::BufWriter::new(file)).map_err(|e| DataError::at(path, e))
        }
        None => export_csv(result, out).map_err(DataError::from),
    }
}

fn run_evaluate(config: &RunConfig, out: &mut Vec<u8>, stderr: &mut dyn Write) -> DataResult<()> {
    let cases = load_cases(config)?;
    let model = build_model(config, stderr)?;
    let result = sweep_k(model.source(), &cases, config.k, config.k)?;
    let row = &result.rows[0];
    writeln!(
        out,
        "accuracy={:.6}\tk={}\tn_queries={}\tn_skipped={}",
        row.accuracy, row.k, row.n_queries, row.n_skipped
    )
    .expect("write to memory");
    if config.out.is_some() {
        write_csv(config, &result, out)?;
    }
    Ok(())
}

fn run_sweep(config: &RunConfig, out: &mut Vec<u8>, stderr: &mut dyn Write) -> DataResult<()> {
    let cases = load_cases(config)?;
    let model = build_model(config, stderr)?;
    let result = sweep_k(model.source(), &cases, config.k_min, config.k_max)?;
    write_csv(config, &result, out)
}

fn run_discover(config: &RunConfig, out: &mut Vec<u8>) -> DataResult<()> {
    let path = config.refs.as_deref().expect("validated");
    let refs = read_with(path, load_refs)?;
    let tagged = |e| DataError::at(path, e);
    let stats = build_corpus_stats(refs.iter().map(|r| &r.doc)).map_err(tagged)?;
    let columns = refs
        .iter()
        .map(|r| tfidf(&r.doc, &stats).unwrap_or_default())
        .collect();
    let matrix = TermDocMatrix::from_columns(columns);
    let r_max = matrix.terms().len().min(matrix.columns().len()).max(1);
    let factors = truncated_svd(&matrix, r_max).map_err(tagged)?;
    let model = discover_clusters(&factors, config.q_threshold, DEFAULT_TOP_TERMS).map_err(tagged)?;
    for (i, c) in model.clusters.iter().enumerate() {
        writeln!(out, "{i}\t{}\t{}", c.label, c.member_count).expect("write to memory");
    }
    Ok(())
}

fn run_info(config: &RunConfig, out: &mut Vec<u8>) -> DataResult<()> {
    let table = load_table(config.embeddings.as_deref().expect("validated"))?;
    writeln!(out, "{} {}", table.len(), table.dim()).expect("write to memory");
    let norms: Vec<f64> = (0..table.len())
        .map(|i| crate::text_model::norm_dense(table.row(i)))
        .collect();
    if !norms.is_empty() {
        let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let max = norms.iter().copied().fold(0.0, f64::max);
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        writeln!(out, "norm min={min:.6} mean={mean:.6} max={max:.6}").expect("write to memory");
    }
    Ok(())
}
