use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kgforge::owlnets::AbstractionMode;
use kgforge::pipeline::{
    cmd_abstract, cmd_build, cmd_edges, cmd_merge, cmd_pipeline, cmd_qc, cmd_stats, BuildManifest, BuildTuple, PipelineError, RunOptions,
};
use kgforge::qc::render_reports;
use kgforge::rdf::ParseMode;
use kgforge::stats::render_table;

/// Build ontologically grounded knowledge graphs from ontologies and
/// tabular edge sources.
#[derive(Debug, Parser)]
#[command(name = "kgforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quality-check and clean every ontology.
    Qc(Common),
    /// Merge the cleaned ontologies into the core graph.
    Merge(Common),
    /// Assemble the edge lists.
    Edges(Common),
    /// Insert the edge lists into the core graph for each build.
    Build(Common),
    /// Abstract the built graphs.
    Abstract(Common),
    /// Compute graph statistics for each build.
    Stats(Common),
    /// Run every stage.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Build manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; defaults to the manifest's output_dir.
    #[arg(long, env = "KGFORGE_OUT")]
    out: Option<PathBuf>,
    /// Run all 12 model, strategy and abstraction combinations instead of
    /// the manifest's builds.
    #[arg(long)]
    all_builds: bool,
    /// Abort on the first malformed input line (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Skip and count malformed input lines.
    #[arg(long)]
    lenient: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(command: Command) -> Result<(), PipelineError> {
    let (Command::Qc(c) | Command::Merge(c) | Command::Edges(c) | Command::Build(c) | Command::Abstract(c) | Command::Stats(c) | Command::Pipeline(c)) =
        &command;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config { field: "--threads".into(), message: e.to_string() })?;
    }
    let manifest = BuildManifest::load(&c.manifest)?;
    let out = c
        .out
        .clone()
        .or_else(|| manifest.output_dir.clone())
        .ok_or_else(|| PipelineError::Config { field: "output_dir".into(), message: "no output directory (use --out, KGFORGE_OUT or output_dir)".into() })?;
    let opts = RunOptions { out, mode: if c.lenient { ParseMode::Lenient } else { ParseMode::Strict } };
    let tuples = if c.all_builds { BuildTuple::all() } else { manifest.builds.clone() };
    let table = |stats: &std::collections::BTreeMap<BuildTuple, kgforge::stats::GraphStats>| {
        render_table(&stats.iter().map(|(t, s)| (t.name(), s.clone())).collect::<Vec<_>>())
    };
    match command {
        Command::Qc(_) => print!("{}", render_reports(&cmd_qc(&manifest, &opts)?)),
        Command::Merge(_) => {
            let s = cmd_merge(&manifest, &opts)?;
            println!("core triples: {}", s.core_triples);
            println!("semantic heterogeneity: {}", s.heterogeneity.len());
            println!("aligned triples: {}", s.aligned_triples);
        }
        Command::Edges(_) => {
            for (name, list) in cmd_edges(&manifest, &opts)?.edge_types {
                println!("{name}\t{}\t{}", list.relation, list.stats.pairs);
            }
        }
        Command::Build(_) => {
            for (t, s) in cmd_build(&manifest, &opts, &tuples)? {
                println!("{t}\t{}", s.output_triples);
            }
        }
        Command::Abstract(_) => {
            let abstracted: Vec<BuildTuple> = tuples.iter().copied().filter(|t| t.abstraction != AbstractionMode::None).collect();
            for (t, r) in cmd_abstract(&manifest, &opts, &abstracted)? {
                println!("{t}\t{}\t{}", r.input_triples, r.output_triples);
            }
        }
        Command::Stats(_) => print!("{}", table(&cmd_stats(&opts, &tuples)?)),
        Command::Pipeline(_) => print!("{}", table(&cmd_pipeline(&manifest, &opts, &tuples)?.stats)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
