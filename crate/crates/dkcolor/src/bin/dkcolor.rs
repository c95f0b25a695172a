use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dkcolor::decomposition::{generate, validate, GenParams};
use dkcolor::runner::{batch_csv, load, replay, run_batch, run_pipeline, AuditMode, Input, RunConfig, RunReport};
use dkcolor::{AnalysisConstants, Decomposition, Graph};

#[derive(Parser)]
#[command(name = "dkcolor", version, about = "Simulate the (Δ − k_Δ + 1)-coloring pipeline in the LOCAL model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance in decomposed form.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        consts: ConstArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a graph and decomposition.
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        decomposition: PathBuf,
        #[arg(long)]
        c: Option<u32>,
        /// Print only the JSON report.
        #[arg(long)]
        validate_only: bool,
        #[command(flatten)]
        consts: ConstArgs,
    },
    /// Run the pipeline once.
    Run {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the pipeline over a range of seeds.
    Batch {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// Recheck the coloring stored in a report against its graph.
    Replay {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        graph: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sparse,
    Mixed,
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    delta: u64,
    #[arg(long, value_enum, default_value_t = Kind::Mixed)]
    kind: Kind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl GenArgs {
    fn params(&self) -> GenParams {
        match self.kind {
            Kind::Sparse => GenParams::sparse(self.n, self.delta, self.seed),
            Kind::Mixed => GenParams::mixed(self.n, self.delta, self.seed),
        }
    }
}

#[derive(Args, Clone)]
struct ConstArgs {
    /// JSON file with AnalysisConstants; defaults to the desk-scale set.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Start from the asymptotic constants instead of the desk-scale set.
    #[arg(long)]
    paper: bool,
    /// name=value replacement, repeatable.
    #[arg(long = "override")]
    overrides: Vec<String>,
}

impl ConstArgs {
    fn load(&self) -> Result<AnalysisConstants, String> {
        let mut k = match &self.constants {
            Some(p) => {
                let t = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                serde_json::from_str(&t).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None if self.paper => AnalysisConstants::paper(),
            None => AnalysisConstants::desk(),
        };
        for o in &self.overrides {
            k.push_override(o).map_err(|e| e.to_string())?;
        }
        Ok(k)
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    decomposition: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    c: Option<u32>,
    #[command(flatten)]
    consts: ConstArgs,
    #[arg(long, value_enum, default_value_t = AuditMode::Strict)]
    audit: AuditMode,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    certificate_check: bool,
    /// Permute the vertex iteration order with this seed.
    #[arg(long)]
    schedule_seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, String> {
        let input = match (&self.graph, &self.decomposition) {
            (Some(g), Some(d)) => Input::Files { graph: g.clone(), decomposition: d.clone() },
            (Some(_), None) => return Err("--graph needs --decomposition".into()),
            _ => Input::Generate(self.gen.params()),
        };
        Ok(RunConfig {
            input,
            c: self.c,
            seed: self.gen.seed,
            constants: self.consts.load()?,
            audit: self.audit,
            certificate_check: self.certificate_check,
            schedule_seed: self.schedule_seed,
            batch: 1,
            seed_stride: 1,
            out: Some(self.out.clone()),
        })
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn summary(r: &RunReport) -> String {
    format!(
        "seed {} n {} Δ {} c {}: {:?} ({} rounds, largest component {}, {} ms)",
        r.seed, r.n, r.delta, r.c, r.status, r.rounds_simulated, r.largest_component, r.wall_ms
    )
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

fn real_main() -> Result<i32, String> {
    match Cli::parse().cmd {
        Cmd::Generate { gen, consts, out } => {
            let k = consts.load()?.effective().map_err(|e| e.to_string())?;
            let p = gen.params();
            let (g, d) = generate(&p, &k).map_err(|e| e.to_string())?;
            write(&out.join("graph.txt"), &g.to_text(p.c))?;
            write(&out.join("decomposition.txt"), &d.to_text())?;
            println!("wrote {} vertices, {} edges to {}", g.n(), g.edge_count(), out.display());
            Ok(0)
        }
        Cmd::Validate { graph, decomposition, c, validate_only, consts } => {
            let k = consts.load()?.effective().map_err(|e| e.to_string())?;
            let gt = std::fs::read_to_string(&graph).map_err(|e| e.to_string())?;
            let (g, file_c) = Graph::from_text(&gt).map_err(|e| e.to_string())?;
            let dt = std::fs::read_to_string(&decomposition).map_err(|e| e.to_string())?;
            let d = Decomposition::from_text(g.n(), &dt).map_err(|e| e.to_string())?;
            let rep = validate(&g, &d, c.unwrap_or(file_c), &k);
            let json = serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?;
            if validate_only {
                println!("{json}");
            } else {
                println!("passed: {} ({} violations)", rep.passed, rep.violations.len());
                for v in rep.violations.iter().take(20) {
                    println!("  {:?} witness {:?} measured {} bound {}", v.rule, v.witness, v.measured, v.bound);
                }
            }
            Ok(if rep.passed { 0 } else { 4 })
        }
        Cmd::Run { run } => {
            let cfg = run.config()?;
            if let Err(e) = load(&cfg) {
                eprintln!("input invalid: {e}");
                return Ok(e.exit_code());
            }
            let r = run_pipeline(&cfg);
            write(&run.out.join("report.json"), &serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?)?;
            println!("{}", summary(&r));
            Ok(r.exit_code())
        }
        Cmd::Batch { run, count, stride } => {
            let mut cfg = run.config()?;
            cfg.batch = count;
            cfg.seed_stride = stride;
            let (b, reports) = run_batch(&cfg);
            for r in &reports {
                println!("{}", summary(r));
            }
            write(&run.out.join("batch.json"), &serde_json::to_string_pretty(&b).map_err(|e| e.to_string())?)?;
            write(&run.out.join("batch.csv"), &batch_csv(&b))?;
            println!(
                "success {}/{} (Wilson 95% [{:.3}, {:.3}]), median largest component {}",
                b.successes,
                b.runs.len(),
                b.wilson.0,
                b.wilson.1,
                b.largest_component_median
            );
            Ok(if b.successes == b.runs.len() { 0 } else { 2 })
        }
        Cmd::Replay { report, graph } => {
            let rt = std::fs::read_to_string(&report).map_err(|e| e.to_string())?;
            let r: RunReport = serde_json::from_str(&rt).map_err(|e| e.to_string())?;
            let gt = std::fs::read_to_string(&graph).map_err(|e| e.to_string())?;
            let (g, _) = Graph::from_text(&gt).map_err(|e| e.to_string())?;
            match replay(&r, &g) {
                Ok(()) => {
                    println!("coloring verified: {} vertices, c = {}", g.n(), r.c);
                    Ok(0)
                }
                Err(e) => {
                    println!("replay failed: {e}");
                    Ok(3)
                }
            }
        }
    }
}
