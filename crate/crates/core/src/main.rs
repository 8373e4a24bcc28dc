use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sensorplace::config::Config;
use sensorplace::error::Error;
use sensorplace::evolve::Chromosome;
use sensorplace::grid::Scenario;
use sensorplace::pipeline::{baseline, optimize, problem_for, StageRecord};
use sensorplace::render::render_svg;
use sensorplace::result::{genes_from_docs, CompareDoc, Evaluation, ResultDoc};
use sensorplace::stitch::{
    assemble_layout, optimize_fragment, stitch_optimize, Layout, Library, Manifest, StitchParams,
};

/// Placement optimization for directional roadside sensors.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Key=value run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of occlusion realizations.
    #[arg(long)]
    masks: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::parse(&read(path)?)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            cfg.ga.seed = seed;
        }
        if let Some(m) = self.masks {
            cfg.ga.mask_count = m;
            cfg.ga.validate()?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full optimization pipeline on a scenario.
    Optimize {
        scenario: PathBuf,
        #[command(flatten)]
        run: Overrides,
        /// Result document path; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Compare the pipeline with the greedy baseline.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        run: Overrides,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw a result as SVG.
    Render {
        scenario: PathBuf,
        result: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Re-evaluate the placement stored in a result document.
    Evaluate {
        result: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Optimize the fragments listed in a manifest into a library.
    Library {
        manifest: PathBuf,
        #[command(flatten)]
        run: Overrides,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assemble a layout from a fragment library and join the fragments.
    Stitch {
        layout: PathBuf,
        library: PathBuf,
        #[command(flatten)]
        run: Overrides,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(Error::from)
            .with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize {
            scenario,
            run,
            output,
            svg,
        } => {
            let sc = load_scenario(&scenario)?;
            let cfg = run.load()?;
            let p = problem_for(&sc, &cfg)?;
            let out = optimize(&p, &cfg)?;
            let doc = ResultDoc::from_outcome(&sc, &cfg, &p, &out);
            write(output.as_deref(), &doc.to_json())?;
            if let Some(path) = svg {
                let image = render_svg(&sc, &out.chromosome.genes, Some(&doc.evaluation))?;
                write(Some(&path), &image)?;
            }
        }
        Command::Compare { scenario, run, output } => {
            let sc = load_scenario(&scenario)?;
            let cfg = run.load()?;
            let p = problem_for(&sc, &cfg)?;
            let out = optimize(&p, &cfg)?;
            let greedy = baseline(&p);
            let doc = CompareDoc::new(
                cfg.ga.seed,
                &Evaluation::of(&out.chromosome.genes, &p),
                &Evaluation::of(&greedy.genes, &p),
            );
            write(output.as_deref(), &doc.to_json())?;
        }
        Command::Render {
            scenario,
            result,
            output,
        } => {
            let sc = load_scenario(&scenario)?;
            let doc = ResultDoc::from_json(&read(&result)?)?;
            let cfg = doc.parse_config()?;
            let p = problem_for(&sc, &cfg)?;
            let genes = genes_from_docs(&doc.genes, &p)?;
            let ev = Evaluation::of(&genes, &p);
            write(Some(&output), &render_svg(&sc, &genes, Some(&ev))?)?;
        }
        Command::Evaluate { result, output } => {
            let doc = ResultDoc::from_json(&read(&result)?)?;
            let (_, ev) = doc.reevaluate()?;
            #[derive(serde::Serialize)]
            struct EvaluateDoc {
                #[serde(flatten)]
                evaluation: Evaluation,
                matches_stored: bool,
            }
            let matches_stored = ev == doc.evaluation;
            write(
                output.as_deref(),
                &json(&EvaluateDoc {
                    evaluation: ev,
                    matches_stored,
                }),
            )?;
        }
        Command::Library { manifest, run, output } => {
            let m: Manifest = serde_json::from_str(&read(&manifest)?).map_err(Error::from)?;
            let cfg = run.load()?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let mut lib = Library::default();
            for e in &m.fragments {
                let sc = load_scenario(&base.join(&e.scenario))?;
                let f = optimize_fragment(&e.id, e.kind, sc, e.symmetry.as_deref(), &cfg)
                    .with_context(|| format!("optimizing fragment '{}'", e.id))?;
                lib.fragments.push(f);
            }
            write(output.as_deref(), &lib.to_json())?;
        }
        Command::Stitch {
            layout,
            library,
            run,
            trials,
            output,
            svg,
        } => {
            let lay = Layout::from_json(&read(&layout)?)?;
            let lib = Library::from_json(&read(&library)?)?;
            let mut cfg = run.load()?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let asm = assemble_layout(&lay, &lib)?;
            let p = problem_for(&asm.scenario, &cfg)?;
            let params = StitchParams {
                trials: cfg.trials,
                seed: cfg.ga.seed,
                full_local_search: cfg.full_local_search,
            };
            let out = stitch_optimize(&asm, &p, &lay, params)?;
            let naive = Chromosome::new(asm.chromosome.genes.clone());
            let mut doc = ResultDoc::new(&asm.scenario, &cfg, &p, &out.chromosome.genes);
            doc.stages = vec![
                StageRecord::new("assembly", &naive, &p),
                StageRecord::new("stitch", &out.chromosome, &p),
            ];
            write(output.as_deref(), &doc.to_json())?;
            if let Some(path) = svg {
                let image = render_svg(&asm.scenario, &out.chromosome.genes, Some(&doc.evaluation))?;
                write(Some(&path), &image)?;
            }
        }
    }
    Ok(())
}

/// Parse and configuration problems exit with 2, a scenario without free
/// cells with 3, fragments with different sensors with 4, anything else 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::InvalidScenario(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::InvalidGene { .. }
            | Error::Layout(_)
            | Error::EmptyStreetSet
            | Error::InvalidWeights(_)
            | Error::NoTranslationAxis,
        ) => 2,
        Some(Error::NoFreeCells) => 3,
        Some(Error::SensorSpecMismatch(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
