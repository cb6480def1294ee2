use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tokio::sync::RwLock;

use fibertrace::config::Config;
use fibertrace::connect::{connect_all, path_points, run_benchmark, split_at_junctions, truth_graph};
use fibertrace::flight::{CentroidSteering, CropSteering, ExternalPredictor, OracleSteering, Steering};
use fibertrace::graph::SegmentGraph;
use fibertrace::io::{export_swc, write_proposals, SwcRoot};
use fibertrace::metrics::{prf_table, sample_points, skeleton_prf};
use fibertrace::proofread::{Session, PROPOSALS_FILE};
use fibertrace::segment::{extract_graph, run_blockwise, skeletonize_blockwise, BitMask};
use fibertrace::server::{serve, AppState};
use fibertrace::volume::{
    generate_phantom, min_max_normalize, read_volume, write_volume, GroundTruth, PhantomSpec, Volume,
    VolumeKind,
};

#[derive(Parser)]
#[command(name = "fibertrace", version, about = "Reconstruct curvilinear structures in 3D images")]
struct Cli {
    /// JSON run configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the phantom seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SteeringKind {
    Centroid,
    Oracle,
    External,
}

#[derive(clap::Args)]
struct SteeringArgs {
    #[arg(long, value_enum, default_value = "centroid")]
    steering: SteeringKind,
    /// Ground-truth JSON, required for oracle steering.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Predictor program for external steering, followed by its arguments.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    predictor: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic tube phantom and its ground truth.
    Phantom {
        /// PhantomSpec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: PathBuf,
    },
    /// Blockwise foreground scoring and thresholding into a 0/1 mask.
    Segment {
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blockwise thinning of a mask.
    Skeletonize {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fragment graph from a skeleton.
    ExtractGraph {
        #[arg(long)]
        skeleton: PathBuf,
        /// Output graph directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Launch agents from fragment endpoints and bridge gaps.
    Connect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        volume: PathBuf,
        /// Output graph directory; proposals.tsv is written alongside.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        steering: SteeringArgs,
    },
    /// Two-agent benchmark over the non-branching paths of a ground truth.
    Benchmark {
        #[arg(long)]
        volume: PathBuf,
        /// Ground truth whose paths are flown.
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        json_out: Option<PathBuf>,
        #[command(flatten)]
        steering: SteeringArgs,
    },
    /// Recall, precision and F1 per scenario plus the length-weighted F1.
    Metrics {
        /// Predicted graph directories.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        /// Matching truths: graph directories or ground-truth JSON files.
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a graph as SWC.
    ExportSwc {
        #[arg(long)]
        graph: PathBuf,
        /// Root node; without it every component is exported.
        #[arg(long)]
        root: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// HTTP proofreading service over a graph directory.
    Serve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        volume: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

fn normalized(path: &Path) -> Result<Volume> {
    let v = read_volume(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match v.kind() {
        VolumeKind::NormalizedFloat => v,
        VolumeKind::Raw16 => min_max_normalize(&v),
    })
}

fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn steering(args: &SteeringArgs, cfg: &Config) -> Result<Box<dyn Steering>> {
    let params = cfg.flight;
    Ok(match args.steering {
        SteeringKind::Centroid => Box::new(CentroidSteering::centroid(params)),
        SteeringKind::Oracle => {
            let path = args.truth.as_ref().context("--truth is required for oracle steering")?;
            Box::new(OracleSteering {
                truth: read_truth(path)?,
                params,
            })
        }
        SteeringKind::External => {
            let Some((cmd, rest)) = args.predictor.split_first() else {
                bail!("--predictor is required for external steering");
            };
            Box::new(CropSteering {
                predictor: ExternalPredictor::spawn(cmd, rest)?,
                params,
            })
        }
    })
}

fn load_truth_graph(path: &Path, pitch: f64) -> Result<SegmentGraph> {
    if path.is_dir() {
        return Ok(SegmentGraph::load(path)?);
    }
    Ok(truth_graph(&read_truth(path)?, pitch, 1.0, 1e-6))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    match cli.command {
        Command::Phantom { spec, out, truth_out } => {
            let mut spec: PhantomSpec = serde_json::from_str(&fs::read_to_string(&spec)?)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let (v, truth) = generate_phantom(&spec)?;
            write_volume(&out, &v)?;
            fibertrace::io::replace_file(&truth_out, serde_json::to_string_pretty(&truth)?.as_bytes())?;
        }
        Command::Segment { volume, out } => {
            let v = normalized(&volume)?;
            let mask = run_blockwise(&v, &cfg.segmenter, &cfg.layout, cfg.threshold)?;
            log::info!("{} foreground voxels", mask.count());
            write_volume(&out, &mask.to_volume())?;
        }
        Command::Skeletonize { mask, out } => {
            let m = BitMask::from_volume(&read_volume(&mask)?);
            let skel = skeletonize_blockwise(&m, cfg.layout.skel_block);
            log::info!("{} skeleton voxels", skel.count());
            write_volume(&out, &skel.to_volume())?;
        }
        Command::ExtractGraph { skeleton, out } => {
            let s = BitMask::from_volume(&read_volume(&skeleton)?);
            let g = extract_graph(&s, cfg.sampling_interval);
            println!("{} fragments, {} nodes", g.fragments().len(), g.node_count());
            g.save(&out)?;
        }
        Command::Connect { graph, volume, out, steering: sargs } => {
            let g = SegmentGraph::load(&graph)?;
            let v = normalized(&volume)?;
            let st = steering(&sargs, &cfg)?;
            let (g2, proposals) = connect_all(&g, &v, st.as_ref(), &cfg.flight)?;
            g2.save(&out)?;
            write_proposals(&out.join(PROPOSALS_FILE), &proposals)?;
            let accepted = proposals
                .iter()
                .filter(|p| p.status == fibertrace::connect::ProposalStatus::Accepted)
                .count();
            println!(
                "{} proposals ({} merged), {} components",
                proposals.len(),
                accepted,
                g2.connected_components().len()
            );
        }
        Command::Benchmark { volume, paths, json_out, steering: sargs } => {
            let v = normalized(&volume)?;
            let truth = read_truth(&paths)?;
            let tg = truth_graph(&truth, v.pitch(), cfg.sampling_interval as f64 * v.pitch(), 1e-6);
            let pts: Vec<_> = split_at_junctions(&tg).iter().map(|p| path_points(&tg, p)).collect();
            let st = steering(&sargs, &cfg)?;
            let report = run_benchmark(&pts, &v, st.as_ref(), &cfg.flight)?;
            print!("{}", report.to_table());
            if let Some(p) = json_out {
                fibertrace::io::replace_file(&p, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
        }
        Command::Metrics { pred, truth, out } => {
            if pred.len() != truth.len() {
                bail!("--pred and --truth must be given the same number of times");
            }
            let mut rows = Vec::new();
            for (p, t) in pred.iter().zip(&truth) {
                let pg = SegmentGraph::load(p)?;
                let tg = load_truth_graph(t, pg.pitch)?;
                let prf = skeleton_prf(&pg, &tg, cfg.tolerance)?;
                let length: f64 = tg
                    .edges()
                    .map(|(a, b, _)| (tg.world(a).unwrap() - tg.world(b).unwrap()).norm())
                    .sum();
                let length = if length > 0.0 { length } else { sample_points(&tg).len() as f64 };
                rows.push((p.display().to_string(), prf, length));
            }
            let table = prf_table(&rows)?;
            print!("{table}");
            if let Some(o) = out {
                fibertrace::io::replace_file(&o, table.as_bytes())?;
            }
        }
        Command::ExportSwc { graph, root, out } => {
            let g = SegmentGraph::load(&graph)?;
            let sel = root.map_or(SwcRoot::All, SwcRoot::Node);
            fibertrace::io::replace_file(&out, export_swc(&g, sel)?.as_bytes())?;
        }
        Command::Serve { graph, volume, bind } => {
            let session = Session::open(&graph)?;
            let volume = volume.map(|p| normalized(&p)).transpose()?;
            let state = AppState {
                session: RwLock::new(session),
                volume,
            };
            tokio::runtime::Runtime::new()?.block_on(serve(state, bind))?;
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
