use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irisattn_core::eval::{
    accuracy_by_pmi, classification_accuracy, ensemble_accuracy, ensemble_accuracy_by_pmi,
    ensemble_or, parse_decision_log, pmi_buckets_from_data, roc_eer, scores_to_comparisons,
    DecisionRecord, RocCurve, ScoreMatrix, Source,
};
use irisattn_core::gaze::{
    build_human_map, cluster_fixations, detect_fixations, load_transforms, parse_gaze_log,
    ClusterConfig, FixationConfig, FixationEvent, ScreenToImageTransform, DEFAULT_SIGMA_SCREEN_PX,
};
use irisattn_core::saliency::{
    compare_pair, load_saliency_grid, normalize_map, overlap_q, prepare_cam, SaliencyGrid,
};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "irisattn", version, about = "Gaze, saliency and recognition-metric tools for iris image pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eye-tracker log processing.
    #[command(subcommand)]
    Gaze(GazeCmd),
    /// Machine-vs-human map comparison.
    #[command(subcommand)]
    Compare(CompareCmd),
    /// Recognition metrics.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the experiment HTTP server.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FixationArgs {
    /// Gaze log CSV (`t_ms,x,y,valid`).
    #[arg(long)]
    pub log: PathBuf,
    /// Maximum window dispersion, screen px.
    #[arg(long, default_value_t = 40.0)]
    pub dispersion: f64,
    /// Minimum fixation duration, ms.
    #[arg(long = "min-dur", default_value_t = 100.0)]
    pub min_dur: f64,
}

impl FixationArgs {
    fn fixations(&self) -> Result<Vec<FixationEvent>> {
        let raw = read_text(&self.log)?;
        let samples = parse_gaze_log(&raw).with_context(|| format!("parsing {}", self.log.display()))?;
        let cfg = FixationConfig {
            dispersion_px: self.dispersion,
            min_duration_ms: self.min_dur,
        };
        Ok(detect_fixations(&samples, &cfg))
    }
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Transform descriptor file (one panel, an array, or `{"panels": [...]}`).
    #[arg(long)]
    pub transform: PathBuf,
    /// Panel index within the descriptor.
    #[arg(long, default_value_t = 0)]
    pub panel: usize,
}

impl PanelArgs {
    fn transform(&self) -> Result<ScreenToImageTransform> {
        let all = load_transforms(&read_text(&self.transform)?)
            .with_context(|| format!("parsing {}", self.transform.display()))?;
        let n = all.len();
        all.into_iter()
            .nth(self.panel)
            .with_context(|| format!("panel {} requested, descriptor has {n}", self.panel))
    }
}

#[derive(Debug, Subcommand)]
pub enum GazeCmd {
    /// Detect fixations (I-DT) and print them as JSON.
    Fixations {
        #[command(flatten)]
        fix: FixationArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster fixations in image space.
    Cluster {
        #[command(flatten)]
        fix: FixationArgs,
        #[command(flatten)]
        panel: PanelArgs,
        /// Neighborhood radius, image px.
        #[arg(long, default_value_t = 50.0)]
        radius: f64,
        #[arg(long = "min-members", default_value_t = 2)]
        min_members: usize,
        /// Display radius of each cluster disc, image px.
        #[arg(long = "display-radius", default_value_t = 60.0)]
        display_radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the duration-weighted human attention map for one panel.
    Humanmap {
        #[command(flatten)]
        fix: FixationArgs,
        #[command(flatten)]
        panel: PanelArgs,
        /// Gaussian sigma, screen px.
        #[arg(long, default_value_t = DEFAULT_SIGMA_SCREEN_PX)]
        sigma: f64,
        /// Output grid file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CompareCmd {
    /// Overlap score q for one image, or for both images of a pair.
    Q {
        /// Machine map (grid JSON or 16-bit PNG), any resolution.
        #[arg(long)]
        cam: PathBuf,
        /// Human map grid; defines the output raster.
        #[arg(long)]
        human: PathBuf,
        #[arg(long = "cam-right", requires = "human_right")]
        cam_right: Option<PathBuf>,
        #[arg(long = "human-right", requires = "cam_right")]
        human_right: Option<PathBuf>,
        #[arg(long = "pair-id", default_value = "pair")]
        pair_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cell agreement grid `√(p_c · p_e)`.
    Agreement {
        #[arg(long)]
        cam: PathBuf,
        #[arg(long)]
        human: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Closed-set accuracy per split and mean.
    Acc {
        #[arg(long)]
        scores: PathBuf,
    },
    /// ROC curve and EER. Per-split curves by default; `--pool` pools all splits.
    Roc {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pool: bool,
    },
    /// OR-rule ensemble accuracy over a decision log.
    Ensemble {
        #[arg(long)]
        log: PathBuf,
        /// Comma-separated sources, e.g. `machine,humanA,humanB`.
        #[arg(long, value_delimiter = ',', required = true)]
        members: Vec<String>,
    },
    /// Accuracy per post-mortem-interval bucket.
    Pmi {
        #[arg(long)]
        log: PathBuf,
        /// Ascending bucket edges in days, or `auto` for one bucket per observed value.
        #[arg(long, default_value = "auto")]
        buckets: String,
        /// Also report the OR-ensemble of these sources.
        #[arg(long, value_delimiter = ',')]
        members: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Data root holding `pool.json`, the event log and per-pair files.
    #[arg(long, env = "IRISATTN_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "IRISATTN_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Default pairs per session.
    #[arg(long, env = "IRISATTN_K", default_value_t = 20)]
    pub k: usize,
    /// Default schedule seed.
    #[arg(long, env = "IRISATTN_SEED", default_value_t = 0)]
    pub seed: u64,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_grid(path: &Path) -> Result<SaliencyGrid> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_saliency_grid(&raw).with_context(|| format!("parsing {}", path.display()))
}

fn read_decisions(path: &Path) -> Result<Vec<DecisionRecord>> {
    parse_decision_log(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_scores(path: &Path) -> Result<ScoreMatrix> {
    ScoreMatrix::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn parse_members(names: &[String]) -> Result<Vec<Source>> {
    names
        .iter()
        .map(|n| n.trim().parse::<Source>().map_err(Into::into))
        .collect()
}

/// Writes `full` to `path` when given and prints `summary`; otherwise prints `full`.
fn emit(out: &mut dyn Write, path: Option<&Path>, full: &impl Serialize, summary: serde_json::Value) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, serde_json::to_vec_pretty(full)?)
                .with_context(|| format!("writing {}", p.display()))?;
            writeln!(out, "{}", serde_json::to_string(&summary)?)?;
        }
        None => writeln!(out, "{}", serde_json::to_string_pretty(full)?)?,
    }
    Ok(())
}

fn human_side(cam: &SaliencyGrid, human: &SaliencyGrid) -> Result<(SaliencyGrid, SaliencyGrid)> {
    let pe = normalize_map(human)?;
    let pc = prepare_cam(cam, pe.width(), pe.height())?;
    Ok((pc, pe))
}

fn curve_summary(c: &RocCurve) -> serde_json::Value {
    json!({ "eer": c.eer, "eer_threshold": c.eer_threshold, "auc": c.auc, "points": c.points.len() })
}

/// Executes every subcommand except `serve`, writing results to `out`.
pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Gaze(GazeCmd::Fixations { fix, out: path }) => {
            let f = fix.fixations()?;
            emit(out, path.as_deref(), &f, json!({ "fixations": f.len() }))
        }
        Command::Gaze(GazeCmd::Cluster {
            fix,
            panel,
            radius,
            min_members,
            display_radius,
            out: path,
        }) => {
            let cfg = ClusterConfig {
                neighborhood_px: radius,
                min_members,
                display_radius_px: display_radius,
            };
            let clusters = cluster_fixations(&fix.fixations()?, &panel.transform()?, &cfg);
            emit(out, path.as_deref(), &clusters, json!({ "clusters": clusters.len() }))
        }
        Command::Gaze(GazeCmd::Humanmap { fix, panel, sigma, out: path }) => {
            let fixations = fix.fixations()?;
            let map = build_human_map(&fixations, &panel.transform()?, sigma)?;
            std::fs::write(&path, map.to_json()).with_context(|| format!("writing {}", path.display()))?;
            writeln!(
                out,
                "{}",
                json!({ "width": map.width(), "height": map.height(), "fixations": fixations.len() })
            )?;
            Ok(())
        }
        Command::Compare(CompareCmd::Q {
            cam,
            human,
            cam_right,
            human_right,
            pair_id,
            out: path,
        }) => {
            let (cam, human) = (read_grid(&cam)?, normalize_map(&read_grid(&human)?)?);
            let report = match (cam_right, human_right) {
                (Some(cr), Some(hr)) => {
                    let (cr, hr) = (read_grid(&cr)?, normalize_map(&read_grid(&hr)?)?);
                    serde_json::to_value(compare_pair(&pair_id, (&cam, &human), (&cr, &hr))?)?
                }
                _ => {
                    let (pc, pe) = human_side(&cam, &human)?;
                    let q = overlap_q(&pc, &pe)?.q;
                    json!({ "q": q, "width": pe.width(), "height": pe.height() })
                }
            };
            emit(out, path.as_deref(), &report, report.clone())
        }
        Command::Compare(CompareCmd::Agreement { cam, human, out: path }) => {
            let (pc, pe) = human_side(&read_grid(&cam)?, &read_grid(&human)?)?;
            let report = overlap_q(&pc, &pe)?;
            std::fs::write(&path, report.agreement.to_json())
                .with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "{}", json!({ "q": report.q }))?;
            Ok(())
        }
        Command::Eval(EvalCmd::Acc { scores }) => {
            let report = classification_accuracy(&read_scores(&scores)?)?;
            emit(out, None, &report, json!(null))
        }
        Command::Eval(EvalCmd::Roc { scores, out: path, pool }) => {
            let m = read_scores(&scores)?;
            let (full, summary) = if pool {
                let c = scores_to_comparisons(&m);
                let curve = roc_eer(&c.genuine, &c.impostor)?;
                let summary = json!({ "mode": "pooled", "curve": curve_summary(&curve) });
                (json!({ "mode": "pooled", "curve": curve }), summary)
            } else {
                let mut curves = Vec::new();
                for split in 0..m.splits {
                    let c = scores_to_comparisons(&m.split(split));
                    let curve = if c.genuine.is_empty() || c.impostor.is_empty() {
                        None
                    } else {
                        Some(roc_eer(&c.genuine, &c.impostor)?)
                    };
                    curves.push(curve);
                }
                let eers: Vec<f64> = curves.iter().flatten().map(|c| c.eer).collect();
                if eers.is_empty() {
                    bail!("no split has both genuine and impostor scores");
                }
                let mean_eer = eers.iter().sum::<f64>() / eers.len() as f64;
                let summary = json!({
                    "mode": "per_split",
                    "mean_eer": mean_eer,
                    "splits": curves.iter().map(|c| c.as_ref().map(curve_summary)).collect::<Vec<_>>(),
                });
                (json!({ "mode": "per_split", "mean_eer": mean_eer, "splits": curves }), summary)
            };
            emit(out, path.as_deref(), &full, summary)
        }
        Command::Eval(EvalCmd::Ensemble { log, members }) => {
            let records = read_decisions(&log)?;
            let members = parse_members(&members)?;
            let verdicts = ensemble_or(&records, &members)?;
            let member_accuracy: BTreeMap<String, Option<f64>> = members
                .iter()
                .map(|m| {
                    let mine: Vec<_> = records.iter().filter(|r| &r.source == m).collect();
                    let acc = (!mine.is_empty()).then(|| {
                        mine.iter().filter(|r| r.is_correct()).count() as f64 / mine.len() as f64
                    });
                    (m.to_string(), acc)
                })
                .collect();
            let report = json!({
                "members": members.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "pairs": verdicts.len(),
                "ensemble_accuracy": ensemble_accuracy(&verdicts),
                "member_accuracy": member_accuracy,
                "verdicts": verdicts,
            });
            emit(out, None, &report, json!(null))
        }
        Command::Eval(EvalCmd::Pmi { log, buckets, members }) => {
            let records = read_decisions(&log)?;
            let edges = if buckets.trim() == "auto" {
                pmi_buckets_from_data(&records)
            } else {
                parse_edges(&buckets)?
            };
            let mut rows = accuracy_by_pmi(&records, &edges);
            if !members.is_empty() {
                let verdicts = ensemble_or(&records, &parse_members(&members)?)?;
                rows.extend(ensemble_accuracy_by_pmi(&verdicts, &edges));
            }
            emit(out, None, &json!({ "edges": edges, "buckets": rows }), json!(null))
        }
        Command::Serve(_) => bail!("serve runs through `irisattn_cli::http::serve`"),
    }
}

fn parse_edges(raw: &str) -> Result<Vec<u32>> {
    let edges = raw
        .split(',')
        .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad bucket edge {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        bail!("bucket edges must be strictly ascending");
    }
    Ok(edges)
}
