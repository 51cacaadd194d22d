use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prefscreen_core::acquisition::AcquisitionKind;
use prefscreen_core::bench::{
    interaction_study, preference_benchmark, summarize_sweep, synthetic_interaction_pairs, synthetic_sweep,
    InteractionOptions, PreferenceBenchOptions, SweepOptions,
};
use prefscreen_core::oracles::{BenchmarkKind, LibrarySource};
use prefscreen_core::preference::read_preference_log;
use prefscreen_core::screening::{
    csv_bytes, load_checkpoint, Campaign, CampaignConfig, ExpertMode, PairCard, Status, CHECKPOINT_FILE,
};
use prefscreen_core::Comparison;
use prefscreen_service::ServiceConfig;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "prefscreen", version, about = "Preference-guided active virtual screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a screening campaign from a JSON configuration.
    Run(RunArgs),
    /// Preference-model accuracy on benchmark utilities.
    EvalPrefs(EvalPrefsArgs),
    /// Sweep acquisition kinds over a synthesized library.
    BenchSynthetic(BenchArgs),
    /// Accuracy of linear preference models by interaction order.
    AnalyzeInteractions(InteractionArgs),
    /// Start the HTTP service for live campaigns.
    Serve(ServeArgs),
    /// Metric curves of finished campaigns as long-format CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpertArg {
    Simulated,
    Live,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    expert: Option<ExpertArg>,
    /// Overrides `output_dir`; a checkpoint found there is resumed.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalPrefsArgs {
    /// Comma-separated benchmark names.
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    #[arg(long, default_value_t = 4)]
    dimension: usize,
    #[arg(long, default_value_t = 100)]
    pool: usize,
    #[arg(long, default_value_t = 1200)]
    pairs: usize,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 20_000)]
    library_size: usize,
    #[arg(long, default_value_t = 7)]
    library_seed: u64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Comma-separated acquisition kinds; all when omitted.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    /// Campaign configuration used as the template for every run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for traces.csv and summary.csv.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InteractionArgs {
    /// Preference log to analyse; synthetic comparisons when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 1200)]
    pairs: usize,
    #[arg(long, default_value_t = 4)]
    max_order: usize,
    #[arg(long, default_value_t = 20)]
    folds: usize,
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    include_squares: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "PREFSCREEN_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "PREFSCREEN_DATA_DIR", default_value = "campaigns")]
    data_dir: PathBuf,
    /// URL with a `{smiles}` placeholder for structure images.
    #[arg(long, env = "PREFSCREEN_DEPICTION_URL")]
    depiction_template: Option<String>,
    /// Static files served for paths outside the API.
    #[arg(long, env = "PREFSCREEN_UI_DIR")]
    ui_dir: Option<PathBuf>,
    /// Seconds without a label before an awaiting campaign is suspended.
    #[arg(long, env = "PREFSCREEN_LABEL_TIMEOUT")]
    label_timeout: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Campaign output directories or checkpoint files.
    #[arg(required = true)]
    campaigns: Vec<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::EvalPrefs(a) => eval_prefs(a),
        Command::BenchSynthetic(a) => bench(a),
        Command::AnalyzeInteractions(a) => interactions(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
    }
}

fn emit(output: Option<&Path>, columns: &[&str], rows: Vec<Vec<Value>>) -> Result<()> {
    let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
    let bytes = csv_bytes(&columns, rows)?;
    match output {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = CampaignConfig::from_path(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    match a.expert {
        Some(ExpertArg::Simulated) => cfg.expert_mode = ExpertMode::Simulated,
        Some(ExpertArg::Live) => cfg.expert_mode = ExpertMode::Live,
        None => {}
    }
    if let Some(dir) = a.output {
        cfg.output_dir = Some(dir);
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        cfg.resume.get_or_insert_with(|| dir.join(CHECKPOINT_FILE));
    }
    let mut campaign = Campaign::open(cfg)?;
    if campaign.config().expert_mode == ExpertMode::Simulated {
        campaign.run()?;
    } else {
        run_live(&mut campaign)?;
    }
    if let Some(m) = campaign.metric_trace().last() {
        println!(
            "iteration {} screened {} failed {} regret {} best utility {}",
            m.iteration,
            m.n_screened,
            m.n_failed,
            m.regret.map_or("n/a".into(), |r| format!("{r:.6}")),
            m.best_utility_found.map_or("n/a".into(), |r| format!("{r:.6}")),
        );
    }
    Ok(())
}

fn show(card: &PairCard) {
    println!("\npair {}", card.pair_id);
    for (side, s) in [("left ", &card.left), ("right", &card.right)] {
        let props: Vec<String> = s.properties.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        println!("  {side} {} {}  {}", s.id, s.smiles, props.join(" "));
    }
    print!("prefer [l]eft or [r]ight? ");
    let _ = std::io::stdout().flush();
}

/// Labels comparisons on the terminal.
fn run_live(campaign: &mut Campaign) -> Result<()> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    while !campaign.is_done() {
        if campaign.state().suspended {
            campaign.resume()?;
        }
        if campaign.status() != Status::AwaitingLabels {
            campaign.begin_iteration()?;
        }
        while let Some(card) = campaign.next_pair()? {
            show(&card);
            let Some(line) = lines.next() else {
                println!();
                log::info!("input closed; campaign is saved and can be resumed");
                return Ok(());
            };
            let left_wins = match line?.trim() {
                "l" | "left" => true,
                "r" | "right" => false,
                other => {
                    println!("unrecognised answer `{other}`");
                    continue;
                }
            };
            campaign.submit_label(&card.pair_id, left_wins, std::env::var("USER").ok(), None)?;
        }
        campaign.acquire()?;
    }
    Ok(())
}

fn benchmark_kind(name: &str) -> Result<BenchmarkKind> {
    BenchmarkKind::ALL
        .into_iter()
        .find(|k| k.name() == name.trim().to_ascii_lowercase())
        .with_context(|| format!("unknown benchmark `{name}`"))
}

fn eval_prefs(a: EvalPrefsArgs) -> Result<()> {
    let mut opts = PreferenceBenchOptions {
        dimension: a.dimension,
        pool: a.pool,
        pairs: a.pairs,
        folds: a.folds,
        split: a.split,
        label_noise: a.label_noise,
        seed: a.seed,
        ..Default::default()
    };
    if let Some(names) = a.functions {
        opts.functions = names.iter().map(|n| benchmark_kind(n)).collect::<Result<_>>()?;
    }
    let rows = preference_benchmark(&opts)?;
    emit(
        a.output.as_deref(),
        &[
            "function",
            "dimension",
            "accuracy_mean",
            "accuracy_std",
            "auc_mean",
            "auc_std",
            "seconds",
        ],
        rows.iter()
            .map(|r| {
                vec![
                    r.function.name().into(),
                    r.dimension.into(),
                    r.eval.accuracy.mean.into(),
                    r.eval.accuracy.std.into(),
                    r.eval.roc_auc.mean.into(),
                    r.eval.roc_auc.std.into(),
                    r.seconds.into(),
                ]
            })
            .collect(),
    )
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut opts = SweepOptions::standard();
    if let Some(path) = &a.config {
        opts.base = CampaignConfig::from_path(path)?;
    }
    opts.base.expert_mode = ExpertMode::Simulated;
    opts.base.library = LibrarySource::Synthetic {
        n: a.library_size,
        seed: a.library_seed,
        table: None,
    };
    opts.seeds = (0..a.seeds).collect();
    if let Some(kinds) = a.kinds {
        opts.kinds = kinds
            .iter()
            .map(|k| k.trim().parse::<AcquisitionKind>())
            .collect::<prefscreen_core::Result<_>>()?;
    }
    let runs = synthetic_sweep(&opts, |r| {
        let last = r.final_record();
        log::info!(
            "{} seed {}: regret {:?} accuracy {:?} ({:.1}s)",
            r.kind.name(),
            r.seed,
            last.and_then(|m| m.regret),
            last.and_then(|m| m.top_k_accuracy.first().copied().flatten()),
            r.seconds
        );
    })?;
    let k = opts.base.accuracy_k.first().copied().unwrap_or(0);
    let traces: Vec<Vec<Value>> = runs
        .iter()
        .flat_map(|r| {
            r.trace.iter().map(move |m| {
                vec![
                    r.kind.name().into(),
                    r.seed.into(),
                    m.iteration.into(),
                    m.n_screened.into(),
                    opt(m.regret),
                    opt(m.top_k_accuracy.first().copied().flatten()),
                ]
            })
        })
        .collect();
    let summary: Vec<Vec<Value>> = summarize_sweep(&runs)
        .iter()
        .map(|s| {
            vec![
                s.kind.name().into(),
                s.final_regret.mean.into(),
                s.final_regret.std.into(),
                s.final_accuracy.mean.into(),
                s.final_accuracy.std.into(),
                s.all_nonincreasing.into(),
            ]
        })
        .collect();
    let acc = format!("accuracy@{k}");
    let summary_cols = [
        "kind",
        "final_regret_mean",
        "final_regret_std",
        &format!("final_{acc}_mean"),
        &format!("final_{acc}_std"),
        "regret_nonincreasing",
    ];
    let trace_cols = ["kind", "seed", "iteration", "n_screened", "regret", acc.as_str()];
    match a.output {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            emit(Some(&dir.join("traces.csv")), &trace_cols, traces)?;
            emit(Some(&dir.join("summary.csv")), &summary_cols, summary)
        }
        None => emit(None, &summary_cols, summary),
    }
}

fn interactions(a: InteractionArgs) -> Result<()> {
    let pairs: Vec<Comparison> = match &a.log {
        Some(path) => read_preference_log(path)?.iter().map(|r| r.datum()).collect(),
        None => synthetic_interaction_pairs(a.pairs, a.seed),
    };
    if pairs.is_empty() {
        bail!("no comparisons to analyse");
    }
    let rows = interaction_study(
        &pairs,
        &InteractionOptions {
            max_order: a.max_order,
            folds: a.folds,
            split: a.split,
            seed: a.seed,
            include_squares: a.include_squares,
        },
    )?;
    emit(
        a.output.as_deref(),
        &["order", "accuracy_mean", "accuracy_std", "auc_mean", "auc_std"],
        rows.iter()
            .map(|r| {
                vec![
                    r.order.into(),
                    r.eval.accuracy.mean.into(),
                    r.eval.accuracy.std.into(),
                    r.eval.roc_auc.mean.into(),
                    r.eval.roc_auc.std.into(),
                ]
            })
            .collect(),
    )
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::new(a.data_dir);
    cfg.depiction_template = a.depiction_template;
    cfg.ui_dir = a.ui_dir;
    cfg.label_timeout = a.label_timeout.map(Duration::from_secs);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(prefscreen_service::serve(cfg, a.bind))?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &a.campaigns {
        let file = if path.is_dir() {
            path.join(CHECKPOINT_FILE)
        } else {
            path.clone()
        };
        let cp = load_checkpoint(&file)?;
        let name = path
            .file_name()
            .map_or_else(|| file.display().to_string(), |n| n.to_string_lossy().into_owned());
        let ks = &cp.config.accuracy_k;
        for m in &cp.state.metric_trace {
            let mut push = |metric: String, v: Option<f64>| {
                rows.push(vec![
                    name.clone().into(),
                    cp.config.acquisition.kind.name().into(),
                    cp.config.seed.into(),
                    m.iteration.into(),
                    m.n_screened.into(),
                    metric.into(),
                    opt(v),
                ]);
            };
            push("regret".into(), m.regret);
            push("best_utility".into(), m.best_utility_found);
            for (k, v) in ks.iter().zip(&m.top_k_accuracy) {
                push(format!("accuracy@{k}"), *v);
            }
        }
    }
    emit(
        a.output.as_deref(),
        &["campaign", "kind", "seed", "iteration", "n_screened", "metric", "value"],
        rows,
    )
}
