use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use arena::http::{router, AppState};
use arena::session::Session;
use arena_core::catalog::Catalog;
use arena_core::metrics::TipsParams;
use arena_core::planmodel::{parse_plan_list, serialize_plan};
use arena_core::planspace::{build_memo, PruneThresholds};
use arena_core::sqlfront::parse_query;
use arena_core::tips::{PipelineConfig, DEFAULT_TAU_G, DEFAULT_TAU_L};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "arena", version, about = "Explore alternative query plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate every physical plan of a query as JSON lines.
    Enumerate(EnumerateArgs),
    /// Select informative alternative plans from a plan list.
    Select(SelectArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct EnumerateArgs {
    /// File holding the SQL query.
    #[arg(long, conflicts_with = "sql", required_unless_present = "sql")]
    query: Option<PathBuf>,
    /// Query text given inline.
    #[arg(long)]
    sql: Option<String>,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write at most this many plans (ids 0..limit).
    #[arg(long)]
    limit: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Batch,
    Step,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    plans: PathBuf,
    #[arg(long)]
    qep_id: u64,
    #[arg(long, value_enum, default_value = "batch")]
    mode: Mode,
    #[arg(short, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.33)]
    alpha: f64,
    #[arg(long, default_value_t = 0.33)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    tau_d: f64,
    #[arg(long, default_value_t = 0.5)]
    tau_c: f64,
    #[arg(long, default_value_t = DEFAULT_TAU_L)]
    tau_l: usize,
    #[arg(long, default_value_t = DEFAULT_TAU_G)]
    tau_g: usize,
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Plans already viewed, QEP included (step mode).
    #[arg(long, value_delimiter = ',')]
    viewed: Vec<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Default catalog for sessions created from SQL.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_catalog(path: &PathBuf) -> Result<Catalog, String> {
    Catalog::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn enumerate(args: EnumerateArgs) -> Result<(), String> {
    let sql = match (&args.query, &args.sql) {
        (Some(p), _) => read(p)?,
        (None, Some(s)) => s.clone(),
        (None, None) => return Err("give --query or --sql".into()),
    };
    let catalog = load_catalog(&args.catalog)?;
    let query = parse_query(&sql).map_err(|e| e.to_string())?;
    let memo = build_memo(&query, &catalog).map_err(|e| e.to_string())?;
    let file = fs::File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let mut out = std::io::BufWriter::new(file);
    let mut written = 0u64;
    for plan in memo.plans(args.limit) {
        writeln!(out, "{}", serialize_plan(&plan)).map_err(|e| e.to_string())?;
        written += 1;
    }
    out.flush().map_err(|e| e.to_string())?;
    let qep = memo.qep();
    println!(
        "{}",
        json!({
            "plan_count": memo.count_plans(),
            "written": written,
            "qep_id": qep.plan_id,
            "qep_cost": qep.total_cost,
        })
    );
    Ok(())
}

fn select(args: SelectArgs) -> Result<(), String> {
    let plans = parse_plan_list(&read(&args.plans)?).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        params: TipsParams::new(args.alpha, args.beta, args.lambda).map_err(|e| e.to_string())?,
        thresholds: PruneThresholds::new(args.tau_d, args.tau_c).map_err(|e| e.to_string())?,
        tau_l: args.tau_l,
        tau_g: args.tau_g,
        sample_n: args.sample_n,
        seed: args.seed,
    };
    let mut session = Session::from_plans(plans, Some(args.qep_id), &cfg).map_err(|e| e.to_string())?;
    if !args.viewed.is_empty() {
        session = session.with_viewed(&args.viewed).map_err(|e| e.to_string())?;
    }
    let report = match args.mode {
        Mode::Batch => {
            let r = session.batch(args.k, None).map_err(|e| e.to_string())?;
            json!({
                "mode": "batch",
                "qep_id": args.qep_id,
                "selected": r.plans.iter().map(|p| p.plan_id).collect::<Vec<_>>(),
                "plans": r.plans.iter().map(|p| json!({"plan_id": p.plan_id, "metrics": p.metrics})).collect::<Vec<_>>(),
                "interestingness": r.interestingness,
                "params": r.params,
            })
        }
        Mode::Step => {
            let r = session.step().map_err(|e| e.to_string())?;
            json!({
                "mode": "step",
                "qep_id": args.qep_id,
                "viewed": r.viewed,
                "selected": [r.plan.plan_id],
                "plans": [{"plan_id": r.plan.plan_id, "metrics": r.plan.metrics}],
                "min_distance": r.min_distance,
                "params": cfg.params,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), String> {
    let catalog = args.catalog.as_ref().map(load_catalog).transpose()?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("{addr}: {e}"))?;
        eprintln!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
        axum::serve(listener, router(Arc::new(AppState::new(catalog))))
            .await
            .map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate(a) => enumerate(a),
        Command::Select(a) => select(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
