use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand};
use missingpath_core::collection::{ingest, slug, Collection, IngestSpec};
use missingpath_core::gateway;
use missingpath_core::projection::JobControl;
use missingpath_core::selection::SelectionQuery;
use missingpath_server::api::endpoint_config;
use missingpath_server::{router, AppState};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "missingpath", version, about = "Missing-path analysis of knowledge-graph collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvests a collection and computes its map.
    Ingest {
        /// SPARQL endpoint URL or N-Triples fixture file.
        #[arg(long, env = "MISSINGPATH_ENDPOINT")]
        endpoint: String,
        /// Class whose instances form the collection.
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Data directory; the collection is written to `<out>/<id>`.
        #[arg(long, env = "MISSINGPATH_DATA")]
        out: PathBuf,
        #[arg(long)]
        id: Option<String>,
        /// Predicate linking entities to the class.
        #[arg(long)]
        membership: Option<String>,
        #[arg(long)]
        include_membership_path: bool,
        /// Maximum rows the endpoint returns per query.
        #[arg(long)]
        quota: Option<usize>,
    },
    /// Serves the HTTP API.
    Serve {
        #[arg(long, env = "MISSINGPATH_DATA")]
        data: PathBuf,
        #[arg(long, env = "MISSINGPATH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Allowed browser origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
        /// Source used when a collection request names none.
        #[arg(long, env = "MISSINGPATH_ENDPOINT")]
        endpoint: Option<String>,
    },
    /// Exports the selection described by a JSON query file.
    Export {
        #[arg(long, env = "MISSINGPATH_DATA")]
        data: PathBuf,
        #[arg(long)]
        collection: String,
        #[arg(long)]
        query: PathBuf,
        /// Zip file or directory to write into; the current directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    match Cli::parse().command {
        Command::Ingest { endpoint, class, depth, out, id, membership, include_membership_path, quota } => {
            let mut spec = IngestSpec::new(class, endpoint, depth);
            if let Some(m) = membership {
                spec.membership_predicate = m;
            }
            spec.include_membership_path = include_membership_path;
            spec.quota = quota;
            spec.validate()?;
            let id = id.unwrap_or_else(|| slug(&spec.class_uri));
            let dir = out.join(&id);
            let endpoint = gateway::open(&endpoint_config(&spec))?;
            let d = ingest(&dir, &id, &spec, endpoint.as_ref(), &JobControl::new())?;
            println!("{}: {} entities, {} paths in {}", d.collection_id, d.entity_count, d.path_count, dir.display());
        }
        Command::Serve { data, port, host, cors_origin, endpoint } => {
            let state = Arc::new(AppState::open(&data, endpoint)?);
            let app = router(state, cors_origin.as_deref());
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid host or port")?;
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!(%addr, "listening");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
        Command::Export { data, collection, query, out, lang } => {
            let c = Collection::open(data.join(&collection))?;
            let text = std::fs::read_to_string(&query).with_context(|| format!("reading {}", query.display()))?;
            let q: SelectionQuery = serde_json::from_str(&text).context("parsing the query file")?;
            let sel = c.resolve(&q)?;
            let bundle = c.export(&sel, lang.as_deref(), Utc::now())?;
            let target = match out {
                Some(p) if p.is_dir() => p.join(bundle.zip_name()),
                Some(p) if p.extension().is_some_and(|e| e == "zip") => p,
                Some(p) => bail!("{} is neither a directory nor a .zip file", p.display()),
                None => PathBuf::from(bundle.zip_name()),
            };
            std::fs::write(&target, bundle.to_zip()?)?;
            println!("{} entities exported to {}", sel.entity_ids.len(), target.display());
        }
    }
    Ok(())
}
