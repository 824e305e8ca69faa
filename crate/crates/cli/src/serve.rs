use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use vivid_forge_core::perception::{http_router, serve_lines, MockBackend, PerceptionBackend};
use vivid_forge_core::qc::{serve_qc as serve, QcService, QcState};

#[derive(Args)]
pub struct ServeQcArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    manifest: PathBuf,
    /// Append-only verdict log; created when missing.
    #[arg(long)]
    verdicts: PathBuf,
    /// Static files for the review UI, served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

pub fn serve_qc(a: ServeQcArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .context("invalid --host/--port")?;
    let state = QcState::open(&a.manifest, &a.verdicts)?;
    eprintln!("reviewing {} samples on http://{addr}", state.samples().len());
    let service = Arc::new(QcService::new(state));
    tokio::runtime::Runtime::new()?.block_on(serve(addr, service, a.ui_dir))?;
    Ok(())
}

#[derive(Args)]
pub struct MockBackendArgs {
    /// Serve HTTP on this address instead of JSON lines on stdio.
    #[arg(long)]
    http: Option<SocketAddr>,
}

pub fn mock_backend(a: MockBackendArgs) -> Result<()> {
    let backend: Arc<dyn PerceptionBackend> = Arc::new(MockBackend::default());
    match a.http {
        Some(addr) => tokio::runtime::Runtime::new()?.block_on(async move {
            let listener = tokio::net::TcpListener::bind(addr).await?;
            eprintln!("mock backend on http://{}", listener.local_addr()?);
            axum::serve(listener, http_router(backend)).await
        })?,
        None => serve_lines(backend.as_ref(), std::io::stdin().lock(), std::io::stdout().lock())?,
    }
    Ok(())
}
