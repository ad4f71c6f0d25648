//! The operational shell: configuration, file persistence and the HTTP API.

mod api;
mod config;
mod store;
mod view;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

pub use api::{
    parse_state, router, ApiOptions, ChatRequest, DecisionRequest, DecisionResponse, Problem, SubmitResponse, OPENAPI,
    REVIEWER_HEADER,
};
pub use config::{BackendMode, ConfigError, RemoteConfig, ServiceConfig};
pub use store::FileCaseStore;
pub use view::{CaseSummary, CaseView, CritiqueView, DraftView, FactView, FlagView, OutcomeView};

use crate::agent::{AgentGateway, Backend, FixtureBackend, RemoteBackend};
use crate::governance::{AuditLedger, LedgerError};
use crate::knowledge::{fixture_registry, RetrievalError, RetrievalStore, ToolError};
use crate::workflow::{Engine, EngineError, PipelineConfig, PipelineContext};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("guideline corpus: {0}")]
    Corpus(#[from] RetrievalError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> ServiceError {
    let context = context.into();
    move |source| ServiceError::Io { context, source }
}

impl ServiceConfig {
    pub fn ledger_path(&self) -> PathBuf {
        self.data_dir.join("ledger.jsonl")
    }

    pub fn cases_dir(&self) -> PathBuf {
        self.data_dir.join("cases")
    }

    pub fn api_options(&self) -> ApiOptions {
        ApiOptions {
            escalated_first: self.escalated_first,
            pricing: self.pricing,
        }
    }
}

/// Opens the ledger and case files under `data_dir` and wires the pipeline.
/// Cases persisted by an earlier run are reloaded.
pub fn build_engine(config: &ServiceConfig) -> Result<Engine, ServiceError> {
    config.validate()?;
    std::fs::create_dir_all(&config.data_dir).map_err(io_err(format!("create {}", config.data_dir.display())))?;
    let ledger = Arc::new(AuditLedger::open(config.ledger_path(), config.durability)?);
    let store = Arc::new(match &config.corpus_path {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(io_err(format!("read {}", path.display())))?;
            RetrievalStore::from_json(&raw)?
        }
        None => RetrievalStore::default_corpus(),
    });
    let tools = Arc::new(fixture_registry(store.clone(), &ledger)?);
    let backend: Arc<dyn Backend> = match config.backend {
        BackendMode::Scripted => Arc::new(match &config.scenario_dir {
            Some(dir) => FixtureBackend::load_dir(dir).map_err(io_err(format!("load scenarios {}", dir.display())))?,
            None => FixtureBackend::bundled(),
        }),
        BackendMode::Remote => {
            let remote = config.remote.as_ref().ok_or_else(|| {
                ConfigError::Invalid("remote backend requires remote.endpoint".into())
            })?;
            Arc::new(RemoteBackend::new(
                &remote.endpoint,
                remote.credential_env.as_deref(),
                Duration::from_secs(remote.timeout_secs),
            ))
        }
    };
    let ctx = PipelineContext {
        gateway: AgentGateway::from_backend(backend, config.with_critic),
        tools,
        store,
        ledger,
        config: PipelineConfig {
            guards: config.guards.clone(),
            ..PipelineConfig::default()
        },
    };
    let cases = FileCaseStore::open(config.cases_dir()).map_err(io_err("open case store"))?;
    Ok(Engine::new(ctx, Arc::new(cases))?)
}

/// A server running on its own thread. Dropping it stops the server.
pub struct RunningService {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl RunningService {
    /// Binds `listen` (port 0 picks a free port) and serves `app` until
    /// stopped.
    pub fn start(app: axum::Router, listen: &str) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(listen)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("underwrite-http".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.halt()
    }

    fn halt(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        let _ = self.halt();
    }
}

/// Serves the API on `config.listen` until Ctrl-C.
pub fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let engine = Arc::new(build_engine(config)?);
    let app = router(engine, config.api_options());
    let rt = tokio::runtime::Runtime::new().map_err(io_err("start runtime"))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .map_err(io_err(format!("bind {}", config.listen)))?;
        tracing::info!(addr = %config.listen, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io_err("serve"))
    })
}
