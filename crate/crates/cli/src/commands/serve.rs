use std::path::Path;

use hapticnav_gateway::{Gateway, GatewayConfig};

use crate::{CliError, CliResult};

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

pub fn run(port: Option<u16>, config_path: Option<&Path>) -> CliResult {
    let mut cfg = match config_path {
        Some(p) => GatewayConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => GatewayConfig::default(),
    };
    if let Some(port) = port {
        cfg.bind.set_port(port);
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let gw = Gateway::bind(cfg).await.map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("listening on ws://{}/session", gw.local_addr());
        gw.run_until(shutdown_signal()).await.map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("stopped");
        Ok(())
    })
}
