use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use knowloop::workflow::SystemClock;
use knowloop_gateway::cli::{run, Cli, Command};
use knowloop_gateway::store::Store;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Serve { addr } = cli.command {
        tracing_subscriber::fmt().with_writer(std::io::stderr).init();
        let result = Store::open(&cli.data, Arc::new(SystemClock))
            .map_err(anyhow::Error::from)
            .and_then(|store| {
                tokio::runtime::Runtime::new()?.block_on(knowloop_gateway::serve(
                    store,
                    knowloop_gateway::default_generator(),
                    addr,
                    async {
                        let _ = tokio::signal::ctrl_c().await;
                    },
                ))
            });
        return match result {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("knowloop: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("knowloop: {}", f.message.replace('\n', " "));
            ExitCode::from(f.exit)
        }
    }
}
