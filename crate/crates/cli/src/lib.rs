//! Operator entry points. `replay` and `scan` run in-process unless `--server` names a
//! running service, in which case they go through its operator API.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};

use forgebot_client::{Client, ClientError};
use forgebot_core::api::ScanReport;
use forgebot_core::{BotConfig, ForgeGateway};
use forgebot_http::{HttpConfig, HttpGateway};
use forgebot_server::{ops, Service, DEFAULT_QUEUE_CAPACITY};
use forgebot_sim::{default_epoch, replay_script, ScriptError};

pub const GITHUB_TOKEN_VAR: &str = "BOT_GITHUB_TOKEN";
pub const GITLAB_TOKEN_VAR: &str = "BOT_GITLAB_TOKEN";
pub const WEBHOOK_SECRET_VAR: &str = "BOT_WEBHOOK_SECRET";

pub const EXIT_OK: i32 = 0;
pub const EXIT_STARTUP: i32 = 1;
pub const EXIT_FIXTURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "forgebot", version, about = "Pull-request lifecycle bot for GitHub with GitLab CI")]
pub struct Cli {
    /// Bot configuration file.
    #[arg(long, global = true, env = "BOT_CONFIG", default_value = "bot.toml")]
    pub config: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the webhook server, dispatch loop and daily scheduler.
    Serve {
        /// Overrides the configured port.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
    },
    /// Run an event script against a fresh simulator and print the action log.
    Replay {
        file: PathBuf,
        /// Simulator clock start (RFC 3339).
        #[arg(long)]
        epoch: Option<DateTime<Utc>>,
        /// Replay on a running service instead of in-process.
        #[arg(long)]
        server: Option<String>,
    },
    /// Run one stale scan of every configured repository.
    Scan {
        /// Print intended actions without sending them.
        #[arg(long)]
        dry_run: bool,
        /// Clock override (RFC 3339).
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        /// Scan a simulator seeded by this event script instead of the real forges.
        #[arg(long, conflicts_with = "server")]
        fixture: Option<PathBuf>,
        /// Ask a running service to scan.
        #[arg(long)]
        server: Option<String>,
    },
}

/// Values of the named variables, or the names of all that are missing or empty.
pub fn required_env(names: &[&'static str], lookup: impl Fn(&str) -> Option<String>) -> Result<Vec<String>, Vec<&'static str>> {
    let values: Vec<(&'static str, Option<String>)> =
        names.iter().map(|n| (*n, lookup(n).filter(|v| !v.is_empty()))).collect();
    let missing: Vec<&'static str> = values.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
    if missing.is_empty() {
        Ok(values.into_iter().filter_map(|(_, v)| v).collect())
    } else {
        Err(missing)
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok()
}

fn load_config(path: &Path, err: &mut (dyn Write + Send)) -> Option<Arc<BotConfig>> {
    match BotConfig::load(path) {
        Ok(c) => Some(Arc::new(c)),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            None
        }
    }
}

fn fixture_error(err: &mut (dyn Write + Send), path: &Path, e: &ScriptError) -> i32 {
    let _ = writeln!(err, "error: {}: {e}", path.display());
    EXIT_FIXTURE
}

fn client_error(err: &mut (dyn Write + Send), e: &ClientError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    match e {
        ClientError::Api { body, .. } if body.line.is_some() => EXIT_FIXTURE,
        _ => EXIT_STARTUP,
    }
}

/// Gateway configuration from the environment. Endpoint overrides are optional.
pub fn http_config(config: &BotConfig, lookup: impl Fn(&str) -> Option<String>) -> Result<HttpConfig, Vec<&'static str>> {
    let tokens = required_env(&[GITHUB_TOKEN_VAR, GITLAB_TOKEN_VAR], &lookup)?;
    let mut http = HttpConfig::new(&config.bot_name, &tokens[0], &tokens[1]);
    if let Some(url) = lookup("BOT_GITHUB_API") {
        http.github_api = url;
    }
    if let Some(url) = lookup("BOT_GITLAB_API") {
        http.gitlab_api = url;
    }
    http.ci_repos = config.repos.values().map(|rc| rc.mirror.ci_repo.clone()).collect();
    Ok(http)
}

fn print_scan(out: &mut (dyn Write + Send), report: &ScanReport) {
    let mode = if report.dry_run { "dry run, nothing sent" } else { "executed" };
    let _ = writeln!(out, "# scan at {} ({mode}): {} action(s)", report.now.to_rfc3339(), report.actions.len());
    for a in &report.actions {
        let _ = writeln!(out, "{}", a.kind);
    }
}

pub async fn run(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    run_with_env(cli, out, err, env).await
}

pub async fn run_with_env(
    cli: Cli,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
    lookup: impl Fn(&str) -> Option<String>,
) -> i32 {
    match cli.command {
        Command::Serve { port, bind } => {
            let Some(config) = load_config(&cli.config, err) else {
                return EXIT_STARTUP;
            };
            let secret = required_env(&[WEBHOOK_SECRET_VAR], &lookup);
            let http = http_config(&config, &lookup);
            let (secret, http) = match (secret, http) {
                (Ok(s), Ok(h)) => (s.into_iter().next().unwrap_or_default(), h),
                (s, h) => {
                    let mut missing = h.err().unwrap_or_default();
                    missing.extend(s.err().unwrap_or_default());
                    let _ = writeln!(err, "error: missing environment variables: {}", missing.join(", "));
                    return EXIT_STARTUP;
                }
            };
            let gateway: Arc<dyn ForgeGateway> = Arc::new(HttpGateway::new(http));
            let addr = format!("{bind}:{}", port.unwrap_or(config.server_port));
            let listener = match tokio::net::TcpListener::bind(&addr).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot listen on {addr}: {e}");
                    return EXIT_STARTUP;
                }
            };
            tracing::info!(%addr, repos = config.repos.len(), "serving");
            let service = Arc::new(Service::new(config, gateway, secret.into_bytes()));
            match forgebot_server::serve(service, listener, DEFAULT_QUEUE_CAPACITY).await {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: server stopped: {e}");
                    EXIT_STARTUP
                }
            }
        }
        Command::Replay { file, epoch, server } => {
            let script = match std::fs::read_to_string(&file) {
                Ok(s) => s,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", file.display());
                    return EXIT_FIXTURE;
                }
            };
            if let Some(url) = server {
                let client = match Client::new(&url, lookup(WEBHOOK_SECRET_VAR)) {
                    Ok(c) => c,
                    Err(e) => return client_error(err, &e),
                };
                return match client.replay(&script, epoch).await {
                    Ok(report) => {
                        let _ = write!(out, "{}", report.log);
                        EXIT_OK
                    }
                    Err(e) => client_error(err, &e),
                };
            }
            let Some(config) = load_config(&cli.config, err) else {
                return EXIT_STARTUP;
            };
            match ops::replay(config, &script, epoch.unwrap_or_else(default_epoch)).await {
                Ok(report) => {
                    let _ = write!(out, "{}", report.log);
                    EXIT_OK
                }
                Err(e) => fixture_error(err, &file, &e),
            }
        }
        Command::Scan {
            dry_run,
            now,
            fixture,
            server,
        } => {
            if let Some(url) = server {
                let client = match Client::new(&url, lookup(WEBHOOK_SECRET_VAR)) {
                    Ok(c) => c,
                    Err(e) => return client_error(err, &e),
                };
                return match client.scan(now, dry_run).await {
                    Ok(report) => {
                        print_scan(out, &report);
                        scan_exit(err, &report)
                    }
                    Err(e) => client_error(err, &e),
                };
            }
            let Some(config) = load_config(&cli.config, err) else {
                return EXIT_STARTUP;
            };
            let (gateway, default_now): (Arc<dyn ForgeGateway>, DateTime<Utc>) = match fixture {
                Some(path) => {
                    let script = match std::fs::read_to_string(&path) {
                        Ok(s) => s,
                        Err(e) => {
                            let _ = writeln!(err, "error: {}: {e}", path.display());
                            return EXIT_FIXTURE;
                        }
                    };
                    match replay_script(config.clone(), &script, default_epoch()).await {
                        Ok(runner) => {
                            let forge = runner.forge().clone();
                            let now = forge.now();
                            (forge, now)
                        }
                        Err(e) => return fixture_error(err, &path, &e),
                    }
                }
                None => match http_config(&config, &lookup) {
                    Ok(http) => (Arc::new(HttpGateway::new(http)), Utc::now()),
                    Err(missing) => {
                        let _ = writeln!(err, "error: missing environment variables: {}", missing.join(", "));
                        return EXIT_STARTUP;
                    }
                },
            };
            let report = ops::scan(config, gateway, now.unwrap_or(default_now), dry_run).await;
            print_scan(out, &report);
            scan_exit(err, &report)
        }
    }
}

fn scan_exit(err: &mut (dyn Write + Send), report: &ScanReport) -> i32 {
    for e in &report.errors {
        let _ = writeln!(err, "warning: {e}");
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_variables_are_all_named() {
        let lookup = |n: &str| (n == GITLAB_TOKEN_VAR).then(|| "x".to_string());
        assert_eq!(
            required_env(&[GITHUB_TOKEN_VAR, GITLAB_TOKEN_VAR, WEBHOOK_SECRET_VAR], lookup),
            Err(vec![GITHUB_TOKEN_VAR, WEBHOOK_SECRET_VAR])
        );
        let empty = |_: &str| Some(String::new());
        assert_eq!(required_env(&[GITHUB_TOKEN_VAR], empty), Err(vec![GITHUB_TOKEN_VAR]));
        assert_eq!(required_env(&[GITHUB_TOKEN_VAR], |_| Some("t".into())), Ok(vec!["t".to_string()]));
    }

    #[test]
    fn global_config_flag_and_scan_options() {
        let cli = Cli::try_parse_from(["forgebot", "scan", "--dry-run", "--now", "2026-04-02T09:00:00Z", "--config", "x.toml"]).unwrap();
        assert_eq!(cli.config, PathBuf::from("x.toml"));
        match cli.command {
            Command::Scan { dry_run, now, .. } => {
                assert!(dry_run);
                assert_eq!(now.unwrap().to_rfc3339(), "2026-04-02T09:00:00+00:00");
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["forgebot", "scan", "--fixture", "f", "--server", "http://x"]).is_err());
    }
}
