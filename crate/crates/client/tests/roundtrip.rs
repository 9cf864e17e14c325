use std::sync::Arc;

use forgebot_client::{Client, ClientError};
use forgebot_core::BotConfig;
use forgebot_server::{serve, Service, DEFAULT_QUEUE_CAPACITY};
use forgebot_sim::{default_epoch, SimForge};

async fn start() -> String {
    let config = Arc::new(BotConfig::minimal("bot", "o/r".parse().unwrap(), "team"));
    let forge = Arc::new(SimForge::new("bot", default_epoch()));
    let service = Arc::new(Service::new(config, forge, b"s3cret".to_vec()));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(serve(service, listener, DEFAULT_QUEUE_CAPACITY));
    url
}

#[tokio::test]
async fn client_talks_to_service() {
    let url = start().await;
    let client = Client::new(&url, Some("s3cret".into())).unwrap();
    assert_eq!(client.health().await.unwrap(), "ok");
    assert_eq!(client.replay("", None).await.unwrap().log, "");
    let report = client.scan(Some(default_epoch()), true).await.unwrap();
    assert!(report.dry_run);
    assert_eq!(report.now, default_epoch());

    match client.replay("garbage", None).await {
        Err(ClientError::Api { body, .. }) => assert_eq!(body.line, Some(1)),
        other => panic!("{other:?}"),
    }
    let anonymous = Client::new(&url, None).unwrap();
    assert!(matches!(anonymous.scan(None, true).await, Err(ClientError::Api { status, .. }) if status == 401));
}
