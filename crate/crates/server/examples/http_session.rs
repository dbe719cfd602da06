//! One participant's GSP session over HTTP against a server on a local port:
//! create an experiment, claim trials, fetch a stimulus and answer.

use std::sync::Arc;

use robovoice_server::{router, Store};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let app = router(Arc::new(Store::in_memory()));
    tokio::spawn(async move { axum::serve(listener, app).await });
    let http = reqwest::Client::new();

    let manifest = json!({
        "kind": "gsp",
        "stimuli": [{"id": "robot-1"}, {"id": "robot-2"}],
        "gsp": {"raters_per_node": 1, "max_iterations": 2},
    });
    let created: Value = http.post(format!("{base}/v1/experiments")).json(&manifest).send().await?.json().await?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    println!("created {id}");

    loop {
        let r = http.get(format!("{base}/v1/experiments/{id}/next-trial?participant=demo")).send().await?;
        if r.status() != 200 {
            println!("next-trial -> {}", r.status());
            break;
        }
        let t: Value = r.json().await?;
        let wav = http.get(format!("{base}{}", t["audio"][8].as_str().unwrap_or_default())).send().await?.bytes().await?;
        println!(
            "{} stimulus {} slider {} ({} bytes of audio at detent 8)",
            t["trial_id"], t["stimulus"]["id"], t["slider"]["index"], wav.len()
        );
        let out: Value = http
            .post(format!("{base}/v1/trials/{}/response", t["trial_id"].as_str().unwrap_or_default()))
            .json(&json!({"position": 8}))
            .send()
            .await?
            .json()
            .await?;
        println!("  -> {out}");
    }
    let exp: Value = http.get(format!("{base}/v1/experiments/{id}")).send().await?.json().await?;
    println!("{}", serde_json::to_string_pretty(&exp)?);
    Ok(())
}
