//! Client for the session service.

pub mod api;

use api::{ApiError, CreateSession, MoveLog, MoveRequest, SessionView};
use shadowgame_core::geometry::Cell;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("server returned {status}: {message}")]
    Api { status: u16, message: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn create_session(&self, req: &CreateSession) -> Result<SessionView> {
        let resp = self
            .http
            .post(format!("{}/sessions", self.base))
            .json(req)
            .send()
            .await?;
        decode(resp).await
    }

    pub async fn get_session(&self, id: &str) -> Result<SessionView> {
        let resp = self.http.get(format!("{}/sessions/{id}", self.base)).send().await?;
        decode(resp).await
    }

    pub async fn submit_move(&self, id: &str, evaders: Vec<Cell>) -> Result<SessionView> {
        let resp = self
            .http
            .post(format!("{}/sessions/{id}/moves", self.base))
            .json(&MoveRequest { evaders })
            .send()
            .await?;
        decode(resp).await
    }

    pub async fn move_log(&self, id: &str) -> Result<MoveLog> {
        let resp = self.http.get(format!("{}/sessions/{id}/log", self.base)).send().await?;
        decode(resp).await
    }

    /// WebSocket URL for live updates of a session.
    pub fn stream_url(&self, id: &str) -> String {
        let ws = if let Some(rest) = self.base.strip_prefix("https://") {
            format!("wss://{rest}")
        } else if let Some(rest) = self.base.strip_prefix("http://") {
            format!("ws://{rest}")
        } else {
            self.base.clone()
        };
        format!("{ws}/sessions/{id}/stream")
    }
}

async fn decode<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp.json().await?);
    }
    let text = resp.text().await?;
    let message = serde_json::from_str::<ApiError>(&text).map(|e| e.error).unwrap_or(text);
    Err(ClientError::Api {
        status: status.as_u16(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_urls() {
        assert_eq!(Client::new("http://a:1/").stream_url("x"), "ws://a:1/sessions/x/stream");
        assert_eq!(Client::new("https://b").stream_url("y"), "wss://b/sessions/y/stream");
    }
}
