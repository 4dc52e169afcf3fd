//! Thin async client for the service's HTTP endpoints.
//!
//! Verification calls return the report for both 200 and 422 answers, so a
//! negative verdict is a value and not an error.

use credbench_core::vcred::PresentationReport;
use credbench_service::ops::{
    CertVerifyRequest, CertVerifyResponse, TokenIssueRequest, TokenIssueResponse, TokenVerifyRequest, TokenVerifyResponse,
    VcVerifyRequest,
};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` like `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B, verdict: bool) -> Result<T, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        let status = resp.status();
        if status.is_success() || (verdict && status == StatusCode::UNPROCESSABLE_ENTITY) {
            return Ok(resp.json().await?);
        }
        Err(ClientError::Status { status: status.as_u16(), body: resp.text().await.unwrap_or_default() })
    }

    pub async fn health(&self) -> Result<String, ClientError> {
        let resp = self.http.get(format!("{}/healthz", self.base)).send().await?;
        let status = resp.status();
        let body = resp.text().await?;
        if status.is_success() {
            Ok(body)
        } else {
            Err(ClientError::Status { status: status.as_u16(), body })
        }
    }

    pub async fn issue_token(&self, req: &TokenIssueRequest) -> Result<TokenIssueResponse, ClientError> {
        self.post("/token", req, false).await
    }

    pub async fn verify_token(&self, req: &TokenVerifyRequest) -> Result<TokenVerifyResponse, ClientError> {
        self.post("/token/verify", req, true).await
    }

    pub async fn verify_presentation(&self, req: &VcVerifyRequest) -> Result<PresentationReport, ClientError> {
        self.post("/vc/verify", req, true).await
    }

    pub async fn verify_certificate(&self, req: &CertVerifyRequest) -> Result<CertVerifyResponse, ClientError> {
        self.post("/cert/verify", req, true).await
    }
}
