//! `credbench`: operator CLI over a workspace directory.
//!
//! Exit codes: 0 success, 1 negative result (failed verification, rejected
//! transaction), 2 usage error, 3 corrupt or unreadable workspace.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use credbench_client::{Client, ClientError};
use credbench_core::cert::CertificateId;
use credbench_core::crypto::hash;
use credbench_core::harness::{self, HarnessEnv, RegistryBackend};
use credbench_core::ledger::{ProfileKind, DEFAULT_CHANNEL};
use credbench_core::vcred::{IssuedCredential, Presentation};
use credbench_core::UnixTime;
use credbench_service::ops::{self, CertFields, SenderSpec};
use credbench_service::workspace::{ISSUER_FILE, KEYSTORE_FILE, REGISTRY_FILE};
use credbench_service::{OpsError, Workspace};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "credbench", version, about = "Capability tokens, verifiable credentials and ledger certificates side by side")]
struct Cli {
    /// Workspace directory (created if missing).
    #[arg(long, global = true, env = "CREDBENCH_WORKSPACE", default_value = ".credbench")]
    workspace: PathBuf,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Current time in epoch seconds; defaults to the system clock.
    #[arg(long, global = true)]
    now: Option<UnixTime>,
    /// Seed for all randomness: a u64 or 64 hex digits.
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<[u8; 32]>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an Ed25519 key into the keystore.
    Keygen {
        /// Keystore id; defaults to the derived key id.
        #[arg(long)]
        name: Option<String>,
    },
    #[command(subcommand)]
    Token(TokenCmd),
    #[command(subcommand)]
    Vc(VcCmd),
    #[command(subcommand)]
    Ledger(LedgerCmd),
    #[command(subcommand)]
    Cert(CertCmd),
    #[command(subcommand)]
    Bridge(BridgeCmd),
    #[command(subcommand)]
    Harness(HarnessCmd),
    /// Run the HTTP issuer/verifier over this workspace.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Subcommand, Debug)]
enum TokenCmd {
    Issue {
        #[arg(long)]
        sub: String,
        /// `read:/path` or `write:/path`; repeatable.
        #[arg(long = "scope")]
        scopes: Vec<String>,
        #[arg(long)]
        ttl: Option<u64>,
        #[arg(long)]
        aud: Option<String>,
        #[arg(long)]
        nbf: Option<UnixTime>,
        /// Also issue a refresh token.
        #[arg(long)]
        with_refresh: bool,
    },
    Verify {
        token: String,
        #[arg(long)]
        aud: Option<String>,
        #[command(flatten)]
        remote: Remote,
    },
    Refresh {
        refresh_id: String,
    },
    Revoke {
        refresh_id: String,
    },
}

#[derive(Subcommand, Debug)]
enum VcCmd {
    RegisterIssuer {
        #[arg(long)]
        issuer_id: String,
        #[arg(long)]
        key: String,
    },
    Issue {
        #[arg(long)]
        issuer_id: String,
        #[arg(long)]
        issuer_key: String,
        #[arg(long)]
        holder_key: String,
        /// `label=value`; repeatable.
        #[arg(long = "attr", value_parser = parse_pair)]
        attrs: Vec<(String, String)>,
        /// Defaults to `--now`.
        #[arg(long)]
        valid_from: Option<UnixTime>,
        /// Defaults to one year after `valid_from`.
        #[arg(long)]
        valid_until: Option<UnixTime>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Present {
        /// File written by `vc issue`.
        #[arg(long)]
        credential: PathBuf,
        #[arg(long)]
        holder_key: String,
        /// Label to reveal; repeatable.
        #[arg(long)]
        disclose: Vec<String>,
        #[arg(long)]
        challenge: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Verify {
        #[arg(long)]
        presentation: PathBuf,
        #[arg(long)]
        challenge: String,
        #[command(flatten)]
        remote: Remote,
    },
    Revoke {
        status_id: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Profile {
    Permissionless,
    Permissioned,
}

#[derive(Subcommand, Debug)]
enum LedgerCmd {
    Init {
        #[arg(long, value_enum)]
        profile: Profile,
        /// Certificate contract owner (permissionless); deployed at init.
        #[arg(long)]
        owner: Option<String>,
        /// Extra account key id (permissionless); repeatable.
        #[arg(long = "account")]
        accounts: Vec<String>,
        /// `peer` or `peer=key_id` (permissioned); repeatable.
        #[arg(long = "peer")]
        peers: Vec<String>,
        #[arg(long, default_value = DEFAULT_CHANNEL)]
        channel: String,
        /// Endorsements required on the channel.
        #[arg(long, default_value_t = 0)]
        threshold: usize,
    },
    Submit {
        #[command(flatten)]
        from: SenderArgs,
        #[arg(long)]
        contract: String,
        #[arg(long)]
        method: String,
        #[arg(long = "arg")]
        args: Vec<String>,
    },
    /// Re-verify the journal, cutting a torn final line.
    Replay,
    Root,
}

#[derive(Args, Debug)]
struct SenderArgs {
    /// Keystore id of the submitting key.
    #[arg(long)]
    sender: String,
    #[arg(long)]
    channel: Option<String>,
    /// Endorsing peer id; repeatable.
    #[arg(long = "endorser")]
    endorsers: Vec<String>,
}

impl SenderArgs {
    fn spec(&self) -> SenderSpec {
        SenderSpec { sender: self.sender.clone(), channel: self.channel.clone(), endorsers: self.endorsers.clone() }
    }
}

#[derive(Args, Debug)]
struct Fields {
    #[arg(long)]
    name: String,
    #[arg(long)]
    program: String,
    #[arg(long)]
    graduation_date: String,
    #[arg(long)]
    gpa: String,
}

impl Fields {
    fn fields(&self) -> CertFields {
        CertFields {
            name: self.name.clone(),
            program: self.program.clone(),
            graduation_date: self.graduation_date.clone(),
            gpa: self.gpa.clone(),
        }
    }
}

#[derive(Args, Debug)]
struct Remote {
    /// Verify through a running service instead of locally.
    #[arg(long)]
    remote: Option<String>,
}

#[derive(Args, Debug)]
struct ReadAs {
    /// Reading peer on a permissioned ledger.
    #[arg(long)]
    peer: Option<String>,
    #[arg(long)]
    channel: Option<String>,
}

#[derive(Subcommand, Debug)]
enum CertCmd {
    Issue {
        #[command(flatten)]
        from: SenderArgs,
        #[command(flatten)]
        fields: Fields,
        #[arg(long)]
        subject: Option<String>,
        /// Also store the sender's signature over the certificate digest.
        #[arg(long)]
        attest: bool,
    },
    Verify {
        #[arg(long)]
        id: String,
        #[command(flatten)]
        fields: Fields,
        #[command(flatten)]
        read_as: ReadAs,
        #[command(flatten)]
        remote: Remote,
    },
    Revoke {
        #[command(flatten)]
        from: SenderArgs,
        #[arg(long)]
        id: String,
    },
}

#[derive(Subcommand, Debug)]
enum BridgeCmd {
    Issue {
        #[command(flatten)]
        from: SenderArgs,
        #[command(flatten)]
        fields: Fields,
        #[arg(long)]
        issuer_id: String,
        /// JWT signing key; defaults to the sender.
        #[arg(long)]
        issuer_key: Option<String>,
    },
    Verify {
        jwt: String,
        #[command(flatten)]
        read_as: ReadAs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Backend {
    Memory,
    Ledger,
}

#[derive(Subcommand, Debug)]
enum HarnessCmd {
    /// Run every scenario and write matrix.json and matrix.txt.
    Run {
        /// Output directory; defaults to the workspace.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "memory")]
        registry: Backend,
    },
}

fn parse_seed(s: &str) -> Result<[u8; 32], String> {
    if s.len() == 64 {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|e| e.to_string())?;
        return Ok(out);
    }
    let n: u64 = s.parse().map_err(|_| "expected a u64 or 64 hex digits".to_string())?;
    let mut out = [0u8; 32];
    out[24..].copy_from_slice(&n.to_be_bytes());
    Ok(out)
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| format!("expected label=value, got {s:?}"))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<OpsError> for Failure {
    fn from(e: OpsError) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match &e {
            ClientError::Status { status: 400, .. } => 2,
            ClientError::Status { status: 422, .. } => 1,
            ClientError::Status { .. } => 3,
            ClientError::Http(_) => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<u8, Failure>;

struct Ctx {
    json: bool,
    now: Option<UnixTime>,
    seed: Option<[u8; 32]>,
}

impl Ctx {
    fn now(&self) -> UnixTime {
        self.now.unwrap_or_else(credbench_service::system_now)
    }

    /// Seed for one command: random, or derived from `--seed` and the
    /// current contents of the state file the command extends, so repeated
    /// seeded runs stay reproducible without repeating themselves.
    fn seed(&self, ws: &Workspace, state_file: &str) -> [u8; 32] {
        match self.seed {
            Some(seed) => {
                let state = fs::read(ws.path(state_file)).unwrap_or_default();
                *hash(&[&seed[..], state_file.as_bytes(), &hash(&state).as_bytes()[..]].concat()).as_bytes()
            }
            None => rand::random(),
        }
    }

    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) {
        let text = if self.json { serde_json::to_string(value).expect("output serializes") } else { human() };
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{}", text.trim_end_matches('\n'));
    }

    /// Prints a verification verdict; exit 1 when negative.
    fn verdict<T: Serialize>(&self, value: &T, valid: bool, reasons: &[String], extra: impl FnOnce() -> String) -> u8 {
        self.emit(value, || {
            if valid {
                let more = extra();
                if more.is_empty() {
                    "valid".to_string()
                } else {
                    format!("valid\n{more}")
                }
            } else {
                format!("invalid: {}", reasons.join(", "))
            }
        });
        u8::from(!valid)
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure { code: 3, message: format!("runtime: {e}") })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_or_print(ctx: &Ctx, out: &Option<PathBuf>, json: String, summary: String) -> Outcome {
    match out {
        Some(path) => {
            fs::write(path, format!("{json}\n")).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            ctx.emit(&serde_json::json!({ "written": path }), || summary);
        }
        None => println!("{json}"),
    }
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    let ctx = Ctx { json: cli.json, now: cli.now, seed: cli.seed };
    let ws = Workspace::open(&cli.workspace).map_err(OpsError::from)?;
    match cli.command {
        Command::Keygen { name } => {
            let out = ops::keygen_op(&ws, name.as_deref(), ctx.seed(&ws, KEYSTORE_FILE))?;
            ctx.emit(&out, || format!("{} {}", out.key_id, out.public_key.to_b64url()));
            Ok(0)
        }
        Command::Token(cmd) => token(&ctx, &ws, cmd),
        Command::Vc(cmd) => vc(&ctx, &ws, cmd),
        Command::Ledger(cmd) => ledger(&ctx, &ws, cmd),
        Command::Cert(cmd) => cert(&ctx, &ws, cmd),
        Command::Bridge(cmd) => bridge(&ctx, &ws, cmd),
        Command::Harness(HarnessCmd::Run { out, registry }) => {
            let env = HarnessEnv::new(cli.seed.unwrap_or(harness::DEFAULT_SEED), cli.now.unwrap_or(harness::DEFAULT_NOW));
            let backend = match registry {
                Backend::Memory => RegistryBackend::Memory,
                Backend::Ledger => RegistryBackend::Ledger,
            };
            let matrix = harness::run_matrix(&env.with_registry(backend.factory()))
                .map_err(|e| Failure { code: 3, message: e.to_string() })?;
            let dir = out.unwrap_or_else(|| ws.root().to_path_buf());
            fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            let text = matrix.to_text();
            for (file, body) in [("matrix.json", matrix.to_json()), ("matrix.txt", text.clone())] {
                fs::write(dir.join(file), body).map_err(|e| usage(format!("{file}: {e}")))?;
            }
            let summary = serde_json::json!({
                "matched": matrix.matched(),
                "cells": matrix.cells.len(),
                "all_match": matrix.all_match(),
                "matrix_json": dir.join("matrix.json"),
            });
            ctx.emit(&summary, || text);
            Ok(u8::from(!matrix.all_match()))
        }
        Command::Serve { addr } => {
            eprintln!("serving {} on http://{addr}", ws.root().display());
            runtime()?.block_on(credbench_service::server::serve(addr, ws)).map_err(|e| usage(format!("{addr}: {e}")))?;
            Ok(0)
        }
    }
}

fn token(ctx: &Ctx, ws: &Workspace, cmd: TokenCmd) -> Outcome {
    match cmd {
        TokenCmd::Issue { sub, scopes, ttl, aud, nbf, with_refresh } => {
            let req = ops::TokenIssueRequest { sub, scopes, ttl, aud, nbf, refresh: with_refresh, now: None };
            let out = ops::token_issue(ws, &req, ctx.seed(ws, ISSUER_FILE), ctx.now())?;
            ctx.emit(&out, || match &out.refresh_token {
                Some(rt) => format!("{}\nrefresh {}", out.token, rt.id),
                None => out.token.to_string(),
            });
            Ok(0)
        }
        TokenCmd::Verify { token, aud, remote } => {
            let req = ops::TokenVerifyRequest { token, aud, now: Some(ctx.now()) };
            let out = match remote.remote {
                Some(url) => runtime()?.block_on(Client::new(url).verify_token(&req))?,
                None => ops::token_verify(ws, &req, ctx.now())?,
            };
            Ok(ctx.verdict(&out, out.valid, &out.reasons, || {
                out.claims.as_ref().map(|c| format!("sub {}\nscope {}\nexp {}", c.sub, c.scope, c.exp)).unwrap_or_default()
            }))
        }
        TokenCmd::Refresh { refresh_id } => {
            let out = ops::token_refresh(ws, &refresh_id, ctx.seed(ws, ISSUER_FILE), ctx.now())?;
            ctx.emit(&out, || out.token.to_string());
            Ok(0)
        }
        TokenCmd::Revoke { refresh_id } => {
            ops::token_revoke(ws, &refresh_id)?;
            ctx.emit(&serde_json::json!({ "revoked": refresh_id }), || format!("revoked {refresh_id}"));
            Ok(0)
        }
    }
}

fn vc(ctx: &Ctx, ws: &Workspace, cmd: VcCmd) -> Outcome {
    match cmd {
        VcCmd::RegisterIssuer { issuer_id, key } => {
            let pk = ops::vc_register_issuer(ws, &issuer_id, &key)?;
            let out = serde_json::json!({ "issuer_id": issuer_id, "public_key": pk });
            ctx.emit(&out, || format!("registered {issuer_id}"));
            Ok(0)
        }
        VcCmd::Issue { issuer_id, issuer_key, holder_key, attrs, valid_from, valid_until, out } => {
            let valid_from = valid_from.unwrap_or_else(|| ctx.now());
            let attributes: BTreeMap<String, String> = attrs.into_iter().collect();
            let req = ops::VcIssueRequest {
                issuer_id,
                issuer_key,
                holder_key,
                attributes,
                valid_from,
                valid_until: valid_until.unwrap_or(valid_from.saturating_add(365 * 86_400)),
            };
            let issued = ops::vc_issue(ws, &req, ctx.seed(ws, REGISTRY_FILE))?;
            let json = serde_json::to_string_pretty(&issued).expect("credential serializes");
            let summary = format!("{} status {}", issued.credential.id, issued.credential.status_id);
            write_or_print(ctx, &out, json, summary)
        }
        VcCmd::Present { credential, holder_key, disclose, challenge, out } => {
            let credential: IssuedCredential = read_json(&credential)?;
            let disclose: BTreeSet<String> = disclose.into_iter().collect();
            let req = ops::VcPresentRequest { credential, holder_key, disclose, challenge };
            let presentation = ops::vc_present(ws, &req)?;
            let summary = format!("{} attribute(s) disclosed", presentation.disclosed.len());
            write_or_print(ctx, &out, presentation.to_json(), summary)
        }
        VcCmd::Verify { presentation, challenge, remote } => {
            let presentation: Presentation = read_json(&presentation)?;
            let req = ops::VcVerifyRequest { presentation, challenge, now: Some(ctx.now()) };
            let out = match remote.remote {
                Some(url) => runtime()?.block_on(Client::new(url).verify_presentation(&req))?,
                None => ops::vc_verify(ws, &req, ctx.now())?,
            };
            Ok(ctx.verdict(&out, out.valid, &out.reasons, || {
                out.disclosed.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("\n")
            }))
        }
        VcCmd::Revoke { status_id } => {
            ops::vc_revoke(ws, &status_id)?;
            ctx.emit(&serde_json::json!({ "revoked": status_id }), || format!("revoked {status_id}"));
            Ok(0)
        }
    }
}

fn print_status(ctx: &Ctx, status: &ops::LedgerStatus) {
    ctx.emit(status, || {
        let mut s = format!("{} height {} root {}", status.profile, status.height, status.state_root.to_b64url());
        if status.truncated_bytes > 0 {
            s.push_str(&format!("\ncut {} byte torn tail", status.truncated_bytes));
        }
        s
    });
}

fn ledger(ctx: &Ctx, ws: &Workspace, cmd: LedgerCmd) -> Outcome {
    match cmd {
        LedgerCmd::Init { profile, owner, accounts, peers, channel, threshold } => {
            let profile = match profile {
                Profile::Permissionless => ProfileKind::Permissionless,
                Profile::Permissioned => ProfileKind::Permissioned,
            };
            let req = ops::LedgerInitRequest { profile, owner, accounts, peers, channel, threshold };
            print_status(ctx, &ops::ledger_init(ws, &req, ctx.now())?);
            Ok(0)
        }
        LedgerCmd::Submit { from, contract, method, args } => {
            let req = ops::SubmitRequest {
                sender: from.sender,
                channel: from.channel.unwrap_or_else(|| DEFAULT_CHANNEL.to_string()),
                contract,
                method,
                args,
                endorsers: from.endorsers,
            };
            let receipt = ops::ledger_submit(ws, &req, ctx.now())?;
            ctx.emit(&receipt, || match (&receipt.block_height, &receipt.reason) {
                (Some(h), _) => {
                    let out = receipt.output.as_deref().map(|o| format!("\n{o}")).unwrap_or_default();
                    format!("accepted at height {h}{out}")
                }
                (None, reason) => format!("rejected: {}", reason.as_deref().unwrap_or("unknown")),
            });
            Ok(u8::from(!receipt.accepted))
        }
        LedgerCmd::Replay => {
            print_status(ctx, &ops::ledger_replay(ws)?);
            Ok(0)
        }
        LedgerCmd::Root => {
            print_status(ctx, &ops::ledger_root(ws)?);
            Ok(0)
        }
    }
}

fn cert(ctx: &Ctx, ws: &Workspace, cmd: CertCmd) -> Outcome {
    match cmd {
        CertCmd::Issue { from, fields, subject, attest } => {
            let req = ops::CertIssueRequest { from: from.spec(), fields: fields.fields(), subject, attest };
            let out = ops::cert_issue(ws, &req, ctx.now())?;
            ctx.emit(&out, || format!("{} token {}", out.certificate_id.as_str(), out.token_id));
            Ok(0)
        }
        CertCmd::Verify { id, fields, read_as, remote } => {
            let req = ops::CertVerifyRequest {
                id: CertificateId(id),
                fields: fields.fields(),
                peer: read_as.peer,
                channel: read_as.channel,
            };
            let out = match remote.remote {
                Some(url) => runtime()?.block_on(Client::new(url).verify_certificate(&req))?,
                None => ops::cert_verify(ws, &req)?,
            };
            Ok(ctx.verdict(&out, out.valid, &out.reasons, String::new))
        }
        CertCmd::Revoke { from, id } => {
            let req = ops::CertRevokeRequest { from: from.spec(), id: CertificateId(id.clone()) };
            ops::cert_revoke(ws, &req, ctx.now())?;
            ctx.emit(&serde_json::json!({ "revoked": id }), || format!("revoked {id}"));
            Ok(0)
        }
    }
}

fn bridge(ctx: &Ctx, ws: &Workspace, cmd: BridgeCmd) -> Outcome {
    match cmd {
        BridgeCmd::Issue { from, fields, issuer_id, issuer_key } => {
            let req = ops::BridgeIssueRequest { from: from.spec(), fields: fields.fields(), issuer_key, issuer_id };
            let out = ops::bridge_issue(ws, &req, ctx.now())?;
            ctx.emit(&out, || out.jwt.jwt.clone());
            Ok(0)
        }
        BridgeCmd::Verify { jwt, read_as } => {
            let req = ops::BridgeVerifyRequest { jwt, peer: read_as.peer, channel: read_as.channel };
            let out = ops::bridge_verify(ws, &req)?;
            Ok(ctx.verdict(&out, out.valid, &out.reasons, String::new))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
