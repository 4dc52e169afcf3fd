//! Deterministic single-sequencer ledger.
//!
//! Two profiles share one chain format:
//! - permissionless: a fixed account set; any account may submit on the default channel;
//! - permissioned: named peers, channels with member sets, and m-of-n
//!   endorsement policies per channel.
//!
//! Contracts are native state-transition functions registered by id. All
//! contract state lives in the world state, so replaying the chain from
//! genesis rebuilds it exactly. Each accepted transaction becomes one block;
//! rejected transactions touch nothing.

pub mod journal;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{canonical_encode, encode_parts, hash, verify_with, CanonicalRecord, Digest, KeyPair, PublicKey, Signature};
use crate::UnixTime;

pub const DEFAULT_CHANNEL: &str = "default";

/// Submit rejection reasons produced by the ledger itself.
pub mod reason {
    pub const TX_ID_MISMATCH: &str = "tx id mismatch";
    pub const BAD_SENDER_SIGNATURE: &str = "bad sender signature";
    pub const UNKNOWN_ACCOUNT: &str = "unknown account";
    pub const UNKNOWN_CHANNEL: &str = "unknown channel";
    pub const NOT_CHANNEL_MEMBER: &str = "sender not channel member";
    pub const INSUFFICIENT_ENDORSEMENTS: &str = "insufficient endorsements";
    pub const UNKNOWN_CONTRACT: &str = "unknown contract";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("endorsement threshold {threshold} exceeds the {peers} peers in the policy")]
    BadPolicy { threshold: usize, peers: usize },
    #[error("operation requires a permissioned ledger")]
    NotPermissioned,
    #[error("unknown peer {0:?}")]
    UnknownPeer(String),
    #[error("peer {0:?} is not in the channel's endorsement policy")]
    NotInPolicy(String),
    #[error("key does not belong to peer {0:?}")]
    WrongPeerKey(String),
    #[error("channel {0:?} already exists")]
    DuplicateChannel(String),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("access denied to channel {0:?}")]
    AccessDenied(String),
    #[error("invalid identifier {0:?}")]
    BadIdentifier(String),
    #[error("unknown contract {0:?}")]
    UnknownContract(String),
    #[error("contract error: {0}")]
    Contract(ContractError),
    #[error("broken chain at {}: {reason}", height.map(|h| format!("height {h}")).unwrap_or_else(|| "journal".into()))]
    BrokenChain { height: Option<u64>, reason: String },
    #[error("bad journal header: {0}")]
    BadJournalHeader(String),
}

impl LedgerError {
    pub(crate) fn broken(height: impl Into<Option<u64>>, reason: impl Into<String>) -> Self {
        LedgerError::BrokenChain { height: height.into(), reason: reason.into() }
    }
}

fn valid_identifier(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':'))
}

/// Threshold `m` over a set of peer ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndorsementPolicy {
    pub threshold: usize,
    pub peers: BTreeSet<String>,
}

impl EndorsementPolicy {
    pub fn new<I, S>(threshold: usize, peers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { threshold, peers: peers.into_iter().map(Into::into).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub members: BTreeSet<String>,
    pub policy: EndorsementPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Permissionless,
    Permissioned,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Permissionless => "permissionless",
            ProfileKind::Permissioned => "permissioned",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LedgerProfile {
    Permissionless { accounts: BTreeSet<PublicKey> },
    Permissioned { peers: BTreeMap<String, PublicKey>, channels: BTreeMap<String, ChannelConfig> },
}

impl LedgerProfile {
    pub fn permissionless<I: IntoIterator<Item = PublicKey>>(accounts: I) -> Self {
        LedgerProfile::Permissionless { accounts: accounts.into_iter().collect() }
    }

    /// Peers plus a single channel `channel_id` containing all of them under an m-of-n policy.
    pub fn permissioned_single_channel<I, S>(peers: I, channel_id: &str, threshold: usize) -> Self
    where
        I: IntoIterator<Item = (S, PublicKey)>,
        S: Into<String>,
    {
        let peers: BTreeMap<String, PublicKey> = peers.into_iter().map(|(id, pk)| (id.into(), pk)).collect();
        let ids: BTreeSet<String> = peers.keys().cloned().collect();
        let mut channels = BTreeMap::new();
        channels.insert(
            channel_id.to_string(),
            ChannelConfig { members: ids.clone(), policy: EndorsementPolicy { threshold, peers: ids } },
        );
        LedgerProfile::Permissioned { peers, channels }
    }

    pub fn kind(&self) -> ProfileKind {
        match self {
            LedgerProfile::Permissionless { .. } => ProfileKind::Permissionless,
            LedgerProfile::Permissioned { .. } => ProfileKind::Permissioned,
        }
    }

    fn validate(&self) -> Result<(), LedgerError> {
        if let LedgerProfile::Permissioned { peers, channels } = self {
            for id in peers.keys() {
                if !valid_identifier(id) {
                    return Err(LedgerError::BadIdentifier(id.clone()));
                }
            }
            for (id, config) in channels {
                validate_channel(peers, id, config)?;
            }
        }
        Ok(())
    }
}

fn validate_channel(peers: &BTreeMap<String, PublicKey>, id: &str, config: &ChannelConfig) -> Result<(), LedgerError> {
    if !valid_identifier(id) {
        return Err(LedgerError::BadIdentifier(id.to_string()));
    }
    for peer in config.members.iter().chain(&config.policy.peers) {
        if !peers.contains_key(peer) {
            return Err(LedgerError::UnknownPeer(peer.clone()));
        }
    }
    let policy = &config.policy;
    if policy.threshold > policy.peers.len() {
        return Err(LedgerError::BadPolicy { threshold: policy.threshold, peers: policy.peers.len() });
    }
    Ok(())
}

/// The signed part of a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxBody {
    pub sender: PublicKey,
    pub channel: String,
    pub contract: String,
    pub method: String,
    pub args: Vec<String>,
}

impl TxBody {
    pub fn new(sender: PublicKey, channel: &str, contract: &str, method: &str, args: Vec<String>) -> Self {
        Self { sender, channel: channel.to_string(), contract: contract.to_string(), method: method.to_string(), args }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut record = CanonicalRecord::new();
        let fields = [
            ("sender", self.sender.to_b64url()),
            ("channel", self.channel.clone()),
            ("contract", self.contract.clone()),
            ("method", self.method.clone()),
            ("argc", self.args.len().to_string()),
        ];
        for (label, value) in fields {
            record.push(label, value).expect("static labels are unique");
        }
        for (i, arg) in self.args.iter().enumerate() {
            record.push(format!("arg{i}"), arg.clone()).expect("indexed labels are unique");
        }
        canonical_encode(&record).expect("record is nonempty")
    }

    pub fn tx_id(&self) -> Digest {
        hash(&self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endorsement {
    pub peer_id: String,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub tx_id: Digest,
    pub sender: PublicKey,
    pub channel: String,
    pub contract: String,
    pub method: String,
    pub args: Vec<String>,
    pub sender_signature: Signature,
    pub endorsements: Vec<Endorsement>,
}

impl Transaction {
    /// Signs `body` with the sender key; endorsements are attached afterwards.
    pub fn new(body: TxBody, sender_key: &KeyPair) -> Self {
        let encoded = body.encode();
        let sender_signature = sender_key.sign(&encoded);
        Transaction {
            tx_id: hash(&encoded),
            sender: body.sender,
            channel: body.channel,
            contract: body.contract,
            method: body.method,
            args: body.args,
            sender_signature,
            endorsements: Vec::new(),
        }
    }

    pub fn with_endorsement(mut self, endorsement: Endorsement) -> Self {
        self.endorsements.push(endorsement);
        self
    }

    pub fn body(&self) -> TxBody {
        TxBody {
            sender: self.sender,
            channel: self.channel.clone(),
            contract: self.contract.clone(),
            method: self.method.clone(),
            args: self.args.clone(),
        }
    }

    fn push_into(&self, record: &mut CanonicalRecord, prefix: &str) {
        let mut put = |label: String, value: String| record.push(label, value).expect("unique labels");
        put(format!("{prefix}.id"), self.tx_id.to_b64url());
        put(format!("{prefix}.sig"), self.sender_signature.to_b64url());
        put(format!("{prefix}.endorsements"), self.endorsements.len().to_string());
        for (j, e) in self.endorsements.iter().enumerate() {
            put(format!("{prefix}.e{j}.peer"), e.peer_id.clone());
            put(format!("{prefix}.e{j}.sig"), e.signature.to_b64url());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDefinition {
    pub channel_id: String,
    pub config: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: UnixTime,
    pub txs: Vec<Transaction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelDefinition>,
    pub block_hash: Digest,
}

impl Block {
    fn sealed(
        height: u64,
        prev_hash: Digest,
        timestamp: UnixTime,
        txs: Vec<Transaction>,
        channel: Option<ChannelDefinition>,
    ) -> Self {
        let mut block = Block { height, prev_hash, timestamp, txs, channel, block_hash: Digest::ZERO };
        block.block_hash = block.compute_hash();
        block
    }

    /// Hash over height, predecessor, timestamp, every transaction with its
    /// signatures and endorsements, and any channel definition.
    pub fn compute_hash(&self) -> Digest {
        let mut record = CanonicalRecord::new();
        let put = |record: &mut CanonicalRecord, l: &str, v: String| record.push(l, v).expect("unique labels");
        put(&mut record, "height", self.height.to_string());
        put(&mut record, "prev_hash", self.prev_hash.to_b64url());
        put(&mut record, "timestamp", self.timestamp.to_string());
        put(&mut record, "txs", self.txs.len().to_string());
        for (i, tx) in self.txs.iter().enumerate() {
            tx.push_into(&mut record, &format!("tx{i}"));
        }
        if let Some(def) = &self.channel {
            put(&mut record, "channel.id", def.channel_id.clone());
            put(&mut record, "channel.threshold", def.config.policy.threshold.to_string());
            put(&mut record, "channel.members", def.config.members.len().to_string());
            for (j, m) in def.config.members.iter().enumerate() {
                put(&mut record, &format!("channel.member{j}"), m.clone());
            }
            put(&mut record, "channel.policy", def.config.policy.peers.len().to_string());
            for (j, p) in def.config.policy.peers.iter().enumerate() {
                put(&mut record, &format!("channel.policy{j}"), p.clone());
            }
        }
        hash(&canonical_encode(&record).expect("nonempty"))
    }
}

/// Outcome of [`Ledger::submit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub accepted: bool,
    pub tx_id: Digest,
    pub block_height: Option<u64>,
    pub reason: Option<String>,
    pub output: Option<String>,
}

/// Error raised by contract code; `code` becomes the receipt reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractError {
    pub code: String,
    pub detail: Option<String>,
}

impl ContractError {
    pub fn new(code: &str) -> Self {
        Self { code: code.to_string(), detail: None }
    }

    pub fn with_detail(code: &str, detail: impl Into<String>) -> Self {
        Self { code: code.to_string(), detail: Some(detail.into()) }
    }
}

impl fmt::Display for ContractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.detail {
            Some(d) => write!(f, "{}: {d}", self.code),
            None => f.write_str(&self.code),
        }
    }
}

impl std::error::Error for ContractError {}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    pub channel: String,
    pub contract: String,
    pub key: String,
}

pub type WorldState = BTreeMap<StateKey, String>;

/// View of one contract's state on one channel, with buffered writes.
pub struct ContractContext<'a> {
    sender: Option<PublicKey>,
    profile: ProfileKind,
    channel: &'a str,
    contract: &'a str,
    state: &'a WorldState,
    writes: BTreeMap<String, Option<String>>,
    read_only: bool,
}

impl<'a> ContractContext<'a> {
    /// `None` for read-only queries.
    pub fn sender(&self) -> Option<&PublicKey> {
        self.sender.as_ref()
    }

    pub fn profile(&self) -> ProfileKind {
        self.profile
    }

    pub fn channel(&self) -> &str {
        self.channel
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(pending) = self.writes.get(key) {
            return pending.clone();
        }
        self.state.get(&StateKey { channel: self.channel.into(), contract: self.contract.into(), key: key.into() }).cloned()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn put(&mut self, key: &str, value: impl Into<String>) -> Result<(), ContractError> {
        if self.read_only {
            return Err(ContractError::new("read only"));
        }
        self.writes.insert(key.to_string(), Some(value.into()));
        Ok(())
    }

    pub fn delete(&mut self, key: &str) -> Result<(), ContractError> {
        if self.read_only {
            return Err(ContractError::new("read only"));
        }
        self.writes.insert(key.to_string(), None);
        Ok(())
    }
}

pub trait Contract: Send + Sync {
    fn id(&self) -> &'static str;

    /// Executes `method`. Returning an error discards every buffered write.
    fn execute(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<Option<String>, ContractError>;
}

/// Contracts available to a ledger, keyed by id.
#[derive(Clone, Default)]
pub struct ContractRegistry {
    contracts: BTreeMap<&'static str, Arc<dyn Contract>>,
}

impl ContractRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The certificate contract and the credential-status registry contract.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(crate::cert::StudentCertificate));
        registry.register(Arc::new(crate::vcred::RegistryContract));
        registry
    }

    pub fn register(&mut self, contract: Arc<dyn Contract>) {
        self.contracts.insert(contract.id(), contract);
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn Contract>> {
        self.contracts.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.contracts.keys().copied()
    }
}

impl fmt::Debug for ContractRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.contracts.keys()).finish()
    }
}

/// Pending key writes; `None` deletes.
type Writes = BTreeMap<String, Option<String>>;

#[derive(Debug, Clone)]
pub struct Ledger {
    genesis_profile: LedgerProfile,
    profile: LedgerProfile,
    chain: Vec<Block>,
    world_state: WorldState,
    contracts: ContractRegistry,
}

/// Ledger-level validation outcome for a transaction.
enum Admission {
    Admitted,
    Rejected(&'static str),
}

impl Ledger {
    /// New ledger with the built-in contracts and a genesis block.
    pub fn init(profile: LedgerProfile) -> Result<Self, LedgerError> {
        Self::init_with(profile, ContractRegistry::builtin())
    }

    pub fn init_with(profile: LedgerProfile, contracts: ContractRegistry) -> Result<Self, LedgerError> {
        profile.validate()?;
        let genesis = Block::sealed(0, Digest::ZERO, 0, Vec::new(), None);
        Ok(Ledger { genesis_profile: profile.clone(), profile, chain: vec![genesis], world_state: WorldState::new(), contracts })
    }

    pub fn profile(&self) -> &LedgerProfile {
        &self.profile
    }

    /// The profile the ledger was initialized with, before any channel blocks.
    pub fn profile_at_genesis(&self) -> &LedgerProfile {
        &self.genesis_profile
    }

    pub fn kind(&self) -> ProfileKind {
        self.profile.kind()
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn height(&self) -> u64 {
        self.chain.last().map(|b| b.height).unwrap_or(0)
    }

    pub fn world_state(&self) -> &WorldState {
        &self.world_state
    }

    pub fn contracts(&self) -> &ContractRegistry {
        &self.contracts
    }

    fn peers(&self) -> Result<&BTreeMap<String, PublicKey>, LedgerError> {
        match &self.profile {
            LedgerProfile::Permissioned { peers, .. } => Ok(peers),
            LedgerProfile::Permissionless { .. } => Err(LedgerError::NotPermissioned),
        }
    }

    pub fn channel_config(&self, channel_id: &str) -> Option<&ChannelConfig> {
        match &self.profile {
            LedgerProfile::Permissioned { channels, .. } => channels.get(channel_id),
            LedgerProfile::Permissionless { .. } => None,
        }
    }

    /// Adds a channel; recorded as its own block so replay reproduces it.
    pub fn create_channel(
        &mut self,
        channel_id: &str,
        members: BTreeSet<String>,
        policy: EndorsementPolicy,
        now: UnixTime,
    ) -> Result<(), LedgerError> {
        let config = ChannelConfig { members, policy };
        self.apply_channel(channel_id, &config)?;
        let def = ChannelDefinition { channel_id: channel_id.to_string(), config };
        self.push_block(now, Vec::new(), Some(def));
        Ok(())
    }

    fn apply_channel(&mut self, channel_id: &str, config: &ChannelConfig) -> Result<(), LedgerError> {
        let LedgerProfile::Permissioned { peers, channels } = &mut self.profile else {
            return Err(LedgerError::NotPermissioned);
        };
        if channels.contains_key(channel_id) {
            return Err(LedgerError::DuplicateChannel(channel_id.to_string()));
        }
        validate_channel(peers, channel_id, config)?;
        channels.insert(channel_id.to_string(), config.clone());
        Ok(())
    }

    /// A peer's signature over `body`, checked against the channel policy.
    pub fn endorse(&self, peer_id: &str, peer_key: &KeyPair, body: &TxBody) -> Result<Endorsement, LedgerError> {
        let peers = self.peers()?;
        let registered = peers.get(peer_id).ok_or_else(|| LedgerError::UnknownPeer(peer_id.to_string()))?;
        if *registered != peer_key.public_key() {
            return Err(LedgerError::WrongPeerKey(peer_id.to_string()));
        }
        let channel = self.channel_config(&body.channel).ok_or_else(|| LedgerError::UnknownChannel(body.channel.clone()))?;
        if !channel.policy.peers.contains(peer_id) {
            return Err(LedgerError::NotInPolicy(peer_id.to_string()));
        }
        Ok(Endorsement { peer_id: peer_id.to_string(), signature: peer_key.sign(&body.encode()) })
    }

    /// Counts distinct in-policy peers whose endorsement signature verifies.
    pub fn effective_endorsements(&self, tx: &Transaction) -> usize {
        let (Ok(peers), Some(channel)) = (self.peers(), self.channel_config(&tx.channel)) else {
            return 0;
        };
        let encoded = tx.body().encode();
        tx.endorsements
            .iter()
            .filter(|e| channel.policy.peers.contains(&e.peer_id))
            .filter(|e| peers.get(&e.peer_id).is_some_and(|pk| verify_with(pk, &encoded, &e.signature)))
            .map(|e| e.peer_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    fn admit(&self, tx: &Transaction) -> Admission {
        let body = tx.body();
        let encoded = body.encode();
        if hash(&encoded) != tx.tx_id {
            return Admission::Rejected(reason::TX_ID_MISMATCH);
        }
        if !verify_with(&tx.sender, &encoded, &tx.sender_signature) {
            return Admission::Rejected(reason::BAD_SENDER_SIGNATURE);
        }
        match &self.profile {
            LedgerProfile::Permissionless { accounts } => {
                if tx.channel != DEFAULT_CHANNEL {
                    return Admission::Rejected(reason::UNKNOWN_CHANNEL);
                }
                if !accounts.contains(&tx.sender) {
                    return Admission::Rejected(reason::UNKNOWN_ACCOUNT);
                }
            }
            LedgerProfile::Permissioned { peers, channels } => {
                let Some(channel) = channels.get(&tx.channel) else {
                    return Admission::Rejected(reason::UNKNOWN_CHANNEL);
                };
                let is_member = channel.members.iter().any(|m| peers.get(m) == Some(&tx.sender));
                if !is_member {
                    return Admission::Rejected(reason::NOT_CHANNEL_MEMBER);
                }
                if self.effective_endorsements(tx) < channel.policy.threshold {
                    return Admission::Rejected(reason::INSUFFICIENT_ENDORSEMENTS);
                }
            }
        }
        if self.contracts.get(&tx.contract).is_none() {
            return Admission::Rejected(reason::UNKNOWN_CONTRACT);
        }
        Admission::Admitted
    }

    fn run(&self, tx: &Transaction) -> Result<(Option<String>, Writes), ContractError> {
        let contract = self.contracts.get(&tx.contract).expect("admitted transactions name a known contract");
        let mut ctx = ContractContext {
            sender: Some(tx.sender),
            profile: self.kind(),
            channel: &tx.channel,
            contract: &tx.contract,
            state: &self.world_state,
            writes: BTreeMap::new(),
            read_only: false,
        };
        let output = contract.execute(&mut ctx, &tx.method, &tx.args)?;
        Ok((output, ctx.writes))
    }

    fn apply_writes(&mut self, channel: &str, contract: &str, writes: BTreeMap<String, Option<String>>) {
        for (key, value) in writes {
            let key = StateKey { channel: channel.to_string(), contract: contract.to_string(), key };
            match value {
                Some(v) => self.world_state.insert(key, v),
                None => self.world_state.remove(&key),
            };
        }
    }

    fn push_block(&mut self, now: UnixTime, txs: Vec<Transaction>, channel: Option<ChannelDefinition>) -> u64 {
        let prev = self.chain.last().expect("genesis always present");
        let block = Block::sealed(prev.height + 1, prev.block_hash, now, txs, channel);
        let height = block.height;
        self.chain.push(block);
        height
    }

    /// Validates, executes and (on success) commits `tx` in a new block.
    pub fn submit(&mut self, tx: Transaction, now: UnixTime) -> Receipt {
        let rejected = |reason: &str| Receipt {
            accepted: false,
            tx_id: tx.tx_id,
            block_height: None,
            reason: Some(reason.to_string()),
            output: None,
        };
        if let Admission::Rejected(reason) = self.admit(&tx) {
            return rejected(reason);
        }
        match self.run(&tx) {
            Err(err) => rejected(&err.code),
            Ok((output, writes)) => {
                self.apply_writes(&tx.channel.clone(), &tx.contract.clone(), writes);
                let tx_id = tx.tx_id;
                let height = self.push_block(now, vec![tx], None);
                Receipt { accepted: true, tx_id, block_height: Some(height), reason: None, output }
            }
        }
    }

    fn check_read_access(&self, reader: Option<&str>, channel: &str) -> Result<(), LedgerError> {
        match &self.profile {
            LedgerProfile::Permissionless { .. } if channel == DEFAULT_CHANNEL => Ok(()),
            LedgerProfile::Permissionless { .. } => Err(LedgerError::UnknownChannel(channel.to_string())),
            LedgerProfile::Permissioned { channels, .. } => {
                let config = channels.get(channel).ok_or_else(|| LedgerError::UnknownChannel(channel.to_string()))?;
                match reader {
                    Some(peer) if config.members.contains(peer) => Ok(()),
                    _ => Err(LedgerError::AccessDenied(channel.to_string())),
                }
            }
        }
    }

    /// Reads one world-state value. On a permissioned ledger `reader` must be a channel member.
    pub fn read(&self, reader: Option<&str>, channel: &str, contract: &str, key: &str) -> Result<Option<String>, LedgerError> {
        self.check_read_access(reader, channel)?;
        Ok(self.world_state.get(&StateKey { channel: channel.into(), contract: contract.into(), key: key.into() }).cloned())
    }

    /// All (key, value) pairs a contract holds on one channel.
    pub fn scan(&self, reader: Option<&str>, channel: &str, contract: &str) -> Result<Vec<(String, String)>, LedgerError> {
        self.check_read_access(reader, channel)?;
        Ok(self
            .world_state
            .iter()
            .filter(|(k, _)| k.channel == channel && k.contract == contract)
            .map(|(k, v)| (k.key.clone(), v.clone()))
            .collect())
    }

    /// Runs a contract method without committing anything.
    pub fn query(
        &self,
        reader: Option<&str>,
        channel: &str,
        contract: &str,
        method: &str,
        args: &[String],
    ) -> Result<Option<String>, LedgerError> {
        self.check_read_access(reader, channel)?;
        let code = self.contracts.get(contract).ok_or_else(|| LedgerError::UnknownContract(contract.to_string()))?;
        let mut ctx = ContractContext {
            sender: None,
            profile: self.kind(),
            channel,
            contract,
            state: &self.world_state,
            writes: BTreeMap::new(),
            read_only: true,
        };
        code.execute(&mut ctx, method, args).map_err(LedgerError::Contract)
    }

    /// SHA-256 over the sorted world-state entries, each entry written as
    /// length-prefixed channel, contract, key, value.
    pub fn state_root(&self) -> Digest {
        let mut bytes = Vec::new();
        for (k, v) in &self.world_state {
            bytes.extend(encode_parts([k.channel.as_bytes(), k.contract.as_bytes(), k.key.as_bytes(), v.as_bytes()]));
        }
        hash(&bytes)
    }

    /// Rebuilds a ledger from `profile` and `chain`, re-validating and
    /// re-executing every block.
    pub fn replay(profile: LedgerProfile, chain: &[Block]) -> Result<Self, LedgerError> {
        Self::replay_with(profile, ContractRegistry::builtin(), chain)
    }

    pub fn replay_with(profile: LedgerProfile, contracts: ContractRegistry, chain: &[Block]) -> Result<Self, LedgerError> {
        let mut ledger = Self::init_with(profile, contracts)?;
        let Some((genesis, rest)) = chain.split_first() else {
            return Err(LedgerError::broken(None, "empty chain"));
        };
        if *genesis != ledger.chain[0] {
            return Err(LedgerError::broken(0, "genesis block mismatch"));
        }
        for block in rest {
            ledger.replay_block(block)?;
        }
        Ok(ledger)
    }

    fn replay_block(&mut self, block: &Block) -> Result<(), LedgerError> {
        let prev = self.chain.last().expect("genesis present");
        let h = block.height;
        if h != prev.height + 1 {
            return Err(LedgerError::broken(h, format!("height {h} does not follow {}", prev.height)));
        }
        if block.prev_hash != prev.block_hash {
            return Err(LedgerError::broken(h, "prev_hash mismatch"));
        }
        if block.compute_hash() != block.block_hash {
            return Err(LedgerError::broken(h, "block hash mismatch"));
        }
        match (&block.channel, block.txs.as_slice()) {
            (Some(def), []) => {
                self.apply_channel(&def.channel_id, &def.config)
                    .map_err(|e| LedgerError::broken(h, format!("channel definition: {e}")))?;
            }
            (None, [tx]) => {
                if tx.body().tx_id() != tx.tx_id {
                    return Err(LedgerError::broken(h, "tx id mismatch"));
                }
                if let Admission::Rejected(reason) = self.admit(tx) {
                    return Err(LedgerError::broken(h, format!("committed transaction rejected: {reason}")));
                }
                let (_, writes) =
                    self.run(tx).map_err(|e| LedgerError::broken(h, format!("committed transaction failed: {e}")))?;
                self.apply_writes(&tx.channel, &tx.contract, writes);
            }
            _ => return Err(LedgerError::broken(h, "block must hold one transaction or one channel definition")),
        }
        self.chain.push(block.clone());
        Ok(())
    }
}
