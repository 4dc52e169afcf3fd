pub mod bridge;
pub mod cert;
pub mod crypto;
pub mod harness;
pub mod jose;
pub mod ledger;
pub mod scitokens;
pub mod vcred;

/// Seconds since the Unix epoch, always passed in by the caller.
pub type UnixTime = u64;
