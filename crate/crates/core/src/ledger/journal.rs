//! JSON-lines ledger journal.
//!
//! Line 1 is a versioned header carrying the ledger profile; every following
//! line is one block. Lines are only ever appended. A final line without a
//! terminating newline that is an incomplete JSON document is a torn write
//! and is dropped on load; any other damage is a broken chain.

use serde::{Deserialize, Serialize};

use super::{Block, Ledger, LedgerError, LedgerProfile};

pub const FORMAT: &str = "credbench-ledger-journal";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JournalHeader {
    pub format: String,
    pub version: u32,
    pub profile: LedgerProfile,
}

pub fn header_line(profile: &LedgerProfile) -> String {
    let header = JournalHeader { format: FORMAT.to_string(), version: VERSION, profile: profile.clone() };
    let mut line = serde_json::to_string(&header).expect("header serializes");
    line.push('\n');
    line
}

pub fn block_line(block: &Block) -> String {
    let mut line = serde_json::to_string(block).expect("block serializes");
    line.push('\n');
    line
}

/// Full journal text for `ledger`.
pub fn encode(ledger: &Ledger) -> String {
    let mut out = header_line(ledger.profile_at_genesis());
    for block in ledger.chain() {
        out.push_str(&block_line(block));
    }
    out
}

/// Result of parsing a journal without replaying it.
#[derive(Debug, Clone)]
pub struct ParsedJournal {
    pub profile: LedgerProfile,
    pub blocks: Vec<Block>,
    /// Byte length of the intact prefix (header plus complete block lines).
    pub intact_len: usize,
    /// Bytes of a torn final line that were dropped.
    pub truncated_bytes: usize,
}

/// True when `tail` looks like a prefix of a JSON document cut short.
fn is_torn_write(tail: &[u8]) -> bool {
    let text = match std::str::from_utf8(tail) {
        Ok(text) => text,
        Err(e) if e.error_len().is_none() => {
            // cut inside a multi-byte character
            std::str::from_utf8(&tail[..e.valid_up_to()]).expect("valid prefix")
        }
        Err(_) => return false,
    };
    matches!(
        serde_json::from_str::<serde_json::Value>(text),
        Err(e) if e.classify() == serde_json::error::Category::Eof
    )
}

pub fn parse(bytes: &[u8]) -> Result<ParsedJournal, LedgerError> {
    let header_end =
        bytes.iter().position(|&b| b == b'\n').ok_or_else(|| LedgerError::BadJournalHeader("missing header line".into()))?;
    let header: JournalHeader =
        serde_json::from_slice(&bytes[..header_end]).map_err(|e| LedgerError::BadJournalHeader(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(LedgerError::BadJournalHeader(format!("unsupported format {:?} version {}", header.format, header.version)));
    }

    let mut blocks = Vec::new();
    let mut offset = header_end + 1;
    let mut line_no = 1usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        match rest.iter().position(|&b| b == b'\n') {
            Some(end) => {
                let block: Block = serde_json::from_slice(&rest[..end])
                    .map_err(|e| LedgerError::broken(None, format!("journal line {line_no}: {e}")))?;
                blocks.push(block);
                offset += end + 1;
            }
            None => {
                if let Ok(block) = serde_json::from_slice::<Block>(rest) {
                    // complete block, only the newline is missing
                    blocks.push(block);
                    offset = bytes.len();
                    continue;
                }
                if !is_torn_write(rest) {
                    return Err(LedgerError::broken(None, format!("journal line {line_no}: damaged final line")));
                }
                return Ok(ParsedJournal { profile: header.profile, blocks, intact_len: offset, truncated_bytes: rest.len() });
            }
        }
    }
    Ok(ParsedJournal { profile: header.profile, blocks, intact_len: offset, truncated_bytes: 0 })
}

/// A ledger rebuilt from a journal.
#[derive(Debug, Clone)]
pub struct LoadedJournal {
    pub ledger: Ledger,
    pub intact_len: usize,
    pub truncated_bytes: usize,
}

/// Parses and replays a journal, verifying every block.
pub fn load(bytes: &[u8]) -> Result<LoadedJournal, LedgerError> {
    let parsed = parse(bytes)?;
    let ledger = Ledger::replay(parsed.profile, &parsed.blocks)?;
    Ok(LoadedJournal { ledger, intact_len: parsed.intact_len, truncated_bytes: parsed.truncated_bytes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{self, CertificateAttributes, Submitter};
    use crate::crypto::keygen;

    fn sample() -> Ledger {
        let owner = keygen(Some(&[1; 32])).unwrap();
        let mut ledger = Ledger::init(LedgerProfile::permissionless([owner.public_key()])).unwrap();
        let who = Submitter::account(&owner);
        cert::deploy(&mut ledger, &who, 1).unwrap();
        for (i, name) in ["Alice", "Bob", "Zoë"].iter().enumerate() {
            let attrs = CertificateAttributes::new(*name, "CS", "2023-05-15", "3.90");
            cert::issue_certificate(&mut ledger, &who, &attrs, 10 + i as u64).unwrap();
        }
        ledger
    }

    #[test]
    fn round_trip() {
        let ledger = sample();
        let text = encode(&ledger);
        let loaded = load(text.as_bytes()).unwrap();
        assert_eq!(loaded.ledger.state_root(), ledger.state_root());
        assert_eq!(loaded.truncated_bytes, 0);
        assert_eq!(loaded.intact_len, text.len());
    }

    #[test]
    fn torn_tail_recovers_to_last_complete_block() {
        let ledger = sample();
        let text = encode(&ledger);
        let last_start = text[..text.len() - 1].rfind('\n').unwrap() + 1;
        for cut in (last_start + 1)..(text.len() - 1) {
            let loaded = load(&text.as_bytes()[..cut]).unwrap_or_else(|e| panic!("cut at {cut}: {e}"));
            assert_eq!(loaded.ledger.height(), ledger.height() - 1);
            assert_eq!(loaded.intact_len, last_start);
        }
        // complete JSON but missing only the newline is kept
        let loaded = load(&text.as_bytes()[..text.len() - 1]).unwrap();
        assert_eq!(loaded.ledger.height(), ledger.height());
    }

    #[test]
    fn bad_header() {
        assert!(matches!(parse(b""), Err(LedgerError::BadJournalHeader(_))));
        assert!(matches!(parse(b"{}\n"), Err(LedgerError::BadJournalHeader(_))));
    }
}
