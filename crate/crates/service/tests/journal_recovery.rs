use std::fs::OpenOptions;
use std::io::Write;

use credbench_core::ledger::ProfileKind;
use credbench_service::ops::{self, CertFields, CertIssueRequest, LedgerInitRequest, SenderSpec};
use credbench_service::{OpsError, Workspace};

const T0: u64 = 1_700_000_000;

fn ledger_workspace() -> (tempfile::TempDir, Workspace) {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::open(dir.path()).unwrap();
    ops::keygen_op(&ws, Some("owner"), [5; 32]).unwrap();
    let init = LedgerInitRequest {
        profile: ProfileKind::Permissionless,
        owner: Some("owner".into()),
        accounts: vec![],
        peers: vec![],
        channel: "default".into(),
        threshold: 0,
    };
    ops::ledger_init(&ws, &init, T0).unwrap();
    (dir, ws)
}

fn issue(ws: &Workspace, name: &str) -> Result<ops::CertIssueResponse, OpsError> {
    let req = CertIssueRequest {
        from: SenderSpec { sender: "owner".into(), ..Default::default() },
        fields: CertFields { name: name.into(), program: "CS".into(), graduation_date: "2023-05-15".into(), gpa: "3.50".into() },
        subject: None,
        attest: false,
    };
    ops::cert_issue(ws, &req, T0 + 1)
}

fn append_raw(ws: &Workspace, bytes: &[u8]) {
    let mut f = OpenOptions::new().append(true).open(ws.path("ledger.journal")).unwrap();
    f.write_all(bytes).unwrap();
}

#[test]
fn torn_tail_is_cut_on_next_append() {
    let (_d, ws) = ledger_workspace();
    issue(&ws, "Alice").unwrap();
    let before = ops::ledger_root(&ws).unwrap();
    append_raw(&ws, br#"{"height":3,"prev_ha"#);

    let loaded = ws.require_ledger().unwrap();
    assert_eq!(loaded.truncated_bytes, 20);
    assert_eq!(loaded.ledger.state_root(), before.state_root);

    let second = issue(&ws, "Bob").unwrap();
    assert_eq!(second.token_id, 2);
    let loaded = ws.require_ledger().unwrap();
    assert_eq!(loaded.truncated_bytes, 0);
    assert_eq!(loaded.ledger.height(), before.height + 1);
}

#[test]
fn replay_reports_and_repairs_truncation() {
    let (_d, ws) = ledger_workspace();
    issue(&ws, "Alice").unwrap();
    let len = std::fs::metadata(ws.path("ledger.journal")).unwrap().len();
    append_raw(&ws, b"{\"hei");
    let status = ops::ledger_replay(&ws).unwrap();
    assert_eq!(status.truncated_bytes, 5);
    assert_eq!(std::fs::metadata(ws.path("ledger.journal")).unwrap().len(), len);
    assert_eq!(ops::ledger_replay(&ws).unwrap().truncated_bytes, 0);
}

#[test]
fn final_line_without_newline_is_kept() {
    let (_d, ws) = ledger_workspace();
    issue(&ws, "Alice").unwrap();
    let path = ws.path("ledger.journal");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.trim_end_matches('\n')).unwrap();
    let height = ws.require_ledger().unwrap().ledger.height();
    issue(&ws, "Bob").unwrap();
    assert_eq!(ws.require_ledger().unwrap().ledger.height(), height + 1);
}

#[test]
fn mid_journal_damage_is_corruption() {
    let (_d, ws) = ledger_workspace();
    issue(&ws, "Alice").unwrap();
    issue(&ws, "Bob").unwrap();
    let path = ws.path("ledger.journal");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("Alice", "Alicf", 1)).unwrap();
    let err = issue(&ws, "Carol").unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn rejected_issuance_appends_nothing() {
    let (_d, ws) = ledger_workspace();
    issue(&ws, "Alice").unwrap();
    let bytes = std::fs::read(ws.path("ledger.journal")).unwrap();
    let err = issue(&ws, "Alice").unwrap_err();
    assert!(matches!(err, OpsError::Rejected { ref reason, .. } if reason == "duplicate certificate"));
    assert_eq!(std::fs::read(ws.path("ledger.journal")).unwrap(), bytes);
}
