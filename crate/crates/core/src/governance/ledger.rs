//! Append-only, hash-chained audit ledger stored as JSON Lines.
//!
//! Line 0 is the header `{"hash_alg":"sha256","version":1}`. Every following
//! line is one canonical [`AuditRecord`] with
//! `this_hash = SHA-256(prev_hash ‖ canonical(case_id, event_kind, payload, seq, ts))`,
//! where `prev_hash` is the raw 32-byte digest of the previous record (all
//! zero for seq 1). A `<ledger>.head` sidecar holds the last `seq` and hash so
//! truncation at a line boundary is detectable.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::{Clock, SystemClock, Timestamp};
use crate::governance::canonical_json;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";
pub const HASH_ALG: &str = "sha256";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEventKind {
    Ingested,
    ToolCall,
    AgentOutput,
    CritiqueIssued,
    Revision,
    GuardEvaluated,
    Escalation,
    HumanDecision,
    Recorded,
}

impl AuditEventKind {
    /// Kinds only the authority gate may append.
    pub fn is_reserved(self) -> bool {
        matches!(self, AuditEventKind::HumanDecision | AuditEventKind::Recorded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub seq: u64,
    pub case_id: String,
    pub event_kind: AuditEventKind,
    pub payload: Value,
    pub prev_hash: String,
    pub this_hash: String,
    pub ts: Timestamp,
}

#[derive(Serialize)]
struct RecordBody<'a> {
    case_id: &'a str,
    event_kind: AuditEventKind,
    payload: &'a Value,
    seq: u64,
    ts: Timestamp,
}

impl AuditRecord {
    /// Recomputes the chained hash from `prev_hash` and the record body.
    /// `None` if `prev_hash` is not 32 bytes of lowercase hex.
    pub fn compute_hash(&self) -> Option<String> {
        chain_hash(
            &self.prev_hash,
            &RecordBody {
                case_id: &self.case_id,
                event_kind: self.event_kind,
                payload: &self.payload,
                seq: self.seq,
                ts: self.ts,
            },
        )
    }
}

fn chain_hash(prev_hash: &str, body: &RecordBody<'_>) -> Option<String> {
    if prev_hash.len() != 64 || prev_hash.bytes().any(|b| b.is_ascii_uppercase()) {
        return None;
    }
    let prev = hex::decode(prev_hash).ok()?;
    let mut hasher = Sha256::new();
    hasher.update(&prev);
    hasher.update(canonical_json(body).as_bytes());
    Some(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    hash_alg: String,
    version: u32,
}

fn header_line() -> String {
    canonical_json(&Header {
        hash_alg: HASH_ALG.into(),
        version: FORMAT_VERSION,
    })
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("event kind {0:?} can only be appended by the authority gate")]
    ReservedKind(AuditEventKind),
    #[error("ledger persistence failed: {0}")]
    Persistence(#[source] io::Error),
    #[error("ledger is unusable after an earlier persistence failure")]
    Poisoned,
    #[error("existing ledger fails verification at seq {}: {:?}", .0.seq, .0.reason)]
    Corrupt(Divergence),
}

/// How far an append is pushed before it returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Durability {
    /// `fsync` the data on every append.
    #[default]
    Fsync,
    /// Flush to the OS only.
    Flush,
}

enum Sink {
    Memory,
    File {
        file: File,
        path: PathBuf,
        durability: Durability,
    },
    Writer(Box<dyn Write + Send>),
}

struct Inner {
    records: Vec<AuditRecord>,
    last_hash: String,
    sink: Sink,
    poisoned: bool,
}

pub struct AuditLedger {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for AuditLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.lock();
        f.debug_struct("AuditLedger")
            .field("records", &inner.records.len())
            .field("last_hash", &inner.last_hash)
            .finish()
    }
}

fn head_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".head");
    PathBuf::from(name)
}

fn read_head(path: &Path) -> io::Result<Option<(u64, String)>> {
    match fs::read_to_string(head_path(path)) {
        Ok(text) => {
            let mut parts = text.split_whitespace();
            let seq = parts.next().and_then(|s| s.parse().ok());
            let hash = parts.next().map(str::to_string);
            match (seq, hash) {
                (Some(seq), Some(hash)) => Ok(Some((seq, hash))),
                _ => Err(io::Error::new(io::ErrorKind::InvalidData, "malformed ledger head")),
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

impl AuditLedger {
    /// Case id used for events that belong to no case, such as tool registration.
    pub const SYSTEM_SCOPE: &'static str = "_system";

    pub fn in_memory() -> Self {
        Self::in_memory_with_clock(Arc::new(SystemClock::new()))
    }

    pub fn in_memory_with_clock(clock: Arc<dyn Clock>) -> Self {
        Self::from_parts(Vec::new(), Sink::Memory, clock)
    }

    /// Streams the ledger (header first) into an arbitrary writer. Each record
    /// is flushed before `append` returns.
    pub fn to_writer(mut writer: Box<dyn Write + Send>, clock: Arc<dyn Clock>) -> Result<Self, LedgerError> {
        writer
            .write_all(format!("{}\n", header_line()).as_bytes())
            .and_then(|_| writer.flush())
            .map_err(LedgerError::Persistence)?;
        Ok(Self::from_parts(Vec::new(), Sink::Writer(writer), clock))
    }

    /// Opens or creates a ledger file. An existing file is verified first and
    /// refused if its chain is broken.
    pub fn open(path: impl AsRef<Path>, durability: Durability) -> Result<Self, LedgerError> {
        Self::open_with_clock(path, durability, Arc::new(SystemClock::new()))
    }

    pub fn open_with_clock(
        path: impl AsRef<Path>,
        durability: Durability,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let records = if path.exists() {
            let bytes = fs::read(&path).map_err(LedgerError::Persistence)?;
            let head = read_head(&path).map_err(LedgerError::Persistence)?;
            let (report, records) = verify_bytes(&bytes, head.as_ref());
            if let Some(divergence) = report.first_divergence {
                return Err(LedgerError::Corrupt(divergence));
            }
            records
        } else {
            let mut file = File::create(&path).map_err(LedgerError::Persistence)?;
            writeln!(file, "{}", header_line())
                .and_then(|_| file.sync_all())
                .map_err(LedgerError::Persistence)?;
            Vec::new()
        };
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(LedgerError::Persistence)?;
        Ok(Self::from_parts(
            records,
            Sink::File {
                file,
                path,
                durability,
            },
            clock,
        ))
    }

    fn from_parts(records: Vec<AuditRecord>, sink: Sink, clock: Arc<dyn Clock>) -> Self {
        let last_hash = records
            .last()
            .map(|r| r.this_hash.clone())
            .unwrap_or_else(|| GENESIS_HASH.to_string());
        Self {
            inner: Mutex::new(Inner {
                records,
                last_hash,
                sink,
                poisoned: false,
            }),
            clock,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Appends and persists one record. `HumanDecision` and `Recorded` are
    /// refused here; only the authority gate may write them.
    pub fn append(
        &self,
        case_id: &str,
        event_kind: AuditEventKind,
        payload: Value,
    ) -> Result<AuditRecord, LedgerError> {
        if event_kind.is_reserved() {
            return Err(LedgerError::ReservedKind(event_kind));
        }
        self.append_unchecked(case_id, event_kind, payload)
    }

    pub(in crate::governance) fn append_unchecked(
        &self,
        case_id: &str,
        event_kind: AuditEventKind,
        payload: Value,
    ) -> Result<AuditRecord, LedgerError> {
        let mut inner = self.lock();
        if inner.poisoned {
            return Err(LedgerError::Poisoned);
        }
        let seq = inner.records.len() as u64 + 1;
        // Normalise the payload to what a reader of the file will see.
        let payload: Value = serde_json::from_str(&canonical_json(&payload)).expect("canonical JSON parses");
        let ts = self.clock.now();
        let this_hash = chain_hash(
            &inner.last_hash,
            &RecordBody {
                case_id,
                event_kind,
                payload: &payload,
                seq,
                ts,
            },
        )
        .expect("ledger keeps a well-formed last hash");
        let record = AuditRecord {
            seq,
            case_id: case_id.to_string(),
            event_kind,
            payload,
            prev_hash: inner.last_hash.clone(),
            this_hash,
            ts,
        };
        if let Err(e) = persist(&mut inner.sink, &record) {
            inner.poisoned = true;
            return Err(LedgerError::Persistence(e));
        }
        inner.last_hash = record.this_hash.clone();
        inner.records.push(record.clone());
        Ok(record)
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(seq, this_hash)` of the newest record; `(0, GENESIS_HASH)` when empty.
    pub fn head(&self) -> (u64, String) {
        let inner = self.lock();
        (inner.records.len() as u64, inner.last_hash.clone())
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.lock().records.clone()
    }

    pub fn records_for(&self, case_id: &str) -> Vec<AuditRecord> {
        self.lock()
            .records
            .iter()
            .filter(|r| r.case_id == case_id)
            .cloned()
            .collect()
    }

    pub fn path(&self) -> Option<PathBuf> {
        match &self.lock().sink {
            Sink::File { path, .. } => Some(path.clone()),
            _ => None,
        }
    }

    /// The ledger serialised exactly as it is (or would be) stored on disk.
    pub fn to_jsonl(&self) -> String {
        let inner = self.lock();
        let mut out = header_line();
        out.push('\n');
        for r in &inner.records {
            out.push_str(&canonical_json(r));
            out.push('\n');
        }
        out
    }
}

fn persist(sink: &mut Sink, record: &AuditRecord) -> io::Result<()> {
    let mut line = canonical_json(record);
    line.push('\n');
    match sink {
        Sink::Memory => Ok(()),
        Sink::Writer(w) => {
            w.write_all(line.as_bytes())?;
            w.flush()
        }
        Sink::File {
            file,
            path,
            durability,
        } => {
            file.write_all(line.as_bytes())?;
            file.flush()?;
            if *durability == Durability::Fsync {
                file.sync_data()?;
            }
            fs::write(head_path(path), format!("{} {}\n", record.seq, record.this_hash))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    HeaderInvalid,
    /// The line is not a well-formed record.
    Malformed,
    /// The line parses but is not byte-identical to its canonical form.
    NonCanonical,
    SeqMismatch,
    PrevHashMismatch,
    HashMismatch,
    /// The file ends before the last record the head sidecar names.
    Truncated,
    /// The head sidecar disagrees with the final record.
    HeadMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Sequence number of the first record that fails; 0 is the header.
    pub seq: u64,
    pub reason: DivergenceReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub records_checked: u64,
    pub first_divergence: Option<Divergence>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Re-verifies the ledger from its persisted form: the file for file-backed
/// ledgers, the in-memory serialisation otherwise.
pub fn verify_chain(ledger: &AuditLedger) -> VerificationReport {
    if let Some(path) = ledger.path() {
        match verify_file(&path) {
            Ok(report) => report,
            Err(_) => VerificationReport {
                records_checked: 0,
                first_divergence: Some(Divergence {
                    seq: 0,
                    reason: DivergenceReason::HeaderInvalid,
                }),
            },
        }
    } else {
        let head = ledger.head();
        verify_bytes(ledger.to_jsonl().as_bytes(), Some(&head)).0
    }
}

/// Verifies a ledger file together with its head sidecar, if present.
pub fn verify_file(path: impl AsRef<Path>) -> io::Result<VerificationReport> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let head = read_head(path)?;
    Ok(verify_bytes(&bytes, head.as_ref()).0)
}

/// Verifies raw ledger bytes. `head` is the expected final `(seq, hash)`.
pub fn verify_bytes(bytes: &[u8], head: Option<&(u64, String)>) -> (VerificationReport, Vec<AuditRecord>) {
    let mut records = Vec::new();
    let fail = |records: &Vec<AuditRecord>, seq: u64, reason| VerificationReport {
        records_checked: records.len() as u64,
        first_divergence: Some(Divergence { seq, reason }),
    };
    let head_seq = head.map(|h| h.0).unwrap_or(0);
    if bytes.is_empty() {
        return if head_seq == 0 {
            (
                VerificationReport {
                    records_checked: 0,
                    first_divergence: None,
                },
                records,
            )
        } else {
            (fail(&records, 0, DivergenceReason::Truncated), records)
        };
    }

    let complete = bytes.ends_with(b"\n");
    let body = if complete { &bytes[..bytes.len() - 1] } else { bytes };
    let lines: Vec<&[u8]> = body.split(|b| *b == b'\n').collect();
    let last_index = lines.len() - 1;

    if lines[0] != header_line().as_bytes() || (!complete && last_index == 0) {
        return (fail(&records, 0, DivergenceReason::HeaderInvalid), records);
    }

    let mut expected_prev = GENESIS_HASH.to_string();
    for (index, line) in lines.iter().enumerate().skip(1) {
        let seq = index as u64;
        if index == last_index && !complete {
            return (fail(&records, seq, DivergenceReason::Truncated), records);
        }
        let record: AuditRecord = match serde_json::from_slice(line) {
            Ok(r) => r,
            Err(_) => return (fail(&records, seq, DivergenceReason::Malformed), records),
        };
        if canonical_json(&record).as_bytes() != *line {
            return (fail(&records, seq, DivergenceReason::NonCanonical), records);
        }
        if record.seq != seq {
            return (fail(&records, seq, DivergenceReason::SeqMismatch), records);
        }
        if record.prev_hash != expected_prev {
            return (fail(&records, seq, DivergenceReason::PrevHashMismatch), records);
        }
        if record.compute_hash().as_deref() != Some(record.this_hash.as_str()) {
            return (fail(&records, seq, DivergenceReason::HashMismatch), records);
        }
        expected_prev = record.this_hash.clone();
        records.push(record);
    }

    let last_seq = records.len() as u64;
    if let Some((hseq, hhash)) = head {
        if last_seq < *hseq {
            return (fail(&records, last_seq + 1, DivergenceReason::Truncated), records);
        }
        if last_seq > *hseq {
            return (fail(&records, hseq + 1, DivergenceReason::HeadMismatch), records);
        }
        if last_seq > 0 && *hhash != expected_prev {
            return (fail(&records, last_seq, DivergenceReason::HeadMismatch), records);
        }
    }
    (
        VerificationReport {
            records_checked: last_seq,
            first_divergence: None,
        },
        records,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::LogicalClock;
    use serde_json::json;

    fn ledger() -> AuditLedger {
        AuditLedger::in_memory_with_clock(Arc::new(LogicalClock::new()))
    }

    #[test]
    fn genesis_prev_hash_is_zero() {
        let l = ledger();
        let r = l.append("c", AuditEventKind::Ingested, json!({})).unwrap();
        assert_eq!(r.seq, 1);
        assert_eq!(r.prev_hash, GENESIS_HASH);
    }

    #[test]
    fn hash_matches_independent_computation() {
        let l = ledger();
        let r = l.append("c", AuditEventKind::Ingested, json!({ "b": 2, "a": 1 })).unwrap();
        let mut h = Sha256::new();
        h.update([0u8; 32]);
        h.update(br#"{"case_id":"c","event_kind":"ingested","payload":{"a":1,"b":2},"seq":1,"ts":1}"#);
        assert_eq!(r.this_hash, hex::encode(h.finalize()));
    }

    #[test]
    fn reserved_kinds_are_refused() {
        let l = ledger();
        for kind in [AuditEventKind::HumanDecision, AuditEventKind::Recorded] {
            assert!(matches!(l.append("c", kind, json!({})), Err(LedgerError::ReservedKind(k)) if k == kind));
        }
        assert!(l.is_empty());
    }

    #[test]
    fn thousand_appends_verify() {
        let l = ledger();
        for i in 0..1000 {
            l.append("c", AuditEventKind::ToolCall, json!({ "i": i })).unwrap();
        }
        let records = l.records();
        assert_eq!(records.iter().map(|r| r.seq).collect::<Vec<_>>(), (1..=1000).collect::<Vec<_>>());
        let report = verify_chain(&l);
        assert!(report.is_clean());
        assert_eq!(report.records_checked, 1000);
    }

    #[test]
    fn empty_ledger_is_vacuously_clean() {
        assert!(verify_chain(&ledger()).is_clean());
        assert!(verify_bytes(b"", None).0.is_clean());
    }

    #[test]
    fn uppercase_hex_is_not_accepted() {
        let l = ledger();
        l.append("c", AuditEventKind::Ingested, json!({})).unwrap();
        let text = l.to_jsonl();
        let this = l.records()[0].this_hash.clone();
        let Some(pos) = this.find(|c: char| c.is_ascii_lowercase()) else { return };
        let mut upper = this.clone();
        upper.replace_range(pos..pos + 1, &this[pos..pos + 1].to_ascii_uppercase());
        let tampered = text.replace(&this, &upper);
        let (report, _) = verify_bytes(tampered.as_bytes(), None);
        assert_eq!(report.first_divergence.unwrap().seq, 1);
    }

    #[test]
    fn writer_failure_poisons_the_ledger() {
        struct Failing(usize);
        impl Write for Failing {
            fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
                if self.0 == 0 {
                    return Err(io::Error::other("disk full"));
                }
                self.0 -= 1;
                Ok(buf.len())
            }
            fn flush(&mut self) -> io::Result<()> {
                Ok(())
            }
        }
        let l = AuditLedger::to_writer(Box::new(Failing(1)), Arc::new(LogicalClock::new())).unwrap();
        assert!(matches!(
            l.append("c", AuditEventKind::Ingested, json!({})),
            Err(LedgerError::Persistence(_))
        ));
        assert!(matches!(l.append("c", AuditEventKind::Ingested, json!({})), Err(LedgerError::Poisoned)));
        assert!(l.is_empty());
    }

    #[test]
    fn file_ledger_reopens_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        {
            let l = AuditLedger::open(&path, Durability::Flush).unwrap();
            l.append("c", AuditEventKind::Ingested, json!({ "n": 1 })).unwrap();
        }
        let l = AuditLedger::open(&path, Durability::Flush).unwrap();
        let r = l.append("c", AuditEventKind::Ingested, json!({ "n": 2 })).unwrap();
        assert_eq!(r.seq, 2);
        assert!(verify_file(&path).unwrap().is_clean());
    }

    #[test]
    fn tampered_file_is_refused_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        {
            let l = AuditLedger::open(&path, Durability::Flush).unwrap();
            l.append("c", AuditEventKind::Ingested, json!({ "n": 1 })).unwrap();
        }
        let text = fs::read_to_string(&path).unwrap().replace("\"n\":1", "\"n\":7");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            AuditLedger::open(&path, Durability::Flush),
            Err(LedgerError::Corrupt(Divergence { seq: 1, reason: DivergenceReason::HashMismatch }))
        ));
    }

    #[test]
    fn truncation_at_line_boundary_is_caught_by_head() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.jsonl");
        let l = AuditLedger::open(&path, Durability::Flush).unwrap();
        for i in 0..5 {
            l.append("c", AuditEventKind::ToolCall, json!({ "i": i })).unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        let keep: Vec<&str> = text.lines().take(4).collect();
        fs::write(&path, keep.join("\n") + "\n").unwrap();
        let d = verify_file(&path).unwrap().first_divergence.unwrap();
        assert_eq!(d, Divergence { seq: 4, reason: DivergenceReason::Truncated });
    }
}
