//! One JSON file per case.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::workflow::{CaseDossier, CaseStore};

#[derive(Debug, Clone)]
pub struct FileCaseStore {
    dir: PathBuf,
}

impl FileCaseStore {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    /// Case ids are caller-supplied, so file names are their hex encoding.
    fn path_for(&self, case_id: &str) -> PathBuf {
        self.dir.join(format!("{}.json", hex::encode(case_id.as_bytes())))
    }
}

impl CaseStore for FileCaseStore {
    fn save(&self, dossier: &CaseDossier) -> io::Result<()> {
        let path = self.path_for(dossier.case_id());
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec_pretty(dossier).map_err(io::Error::other)?;
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, &path)
    }

    fn load_all(&self) -> io::Result<Vec<CaseDossier>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = fs::read(&path)?;
            let dossier: CaseDossier = serde_json::from_slice(&bytes)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
            out.push(dossier);
        }
        out.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then_with(|| a.case_id().cmp(b.case_id())));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Scenario;
    use crate::clock::Timestamp;
    use crate::workflow::PipelineMode;

    #[test]
    fn dossiers_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let store = FileCaseStore::open(dir.path().join("cases")).unwrap();
        let mut submission = Scenario::bundled("case-A-wiring").unwrap().submission;
        submission.submission_id = "../odd/id".into();
        let dossier = CaseDossier::new(submission, PipelineMode::AgentCritic, Timestamp(7));
        store.save(&dossier).unwrap();
        store.save(&dossier).unwrap();
        let loaded = store.load_all().unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].case_id(), "../odd/id");
        assert_eq!(serde_json::to_value(&loaded[0]).unwrap(), serde_json::to_value(&dossier).unwrap());
    }
}
