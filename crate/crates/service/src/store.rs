use std::path::PathBuf;
use std::sync::Arc;

use arc_swap::ArcSwapOption;
use covarc_core::ingest::LoadOptions;
use covarc_core::{DataSnapshot, IngestError};
use tokio::sync::Mutex;

/// The current snapshot behind an atomically swapped pointer.
///
/// Readers take a full `Arc` and keep using it for the whole request, so a
/// reload midway through never mixes two snapshots.
pub struct SnapshotStore {
    current: ArcSwapOption<DataSnapshot>,
    dir: PathBuf,
    options: LoadOptions,
    // one reload at a time; readers never take it
    reloading: Mutex<()>,
}

impl SnapshotStore {
    pub fn new(dir: PathBuf, options: LoadOptions) -> Self {
        SnapshotStore {
            current: ArcSwapOption::empty(),
            dir,
            options,
            reloading: Mutex::new(()),
        }
    }

    pub fn with_snapshot(snapshot: impl Into<Arc<DataSnapshot>>) -> Self {
        let store = SnapshotStore::new(PathBuf::new(), LoadOptions::default());
        store.replace(snapshot);
        store
    }

    pub fn get(&self) -> Option<Arc<DataSnapshot>> {
        self.current.load_full()
    }

    pub fn replace(&self, snapshot: impl Into<Arc<DataSnapshot>>) {
        self.current.store(Some(snapshot.into()));
    }

    /// Load the directory off to the side and swap it in. On failure the
    /// previous snapshot stays current.
    pub async fn reload(&self) -> Result<Arc<DataSnapshot>, IngestError> {
        let _guard = self.reloading.lock().await;
        let dir = self.dir.clone();
        let options = self.options.clone();
        let loaded = tokio::task::spawn_blocking(move || DataSnapshot::load_dir(&dir, &options))
            .await
            .expect("snapshot loader panicked")?;
        for w in loaded.warnings() {
            tracing::warn!(warning = %w, "snapshot warning");
        }
        let loaded = Arc::new(loaded);
        self.current.store(Some(loaded.clone()));
        tracing::info!(
            snapshot_time = %loaded.snapshot_time(),
            regions = loaded.region_count(),
            dir = %self.dir.display(),
            "snapshot loaded"
        );
        Ok(loaded)
    }
}
