use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::model::Catalog;
use super::validate::validate_catalog;
use super::CatalogError;

/// Holder of the published catalog. Readers take an `Arc` snapshot and keep
/// it for the whole query; publishing swaps the pointer atomically.
#[derive(Debug)]
pub struct CatalogStore {
    current: RwLock<Arc<Catalog>>,
    writer: Mutex<()>,
}

impl Default for CatalogStore {
    fn default() -> Self {
        CatalogStore { current: RwLock::new(Arc::new(Catalog::default())), writer: Mutex::new(()) }
    }
}

impl CatalogStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> Arc<Catalog> {
        self.current.read().clone()
    }

    /// Validates and publishes `c` under a version strictly greater than the
    /// current one (and no smaller than `c.version`).
    pub fn publish(&self, mut c: Catalog) -> Result<Arc<Catalog>, CatalogError> {
        let report = validate_catalog(&c);
        if !report.is_ok() {
            return Err(CatalogError::InvalidCatalog(report));
        }
        let _guard = self.writer.lock();
        let next = self.current.read().version + 1;
        c.version = c.version.max(next);
        let published = Arc::new(c);
        *self.current.write() = published.clone();
        Ok(published)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_catalog;
    use crate::testing::ACME_CATALOG;

    #[test]
    fn snapshots_survive_publish() {
        let store = CatalogStore::new();
        let acme = load_catalog(ACME_CATALOG).unwrap();
        let v1 = store.publish(acme.clone()).unwrap();
        let held = store.snapshot();
        let v2 = store.publish(acme).unwrap();
        assert_eq!(held.version, v1.version);
        assert!(v2.version > v1.version);
        assert_eq!(store.snapshot().version, v2.version);
    }

    #[test]
    fn invalid_catalog_is_refused() {
        let store = CatalogStore::new();
        let mut c = load_catalog(ACME_CATALOG).unwrap();
        c.mappings.clear();
        assert!(matches!(store.publish(c), Err(CatalogError::InvalidCatalog(_))));
        assert_eq!(store.snapshot().version, 0);
    }

    #[test]
    fn versions_strictly_increase() {
        let store = CatalogStore::new();
        let c = load_catalog(ACME_CATALOG).unwrap();
        let versions: Vec<u64> = (0..5).map(|_| store.publish(c.clone()).unwrap().version).collect();
        assert!(versions.windows(2).all(|w| w[0] < w[1]));
    }
}
