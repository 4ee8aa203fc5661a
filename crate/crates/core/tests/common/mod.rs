#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ctxsvc::composition::CompositionExpr;
use ctxsvc::model::Catalog;
pub mod props;
pub mod random;

use ctxsvc::pipeline::{load_catalog, load_expr, transform, RunOptions, Transformed};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub struct Fixture {
    pub catalog: Catalog,
    pub expr: CompositionExpr,
    pub opts: RunOptions,
}

/// Loads `<stem>.svc`, `<stem>.expr`, and `<stem>.toml`.
pub fn load(stem: &str) -> Fixture {
    let catalog = load_catalog(&[fixture(&format!("{stem}.svc"))]).unwrap();
    let expr = load_expr(&format!("@{}", fixture(&format!("{stem}.expr")).display()), &catalog).unwrap();
    let opts = RunOptions::load(&fixture(&format!("{stem}.toml")))
        .unwrap()
        .typed_for(&catalog)
        .unwrap();
    Fixture { catalog, expr, opts }
}

impl Fixture {
    pub fn transform(&self) -> Transformed {
        transform(&self.expr, &self.catalog, &self.opts).unwrap()
    }
}

/// Compares `actual` with the committed golden file, or rewrites the file
/// when `CTXSVC_BLESS` is set.
pub fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("CTXSVC_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}; rerun with CTXSVC_BLESS=1", path.display()));
    assert!(expected == actual, "{name} differs from the golden file:\n{actual}");
}
