use smoothsec::bundle::{BUNDLE_CATALOG, SECTION_CATALOG, WIDTH_CATALOG};
use smoothsec::homotopy::HOMOTOPY_CATALOG;
use smoothsec::manifold::MANIFOLD_CATALOG;
use std::fmt::Write;

/// Catalog ids with one-line descriptions, grouped by kind.
pub fn list_catalog() -> String {
    let groups: [(&str, &[(&str, &str)]); 5] = [
        ("manifolds", MANIFOLD_CATALOG),
        ("bundles", BUNDLE_CATALOG),
        ("sections", SECTION_CATALOG),
        ("tube widths", WIDTH_CATALOG),
        ("homotopies", HOMOTOPY_CATALOG),
    ];
    let mut out = String::new();
    for (title, items) in groups {
        writeln!(out, "{title}:").unwrap();
        let w = items.iter().map(|(id, _)| id.len()).max().unwrap_or(0);
        for (id, desc) in items {
            writeln!(out, "  {id:<w$}  {desc}").unwrap();
        }
    }
    out
}
