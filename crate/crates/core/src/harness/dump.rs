//! Bit-exact output formats: field dumps, cross-section files, and the run
//! manifest. Floats serialize as the shortest decimal that round-trips the
//! binary double, so write-then-parse is lossless and re-runs are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

const FIELD_HEADER: &str = "# moment-solve field v1";
const MANIFEST_HEADER: &str = "# moment-solve manifest v1";

/// Render a field dump.
///
/// Line 1: header; line 2: `dim D`; line 3: `n n1 [n2 [n3]]`;
/// line 4: `bounds lo1 hi1 [...]`; then node values in flat (row-major,
/// last-axis-fastest) order, one row of the last axis per line.
pub fn format_field_dump(field: &ScalarField) -> String {
    let g = field.grid();
    let dim = g.dim();
    let mut out = String::new();
    out.push_str(FIELD_HEADER);
    out.push('\n');
    let _ = writeln!(out, "dim {dim}");
    out.push('n');
    for a in 0..dim {
        let _ = write!(out, " {}", g.num_nodes_axis(a));
    }
    out.push('\n');
    out.push_str("bounds");
    for a in 0..dim {
        let _ = write!(out, " {} {}", g.lo()[a], g.hi()[a]);
    }
    out.push('\n');
    let last_n = g.num_nodes_axis(dim - 1);
    for (i, v) in field.values().iter().enumerate() {
        if i % last_n != 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
        if (i + 1) % last_n == 0 {
            out.push('\n');
        }
    }
    out
}

pub fn write_field_dump(field: &ScalarField, path: &Path) -> Result<()> {
    std::fs::write(path, format_field_dump(field))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_field_dump_str(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    if header != FIELD_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected `{FIELD_HEADER}`, found `{header}`"),
        });
    }
    let (_, dim_line) = lines.next().ok_or(Error::Parse {
        line: 2,
        message: "missing dim line".into(),
    })?;
    let dim: usize = dim_line
        .strip_prefix("dim ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or(Error::Parse {
            line: 2,
            message: format!("bad dim line `{dim_line}`"),
        })?;
    let (_, n_line) = lines.next().ok_or(Error::Parse {
        line: 3,
        message: "missing n line".into(),
    })?;
    let n: Vec<usize> = n_line
        .strip_prefix("n ")
        .map(|s| {
            s.split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .transpose()
        .ok()
        .flatten()
        .ok_or(Error::Parse {
            line: 3,
            message: format!("bad n line `{n_line}`"),
        })?;
    if n.len() != dim {
        return Err(Error::Parse {
            line: 3,
            message: format!("n has {} entries, dim is {dim}", n.len()),
        });
    }
    let (_, b_line) = lines.next().ok_or(Error::Parse {
        line: 4,
        message: "missing bounds line".into(),
    })?;
    let bounds: Vec<f64> = b_line
        .strip_prefix("bounds ")
        .map(|s| {
            s.split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .transpose()
        .ok()
        .flatten()
        .ok_or(Error::Parse {
            line: 4,
            message: format!("bad bounds line `{b_line}`"),
        })?;
    if bounds.len() != 2 * dim {
        return Err(Error::Parse {
            line: 4,
            message: format!("bounds has {} entries, expected {}", bounds.len(), 2 * dim),
        });
    }
    let lo: Vec<f64> = (0..dim).map(|a| bounds[2 * a]).collect();
    let hi: Vec<f64> = (0..dim).map(|a| bounds[2 * a + 1]).collect();
    let grid = Grid::new(&lo, &hi, &n)?;
    let rows_expected = grid.node_count() / n[dim - 1];
    let mut values = Vec::with_capacity(grid.node_count());
    let mut rows_found = 0;
    for (i, row) in lines {
        let line = i + 1;
        if row.trim().is_empty() {
            continue;
        }
        rows_found += 1;
        if rows_found > rows_expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {rows_expected} value rows, found more"),
            });
        }
        let mut count = 0;
        for tok in row.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value `{tok}`"),
            })?;
            values.push(v);
            count += 1;
        }
        if count != n[dim - 1] {
            return Err(Error::Parse {
                line,
                message: format!("row has {count} values, expected {}", n[dim - 1]),
            });
        }
    }
    if rows_found != rows_expected {
        return Err(Error::Parse {
            line: 4 + rows_found,
            message: format!("expected {rows_expected} value rows, found {rows_found}"),
        });
    }
    ScalarField::from_values(&grid, values)
}

pub fn parse_field_dump(path: &Path) -> Result<ScalarField> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_field_dump_str(&text)
}

/// Two-column `coordinate value` text, one line per node on the section.
pub fn format_cross_section(section: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (c, v) in section {
        let _ = writeln!(out, "{c} {v}");
    }
    out
}

/// Ordered key-value manifest, deterministic by construction. Wall times are
/// excluded; they go to a sibling timings file.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
    files: Vec<String>,
}

impl RunManifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_file(&mut self, path: impl Into<String>) {
        self.files.push(path.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(MANIFEST_HEADER);
        out.push('\n');
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        for f in &self.files {
            let _ = writeln!(out, "file = {f}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_function;
    use proptest::prelude::*;

    #[test]
    fn dump_round_trip_is_bit_identical() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 7]).unwrap();
        let u = sample_function(&g, |x| (31.7 * x[0] + 0.1).sin() * x[1].exp()).unwrap();
        let text = format_field_dump(&u);
        let back = parse_field_dump_str(&text).unwrap();
        assert_eq!(back.grid(), u.grid());
        assert_eq!(back.values(), u.values());
    }

    #[test]
    fn dump_round_trip_3d() {
        let g = Grid::new(&[0.0, -1.0, 0.5], &[1.0, 1.0, 2.5], &[5, 6, 7]).unwrap();
        let u = sample_function(&g, |x| x[0] * 1.3 + x[1] * x[2]).unwrap();
        let back = parse_field_dump_str(&format_field_dump(&u)).unwrap();
        assert_eq!(back.values(), u.values());
        assert_eq!(back.grid(), u.grid());
    }

    #[test]
    fn hand_written_zero_dump() {
        let text = "\
# moment-solve field v1
dim 2
n 5 5
bounds 0 1 0 1
0 0 0 0 0
0 0 0 0 0
0 0 0 0 0
0 0 0 0 0
0 0 0 0 0
";
        let f = parse_field_dump_str(text).unwrap();
        assert_eq!(f.grid().num_nodes_axis(0), 5);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncated_dump_reports_row_counts() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        let u = sample_function(&g, |x| x[0]).unwrap();
        let text = format_field_dump(&u);
        let truncated: Vec<&str> = text.lines().take(7).collect();
        match parse_field_dump_str(&truncated.join("\n")) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("expected 5"), "{message}");
                assert!(message.contains("found 3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_an_error() {
        let text = "# moment-solve field v2\ndim 2\nn 5 5\nbounds 0 1 0 1\n";
        match parse_field_dump_str(text) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_is_deterministic_text() {
        let mut m = RunManifest::default();
        m.push("case", "test1");
        m.push("stage0_eps", 0.001);
        m.push_file("test1.field");
        let a = m.render();
        let b = m.render();
        assert_eq!(a, b);
        assert!(a.starts_with(MANIFEST_HEADER));
        assert!(a.contains("stage0_eps = 0.001"));
        assert!(a.contains("file = test1.field"));
    }

    proptest! {
        #[test]
        fn dump_values_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 25)) {
            let g = Grid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
            let u = crate::grid::ScalarField::from_values(&g, values).unwrap();
            let back = parse_field_dump_str(&format_field_dump(&u)).unwrap();
            prop_assert_eq!(back.values(), u.values());
        }
    }
}
