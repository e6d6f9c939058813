//! Wavefront OBJ export of a surface sampled on a rectangular index range.

use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use plm_core::{PlmError, Result};

/// Writes vertices for every index in `lo..hi` (exclusive) where `vertex` returns a
/// point, then splits each cell along its `(+1,+1)` diagonal into two triangles.
/// Cells with a missing corner are skipped. Returns the vertex count.
pub fn write(path: &Path, lo: [i64; 2], hi: [i64; 2], vertex: impl Fn(i64, i64) -> Option<[f64; 3]>) -> Result<usize> {
    let io = |e: std::io::Error| PlmError::Io(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let mut index = HashMap::new();
    for b in lo[1]..hi[1] {
        for a in lo[0]..hi[0] {
            if let Some(p) = vertex(a, b) {
                if p.iter().all(|v| v.is_finite()) {
                    writeln!(out, "v {} {} {}", p[0], p[1], p[2]).map_err(io)?;
                    index.insert((a, b), index.len() + 1);
                }
            }
        }
    }
    for b in lo[1]..hi[1] - 1 {
        for a in lo[0]..hi[0] - 1 {
            let corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)].map(|k| index.get(&k).copied());
            if let [Some(v00), Some(v10), Some(v11), Some(v01)] = corners {
                writeln!(out, "f {v00} {v10} {v11}").map_err(io)?;
                writeln!(out, "f {v00} {v11} {v01}").map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)?;
    Ok(index.len())
}
