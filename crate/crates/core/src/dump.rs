//! Sector-blocked CSV dump of Fock operators.
//!
//! ```text
//! # wedgelab operator dump
//! # sectors: 1,4,10
//! src_sector,tgt_sector,row,col,re,im
//! 0,1,2,0,1.0,0.0
//! ```
//!
//! `row` and `col` are local to the target and source sectors. Only nonzero entries are written,
//! in row-major order of the global matrix, with floats in shortest round-trip form.

use crate::error::{LabError, Result};
use crate::fock::{FockOperator, FockSpace};
use crate::linalg::c;
use crate::sparse::CsrMatrix;

const HEADER: &str = "src_sector,tgt_sector,row,col,re,im";

fn sector_of(offsets: &[usize], index: usize) -> usize {
    offsets.partition_point(|&o| o <= index) - 1
}

pub fn operator_to_csv(op: &FockOperator) -> String {
    let offsets = op.offsets();
    let dims: Vec<String> = offsets.windows(2).map(|w| (w[1] - w[0]).to_string()).collect();
    let mut out = format!("# wedgelab operator dump\n# sectors: {}\n{HEADER}\n", dims.join(","));
    for (r, col, v) in op.matrix.iter() {
        if v == c(0.0, 0.0) {
            continue;
        }
        let (t, s) = (sector_of(offsets, r), sector_of(offsets, col));
        out.push_str(&format!(
            "{s},{t},{},{},{:?},{:?}\n",
            r - offsets[t],
            col - offsets[s],
            v.re,
            v.im
        ));
    }
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("operator dump line {line}: {msg}"))
}

/// Reads a dump back onto `space`; the recorded sector dimensions must match.
pub fn operator_from_csv(space: &FockSpace, text: &str) -> Result<FockOperator> {
    let offsets = space.offsets();
    let expected: Vec<usize> = space.sector_dims();
    let mut triplets = Vec::new();
    let mut seen_header = false;
    for (k, line) in text.lines().enumerate() {
        let n = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# sectors:") {
            let dims: Vec<usize> = rest
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| bad(n, e)))
                .collect::<Result<_>>()?;
            if dims != expected {
                return Err(LabError::DimensionMismatch(format!(
                    "dump has sectors {dims:?}, space has {expected:?}"
                )));
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != HEADER {
                return Err(bad(n, "missing column header"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n, format!("expected 6 fields, found {}", f.len())));
        }
        let idx = |i: usize| f[i].parse::<usize>().map_err(|e| bad(n, e));
        let val = |i: usize| f[i].parse::<f64>().map_err(|e| bad(n, e));
        let (s, t, row, col) = (idx(0)?, idx(1)?, idx(2)?, idx(3)?);
        if s >= expected.len() || t >= expected.len() || row >= expected[t] || col >= expected[s] {
            return Err(bad(n, "index outside the sector layout"));
        }
        triplets.push((offsets[t] + row, offsets[s] + col, c(val(4)?, val(5)?)));
    }
    if !seen_header {
        return Err(LabError::Config("operator dump has no column header".into()));
    }
    FockOperator::from_matrix(space, CsrMatrix::from_triplets(space.dim(), space.dim(), triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::create;
    use crate::onepspace::{make_grid, OneParticleVector};
    use crate::scatfunc::ScatteringFunction;

    #[test]
    fn round_trip_is_exact() {
        let g = make_grid(2.0, 4, 1.0).unwrap();
        let s2 = ScatteringFunction::strip_blaschke(vec![0.4]).unwrap();
        let space = FockSpace::s2_twisted(g.clone(), 1, 3, s2).unwrap();
        let psi = OneParticleVector::from_fn(&g, |t| c((-t * t).exp(), 0.3 * t));
        let op = create(&space, &psi, 0).unwrap();
        let text = operator_to_csv(&op);
        let dims: Vec<String> = space.sector_dims().iter().map(|d| d.to_string()).collect();
        assert_eq!(text.lines().nth(1).unwrap(), format!("# sectors: {}", dims.join(",")));
        let back = operator_from_csv(&space, &text).unwrap();
        assert_eq!(back.to_dense(), op.to_dense());
        // Creation maps sector n to n+1 only.
        assert!(text.lines().skip(3).all(|l| {
            let f: Vec<usize> = l.split(',').take(2).map(|x| x.parse().unwrap()).collect();
            f[1] == f[0] + 1
        }));
    }

    #[test]
    fn rejects_wrong_layout() {
        let g = make_grid(2.0, 3, 1.0).unwrap();
        let a = FockSpace::bosonic(g.clone(), 1, 2).unwrap();
        let b = FockSpace::bosonic(g, 1, 3).unwrap();
        let text = operator_to_csv(&FockOperator::identity(&a));
        assert!(matches!(operator_from_csv(&b, &text), Err(LabError::DimensionMismatch(_))));
        assert!(operator_from_csv(&a, "0,0,0,0,1,0").is_err());
        let broken = text.replace("0,0,0,0,1.0,0.0", "0,0,9,0,1.0,0.0");
        assert!(operator_from_csv(&a, &broken).is_err());
    }
}
