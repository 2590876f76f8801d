//! Word-pair similarity files: `word1<TAB>word2<TAB>score` per line.

use std::fs;
use std::path::Path;

use crate::error::{Result, SalError};
use crate::io::utf8_lines;
use crate::metrics::ScoredPair;

pub fn parse_pairs(bytes: &[u8]) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (line_no, line) in utf8_lines(bytes)? {
        let fields: Vec<&str> = line.split('\t').collect();
        let [left, right, score] = fields.as_slice() else {
            return Err(SalError::parse(
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| SalError::parse(line_no, format!("'{score}' is not a number")))?;
        out.push(ScoredPair {
            left: left.to_string(),
            right: right.to_string(),
            score,
        });
    }
    Ok(out)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<ScoredPair>> {
    parse_pairs(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let p = parse_pairs(b"cat\tdog\t7.5\ncar\tbus\t6\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].score, 6.0);
        assert!(matches!(
            parse_pairs(b"cat dog 7.5\n"),
            Err(SalError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_pairs(b"a\tb\t1\nc\td\tx\n"),
            Err(SalError::Parse { line: 2, .. })
        ));
    }
}
