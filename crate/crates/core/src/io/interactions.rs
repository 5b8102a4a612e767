use super::atomic_write;
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

/// Parse raw interaction text: one `user item` pair per line, whitespace
/// separated, columns past the second ignored. Blank lines and lines starting
/// with `#` are skipped. Line numbers in errors are 1-based.
pub fn parse_interactions(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let user = fields.next();
        let item = fields.next();
        match (user, item) {
            (Some(u), Some(i)) => pairs.push((u.to_string(), i.to_string())),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "expected at least two whitespace-separated tokens".into(),
                })
            }
        }
    }
    Ok(pairs)
}

pub fn load_interactions(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    parse_interactions(&text)
}

/// One token per line, in index order.
pub fn save_vocab(path: &Path, tokens: &[String]) -> Result<()> {
    let mut out = String::new();
    for t in tokens {
        out.push_str(t);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

pub fn load_vocab(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Remapped id pairs, one `user item` per line in stored order.
pub fn save_pairs(path: &Path, pairs: &[(u32, u32)]) -> Result<()> {
    let mut out = String::new();
    for (u, i) in pairs {
        out.push_str(&format!("{} {}\n", u, i));
    }
    atomic_write(path, out.as_bytes())
}

pub fn load_pairs(path: &Path) -> Result<Vec<(u32, u32)>> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u32> {
            tok.ok_or(Error::Parse {
                line: idx + 1,
                msg: "expected two ids".into(),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("bad id: {e}"),
            })
        };
        pairs.push((parse(fields.next())?, parse(fields.next())?));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips() {
        let text = "# header\nu1 i1\n\n  u2\ti2 4.5 extra\nu1 i2\n";
        let pairs = parse_interactions(text).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("u1".into(), "i1".into()),
                ("u2".into(), "i2".into()),
                ("u1".into(), "i2".into()),
            ]
        );
    }

    #[test]
    fn reports_line_of_short_row() {
        let err = parse_interactions("u1 i1\nlonely\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pair_and_vocab_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![(0, 2), (1, 0), (0, 1)];
        let pp = dir.path().join("pairs.txt");
        save_pairs(&pp, &pairs).unwrap();
        assert_eq!(load_pairs(&pp).unwrap(), pairs);

        let vocab = vec!["alpha".to_string(), "beta".to_string()];
        let vp = dir.path().join("vocab.txt");
        save_vocab(&vp, &vocab).unwrap();
        assert_eq!(load_vocab(&vp).unwrap(), vocab);
    }
}
