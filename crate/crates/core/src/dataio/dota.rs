use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Quadrilateral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub quad: Quadrilateral,
    pub category: String,
    pub difficult: bool,
}

/// Parses `x1 y1 x2 y2 x3 y3 x4 y4 category difficult` lines. Header lines
/// (such as `imagesource:...` or `gsd:...`) before the first record are
/// skipped; blank lines are ignored anywhere.
pub fn parse_dota(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some(first) = tokens.first() else {
            continue;
        };
        if out.is_empty() && first.parse::<f64>().is_err() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        if tokens.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", tokens.len())));
        }
        let mut coords = [0.0; 8];
        for (c, tok) in coords.iter_mut().zip(&tokens[..8]) {
            *c = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad coordinate {tok:?}")))?;
        }
        let difficult = match tokens[9] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("difficult flag must be 0 or 1, found {other:?}"))),
        };
        out.push(AnnotationRecord {
            quad: Quadrilateral::from_coords(coords).map_err(|e| err(e.to_string()))?,
            category: tokens[8].to_string(),
            difficult,
        });
    }
    Ok(out)
}

pub fn format_dota(records: &[AnnotationRecord]) -> String {
    let mut s = String::new();
    for r in records {
        for c in r.quad.coords() {
            let _ = write!(s, "{c} ");
        }
        let _ = writeln!(s, "{} {}", r.category, u8::from(r.difficult));
    }
    s
}
