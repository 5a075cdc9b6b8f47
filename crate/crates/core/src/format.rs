//! Number rendering and file output helpers shared by the CSV writers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Renders `x` with six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        // rounding can carry into a new leading digit (9.999996 -> 10.00000)
        trim_fraction(&s)
    } else {
        let s = format!("{:.5e}", x);
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{}", trim_fraction(mantissa), e),
            None => s,
        }
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(0.1695155), "0.169516");
        assert_eq!(sig6(0.0544), "0.0544");
        assert_eq!(sig6(-0.05), "-0.05");
        assert_eq!(sig6(123.4567891), "123.457");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(1.23456789e-7), "1.23457e-7");
        assert_eq!(sig6(0.00012345678), "0.000123457");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a").unwrap();
        write_atomic(&p, b"bc").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"bc");
    }
}
