//! Minimal `key = value` configuration format shared by the gas-schedule
//! loader and the CLI flag overrides. Blank lines and `#` comments are
//! ignored; keys must be unique.

use std::collections::BTreeMap;

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`, got `{line}`", lineno + 1));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        if pairs.insert(key.clone(), value).is_some() {
            return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_skips_comments() {
        let pairs = parse_key_values("# gas\n\n a = 1 \nb=two\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs["a"], "1");
        assert_eq!(pairs["b"], "two");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_key_values("just words").is_err());
        assert!(parse_key_values("= 3").is_err());
        assert!(parse_key_values("a = 1\na = 2").is_err());
    }
}
