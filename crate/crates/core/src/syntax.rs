//! `name(a, b, ...)` call syntax shared by the config-level specs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<f64>,
}

/// Parses `name` or `name(x1, x2, ...)` with numeric arguments.
pub fn parse_call(text: &str) -> Result<Call> {
    let text = text.trim();
    let (name, rest) = match text.find('(') {
        Some(i) => (&text[..i], Some(&text[i + 1..])),
        None => (text, None),
    };
    let name = name.trim().to_ascii_lowercase();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(Error::input(format!("malformed name in `{text}`")));
    }
    let args = match rest {
        None => Vec::new(),
        Some(rest) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::input(format!("missing `)` in `{text}`")))?;
            parse_numbers(inner)?
        }
    };
    Ok(Call { name, args })
}

/// Comma separated numbers, ignoring brackets and blanks.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    let cleaned: String = text
        .chars()
        .map(|c| if c == '[' || c == ']' || c == '(' || c == ')' { ' ' } else { c })
        .collect();
    cleaned
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::input(format!("`{s}` is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calls() {
        assert_eq!(
            parse_call(" shifted(0.5, -1) ").unwrap(),
            Call {
                name: "shifted".into(),
                args: vec![0.5, -1.0]
            }
        );
        assert!(parse_call("area").unwrap().args.is_empty());
        assert!(parse_call("f(1").is_err());
        assert!(parse_call("f(x)").is_err());
        assert!(parse_call("").is_err());
    }
}
