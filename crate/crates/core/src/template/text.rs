//! `{token}` text: parsing, token checks, and number formatting for captions.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Lit(String),
    Token { name: String, arg: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("unknown token {{{0}}}")]
    UnknownToken(String),
    #[error("unterminated token starting at byte {0}")]
    Unterminated(usize),
    #[error("token {{{0}}} {1}")]
    BadArgument(String, &'static str),
}

/// Tokens available to analyst-written custom text.
pub const CUSTOM_TOKENS: [&str; 7] = ["measure", "dimension", "value", "total", "goal", "pct_of_goal", "time-frame"];

/// Custom-text tokens that take a `(group)` argument.
const GROUP_TOKENS: [&str; 3] = ["value", "goal", "pct_of_goal"];

/// Splits text into literals and tokens. `{{` and `}}` stand for literal braces.
pub fn parse_text(s: &str) -> Result<Vec<Segment>, TextError> {
    let mut out = Vec::new();
    let mut lit = String::new();
    let mut rest = s;
    let mut offset = 0;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") || rest.starts_with("}}") {
            lit.push(c);
            rest = &rest[2..];
            offset += 2;
            continue;
        }
        if c == '{' {
            let Some(close) = rest.find('}') else {
                return Err(TextError::Unterminated(offset));
            };
            let inner = rest[1..close].trim();
            let (name, arg) = match inner.find('(') {
                Some(open) if inner.ends_with(')') => {
                    (inner[..open].trim(), Some(inner[open + 1..inner.len() - 1].trim().to_string()))
                }
                Some(_) => return Err(TextError::BadArgument(inner.to_string(), "has an unclosed argument")),
                None => (inner, None),
            };
            if !lit.is_empty() {
                out.push(Segment::Lit(std::mem::take(&mut lit)));
            }
            out.push(Segment::Token {
                name: name.to_string(),
                arg,
            });
            rest = &rest[close + 1..];
            offset += close + 1;
            continue;
        }
        lit.push(c);
        rest = &rest[c.len_utf8()..];
        offset += c.len_utf8();
    }
    if !lit.is_empty() {
        out.push(Segment::Lit(lit));
    }
    Ok(out)
}

/// Checks custom text against [`CUSTOM_TOKENS`].
pub fn check_text_expression(s: &str) -> Result<Vec<Segment>, TextError> {
    let segments = parse_text(s)?;
    for seg in &segments {
        if let Segment::Token { name, arg } = seg {
            if !CUSTOM_TOKENS.contains(&name.as_str()) {
                return Err(TextError::UnknownToken(name.clone()));
            }
            let wants_arg = GROUP_TOKENS.contains(&name.as_str());
            match arg {
                None if wants_arg => return Err(TextError::BadArgument(name.clone(), "needs a (group) argument")),
                Some(_) if !wants_arg => return Err(TextError::BadArgument(name.clone(), "takes no argument")),
                Some(a) if a.is_empty() => return Err(TextError::BadArgument(name.clone(), "has an empty argument")),
                _ => {}
            }
        }
    }
    Ok(segments)
}

/// Thousands separators, at most two decimals, no trailing zeros.
pub fn format_value(n: f64) -> String {
    let rounded = (n * 100.0).round() / 100.0;
    let neg = rounded < 0.0;
    let text = format!("{:.2}", rounded.abs());
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let mut grouped = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let frac = frac.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&grouped);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

/// A ratio as a whole percentage, e.g. `0.6` → `60%`.
pub fn format_percent(ratio: f64) -> String {
    let pct = (ratio * 100.0).round();
    format!("{}%", if pct == 0.0 { 0.0 } else { pct })
}

/// Inverse of [`format_value`] for tests and caption cross-checks.
pub fn parse_formatted(s: &str) -> Option<f64> {
    s.replace(',', "").parse().ok()
}
