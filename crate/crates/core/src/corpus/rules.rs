use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};

const DEFAULT_RULES: &str = include_str!("../../rules/default.rules");

/// A whole-line matcher. Literal patterns compare against the trimmed line;
/// regex patterns are anchored at both ends.
#[derive(Debug, Clone)]
pub enum LinePattern {
    Literal(String),
    Regex(Regex),
}

impl LinePattern {
    pub fn matches(&self, trimmed_line: &str) -> bool {
        match self {
            LinePattern::Literal(s) => s == trimmed_line,
            LinePattern::Regex(re) => re.is_match(trimmed_line),
        }
    }

    pub fn source(&self) -> String {
        match self {
            LinePattern::Literal(s) => s.clone(),
            // strip the anchoring added at compile time
            LinePattern::Regex(re) => {
                let s = re.as_str();
                format!("re:{}", &s[4..s.len() - 2])
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CleaningRuleSet {
    strip_symbols: Vec<String>,
    drop_line_patterns: Vec<LinePattern>,
    max_consecutive_newlines: usize,
}

impl Default for CleaningRuleSet {
    fn default() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled default rules are valid")
    }
}

impl CleaningRuleSet {
    pub fn new(
        strip_symbols: impl IntoIterator<Item = String>,
        drop_line_patterns: Vec<LinePattern>,
        max_consecutive_newlines: usize,
    ) -> Result<Self> {
        if max_consecutive_newlines < 1 {
            return Err(Error::invalid(
                "max_consecutive_newlines must be at least 1",
            ));
        }
        let mut symbols: Vec<String> = strip_symbols
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect();
        // longest first so multi-character symbols win over their prefixes
        symbols.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        symbols.dedup();
        Ok(Self {
            strip_symbols: symbols,
            drop_line_patterns,
            max_consecutive_newlines,
        })
    }

    /// The rule text shipped with the crate.
    pub fn default_source() -> &'static str {
        DEFAULT_RULES
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Options,
            Symbols,
            Patterns,
        }
        let mut section = Section::None;
        let mut symbols = Vec::new();
        let mut patterns = Vec::new();
        let mut max_newlines = 2usize;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            match line {
                "[options]" => section = Section::Options,
                "[symbols]" => section = Section::Symbols,
                "[patterns]" => section = Section::Patterns,
                _ => match section {
                    Section::None => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("entry outside of a section: {line:?}"),
                        })
                    }
                    Section::Options => {
                        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                            line: line_no,
                            message: "expected `key = value`".into(),
                        })?;
                        match key.trim() {
                            "max_consecutive_newlines" => {
                                max_newlines = value.trim().parse().map_err(|_| Error::Parse {
                                    line: line_no,
                                    message: format!("invalid count {:?}", value.trim()),
                                })?;
                            }
                            other => {
                                return Err(Error::Parse {
                                    line: line_no,
                                    message: format!("unknown option {other:?}"),
                                })
                            }
                        }
                    }
                    Section::Symbols => symbols.push(line.to_string()),
                    Section::Patterns => {
                        let pattern = match line.strip_prefix("re:") {
                            Some(expr) => {
                                let re = Regex::new(&format!("^(?:{expr})$")).map_err(|e| {
                                    Error::Parse {
                                        line: line_no,
                                        message: format!("bad regex: {e}"),
                                    }
                                })?;
                                LinePattern::Regex(re)
                            }
                            None => LinePattern::Literal(line.to_string()),
                        };
                        patterns.push(pattern);
                    }
                },
            }
        }
        Self::new(symbols, patterns, max_newlines).map_err(|e| match e {
            Error::InvalidArgument(message) => Error::Parse { line: 0, message },
            other => other,
        })
    }

    pub fn strip_symbols(&self) -> &[String] {
        &self.strip_symbols
    }

    pub fn drop_line_patterns(&self) -> &[LinePattern] {
        &self.drop_line_patterns
    }

    pub fn max_consecutive_newlines(&self) -> usize {
        self.max_consecutive_newlines
    }

    pub(crate) fn drops(&self, trimmed_line: &str) -> bool {
        self.drop_line_patterns
            .iter()
            .any(|p| p.matches(trimmed_line))
    }

    pub(crate) fn remove_symbols(&self, line: &str) -> String {
        let mut out = line.to_string();
        loop {
            let before = out.len();
            for sym in &self.strip_symbols {
                if out.contains(sym.as_str()) {
                    out = out.replace(sym.as_str(), "");
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }
}
