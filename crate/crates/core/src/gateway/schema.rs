//! Structural parsing of provider replies.
//!
//! Replies are validated by extracting tagged fields (`RATING: 4`). A field
//! tag may appear anywhere in the text, including several on one line
//! (`yes:0.9 no:0.1`). Schema violations are reported as plain strings so the
//! gateway can decide whether to re-prompt.

use std::collections::BTreeMap;

use regex::Regex;

/// Value domain of a single tagged field.
#[derive(Debug, Clone)]
pub enum FieldKind {
    /// Integer constrained to an inclusive range.
    Int { min: i64, max: i64 },
    /// Unconstrained real number; callers clamp where needed.
    Float,
    /// One of a fixed set of labels, case-insensitive, `[BRACKETS]` tolerated.
    Choice(Vec<&'static str>),
    /// Free text up to the next recognized tag.
    Text,
    /// Every occurrence of the tag, with comma-separated values flattened.
    List,
    /// Every occurrence of the tag, one value per occurrence (commas kept).
    Lines,
}

#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub fn new(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: true,
        }
    }

    pub fn optional(name: &'static str, kind: FieldKind) -> Self {
        Self {
            name,
            kind,
            required: false,
        }
    }
}

/// Machine-checkable description of what a template expects back.
#[derive(Debug, Clone)]
pub enum ResponseSchema {
    /// Any non-empty text; parsed into a single `TEXT` field.
    FreeText,
    /// Tagged fields forming a single record.
    Fields(Vec<FieldSpec>),
    /// The field set repeats; the first field's tag starts a new block.
    Repeated { fields: Vec<FieldSpec>, min_blocks: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<String>),
}

/// One parsed record: field name (upper-case) to value.
pub type Block = BTreeMap<String, FieldValue>;

/// Validated reply content.
#[derive(Debug, Clone, Default)]
pub struct ParsedResponse {
    pub blocks: Vec<Block>,
}

impl ParsedResponse {
    fn first(&self) -> Option<&Block> {
        self.blocks.first()
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.first()?.get(&name.to_uppercase())? {
            FieldValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn float(&self, name: &str) -> Option<f64> {
        match self.first()?.get(&name.to_uppercase())? {
            FieldValue::Float(v) => Some(*v),
            FieldValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match self.first()?.get(&name.to_uppercase())? {
            FieldValue::Text(v) => Some(v.as_str()),
            _ => None,
        }
    }

    pub fn list(&self, name: &str) -> Vec<String> {
        match self.first().and_then(|b| b.get(&name.to_uppercase())) {
            Some(FieldValue::List(v)) => v.clone(),
            _ => Vec::new(),
        }
    }

    /// The whole reply when the schema was `FreeText`.
    pub fn free_text(&self) -> Option<&str> {
        self.text("TEXT")
    }
}

/// Position of one tag occurrence in the raw text.
struct TagHit {
    field_idx: usize,
    start: usize,
    value_start: usize,
}

fn find_tag_hits(raw: &str, fields: &[FieldSpec]) -> Vec<TagHit> {
    let mut hits = Vec::new();
    for (idx, spec) in fields.iter().enumerate() {
        let pattern = format!(r"(?i)\b{}\s*:\s*", regex::escape(spec.name));
        let re = Regex::new(&pattern).expect("static field pattern");
        for m in re.find_iter(raw) {
            hits.push(TagHit {
                field_idx: idx,
                start: m.start(),
                value_start: m.end(),
            });
        }
    }
    hits.sort_by_key(|h| h.start);
    hits
}

fn is_empty_marker(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || v.eq_ignore_ascii_case("none") || v == "-"
}

fn parse_scalar(kind: &FieldKind, raw_value: &str) -> Result<FieldValue, String> {
    let line_end = raw_value.find('\n').unwrap_or(raw_value.len());
    let scalar = raw_value[..line_end].trim();
    match kind {
        FieldKind::Int { min, max } => {
            let re = Regex::new(r"^[+-]?\d+").unwrap();
            let m = re
                .find(scalar)
                .ok_or_else(|| format!("`{scalar}` is not an integer"))?;
            let v: i64 = m.as_str().parse().map_err(|_| "integer overflow".to_string())?;
            if v < *min || v > *max {
                return Err(format!("{v} outside {min}..{max}"));
            }
            Ok(FieldValue::Int(v))
        }
        FieldKind::Float => {
            let re = Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)").unwrap();
            let m = re
                .find(scalar)
                .ok_or_else(|| format!("`{scalar}` is not a number"))?;
            let v: f64 = m.as_str().parse().map_err(|_| "bad float".to_string())?;
            Ok(FieldValue::Float(v))
        }
        FieldKind::Choice(options) => {
            let cleaned = scalar.trim_matches(|c| c == '[' || c == ']' || c == '.').trim();
            let hit = options
                .iter()
                .find(|o| o.eq_ignore_ascii_case(cleaned))
                .ok_or_else(|| format!("`{scalar}` not one of {options:?}"))?;
            Ok(FieldValue::Text(hit.to_string()))
        }
        FieldKind::Text => {
            let text = raw_value.trim();
            if text.is_empty() {
                return Err("empty text value".to_string());
            }
            Ok(FieldValue::Text(text.to_string()))
        }
        FieldKind::List | FieldKind::Lines => unreachable!("lists handled separately"),
    }
}

fn parse_block(raw: &str, fields: &[FieldSpec]) -> Result<Block, String> {
    let hits = find_tag_hits(raw, fields);
    let mut block = Block::new();
    let mut lists: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for (pos, hit) in hits.iter().enumerate() {
        let value_end = hits
            .get(pos + 1)
            .map(|next| next.start)
            .unwrap_or(raw.len());
        let raw_value = &raw[hit.value_start..value_end];
        let spec = &fields[hit.field_idx];
        match &spec.kind {
            FieldKind::List => {
                let line_end = raw_value.find('\n').unwrap_or(raw_value.len());
                let line = &raw_value[..line_end];
                let entry = lists.entry(spec.name.to_uppercase()).or_default();
                if !is_empty_marker(line) {
                    entry.extend(
                        line.split(',')
                            .map(str::trim)
                            .filter(|s| !is_empty_marker(s))
                            .map(|s| s.to_string()),
                    );
                }
            }
            FieldKind::Lines => {
                let line_end = raw_value.find('\n').unwrap_or(raw_value.len());
                let line = raw_value[..line_end].trim();
                let entry = lists.entry(spec.name.to_uppercase()).or_default();
                if !is_empty_marker(line) {
                    entry.push(line.to_string());
                }
            }
            kind => {
                let value = parse_scalar(kind, raw_value)
                    .map_err(|e| format!("field {}: {e}", spec.name))?;
                // First occurrence wins for scalars.
                block.entry(spec.name.to_uppercase()).or_insert(value);
            }
        }
    }
    for (name, values) in lists {
        block.insert(name, FieldValue::List(values));
    }

    for spec in fields {
        let key = spec.name.to_uppercase();
        match &spec.kind {
            FieldKind::List | FieldKind::Lines => {
                let entry = block
                    .entry(key)
                    .or_insert_with(|| FieldValue::List(Vec::new()));
                // A required list must carry at least one value.
                if spec.required && matches!(entry, FieldValue::List(v) if v.is_empty()) {
                    return Err(format!("field {} has no values", spec.name));
                }
            }
            _ => {
                if spec.required && !block.contains_key(&key) {
                    return Err(format!("missing required field {}", spec.name));
                }
            }
        }
    }
    Ok(block)
}

impl ResponseSchema {
    /// Validate raw text against the schema.
    pub fn parse(&self, raw: &str) -> Result<ParsedResponse, String> {
        match self {
            ResponseSchema::FreeText => {
                let text = raw.trim();
                if text.is_empty() {
                    return Err("empty reply".to_string());
                }
                let mut block = Block::new();
                block.insert("TEXT".to_string(), FieldValue::Text(text.to_string()));
                Ok(ParsedResponse { blocks: vec![block] })
            }
            ResponseSchema::Fields(fields) => {
                let block = parse_block(raw, fields)?;
                Ok(ParsedResponse { blocks: vec![block] })
            }
            ResponseSchema::Repeated { fields, min_blocks } => {
                let first = fields
                    .first()
                    .expect("repeated schema needs at least one field");
                let pattern = format!(r"(?i)\b{}\s*:", regex::escape(first.name));
                let re = Regex::new(&pattern).unwrap();
                let starts: Vec<usize> = re.find_iter(raw).map(|m| m.start()).collect();
                if starts.len() < *min_blocks {
                    return Err(format!(
                        "expected at least {min_blocks} blocks starting with {}, found {}",
                        first.name,
                        starts.len()
                    ));
                }
                let mut blocks = Vec::new();
                for (i, &start) in starts.iter().enumerate() {
                    let end = starts.get(i + 1).copied().unwrap_or(raw.len());
                    blocks.push(parse_block(&raw[start..end], fields)?);
                }
                Ok(ParsedResponse { blocks })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rating_field() {
        let schema = ResponseSchema::Fields(vec![FieldSpec::new(
            "RATING",
            FieldKind::Int { min: 1, max: 5 },
        )]);
        let parsed = schema.parse("RATING: 4").unwrap();
        assert_eq!(parsed.int("rating"), Some(4));
        assert!(schema.parse("RATING: 6").is_err());
        assert!(schema.parse("nothing here").is_err());
    }

    #[test]
    fn parses_two_floats_on_one_line() {
        let schema = ResponseSchema::Fields(vec![
            FieldSpec::new("YES", FieldKind::Float),
            FieldSpec::optional("NO", FieldKind::Float),
        ]);
        let parsed = schema.parse("yes:0.9 no:0.1").unwrap();
        assert_eq!(parsed.float("YES"), Some(0.9));
        assert_eq!(parsed.float("NO"), Some(0.1));
    }

    #[test]
    fn optional_field_may_be_absent() {
        let schema = ResponseSchema::Fields(vec![
            FieldSpec::new("YES", FieldKind::Float),
            FieldSpec::optional("NO", FieldKind::Float),
        ]);
        let parsed = schema.parse("YES: 1.2").unwrap();
        assert_eq!(parsed.float("YES"), Some(1.2));
        assert_eq!(parsed.float("NO"), None);
    }

    #[test]
    fn choice_accepts_brackets_and_case() {
        let schema = ResponseSchema::Fields(vec![FieldSpec::new(
            "ACTION",
            FieldKind::Choice(vec!["EXIT", "NEXT", "PREVIOUS", "CLICK"]),
        )]);
        let parsed = schema.parse("Action: [next]").unwrap();
        assert_eq!(parsed.text("ACTION"), Some("NEXT"));
        assert!(schema.parse("ACTION: sideways").is_err());
    }

    #[test]
    fn list_field_collects_comma_values_and_repeats() {
        let schema = ResponseSchema::Fields(vec![FieldSpec::optional("WATCH", FieldKind::List)]);
        let parsed = schema.parse("WATCH: i1, i3\nWATCH: i7").unwrap();
        assert_eq!(parsed.list("WATCH"), vec!["i1", "i3", "i7"]);
        let empty = schema.parse("WATCH: none").unwrap();
        assert!(empty.list("WATCH").is_empty());
    }

    #[test]
    fn required_list_needs_at_least_one_value() {
        let schema = ResponseSchema::Fields(vec![FieldSpec::new("CLAIM", FieldKind::List)]);
        assert!(schema.parse("CLAIM: none").is_err());
        assert!(schema.parse("ramble with no tags").is_err());
        assert!(schema.parse("CLAIM: the movie is scary").is_ok());
    }

    #[test]
    fn text_field_runs_to_next_tag() {
        let schema = ResponseSchema::Fields(vec![
            FieldSpec::new("RATING", FieldKind::Int { min: 1, max: 10 }),
            FieldSpec::new("REASON", FieldKind::Text),
        ]);
        let parsed = schema
            .parse("Rating: 7\nReason: solid picks overall,\nbut too mainstream.")
            .unwrap();
        assert_eq!(parsed.int("RATING"), Some(7));
        assert!(parsed.text("REASON").unwrap().contains("too mainstream"));
    }

    #[test]
    fn repeated_blocks_split_on_first_field() {
        let schema = ResponseSchema::Repeated {
            fields: vec![
                FieldSpec::new("AGE", FieldKind::Int { min: 0, max: 130 }),
                FieldSpec::new("OCCUPATION", FieldKind::Text),
            ],
            min_blocks: 2,
        };
        let parsed = schema
            .parse("AGE: 34\nOCCUPATION: engineer\nAGE: 61\nOCCUPATION: retired teacher")
            .unwrap();
        assert_eq!(parsed.blocks.len(), 2);
        assert!(schema.parse("AGE: 34\nOCCUPATION: engineer").is_err());
    }

    #[test]
    fn free_text_rejects_empty() {
        assert!(ResponseSchema::FreeText.parse("   ").is_err());
        let parsed = ResponseSchema::FreeText.parse(" enjoys sci-fi ").unwrap();
        assert_eq!(parsed.free_text(), Some("enjoys sci-fi"));
    }
}
