//! The agent action grammar.
//!
//! Actions are emitted by the backbone as a single line, e.g.
//!
//! ```text
//! CLICK(id=settings_btn)
//! CLICK(x=120, y=48)
//! TYPE(id=search_box, text="wifi")
//! SCROLL(down)
//! OPEN_APP("Clock")
//! NAVIGATE("back")
//! STOP("done")
//! ```
//!
//! Keywords are case-insensitive and whitespace around tokens is ignored.
//! `Display` renders the canonical form, which `FromStr` accepts back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::task::UIElement;
use crate::text::normalize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid action: {0}")]
pub struct ActionParseError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    TypeText,
    Scroll,
    OpenApp,
    Navigate,
    Stop,
}

impl ActionKind {
    /// Token used for the operation string in Op F1 scoring.
    pub fn op_word(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::TypeText => "type",
            ActionKind::Scroll => "scroll",
            ActionKind::OpenApp => "open_app",
            ActionKind::Navigate => "navigate",
            ActionKind::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScrollDirection {
    fn as_str(self) -> &'static str {
        match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
            ScrollDirection::Left => "left",
            ScrollDirection::Right => "right",
        }
    }
}

impl FromStr for ScrollDirection {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(ScrollDirection::Up),
            "down" => Ok(ScrollDirection::Down),
            "left" => Ok(ScrollDirection::Left),
            "right" => Ok(ScrollDirection::Right),
            other => Err(ActionParseError(format!("unknown scroll direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClickTarget {
    Element(String),
    /// Screen coordinates, matched against element bounds in bounds mode.
    Point { x: i32, y: i32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AgentAction {
    Click(ClickTarget),
    TypeText { target: String, text: String },
    Scroll(ScrollDirection),
    OpenApp(String),
    Navigate(String),
    Stop(Option<String>),
}

impl AgentAction {
    pub fn click(id: impl Into<String>) -> Self {
        AgentAction::Click(ClickTarget::Element(id.into()))
    }

    pub fn type_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        AgentAction::TypeText { target: id.into(), text: text.into() }
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            AgentAction::Click(_) => ActionKind::Click,
            AgentAction::TypeText { .. } => ActionKind::TypeText,
            AgentAction::Scroll(_) => ActionKind::Scroll,
            AgentAction::OpenApp(_) => ActionKind::OpenApp,
            AgentAction::Navigate(_) => ActionKind::Navigate,
            AgentAction::Stop(_) => ActionKind::Stop,
        }
    }

    /// Element id targeted by the action, if any.
    pub fn target(&self) -> Option<&str> {
        match self {
            AgentAction::Click(ClickTarget::Element(id)) => Some(id),
            AgentAction::TypeText { target, .. } => Some(target),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<&str> {
        match self {
            AgentAction::TypeText { text, .. } => Some(text),
            AgentAction::Scroll(d) => Some(d.as_str()),
            AgentAction::OpenApp(v) | AgentAction::Navigate(v) => Some(v),
            AgentAction::Stop(answer) => answer.as_deref(),
            AgentAction::Click(_) => None,
        }
    }

    /// Operation string for Op F1: kind word plus normalized value, element id excluded.
    pub fn op_string(&self) -> String {
        let kind = self.kind().op_word();
        match self.value() {
            Some(v) if !normalize(v).is_empty() => format!("{kind} {}", normalize(v)),
            _ => kind.to_string(),
        }
    }
}

/// `true` iff the kinds agree and every field the kind requires agrees.
/// Element targets compare exactly; text values compare after whitespace and
/// case normalization. A coordinate click never matches an element click here,
/// see [`actions_match_with_bounds`].
pub fn actions_match(pred: &AgentAction, gold: &AgentAction) -> bool {
    actions_match_with_bounds(pred, gold, &[])
}

/// Like [`actions_match`], but a coordinate click matches a gold element click
/// when the point lies inside that element's bounds in `elements`.
pub fn actions_match_with_bounds(pred: &AgentAction, gold: &AgentAction, elements: &[UIElement]) -> bool {
    use AgentAction::*;
    match (pred, gold) {
        (Click(p), Click(g)) => click_targets_match(p, g, elements),
        (TypeText { target: pt, text: pv }, TypeText { target: gt, text: gv }) => {
            pt == gt && normalize(pv) == normalize(gv)
        }
        (Scroll(p), Scroll(g)) => p == g,
        (OpenApp(p), OpenApp(g)) | (Navigate(p), Navigate(g)) => normalize(p) == normalize(g),
        (Stop(_), Stop(_)) => true,
        _ => false,
    }
}

pub(crate) fn click_targets_match(pred: &ClickTarget, gold: &ClickTarget, elements: &[UIElement]) -> bool {
    match (pred, gold) {
        (ClickTarget::Element(p), ClickTarget::Element(g)) => p == g,
        (ClickTarget::Point { x, y }, ClickTarget::Element(g)) => elements
            .iter()
            .find(|e| &e.element_id == g)
            .and_then(|e| e.bounds)
            .is_some_and(|b| b.contains(*x, *y)),
        (ClickTarget::Point { x: px, y: py }, ClickTarget::Point { x: gx, y: gy }) => px == gx && py == gy,
        (ClickTarget::Element(_), ClickTarget::Point { .. }) => false,
    }
}

/// Parses the first line of `text` that is a complete action expression.
pub fn parse_action(text: &str) -> Result<AgentAction, ActionParseError> {
    text.lines()
        .find_map(|line| parse_line(line).ok())
        .ok_or_else(|| ActionParseError(format!("no parseable action in {:?}", excerpt(text))))
}

fn excerpt(text: &str) -> &str {
    crate::text::truncate_chars(text.trim(), 120)
}

fn parse_line(line: &str) -> Result<AgentAction, ActionParseError> {
    let mut s = line.trim();
    if let Some(rest) = strip_prefix_ci(s, "action:") {
        s = rest.trim_start();
    }
    let s = s.strip_suffix('.').unwrap_or(s).trim_end();
    let open = s.find('(').ok_or_else(|| ActionParseError("missing '('".into()))?;
    if !s.ends_with(')') {
        return Err(ActionParseError("missing ')'".into()));
    }
    let keyword = s[..open].trim().to_ascii_uppercase();
    let args = parse_args(&s[open + 1..s.len() - 1])?;
    build(&keyword, args)
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s.is_char_boundary(prefix.len()) && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

#[derive(Debug)]
struct Arg {
    key: Option<String>,
    value: String,
    quoted: bool,
}

fn parse_args(inner: &str) -> Result<Vec<Arg>, ActionParseError> {
    let chars: Vec<char> = inner.chars().collect();
    let mut args = Vec::new();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i == chars.len() {
        return Ok(args);
    }
    loop {
        skip_ws(&mut i);
        // optional key=
        let mut key = None;
        let start = i;
        while i < chars.len() && is_bare(chars[i]) {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        let mut j = i;
        while j < chars.len() && chars[j].is_whitespace() {
            j += 1;
        }
        if !word.is_empty() && j < chars.len() && chars[j] == '=' {
            key = Some(word.to_ascii_lowercase());
            i = j + 1;
            skip_ws(&mut i);
        } else {
            i = start;
        }
        let (value, quoted) = if i < chars.len() && chars[i] == '"' {
            i += 1;
            let mut v = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(ActionParseError("unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let c = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('r') => '\r',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(ActionParseError("bad escape".into())),
                        };
                        v.push(c);
                        i += 2;
                    }
                    Some(&c) => {
                        v.push(c);
                        i += 1;
                    }
                }
            }
            (v, true)
        } else {
            let s = i;
            while i < chars.len() && is_bare(chars[i]) {
                i += 1;
            }
            if s == i {
                return Err(ActionParseError("expected a value".into()));
            }
            (chars[s..i].iter().collect(), false)
        };
        args.push(Arg { key, value, quoted });
        skip_ws(&mut i);
        match chars.get(i) {
            None => break,
            Some(',') => i += 1,
            Some(c) => return Err(ActionParseError(format!("unexpected {c:?}"))),
        }
    }
    Ok(args)
}

fn is_bare(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '/' | '#')
}

fn build(keyword: &str, args: Vec<Arg>) -> Result<AgentAction, ActionParseError> {
    let err = |m: &str| ActionParseError(format!("{keyword}: {m}"));
    let named = |name: &str| args.iter().find(|a| a.key.as_deref() == Some(name)).map(|a| a.value.clone());
    let single = || -> Result<String, ActionParseError> {
        match args.as_slice() {
            [a] if a.key.is_none() => Ok(a.value.clone()),
            _ => Err(err("expected exactly one positional argument")),
        }
    };
    let only_keys = |keys: &[&str]| {
        args.iter().all(|a| a.key.as_deref().is_some_and(|k| keys.contains(&k))) && args.len() == keys.len()
    };
    match keyword {
        "CLICK" => {
            if only_keys(&["id"]) {
                Ok(AgentAction::click(named("id").unwrap()))
            } else if only_keys(&["x", "y"]) {
                let coord = |k: &str| {
                    named(k)
                        .unwrap()
                        .parse::<i32>()
                        .map_err(|_| err("coordinates must be integers"))
                };
                Ok(AgentAction::Click(ClickTarget::Point { x: coord("x")?, y: coord("y")? }))
            } else {
                Err(err("expected id=<element> or x=<int>, y=<int>"))
            }
        }
        "TYPE" => {
            if !only_keys(&["id", "text"]) {
                return Err(err("expected id=<element>, text=\"...\""));
            }
            Ok(AgentAction::type_text(named("id").unwrap(), named("text").unwrap()))
        }
        "SCROLL" => Ok(AgentAction::Scroll(single()?.parse()?)),
        "OPEN_APP" => Ok(AgentAction::OpenApp(single()?)),
        "NAVIGATE" => Ok(AgentAction::Navigate(single()?)),
        "STOP" => match args.as_slice() {
            [] => Ok(AgentAction::Stop(None)),
            [a] if a.key.is_none() && a.quoted => Ok(AgentAction::Stop(Some(a.value.clone()))),
            _ => Err(err("expected STOP() or STOP(\"answer\")")),
        },
        other => Err(ActionParseError(format!("unknown action {other:?}"))),
    }
}

struct Quoted<'a>(&'a str);

impl fmt::Display for Quoted<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        for c in self.0.chars() {
            match c {
                '"' => f.write_str("\\\"")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\r' => f.write_str("\\r")?,
                '\t' => f.write_str("\\t")?,
                c => write!(f, "{c}")?,
            }
        }
        f.write_str("\"")
    }
}

struct Ident<'a>(&'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.0.is_empty() && self.0.chars().all(is_bare) {
            f.write_str(self.0)
        } else {
            Quoted(self.0).fmt(f)
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentAction::Click(ClickTarget::Element(id)) => write!(f, "CLICK(id={})", Ident(id)),
            AgentAction::Click(ClickTarget::Point { x, y }) => write!(f, "CLICK(x={x}, y={y})"),
            AgentAction::TypeText { target, text } => {
                write!(f, "TYPE(id={}, text={})", Ident(target), Quoted(text))
            }
            AgentAction::Scroll(d) => write!(f, "SCROLL({})", d.as_str()),
            AgentAction::OpenApp(app) => write!(f, "OPEN_APP({})", Quoted(app)),
            AgentAction::Navigate(to) => write!(f, "NAVIGATE({})", Quoted(to)),
            AgentAction::Stop(None) => f.write_str("STOP()"),
            AgentAction::Stop(Some(answer)) => write!(f, "STOP({})", Quoted(answer)),
        }
    }
}

impl FromStr for AgentAction {
    type Err = ActionParseError;

    /// Strict single-expression parse (no multi-line search).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_line(s)
    }
}

impl Serialize for AgentAction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentAction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
