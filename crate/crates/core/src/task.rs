//! Task context: the goal, the current observation and the action history.

use serde::{Deserialize, Serialize};

use crate::action::AgentAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    TextField,
    Link,
    Icon,
    ListItem,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Button => "button",
            ElementKind::TextField => "text_field",
            ElementKind::Link => "link",
            ElementKind::Icon => "icon",
            ElementKind::ListItem => "list_item",
        }
    }
}

/// Integer pixel rectangle; `contains` is half-open on the far edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub x: i32,
    pub y: i32,
    pub width: i32,
    pub height: i32,
}

impl Bounds {
    pub fn contains(&self, px: i32, py: i32) -> bool {
        px >= self.x && py >= self.y && px < self.x + self.width && py < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UIElement {
    pub element_id: String,
    pub kind: ElementKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Observation {
    pub screen_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
    #[serde(default)]
    pub elements: Vec<UIElement>,
}

impl Observation {
    /// Text rendering used when no screenshot is attached.
    pub fn element_lines(&self) -> String {
        self.elements
            .iter()
            .map(|e| format!("- {} [{}] {}", e.element_id, e.kind.as_str(), e.label))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn has_unique_element_ids(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.elements.iter().all(|e| seen.insert(e.element_id.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskContext {
    pub goal: String,
    pub observation: Observation,
    #[serde(default)]
    pub history: Vec<AgentAction>,
}

impl TaskContext {
    pub fn new(goal: impl Into<String>, observation: Observation) -> Self {
        TaskContext { goal: goal.into(), observation, history: Vec::new() }
    }

    pub fn is_valid(&self) -> bool {
        !self.goal.trim().is_empty() && self.observation.has_unique_element_ids()
    }

    /// `"Step 1: ...\nStep 2: ..."`, or `"None"` for an empty history.
    pub fn numbered_history(&self) -> String {
        if self.history.is_empty() {
            return "None".to_string();
        }
        self.history
            .iter()
            .enumerate()
            .map(|(i, a)| format!("Step {}: {a}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// An offline training or evaluation tuple with a gold next action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedExample {
    pub id: String,
    pub goal: String,
    pub observation: Observation,
    #[serde(default)]
    pub history: Vec<AgentAction>,
    pub gold_action: AgentAction,
    #[serde(default)]
    pub source_dataset: String,
}

impl SeedExample {
    pub fn context(&self) -> TaskContext {
        TaskContext { goal: self.goal.clone(), observation: self.observation.clone(), history: self.history.clone() }
    }
}
