//! A scripted GUI environment: named screens, action-triggered transitions
//! and a success predicate. Loaded from JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::action::{actions_match, AgentAction};
use crate::task::{Observation, UIElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    /// Matched against the agent's action with [`actions_match`].
    pub action: AgentAction,
    pub next: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    #[serde(default)]
    pub elements: Vec<UIElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalPredicate {
    /// Success once the environment is on this screen.
    ReachScreen { screen: String },
    /// Success once this action is taken (optionally on a given screen).
    PerformAction {
        action: AgentAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on_screen: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEnv {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub goal: String,
    pub initial_screen: String,
    pub screens: BTreeMap<String, Screen>,
    pub goal_predicate: GoalPredicate,
    /// Step index (1-based) to the token the agent prompt must carry for a
    /// knowledge-keyed agent to act correctly at that step.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub required_knowledge: BTreeMap<usize, String>,
}

impl ScriptedEnv {
    pub fn from_path(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)?;
        let env: ScriptedEnv =
            serde_json::from_str(&text).map_err(|e| AgentError::InvalidEnv(format!("{}: {e}", path.display())))?;
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidEnv(m));
        if self.goal.trim().is_empty() {
            return bad("goal is empty".into());
        }
        if !self.screens.contains_key(&self.initial_screen) {
            return bad(format!("initial screen {:?} does not exist", self.initial_screen));
        }
        for (id, screen) in &self.screens {
            let obs = self.observe_screen(id, screen);
            if !obs.has_unique_element_ids() {
                return bad(format!("screen {id:?} has duplicate element ids"));
            }
            if let Some(t) = screen.transitions.iter().find(|t| !self.screens.contains_key(&t.next)) {
                return bad(format!("screen {id:?} transitions to unknown screen {:?}", t.next));
            }
        }
        match &self.goal_predicate {
            GoalPredicate::ReachScreen { screen } | GoalPredicate::PerformAction { on_screen: Some(screen), .. }
                if !self.screens.contains_key(screen) =>
            {
                bad(format!("goal predicate names unknown screen {screen:?}"))
            }
            _ => Ok(()),
        }
    }

    fn observe_screen(&self, id: &str, screen: &Screen) -> Observation {
        Observation {
            screen_id: id.to_string(),
            screenshot_ref: screen.screenshot_ref.clone(),
            elements: screen.elements.clone(),
        }
    }

    pub fn observe(&self, screen_id: &str) -> Observation {
        self.observe_screen(screen_id, &self.screens[screen_id])
    }

    /// Next screen after `action` on `screen_id`; unmatched actions leave the
    /// screen unchanged.
    pub fn step(&self, screen_id: &str, action: &AgentAction) -> String {
        self.screens[screen_id]
            .transitions
            .iter()
            .find(|t| actions_match(action, &t.action))
            .map(|t| t.next.clone())
            .unwrap_or_else(|| screen_id.to_string())
    }

    /// Whether taking `action` on `from` and landing on `to` satisfies the goal.
    pub fn satisfied(&self, from: &str, action: &AgentAction, to: &str) -> bool {
        match &self.goal_predicate {
            GoalPredicate::ReachScreen { screen } => to == screen,
            GoalPredicate::PerformAction { action: want, on_screen } => {
                actions_match(action, want) && on_screen.as_deref().is_none_or(|s| s == from)
            }
        }
    }

    pub fn satisfied_initially(&self) -> bool {
        matches!(&self.goal_predicate, GoalPredicate::ReachScreen { screen } if *screen == self.initial_screen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENV: &str = r#"{
        "goal": "turn on wifi",
        "initial_screen": "home",
        "screens": {
            "home": {"elements": [{"element_id": "settings", "kind": "icon", "label": "Settings"}],
                     "transitions": [{"action": "CLICK(id=settings)", "next": "settings"}]},
            "settings": {"elements": [{"element_id": "wifi", "kind": "list_item", "label": "Wi-Fi"}]}
        },
        "goal_predicate": {"type": "perform_action", "action": "CLICK(id=wifi)", "on_screen": "settings"},
        "required_knowledge": {"1": "KNOW"}
    }"#;

    #[test]
    fn parses_and_steps() {
        let env: ScriptedEnv = serde_json::from_str(ENV).unwrap();
        env.validate().unwrap();
        assert_eq!(env.step("home", &AgentAction::click("settings")), "settings");
        assert_eq!(env.step("home", &AgentAction::click("nope")), "home");
        assert!(env.satisfied("settings", &AgentAction::click("wifi"), "settings"));
        assert!(!env.satisfied("home", &AgentAction::click("wifi"), "home"));
        assert_eq!(env.required_knowledge[&1], "KNOW");
    }

    #[test]
    fn rejects_dangling_transition() {
        let mut env: ScriptedEnv = serde_json::from_str(ENV).unwrap();
        env.screens.get_mut("home").unwrap().transitions[0].next = "ghost".into();
        assert!(matches!(env.validate(), Err(AgentError::InvalidEnv(_))));
        let mut env: ScriptedEnv = serde_json::from_str(ENV).unwrap();
        env.initial_screen = "ghost".into();
        assert!(env.validate().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = ENV.replacen("\"goal\":", "\"gaol\": \"x\", \"goal\":", 1);
        assert!(serde_json::from_str::<ScriptedEnv>(&bad).is_err());
    }
}
