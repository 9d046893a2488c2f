use sha2::{Digest, Sha256};

use crate::corpus::{Block, TutorialDoc};
use crate::gateway::ChatMessage;
use crate::task::TaskContext;

pub const AGENT_PROMPT_VERSION: &str = "agent_v1";

/// Heading of the guidance section. Never present in a baseline prompt.
pub const GUIDANCE_DELIMITER: &str = "Guidance from tutorials:";

pub const AGENT_SYSTEM: &str = "You are a GUI agent operating a device to complete the user's task.
Given the task, the current screen and the actions taken so far, output the single next action on one line using exactly one of these forms:
CLICK(id=<element_id>)
TYPE(id=<element_id>, text=\"<text>\")
SCROLL(up|down|left|right)
OPEN_APP(\"<app name>\")
NAVIGATE(\"<url>\")
STOP(\"<answer>\") or STOP()
Use only element ids listed on the current screen. Output STOP when the task is complete.";

/// The backbone prompt. An empty `guidance_set` yields exactly the baseline
/// prompt; otherwise the summaries follow under [`GUIDANCE_DELIMITER`] in
/// rank order.
pub fn render_agent_prompt(ctx: &TaskContext, guidance_set: &[String]) -> Vec<ChatMessage> {
    let obs = &ctx.observation;
    let elements = if obs.elements.is_empty() { "(none)".to_string() } else { obs.element_lines() };
    let mut user = format!(
        "Task: {}\nScreen: {}\nElements:\n{}\nPrevious actions:\n{}",
        ctx.goal,
        obs.screen_id,
        elements,
        ctx.numbered_history()
    );
    if !guidance_set.is_empty() {
        user.push_str("\n\n");
        user.push_str(GUIDANCE_DELIMITER);
        for (i, s) in guidance_set.iter().enumerate() {
            user.push_str(&format!("\n{}. {s}", i + 1));
        }
    }
    user.push_str("\n\nNext action:");
    let mut msg = ChatMessage::user(user);
    if let Some(uri) = &obs.screenshot_ref {
        msg = msg.with_image(uri.clone());
    }
    vec![ChatMessage::system(AGENT_SYSTEM), msg]
}

/// Hex SHA-256 over the canonical JSON of the messages.
pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("chat messages serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Raw tutorial text for the vanilla-RAG arm: whole text blocks, in order,
/// while the total stays within `max_chars`. A first block that alone
/// exceeds the cap is cut at the cap.
pub fn raw_tutorial_text(doc: &TutorialDoc, max_chars: usize) -> String {
    let mut out = String::new();
    let mut used = 0usize;
    for block in &doc.blocks {
        let Block::Text { text } = block else { continue };
        let sep = usize::from(!out.is_empty());
        let len = text.chars().count();
        if used + sep + len > max_chars {
            if out.is_empty() {
                out.push_str(crate::text::truncate_chars(text, max_chars));
            }
            break;
        }
        if sep == 1 {
            out.push('\n');
        }
        out.push_str(text);
        used += sep + len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::AgentAction;
    use crate::corpus::Source;
    use crate::task::Observation;

    fn ctx() -> TaskContext {
        TaskContext::new("set an alarm", Observation { screen_id: "home".into(), ..Default::default() })
    }

    #[test]
    fn empty_guidance_is_baseline() {
        let base = render_agent_prompt(&ctx(), &[]);
        assert!(!base[1].text().contains(GUIDANCE_DELIMITER));
        assert_eq!(prompt_hash(&base), prompt_hash(&render_agent_prompt(&ctx(), &[])));
    }

    #[test]
    fn summaries_in_order_once() {
        let p = render_agent_prompt(&ctx(), &["open Clock".into(), "tap Alarm".into()])[1].text();
        assert_eq!(p.matches("open Clock").count(), 1);
        assert!(p.contains("Guidance from tutorials:\n1. open Clock\n2. tap Alarm\n\nNext action:"));
    }

    #[test]
    fn hash_tracks_inputs() {
        let base = prompt_hash(&render_agent_prompt(&ctx(), &[]));
        let mut c = ctx();
        c.history.push(AgentAction::OpenApp("Clock".into()));
        assert_ne!(base, prompt_hash(&render_agent_prompt(&c, &[])));
        assert_ne!(base, prompt_hash(&render_agent_prompt(&ctx(), &["x".into()])));
        let mut c = ctx();
        c.goal.push('!');
        assert_ne!(base, prompt_hash(&render_agent_prompt(&c, &[])));
    }

    #[test]
    fn raw_text_cuts_at_block_boundaries() {
        let doc = TutorialDoc::new("t", Source::Custom, vec![Block::text("aaaa"), Block::image("x"), Block::text("bbbb")]);
        assert_eq!(raw_tutorial_text(&doc, 100), "aaaa\nbbbb");
        assert_eq!(raw_tutorial_text(&doc, 8), "aaaa");
        assert_eq!(raw_tutorial_text(&doc, 9), "aaaa\nbbbb");
        assert_eq!(raw_tutorial_text(&doc, 2), "aa");
    }
}
