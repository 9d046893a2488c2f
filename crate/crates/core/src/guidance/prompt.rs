use crate::corpus::TutorialDoc;
use crate::gateway::ChatMessage;
use crate::task::TaskContext;
use crate::text::fill_template;

pub const GUIDANCE_PROMPT_VERSION: &str = "guidance_v1";
pub const GUIDANCE_SYSTEM: &str = include_str!("../../assets/guidance_v1.system.txt");
pub const GUIDANCE_USER: &str = include_str!("../../assets/guidance_v1.user.txt");

/// System prompt verbatim; the user message fills the query, the numbered
/// history and the tutorial's text blocks. A screenshot is attached as an
/// image part; without one, the screen's elements are listed after the
/// template text.
pub fn render_guidance_prompt(ctx: &TaskContext, tutorial: &TutorialDoc) -> Vec<ChatMessage> {
    let history = ctx.numbered_history();
    let tutorial_text = tutorial.text();
    let mut user = fill_template(
        GUIDANCE_USER,
        &[("instruction", &ctx.goal), ("previous_actions", &history), ("tutorial", &tutorial_text)],
    );
    let obs = &ctx.observation;
    let message = match &obs.screenshot_ref {
        Some(uri) => ChatMessage::user(user).with_image(uri.clone()),
        None => {
            if !obs.elements.is_empty() {
                user.push_str(&format!("\nCurrent screen ({}):\n{}", obs.screen_id, obs.element_lines()));
            }
            ChatMessage::user(user)
        }
    };
    vec![ChatMessage::system(GUIDANCE_SYSTEM), message]
}
