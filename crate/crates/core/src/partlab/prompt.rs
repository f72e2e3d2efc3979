use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PartLabError;

/// Placeholder substituted with the action text.
pub const ACTION_PLACEHOLDER: &str = "[ACTION]";

/// The list + few-shot prompt, line breaks and trailing spaces included.
pub const FEW_SHOT_TEMPLATE: &str = "\
The instructions for this task are to choose \n\
your answers from the list below:\n\
\n\
left arm\n\
right arm\n\
left leg\n\
buttocks\n\
waist\n\
right leg\n\
torso\n\
neck\n\
\n\
Here are some examples of the question and answer \n\
pairs for this task:\n\
\n\
Question: What are the body parts involved in the\n\
action of: walk forwards?\n\
Answer: right leg\n\
left leg\n\
buttocks\n\
\n\
Question: What are the body parts involved in the\n\
action of: face to the left?\n\
Answer: torso\n\
neck\n\
\n\
Question: What are the body parts involved in the\n\
action of: put headphones over ears?\n\
Answer: right arm\n\
left arm\n\
neck\n\
\n\
Question: What are the body parts involved in the\n\
action of: sit down?\n\
Answer: right leg\n\
left leg\n\
buttocks\n\
waist\n\
\n\
Question: What are the body parts involved in the \n\
action of: [ACTION]?";

const LIST_INSTRUCTION: &str = "\
The instructions for this task are to choose \n\
your answers from the list below:\n\
\n\
left arm\n\
right arm\n\
left leg\n\
buttocks\n\
waist\n\
right leg\n\
torso\n\
neck";

const FINAL_QUESTION: &str = "\
Question: What are the body parts involved in the \n\
action of: [ACTION]?";

const FREE_FORM_TEMPLATE: &str = "List the body parts involved in this action: [ACTION]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    /// Open question, no vocabulary given.
    FreeForm,
    /// Vocabulary list and the question.
    ListOnly,
    /// Vocabulary list, four answered examples and the question.
    ListFewShot,
}

impl PromptKind {
    pub const ALL: [PromptKind; 3] = [PromptKind::FreeForm, PromptKind::ListOnly, PromptKind::ListFewShot];

    pub fn slug(self) -> &'static str {
        match self {
            PromptKind::FreeForm => "freeform",
            PromptKind::ListOnly => "list",
            PromptKind::ListFewShot => "fewshot",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "freeform" | "free-form" => Ok(PromptKind::FreeForm),
            "list" => Ok(PromptKind::ListOnly),
            "fewshot" | "few-shot" => Ok(PromptKind::ListFewShot),
            _ => Err(format!("unknown prompt mode {s:?} (freeform|list|fewshot)")),
        }
    }
}

pub fn build_prompt(action: &str, kind: PromptKind) -> Result<String, PartLabError> {
    let action = action.trim();
    if action.is_empty() {
        return Err(PartLabError::EmptyAction);
    }
    let template = match kind {
        PromptKind::FreeForm => FREE_FORM_TEMPLATE.to_string(),
        PromptKind::ListOnly => format!("{LIST_INSTRUCTION}\n\n{FINAL_QUESTION}"),
        PromptKind::ListFewShot => FEW_SHOT_TEMPLATE.to_string(),
    };
    Ok(template.replace(ACTION_PLACEHOLDER, action))
}
