//! Prompt text. The solving template is kept verbatim and split into
//! sections so that scoped prompts (one view, broad-only, ...) reuse its
//! exact wording.

use crate::dsl::GRAMMAR_REFERENCE;
use crate::task::{pair_to_json, redact_test_output, Task, TaskPair};

use super::ChatMessage;

pub const PREAMBLE: &str = "You are given a series of inputs and output pairs.
These are all in the form of a 2D array, representing a 2D grid, with values from 0-9.
The values are not representative of any ordinal ranking.
Input/output pairs may not reflect all possibilities, you are to infer the simplest possible relation making use of symmetry and invariance as much as possible.";

pub const INPUT_HINTS: &str = "The input can be something like:
> entire grid being the sandbox to manipulate
> using a part of the grid (individual squares or portions of the grid) to depict instructions of how to do the task. symmetry is important.
> using regions of similar value to depict area for answer of the task";

pub const OUTPUT_HINTS: &str = "The output can be something like:
> same output size as input after performing action
> output one of the fixed predetermined patterns used to classify the input image
> using output to show the ordering of objects, such as by size, height, width, position, value";

pub const ACTIONS_HEADER: &str = "Each of the input-output relation can be done with one or more actions chained together, which could be something like (not exhaustive):";

pub const OBJECT_VIEW: &str = "- object view (defined as continuous squares connected horizontally, vertically and/or diagonally, separated by 0 values)
> objects can be of the same value, or different values combined together
> objects may be hidden beneath other objects
> rotating or shifting objects
> changing value of object
> objects can be manipulated and mapped to a different number of output squares
> different objects may be manipulated differently based on context";

pub const OVERALL_VIEW: &str = "- overall view
> rotation / reflection symmetry
> continuation of a pattern
> changing values";

pub const SEGMENT_VIEW: &str = "- segment view
> combine two segments of the input into one single one based on a simple rule
> rule can be certain values are prioritized over others, or combination of values into new ones";

pub const DO_THE_FOLLOWING: &str = "Do the following:";
pub const ASK_BROAD: &str =
    "- What is the broad description of the input/output relation that holds for all input/output pairs?";
pub const ASK_STEPS: &str =
    "- What is the step by step description of the input/output relation that holds for all input/output pairs?";
pub const ASK_APPLY: &str = "- Apply this description to the test input and find out the answer 'to_be_filled'.";

/// Which action sections a prompt keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSections {
    All,
    Object,
    Overall,
    Segment,
}

/// Everything before "Do the following:", with the chosen action sections.
pub fn priors(actions: ActionSections) -> String {
    let views = match actions {
        ActionSections::All => format!("{OBJECT_VIEW}\n\n{OVERALL_VIEW}\n\n{SEGMENT_VIEW}"),
        ActionSections::Object => OBJECT_VIEW.to_string(),
        ActionSections::Overall => OVERALL_VIEW.to_string(),
        ActionSections::Segment => SEGMENT_VIEW.to_string(),
    };
    format!("{PREAMBLE}\n\n{INPUT_HINTS}\n\n{OUTPUT_HINTS}\n\n{ACTIONS_HEADER}\n{views}")
}

/// The complete single-prompt template.
pub fn naive_template() -> String {
    format!(
        "{}\n\n{DO_THE_FOLLOWING}\n{ASK_BROAD}\n{ASK_STEPS}\n{ASK_APPLY}",
        priors(ActionSections::All)
    )
}

/// Template, blank line, redacted task JSON.
pub fn build_naive_prompt(task: &Task) -> Vec<ChatMessage> {
    vec![ChatMessage::user(format!(
        "{}\n\n{}",
        naive_template(),
        redact_test_output(task)
    ))]
}

pub fn hierarchical_broad_prompt(task: &Task) -> String {
    format!(
        "{}\n\n{DO_THE_FOLLOWING}\n{ASK_BROAD}\n\n{}",
        priors(ActionSections::All),
        redact_test_output(task)
    )
}

pub fn hierarchical_steps_prompt() -> String {
    format!("Using the broad description above as grounding, do the following:\n{ASK_STEPS}")
}

pub const FINAL_ARRAY_ONLY: &str = "Reply with only the final 2D array.";

pub fn hierarchical_apply_prompt(have_steps: bool) -> String {
    let grounding = if have_steps {
        "Using the step by step description above, do the following:"
    } else {
        "Using the broad description above, do the following:"
    };
    format!("{grounding}\n{ASK_APPLY}\n{FINAL_ARRAY_ONLY}")
}

pub fn describe_pair_prompt(pair: &TaskPair) -> String {
    format!(
        "{}\n\n{DO_THE_FOLLOWING}\n- What is the description of the input/output relation for this single input/output pair?\n\n{}",
        priors(ActionSections::All),
        pair_to_json(pair)
    )
}

pub fn collate_prompt(descriptions: &[String]) -> String {
    let mut out = String::from(
        "Below are descriptions of the input/output relation, one for each input/output pair of the same task.\n\n",
    );
    for (i, d) in descriptions.iter().enumerate() {
        out.push_str(&format!("Description {}:\n{}\n\n", i + 1, d.trim()));
    }
    out.push_str(
        "Identify what these descriptions have in common and merge them into one general description of the input/output relation that holds for all input/output pairs.",
    );
    out
}

pub const DSL_REQUEST: &str =
    "- Also write the step by step description as a program in the instruction language above, inside a block that starts with ```dsl and ends with ```.";

/// Optional grounding passed to scoped prompts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Seed {
    pub broad: Option<String>,
    pub detailed: Option<String>,
}

impl Seed {
    fn render(&self) -> String {
        let mut out = String::new();
        if let Some(b) = self.broad.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push_str(&format!(
                "A candidate broad description for this task:\n{}\n\n",
                b.trim()
            ));
        }
        if let Some(d) = self.detailed.as_deref().filter(|s| !s.trim().is_empty()) {
            out.push_str(&format!(
                "A candidate step by step description for this task:\n{}\n\n",
                d.trim()
            ));
        }
        out
    }
}

/// Single-view prompt that also asks for a program in the instruction DSL.
pub fn view_prompt(task: &Task, actions: ActionSections, seed: &Seed) -> String {
    format!(
        "{}\n\nPrograms are written in this instruction language, one action per line:\n{GRAMMAR_REFERENCE}\n\n{}{DO_THE_FOLLOWING}\n{ASK_BROAD}\n{ASK_STEPS}\n{DSL_REQUEST}\n{ASK_APPLY}\n\n{}",
        priors(actions),
        seed.render(),
        redact_test_output(task)
    )
}

/// Ask the model to execute a textual instruction on one grid.
pub fn apply_prompt(instruction: &str, input: &crate::task::Grid) -> String {
    format!(
        "Apply the following instruction to the grid below. The grid is a 2D array with values from 0-9.\n\nInstruction:\n{}\n\nGrid:\n{}\n\n{FINAL_ARRAY_ONLY}",
        instruction.trim(),
        crate::task::grid_to_json(input)
    )
}
