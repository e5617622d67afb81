//! The shipped prompt templates: factor extraction, pairwise evaluation,
//! score-graded generation, and improvement prompts.

use crate::corpus::TaskKind;

use super::{PromptTemplate, ReplyFormat};

const TEMPLATE_VERSION: &str = "1";

fn json_decision() -> ReplyFormat {
    ReplyFormat::Json {
        required_keys: vec!["decision".to_string(), "justification".to_string()],
    }
}

fn make(name: &str, body: &str, reply_format: ReplyFormat) -> PromptTemplate {
    PromptTemplate {
        name: name.to_string(),
        version: TEMPLATE_VERSION.to_string(),
        body: body.to_string(),
        reply_format,
        few_shot: None,
    }
}

/// Split a response into atomic facts; the reply is an enumerated list.
pub fn atomic_facts() -> PromptTemplate {
    make(
        "atomic_facts",
        "Your task is to extract atomic facts from the INPUT. These are self-contained units \
         of information that are unambiguous and require no further splitting. List one atomic \
         fact per line.\n\n{FEW_SHOT}\n\nINPUT: {INPUT}\nOUTPUT:",
        ReplyFormat::Enumerated,
    )
}

/// Response-level yes/no: does the response address the post's query?
pub fn receptiveness() -> PromptTemplate {
    make(
        "receptiveness",
        "Does the response clearly address the query from the original post? First determine \
         the core question or purpose of the original post from the user, and evaluate whether \
         the response clearly serves as the proper answer to the question. Provide your \
         response in JSON format, with a 'yes' or 'no' decision regarding the response's \
         receptiveness to the original post, along with justifications.\n\n{FEW_SHOT}\n\n\
         INPUT:\nPost: {POST}\nResponse : {OUTPUT}",
        json_decision(),
    )
}

/// Per-fact yes/no: is the statement related to the post's main focus?
/// A "no" marks the fact as off-focus.
pub fn off_focus() -> PromptTemplate {
    make(
        "off_focus",
        "You have been provided a statement. Can you determine if it is related to the main \
         focus of the post? The main focus of a post is the core subject around which all the \
         content revolves. Format your response in JSON, containing a 'yes' or 'no' decision \
         for each statement in the set, along with justifications.\n\n{FEW_SHOT}\n\n\
         INPUT: {ATOMIC_FACT}\nReddit Post: {POST}",
        json_decision(),
    )
}

/// Per-fact yes/no: does the statement's factual content match the post?
/// A "no" marks the fact as hallucinated. Run with the fact and post swapped
/// (source fact against the response) this doubles as the coverage check.
pub fn hallucination() -> PromptTemplate {
    make(
        "hallucination",
        "You have been provided with a set of statements. Does the factual information within \
         each statement accurately match the post? A statement is considered accurate if it \
         does not introduce details that are unmentioned in the post, or contradicts the \
         post's existing information. Provide your response in JSON format, with a 'yes' or \
         'no' decision for each statement in the set, along with justifications.\n\n\
         {FEW_SHOT}\n\nINPUT: {ATOMIC_FACT}\nReddit Post: {POST}",
        json_decision(),
    )
}

/// Response-level yes/no: does the response accomplish the post's intent?
pub fn intent_alignment() -> PromptTemplate {
    make(
        "intent_alignment",
        "You have been provided an original post and a response. First determine the main \
         intent of the original post, that is, the purpose its author wants accomplished. \
         Then evaluate whether the response represents and accomplishes that intent. Provide \
         your response in JSON format, with a 'yes' or 'no' decision regarding the response's \
         alignment with the post's intent, along with justifications.\n\n{FEW_SHOT}\n\n\
         INPUT:\nReddit Post: {POST}\nResponse : {OUTPUT}",
        json_decision(),
    )
}

/// Three-way formality match between post and output.
pub fn formality_alignment() -> PromptTemplate {
    make(
        "formality_alignment",
        "You have been provided an original post and a summary. First determine the formality \
         (formal, informal) for both the post and the summary. Then, decide if the formalities \
         align. If they match perfectly, return \"Aligned\", if they are similar in terms of \
         formality (e.g., both informal) but have slight differences in how much \
         formal/informal they are, return \"Partially Aligned\", and if they don't match, \
         return \"Not Aligned\". Format your response in JSON as follows:\nOutput Format: \
         {\"decision\": , \"justification\": }\n\n{FEW_SHOT}\nReddit Post: {POST}\n\
         Summary : {OUTPUT}",
        json_decision(),
    )
}

/// Per-fact yes/no: is the statement helpful beyond the direct answer?
pub fn helpfulness() -> PromptTemplate {
    make(
        "helpfulness",
        "You have been provided a statement. Can you determine if this statement provides \
         helpful information, although not directly necessary to answer the question? Provide \
         your response in JSON format, with a 'yes' or 'no' decision, along with \
         justifications.\n\n{FEW_SHOT}\n\nINPUT:\nquestion: {POST}\nstatements: {ATOMIC_FACT}",
        json_decision(),
    )
}

/// Per-fact yes/no: does the statement carry potentially misleading claims?
pub fn misinformation() -> PromptTemplate {
    make(
        "misinformation",
        "You have been provided a statement. Can you determine if it contains potentially \
         incorrect or misleading information? Potential misleading information include \
         assumptions about user; medical, legal, financial advice; conspiracy theories; \
         claims to take real world action and more. Provide your response in JSON format, \
         with a 'yes' or 'no' decision, along with justifications.\n\n{FEW_SHOT}\n\n\
         INPUT: {ATOMIC_FACT}",
        json_decision(),
    )
}

/// The "better summary" key the evaluation reply must carry for a task.
pub fn evaluation_choice_key(task: TaskKind) -> String {
    format!("better {}", task.response_noun())
}

/// Pairwise comparison prompt: pick the better response or call a tie.
pub fn evaluation(task: TaskKind) -> PromptTemplate {
    let noun = task.response_noun();
    let title = {
        let mut c = noun.chars();
        let first = c.next().expect("noun is non-empty");
        format!("{}{}", first.to_ascii_uppercase(), c.as_str())
    };
    let key = evaluation_choice_key(task);
    let body = match task {
        TaskKind::Summarization | TaskKind::HelpfulResponse => format!(
            "{{TASK_DESCRIPTION}} Analyze the provided {noun}s and original post, then select \
             the better {noun} or indicate if they are equally good. Output the result in JSON \
             format. Where \"{key}\" can be \"{title} 1\", \"{title} 2\", or \"Tie\" if both \
             {noun}s are equally good.\nOutput Format:\n{{\n\"{key}\": \"\",\n\
             \"justification\": \"\"\n}}\nReddit Post: {{CONTENT}}\n{title} 1: {{RESPONSE1}}\n\
             {title} 2: {{RESPONSE2}}"
        ),
        TaskKind::DocQa => format!(
            "{{TASK_DESCRIPTION}} Where \"{key}\" can be \"{title} 1\", \"{title} 2\", or \
             \"Tie\" if both responses are equally good.\nQuestion: {{QUESTION}}\n\n\
             {title} 1: {{RESPONSE1}}\nReference 1: {{REFERENCE1}}\n\n{title} 2: {{RESPONSE2}}\n\
             Reference 2: {{REFERENCE2}}\n\nOutput the result in JSON format.\nOutput Format:\n\
             {{\n\"{key}\": \"\",\n\"justification\": \"\"\n}}"
        ),
    };
    PromptTemplate {
        name: format!("evaluation.{}", task.as_str()),
        version: TEMPLATE_VERSION.to_string(),
        body,
        reply_format: ReplyFormat::Json {
            required_keys: vec![key, "justification".to_string()],
        },
        few_shot: None,
    }
}

/// Evaluation prompt with a factor-specific guidance line inserted between
/// the task description and the instructions.
pub fn guided_evaluation(task: TaskKind) -> PromptTemplate {
    let base = evaluation(task);
    let body = match base.body.split_once("{TASK_DESCRIPTION}") {
        Some((_, rest)) => format!("{{TASK_DESCRIPTION}}\n{{FACTOR_GUIDANCE}}\n{}", rest.trim_start()),
        None => base.body.clone(),
    };
    PromptTemplate {
        name: format!("evaluation_guided.{}", task.as_str()),
        body,
        ..base
    }
}

/// Score-graded generation: ask for five outputs rated 1 through 5.
pub fn score_generation(task: TaskKind) -> PromptTemplate {
    let noun = task.response_noun();
    let upper = noun.to_ascii_uppercase();
    let source_block = match task {
        TaskKind::Summarization => "TITLE: {TITLE}\nPOST: {CONTENT}",
        TaskKind::HelpfulResponse => "POST: {CONTENT}",
        TaskKind::DocQa => "Question: {QUESTION}\nReference: {REFERENCE}",
    };
    let body = format!(
        "{{TASK_DESCRIPTION}} Your job is to generate five {noun}s that would each get a score \
         of 1,2,3,4 and 5.\n\n{source_block}\n\nGenerate five {noun}s that would each get a \
         score of 1,2,3,4 and 5. SCORE 1 {upper}:"
    );
    PromptTemplate {
        name: format!("score_generation.{}", task.as_str()),
        version: TEMPLATE_VERSION.to_string(),
        body,
        reply_format: ReplyFormat::Text,
        few_shot: None,
    }
}

/// Improve using the evaluator's verdict and justification.
pub fn improve_with_feedback() -> PromptTemplate {
    make(
        "improve_with_feedback",
        "{TASK_DESCRIPTION} It aims to accomplish the same purpose and convey the same key \
         information as the original post. Based on the evaluation results, improve the \
         summary by addressing the feedback provided.\nReddit Post: {CONTENT}\n\
         Summary 1: {SUMMARY1}\nSummary 2: {SUMMARY2}\nEvaluation: {EVALUATION}\n\
         Improved Summary:",
        ReplyFormat::Text,
    )
}

/// Improve one summary with no feedback.
pub fn improve_baseline_single() -> PromptTemplate {
    make(
        "improve_baseline_single",
        "{TASK_DESCRIPTION} Improve the given summary.\nReddit Post: {CONTENT}\n\
         Summary: {SUMMARY}\nImproved Summary:",
        ReplyFormat::Text,
    )
}

/// Improve from both summaries at once, with no feedback.
pub fn improve_baseline_pair() -> PromptTemplate {
    make(
        "improve_baseline_pair",
        "{TASK_DESCRIPTION} Generate an improved summary based on the given two summaries.\n\
         Reddit Post: {CONTENT}\nSummary 1: {SUMMARY1}\nSummary 2: {SUMMARY2}\n\
         Improved Summary:",
        ReplyFormat::Text,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn shipped_templates_render_without_leftover_placeholders() {
        let all = vec![
            atomic_facts(),
            receptiveness(),
            off_focus(),
            hallucination(),
            intent_alignment(),
            formality_alignment(),
            helpfulness(),
            misinformation(),
            evaluation(TaskKind::Summarization),
            evaluation(TaskKind::HelpfulResponse),
            evaluation(TaskKind::DocQa),
            guided_evaluation(TaskKind::Summarization),
            score_generation(TaskKind::Summarization),
            score_generation(TaskKind::DocQa),
            improve_with_feedback(),
            improve_baseline_single(),
            improve_baseline_pair(),
        ];
        for t in all {
            let mut bindings = BTreeMap::new();
            for p in t.placeholders() {
                bindings.insert(p.clone(), format!("<{p}>"));
            }
            let rendered = t.render(&bindings).unwrap();
            for p in t.placeholders() {
                assert!(
                    !rendered.contains(&format!("{{{p}}}")),
                    "{} left placeholder {p}",
                    t.name
                );
                assert!(rendered.contains(&format!("<{p}>")), "{} lost binding {p}", t.name);
            }
        }
    }

    #[test]
    fn evaluation_template_keeps_literal_json_braces() {
        let t = evaluation(TaskKind::Summarization);
        let mut bindings = BTreeMap::new();
        for p in t.placeholders() {
            bindings.insert(p.clone(), "x".to_string());
        }
        let rendered = t.render(&bindings).unwrap();
        assert!(rendered.contains("\"better summary\": \"\""));
        assert!(rendered.contains("Summary 1: x"));
    }

    #[test]
    fn doc_qa_evaluation_uses_answer_labels_and_references() {
        let t = evaluation(TaskKind::DocQa);
        let names = t.placeholders();
        assert!(names.contains(&"QUESTION".to_string()));
        assert!(names.contains(&"REFERENCE1".to_string()));
        assert!(t.body.contains("\"better answer\""));
    }

    #[test]
    fn guided_evaluation_inserts_guidance_slot_after_description() {
        let t = guided_evaluation(TaskKind::Summarization);
        let idx_desc = t.body.find("{TASK_DESCRIPTION}").unwrap();
        let idx_guidance = t.body.find("{FACTOR_GUIDANCE}").unwrap();
        let idx_instr = t.body.find("Analyze the provided").unwrap();
        assert!(idx_desc < idx_guidance && idx_guidance < idx_instr);
    }
}
