//! The local-caption prompt and parsing of the captioner's three answers.

use super::PerceptionError;
use crate::model::CaptionLength;

/// Placeholder replaced by the entity label.
pub const TAG_PLACEHOLDER: &str = "{tag}";

pub const CAPTION_PROMPT_TEMPLATE: &str = "Now you are the 'text prompt creator'.\n\
Let's think step by step, from simple to complex to describe the center object {tag}, your response should return three answers. \n\
Use \\n as a separator in the answerThe first answer is to describe the center object {tag} in two or three phrases.\n\
This answer must start with 'The video shows' and must contain {tag}.\n\
The second answer is to describe the center object {tag} in a clear and concise manner using two or three sentences.\n\
This answer must start with 'The video shows' and must contain {tag}.\n\
The third answer is to describe the center object {tag} in detail.\n\
This answer must start with 'The video shows' and must contain {tag}.";

/// Every answer must open with this phrase.
pub const CAPTION_PREFIX: &str = "The video shows";

pub fn render_caption_prompt(tag: &str) -> Result<String, PerceptionError> {
    if tag.trim().is_empty() {
        return Err(PerceptionError::EmptyTag);
    }
    Ok(CAPTION_PROMPT_TEMPLATE.replace(TAG_PLACEHOLDER, tag))
}

/// Short, medium and long captions, in answer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionTriplet {
    pub short: String,
    pub medium: String,
    pub long: String,
}

impl CaptionTriplet {
    pub fn iter(&self) -> impl Iterator<Item = (CaptionLength, &str)> {
        [
            (CaptionLength::Short, self.short.as_str()),
            (CaptionLength::Medium, self.medium.as_str()),
            (CaptionLength::Long, self.long.as_str()),
        ]
        .into_iter()
    }
}

/// Splits the captioner's reply into its three answers. Answers are separated
/// by newlines; a reply that echoes the separator literally as `\n` is also
/// accepted. Blank lines are ignored. Answer indices in errors are 1-based.
pub fn parse_caption_triplet(text: &str, tag: &str) -> Result<CaptionTriplet, PerceptionError> {
    let split = |sep: &str| -> Vec<String> {
        text.split(sep)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut answers = split("\n");
    if answers.len() == 1 && text.contains("\\n") {
        answers = split("\\n");
    }
    if answers.len() != 3 {
        return Err(PerceptionError::WrongAnswerCount {
            found: answers.len(),
        });
    }
    let needle = tag.to_lowercase();
    for (i, a) in answers.iter().enumerate() {
        if !a.starts_with(CAPTION_PREFIX) {
            return Err(PerceptionError::MissingPrefix { index: i + 1 });
        }
        if !a.to_lowercase().contains(&needle) {
            return Err(PerceptionError::MissingTag { index: i + 1 });
        }
    }
    let mut it = answers.into_iter();
    Ok(CaptionTriplet {
        short: it.next().expect("3 answers"),
        medium: it.next().expect("3 answers"),
        long: it.next().expect("3 answers"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_mentions_tag() {
        let p = render_caption_prompt("dog").unwrap();
        assert!(p.contains("describe the center object dog"));
        assert!(p.starts_with("Now you are the 'text prompt creator'."));
        assert!(p.contains("Use \\n as a separator"));
        assert!(!p.contains(TAG_PLACEHOLDER));
        assert_eq!(p.matches("dog").count(), 7);
        assert_eq!(p, render_caption_prompt("dog").unwrap());
    }

    #[test]
    fn empty_tag_rejected() {
        assert!(matches!(
            render_caption_prompt(""),
            Err(PerceptionError::EmptyTag)
        ));
    }

    #[test]
    fn parses_three_answers() {
        let text = "The video shows a dog.\nThe video shows a dog sitting. It is calm.\nThe video shows a brown dog with long ears.\n";
        let t = parse_caption_triplet(text, "dog").unwrap();
        assert_eq!(t.short, "The video shows a dog.");
        assert_eq!(t.long, "The video shows a brown dog with long ears.");
        assert_eq!(t.iter().count(), 3);
    }

    #[test]
    fn literal_separator_accepted() {
        let text = "The video shows a dog.\\nThe video shows a dog.\\nThe video shows a dog.";
        assert!(parse_caption_triplet(text, "dog").is_ok());
    }

    #[test]
    fn parse_errors_name_the_answer() {
        let two = "The video shows a dog.\nThe video shows a dog.";
        assert!(matches!(
            parse_caption_triplet(two, "dog"),
            Err(PerceptionError::WrongAnswerCount { found: 2 })
        ));
        let no_tag = "The video shows a dog.\nThe video shows a cat.\nThe video shows a dog.";
        assert!(matches!(
            parse_caption_triplet(no_tag, "dog"),
            Err(PerceptionError::MissingTag { index: 2 })
        ));
        let no_prefix = "The video shows a dog.\nThe video shows a dog.\nA dog.";
        assert!(matches!(
            parse_caption_triplet(no_prefix, "dog"),
            Err(PerceptionError::MissingPrefix { index: 3 })
        ));
    }
}
