//! Question–answer files: `question with [topic]\tanswer1|answer2|...`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaExample {
    /// Question text including the bracketed topic mention.
    pub question: String,
    pub topic: String,
    pub answers: Vec<String>,
}

impl QaExample {
    pub fn new(question: impl Into<String>, answers: Vec<String>) -> Result<Self> {
        let question = question.into();
        let topic = bracketed(&question).map_err(|message| Error::Dataset { line: 0, message })?;
        if answers.is_empty() {
            return Err(Error::Dataset {
                line: 0,
                message: "no answers".into(),
            });
        }
        Ok(Self {
            topic: topic.to_string(),
            question,
            answers,
        })
    }

    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.question, self.answers.join("|"))
    }
}

fn bracketed(question: &str) -> std::result::Result<&str, String> {
    let open = question.find('[').ok_or("missing '[' around the topic mention")?;
    let close = question[open..]
        .find(']')
        .map(|i| i + open)
        .ok_or("missing ']' around the topic mention")?;
    let topic = question[open + 1..close].trim();
    if topic.is_empty() {
        return Err("empty topic mention".into());
    }
    Ok(topic)
}

pub fn parse_line(line: &str, line_no: usize) -> Result<QaExample> {
    let err = |message: String| Error::Dataset { line: line_no, message };
    let (question, answers) = line
        .split_once('\t')
        .ok_or_else(|| err("missing tab separator".into()))?;
    let topic = bracketed(question).map_err(err)?;
    let answers: Vec<String> = answers
        .split('|')
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect();
    if answers.is_empty() {
        return Err(err("no answers".into()));
    }
    Ok(QaExample {
        question: question.trim().to_string(),
        topic: topic.to_string(),
        answers,
    })
}

pub fn read_qa(reader: impl BufRead) -> Result<Vec<QaExample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, i + 1)?);
    }
    Ok(out)
}

pub fn load_qa_dataset(path: impl AsRef<Path>) -> Result<Vec<QaExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_qa(BufReader::new(file))
}

pub fn write_qa(mut out: impl Write, examples: &[QaExample]) -> std::io::Result<()> {
    for ex in examples {
        writeln!(out, "{}", ex.to_line())?;
    }
    Ok(())
}

pub fn save_qa_dataset(path: impl AsRef<Path>, examples: &[QaExample]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_qa(&mut buf, examples).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// A question whose topic and answers are all KG entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedExample {
    /// Position in the source example list.
    pub index: usize,
    pub question: String,
    pub mention: String,
    pub topic: EntityId,
    /// Sorted, deduplicated.
    pub answers: Vec<EntityId>,
}

impl ResolvedExample {
    pub fn is_answer(&self, e: EntityId) -> bool {
        self.answers.binary_search(&e).is_ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    pub examples: Vec<ResolvedExample>,
    pub skipped: usize,
}

/// Maps labels to entity ids. Examples with an unknown topic or any unknown
/// answer are skipped and counted.
pub fn resolve(kg: &KnowledgeGraph, examples: &[QaExample]) -> Resolution {
    let mut out = Resolution::default();
    for (index, ex) in examples.iter().enumerate() {
        let topic = kg.entity_id(&ex.topic);
        let answers: Option<Vec<EntityId>> = ex.answers.iter().map(|a| kg.entity_id(a)).collect();
        match (topic, answers) {
            (Some(topic), Some(mut answers)) => {
                answers.sort_unstable();
                answers.dedup();
                out.examples.push(ResolvedExample {
                    index,
                    question: ex.question.clone(),
                    mention: ex.topic.clone(),
                    topic,
                    answers,
                });
            }
            _ => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        warn!(
            "{} of {} examples reference unknown entities and were skipped",
            out.skipped,
            examples.len()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphBuilder;

    #[test]
    fn parses_single_and_multi_answer_lines() {
        let ex = parse_line("who directed [Thunderbolt]\t1929 film person", 1).unwrap();
        assert_eq!(ex.topic, "Thunderbolt");
        assert_eq!(ex.answers, vec!["1929 film person"]);
        let ex = parse_line("what films did [Ann] star in\ta|b|c|d", 2).unwrap();
        assert_eq!(ex.answers.len(), 4);
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let text = "who directed [A]\tB\nno tab here [A]\n";
        match read_qa(text.as_bytes()) {
            Err(Error::Dataset { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_qa("no bracket\tx".as_bytes()),
            Err(Error::Dataset { line: 1, .. })
        ));
        assert!(matches!(
            read_qa("empty [ ]\tx".as_bytes()),
            Err(Error::Dataset { line: 1, .. })
        ));
        assert!(matches!(
            read_qa("q [a]\t".as_bytes()),
            Err(Error::Dataset { line: 1, .. })
        ));
    }

    #[test]
    fn serialize_then_parse_round_trips() {
        let examples = vec![
            QaExample::new("who wrote [X Y]?", vec!["a".into(), "b c".into()]).unwrap(),
            QaExample::new("when was [Z] released", vec!["1999".into()]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_qa(&mut buf, &examples).unwrap();
        assert_eq!(read_qa(buf.as_slice()).unwrap(), examples);
    }

    #[test]
    fn resolution_skips_unknown_labels() {
        let mut b = GraphBuilder::new();
        b.add("A", "r", "B");
        let kg = b.build();
        let examples = vec![
            QaExample::new("q [A]", vec!["B".into(), "B".into()]).unwrap(),
            QaExample::new("q [A]", vec!["C".into()]).unwrap(),
            QaExample::new("q [Q]", vec!["B".into()]).unwrap(),
        ];
        let r = resolve(&kg, &examples);
        assert_eq!(r.skipped, 2);
        assert_eq!(r.examples.len(), 1);
        assert_eq!(r.examples[0].answers, vec![kg.entity_id("B").unwrap()]);
    }
}
