//! The plain-text constitution.
//!
//! ~~~text
//! IMPERATIVES
//! - Reduce suffering in the universe.
//! - Increase prosperity in the universe.
//!
//! FRAMEWORKS
//! ```Asimov's Laws of Robotics
//! A robot may not injure a human being ...
//! ```
//!
//! MISSION
//! Assist residents through helpful actions and responsibilities.
//! ~~~
//!
//! A header is a line holding a single upper-case word. Imperatives are one
//! per line (a leading `- ` is optional). Frameworks are fenced blocks whose
//! opening fence carries the framework name. Only IMPERATIVES is required.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstitutionError {
    #[error("line {line}: missing IMPERATIVES section")]
    MissingImperatives { line: usize },
    #[error("line {line}: IMPERATIVES section has no entries")]
    NoImperatives { line: usize },
    #[error("line {line}: empty imperative")]
    EmptyImperative { line: usize },
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: duplicate section `{name}`")]
    DuplicateSection { line: usize, name: String },
    #[error("line {line}: text outside of any section")]
    Orphan { line: usize },
    #[error("line {line}: malformed framework block: {detail}")]
    Framework { line: usize, detail: &'static str },
    #[error("cannot read constitution: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Framework {
    pub name: String,
    pub body: String,
}

/// Immutable after parsing: fields are private and there are no setters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constitution {
    imperatives: Vec<String>,
    secondary_frameworks: Vec<Framework>,
    mission: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: &'static str,
    pub text: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Header {
    Imperatives,
    Frameworks,
    Mission,
}

fn header_of(line: &str) -> Option<&str> {
    let word = line.trim();
    let word = word.strip_suffix(':').unwrap_or(word);
    (!word.is_empty() && word.chars().all(|c| c.is_ascii_uppercase() || c == '_')).then_some(word)
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Constitution {
    pub fn parse(text: &str) -> Result<Constitution, ConstitutionError> {
        let mut imperatives: Option<Vec<String>> = None;
        let mut frameworks: Option<Vec<Framework>> = None;
        let mut mission: Option<Vec<String>> = None;
        let mut current: Option<Header> = None;
        let mut open_fence: Option<(usize, String, Vec<String>)> = None;
        let mut imperatives_line = 0;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;

            if let Some((start, name, mut body)) = open_fence.take() {
                if raw.trim() == "```" {
                    let body = body.join("\n").trim().to_string();
                    frameworks.get_or_insert_with(Vec::new).push(Framework {
                        name,
                        body,
                    });
                } else {
                    body.push(raw.trim_end().to_string());
                    open_fence = Some((start, name, body));
                }
                continue;
            }

            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }

            if let Some(word) = header_of(trimmed) {
                let (header, seen) = match word {
                    "IMPERATIVES" => (Header::Imperatives, imperatives.is_some()),
                    "FRAMEWORKS" => (Header::Frameworks, frameworks.is_some()),
                    "MISSION" => (Header::Mission, mission.is_some()),
                    other => {
                        return Err(ConstitutionError::UnknownSection {
                            line: line_no,
                            name: other.to_string(),
                        })
                    }
                };
                if seen {
                    return Err(ConstitutionError::DuplicateSection {
                        line: line_no,
                        name: word.to_string(),
                    });
                }
                match header {
                    Header::Imperatives => {
                        imperatives = Some(Vec::new());
                        imperatives_line = line_no;
                    }
                    Header::Frameworks => frameworks = Some(Vec::new()),
                    Header::Mission => mission = Some(Vec::new()),
                }
                current = Some(header);
                continue;
            }

            match current {
                None => return Err(ConstitutionError::Orphan { line: line_no }),
                Some(Header::Imperatives) => {
                    let item = trimmed.strip_prefix('-').unwrap_or(trimmed);
                    let item = normalize(item);
                    if item.is_empty() {
                        return Err(ConstitutionError::EmptyImperative { line: line_no });
                    }
                    imperatives.get_or_insert_with(Vec::new).push(item);
                }
                Some(Header::Frameworks) => {
                    let Some(name) = trimmed.strip_prefix("```") else {
                        return Err(ConstitutionError::Framework {
                            line: line_no,
                            detail: "expected an opening ``` fence",
                        });
                    };
                    let name = normalize(name);
                    if name.is_empty() {
                        return Err(ConstitutionError::Framework {
                            line: line_no,
                            detail: "fence has no framework name",
                        });
                    }
                    open_fence = Some((line_no, name, Vec::new()));
                }
                Some(Header::Mission) => mission.get_or_insert_with(Vec::new).push(normalize(trimmed)),
            }
        }

        if let Some((start, ..)) = open_fence {
            return Err(ConstitutionError::Framework {
                line: start,
                detail: "unterminated fence",
            });
        }
        let Some(imperatives) = imperatives else {
            return Err(ConstitutionError::MissingImperatives {
                line: text.lines().count(),
            });
        };
        if imperatives.is_empty() {
            return Err(ConstitutionError::NoImperatives {
                line: imperatives_line,
            });
        }
        let mission = mission
            .map(|lines| lines.join(" "))
            .filter(|m| !m.is_empty());

        Ok(Constitution {
            imperatives,
            secondary_frameworks: frameworks.unwrap_or_default(),
            mission,
        })
    }

    pub fn load(path: &Path) -> Result<Constitution, ConstitutionError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConstitutionError::Io(e.to_string()))?;
        Constitution::parse(&text)
    }

    pub fn imperatives(&self) -> &[String] {
        &self.imperatives
    }

    pub fn secondary_frameworks(&self) -> &[Framework] {
        &self.secondary_frameworks
    }

    pub fn mission(&self) -> Option<&str> {
        self.mission.as_deref()
    }

    /// Canonical text form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::from("IMPERATIVES\n");
        for imp in &self.imperatives {
            let _ = writeln!(out, "- {imp}");
        }
        if !self.secondary_frameworks.is_empty() {
            out.push_str("\nFRAMEWORKS\n");
            for fw in &self.secondary_frameworks {
                let _ = writeln!(out, "```{}\n{}\n```", fw.name, fw.body);
            }
        }
        if let Some(m) = &self.mission {
            let _ = write!(out, "\nMISSION\n{m}\n");
        }
        out
    }

    /// Sections in precedence order: imperatives, then frameworks, then the
    /// mission. Absent parts are omitted. The request label only names the
    /// consumer; it does not change the content.
    pub fn render_for(&self, _request_kind: crate::cognition::RequestKind) -> Vec<Section> {
        let mut sections = Vec::with_capacity(3);
        let mut imps = String::new();
        for (i, imp) in self.imperatives.iter().enumerate() {
            let _ = writeln!(imps, "{}. {imp}", i + 1);
        }
        sections.push(Section {
            name: "imperatives",
            text: imps.trim_end().to_string(),
        });
        if !self.secondary_frameworks.is_empty() {
            let mut fws = String::new();
            for fw in &self.secondary_frameworks {
                let _ = writeln!(fws, "[{}]\n{}", fw.name, fw.body);
            }
            sections.push(Section {
                name: "frameworks",
                text: fws.trim_end().to_string(),
            });
        }
        if let Some(m) = &self.mission {
            sections.push(Section {
                name: "mission",
                text: m.clone(),
            });
        }
        sections
    }
}
