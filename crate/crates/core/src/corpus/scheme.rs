use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::is_marker;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub id: String,
    pub header: String,
}

/// Ordered catalog of note sections. The order is the canonical note order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionScheme {
    pub name: String,
    pub sections: Vec<Section>,
}

impl SectionScheme {
    pub fn new(name: impl Into<String>, ids: &[&str]) -> Result<Self> {
        let sections = ids
            .iter()
            .map(|id| Section {
                id: id.to_string(),
                header: format!("<{id}>"),
            })
            .collect();
        let scheme = SectionScheme {
            name: name.into(),
            sections,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// The four-section scheme used by the synthetic generator.
    pub fn synthetic() -> Self {
        Self::new("synthetic", &["subjective", "objective", "assessment", "plan"])
            .expect("built-in scheme is valid")
    }

    pub fn ami() -> Self {
        Self::new("ami", &["abstract", "decisions", "actions", "problems"])
            .expect("built-in scheme is valid")
    }

    /// Fifteen clinical subsections grouped by parent section.
    pub fn soap15() -> Self {
        Self::new(
            "soap15",
            &[
                "chief_complaint",
                "review_of_systems",
                "past_medical_history",
                "past_surgical_history",
                "family_medical_history",
                "social_history",
                "medications",
                "allergies",
                "miscellaneous",
                "immunizations",
                "laboratory_and_imaging_results",
                "assessment",
                "diagnostics_and_appointments",
                "prescriptions_and_therapeutics",
                "healthcare_complaints",
            ],
        )
        .expect("built-in scheme is valid")
    }

    /// Resolve a built-in scheme name, or read a scheme file.
    ///
    /// Scheme files hold one section per line: `section_id [header_token]`.
    /// Blank lines and `#` comments are ignored. The scheme is named after
    /// the file stem.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "synthetic" => Ok(Self::synthetic()),
            "ami" => Ok(Self::ami()),
            "soap15" => Ok(Self::soap15()),
            path => Self::from_file(Path::new(path)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut sections = Vec::new();
        for (lineno, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = parts.next().unwrap_or_default().to_string();
            let header = parts
                .next()
                .map(str::to_string)
                .unwrap_or_else(|| format!("<{id}>"));
            if parts.next().is_some() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected `section_id [header_token]`".into(),
                });
            }
            sections.push(Section { id, header });
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let scheme = SectionScheme { name, sections };
        scheme.validate()?;
        Ok(scheme)
    }

    fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::validation("section scheme has no sections"));
        }
        let mut ids = HashSet::new();
        let mut headers = HashSet::new();
        for s in &self.sections {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::validation(format!("duplicate section id `{}`", s.id)));
            }
            if !headers.insert(s.header.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate header token `{}`",
                    s.header
                )));
            }
            if !is_marker(&s.header) {
                return Err(Error::validation(format!(
                    "header token `{}` must be of the form <name>",
                    s.header
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn position(&self, section_id: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.id == section_id)
    }

    pub fn position_of_header(&self, header: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.header == header)
    }

    pub fn headers(&self) -> Vec<String> {
        self.sections.iter().map(|s| s.header.clone()).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|s| s.id.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_well_formed() {
        assert_eq!(SectionScheme::synthetic().len(), 4);
        assert_eq!(SectionScheme::ami().len(), 4);
        assert_eq!(SectionScheme::soap15().len(), 15);
        assert_eq!(SectionScheme::ami().position("actions"), Some(2));
    }

    #[test]
    fn rejects_duplicate_ids() {
        assert!(SectionScheme::new("x", &["a", "a"]).is_err());
    }

    #[test]
    fn reads_scheme_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mine.txt");
        std::fs::write(&path, "# comment\nintro <hello>\noutro\n").unwrap();
        let scheme = SectionScheme::from_file(&path).unwrap();
        assert_eq!(scheme.name, "mine");
        assert_eq!(scheme.sections[0].header, "<hello>");
        assert_eq!(scheme.sections[1].header, "<outro>");
    }
}
