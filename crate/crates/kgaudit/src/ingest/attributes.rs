//! Sensitive user and provider attributes.

use serde::{Deserialize, Serialize};

/// Gender group of a user or provider.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        }
    }
}

/// Age bucket of a user or provider.
///
/// The seven buckets are fixed; group comparisons always enumerate all of
/// them, flagging empty ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "Under 18")]
    Under18,
    #[serde(rename = "18-24")]
    From18,
    #[serde(rename = "25-34")]
    From25,
    #[serde(rename = "35-44")]
    From35,
    #[serde(rename = "45-49")]
    From45,
    #[serde(rename = "50-55")]
    From50,
    #[serde(rename = "56+")]
    Over56,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 7] = [
        AgeGroup::Under18,
        AgeGroup::From18,
        AgeGroup::From25,
        AgeGroup::From35,
        AgeGroup::From45,
        AgeGroup::From50,
        AgeGroup::Over56,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::Under18 => "Under 18",
            AgeGroup::From18 => "18-24",
            AgeGroup::From25 => "25-34",
            AgeGroup::From35 => "35-44",
            AgeGroup::From45 => "45-49",
            AgeGroup::From50 => "50-55",
            AgeGroup::Over56 => "56+",
        }
    }
}

fn is_missing_marker(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "na" | "n/a" | "-" | "unknown"
    )
}

/// Parses a gender field. Missing markers (`NA`, `-`, empty, ...) yield
/// `None`; any other unrecognized token is an error.
pub fn parse_gender(s: &str) -> std::result::Result<Option<Gender>, String> {
    let t = s.trim();
    if is_missing_marker(t) {
        return Ok(None);
    }
    match t.to_ascii_lowercase().as_str() {
        "m" | "male" => Ok(Some(Gender::Male)),
        "f" | "female" => Ok(Some(Gender::Female)),
        other => Err(format!("unrecognized gender value {other:?}")),
    }
}

/// Parses an age field: either a bucket label (`18-24`, `56+`, `Under 18`)
/// or the numeric bucket code used by common rating dumps (1, 18, 25, 35,
/// 45, 50, 56). Missing markers yield `None`.
pub fn parse_age(s: &str) -> std::result::Result<Option<AgeGroup>, String> {
    let t = s.trim();
    if is_missing_marker(t) {
        return Ok(None);
    }
    let group = match t.to_ascii_lowercase().as_str() {
        "under 18" | "under18" | "1" => AgeGroup::Under18,
        "18-24" | "18" => AgeGroup::From18,
        "25-34" | "25" => AgeGroup::From25,
        "35-44" | "35" => AgeGroup::From35,
        "45-49" | "45" => AgeGroup::From45,
        "50-55" | "50" => AgeGroup::From50,
        "56+" | "56" => AgeGroup::Over56,
        other => return Err(format!("unrecognized age value {other:?}")),
    };
    Ok(Some(group))
}

/// Sensitive attributes of one user or provider; either field may be absent
/// in the raw data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Option<Gender>,
    pub age: Option<AgeGroup>,
}

impl Demographics {
    /// Whether both sensitive attributes are present.
    pub fn is_complete(&self) -> bool {
        self.gender.is_some() && self.age.is_some()
    }
}
