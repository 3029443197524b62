use std::collections::{BTreeSet, HashMap};

use super::QoSRecord;
use crate::error::{Error, Result};

/// Id reserved for a missing categorical value in every vocabulary.
pub const MISSING_ID: usize = 0;

/// Dense mapping from categorical strings to ids `1..len()`; id 0 is MISSING.
///
/// Tokens are assigned in sorted order, so the mapping depends only on the
/// set of tokens seen.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = Option<&'a str>>,
    {
        let set: BTreeSet<&str> = tokens.into_iter().flatten().collect();
        let tokens: Vec<String> = set.into_iter().map(str::to_string).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i + 1))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Size including the MISSING row.
    pub fn len(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: Option<&str>) -> Result<usize> {
        match token {
            None => Ok(MISSING_ID),
            Some(t) => self
                .index
                .get(t)
                .copied()
                .ok_or_else(|| Error::Data(format!("token `{t}` not in vocabulary"))),
        }
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        id.checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map(String::as_str)
    }

    /// Non-missing tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line, in id order starting at 1.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_tokens(text.lines().filter(|l| !l.is_empty()).map(Some))
    }
}

/// The six categorical inputs embedded by the model, in concatenation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Feature {
    UserId,
    ServiceId,
    ServiceAs,
    UserAs,
    ServiceCity,
    UserCity,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::UserId,
        Feature::ServiceId,
        Feature::ServiceAs,
        Feature::UserAs,
        Feature::ServiceCity,
        Feature::UserCity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::UserId => "user_id",
            Feature::ServiceId => "service_id",
            Feature::ServiceAs => "service_as",
            Feature::UserAs => "user_as",
            Feature::ServiceCity => "service_city",
            Feature::UserCity => "user_city",
        }
    }

    fn token(self, r: &QoSRecord) -> Option<String> {
        match self {
            Feature::UserId => Some(r.user_id.to_string()),
            Feature::ServiceId => Some(r.service_id.to_string()),
            Feature::ServiceAs => r.service_as.clone(),
            Feature::UserAs => r.user_as.clone(),
            Feature::ServiceCity => r.service_city.clone(),
            Feature::UserCity => r.user_city.clone(),
        }
    }
}

/// Vocabulary sizes (MISSING row included) in [`Feature::ALL`] order.
pub type VocabSizes = [usize; 6];

/// A record reduced to embedding row indices plus its label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncodedRecord {
    pub ids: [usize; 6],
    pub rt: f64,
}

/// The six vocabularies needed to encode records.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    vocabs: [Vocabulary; 6],
}

impl Encoder {
    pub fn fit(records: &[QoSRecord]) -> Self {
        let vocabs = Feature::ALL.map(|f| {
            let toks: Vec<Option<String>> = records.iter().map(|r| f.token(r)).collect();
            Vocabulary::from_tokens(toks.iter().map(|t| t.as_deref()))
        });
        Encoder { vocabs }
    }

    pub fn vocab(&self, f: Feature) -> &Vocabulary {
        &self.vocabs[Feature::ALL.iter().position(|x| *x == f).unwrap()]
    }

    pub fn sizes(&self) -> VocabSizes {
        std::array::from_fn(|i| self.vocabs[i].len())
    }

    pub fn encode(&self, r: &QoSRecord) -> Result<EncodedRecord> {
        let mut ids = [0; 6];
        for (i, f) in Feature::ALL.iter().enumerate() {
            ids[i] = self.vocabs[i].id(f.token(r).as_deref())?;
        }
        Ok(EncodedRecord { ids, rt: r.rt })
    }

    pub fn encode_all(&self, records: &[QoSRecord]) -> Result<Vec<EncodedRecord>> {
        records.iter().map(|r| self.encode(r)).collect()
    }
}
