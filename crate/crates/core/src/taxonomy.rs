//! The eight-category label space.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
}

/// A dark-pattern category. Declaration order is the canonical order, which
/// is alphabetical by display name and doubles as the argmax tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    ForcedAction,
    Misdirection,
    NotDarkPattern,
    Obstruction,
    Scarcity,
    Sneaking,
    SocialProof,
    Urgency,
}

impl Category {
    pub const COUNT: usize = 8;

    pub const ALL: [Category; Category::COUNT] = [
        Category::ForcedAction,
        Category::Misdirection,
        Category::NotDarkPattern,
        Category::Obstruction,
        Category::Scarcity,
        Category::Sneaking,
        Category::SocialProof,
        Category::Urgency,
    ];

    /// The seven categories that describe a dark pattern.
    pub const DARK: [Category; 7] = [
        Category::ForcedAction,
        Category::Misdirection,
        Category::Obstruction,
        Category::Scarcity,
        Category::Sneaking,
        Category::SocialProof,
        Category::Urgency,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            Category::ForcedAction => "Forced Action",
            Category::Misdirection => "Misdirection",
            Category::NotDarkPattern => "Not Dark Pattern",
            Category::Obstruction => "Obstruction",
            Category::Scarcity => "Scarcity",
            Category::Sneaking => "Sneaking",
            Category::SocialProof => "Social Proof",
            Category::Urgency => "Urgency",
        }
    }

    /// Position in the canonical order.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Category::ALL.get(i).copied()
    }

    pub fn is_dark(self) -> bool {
        self != Category::NotDarkPattern
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Canonical category order: alphabetical by display name.
pub fn canonical_order() -> &'static [Category; Category::COUNT] {
    &Category::ALL
}

fn label_key(raw: &str) -> String {
    raw.chars()
        .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Parses a label, ignoring case, whitespace, underscores and hyphens.
pub fn parse_label(raw: &str) -> Result<Category, TaxonomyError> {
    let key = label_key(raw);
    Category::ALL
        .iter()
        .copied()
        .find(|c| label_key(c.display_name()) == key)
        .ok_or_else(|| TaxonomyError::UnknownLabel(raw.to_string()))
}

impl FromStr for Category {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.display_name())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_label(&raw).map_err(de::Error::custom)
    }
}

/// A dense value per category, indexed by [`Category`].
///
/// Serializes as a JSON object keyed by display name in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CategoryMap<T>(pub [T; Category::COUNT]);

impl<T> CategoryMap<T> {
    pub fn from_fn(mut f: impl FnMut(Category) -> T) -> Self {
        CategoryMap(std::array::from_fn(|i| f(Category::ALL[i])))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, &T)> + '_ {
        Category::ALL.iter().copied().zip(self.0.iter())
    }

    pub fn values(&self) -> &[T; Category::COUNT] {
        &self.0
    }

    pub fn map<U>(&self, mut f: impl FnMut(Category, &T) -> U) -> CategoryMap<U> {
        CategoryMap::from_fn(|c| f(c, &self.0[c.index()]))
    }
}

impl<T: Clone> CategoryMap<T> {
    pub fn filled(value: T) -> Self {
        CategoryMap::from_fn(|_| value.clone())
    }
}

impl<T> Index<Category> for CategoryMap<T> {
    type Output = T;

    fn index(&self, c: Category) -> &T {
        &self.0[c.index()]
    }
}

impl<T> IndexMut<Category> for CategoryMap<T> {
    fn index_mut(&mut self, c: Category) -> &mut T {
        &mut self.0[c.index()]
    }
}

impl<T: Serialize> Serialize for CategoryMap<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(Category::COUNT))?;
        for (c, v) in self.iter() {
            map.serialize_entry(c.display_name(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for CategoryMap<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for MapVisitor<T> {
            type Value = CategoryMap<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object with one entry per category")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut slots: [Option<T>; Category::COUNT] = Default::default();
                while let Some(key) = access.next_key::<String>()? {
                    let c = parse_label(&key).map_err(de::Error::custom)?;
                    if slots[c.index()].is_some() {
                        return Err(de::Error::custom(format!("duplicate category {key:?}")));
                    }
                    slots[c.index()] = Some(access.next_value()?);
                }
                let mut out = Vec::with_capacity(Category::COUNT);
                for (i, slot) in slots.into_iter().enumerate() {
                    match slot {
                        Some(v) => out.push(v),
                        None => {
                            return Err(de::Error::custom(format!(
                                "missing category {:?}",
                                Category::ALL[i].display_name()
                            )))
                        }
                    }
                }
                let arr: [T; Category::COUNT] = out
                    .try_into()
                    .unwrap_or_else(|_| unreachable!("eight slots filled"));
                Ok(CategoryMap(arr))
            }
        }

        deserializer.deserialize_map(MapVisitor(std::marker::PhantomData))
    }
}
