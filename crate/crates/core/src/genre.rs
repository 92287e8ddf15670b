//! The fixed genre table shared by every model, report and file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const N_GENRES: usize = 11;

/// Canonical genre with a stable integer code (alphabetical order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Genre {
    Blues = 0,
    Classical = 1,
    Country = 2,
    Electronic = 3,
    Folk = 4,
    HipHop = 5,
    Jazz = 6,
    Metal = 7,
    Pop = 8,
    Reggae = 9,
    Rock = 10,
}

impl Genre {
    pub const ALL: [Genre; N_GENRES] = [
        Genre::Blues,
        Genre::Classical,
        Genre::Country,
        Genre::Electronic,
        Genre::Folk,
        Genre::HipHop,
        Genre::Jazz,
        Genre::Metal,
        Genre::Pop,
        Genre::Reggae,
        Genre::Rock,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Genre> {
        Genre::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Genre::Blues => "Blues",
            Genre::Classical => "Classical",
            Genre::Country => "Country",
            Genre::Electronic => "Electronic",
            Genre::Folk => "Folk",
            Genre::HipHop => "Hip-hop",
            Genre::Jazz => "Jazz",
            Genre::Metal => "Metal",
            Genre::Pop => "Pop",
            Genre::Reggae => "Reggae",
            Genre::Rock => "Rock",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Genre::ALL.iter().map(|g| g.name()).collect()
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown genre {name:?}; valid genres: {}", Genre::names().join(", "))]
pub struct UnknownGenre {
    pub name: String,
}

impl FromStr for Genre {
    type Err = UnknownGenre;

    /// Case-insensitive; spaces, hyphens and underscores are ignored so
    /// "Hip hop", "hiphop" and "Hip-hop" all resolve to the same genre.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '-' | '_'))
            .flat_map(char::to_lowercase)
            .collect();
        Genre::ALL
            .iter()
            .copied()
            .find(|g| {
                g.name()
                    .chars()
                    .filter(|c| *c != '-')
                    .flat_map(char::to_lowercase)
                    .eq(key.chars())
            })
            .ok_or_else(|| UnknownGenre { name: s.to_string() })
    }
}

impl Serialize for Genre {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Genre {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a `;`-separated list of genre names. `/` is accepted as well.
pub fn parse_genre_set(s: &str) -> Result<Vec<Genre>, UnknownGenre> {
    let mut out = Vec::new();
    for part in s.split([';', '/']).map(str::trim).filter(|p| !p.is_empty()) {
        let g: Genre = part.parse()?;
        if !out.contains(&g) {
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_a_bijection_in_alphabetical_order() {
        for (i, g) in Genre::ALL.iter().enumerate() {
            assert_eq!(g.code(), i);
            assert_eq!(Genre::from_code(i), Some(*g));
        }
        assert_eq!(Genre::from_code(11), None);
        let names = Genre::names();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(names.first(), Some(&"Blues"));
        assert_eq!(names.last(), Some(&"Rock"));
    }

    #[test]
    fn lenient_parsing() {
        assert_eq!("Hip hop".parse::<Genre>().unwrap(), Genre::HipHop);
        assert_eq!("hiphop".parse::<Genre>().unwrap(), Genre::HipHop);
        assert_eq!("ROCK".parse::<Genre>().unwrap(), Genre::Rock);
        assert!("Polka".parse::<Genre>().is_err());
        assert_eq!(
            parse_genre_set("Jazz;Hip hop").unwrap(),
            vec![Genre::Jazz, Genre::HipHop]
        );
        assert_eq!(
            parse_genre_set("Country/Blues").unwrap(),
            vec![Genre::Country, Genre::Blues]
        );
    }

    #[test]
    fn serde_uses_canonical_names() {
        let json = serde_json::to_string(&Genre::HipHop).unwrap();
        assert_eq!(json, "\"Hip-hop\"");
        let back: Genre = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Genre::HipHop);
    }
}
