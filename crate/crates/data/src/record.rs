use std::fmt;
use std::str::FromStr;

/// Which collection an image comes from: `A` is the international set, `B`
/// the Mediterranean one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    A,
    B,
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(Source::A),
            "B" | "b" => Ok(Source::B),
            _ => Err(format!("unknown source '{s}' (A or B)")),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::A => "A",
            Source::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            _ => Err(format!("unknown split '{s}'")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

/// One labelled image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub image_path: String,
    pub dish: String,
    pub category: Option<String>,
    pub source: Source,
    pub split: Split,
}

impl SampleRecord {
    pub fn new(path: impl Into<String>, dish: impl Into<String>, category: Option<&str>, source: Source) -> Self {
        Self {
            image_path: path.into(),
            dish: dish.into(),
            category: category.map(str::to_string),
            source,
            split: Split::Unassigned,
        }
    }
}

/// The twelve food categories of the Mediterranean set, in table order.
pub const CATEGORIES: [&str; 12] = [
    "Desserts and sweets",
    "Meats",
    "Seafood",
    "Pasta, rice and other cereals",
    "Vegetables",
    "Salads and cold dishes",
    "Soups, broths and creams",
    "Sauces",
    "Legumes",
    "Eggs",
    "Snails",
    "Mushrooms",
];
