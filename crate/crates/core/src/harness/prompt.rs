//! Instruction text that asks a generator for a decodable visualization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::depth_codec::CubePath;
use crate::error::{Error, Result};
use crate::harness::manifest::Task;
use crate::seg_codec::Palette;

/// How colors are spelled out in a segmentation prompt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    JsonMap,
    RgbTuple,
    Hex,
    NaturalLanguage,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 4] = [
        PromptStyle::JsonMap,
        PromptStyle::RgbTuple,
        PromptStyle::Hex,
        PromptStyle::NaturalLanguage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::JsonMap => "json_map",
            PromptStyle::RgbTuple => "rgb_tuple",
            PromptStyle::Hex => "hex",
            PromptStyle::NaturalLanguage => "natural_language",
        }
    }

    /// The color as it appears in text of this style.
    pub fn color(self, c: [u8; 3]) -> String {
        match self {
            PromptStyle::JsonMap | PromptStyle::RgbTuple => rgb_tuple(c),
            PromptStyle::Hex => hex(c),
            PromptStyle::NaturalLanguage => match color_name(c) {
                Some(name) => name.to_string(),
                None => rgb_tuple(c),
            },
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptStyle::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown prompt style {s:?}")))
    }
}

pub fn rgb_tuple(c: [u8; 3]) -> String {
    format!("<{}, {}, {}>", c[0], c[1], c[2])
}

pub fn hex(c: [u8; 3]) -> String {
    format!("#{:02X}{:02X}{:02X}", c[0], c[1], c[2])
}

const NAMED_COLORS: [(&str, [u8; 3]); 17] = [
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("red", [255, 0, 0]),
    ("green", [0, 255, 0]),
    ("blue", [0, 0, 255]),
    ("yellow", [255, 255, 0]),
    ("cyan", [0, 255, 255]),
    ("magenta", [255, 0, 255]),
    ("gray", [128, 128, 128]),
    ("orange", [255, 165, 0]),
    ("purple", [128, 0, 128]),
    ("pink", [255, 192, 203]),
    ("brown", [165, 42, 42]),
    ("navy", [0, 0, 128]),
    ("teal", [0, 128, 128]),
    ("olive", [128, 128, 0]),
    ("maroon", [128, 0, 0]),
];

/// Plain-language name of a color, only for exact matches.
pub fn color_name(c: [u8; 3]) -> Option<&'static str> {
    NAMED_COLORS.iter().find(|(_, v)| *v == c).map(|(n, _)| *n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PromptTemplate {
    pub task: Task,
    pub style: PromptStyle,
    pub palette: Option<Palette>,
    /// Corner order described in depth prompts.
    pub depth_path: CubePath,
}

impl PromptTemplate {
    pub fn new(task: Task, style: PromptStyle, palette: Option<Palette>) -> Self {
        Self {
            task,
            style,
            palette,
            depth_path: CubePath::default(),
        }
    }
}

fn corner_name(c: [f64; 3]) -> &'static str {
    match (c[0] as u8, c[1] as u8, c[2] as u8) {
        (0, 0, 0) => "black",
        (0, 0, 1) => "blue",
        (0, 1, 0) => "green",
        (0, 1, 1) => "cyan",
        (1, 0, 0) => "red",
        (1, 0, 1) => "magenta",
        (1, 1, 0) => "yellow",
        _ => "white",
    }
}

/// `"a": "<r, g, b>"` pairs, or sentences, depending on the style.
fn color_assignments(style: PromptStyle, items: &[(String, [u8; 3])]) -> String {
    match style {
        PromptStyle::JsonMap => {
            let body: Vec<String> = items
                .iter()
                .map(|(name, c)| {
                    format!(
                        "{}: {}",
                        serde_json::to_string(name).expect("string serializes"),
                        serde_json::to_string(&rgb_tuple(*c)).expect("string serializes")
                    )
                })
                .collect();
            format!("Use this class-to-color mapping: {{{}}}.", body.join(", "))
        }
        PromptStyle::RgbTuple => items
            .iter()
            .map(|(name, c)| format!("Paint the {name} in {}.", rgb_tuple(*c)))
            .collect::<Vec<_>>()
            .join(" "),
        PromptStyle::Hex => items
            .iter()
            .map(|(name, c)| format!("The {name} is {}.", hex(*c)))
            .collect::<Vec<_>>()
            .join(" "),
        PromptStyle::NaturalLanguage => items
            .iter()
            .map(|(name, c)| format!("Show the {name} in solid {}.", style.color(*c)))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

pub fn render_prompt(t: &PromptTemplate) -> Result<String> {
    let palette = || -> Result<&Palette> {
        match &t.palette {
            Some(p) if !p.is_empty() => Ok(p),
            _ => Err(Error::Config(format!(
                "{} prompts need a palette with at least one class",
                t.task
            ))),
        }
    };
    let text = match t.task {
        Task::Depth => {
            let names: Vec<&str> = t.depth_path.corners().iter().map(|c| corner_name(*c)).collect();
            format!(
                "Generate a metric depth visualization of the input image. Color each pixel by its \
                 distance from the camera plane, moving along the edges of the RGB cube from {} at \
                 zero distance through {} to {} infinitely far away.",
                names[0],
                names[1..names.len() - 1].join(", "),
                names[names.len() - 1]
            )
        }
        Task::Normals => "Generate a surface normal visualization of the input image in camera \
                          coordinates. Surfaces facing left are pinkish red, surfaces facing up are \
                          light green, and surfaces facing the camera are light blue."
            .to_string(),
        Task::Semantic => {
            let pal = palette()?;
            let mut items: Vec<(String, [u8; 3])> =
                pal.entries().iter().map(|e| (e.name.clone(), e.color)).collect();
            items.push(("background".into(), pal.background()));
            format!(
                "Generate a semantic segmentation visualization of the input image, coloring each \
                 pixel by its class. {}",
                color_assignments(t.style, &items)
            )
        }
        Task::Referring => {
            let pal = palette()?;
            let target = &pal.entries()[0];
            let items = vec![
                ("target region".to_string(), target.color),
                ("background".to_string(), pal.background()),
            ];
            format!(
                "Generate a segmentation visualization of the input image that marks only the \
                 region described as \"{}\". {}",
                target.name,
                color_assignments(t.style, &items)
            )
        }
        Task::Instance => {
            let pal = palette()?;
            let names: Vec<&str> = pal.entries().iter().map(|e| e.name.as_str()).collect();
            let items = vec![("background".to_string(), pal.background())];
            format!(
                "Generate an instance segmentation visualization of the input image for only one \
                 class: {}. Give every individual instance its own distinct solid color. {}",
                names.join(", "),
                color_assignments(t.style, &items)
            )
        }
    };
    Ok(text)
}
