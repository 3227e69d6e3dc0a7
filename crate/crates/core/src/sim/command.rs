use std::fmt;

use serde::{Deserialize, Serialize};

/// Grid coordinate, serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub i32, pub i32);

impl Cell {
    pub fn manhattan(self, other: Cell) -> u32 {
        self.0.abs_diff(other.0) + self.1.abs_diff(other.1)
    }

    pub fn neighbours(self) -> [Cell; 4] {
        let Cell(x, y) = self;
        [Cell(x, y - 1), Cell(x + 1, y), Cell(x, y + 1), Cell(x - 1, y)]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Move,
    CleanCell,
    Grasp,
    Release,
    AskOwner,
    Speak,
    Recharge,
    ApiCall,
}

impl Verb {
    pub const ALL: [Verb; 8] = [
        Verb::Move,
        Verb::CleanCell,
        Verb::Grasp,
        Verb::Release,
        Verb::AskOwner,
        Verb::Speak,
        Verb::Recharge,
        Verb::ApiCall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Move => "move",
            Verb::CleanCell => "clean_cell",
            Verb::Grasp => "grasp",
            Verb::Release => "release",
            Verb::AskOwner => "ask_owner",
            Verb::Speak => "speak",
            Verb::Recharge => "recharge",
            Verb::ApiCall => "api_call",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single effector command. Every command acts from the robot's cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum Command {
    Move { to: Cell },
    CleanCell,
    Grasp { object: String },
    Release,
    AskOwner { object: String },
    Speak { text: String },
    Recharge,
    ApiCall { endpoint: String },
}

impl Command {
    pub fn verb(&self) -> Verb {
        match self {
            Command::Move { .. } => Verb::Move,
            Command::CleanCell => Verb::CleanCell,
            Command::Grasp { .. } => Verb::Grasp,
            Command::Release => Verb::Release,
            Command::AskOwner { .. } => Verb::AskOwner,
            Command::Speak { .. } => Verb::Speak,
            Command::Recharge => Verb::Recharge,
            Command::ApiCall { .. } => Verb::ApiCall,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Move { to } => write!(f, "move {to}"),
            Command::Grasp { object } => write!(f, "grasp {object}"),
            Command::AskOwner { object } => write!(f, "ask_owner {object}"),
            Command::Speak { text } => write!(f, "speak {text:?}"),
            Command::ApiCall { endpoint } => write!(f, "api_call {endpoint}"),
            other => f.write_str(other.verb().as_str()),
        }
    }
}

/// A command stamped with the tick it was issued at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectorCommand {
    #[serde(flatten)]
    pub command: Command,
    pub tick: u64,
}
