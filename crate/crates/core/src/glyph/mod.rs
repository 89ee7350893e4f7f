//! The draw-command data model.
//!
//! A [`Glyph`] is a sequence of [`Command`]s. Every command carries three
//! coordinate pairs stored as displacements from the current pen position;
//! `Move` and `Line` use only the third pair, `Curve` uses all three (two
//! off-curve controls and the endpoint), `End` uses none. Unused pairs are
//! exactly zero. Absolute geometry is derived on demand ([`PathSet`]).

mod binary;
mod path;
mod svg;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::Point;

pub use binary::{decode_record, encode_record, read_glyph_file, write_glyph_file, RECORD_BYTES};
pub use path::{
    from_pathset, normalize, pathset_from_commands, to_pathset, PathSet, Segment, Subpath,
};
pub(crate) use path::{trace_commands, NO_SLOT};
pub use svg::{parse_svg_path, serialize_svg_path, FillRule};

/// Number of character classes in a glyph set (`a`-`z`, `A`-`Z`).
pub const N_CHAR: usize = 52;
/// Default maximum command count of a glyph, including the trailing `End`.
pub const L_MAX: usize = 70;
/// Absolute pen positions must stay inside `[PEN_MIN, PEN_MAX]` EM.
pub const PEN_MIN: f64 = -0.5;
pub const PEN_MAX: f64 = 1.5;
/// Distance below which a subpath counts as closed.
pub const CLOSE_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandType {
    Move = 0,
    Line = 1,
    Curve = 2,
    End = 3,
}

impl CommandType {
    pub const ALL: [CommandType; 4] = [
        CommandType::Move,
        CommandType::Line,
        CommandType::Curve,
        CommandType::End,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<CommandType> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the command draws a segment.
    pub fn is_drawing(self) -> bool {
        matches!(self, CommandType::Line | CommandType::Curve)
    }

    /// Which of the three coordinate pairs carry data.
    pub fn used_pairs(self) -> [bool; 3] {
        match self {
            CommandType::Move | CommandType::Line => [false, false, true],
            CommandType::Curve => [true, true, true],
            CommandType::End => [false, false, false],
        }
    }
}

impl fmt::Display for CommandType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandType::Move => "move",
            CommandType::Line => "line",
            CommandType::Curve => "curve",
            CommandType::End => "end",
        };
        f.write_str(s)
    }
}

/// One draw command with its fixed six-scalar argument list
/// `(x1, y1, x2, y2, x3, y3)`, relative to the current pen position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Command {
    pub kind: CommandType,
    pub args: [f64; 6],
}

impl Command {
    pub fn new(kind: CommandType, args: [f64; 6]) -> Self {
        Command { kind, args }
    }

    pub fn move_by(d: Point) -> Self {
        Command::new(CommandType::Move, [0.0, 0.0, 0.0, 0.0, d.x, d.y])
    }

    pub fn line_by(d: Point) -> Self {
        Command::new(CommandType::Line, [0.0, 0.0, 0.0, 0.0, d.x, d.y])
    }

    pub fn curve_by(c1: Point, c2: Point, end: Point) -> Self {
        Command::new(CommandType::Curve, [c1.x, c1.y, c2.x, c2.y, end.x, end.y])
    }

    pub fn end() -> Self {
        Command::new(CommandType::End, [0.0; 6])
    }

    /// Coordinate pair `i` (0-based).
    #[inline]
    pub fn pair(&self, i: usize) -> Point {
        Point::new(self.args[2 * i], self.args[2 * i + 1])
    }

    #[inline]
    pub fn set_pair(&mut self, i: usize, p: Point) {
        self.args[2 * i] = p.x;
        self.args[2 * i + 1] = p.y;
    }

    /// Pen displacement produced by the command.
    #[inline]
    pub fn displacement(&self) -> Point {
        match self.kind {
            CommandType::End => Point::ZERO,
            _ => self.pair(2),
        }
    }

    /// Copy with unused pairs forced to zero.
    pub fn masked(mut self) -> Self {
        let used = self.kind.used_pairs();
        for (i, u) in used.iter().enumerate() {
            if !u {
                self.set_pair(i, Point::ZERO);
            }
        }
        self
    }
}

/// A command expressed in absolute coordinates. For `Move`/`Line` only `end`
/// is meaningful; for `End` nothing is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsCommand {
    pub kind: CommandType,
    pub ctrl1: Point,
    pub ctrl2: Point,
    pub end: Point,
}

impl AbsCommand {
    pub fn point(&self, i: usize) -> Point {
        match i {
            0 => self.ctrl1,
            1 => self.ctrl2,
            _ => self.end,
        }
    }

    pub fn point_mut(&mut self, i: usize) -> &mut Point {
        match i {
            0 => &mut self.ctrl1,
            1 => &mut self.ctrl2,
            _ => &mut self.end,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    pub char_class: usize,
    pub commands: Vec<Command>,
}

impl Glyph {
    pub fn new(char_class: usize, commands: Vec<Command>) -> Self {
        Glyph {
            char_class,
            commands,
        }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn kinds(&self) -> Vec<CommandType> {
        self.commands.iter().map(|c| c.kind).collect()
    }

    pub fn count(&self, kind: CommandType) -> usize {
        self.commands.iter().filter(|c| c.kind == kind).count()
    }

    /// Absolute coordinates of every command. The pen starts at the origin
    /// and advances by each command's third pair; control pairs are offsets
    /// from the pen position at the start of their command.
    pub fn to_absolute(&self) -> Vec<AbsCommand> {
        let mut pen = Point::ZERO;
        self.commands
            .iter()
            .map(|c| {
                let start = pen;

                match c.kind {
                    CommandType::End => AbsCommand {
                        kind: c.kind,
                        ctrl1: start,
                        ctrl2: start,
                        end: start,
                    },
                    CommandType::Move | CommandType::Line => {
                        pen = start + c.pair(2);
                        AbsCommand {
                            kind: c.kind,
                            ctrl1: start,
                            ctrl2: start,
                            end: pen,
                        }
                    }
                    CommandType::Curve => {
                        pen = start + c.pair(2);
                        AbsCommand {
                            kind: c.kind,
                            ctrl1: start + c.pair(0),
                            ctrl2: start + c.pair(1),
                            end: pen,
                        }
                    }
                }
            })
            .collect()
    }

    /// Inverse of [`Glyph::to_absolute`].
    pub fn from_absolute(char_class: usize, abs: &[AbsCommand]) -> Glyph {
        let mut pen = Point::ZERO;
        let commands = abs
            .iter()
            .map(|a| match a.kind {
                CommandType::End => Command::end(),
                CommandType::Move | CommandType::Line => {
                    let d = a.end - pen;
                    pen = a.end;
                    Command::new(a.kind, [0.0, 0.0, 0.0, 0.0, d.x, d.y])
                }
                CommandType::Curve => {
                    let c = Command::curve_by(a.ctrl1 - pen, a.ctrl2 - pen, a.end - pen);
                    pen = a.end;
                    c
                }
            })
            .collect();
        Glyph::new(char_class, commands)
    }

    /// Index ranges `[move, next_move_or_end)` of each subpath.
    pub fn subpath_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, c) in self.commands.iter().enumerate() {
            match c.kind {
                CommandType::Move => {
                    if let Some(s) = start {
                        out.push(s..i);
                    }
                    start = Some(i);
                }
                CommandType::End => {
                    if let Some(s) = start.take() {
                        out.push(s..i);
                    }
                    break;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(s..self.commands.len());
        }
        out
    }

    /// Largest distance between a subpath's start and its final pen position.
    pub fn max_closure_gap(&self) -> f64 {
        let abs = self.to_absolute();
        self.subpath_ranges()
            .into_iter()
            .filter(|r| r.len() > 1)
            .map(|r| abs[r.start].end.distance(abs[r.end - 1].end))
            .fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        validate(self).is_valid()
    }
}

/// Structural limits used by [`validate_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphLimits {
    pub n_char: usize,
    pub l_max: usize,
}

impl Default for GlyphLimits {
    fn default() -> Self {
        GlyphLimits {
            n_char: N_CHAR,
            l_max: L_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptySequence,
    FirstNotMove,
    MissingEnd,
    CommandAfterEnd,
    EmptySubpath,
    UnusedArgsNonZero,
    NonFinite,
    PenOutOfBounds,
    TooLong { len: usize, max: usize },
    CharClassOutOfRange { class: usize, n_char: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySequence => f.write_str("empty command sequence"),
            Violation::FirstNotMove => f.write_str("first command not Move"),
            Violation::MissingEnd => f.write_str("missing End"),
            Violation::CommandAfterEnd => f.write_str("command after End"),
            Violation::EmptySubpath => f.write_str("subpath without Line or Curve"),
            Violation::UnusedArgsNonZero => f.write_str("unused argument not zero"),
            Violation::NonFinite => f.write_str("non-finite coordinate"),
            Violation::PenOutOfBounds => f.write_str("pen position outside [-0.5, 1.5] EM"),
            Violation::TooLong { len, max } => write!(f, "{len} commands exceed limit {max}"),
            Violation::CharClassOutOfRange { class, n_char } => {
                write!(f, "char class {class} not below {n_char}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    /// Offending command, when the violation is local to one.
    pub index: Option<usize>,
    pub violation: Violation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn contains(&self, v: &Violation) -> bool {
        self.issues.iter().any(|i| &i.violation == v)
    }

    fn push(&mut self, index: Option<usize>, violation: Violation) {
        self.issues.push(Issue { index, violation });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("valid");
        }
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            match issue.index {
                Some(i) => write!(f, "command {i}: {}", issue.violation)?,
                None => write!(f, "{}", issue.violation)?,
            }
        }
        Ok(())
    }
}

pub fn validate(glyph: &Glyph) -> ValidationReport {
    validate_with(glyph, &GlyphLimits::default())
}

/// Lists every structural violation of `glyph`; an empty report means valid.
pub fn validate_with(glyph: &Glyph, limits: &GlyphLimits) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cmds = &glyph.commands;

    if glyph.char_class >= limits.n_char {
        report.push(
            None,
            Violation::CharClassOutOfRange {
                class: glyph.char_class,
                n_char: limits.n_char,
            },
        );
    }
    if cmds.is_empty() {
        report.push(None, Violation::EmptySequence);
        return report;
    }
    if cmds.len() > limits.l_max {
        report.push(
            None,
            Violation::TooLong {
                len: cmds.len(),
                max: limits.l_max,
            },
        );
    }
    if cmds[0].kind != CommandType::Move {
        report.push(Some(0), Violation::FirstNotMove);
    }

    let end_at = cmds.iter().position(|c| c.kind == CommandType::End);
    match end_at {
        None => report.push(None, Violation::MissingEnd),
        Some(e) => {
            for i in e + 1..cmds.len() {
                report.push(Some(i), Violation::CommandAfterEnd);
            }
        }
    }

    let mut pen = Point::ZERO;
    let mut open_move: Option<(usize, usize)> = None;
    let body_end = end_at.unwrap_or(cmds.len());
    for (i, c) in cmds.iter().enumerate() {
        if !c.args.iter().all(|v| v.is_finite()) {
            report.push(Some(i), Violation::NonFinite);
            continue;
        }
        let used = c.kind.used_pairs();
        let unused_nonzero = (0..3).any(|p| !used[p] && c.pair(p) != Point::ZERO);
        if unused_nonzero {
            report.push(Some(i), Violation::UnusedArgsNonZero);
        }
        if i >= body_end {
            continue;
        }
        match c.kind {
            CommandType::Move => {
                if let Some((m, 0)) = open_move {
                    report.push(Some(m), Violation::EmptySubpath);
                }
                open_move = Some((i, 0));
            }
            CommandType::Line | CommandType::Curve => {
                if let Some((_, n)) = open_move.as_mut() {
                    *n += 1;
                }
            }
            CommandType::End => {}
        }
        pen += c.displacement();
        let inside = |v: f64| (PEN_MIN..=PEN_MAX).contains(&v);
        if !(inside(pen.x) && inside(pen.y)) {
            report.push(Some(i), Violation::PenOutOfBounds);
        }
    }
    if let Some((m, 0)) = open_move {
        report.push(Some(m), Violation::EmptySubpath);
    }
    report
}

/// A glyph set keyed by character class.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Font {
    pub font_id: String,
    pub glyphs: BTreeMap<usize, Glyph>,
}

impl Font {
    pub fn new(font_id: impl Into<String>) -> Self {
        Font {
            font_id: font_id.into(),
            glyphs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, glyph: Glyph) {
        self.glyphs.insert(glyph.char_class, glyph);
    }

    pub fn validate(&self) -> Vec<(usize, ValidationReport)> {
        self.glyphs
            .iter()
            .map(|(k, g)| {
                let mut r = validate(g);
                if *k != g.char_class {
                    r.push(
                        None,
                        Violation::CharClassOutOfRange {
                            class: g.char_class,
                            n_char: N_CHAR,
                        },
                    );
                }
                (*k, r)
            })
            .filter(|(_, r)| !r.is_valid())
            .collect()
    }
}
