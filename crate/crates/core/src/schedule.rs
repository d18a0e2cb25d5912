//! From layer assignments to deployable no-wait schedules.
//!
//! Slot numbering starts at 1: a replication in layer `L` crosses normalized
//! link `l` during slot `L + l - 1`, so its injection time at switch `a` is
//! `L + a - 1`. Occupancy repeats with the hyperperiod.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::coloring::GoodColoring;
use crate::error::{Error, Result};
use crate::model::{Direction, Instance, Normalized, Port, Topology};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub stream: String,
    pub replication: u64,
    pub injection_time: u64,
    /// Explicit per-hop transmission slots, first hop first. Absent means
    /// "derived from the injection time".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop_slots: Option<Vec<u64>>,
}

/// One direction's injection times over its hyperperiod.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub hyperperiod: u64,
    pub direction: Direction,
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn empty(direction: Direction) -> Self {
        Self {
            hyperperiod: 1,
            direction,
            entries: Vec::new(),
        }
    }

    /// Fills in `hop_slots` from the injection times.
    pub fn with_hop_slots(mut self, instance: &Instance) -> Self {
        let by_id: BTreeMap<&str, (u32, u32)> = instance
            .streams()
            .iter()
            .map(|s| (s.id.as_str(), (s.a, s.b)))
            .collect();
        for e in &mut self.entries {
            if let Some(&(a, b)) = by_id.get(e.stream.as_str()) {
                e.hop_slots = Some((0..(b - a) as u64).map(|h| e.injection_time + h).collect());
            }
        }
        self
    }
}

/// Both directions of a chain, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub format_version: u32,
    pub switches: u32,
    pub schedules: Vec<Schedule>,
    /// Unknown per-stream fields of the instance, echoed back.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stream_metadata: BTreeMap<String, Map<String, Value>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ScheduleDocument {
    pub fn new(normalized: &Normalized, ltr: Schedule, rtl: Schedule) -> Self {
        let stream_metadata = normalized
            .directions()
            .iter()
            .flat_map(|inst| inst.streams())
            .filter(|s| !s.extra.is_empty())
            .map(|s| (s.id.clone(), s.extra.clone()))
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            switches: normalized.topology().switches(),
            schedules: vec![ltr, rtl],
            stream_metadata,
            extra: normalized.extra.clone(),
        }
    }

    pub fn get(&self, direction: Direction) -> Option<&Schedule> {
        self.schedules.iter().find(|s| s.direction == direction)
    }

    /// Accepts either a full document or a bare single-direction schedule.
    pub fn from_json(text: &str, switches: u32) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Doc(ScheduleDocument),
            Single(Schedule),
        }
        // parse once untyped so syntax errors keep their line and column
        let value: Value = serde_json::from_str(text)?;
        match serde_json::from_value(value)? {
            Either::Doc(d) => {
                if d.format_version != FORMAT_VERSION {
                    return Err(Error::UnsupportedFormatVersion(d.format_version));
                }
                Ok(d)
            }
            Either::Single(s) => Ok(Self {
                format_version: FORMAT_VERSION,
                switches,
                schedules: vec![s],
                stream_metadata: BTreeMap::new(),
                extra: Map::new(),
            }),
        }
    }
}

/// Places replication `i` of each stream in its assigned layer.
pub fn synthesize(coloring: &GoodColoring, instance: &Instance) -> Result<Schedule> {
    if coloring.stream_count() != instance.len() || coloring.hyperperiod() != instance.hyperperiod()
    {
        return Err(Error::Precondition(format!(
            "coloring covers {} streams over {}, instance has {} over {}",
            coloring.stream_count(),
            coloring.hyperperiod(),
            instance.len(),
            instance.hyperperiod()
        )));
    }
    let mut entries = Vec::with_capacity(coloring.entry_count());
    for (ord, s) in instance.streams().iter().enumerate() {
        for (i, &layer) in coloring.layers_of(ord).iter().enumerate() {
            entries.push(ScheduleEntry {
                stream: s.id.clone(),
                replication: i as u64 + 1,
                injection_time: layer + s.a as u64 - 1,
                hop_slots: None,
            });
        }
    }
    Ok(Schedule {
        hyperperiod: instance.hyperperiod(),
        direction: instance.direction(),
        entries,
    })
}

/// Slot in `1..=hyperperiod` that `slot` falls on once the schedule wraps.
pub fn wrap_slot(slot: u64, hyperperiod: u64) -> u64 {
    (slot + hyperperiod - 1) % hyperperiod + 1
}

/// A cell of the Gantt chart: normalized link and wrapped slot, tagged with
/// the entry that occupies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupancy {
    pub entry: usize,
    pub link: u32,
    pub slot: u64,
}

/// Cells occupied by `schedule`; entries naming unknown streams are skipped.
pub fn occupancy(schedule: &Schedule, instance: &Instance) -> Vec<Occupancy> {
    let by_id: BTreeMap<&str, (u32, u32)> = instance
        .streams()
        .iter()
        .map(|s| (s.id.as_str(), (s.a, s.b)))
        .collect();
    let p = schedule.hyperperiod.max(1);
    let mut cells = Vec::new();
    for (idx, e) in schedule.entries.iter().enumerate() {
        if let Some(&(a, b)) = by_id.get(e.stream.as_str()) {
            for link in a..b {
                cells.push(Occupancy {
                    entry: idx,
                    link,
                    slot: wrap_slot(e.injection_time + (link - a) as u64, p),
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclEntry {
    /// Inclusive start, in time units from the start of the cycle.
    pub start: u64,
    /// Exclusive end.
    pub end: u64,
    /// One character per queue gate, `1` = open.
    pub gates: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortGcl {
    pub port: String,
    pub direction: Direction,
    pub cycle: u64,
    pub entries: Vec<GclEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclTable {
    pub format_version: u32,
    pub ports: Vec<PortGcl>,
}

pub const QUEUES_PER_PORT: usize = 8;

/// Gate control lists for every egress port of the chain. A no-wait
/// schedule never holds a frame, so every gate stays open for the whole
/// cycle.
pub fn emit_gcl(document: &ScheduleDocument) -> Result<GclTable> {
    let topology = Topology::new(document.switches)?;
    let mut ports = Vec::new();
    for direction in [Direction::LeftToRight, Direction::RightToLeft] {
        let cycle = document.get(direction).map(|s| s.hyperperiod).unwrap_or(1);
        for link in topology.links() {
            ports.push(PortGcl {
                port: topology.port(direction, link).to_string(),
                direction,
                cycle,
                entries: vec![GclEntry {
                    start: 0,
                    end: cycle,
                    gates: "1".repeat(QUEUES_PER_PORT),
                }],
            });
        }
    }
    Ok(GclTable {
        format_version: FORMAT_VERSION,
        ports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Text,
    Svg,
}

impl std::str::FromStr for GanttFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(GanttFormat::Text),
            "svg" => Ok(GanttFormat::Svg),
            other => Err(Error::UnsupportedFormat(other.to_owned())),
        }
    }
}

const GLYPHS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

/// Grid of ports (rows, in travel order) by slots `1..=P` (columns).
struct Grid {
    ports: Vec<Port>,
    hyperperiod: u64,
    /// `cells[row][slot-1]`: stream ordinals occupying the cell.
    cells: Vec<Vec<Vec<usize>>>,
}

fn grid(schedule: &Schedule, instance: &Instance) -> Grid {
    let topology = instance.topology();
    let p = schedule.hyperperiod.max(1);
    let ord: BTreeMap<&str, usize> = instance
        .streams()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut cells = vec![vec![Vec::new(); p as usize]; topology.link_count() as usize];
    for c in occupancy(schedule, instance) {
        let s = ord[schedule.entries[c.entry].stream.as_str()];
        let cell = &mut cells[c.link as usize - 1][c.slot as usize - 1];
        if !cell.contains(&s) {
            cell.push(s);
        }
    }
    Grid {
        ports: topology
            .links()
            .map(|l| topology.port(schedule.direction, l))
            .collect(),
        hyperperiod: p,
        cells,
    }
}

/// Renders one direction as a Gantt chart.
pub fn render_gantt(schedule: &Schedule, instance: &Instance, format: GanttFormat) -> String {
    let g = grid(schedule, instance);
    match format {
        GanttFormat::Text => render_text(&g, schedule, instance),
        GanttFormat::Svg => {
            let mut out = String::new();
            svg_open(&mut out, svg_width(&g), svg_height(&g));
            svg_body(&mut out, &g, schedule, instance, 0);
            out.push_str("</svg>\n");
            out
        }
    }
}

/// Renders every direction of a document into a single chart.
pub fn render_document(
    document: &ScheduleDocument,
    normalized: &Normalized,
    format: GanttFormat,
) -> String {
    let parts: Vec<(&Schedule, &Instance)> = document
        .schedules
        .iter()
        .map(|s| (s, normalized.get(s.direction)))
        .collect();
    match format {
        GanttFormat::Text => parts
            .iter()
            .map(|(s, i)| render_gantt(s, i, GanttFormat::Text))
            .collect::<Vec<_>>()
            .join("\n"),
        GanttFormat::Svg => {
            let grids: Vec<Grid> = parts.iter().map(|(s, i)| grid(s, i)).collect();
            let width = grids.iter().map(svg_width).max().unwrap_or(0);
            let height: u64 = grids.iter().map(svg_height).sum();
            let mut out = String::new();
            svg_open(&mut out, width, height);
            let mut y = 0;
            for (g, (s, i)) in grids.iter().zip(&parts) {
                svg_body(&mut out, g, s, i, y);
                y += svg_height(g);
            }
            out.push_str("</svg>\n");
            out
        }
    }
}

fn glyph(ord: usize) -> char {
    GLYPHS[ord % GLYPHS.len()] as char
}

fn render_text(g: &Grid, schedule: &Schedule, instance: &Instance) -> String {
    let labels: Vec<String> = g.ports.iter().map(|p| p.to_string()).collect();
    let width = labels.iter().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "direction {} hyperperiod {}",
        schedule.direction, g.hyperperiod
    );
    for (row, label) in g.cells.iter().zip(&labels) {
        let _ = write!(out, "{label:<width$} |");
        for cell in row {
            out.push(match cell.as_slice() {
                [] => '.',
                [s] => glyph(*s),
                _ => '!',
            });
        }
        out.push_str("|\n");
    }
    for (ord, s) in instance.streams().iter().enumerate() {
        let _ = writeln!(out, "  {} = {}", glyph(ord), s.id);
    }
    out
}

const CELL: u64 = 16;
const LABEL_W: u64 = 80;
const HEADER_H: u64 = 20;

fn svg_width(g: &Grid) -> u64 {
    LABEL_W + CELL * g.hyperperiod + 10
}

fn svg_height(g: &Grid) -> u64 {
    HEADER_H + CELL * g.ports.len() as u64 + 10
}

fn svg_open(out: &mut String, w: u64, h: u64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="monospace" font-size="10">"#
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_body(out: &mut String, g: &Grid, schedule: &Schedule, instance: &Instance, y0: u64) {
    let _ = writeln!(
        out,
        r#"<text x="2" y="{}">direction {} hyperperiod {}</text>"#,
        y0 + 12,
        schedule.direction,
        g.hyperperiod
    );
    for (r, (row, port)) in g.cells.iter().zip(&g.ports).enumerate() {
        let y = y0 + HEADER_H + r as u64 * CELL;
        let _ = writeln!(
            out,
            r#"<text x="2" y="{}">{}</text>"#,
            y + 12,
            escape(&port.to_string())
        );
        for (c, cell) in row.iter().enumerate() {
            let x = LABEL_W + c as u64 * CELL;
            let fill = match cell.as_slice() {
                [] => "#ffffff".to_owned(),
                [s] => format!("hsl({},70%,60%)", (*s as u64 * 137) % 360),
                _ => "#ff0000".to_owned(),
            };
            let _ = write!(
                out,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#999999">"##
            );
            if !cell.is_empty() {
                let ids: Vec<String> = cell
                    .iter()
                    .map(|&s| escape(&instance.streams()[s].id))
                    .collect();
                let _ = write!(out, "<title>{}</title>", ids.join(","));
            }
            out.push_str("</rect>\n");
        }
    }
}
