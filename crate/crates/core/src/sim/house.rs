use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::command::{Cell, Command, Verb};
use super::scenario::{CostTable, Fault, Scenario, ScheduledEvent};
use crate::docs::{Layout, ObjectInfo, WorldEventDoc, ZoneInfo};
use crate::predicate::{Facts, Vocabulary};

pub const MAX_DIRT: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellState {
    pub room: Option<String>,
    pub zone: Option<String>,
    pub dirt: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectState {
    /// `None` while held or after the owner took it away.
    pub cell: Option<Cell>,
    pub present: bool,
    pub graspable: bool,
    pub blocks: bool,
    pub in_danger: bool,
    pub hazards: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub cell: Cell,
    pub battery: u32,
    pub capacity: u32,
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Owner {
    pub cell: Cell,
    pub responds_after: u64,
    /// (due tick, object id), in request order.
    pub pending: Vec<(u64, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEndpoint {
    pub fails: bool,
    pub calls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ZoneMeta {
    id: String,
    room: String,
    task: String,
    essential: bool,
    urgency: f64,
    importance: f64,
    tags: Vec<String>,
    cells: Vec<Cell>,
}

/// Proof of the right to drive effectors. The house hands out exactly one.
#[derive(Debug)]
pub struct EffectorToken {
    _private: (),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub accepted: bool,
    pub reason: Option<String>,
    pub energy: u32,
    pub battery: u32,
    pub cell: Cell,
}

impl StepResult {
    fn rejected(reason: &str, robot: &Robot) -> StepResult {
        StepResult {
            accepted: false,
            reason: Some(reason.to_string()),
            energy: 0,
            battery: robot.battery,
            cell: robot.cell,
        }
    }
}

/// The simulated household.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseState {
    pub width: i32,
    pub height: i32,
    pub walls: BTreeSet<Cell>,
    pub cells: BTreeMap<Cell, CellState>,
    pub objects: BTreeMap<String, ObjectState>,
    pub robot: Robot,
    pub owner: Owner,
    pub station: Cell,
    pub costs: CostTable,
    pub faults: Vec<Fault>,
    pub endpoints: BTreeMap<String, ApiEndpoint>,
    pub speech: Vec<String>,
    pub effectors: BTreeSet<Verb>,
    pub tick: u64,
    zones: Vec<ZoneMeta>,
    token_issued: bool,
}

impl HouseState {
    pub fn from_scenario(s: &Scenario) -> HouseState {
        let walls: BTreeSet<Cell> = s.walls.iter().copied().collect();
        let mut cells = BTreeMap::new();
        for y in 0..s.height {
            for x in 0..s.width {
                let c = Cell(x, y);
                if !walls.contains(&c) {
                    cells.insert(
                        c,
                        CellState {
                            room: None,
                            zone: None,
                            dirt: 0,
                        },
                    );
                }
            }
        }
        let mut zones = Vec::new();
        for z in &s.zones {
            for dc in &z.cells {
                if let Some(cs) = cells.get_mut(&dc.cell) {
                    cs.room = Some(z.room.clone());
                    cs.zone = Some(z.id.clone());
                    cs.dirt = dc.dirt.min(MAX_DIRT);
                }
            }
            zones.push(ZoneMeta {
                id: z.id.clone(),
                room: z.room.clone(),
                task: z.task.clone(),
                essential: z.essential,
                urgency: z.urgency,
                importance: z.importance,
                tags: z.tags.clone(),
                cells: z.cells.iter().map(|d| d.cell).collect(),
            });
        }
        let objects = s
            .objects
            .iter()
            .map(|o| {
                (
                    o.id.clone(),
                    ObjectState {
                        cell: Some(o.cell),
                        present: true,
                        graspable: o.graspable,
                        blocks: o.blocks,
                        in_danger: o.in_danger,
                        hazards: o.hazards.clone(),
                    },
                )
            })
            .collect();
        let endpoints = s
            .api_endpoints
            .iter()
            .map(|e| {
                (
                    e.name.clone(),
                    ApiEndpoint {
                        fails: e.fails,
                        calls: 0,
                    },
                )
            })
            .collect();
        HouseState {
            width: s.width,
            height: s.height,
            walls,
            cells,
            objects,
            robot: Robot {
                cell: s.robot.cell,
                battery: s.robot.battery,
                capacity: s.robot.capacity,
                holding: None,
            },
            owner: Owner {
                cell: s.owner.cell,
                responds_after: s.owner.responds_after,
                pending: Vec::new(),
            },
            station: s.station,
            costs: s.costs,
            faults: s.faults.clone(),
            endpoints,
            speech: Vec::new(),
            effectors: match &s.effectors {
                Some(v) => v.iter().copied().collect(),
                None => Verb::ALL.into_iter().collect(),
            },
            tick: 0,
            zones,
            token_issued: false,
        }
    }

    /// The single effector token. Later calls return `None`.
    pub fn take_effector_token(&mut self) -> Option<EffectorToken> {
        if self.token_issued {
            return None;
        }
        self.token_issued = true;
        Some(EffectorToken { _private: () })
    }

    pub fn is_floor(&self, c: Cell) -> bool {
        self.cells.contains_key(&c)
    }

    fn blocked_by(&self, c: Cell) -> Option<&str> {
        self.objects
            .iter()
            .find(|(_, o)| o.present && o.blocks && o.cell == Some(c))
            .map(|(id, _)| id.as_str())
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked_by(c).is_some()
    }

    /// Cells of `zone` in declaration order, empty for an unknown zone.
    pub fn zone_cells(&self, zone: &str) -> Vec<Cell> {
        self.zones
            .iter()
            .find(|z| z.id == zone)
            .map(|z| z.cells.clone())
            .unwrap_or_default()
    }

    pub fn registered(&self, verb: Verb) -> bool {
        self.effectors.contains(&verb)
    }

    /// Shortest path (excluding `from`) avoiding walls and, when possible,
    /// blocking objects. Falls back to a wall-only route so that a blocked
    /// goal shows up as a rejected move rather than no move at all.
    pub fn route(&self, from: Cell, to: Cell) -> Option<Vec<Cell>> {
        self.bfs(from, to, true).or_else(|| self.bfs(from, to, false))
    }

    fn bfs(&self, from: Cell, to: Cell, avoid_objects: bool) -> Option<Vec<Cell>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut prev: BTreeMap<Cell, Cell> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbours() {
                if !self.is_floor(n) || seen.contains(&n) {
                    continue;
                }
                if avoid_objects && n != to && self.is_blocked(n) {
                    continue;
                }
                seen.insert(n);
                prev.insert(n, c);
                if n == to {
                    let mut path = vec![n];
                    let mut cur = n;
                    while let Some(&p) = prev.get(&cur) {
                        if p == from {
                            break;
                        }
                        path.push(p);
                        cur = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(n);
            }
        }
        None
    }

    fn fault_for(&self, verb: Verb, cell: Cell) -> Option<&str> {
        let zone = self.cells.get(&cell).and_then(|c| c.zone.as_deref());
        self.faults
            .iter()
            .find(|f| f.verb == verb && (f.zone.is_none() || f.zone.as_deref() == zone))
            .map(|f| f.reason.as_str())
    }

    /// Applies one effector command. Rejected commands leave the state
    /// untouched and cost nothing.
    pub fn step(&mut self, _token: &EffectorToken, command: &Command) -> StepResult {
        let verb = command.verb();
        if !self.registered(verb) {
            return StepResult::rejected("unsupported-effector", &self.robot);
        }
        let cost = self.costs.cost(verb);
        if self.robot.battery == 0 || self.robot.battery < cost {
            return StepResult::rejected("no-power", &self.robot);
        }
        let here = self.robot.cell;
        if let Some(reason) = self.fault_for(verb, here) {
            let reason = reason.to_string();
            return StepResult::rejected(&reason, &self.robot);
        }

        let outcome: Result<(), &str> = match command {
            Command::Move { to } => {
                if !self.is_floor(*to) {
                    Err("wall")
                } else if here.manhattan(*to) != 1 {
                    Err("not-adjacent")
                } else if self.is_blocked(*to) {
                    Err("blocked")
                } else {
                    self.robot.cell = *to;
                    Ok(())
                }
            }
            Command::CleanCell => match self.cells.get_mut(&here) {
                Some(c) if c.dirt > 0 => {
                    c.dirt -= 1;
                    Ok(())
                }
                _ => Err("already-clean"),
            },
            Command::Grasp { object } => match self.objects.get(object) {
                None => Err("no-object"),
                Some(o) if !o.present || o.cell.is_none() => Err("no-object"),
                Some(o) if o.cell.is_some_and(|c| c.manhattan(here) > 1) => Err("out-of-reach"),
                Some(_) if self.robot.holding.is_some() => Err("hands-full"),
                Some(o) if !o.graspable => Err("cannot-grasp"),
                Some(_) => {
                    let o = self.objects.get_mut(object).expect("checked above");
                    o.cell = None;
                    self.robot.holding = Some(object.clone());
                    Ok(())
                }
            },
            Command::Release => match self.robot.holding.take() {
                None => Err("not-holding"),
                Some(id) => {
                    let at_station = here == self.station;
                    let o = self.objects.get_mut(&id).expect("held object exists");
                    o.cell = Some(here);
                    if at_station {
                        o.in_danger = false;
                    }
                    Ok(())
                }
            },
            Command::AskOwner { object } => match self.objects.get(object) {
                Some(o) if o.present => {
                    if self.owner.pending.iter().any(|(_, id)| id == object) {
                        Err("already-asked")
                    } else {
                        let due = self.tick + self.owner.responds_after;
                        self.owner.pending.push((due, object.clone()));
                        Ok(())
                    }
                }
                _ => Err("no-object"),
            },
            Command::Speak { text } => {
                self.speech.push(text.clone());
                Ok(())
            }
            Command::Recharge => {
                if here != self.station {
                    Err("not-at-station")
                } else {
                    self.robot.battery = self
                        .robot
                        .battery
                        .saturating_add(self.costs.recharge_rate)
                        .min(self.robot.capacity);
                    Ok(())
                }
            }
            Command::ApiCall { endpoint } => {
                let ep = self
                    .endpoints
                    .entry(endpoint.clone())
                    .or_insert(ApiEndpoint {
                        fails: false,
                        calls: 0,
                    });
                if ep.fails {
                    Err("api-error")
                } else {
                    ep.calls += 1;
                    Ok(())
                }
            }
        };

        match outcome {
            Err(reason) => StepResult::rejected(reason, &self.robot),
            Ok(()) => {
                self.robot.battery -= cost;
                StepResult {
                    accepted: true,
                    reason: None,
                    energy: cost,
                    battery: self.robot.battery,
                    cell: self.robot.cell,
                }
            }
        }
    }

    /// Owner responses that fall due at `tick`, applied in request order.
    pub fn owner_responses(&mut self, tick: u64) -> Vec<WorldEventDoc> {
        let (due, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.owner.pending)
            .into_iter()
            .partition(|(t, _)| *t <= tick);
        self.owner.pending = rest;
        due.into_iter()
            .map(|(_, id)| {
                if let Some(o) = self.objects.get_mut(&id) {
                    o.present = false;
                    o.cell = None;
                }
                let mut facts = BTreeMap::new();
                facts.insert(format!("object.{id}.present"), serde_json::json!(0));
                WorldEventDoc {
                    event: format!("owner-moved-{id}"),
                    facts,
                    layout: None,
                }
            })
            .collect()
    }

    /// Applies a scheduled event and returns the world event to publish.
    pub fn inject(&mut self, ev: &ScheduledEvent) -> WorldEventDoc {
        let mut facts = ev.facts.clone();
        let mut touched = BTreeSet::new();
        for d in &ev.dirt {
            if let Some(c) = self.cells.get_mut(&d.cell) {
                let v = (i32::from(c.dirt) + d.amount).clamp(0, i32::from(MAX_DIRT));
                c.dirt = v as u8;
                if let (Some(room), zone) = (&c.room, &c.zone) {
                    touched.insert((room.clone(), zone.clone()));
                }
            }
        }
        for u in &ev.objects {
            if let Some(o) = self.objects.get_mut(&u.id) {
                if let Some(d) = u.in_danger {
                    o.in_danger = d;
                    facts.insert(format!("object.{}.in_danger", u.id), serde_json::json!(d));
                }
                if let Some(c) = u.cell {
                    o.cell = Some(c);
                    o.present = true;
                }
            }
        }
        let snap = self.oracle_snapshot();
        for (room, zone) in touched {
            let key = format!("{room}.dirt");
            facts.insert(key.clone(), serde_json::json!(snap[&key]));
            if let Some(z) = zone {
                let key = format!("{room}.{z}.dirt");
                facts.insert(key.clone(), serde_json::json!(snap[&key]));
            }
        }
        WorldEventDoc {
            event: ev.event.clone(),
            facts,
            layout: None,
        }
    }

    /// Initial survey: every fact plus the static layout.
    pub fn survey(&self) -> WorldEventDoc {
        WorldEventDoc {
            event: "survey".into(),
            facts: self
                .oracle_snapshot()
                .into_iter()
                .map(|(k, v)| (k, serde_json::json!(v)))
                .collect(),
            layout: Some(self.layout()),
        }
    }

    pub fn layout(&self) -> Layout {
        Layout {
            width: self.width,
            height: self.height,
            walls: self.walls.iter().copied().collect(),
            zones: self
                .zones
                .iter()
                .map(|z| ZoneInfo {
                    id: z.id.clone(),
                    room: z.room.clone(),
                    task: z.task.clone(),
                    essential: z.essential,
                    urgency: z.urgency,
                    importance: z.importance,
                    tags: z.tags.clone(),
                    cells: z.cells.clone(),
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .filter_map(|(id, o)| {
                    Some(ObjectInfo {
                        id: id.clone(),
                        cell: o.cell?,
                        blocks: o.blocks,
                        hazards: o.hazards.clone(),
                    })
                })
                .collect(),
            station: self.station,
            robot: self.robot.cell,
            capacity: self.robot.capacity,
            costs: self.costs,
        }
    }

    /// Flat fact projection used for predicate evaluation.
    pub fn oracle_snapshot(&self) -> Facts {
        let mut f = Facts::new();
        for z in &self.zones {
            let dirt: i64 = z
                .cells
                .iter()
                .filter_map(|c| self.cells.get(c))
                .map(|c| i64::from(c.dirt))
                .sum();
            *f.entry(format!("{}.dirt", z.room)).or_insert(0) += dirt;
            f.insert(format!("{}.{}.dirt", z.room, z.id), dirt);
        }
        f.insert("robot.battery".into(), i64::from(self.robot.battery));
        f.insert("robot.x".into(), i64::from(self.robot.cell.0));
        f.insert("robot.y".into(), i64::from(self.robot.cell.1));
        for (id, o) in &self.objects {
            let held = self.robot.holding.as_deref() == Some(id.as_str());
            f.insert(format!("robot.holding.{id}"), i64::from(held));
            f.insert(format!("object.{id}.present"), i64::from(o.present));
            f.insert(format!("object.{id}.graspable"), i64::from(o.graspable));
            f.insert(format!("object.{id}.in_danger"), i64::from(o.in_danger));
            if let Some(c) = o.cell {
                f.insert(format!("object.{id}.x"), i64::from(c.0));
                f.insert(format!("object.{id}.y"), i64::from(c.1));
            }
        }
        f.insert("owner.pending".into(), self.owner.pending.len() as i64);
        for (name, ep) in &self.endpoints {
            f.insert(format!("api.{name}.calls"), i64::from(ep.calls));
        }
        f.insert("speech.count".into(), self.speech.len() as i64);
        f.insert("tick".into(), self.tick as i64);
        f
    }
}

/// The range of every fact a house described by `layout` can report.
/// `endpoints` adds `api.<name>.calls` keys.
pub fn vocabulary<'a>(layout: &Layout, endpoints: impl IntoIterator<Item = &'a str>) -> Vocabulary {
    let mut v = Vocabulary::default();
    let mut room_cells: BTreeMap<&str, i64> = BTreeMap::new();
    for z in &layout.zones {
        let n = z.cells.len() as i64;
        *room_cells.entry(z.room.as_str()).or_insert(0) += n;
        v.insert(format!("{}.{}.dirt", z.room, z.id), 0, n * i64::from(MAX_DIRT));
    }
    for (room, n) in room_cells {
        v.insert(format!("{room}.dirt"), 0, n * i64::from(MAX_DIRT));
    }
    v.insert("robot.battery", 0, i64::from(layout.capacity));
    v.insert("robot.x", 0, i64::from(layout.width - 1));
    v.insert("robot.y", 0, i64::from(layout.height - 1));
    for o in &layout.objects {
        for key in ["present", "graspable", "in_danger"] {
            v.insert(format!("object.{}.{key}", o.id), 0, 1);
        }
        v.insert(format!("robot.holding.{}", o.id), 0, 1);
        v.insert(format!("object.{}.x", o.id), 0, i64::from(layout.width - 1));
        v.insert(format!("object.{}.y", o.id), 0, i64::from(layout.height - 1));
    }
    v.insert("owner.pending", 0, 1 << 16);
    v.insert("speech.count", 0, 1 << 31);
    v.insert("tick", 0, i64::MAX);
    for ep in endpoints {
        v.insert(format!("api.{ep}.calls"), 0, 1 << 31);
    }
    v
}
