//! Seeded synthetic personas: two todos, one habit bundle and three
//! prescheduled events each.

use std::path::Path;
use std::sync::LazyLock;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    parse_event_line, Constraint, EventCategory, EventSpec, ParseError, PlanRequest, RequestError,
    TimePoint,
};

pub const TODOS_PER_PERSONA: usize = 2;
pub const PRESCHEDULED_PER_PERSONA: usize = 3;
/// Prescheduled events start and end within this window, in minutes.
pub const PRESCHEDULED_WINDOW: (u32, u32) = (540, 1020);
/// Prescheduled start times are multiples of this many minutes.
pub const GRID: u32 = 30;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("candidate list {0} is missing or empty")]
    CandidateListMissing(&'static str),
    #[error("{list} line {line}: {source}")]
    Malformed {
        list: &'static str,
        line: usize,
        source: ParseError,
    },
    #[error("habit bundle {bundle}: {source}")]
    Bundle { bundle: usize, source: RequestError },
    #[error("not enough prescheduled titles or room for {0} events")]
    Crowded(usize),
}

/// One planning instance. Serializes as its request with `id` set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PlanRequest", try_from = "PlanRequest")]
pub struct Persona {
    pub id: String,
    pub request: PlanRequest,
}

impl From<Persona> for PlanRequest {
    fn from(p: Persona) -> Self {
        PlanRequest {
            id: Some(p.id),
            ..p.request
        }
    }
}

impl TryFrom<PlanRequest> for Persona {
    type Error = String;

    fn try_from(req: PlanRequest) -> Result<Self, Self::Error> {
        let id = req.id.clone().ok_or("persona has no id")?;
        Ok(Persona { id, request: req })
    }
}

/// Candidate events to draw personas from.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub todos: Vec<EventSpec>,
    pub habits: Vec<Vec<EventSpec>>,
    pub prescheduled: Vec<String>,
}

fn lines(
    list: &'static str,
    text: &str,
    category: EventCategory,
) -> Result<Vec<EventSpec>, DatagenError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            parse_event_line(l)
                .map(|e| e.with_category(category))
                .map_err(|source| DatagenError::Malformed {
                    list,
                    line: i + 1,
                    source,
                })
        })
        .collect()
}

static BUNDLED: LazyLock<Candidates> = LazyLock::new(|| {
    Candidates::parse(
        include_str!("../data/todos.txt"),
        include_str!("../data/habits.txt"),
        include_str!("../data/prescheduled.txt"),
    )
    .expect("bundled candidate lists parse")
});

impl Candidates {
    /// The lists shipped with the crate: 78 todos, 50 habit bundles and 200
    /// prescheduled titles.
    pub fn bundled() -> &'static Candidates {
        &BUNDLED
    }

    /// Todos are one event line each; habit bundles are groups of event
    /// lines separated by blank lines; prescheduled titles are one per line.
    pub fn parse(todos: &str, habits: &str, prescheduled: &str) -> Result<Self, DatagenError> {
        let todos = lines("todos", todos, EventCategory::Todo)?;
        let mut bundles = Vec::new();
        for block in habits.split("\n\n").filter(|b| !b.trim().is_empty()) {
            let events = lines("habits", block, EventCategory::Habit)?;
            PlanRequest::new(events.clone())
                .validate()
                .map_err(|source| DatagenError::Bundle {
                    bundle: bundles.len(),
                    source,
                })?;
            bundles.push(events);
        }
        let prescheduled: Vec<String> = prescheduled
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        let out = Candidates {
            todos,
            habits: bundles,
            prescheduled,
        };
        if out.todos.len() < TODOS_PER_PERSONA {
            return Err(DatagenError::CandidateListMissing("todos"));
        }
        if out.habits.is_empty() {
            return Err(DatagenError::CandidateListMissing("habits"));
        }
        if out.prescheduled.len() < PRESCHEDULED_PER_PERSONA {
            return Err(DatagenError::CandidateListMissing("prescheduled"));
        }
        Ok(out)
    }

    /// Reads `todos.txt`, `habits.txt` and `prescheduled.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, DatagenError> {
        let read = |name: &'static str| {
            std::fs::read_to_string(dir.join(format!("{name}.txt")))
                .map_err(|_| DatagenError::CandidateListMissing(name))
        };
        Self::parse(&read("todos")?, &read("habits")?, &read("prescheduled")?)
    }
}

/// `count` fixed events titled from `titles`, each 30 or 60 minutes with
/// equal probability, starting on the grid inside the window and not
/// overlapping each other. A colliding start is redrawn; the duration is
/// kept so the split stays fair.
pub fn sample_prescheduled<R: Rng>(
    rng: &mut R,
    titles: &[String],
    count: usize,
) -> Result<Vec<EventSpec>, DatagenError> {
    let (lo, hi) = PRESCHEDULED_WINDOW;
    if titles.len() < count || count as u32 * 60 > hi - lo {
        return Err(DatagenError::Crowded(count));
    }
    let picked = sample(rng, titles.len(), count);
    let mut taken: Vec<(u32, u32)> = Vec::new();
    let mut out = Vec::with_capacity(count);
    for i in picked.iter() {
        let duration = if rng.random_bool(0.5) { 30 } else { 60 };
        let slots = (hi - lo - duration) / GRID + 1;
        let start = loop {
            let s = lo + GRID * rng.random_range(0..slots);
            if taken.iter().all(|&(a, b)| s + duration <= a || b <= s) {
                break s;
            }
        };
        taken.push((start, start + duration));
        let at = |m| TimePoint::new(m).expect("window lies within the day");
        out.push(
            EventSpec::new(
                &titles[i],
                vec![Constraint::StartsAt(at(start)), Constraint::EndsAt(at(start + duration))],
            )
            .with_category(EventCategory::Prescheduled),
        );
    }
    Ok(out)
}

/// `n` personas from the bundled candidate lists.
pub fn generate_personas(seed: u64, n: usize) -> Result<Vec<Persona>, DatagenError> {
    generate_personas_from(Candidates::bundled(), seed, n)
}

/// `n` personas drawn from `candidates` with a generator seeded by `seed`.
/// Persona `i` has id `persona-{seed}-{i:03}`.
pub fn generate_personas_from(
    candidates: &Candidates,
    seed: u64,
    n: usize,
) -> Result<Vec<Persona>, DatagenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut events: Vec<EventSpec> = sample(&mut rng, candidates.todos.len(), TODOS_PER_PERSONA)
            .iter()
            .map(|t| candidates.todos[t].clone())
            .collect();
        let bundle = rng.random_range(0..candidates.habits.len());
        events.extend(candidates.habits[bundle].iter().cloned());
        events.extend(sample_prescheduled(
            &mut rng,
            &candidates.prescheduled,
            PRESCHEDULED_PER_PERSONA,
        )?);
        let id = format!("persona-{seed}-{i:03}");
        let mut request = PlanRequest::new(events);
        request.id = Some(id.clone());
        out.push(Persona { id, request });
    }
    Ok(out)
}

/// Writes one `{id}.json` per persona into `dir`.
pub fn write_personas(dir: &Path, personas: &[Persona]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in personas {
        let json = serde_json::to_string_pretty(p).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{}.json", p.id)), json + "\n")?;
    }
    Ok(())
}

/// Reads every `*.json` in `dir`, ordered by file name. Files without an
/// `id` take their file stem.
pub fn read_personas(dir: &Path) -> std::io::Result<Vec<Persona>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path)?;
            let mut request: PlanRequest = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
            let id = request.id.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            request.id = Some(id.clone());
            Ok(Persona { id, request })
        })
        .collect()
}
