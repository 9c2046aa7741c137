//! Scenario files.
//!
//! A scenario is a TOML document. Every key is listed below; unknown keys
//! are rejected. Errors carry the file path and, where possible, the line.
//!
//! ```toml
//! name = "example1_offline"
//! mode = "offline-distinct"   # offline-nondistinct | online | ecc | sweep
//!
//! [system]
//! files = 4                   # N
//! catalog = 5                 # N' (online only, defaults to N)
//! users = 4                   # K
//! caches = 2                  # Λ
//! cache_size = 2              # M, integer or "a/b"
//! file_size = 4               # F in bits
//!
//! [association]
//! groups = [[1, 2, 3], [4]]   # or: profile = [3, 1]
//!
//! [placement]
//! mode = "exact"              # or "random"
//! seed = 1
//!
//! [library]
//! seed = 0
//!
//! [delivery]
//! demand = [1, 2, 3, 4]       # defaults to 1..=K
//! decoder = "general"         # or "peeling"
//!
//! [converse]
//! enabled = true
//! message_budget = 24
//! minrank_budget = 16777216
//! dump_instance = false
//!
//! [ecc]
//! delta = 1
//! code = "optimal"            # hamming-11-7 | identity | repetition | generator
//! generator = "..."           # rows of G, for code = "generator"
//! errors = "exhaustive"       # or "sampled"
//! samples = 64
//! seed = 0
//! plaintexts = "log"          # or "all": every k-bit message through the code
//!
//! [online]
//! popular = [2, 3, 4, 5]
//! cached = [1, 2, 3, 4, 5]    # listed by ordering parameter, first is o = 1
//! order = "listed"            # or "random"
//! trace = "example2_online.trace"   # or: slots = ["- | 2,3,4,5", "6>5 | 6,2,3,4"]
//!
//! [sweep]
//! cache_sizes = [1, 2, 3]     # defaults to system.cache_size
//! profiles = "all"            # or [[4, 0], [3, 1]]; defaults to the association
//! deltas = [0, 1]
//! reference = "none"          # uniform | dedicated | single-cache
//!
//! [output]
//! trace = true
//! placement = true
//! ```
//!
//! Trace lines are `arrivals | demand`. Arrivals are `-` or a comma list
//! of `f` (a seeded popular file departs) or `f>g` (`g` departs). Blank
//! lines and `#` comments are skipped.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use codedcache::online::{Arrival, SlotInput};
use codedcache::{
    Association, DemandVector, FileId, PlacementMode, Profile, Rational, SystemParams,
};
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{}", located(.path, *.line, .message))]
    Invalid {
        path: String,
        line: Option<usize>,
        message: String,
    },
}

fn located(path: &str, line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("{path}:{l}: {message}"),
        None => format!("{path}: {message}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OfflineDistinct,
    OfflineNondistinct,
    Online,
    Ecc,
    Sweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OfflineDistinct => "offline-distinct",
            Mode::OfflineNondistinct => "offline-nondistinct",
            Mode::Online => "online",
            Mode::Ecc => "ecc",
            Mode::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeChoice {
    Optimal,
    #[serde(rename = "hamming-11-7")]
    Hamming11_7,
    Identity,
    Repetition,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPatterns {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaintextSweep {
    Log,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    None,
    Uniform,
    Dedicated,
    SingleCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseSpec {
    pub message_budget: usize,
    pub minrank_budget: u64,
    pub dump_instance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EccSpec {
    pub delta: usize,
    pub code: CodeChoice,
    pub generator: Option<String>,
    pub errors: ErrorPatterns,
    pub samples: usize,
    pub seed: u64,
    pub plaintexts: PlaintextSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSpec {
    pub popular: Vec<FileId>,
    pub cached: Vec<FileId>,
    pub random_order: bool,
    pub slots: Vec<SlotInput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub cache_sizes: Vec<Rational>,
    pub profiles: Vec<Profile>,
    pub deltas: Vec<usize>,
    pub reference: Reference,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub params: SystemParams,
    pub association: Association,
    pub demand: DemandVector,
    pub placement: PlacementMode,
    pub placement_seed: u64,
    pub library_seed: u64,
    pub general_decoder: bool,
    pub converse: Option<ConverseSpec>,
    pub ecc: Option<EccSpec>,
    pub online: Option<OnlineSpec>,
    pub sweep: Option<SweepSpec>,
    pub write_trace: bool,
    pub write_placement: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    mode: Spanned<Mode>,
    system: Spanned<RawSystem>,
    association: Option<Spanned<RawAssociation>>,
    #[serde(default)]
    placement: RawPlacement,
    #[serde(default)]
    library: RawLibrary,
    delivery: Option<Spanned<RawDelivery>>,
    converse: Option<RawConverse>,
    ecc: Option<Spanned<RawEcc>>,
    online: Option<Spanned<RawOnline>>,
    sweep: Option<Spanned<RawSweep>>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    files: u32,
    catalog: Option<u32>,
    users: u32,
    caches: u32,
    cache_size: Spanned<Number>,
    file_size: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAssociation {
    groups: Option<Vec<Vec<u32>>>,
    profile: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawPlacementMode {
    #[default]
    Exact,
    Random,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlacement {
    #[serde(default)]
    mode: RawPlacementMode,
    #[serde(default = "default_placement_seed")]
    seed: u64,
}

impl Default for RawPlacement {
    fn default() -> Self {
        Self {
            mode: RawPlacementMode::Exact,
            seed: default_placement_seed(),
        }
    }
}

fn default_placement_seed() -> u64 {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLibrary {
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Decoder {
    #[default]
    General,
    Peeling,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelivery {
    demand: Option<Vec<FileId>>,
    #[serde(default)]
    decoder: Decoder,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverse {
    #[serde(default = "yes")]
    enabled: bool,
    #[serde(default = "default_message_budget")]
    message_budget: usize,
    #[serde(default = "default_minrank_budget")]
    minrank_budget: u64,
    #[serde(default)]
    dump_instance: bool,
}

fn yes() -> bool {
    true
}

fn default_message_budget() -> usize {
    codedcache::converse::DEFAULT_MESSAGE_BUDGET
}

fn default_minrank_budget() -> u64 {
    codedcache::converse::DEFAULT_MINRANK_BUDGET
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEcc {
    delta: usize,
    #[serde(default = "default_code")]
    code: CodeChoice,
    generator: Option<String>,
    #[serde(default = "default_patterns")]
    errors: ErrorPatterns,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_plaintexts")]
    plaintexts: PlaintextSweep,
}

fn default_code() -> CodeChoice {
    CodeChoice::Optimal
}

fn default_patterns() -> ErrorPatterns {
    ErrorPatterns::Exhaustive
}

fn default_samples() -> usize {
    64
}

fn default_plaintexts() -> PlaintextSweep {
    PlaintextSweep::Log
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum OrderChoice {
    #[default]
    Listed,
    Random,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOnline {
    popular: Vec<FileId>,
    cached: Vec<FileId>,
    #[serde(default)]
    order: OrderChoice,
    trace: Option<Spanned<String>>,
    slots: Option<Vec<Spanned<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProfiles {
    Keyword(String),
    List(Vec<Vec<usize>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    cache_sizes: Option<Vec<Spanned<Number>>>,
    profiles: Option<Spanned<RawProfiles>>,
    deltas: Option<Vec<usize>>,
    #[serde(default = "default_reference")]
    reference: Reference,
}

fn default_reference() -> Reference {
    Reference::None
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "yes")]
    trace: bool,
    #[serde(default = "yes")]
    placement: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            trace: true,
            placement: true,
        }
    }
}

/// Error builder tied to one source text.
struct Ctx<'a> {
    path: String,
    text: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn at(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            path: self.path.clone(),
            line: Some(self.line(span)),
            message: message.into(),
        }
    }
}

fn parse_rational(n: &Number) -> Result<Rational, String> {
    match n {
        Number::Int(i) => Ok(Rational::from_integer(*i as i128)),
        Number::Text(s) => {
            let s = s.trim();
            let parsed = match s.split_once('/') {
                Some((a, b)) => a
                    .trim()
                    .parse::<i128>()
                    .ok()
                    .zip(b.trim().parse::<i128>().ok())
                    .filter(|&(_, d)| d != 0)
                    .map(|(a, d)| Rational::new(a, d)),
                None => s.parse::<i128>().ok().map(Rational::from_integer),
            };
            parsed.ok_or_else(|| format!("`{s}` is not an integer or a fraction a/b"))
        }
    }
}

fn parse_list(text: &str) -> Result<Vec<FileId>, String> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<FileId>()
                .map_err(|_| format!("`{t}` is not a file id"))
        })
        .collect()
}

/// Parses one `arrivals | demand` line.
pub fn parse_slot(line: &str) -> Result<SlotInput, String> {
    let (arr, dem) = line
        .split_once('|')
        .ok_or_else(|| "expected `arrivals | demand`".to_string())?;
    let arr = arr.trim();
    let arrivals = if arr == "-" || arr.is_empty() {
        Vec::new()
    } else {
        arr.split(',')
            .map(|a| {
                let a = a.trim();
                match a.split_once('>') {
                    Some((f, g)) => Ok(Arrival {
                        file: parse_list(f)?[0],
                        replaces: Some(parse_list(g)?[0]),
                    }),
                    None => Ok(Arrival {
                        file: parse_list(a)?[0],
                        replaces: None,
                    }),
                }
            })
            .collect::<Result<_, String>>()?
    };
    Ok(SlotInput {
        arrivals,
        demand: DemandVector::new(parse_list(dem.trim())?),
    })
}

/// Parses a trace file body. Lines are 1-based in errors.
pub fn parse_trace(text: &str) -> Result<Vec<SlotInput>, (usize, String)> {
    let mut slots = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        slots.push(parse_slot(line).map_err(|e| (i + 1, e))?);
    }
    Ok(slots)
}

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, path)
}

/// Parses scenario text; `path` is used for diagnostics and to resolve
/// trace files.
pub fn parse(text: &str, path: &Path) -> Result<Scenario, ConfigError> {
    let cx = Ctx {
        path: path.display().to_string(),
        text,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid {
        path: cx.path.clone(),
        line: e.span().map(|s| cx.line(s)),
        message: e.message().to_string(),
    })?;
    let mode = *raw.mode.get_ref();
    let sys_span = raw.system.span();
    let sys = raw.system.into_inner();

    let cache_size =
        parse_rational(sys.cache_size.get_ref()).map_err(|m| cx.at(sys.cache_size.span(), m))?;
    let catalog = sys.catalog.unwrap_or(sys.files);
    if mode != Mode::Online && catalog != sys.files {
        return Err(cx.at(sys_span, "`catalog` only applies to online scenarios"));
    }
    let params = SystemParams::online(
        sys.files,
        catalog,
        sys.users,
        sys.caches,
        cache_size,
        sys.file_size,
    )
    .map_err(|e| cx.at(sys_span.clone(), e.to_string()))?;

    let association = match raw.association {
        None => Association::from_counts(
            Profile::uniform(sys.users as usize, sys.caches as usize).counts(),
        ),
        Some(a) => {
            let span = a.span();
            let a = a.into_inner();
            match (a.groups, a.profile) {
                (Some(g), None) => {
                    Association::new(g).map_err(|e| cx.at(span.clone(), e.to_string()))?
                }
                (None, Some(p)) => {
                    Profile::new(p.clone()).map_err(|e| cx.at(span.clone(), e.to_string()))?;
                    Association::from_counts(&p)
                }
                _ => return Err(cx.at(span, "give exactly one of `groups` and `profile`")),
            }
        }
    };
    if association.num_caches() != sys.caches as usize || association.num_users() != sys.users {
        return Err(cx.at(
            sys_span,
            format!(
                "association covers {} users on {} caches, system has {} on {}",
                association.num_users(),
                association.num_caches(),
                sys.users,
                sys.caches
            ),
        ));
    }

    let (demand, general_decoder) = match raw.delivery {
        None => (None, true),
        Some(d) => {
            let span = d.span();
            let d = d.into_inner();
            if let Some(v) = &d.demand {
                if v.len() != sys.users as usize {
                    return Err(cx.at(
                        span,
                        format!("demand has {} entries, expected {}", v.len(), sys.users),
                    ));
                }
                if mode != Mode::Online {
                    if let Some(f) = v.iter().find(|&&f| f == 0 || f > sys.files) {
                        return Err(cx.at(span, format!("file {f} is outside 1..={}", sys.files)));
                    }
                }
            }
            (d.demand, matches!(d.decoder, Decoder::General))
        }
    };
    let demand = DemandVector::new(demand.unwrap_or_else(|| (1..=sys.users).collect()));
    if mode == Mode::OfflineDistinct && !demand.is_distinct() {
        return Err(ConfigError::Invalid {
            path: cx.path.clone(),
            line: None,
            message: "offline-distinct needs a demand without repeated files".into(),
        });
    }

    let converse = raw.converse.filter(|c| c.enabled).map(|c| ConverseSpec {
        message_budget: c.message_budget,
        minrank_budget: c.minrank_budget,
        dump_instance: c.dump_instance,
    });

    let ecc = match raw.ecc {
        None if mode == Mode::Ecc => {
            return Err(ConfigError::Invalid {
                path: cx.path.clone(),
                line: None,
                message: "mode `ecc` needs an [ecc] section".into(),
            })
        }
        None => None,
        Some(e) => {
            let span = e.span();
            let e = e.into_inner();
            if e.code == CodeChoice::Generator && e.generator.is_none() {
                return Err(cx.at(span, "code = \"generator\" needs `generator`"));
            }
            if e.code == CodeChoice::Identity && e.delta > 0 {
                return Err(cx.at(span, "the identity code corrects no errors; use delta = 0"));
            }
            if e.code == CodeChoice::Hamming11_7 && e.delta > 1 {
                return Err(cx.at(span, "the [11,7,3] code corrects one error"));
            }
            Some(EccSpec {
                delta: e.delta,
                code: e.code,
                generator: e.generator,
                errors: e.errors,
                samples: e.samples,
                seed: e.seed,
                plaintexts: e.plaintexts,
            })
        }
    };

    let online = match raw.online {
        None if mode == Mode::Online => {
            return Err(ConfigError::Invalid {
                path: cx.path.clone(),
                line: None,
                message: "mode `online` needs an [online] section".into(),
            })
        }
        None => None,
        Some(o) => {
            let span = o.span();
            let o = o.into_inner();
            let slots = match (o.trace, o.slots) {
                (Some(t), None) => {
                    let file = resolve(path, t.get_ref());
                    let body = std::fs::read_to_string(&file).map_err(|e| {
                        cx.at(
                            t.span(),
                            format!("cannot read trace {}: {e}", file.display()),
                        )
                    })?;
                    parse_trace(&body).map_err(|(line, message)| ConfigError::Invalid {
                        path: file.display().to_string(),
                        line: Some(line),
                        message,
                    })?
                }
                (None, Some(lines)) => lines
                    .iter()
                    .map(|l| parse_slot(l.get_ref()).map_err(|m| cx.at(l.span(), m)))
                    .collect::<Result<_, _>>()?,
                _ => return Err(cx.at(span, "give exactly one of `trace` and `slots`")),
            };
            if let Some(s) = slots
                .iter()
                .find(|s: &&SlotInput| s.demand.len() != sys.users as usize)
            {
                return Err(cx.at(
                    span,
                    format!(
                        "a slot demands {} files, expected {}",
                        s.demand.len(),
                        sys.users
                    ),
                ));
            }
            Some(OnlineSpec {
                popular: o.popular,
                cached: o.cached,
                random_order: matches!(o.order, OrderChoice::Random),
                slots,
            })
        }
    };

    let sweep = match raw.sweep {
        None if mode == Mode::Sweep => Some(SweepSpec {
            cache_sizes: vec![cache_size],
            profiles: vec![association.profile()],
            deltas: vec![0],
            reference: Reference::None,
        }),
        None => None,
        Some(s) => {
            let s = s.into_inner();
            let cache_sizes = match s.cache_sizes {
                None => vec![cache_size],
                Some(v) => v
                    .iter()
                    .map(|n| parse_rational(n.get_ref()).map_err(|m| cx.at(n.span(), m)))
                    .collect::<Result<_, _>>()?,
            };
            let profiles = match s.profiles {
                None => vec![association.profile()],
                Some(p) => {
                    let span = p.span();
                    match p.into_inner() {
                        RawProfiles::Keyword(k) if k == "all" => {
                            Profile::enumerate(sys.users as usize, sys.caches as usize)
                        }
                        RawProfiles::Keyword(k) => {
                            return Err(cx.at(span, format!("unknown profile keyword `{k}`")))
                        }
                        RawProfiles::List(list) => list
                            .into_iter()
                            .map(|c| {
                                let p = Profile::new(c)
                                    .map_err(|e| cx.at(span.clone(), e.to_string()))?;
                                if p.num_users() != sys.users as usize
                                    || p.num_caches() != sys.caches as usize
                                {
                                    return Err(cx.at(
                                        span.clone(),
                                        format!("profile {p} does not fit K and Λ"),
                                    ));
                                }
                                Ok(p)
                            })
                            .collect::<Result<_, _>>()?,
                    }
                }
            };
            Some(SweepSpec {
                cache_sizes,
                profiles,
                deltas: s.deltas.unwrap_or_else(|| vec![0]),
                reference: s.reference,
            })
        }
    };

    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into())
        }),
        mode,
        params,
        association,
        demand,
        placement: match raw.placement.mode {
            RawPlacementMode::Exact => PlacementMode::ExactFraction,
            RawPlacementMode::Random => PlacementMode::RandomSampled,
        },
        placement_seed: raw.placement.seed,
        library_seed: raw.library.seed,
        general_decoder,
        converse,
        ecc,
        online,
        sweep,
        write_trace: raw.output.trace,
        write_placement: raw.output.placement,
    })
}

fn resolve(config: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}
