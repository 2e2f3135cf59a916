//! Campaigns: searches over a set of formats joined by extension, projection
//! and combination edges, recorded as a genealogy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dag::{EdgeKind, GenealogyDag, Vertex, VertexKind};
use super::store::{import_scheme, PoolStore};
use super::{combine_plan, combine_to, extend_plan, extend_to, project_plan, project_to};
use crate::algebra::Ring;
use crate::error::{Error, Result};
use crate::scheme::{Format, Scheme};
use crate::search::{search_to_minimum_with, ProgressEvent, SearchConfig};

/// Combination inputs are the first `COMBINE_SIDE` schemes of each pool.
const COMBINE_SIDE: usize = 10;
const RUNNER_UPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKindSpec {
    Extend,
    Project,
    Combine,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignEdge {
    pub from: Format,
    pub to: Format,
    pub kind: EdgeKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_second: Option<Format>,
}

/// Starting schemes for one format. No files means the standard scheme.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub format: Format,
    #[serde(default)]
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRank {
    pub format: Format,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub edges: Vec<CampaignEdge>,
    /// Empty means every root format starts from its standard scheme.
    #[serde(default)]
    pub seeds: Vec<SeedSpec>,
    #[serde(default = "default_ring")]
    pub ring: Ring,
    #[serde(default)]
    pub reference_ranks: Vec<ReferenceRank>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

fn default_ring() -> Ring {
    Ring::Z2
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Edges(Vec<CampaignEdge>),
    Full(CampaignSpec),
}

pub type CampaignProgressFn<'a> = dyn Fn(Format, &ProgressEvent) + Sync + 'a;

impl CampaignSpec {
    pub fn new(edges: Vec<CampaignEdge>) -> CampaignSpec {
        CampaignSpec {
            edges,
            seeds: Vec::new(),
            ring: Ring::Z2,
            reference_ranks: Vec::new(),
            search: None,
        }
    }

    /// Accepts either a bare edge list or an object with `edges` and optional
    /// `seeds`, `ring`, `reference_ranks` and `search`.
    pub fn from_json(text: &str) -> Result<CampaignSpec> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            field: "<campaign>".into(),
            message: e.to_string(),
        })?;
        let spec = match file {
            SpecFile::Edges(edges) => CampaignSpec::new(edges),
            SpecFile::Full(spec) => spec,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a spec file. Relative seed paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<CampaignSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = CampaignSpec::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for seed in &mut spec.seeds {
            for f in &mut seed.files {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.ring.validate()?;
        for e in &self.edges {
            let ok = match e.kind {
                EdgeKindSpec::Extend => e.with_second.is_none() && extend_plan(e.from, e.to).is_some(),
                EdgeKindSpec::Project => e.with_second.is_none() && project_plan(e.from, e.to).is_some(),
                EdgeKindSpec::Combine => e
                    .with_second
                    .is_some_and(|g| combine_plan(e.from, g, e.to).is_some()),
            };
            if !ok {
                return Err(Error::Structural(format!(
                    "edge {} -> {} ({:?}{}) does not connect its formats",
                    e.from,
                    e.to,
                    e.kind,
                    e.with_second.map(|g| format!(" with {g}")).unwrap_or_default()
                )));
            }
        }
        Ok(())
    }

    /// Formats in order of first appearance: edge endpoints, then seeds.
    fn formats(&self) -> Vec<Format> {
        let mut out: Vec<Format> = Vec::new();
        let mut push = |f: Format| {
            if !out.contains(&f) {
                out.push(f);
            }
        };
        for e in &self.edges {
            push(e.from);
            if let Some(g) = e.with_second {
                push(g);
            }
            push(e.to);
        }
        for s in &self.seeds {
            push(s.format);
        }
        out
    }

    fn inputs(e: &CampaignEdge) -> impl Iterator<Item = Format> {
        std::iter::once(e.from).chain(e.with_second)
    }

    /// Kahn order, always taking the earliest listed ready format.
    pub fn schedule(&self) -> Result<Vec<Format>> {
        let formats = self.formats();
        let mut done: Vec<Format> = Vec::with_capacity(formats.len());
        while done.len() < formats.len() {
            let next = formats.iter().copied().find(|&f| {
                !done.contains(&f)
                    && self
                        .edges
                        .iter()
                        .filter(|e| e.to == f)
                        .all(|e| Self::inputs(e).all(|g| done.contains(&g)))
            });
            match next {
                Some(f) => done.push(f),
                None => return Err(Error::Structural("campaign edges contain a cycle".into())),
            }
        }
        Ok(done)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn format_seed(seed: u64, f: Format, rank: usize) -> u64 {
    let [n, m, p] = f.dims();
    splitmix(seed ^ splitmix(((n as u64) << 48) | ((m as u64) << 32) | ((p as u64) << 16) | rank as u64))
}

fn dedup(pool: Vec<Scheme>) -> Vec<Scheme> {
    let mut seen = std::collections::HashSet::new();
    pool.into_iter().filter(|s| seen.insert(s.canonical_hash())).collect()
}

pub fn run_meta_campaign(spec: &CampaignSpec, cfg: &SearchConfig, store: Option<&PoolStore>) -> Result<GenealogyDag> {
    run_meta_campaign_with(spec, cfg, store, None)
}

/// Processes formats in dependency order. Each format's starting pool is
/// assembled from its seeds and from the best pools of its inputs, grouped by
/// rank, and searched down to a local minimum.
pub fn run_meta_campaign_with(
    spec: &CampaignSpec,
    cfg: &SearchConfig,
    store: Option<&PoolStore>,
    progress: Option<&CampaignProgressFn>,
) -> Result<GenealogyDag> {
    spec.validate()?;
    cfg.validate()?;
    let ring = spec.ring;
    let order = spec.schedule()?;
    let mut dag = GenealogyDag::new();
    let mut vid: BTreeMap<Format, usize> = BTreeMap::new();
    for f in spec.formats() {
        let mut v = Vertex::new(VertexKind::Format, f);
        v.reference_rank = spec.reference_ranks.iter().find(|r| r.format == f).map(|r| r.rank);
        vid.insert(f, dag.add_vertex(v));
    }
    let mut best: BTreeMap<Format, Vec<Scheme>> = BTreeMap::new();

    for f in order {
        let v = vid[&f];
        let mut start: Vec<Scheme> = Vec::new();
        let is_root = !spec.edges.iter().any(|e| e.to == f);
        let seeds: Vec<&SeedSpec> = spec.seeds.iter().filter(|s| s.format == f).collect();
        if is_root && seeds.is_empty() && !spec.seeds.is_empty() {
            return Err(Error::MissingSeed(f.to_string()));
        }
        if is_root && spec.seeds.is_empty() {
            start.push(Scheme::standard(f, ring));
            dag.vertices[v].seed = true;
        }
        for seed in seeds {
            dag.vertices[v].seed = true;
            if seed.files.is_empty() {
                start.push(Scheme::standard(f, ring));
            }
            for path in &seed.files {
                let s = import_scheme(path, f, ring)?;
                if let Some(store) = store {
                    store.save(std::slice::from_ref(&s), "external")?;
                }
                let mut ext = Vertex::new(VertexKind::External, f);
                ext.source = Some(path.display().to_string());
                ext.start_rank = Some(s.rank());
                ext.best_rank = Some(s.rank());
                let e = dag.add_vertex(ext);
                dag.add_edge(e, v, EdgeKind::Search);
                start.push(s);
            }
        }
        for e in spec.edges.iter().filter(|e| e.to == f) {
            let from = &best[&e.from];
            let cap = cfg.pool_cap;
            match e.kind {
                EdgeKindSpec::Extend => {
                    for s in from.iter().take(cap) {
                        start.push(extend_to(s, f)?);
                    }
                    dag.add_edge(vid[&e.from], v, EdgeKind::Extend);
                }
                EdgeKindSpec::Project => {
                    for s in from.iter().take(cap) {
                        start.push(project_to(s, f)?);
                    }
                    dag.add_edge(vid[&e.from], v, EdgeKind::Project);
                }
                EdgeKindSpec::Combine => {
                    let g = e.with_second.expect("validated combine edge");
                    for a in from.iter().take(COMBINE_SIDE) {
                        for b in best[&g].iter().take(COMBINE_SIDE) {
                            start.push(combine_to(a, b, f)?);
                        }
                    }
                    let c = dag.add_vertex(Vertex::new(VertexKind::Combine, f));
                    dag.add_edge(vid[&e.from], c, EdgeKind::CombineIn);
                    dag.add_edge(vid[&g], c, EdgeKind::CombineIn);
                    dag.add_edge(c, v, EdgeKind::CombineOut);
                }
            }
        }
        let start = dedup(start);
        let start_rank = start.iter().map(Scheme::rank).min().expect("every format has a start pool");

        let mut groups: BTreeMap<usize, Vec<Scheme>> = BTreeMap::new();
        for s in start {
            groups.entry(s.rank()).or_default().push(s);
        }
        let mut finals: Vec<Scheme> = Vec::new();
        let mut runner_ups: Vec<Scheme> = Vec::new();
        for (rank, group) in groups {
            let group_cfg = SearchConfig {
                seed: format_seed(cfg.seed, f, rank),
                ..cfg.clone()
            };
            let relay = |ev: &ProgressEvent| {
                if let Some(p) = progress {
                    p(f, ev);
                }
            };
            let out = search_to_minimum_with(&group, &group_cfg, Some(&relay))?;
            runner_ups.extend(out.runner_ups);
            finals.extend(out.final_pool);
        }
        let low = finals.iter().map(Scheme::rank).min().expect("searches return their pools");
        let (mut pool, rest): (Vec<Scheme>, Vec<Scheme>) = finals.into_iter().partition(|s| s.rank() == low);
        runner_ups.extend(rest);
        pool = dedup(pool);
        runner_ups.sort_by_key(Scheme::rank);
        runner_ups = dedup(runner_ups);
        runner_ups.truncate(RUNNER_UPS);

        let vx = &mut dag.vertices[v];
        vx.start_rank = Some(start_rank);
        vx.best_rank = Some(low);
        if let Some(store) = store {
            store.save(&pool, "campaign")?;
            store.save(&runner_ups, "runner-up")?;
            vx.pool_ref = Some(store.dir(f, ring, low).display().to_string());
        }
        best.insert(f, pool);
    }
    Ok(dag)
}
