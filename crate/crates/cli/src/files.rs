//! Graph file schema: `{version, kind, edges, coords?}`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ppf_core::gridfactor::GridEmbedding;
use ppf_core::{FactorGraph, GraphKind, PointId};

pub const GRAPH_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct GraphFile {
    pub version: u32,
    pub kind: String,
    pub edges: Vec<[u32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<BTreeMap<String, Vec<u32>>>,
}

impl GraphFile {
    pub fn from_graph(graph: &FactorGraph, grid: Option<&GridEmbedding>) -> GraphFile {
        GraphFile {
            version: GRAPH_VERSION,
            kind: graph.kind.name().into(),
            edges: graph.edges.iter().map(|&(a, b)| [a.0, b.0]).collect(),
            coords: grid.map(|g| {
                g.coords
                    .iter()
                    .enumerate()
                    .map(|(id, c)| (id.to_string(), c.clone()))
                    .collect()
            }),
        }
    }

    /// Vertex count: from coords when present, else inferred from edge ids.
    pub fn vertex_count(&self) -> usize {
        if let Some(coords) = &self.coords {
            return coords.len();
        }
        self.edges
            .iter()
            .map(|e| e[0].max(e[1]) as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn kind(&self) -> Result<GraphKind> {
        Ok(match self.kind.as_str() {
            "tree" => GraphKind::Tree,
            "path" => GraphKind::Path,
            "grid" => GraphKind::Grid,
            other => bail!("unknown graph kind {other:?}"),
        })
    }

    pub fn to_factor_graph(&self) -> Result<FactorGraph> {
        let kind = self.kind()?;
        let n = self.vertex_count();
        let edges = self
            .edges
            .iter()
            .map(|e| (PointId(e[0]), PointId(e[1])))
            .collect();
        Ok(FactorGraph::new(kind, n, edges))
    }

    /// Dense coordinate table indexed by id, when the file carries coords.
    pub fn dense_coords(&self) -> Result<Option<Vec<Vec<u32>>>> {
        let Some(map) = &self.coords else {
            return Ok(None);
        };
        let n = map.len();
        let mut dense = vec![Vec::new(); n];
        for (key, coord) in map {
            let id: usize = key
                .parse()
                .with_context(|| format!("coords key {key:?} is not an id"))?;
            if id >= n {
                bail!("coords id {id} out of range for {n} vertices");
            }
            dense[id] = coord.clone();
        }
        if dense.iter().any(|c| c.is_empty()) {
            bail!("coords table has gaps");
        }
        Ok(Some(dense))
    }
}

pub fn write_graph(path: &Path, file: &GraphFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<GraphFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GraphFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.version != GRAPH_VERSION {
        bail!(
            "unsupported graph version {} (expected {GRAPH_VERSION})",
            file.version
        );
    }
    Ok(file)
}
