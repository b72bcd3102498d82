//! Marching-cubes isosurface extraction and triangle-mesh utilities.

mod tables;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::grid::EvalGrid;
use crate::{Error, Point, Result, Vector};
use tables::TRI_TABLE;

/// Triangles whose area falls below this are dropped during extraction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-18;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

// Corner pairs per edge; the first corner is the lower end along the edge's axis.
const EDGES: [(usize, usize, usize); 12] = [
    (0, 1, 0),
    (1, 2, 1),
    (3, 2, 0),
    (0, 3, 1),
    (4, 5, 0),
    (5, 6, 1),
    (7, 6, 0),
    (4, 7, 1),
    (0, 4, 2),
    (1, 5, 2),
    (2, 6, 2),
    (3, 7, 2),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[u32; 3]>,
    /// Linear index of the grid cell (by its lowest node) that created each vertex.
    pub provenance: Vec<u32>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn corners(&self, t: &[u32; 3]) -> [Point; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(&self.triangles[t]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Divergence-theorem volume; meaningful only for closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// Number of undirected edges used by a number of triangles other than 2.
    pub fn non_manifold_edges(&self) -> usize {
        let mut count: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.non_manifold_edges() == 0
    }
}

/// Marching cubes over every grid cell. Values exactly at `level` are nudged up by
/// `1e-12 ·` the field range; vertices on shared edges are emitted once.
pub fn extract_isosurface(grid: &EvalGrid, level: f64) -> Result<TriMesh> {
    let n = grid.n_per_axis();
    let (lo, hi) = grid
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(lo < level && level <= hi) {
        return Err(Error::EmptySurface { level });
    }
    let nudge = 1e-12 * (hi - lo);
    let value = |i: usize, j: usize, k: usize| {
        let v = grid.value(i, j, k);
        if v == level {
            level + nudge
        } else {
            v
        }
    };

    let mut mesh = TriMesh::default();
    let mut edge_vertex: HashMap<usize, u32> = HashMap::new();
    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let vals: [f64; 8] = std::array::from_fn(|c| {
                    let d = CORNERS[c];
                    value(i + d[0], j + d[1], k + d[2])
                });
                let mut case = 0usize;
                for (c, v) in vals.iter().enumerate() {
                    if *v > level {
                        case |= 1 << c;
                    }
                }
                let tris = &TRI_TABLE[case];
                if tris[0] < 0 {
                    continue;
                }
                let cell = grid.index(i, j, k);
                let mut local = [u32::MAX; 12];
                let mut t = 0;
                while t < 16 && tris[t] >= 0 {
                    let mut tri = [0u32; 3];
                    for (slot, &e) in tri.iter_mut().zip(&tris[t..t + 3]) {
                        let e = e as usize;
                        if local[e] == u32::MAX {
                            let (a, b, axis) = EDGES[e];
                            let ca = CORNERS[a];
                            let key = grid.index(i + ca[0], j + ca[1], k + ca[2]) * 3 + axis;
                            local[e] = *edge_vertex.entry(key).or_insert_with(|| {
                                let cb = CORNERS[b];
                                let pa = grid.node(i + ca[0], j + ca[1], k + ca[2]);
                                let pb = grid.node(i + cb[0], j + cb[1], k + cb[2]);
                                let s = (level - vals[a]) / (vals[b] - vals[a]);
                                mesh.vertices.push(pa + (pb - pa) * s);
                                mesh.provenance.push(cell as u32);
                                (mesh.vertices.len() - 1) as u32
                            });
                        }
                        *slot = local[e];
                    }
                    t += 3;
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        continue;
                    }
                    let [a, b, c] = tri.map(|v| mesh.vertices[v as usize]);
                    if 0.5 * (b - a).cross(&(c - a)).norm() < MIN_TRIANGLE_AREA {
                        continue;
                    }
                    mesh.triangles.push(tri);
                }
            }
        }
    }
    if mesh.triangles.is_empty() {
        return Err(Error::EmptySurface { level });
    }
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    /// Binary little-endian PLY.
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::invalid(format!(
                "unknown mesh format '{s}' (expected obj or ply)"
            ))),
        }
    }
}

pub fn export_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    if mesh.is_empty() {
        return Err(Error::invalid("cannot export an empty mesh"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        MeshFormat::Obj => {
            for v in &mesh.vertices {
                writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
            }
            for t in &mesh.triangles {
                writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
        }
        MeshFormat::Ply => {
            write!(
                w,
                "ply\nformat binary_little_endian 1.0\ncomment meshless {}\nelement vertex {}\n\
                 property double x\nproperty double y\nproperty double z\nelement face {}\n\
                 property list uchar int vertex_indices\nend_header\n",
                crate::VERSION,
                mesh.vertices.len(),
                mesh.triangles.len()
            )?;
            for v in &mesh.vertices {
                for c in [v.x, v.y, v.z] {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            for t in &mesh.triangles {
                w.write_all(&[3u8])?;
                for &i in t {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `v` and triangular `f` records of an OBJ file (`f a/b/c` forms accepted).
pub fn read_obj_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut mesh = TriMesh::default();
    for (ln, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(ln + 1, e.to_string()))?;
                if c.len() != 3 {
                    return Err(parse_err(ln + 1, "vertex needs 3 coordinates".into()));
                }
                mesh.vertices.push(Point::new(c[0], c[1], c[2]));
                mesh.provenance.push(u32::MAX);
            }
            Some("f") => {
                let idx: Vec<u32> = parts
                    .map(|s| {
                        s.split('/')
                            .next()
                            .and_then(|i| i.parse::<u32>().ok())
                            .filter(|&i| i >= 1)
                            .map(|i| i - 1)
                    })
                    .collect::<Option<_>>()
                    .ok_or_else(|| parse_err(ln + 1, "bad face index".into()))?;
                if idx.len() != 3 {
                    return Err(parse_err(
                        ln + 1,
                        format!("expected a triangle, got {} indices", idx.len()),
                    ));
                }
                mesh.triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if mesh
        .triangles
        .iter()
        .flatten()
        .any(|&i| i as usize >= mesh.vertices.len())
    {
        return Err(parse_err(0, "face index out of range".into()));
    }
    Ok(mesh)
}

/// Area-weighted normal at each vertex, unnormalized triangles summed.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vector> {
    let mut acc = vec![Vector::zeros(); mesh.vertices.len()];
    for t in &mesh.triangles {
        let [a, b, c] = mesh.corners(t);
        let n = (b - a).cross(&(c - a));
        for &i in t {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| if n.norm() > 0.0 { n.normalize() } else { n })
        .collect()
}
