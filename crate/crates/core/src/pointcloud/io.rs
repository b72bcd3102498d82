use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::PointCloud;
use crate::{Error, Point, Result, Vector};

/// Point-cloud file formats understood by [`load_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
    Obj,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" | "txt" => Ok(Self::Xyz),
            "ply" => Ok(Self::Ply),
            "obj" => Ok(Self::Obj),
            other => Err(Error::invalid(format!("unknown cloud format '{other}'"))),
        }
    }
}

/// A cloud read from disk together with the dedup count.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub cloud: PointCloud,
    pub duplicates_removed: usize,
}

/// Reads a cloud, normalizes any normals, and removes duplicate points.
pub fn load_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<Loaded> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let (points, normals) = match format {
        CloudFormat::Xyz => parse_xyz(path, &bytes)?,
        CloudFormat::Ply => parse_ply(path, &bytes)?,
        CloudFormat::Obj => parse_obj(path, &bytes)?,
    };
    let tag = path.display().to_string();
    let cloud =
        PointCloud::with_unnormalized_normals(points, normals, tag).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let (cloud, duplicates_removed) = cloud.dedup();
    if cloud.len() < 4 {
        return Err(Error::EmptyCloud {
            distinct: cloud.len(),
        });
    }
    Ok(Loaded {
        cloud,
        duplicates_removed,
    })
}

/// Writes `x y z [nx ny nz]` lines using shortest round-trip float formatting.
pub fn write_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(cloud.len() * 64);
    for (i, p) in cloud.points().iter().enumerate() {
        write!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
        if let Some(ns) = cloud.normals() {
            let n = ns[i];
            write!(out, " {} {} {}", n.x, n.y, n.z).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

type Parsed = (Vec<Point>, Option<Vec<Vector>>);

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        message: message.into(),
    }
}

fn utf8<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| parse_err(path, 0, format!("not valid UTF-8: {e}")))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("'{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<Parsed> {
    let text = utf8(path, bytes)?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| parse_f64(path, lineno + 1, t))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 3 && vals.len() != 6 {
            return Err(parse_err(
                path,
                lineno + 1,
                format!("expected 3 or 6 values, found {}", vals.len()),
            ));
        }
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    "mixed rows with and without normals",
                ));
            }
            _ => {}
        }
        points.push(Point::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vector::new(vals[3], vals[4], vals[5]));
        }
    }
    let normals = (width == Some(6)).then_some(normals);
    Ok((points, normals))
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<Parsed> {
    let text = utf8(path, bytes)?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let mut toks = raw.split_whitespace();
        let kind = toks.next();
        if kind != Some("v") && kind != Some("vn") {
            continue;
        }
        let vals = toks
            .take(3)
            .map(|t| parse_f64(path, lineno + 1, t))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 3 {
            return Err(parse_err(
                path,
                lineno + 1,
                "vertex record needs three coordinates",
            ));
        }
        if kind == Some("v") {
            points.push(Point::new(vals[0], vals[1], vals[2]));
        } else {
            normals.push(Vector::new(vals[0], vals[1], vals[2]));
        }
    }
    let normals = (!normals.is_empty() && normals.len() == points.len()).then_some(normals);
    Ok((points, normals))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
}

const VERTEX_FIELDS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Parsed> {
    let marker = b"end_header";
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err(path, 0, "missing end_header"))?;
    let mut body_start = pos + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = utf8(path, &bytes[..pos])?;
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _ver] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLe,
                    other => {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!("unsupported PLY encoding '{other}'"),
                        ))
                    }
                });
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, lineno, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, lineno, "unknown list property type"));
                };
                el.props.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown type '{ty}'")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("unrecognized header line '{line}'"),
                ))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(path, 0, "missing format line"))?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(path, 0, "no vertex element"))?;
    let vertex = &elements[vertex_pos];
    // Column of each of x,y,z,nx,ny,nz within the vertex record.
    let slots: Vec<Option<usize>> = VERTEX_FIELDS
        .iter()
        .map(|f| {
            vertex
                .props
                .iter()
                .position(|p| matches!(p, Property::Scalar { name, .. } if name == f))
        })
        .collect();
    if slots[..3].iter().any(Option::is_none) {
        return Err(parse_err(path, 0, "vertex element lacks x, y or z"));
    }
    let has_normals = slots[3..].iter().all(Option::is_some);

    let rows: Vec<Vec<f64>> = match encoding {
        PlyEncoding::Ascii => read_ascii_rows(path, &bytes[body_start..], &elements, vertex_pos)?,
        PlyEncoding::BinaryLe => {
            read_binary_rows(path, &bytes[body_start..], &elements, vertex_pos)?
        }
    };
    let mut points = Vec::with_capacity(rows.len());
    let mut normals = Vec::with_capacity(if has_normals { rows.len() } else { 0 });
    for row in &rows {
        let get = |k: usize| row[slots[k].unwrap()];
        let p = Point::new(get(0), get(1), get(2));
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(parse_err(path, 0, "non-finite vertex coordinate"));
        }
        points.push(p);
        if has_normals {
            normals.push(Vector::new(get(3), get(4), get(5)));
        }
    }
    Ok((points, has_normals.then_some(normals)))
}

// Returns scalar values of each vertex record; list properties are skipped.
fn read_ascii_rows(
    path: &Path,
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
) -> Result<Vec<Vec<f64>>> {
    let text = utf8(path, body)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            lines
                .next()
                .ok_or_else(|| parse_err(path, 0, format!("truncated element '{}'", el.name)))?;
        }
    }
    let vertex = &elements[vertex_pos];
    let mut rows = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, "fewer vertex records than declared"))?;
        let mut toks = line.split_whitespace();
        let mut row = Vec::with_capacity(vertex.props.len());
        for prop in &vertex.props {
            match prop {
                Property::Scalar { .. } => {
                    let t = toks
                        .next()
                        .ok_or_else(|| parse_err(path, i + 1, "missing vertex field"))?;
                    row.push(parse_f64(path, i + 1, t)?);
                }
                Property::List { .. } => {
                    let t = toks
                        .next()
                        .ok_or_else(|| parse_err(path, i + 1, "missing list length"))?;
                    let n: usize = t
                        .parse()
                        .map_err(|_| parse_err(path, i + 1, "bad list length"))?;
                    for _ in 0..n {
                        toks.next();
                    }
                    row.push(f64::NAN);
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_binary_rows(
    path: &Path,
    body: &[u8],
    elements: &[Element],
    vertex_pos: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut off = 0usize;
    let truncated = || parse_err(path, 0, "binary body is truncated");
    let skip_record =
        |props: &[Property], off: &mut usize, row: Option<&mut Vec<f64>>| -> Result<()> {
            let mut row = row;
            for prop in props {
                match *prop {
                    Property::Scalar { ty, .. } => {
                        let b = body.get(*off..*off + ty.size()).ok_or_else(truncated)?;
                        if let Some(r) = row.as_deref_mut() {
                            r.push(ty.read_le(b));
                        }
                        *off += ty.size();
                    }
                    Property::List { count, item } => {
                        let b = body.get(*off..*off + count.size()).ok_or_else(truncated)?;
                        let n = count.read_le(b) as usize;
                        *off += count.size() + n * item.size();
                        if let Some(r) = row.as_deref_mut() {
                            r.push(f64::NAN);
                        }
                    }
                }
            }
            Ok(())
        };
    for el in &elements[..vertex_pos] {
        for _ in 0..el.count {
            skip_record(&el.props, &mut off, None)?;
        }
    }
    let vertex = &elements[vertex_pos];
    let mut rows = Vec::with_capacity(vertex.count);
    for _ in 0..vertex.count {
        let mut row = Vec::with_capacity(vertex.props.len());
        skip_record(&vertex.props, &mut off, Some(&mut row))?;
        rows.push(row);
    }
    Ok(rows)
}
