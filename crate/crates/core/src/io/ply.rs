//! PLY point clouds: ASCII and binary little-endian, format 1.0.
//!
//! Reads `x y z` (required), `nx ny nz` and `sx sy sz` (optional, as triples)
//! from the `vertex` element; other elements and properties are skipped. A
//! zero normal marks an invalid normal. Writes doubles only.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, NORMAL_UNIT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let rel = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(start as u64, "unterminated PLY header"))?;
        *pos = start + rel + 1;
        let line = std::str::from_utf8(&bytes[start..start + rel])
            .map_err(|_| Error::parse(start as u64, "header is not valid UTF-8"))?;
        Ok((start, line.trim_end_matches('\r').to_string()))
    };

    let (off, magic) = next_line(&mut pos)?;
    if magic.trim() != "ply" {
        return Err(Error::parse(off as u64, "missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (off, line) = next_line(&mut pos)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |m: &str| Error::parse(off as u64, format!("{m}: '{line}'"));
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if toks.len() != 3 || toks[2] != "1.0" {
                    return Err(err("unsupported format line"));
                }
                format = Some(match toks[1] {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    _ => return Err(err("unsupported PLY encoding")),
                });
            }
            Some("element") => {
                if toks.len() != 3 {
                    return Err(err("malformed element line"));
                }
                let count = toks[2].parse().map_err(|_| err("bad element count"))?;
                elements.push(Element {
                    name: toks[1].to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| err("property before any element"))?;
                let prop = if toks.get(1) == Some(&"list") {
                    if toks.len() != 5 {
                        return Err(err("malformed list property"));
                    }
                    let count = Scalar::parse(toks[2]).ok_or_else(|| err("unknown property type"))?;
                    let item = Scalar::parse(toks[3]).ok_or_else(|| err("unknown property type"))?;
                    Property {
                        name: toks[4].to_string(),
                        kind: PropKind::List { count, item },
                    }
                } else {
                    if toks.len() != 3 {
                        return Err(err("malformed property line"));
                    }
                    let t = Scalar::parse(toks[1]).ok_or_else(|| err("unknown property type"))?;
                    Property {
                        name: toks[2].to_string(),
                        kind: PropKind::Scalar(t),
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(_) => return Err(err("unexpected header line")),
        }
    }
    let format = format.ok_or_else(|| Error::parse(0, "PLY header has no format line"))?;
    Ok(Header {
        format,
        elements,
        data_start: pos,
    })
}

/// Column positions of the attributes we read from the vertex element.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
    sensor: Option<[usize; 3]>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let find = |n: &str| -> Result<Option<usize>> {
        match el.props.iter().position(|p| p.name == n) {
            Some(i) => match el.props[i].kind {
                PropKind::Scalar(_) => Ok(Some(i)),
                PropKind::List { .. } => Err(Error::parse(0, format!("vertex property '{n}' is a list"))),
            },
            None => Ok(None),
        }
    };
    let triple = |names: [&str; 3]| -> Result<Option<[usize; 3]>> {
        match (find(names[0])?, find(names[1])?, find(names[2])?) {
            (Some(a), Some(b), Some(c)) => Ok(Some([a, b, c])),
            (None, None, None) => Ok(None),
            _ => Err(Error::parse(0, format!("incomplete vertex triple {names:?}"))),
        }
    };
    Ok(VertexLayout {
        xyz: triple(["x", "y", "z"])?.ok_or_else(|| Error::parse(0, "vertex element lacks x, y, z"))?,
        normal: triple(["nx", "ny", "nz"])?,
        sensor: triple(["sx", "sy", "sz"])?,
    })
}

/// Raw rows of scalar property values, one `Vec<f64>` per vertex. List
/// properties are skipped.
fn read_rows(bytes: &[u8], header: &Header) -> Result<(Vec<Vec<f64>>, Option<usize>)> {
    let mut pos = header.data_start;
    let mut vertex_rows = Vec::new();
    let mut vertex_el = None;
    let mut ascii = AsciiCursor { bytes, pos };
    for (ei, el) in header.elements.iter().enumerate() {
        let is_vertex = el.name == "vertex" && vertex_el.is_none();
        if is_vertex {
            vertex_el = Some(ei);
            vertex_rows.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut row = Vec::with_capacity(if is_vertex { el.props.len() } else { 0 });
            match header.format {
                Format::BinaryLe => {
                    for p in &el.props {
                        match p.kind {
                            PropKind::Scalar(t) => {
                                let v = take(bytes, &mut pos, t)?;
                                if is_vertex {
                                    row.push(v);
                                }
                            }
                            PropKind::List { count, item } => {
                                let n = take(bytes, &mut pos, count)?;
                                if n.is_nan() || n < 0.0 {
                                    return Err(Error::parse(pos as u64, "negative list length"));
                                }
                                for _ in 0..n as usize {
                                    take(bytes, &mut pos, item)?;
                                }
                                if is_vertex {
                                    row.push(f64::NAN);
                                }
                            }
                        }
                    }
                }
                Format::Ascii => {
                    for p in &el.props {
                        match p.kind {
                            PropKind::Scalar(_) => {
                                let v = ascii.number()?;
                                if is_vertex {
                                    row.push(v);
                                }
                            }
                            PropKind::List { .. } => {
                                let n = ascii.number()?;
                                for _ in 0..n.max(0.0) as usize {
                                    ascii.number()?;
                                }
                                if is_vertex {
                                    row.push(f64::NAN);
                                }
                            }
                        }
                    }
                }
            }
            if is_vertex {
                vertex_rows.push(row);
            }
        }
    }
    Ok((vertex_rows, vertex_el))
}

fn take(bytes: &[u8], pos: &mut usize, t: Scalar) -> Result<f64> {
    let n = t.size();
    if *pos + n > bytes.len() {
        return Err(Error::parse(
            *pos as u64,
            format!("truncated payload: need {n} bytes, {} left", bytes.len() - *pos),
        ));
    }
    let v = t.decode(&bytes[*pos..*pos + n]);
    *pos += n;
    Ok(v)
}

struct AsciiCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl AsciiCursor<'_> {
    fn number(&mut self) -> Result<f64> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start as u64, "truncated payload: expected a value"));
        }
        let tok = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        tok.parse::<f64>()
            .map_err(|_| Error::parse(start as u64, format!("bad number '{tok}'")))
    }
}

/// Parse a PLY file held in memory.
pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let (rows, vertex_el) = read_rows(bytes, &header)?;
    let Some(ve) = vertex_el else {
        return Err(Error::parse(0, "PLY file has no vertex element"));
    };
    let layout = vertex_layout(&header.elements[ve])?;
    let get = |row: &[f64], idx: [usize; 3]| Point3::new(row[idx[0]], row[idx[1]], row[idx[2]]);

    let positions: Vec<Point3> = rows.iter().map(|r| get(r, layout.xyz)).collect();
    let mut cloud = PointCloud::new(positions).map_err(|e| Error::parse(header.data_start as u64, e.to_string()))?;
    if let Some(ni) = layout.normal {
        let normals = rows
            .iter()
            .map(|r| {
                let n = get(r, ni);
                if n == Point3::ZERO || !n.is_finite() {
                    None
                } else if (n.norm() - 1.0).abs() <= NORMAL_UNIT_TOL {
                    Some(n)
                } else {
                    n.normalized()
                }
            })
            .collect();
        cloud.set_normals(Some(normals))?;
    }
    if let Some(si) = layout.sensor {
        let origins = rows.iter().map(|r| get(r, si)).collect();
        cloud
            .set_sensor_origins(Some(origins))
            .map_err(|e| Error::parse(header.data_start as u64, e.to_string()))?;
    }
    Ok(cloud)
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    parse_ply(&fs::read(path)?)
}

/// Serialize to PLY bytes. Binary output stores doubles little-endian; ASCII
/// output uses 17 significant digits, so both round-trip `f64` exactly.
pub fn encode_ply(cloud: &PointCloud, binary: bool) -> Vec<u8> {
    let mut out = Vec::new();
    let mut props = vec!["x", "y", "z"];
    if cloud.has_normals() {
        props.extend(["nx", "ny", "nz"]);
    }
    if cloud.sensor_origins().is_some() {
        props.extend(["sx", "sy", "sz"]);
    }
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(if binary {
        b"format binary_little_endian 1.0\n".as_slice()
    } else {
        b"format ascii 1.0\n".as_slice()
    });
    out.extend_from_slice(b"comment udfgrid\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for p in &props {
        out.extend_from_slice(format!("property double {p}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let mut row = Vec::with_capacity(9);
    for i in 0..cloud.len() {
        row.clear();
        row.extend(cloud.position(i).to_array());
        if let Some(ns) = cloud.normals() {
            row.extend(ns[i].unwrap_or(Point3::ZERO).to_array());
        }
        if let Some(os) = cloud.sensor_origins() {
            row.extend(os[i].to_array());
        }
        if binary {
            for v in &row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        } else {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_ply(cloud: &PointCloud, path: &Path, binary: bool) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode_ply(cloud, binary))?;
    w.flush()?;
    Ok(())
}
