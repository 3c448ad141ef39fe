//! OBJ and PLY readers, OBJ writer.
//!
//! OBJ: `v` and `f` records; `f` entries may be `i`, `i/t`, `i//n` or `i/t/n`
//! with 1-based or negative (relative) indices. Polygons are fan-triangulated
//! at their first vertex.
//!
//! PLY: `ascii` and `binary_little_endian` with a `vertex` element carrying
//! `x y z` and a `face` element with a list property of vertex indices.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            other => Err(Error::UnsupportedFormat(format!(
                "{}: unknown extension {:?}",
                path.display(),
                other
            ))),
        }
    }
}

/// Loads a mesh, inferring the format from the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    load_mesh_as(path, MeshFormat::from_path(path)?)
}

pub fn load_mesh_as(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            parse_obj(&text)
        }
        MeshFormat::Ply => parse_ply(&bytes),
    }
}

fn resolve_obj_index(token: &str, count: usize, line: usize, face: usize) -> Result<u32> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| Error::parse(line, format!("bad face index {token:?}")))?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        return Err(Error::parse(line, "face index 0 is not valid in OBJ"));
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(Error::IndexOutOfRange {
            face,
            index: raw,
            vertex_count: count,
        });
    }
    Ok(resolved as u32)
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = parts
                        .next()
                        .ok_or_else(|| Error::parse(lineno, "vertex needs 3 coordinates"))?;
                    *slot = f64::from_str(tok)
                        .map_err(|_| Error::parse(lineno, format!("bad coordinate {tok:?}")))?;
                }
                vertices.push(Vec3::from(c));
            }
            Some("f") => {
                let idx = parts
                    .map(|t| resolve_obj_index(t, vertices.len(), lineno, faces.len()))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
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

    fn read_le(self, b: &[u8]) -> f64 {
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

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
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

struct PlyHeader {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    body_offset: usize,
    body_line: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<PlyHeader> {
    let mut offset = 0;
    let mut lineno = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(lineno + 1, "unterminated PLY header"))?;
        let line = String::from_utf8_lossy(&bytes[offset..offset + end]);
        let line = line.trim();
        offset += end + 1;
        lineno += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if lineno == 1 => {}
            _ if lineno == 1 => return Err(Error::parse(1, "missing 'ply' magic")),
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLe),
            ["format", other, _] => {
                return Err(Error::UnsupportedFormat(format!("PLY encoding {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(lineno, "property before element"))?;
                let ct = Scalar::parse(ct).ok_or_else(|| Error::parse(lineno, "bad list count type"))?;
                let it = Scalar::parse(it).ok_or_else(|| Error::parse(lineno, "bad list item type"))?;
                el.props.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(lineno, "property before element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| Error::parse(lineno, "bad property type"))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => return Err(Error::parse(lineno, format!("unexpected header line {line:?}"))),
        }
    }
    Ok(PlyHeader {
        encoding: encoding.ok_or_else(|| Error::parse(lineno, "missing format line"))?,
        elements,
        body_offset: offset,
        body_line: lineno,
    })
}

/// Reads values for one element record, one `Vec<f64>` per property.
trait RecordSource {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
}

struct AsciiSource<'a> {
    tokens: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
    line: usize,
}

impl RecordSource for AsciiSource<'_> {
    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| Error::parse(self.line, "unexpected end of PLY body"))?;
        tok.parse()
            .map_err(|_| Error::parse(self.line, format!("bad PLY value {tok:?}")))
    }
}

struct BinarySource<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl RecordSource for BinarySource<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        let chunk = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::parse(0, "unexpected end of binary PLY body"))?;
        self.pos += n;
        Ok(ty.read_le(chunk))
    }
}

fn read_elements(header: &PlyHeader, src: &mut dyn RecordSource) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &header.elements {
        for _ in 0..el.count {
            let mut pos = [0.0; 3];
            let mut poly: Vec<i64> = Vec::new();
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = src.scalar(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => pos[0] = v,
                                "y" => pos[1] = v,
                                "z" => pos[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = src.scalar(*ct)? as usize;
                        let items = (0..n).map(|_| src.scalar(*it)).collect::<Result<Vec<_>>>()?;
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            poly = items.into_iter().map(|x| x as i64).collect();
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Vec3::from(pos)),
                "face" => {
                    if poly.len() < 3 {
                        return Err(Error::parse(header.body_line, "face needs at least 3 vertices"));
                    }
                    let face_index = faces.len();
                    let check = |i: i64| -> Result<u32> {
                        if i < 0 || i as usize >= vertices.len() {
                            Err(Error::IndexOutOfRange {
                                face: face_index,
                                index: i,
                                vertex_count: vertices.len(),
                            })
                        } else {
                            Ok(i as u32)
                        }
                    };
                    let idx = poly.iter().map(|&i| check(i)).collect::<Result<Vec<_>>>()?;
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let header = parse_ply_header(bytes)?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        PlyEncoding::Ascii => {
            let text = String::from_utf8_lossy(body);
            let mut src = AsciiSource {
                tokens: text.split_whitespace().peekable(),
                line: header.body_line,
            };
            read_elements(&header, &mut src)
        }
        PlyEncoding::BinaryLe => {
            let mut src = BinarySource { bytes: body, pos: 0 };
            read_elements(&header, &mut src)
        }
    }
}

/// ASCII OBJ text with full-precision coordinates.
pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 20);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    s
}

pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(to_obj_string(mesh).as_bytes())
        .map_err(|e| Error::io(path, e))
}
