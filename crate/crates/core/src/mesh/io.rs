//! PLY (ASCII and binary little-endian 1.0) and OBJ readers/writers.
//!
//! Only geometry is read: vertex `x y z` and polygonal faces, which are
//! fan-triangulated. Other elements and properties are skipped.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
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
    fn parse(s: &str) -> Result<Scalar> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return Err(Error::Parse(format!("unknown PLY scalar type '{s}'"))),
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

    fn read_le(self, buf: &[u8]) -> f64 {
        match self {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(buf[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
enum Encoding {
    Ascii,
    BinaryLe,
}

fn parse_header<R: BufRead>(r: &mut R) -> Result<(Encoding, Vec<Element>)> {
    let mut line = String::new();
    let next = |r: &mut R, line: &mut String| -> Result<bool> {
        line.clear();
        Ok(r.read_line(line)? > 0)
    };
    if !next(r, &mut line)? || line.trim() != "ply" {
        return Err(Error::Parse("missing 'ply' magic".into()));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next(r, &mut line)? {
            return Err(Error::Parse("PLY header not terminated".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => encoding = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(Encoding::BinaryLe),
            ["format", other, _] => {
                return Err(Error::Parse(format!("unsupported PLY format '{other}'")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property before element".into()))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property before element".into()))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                });
            }
            _ => return Err(Error::Parse(format!("bad PLY header line '{}'", line.trim()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Parse("PLY format line missing".into()))?;
    Ok((encoding, elements))
}

fn xyz_slots(el: &Element) -> Result<[usize; 3]> {
    let find = |n: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
            .ok_or_else(|| Error::Parse(format!("vertex element lacks property '{n}'")))
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

fn face_slot(el: &Element) -> Result<usize> {
    el.props
        .iter()
        .position(|p| {
            matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
        })
        .ok_or_else(|| Error::Parse("face element lacks a vertex_indices list".into()))
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>, dropped: &mut usize) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::Parse(format!("face with {} vertices", poly.len())));
    }
    for k in 1..poly.len() - 1 {
        let t = [poly[0], poly[k], poly[k + 1]];
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            *dropped += 1;
        } else {
            out.push(t);
        }
    }
    Ok(())
}

fn finish(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, dropped: usize) -> Result<TriangleMesh> {
    if dropped > 0 {
        log::warn!("dropped {dropped} degenerate triangles");
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Reads a PLY mesh from a byte stream.
pub fn read_ply<R: Read>(reader: R) -> Result<TriangleMesh> {
    let mut r = BufReader::new(reader);
    let (encoding, elements) = parse_header(&mut r)?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut dropped = 0;
    match encoding {
        Encoding::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text)?;
            let mut toks = text.split_whitespace();
            let mut num = |what: &str| -> Result<f64> {
                let t = toks
                    .next()
                    .ok_or_else(|| Error::Parse(format!("unexpected end of data reading {what}")))?;
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{t}' in {what}")))
            };
            for el in &elements {
                let (xyz, fslot) = match el.name.as_str() {
                    "vertex" => (Some(xyz_slots(el)?), None),
                    "face" => (None, Some(face_slot(el)?)),
                    _ => (None, None),
                };
                for _ in 0..el.count {
                    let mut p = [0.0; 3];
                    for (pi, prop) in el.props.iter().enumerate() {
                        match prop {
                            Property::Scalar { .. } => {
                                let v = num(&el.name)?;
                                if let Some(s) = xyz {
                                    if let Some(k) = s.iter().position(|&q| q == pi) {
                                        p[k] = v;
                                    }
                                }
                            }
                            Property::List { .. } => {
                                let n = num(&el.name)? as usize;
                                let mut items = Vec::with_capacity(n);
                                for _ in 0..n {
                                    items.push(num(&el.name)?);
                                }
                                if fslot == Some(pi) {
                                    let poly: Vec<u32> = items.iter().map(|&x| x as u32).collect();
                                    fan(&poly, &mut triangles, &mut dropped)?;
                                }
                            }
                        }
                    }
                    if xyz.is_some() {
                        vertices.push(Vec3::new(p[0], p[1], p[2]));
                    }
                }
            }
        }
        Encoding::BinaryLe => {
            let mut data = Vec::new();
            r.read_to_end(&mut data)?;
            let mut pos = 0usize;
            let mut take = |n: usize| -> Result<&[u8]> {
                if pos + n > data.len() {
                    return Err(Error::Parse("truncated binary PLY body".into()));
                }
                let s = &data[pos..pos + n];
                pos += n;
                Ok(s)
            };
            for el in &elements {
                let (xyz, fslot) = match el.name.as_str() {
                    "vertex" => (Some(xyz_slots(el)?), None),
                    "face" => (None, Some(face_slot(el)?)),
                    _ => (None, None),
                };
                for _ in 0..el.count {
                    let mut p = [0.0; 3];
                    for (pi, prop) in el.props.iter().enumerate() {
                        match prop {
                            Property::Scalar { ty, .. } => {
                                let v = ty.read_le(take(ty.size())?);
                                if let Some(s) = xyz {
                                    if let Some(k) = s.iter().position(|&q| q == pi) {
                                        p[k] = v;
                                    }
                                }
                            }
                            Property::List { count, item, .. } => {
                                let n = count.read_le(take(count.size())?) as usize;
                                let bytes = take(n * item.size())?;
                                if fslot == Some(pi) {
                                    let poly: Vec<u32> = bytes
                                        .chunks_exact(item.size())
                                        .map(|b| item.read_le(b) as u32)
                                        .collect();
                                    fan(&poly, &mut triangles, &mut dropped)?;
                                }
                            }
                        }
                    }
                    if xyz.is_some() {
                        vertices.push(Vec3::new(p[0], p[1], p[2]));
                    }
                }
            }
        }
    }
    finish(vertices, triangles, dropped)
}

/// Reads a Wavefront OBJ mesh (`v` and `f` records only).
pub fn read_obj<R: Read>(reader: R) -> Result<TriangleMesh> {
    let r = BufReader::new(reader);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut dropped = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<f64> = toks
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in toks {
                    let first = t.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad face index '{t}'", lineno + 1)))?;
                    let abs = if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        idx - 1
                    };
                    if abs < 0 {
                        return Err(Error::Parse(format!("line {}: face index out of range", lineno + 1)));
                    }
                    poly.push(abs as u32);
                }
                fan(&poly, &mut triangles, &mut dropped)?;
            }
            _ => {}
        }
    }
    finish(vertices, triangles, dropped)
}

/// Loads a mesh by extension (`.ply` or `.obj`).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let res = match ext.as_deref() {
        Some("obj") => read_obj(file),
        Some("ply") => read_ply(file),
        _ => Err(Error::Parse("unknown mesh extension (expected .ply or .obj)".into())),
    };
    res.map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes PLY with `float x,y,z` vertices and `uchar`/`int` face lists.
pub fn write_ply<W: Write>(mesh: &TriangleMesh, format: PlyFormat, mut w: W) -> Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.triangle_count()
    )?;
    match format {
        PlyFormat::Ascii => {
            for v in mesh.vertices() {
                writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
            }
            for t in mesh.triangles() {
                writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in [v.x, v.y, v.z] {
                    w.write_all(&(c as f32).to_le_bytes())?;
                }
            }
            for t in mesh.triangles() {
                w.write_all(&[3u8])?;
                for k in t {
                    w.write_all(&(*k as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Saves by extension; PLY files are written binary little-endian.
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("obj") => write_obj(mesh, &mut buf)?,
        _ => write_ply(mesh, PlyFormat::BinaryLittleEndian, &mut buf)?,
    }
    write_atomic(path, &buf)
}

/// Writes through a temporary sibling file renamed into place, so readers
/// never see a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    if let Err(e) = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(io(e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    const TRI: &str = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn minimal_ascii() {
        let m = read_ply(TRI.as_bytes()).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.vertex_count(), 3);
    }

    #[test]
    fn quad_is_fanned() {
        let src = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty double x\nproperty double y\n\
property double z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n\
0 0 0 1\n1 0 0 2\n1 1 0 3\n0 1 0 4\n4 0 1 2 3\n";
        let m = read_ply(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn truncated_binary_fails() {
        let m = shapes::icosphere(1);
        let mut buf = Vec::new();
        write_ply(&m, PlyFormat::BinaryLittleEndian, &mut buf).unwrap();
        let cut = &buf[..buf.len() - 7];
        assert!(matches!(read_ply(cut), Err(Error::Parse(_))));
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        let m = shapes::icosphere(2);
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply(&m, fmt, &mut buf).unwrap();
            let back = read_ply(&buf[..]).unwrap();
            assert_eq!(back.triangles(), m.triangles());
            for (a, b) in back.vertices().iter().zip(m.vertices()) {
                assert!((a - b).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn obj_round_trip_with_slashes() {
        let src = "# cube corner\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\nf -4 -3 -2\n";
        let m = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangle_count(), 3);
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        assert_eq!(read_obj(&buf[..]).unwrap(), m);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let src = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n";
        assert!(matches!(read_ply(src.as_bytes()), Err(Error::EmptyMesh)));
        assert!(read_ply("plx\n".as_bytes()).is_err());
    }
}
