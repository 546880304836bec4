//! The `GCLAB1` binary container for meshes, operators and bases.
//!
//! Layout: 8-byte magic, `u32` version, `u32` section count, then sections of
//! an 8-byte NUL-padded tag, a `u64` payload length and the payload. All
//! numbers are little-endian.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use sprs::TriMat;

use crate::differentials::DifferentialBasis;
use crate::error::{GclabError, Result};
use crate::geometry::mesh::Identification;
use crate::geometry::{DiscreteOperators, FuchsianGroup, MobiusMap, SurfaceMesh, C64};

pub const MAGIC: [u8; 8] = *b"GCLAB1\0\0";
pub const VERSION: u32 = 1;

/// Parameters a cached artifact depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheKey {
    pub mesh_level: u32,
    pub r_cut: f64,
    pub kappa: u32,
    pub power_count: usize,
}

impl CacheKey {
    /// File name unique to the key.
    pub fn file_name(&self) -> String {
        format!(
            "gclab_L{}_r{}_k{}_p{}.bin",
            self.mesh_level,
            self.r_cut.to_bits(),
            self.kappa,
            self.power_count
        )
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(self.file_name())
    }
}

/// Contents of a cache file.
pub struct Cached {
    pub mesh: SurfaceMesh,
    pub ops: DiscreteOperators,
    pub basis: Option<DifferentialBasis>,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn c64(&mut self, v: C64) {
        self.f64(v.re);
        self.f64(v.im);
    }
    fn section(&mut self, tag: &str, payload: Writer) {
        let mut t = [0u8; 8];
        t[..tag.len()].copy_from_slice(tag.as_bytes());
        self.0.extend_from_slice(&t);
        self.usize(payload.0.len());
        self.0.extend_from_slice(&payload.0);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| GclabError::Cache("truncated file".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| GclabError::Cache("length overflow".into()))
    }
    /// A count of items at least `item` bytes each, bounded by the remaining data.
    fn count(&mut self, item: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(item) > self.data.len() - self.pos {
            return Err(GclabError::Cache("count exceeds payload".into()));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn c64(&mut self) -> Result<C64> {
        Ok(C64::new(self.f64()?, self.f64()?))
    }
    fn index(&mut self, bound: usize) -> Result<usize> {
        let i = self.usize()?;
        if i >= bound {
            return Err(GclabError::Cache(format!("index {i} out of range {bound}")));
        }
        Ok(i)
    }
    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

fn encode_key(key: &CacheKey) -> Writer {
    let mut w = Writer::default();
    w.u32(key.mesh_level);
    w.f64(key.r_cut);
    w.u32(key.kappa);
    w.usize(key.power_count);
    w
}

fn decode_key(r: &mut Reader) -> Result<CacheKey> {
    Ok(CacheKey {
        mesh_level: r.u32()?,
        r_cut: r.f64()?,
        kappa: r.u32()?,
        power_count: r.usize()?,
    })
}

fn encode_mesh(mesh: &SurfaceMesh, ops: &DiscreteOperators) -> Writer {
    let mut w = Writer::default();
    w.u32(mesh.level);
    w.usize(mesh.vertices.len());
    mesh.vertices.iter().for_each(|&z| w.c64(z));
    w.usize(mesh.triangles.len());
    for t in &mesh.triangles {
        t.iter().for_each(|&i| w.usize(i));
    }
    mesh.logical.iter().for_each(|&i| w.usize(i));
    w.usize(mesh.points.len());
    mesh.points.iter().for_each(|&z| w.c64(z));
    mesh.vertex_area.iter().for_each(|&a| w.f64(a));
    w.usize(mesh.identification.len());
    for id in &mesh.identification {
        w.usize(id.slave);
        w.usize(id.master);
        w.c64(id.map.a);
        w.c64(id.map.b);
    }
    w.usize(ops.stiffness.nnz());
    for (v, (row, col)) in ops.stiffness.iter() {
        w.usize(row);
        w.usize(col);
        w.f64(*v);
    }
    ops.mass.iter().for_each(|&m| w.f64(m));
    w
}

fn decode_mesh(r: &mut Reader) -> Result<(SurfaceMesh, DiscreteOperators)> {
    let level = r.u32()?;
    let nv = r.count(16)?;
    let vertices = (0..nv).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
    let nt = r.count(24)?;
    let triangles = (0..nt)
        .map(|_| Ok([r.index(nv)?, r.index(nv)?, r.index(nv)?]))
        .collect::<Result<Vec<_>>>()?;
    let nl_raw: Vec<u64> = (0..nv).map(|_| r.u64()).collect::<Result<_>>()?;
    let nl = r.count(24)?;
    let logical = nl_raw
        .into_iter()
        .map(|i| {
            usize::try_from(i)
                .ok()
                .filter(|&i| i < nl)
                .ok_or_else(|| GclabError::Cache("logical index out of range".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = (0..nl).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
    let vertex_area = (0..nl).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let ni = r.count(48)?;
    let identification = (0..ni)
        .map(|_| {
            Ok(Identification {
                slave: r.index(nv)?,
                master: r.index(nv)?,
                map: MobiusMap::new(r.c64()?, r.c64()?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let nnz = r.count(24)?;
    let mut trip = TriMat::new((nl, nl));
    for _ in 0..nnz {
        let (row, col, v) = (r.index(nl)?, r.index(nl)?, r.f64()?);
        trip.add_triplet(row, col, v);
    }
    let mass = (0..nl).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Ok((
        SurfaceMesh {
            vertices,
            triangles,
            logical,
            points,
            vertex_area,
            identification,
            level,
        },
        DiscreteOperators {
            stiffness: trip.to_csr(),
            mass,
        },
    ))
}

fn encode_basis(basis: &DifferentialBasis) -> Writer {
    let mut w = Writer::default();
    w.u32(basis.kappa);
    w.usize(basis.power_count);
    w.f64(basis.r_cut);
    w.usize(basis.transform.nrows());
    w.usize(basis.nu);
    basis.transform.iter().for_each(|&z| w.c64(z));
    w.usize(basis.vertex_count());
    basis.samples.iter().for_each(|&z| w.c64(z));
    w
}

fn decode_basis(r: &mut Reader, group: Arc<FuchsianGroup>, mesh: &SurfaceMesh) -> Result<DifferentialBasis> {
    let kappa = r.u32()?;
    let power_count = r.usize()?;
    let r_cut = r.f64()?;
    let rows = r.usize()?;
    let nu = r.usize()?;
    if rows != power_count || nu == 0 || nu > rows {
        return Err(GclabError::Cache("inconsistent basis shape".into()));
    }
    if r_cut != group.r_cut {
        return Err(GclabError::Cache("basis truncation radius differs from the group".into()));
    }
    let entries = (0..rows * nu).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
    let transform = DMatrix::from_column_slice(rows, nu, &entries);
    let n = r.usize()?;
    if n != mesh.logical_count() {
        return Err(GclabError::Cache("basis samples do not match the mesh".into()));
    }
    let samples = (0..n * nu).map(|_| r.c64()).collect::<Result<Vec<_>>>()?;
    Ok(DifferentialBasis::from_transform(
        group,
        mesh,
        kappa,
        power_count,
        transform,
        samples,
    ))
}

/// Serializes a mesh, its operators and optionally a basis.
pub fn encode(key: &CacheKey, mesh: &SurfaceMesh, ops: &DiscreteOperators, basis: Option<&DifferentialBasis>) -> Vec<u8> {
    let mut sections = vec![("KEY", encode_key(key)), ("MESH", encode_mesh(mesh, ops))];
    if let Some(b) = basis {
        sections.push(("BASIS", encode_basis(b)));
    }
    let mut w = Writer::default();
    w.0.extend_from_slice(&MAGIC);
    w.u32(VERSION);
    w.u32(sections.len() as u32);
    for (tag, payload) in sections {
        w.section(tag, payload);
    }
    w.0
}

/// Parses a container. Returns `Ok(None)` when the stored key differs from
/// `key`; malformed data is an error.
pub fn decode(bytes: &[u8], key: &CacheKey, group: Arc<FuchsianGroup>) -> Result<Option<Cached>> {
    let mut r = Reader { data: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(GclabError::Cache("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(GclabError::Cache(format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut stored_key = None;
    let mut mesh = None;
    let mut basis_bytes: Option<&[u8]> = None;
    for _ in 0..count {
        let tag = r.take(8)?;
        let len = r.usize()?;
        let payload = r.take(len)?;
        let name = std::str::from_utf8(tag)
            .map_err(|_| GclabError::Cache("bad section tag".into()))?
            .trim_end_matches('\0');
        let mut p = Reader { data: payload, pos: 0 };
        match name {
            "KEY" => stored_key = Some(decode_key(&mut p)?),
            "MESH" => mesh = Some(decode_mesh(&mut p)?),
            "BASIS" => {
                basis_bytes = Some(payload);
                continue;
            }
            other => return Err(GclabError::Cache(format!("unknown section {other}"))),
        }
        if !p.done() {
            return Err(GclabError::Cache(format!("trailing bytes in section {name}")));
        }
    }
    if !r.done() {
        return Err(GclabError::Cache("trailing bytes after sections".into()));
    }
    let stored_key = stored_key.ok_or_else(|| GclabError::Cache("missing KEY section".into()))?;
    if stored_key != *key {
        return Ok(None);
    }
    let (mesh, ops) = mesh.ok_or_else(|| GclabError::Cache("missing MESH section".into()))?;
    let basis = match basis_bytes {
        Some(b) => {
            let mut p = Reader { data: b, pos: 0 };
            let basis = decode_basis(&mut p, group, &mesh)?;
            if !p.done() {
                return Err(GclabError::Cache("trailing bytes in section BASIS".into()));
            }
            if basis.kappa != key.kappa || basis.power_count != key.power_count {
                return Err(GclabError::Cache("basis parameters differ from KEY".into()));
            }
            Some(basis)
        }
        None => None,
    };
    Ok(Some(Cached { mesh, ops, basis }))
}

pub fn write(path: &Path, key: &CacheKey, mesh: &SurfaceMesh, ops: &DiscreteOperators, basis: Option<&DifferentialBasis>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let tmp = path.with_extension(format!("{}-{}.tmp", std::process::id(), NEXT.fetch_add(1, Ordering::Relaxed)));
    fs::write(&tmp, encode(key, mesh, ops, basis))?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Loads a cache file; `Ok(None)` if it is absent or keyed differently.
pub fn read(path: &Path, key: &CacheKey, group: Arc<FuchsianGroup>) -> Result<Option<Cached>> {
    match fs::read(path) {
        Ok(bytes) => decode(&bytes, key, group),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_round_trip() {
        let mut w = Writer::default();
        w.u32(7);
        w.usize(1 << 40);
        w.f64(-0.125);
        w.c64(C64::new(1.5, -2.5));
        let mut r = Reader { data: &w.0, pos: 0 };
        assert_eq!(r.u32().unwrap(), 7);
        assert_eq!(r.usize().unwrap(), 1 << 40);
        assert_eq!(r.f64().unwrap(), -0.125);
        assert_eq!(r.c64().unwrap(), C64::new(1.5, -2.5));
        assert!(r.done());
        assert!(r.u32().is_err());
    }

    #[test]
    fn counts_and_indices_are_bounded() {
        let mut w = Writer::default();
        w.usize(1000);
        w.usize(5);
        let mut r = Reader { data: &w.0, pos: 0 };
        assert!(r.count(8).is_err());
        assert!(r.index(5).is_err());
    }
}
