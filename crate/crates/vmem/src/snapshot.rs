//! Versioned binary memory snapshots.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VMEM" u16:version
//! config:  MergeConfig (7 × f64) | OctreeConfig (u32, u32, f64)
//!          | RetrievalConfig (u32 k, u32 w, u32 h, f64 rot, f64 trans, u8 strategy, u32 grid, u32 depths)
//!          | u32 next_frame
//! surfels: u64 count, then per surfel 7 × f64 (p, n, r), varint n_views, varint deltas
//! views:   u64 count, then per record u32 frame, u8 kind, pose (7 × f64),
//!          intrinsics (3 × f64, 2 × u32), payload by kind:
//!            0 inline   u64 len + PNG bytes
//!            1 discarded (no payload)
//!            2 external varint len + UTF-8 path of a PNG file
//! ```

use std::path::{Path, PathBuf};

use vmem_core::geometry::{Camera, CameraPose, Intrinsics, Quaternion};
use vmem_core::octree::OctreeConfig;
use vmem_core::store::MemorySnapshot;
use vmem_core::{MergeConfig, RetrievalConfig, Strategy, Surfel, SurfelStore, Vec3, View};

use crate::error::{Result, VmemError};
use crate::fsio::{read_file, write_atomic};
use crate::images::{decode_png, encode_png};

pub const MAGIC: &[u8; 4] = b"VMEM";
pub const VERSION: u16 = 1;

const KIND_INLINE: u8 = 0;
const KIND_DISCARDED: u8 = 1;
const KIND_EXTERNAL: u8 = 2;

/// Where view images go when saving.
#[derive(Debug, Clone, Default)]
pub struct SaveOptions {
    /// Write images as PNG files into this directory instead of inline.
    /// Relative paths are taken relative to the snapshot's directory.
    pub frames_dir: Option<PathBuf>,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vec3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn varint(&mut self, mut v: u64) {
        while v >= 0x80 {
            self.0.push((v as u8) | 0x80);
            v >>= 7;
        }
        self.0.push(v as u8);
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn camera(&mut self, c: &Camera) {
        let q = c.pose.rotation;
        for v in [q.w, q.x, q.y, q.z] {
            self.f64(v);
        }
        self.vec3(c.pose.translation);
        let k = c.intrinsics;
        self.f64(k.focal);
        self.f64(k.cx);
        self.f64(k.cy);
        self.u32(k.width);
        self.u32(k.height);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(VmemError::Snapshot(format!(
                "truncated snapshot: incomplete {} section",
                self.section
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn vec3(&mut self) -> Result<Vec3> {
        Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(VmemError::Snapshot(format!("overlong varint in {} section", self.section)))
    }
    fn count(&mut self, min_record: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_record as u64) > left {
            return Err(VmemError::Snapshot(format!(
                "truncated snapshot: incomplete {} section ({n} records declared)",
                self.section
            )));
        }
        Ok(n as usize)
    }
    fn camera(&mut self, record: usize) -> Result<Camera> {
        let (w, x, y, z) = (self.f64()?, self.f64()?, self.f64()?, self.f64()?);
        let translation = self.vec3()?;
        let (focal, cx, cy) = (self.f64()?, self.f64()?, self.f64()?);
        let (width, height) = (self.u32()?, self.u32()?);
        let bad = |e: vmem_core::Error| VmemError::Snapshot(format!("view record {record}: {e}"));
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !((norm - 1.0).abs() <= 1e-6) || !translation.is_finite() {
            return Err(VmemError::Snapshot(format!("view record {record}: pose is not a rigid transform")));
        }
        let rotation = Quaternion { w, x, y, z };
        let intrinsics = Intrinsics::new(focal, cx, cy, width, height).map_err(bad)?;
        Ok(Camera::new(CameraPose::new(rotation, translation), intrinsics))
    }
}

fn strategy_code(s: Strategy) -> u8 {
    Strategy::ALL.iter().position(|&x| x == s).expect("listed") as u8
}

fn write_config(w: &mut Writer, snap: &MemorySnapshot, retrieval: &RetrievalConfig) {
    let m = &snap.config;
    for v in [
        m.merge_distance_scale,
        m.normal_cos_threshold,
        m.view_nms_rot_deg,
        m.view_nms_trans,
        m.sigma,
        m.alpha,
        m.scene_diagonal,
    ] {
        w.f64(v);
    }
    w.u32(snap.octree.max_leaf_points as u32);
    w.u32(snap.octree.max_depth);
    w.f64(snap.octree.initial_half_extent);
    let r = retrieval;
    w.u32(r.k as u32);
    w.u32(r.render_width);
    w.u32(r.render_height);
    w.f64(r.nms_rot_deg);
    w.f64(r.nms_trans);
    w.u8(strategy_code(r.strategy));
    w.u32(r.fov_grid);
    w.u32(r.fov_depths);
    w.u32(snap.next_frame);
}

fn frame_file_name(frame: u32) -> String {
    format!("frame_{frame:06}.png")
}

/// Serializes a store. External images are written under `frames_dir`, which
/// is resolved against `base`.
fn encode(store: &SurfelStore, retrieval: &RetrievalConfig, frames_dir: Option<&Path>, base: &Path) -> Result<Vec<u8>> {
    let snap = store.snapshot();
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u16(VERSION);
    write_config(&mut w, &snap, retrieval);

    w.u64(snap.surfels.len() as u64);
    for s in &snap.surfels {
        w.vec3(s.position);
        w.vec3(s.normal);
        w.f64(s.radius);
        w.varint(s.views.len() as u64);
        let mut prev = 0u32;
        for &f in &s.views {
            w.varint((f - prev) as u64);
            prev = f;
        }
    }

    let mut records: Vec<(u32, Option<&View>, Camera)> = snap
        .views
        .iter()
        .map(|v| (v.frame_index, Some(v), v.camera))
        .chain(snap.discarded.iter().map(|&(f, c)| (f, None, c)))
        .collect();
    records.sort_by_key(|r| r.0);
    w.u64(records.len() as u64);
    for (frame, view, camera) in records {
        w.u32(frame);
        match (view, frames_dir) {
            (None, _) => {
                w.u8(KIND_DISCARDED);
                w.camera(&camera);
            }
            (Some(v), None) => {
                w.u8(KIND_INLINE);
                w.camera(&camera);
                let png = encode_png(&v.image)?;
                w.u64(png.len() as u64);
                w.bytes(&png);
            }
            (Some(v), Some(dir)) => {
                w.u8(KIND_EXTERNAL);
                w.camera(&camera);
                let rel = dir.join(frame_file_name(frame));
                write_atomic(&base.join(&rel), &encode_png(&v.image)?)?;
                let s = rel.to_string_lossy();
                w.varint(s.len() as u64);
                w.bytes(s.as_bytes());
            }
        }
    }
    Ok(w.0)
}

/// Serializes a store with inline images.
pub fn to_bytes(store: &SurfelStore, retrieval: &RetrievalConfig) -> Result<Vec<u8>> {
    encode(store, retrieval, None, Path::new("."))
}

fn read_config(r: &mut Reader) -> Result<(MergeConfig, OctreeConfig, RetrievalConfig, u32)> {
    let merge = MergeConfig {
        merge_distance_scale: r.f64()?,
        normal_cos_threshold: r.f64()?,
        view_nms_rot_deg: r.f64()?,
        view_nms_trans: r.f64()?,
        sigma: r.f64()?,
        alpha: r.f64()?,
        scene_diagonal: r.f64()?,
    };
    let octree = OctreeConfig {
        max_leaf_points: r.u32()? as usize,
        max_depth: r.u32()?,
        initial_half_extent: r.f64()?,
    };
    let k = r.u32()? as usize;
    let (render_width, render_height) = (r.u32()?, r.u32()?);
    let (nms_rot_deg, nms_trans) = (r.f64()?, r.f64()?);
    let code = r.u8()?;
    let strategy = *Strategy::ALL
        .get(code as usize)
        .ok_or_else(|| VmemError::Snapshot(format!("unknown strategy code {code}")))?;
    let retrieval = RetrievalConfig {
        k,
        render_width,
        render_height,
        nms_rot_deg,
        nms_trans,
        strategy,
        fov_grid: r.u32()?,
        fov_depths: r.u32()?,
    };
    let next_frame = r.u32()?;
    merge.validate()?;
    retrieval.validate()?;
    if !(octree.max_leaf_points >= 1 && octree.initial_half_extent > 0.0) {
        return Err(VmemError::Snapshot("invalid octree parameters".into()));
    }
    Ok((merge, octree, retrieval, next_frame))
}

/// Parses a snapshot. External image paths resolve against `base`.
pub fn from_bytes(bytes: &[u8], base: &Path) -> Result<(SurfelStore, RetrievalConfig)> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        section: "header",
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(VmemError::Snapshot("bad snapshot header".into()));
    }
    r.take(4)?;
    let version = r.u16()?;
    if version != VERSION {
        return Err(VmemError::Snapshot(format!(
            "unsupported snapshot version {version} (expected {VERSION})"
        )));
    }

    r.section = "config";
    let (config, octree, retrieval, next_frame) = read_config(&mut r)?;

    r.section = "surfels";
    let n = r.count(57)?;
    let mut surfels = Vec::with_capacity(n);
    for i in 0..n {
        let position = r.vec3()?;
        let normal = r.vec3()?;
        let radius = r.f64()?;
        let m = r.varint()? as usize;
        if m > bytes.len() - r.pos {
            return Err(VmemError::Snapshot(format!(
                "truncated snapshot: incomplete surfels section (surfel {i})"
            )));
        }
        let mut views = Vec::with_capacity(m);
        let mut prev = 0u64;
        for _ in 0..m {
            prev += r.varint()?;
            let f = u32::try_from(prev).map_err(|_| VmemError::Snapshot(format!("surfel {i}: frame index overflow")))?;
            views.push(f);
        }
        let s = Surfel {
            position,
            normal,
            radius,
            views,
        };
        s.validate().map_err(|e| VmemError::Snapshot(format!("surfel {i}: {e}")))?;
        surfels.push(s);
    }

    r.section = "views";
    let n = r.count(93)?;
    let mut views = Vec::new();
    let mut discarded = Vec::new();
    let mut last = 0u32;
    for i in 0..n {
        let frame = r.u32()?;
        if frame <= last {
            return Err(VmemError::Snapshot(format!(
                "view record {i}: frame {frame} out of order"
            )));
        }
        last = frame;
        let kind = r.u8()?;
        let camera = r.camera(i)?;
        let image = match kind {
            KIND_DISCARDED => {
                discarded.push((frame, camera));
                continue;
            }
            KIND_INLINE => {
                let len = r.u64()? as usize;
                decode_png(r.take(len)?)
                    .map_err(|e| VmemError::Snapshot(format!("view record {i}: {e}")))?
            }
            KIND_EXTERNAL => {
                let len = r.varint()? as usize;
                let rel = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| VmemError::Snapshot(format!("view record {i}: frame path is not UTF-8")))?;
                let path = base.join(rel);
                decode_png(&read_file(&path)?)
                    .map_err(|e| VmemError::Snapshot(format!("view record {i} ({}): {e}", path.display())))?
            }
            other => {
                return Err(VmemError::Snapshot(format!("view record {i}: unknown kind {other}")));
            }
        };
        let k = camera.intrinsics;
        if image.width != k.width || image.height != k.height {
            return Err(VmemError::Snapshot(format!(
                "view record {i}: image is {}x{}, intrinsics say {}x{}",
                image.width, image.height, k.width, k.height
            )));
        }
        views.push(View {
            frame_index: frame,
            image,
            camera,
        });
    }
    if r.pos != bytes.len() {
        return Err(VmemError::Snapshot(format!(
            "{} trailing bytes after views section",
            bytes.len() - r.pos
        )));
    }

    let store = SurfelStore::restore(MemorySnapshot {
        config,
        octree,
        next_frame,
        surfels,
        views,
        discarded,
    })
    .map_err(|e| VmemError::Snapshot(e.to_string()))?;
    Ok((store, retrieval))
}

fn base_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn save_snapshot(store: &SurfelStore, retrieval: &RetrievalConfig, path: &Path) -> Result<()> {
    save_snapshot_with(store, retrieval, path, &SaveOptions::default())
}

pub fn save_snapshot_with(
    store: &SurfelStore,
    retrieval: &RetrievalConfig,
    path: &Path,
    options: &SaveOptions,
) -> Result<()> {
    let bytes = encode(store, retrieval, options.frames_dir.as_deref(), base_of(path))?;
    write_atomic(path, &bytes)
}

pub fn load_snapshot(path: &Path) -> Result<(SurfelStore, RetrievalConfig)> {
    let bytes = read_file(path)?;
    from_bytes(&bytes, base_of(path))
}
