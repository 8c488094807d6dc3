"""Precomputed voxel lookup for deterministic-time collision checking.

Offline, every primitive's sampled points are dilated by a query distance
and rasterized into a voxel grid; each voxel stores the sorted list of
primitive ids whose swept volume reaches it.  Online, checking a point
cloud against a speed slice is nothing but voxel lookups and bit-ors: no
geometric test ever runs per primitive, so the cost is O(#points) plus the
size of the unsafe set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError
from .library import PrimitiveLibrary

_HEADER = "PPIDX v1"

# Bitset lanes per voxel row.  Two 64-bit words cover every shipped library
# (at most 128 paths per slice) and keep the per-point cost identical across
# library sizes; wider slices grow the lane count.
_MIN_WORDS = 2


class IndexFormatError(FormatError):
    """Corrupt, truncated, or wrong-version index data."""


class LibraryMismatchError(RuntimeError):
    """The index was built from a different library than the one supplied."""


@dataclass
class CollisionIndex:
    """Voxel grid over the library's swept volume.

    ``offsets``/``ids`` form a CSR layout: voxel v (flattened C-order)
    owns ids[offsets[v]:offsets[v+1]], sorted ascending.  Ids are dense
    indices into the library's (path_id, speed_index) key order.
    """

    origin: np.ndarray  # (3,) grid corner, lattice-aligned
    dims: np.ndarray  # (3,) voxel counts
    voxel_size: float
    offsets: np.ndarray  # (n_vox + 1,) int64
    ids: np.ndarray  # (nnz,) int32
    query_distance: float
    library_hash: str
    library: Optional[PrimitiveLibrary] = None

    _key_to_dense: Optional[Dict[Tuple[int, int], int]] = None
    _slice_cache: Dict[int, tuple] = field(default_factory=dict)
    _words: int = 0
    _prim_vox: Optional[np.ndarray] = None
    _prim_offsets: Optional[np.ndarray] = None

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def bind(self, library: PrimitiveLibrary) -> None:
        """Attach the library this index was built from; hashes must match."""
        got = library.content_hash()
        if got != self.library_hash:
            raise LibraryMismatchError(
                f"index was built from library {self.library_hash[:12]}..., "
                f"got {got[:12]}...; regenerate the index"
            )
        self.library = library
        self._key_to_dense = None
        self._slice_cache.clear()

    def voxel_of(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Integer voxel indices and an in-grid mask for (n, 3) points."""
        idx = np.floor((points - self.origin) / self.voxel_size).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < self.dims), axis=1)
        return idx, ok

    def _slice_view(self, speed_index: int):
        """Per-slice bitset rows, built lazily and cached.

        Returns (members, bits, member_words): members are the slice's path
        ids, bits is an (n_vox, words) uint64 matrix with bit j set where
        the slice's j-th member occupies the voxel.
        """
        cached = self._slice_cache.get(speed_index)
        if cached is not None:
            return cached
        if self.library is None:
            raise LibraryMismatchError("index is not bound to a library")
        lib = self.library
        if self._key_to_dense is None:
            self._key_to_dense = {
                key: i for i, key in enumerate(lib.primitive_keys())
            }
            counts = np.diff(self.offsets)
            vox_for_entry = np.repeat(np.arange(self.n_voxels), counts)
            order = np.lexsort((vox_for_entry, self.ids))
            self._prim_vox = vox_for_entry[order]
            self._prim_offsets = np.concatenate(
                [[0], np.cumsum(np.bincount(self.ids, minlength=len(lib.primitives)))]
            )
            self._words = max(_MIN_WORDS, (len(lib.paths) + 63) // 64)

        members = lib.slice_paths(speed_index)
        words = self._words
        bits = np.zeros((self.n_voxels, words), dtype=np.uint64)
        for j, pid in enumerate(members.tolist()):
            dense = self._key_to_dense[(pid, speed_index)]
            vox = self._prim_vox[self._prim_offsets[dense] : self._prim_offsets[dense + 1]]
            bits[vox, j >> 6] |= np.uint64(1 << (j & 63))
        member_words = np.zeros(words, dtype=np.uint64)
        j = np.arange(len(members))
        np.bitwise_or.at(
            member_words,
            j >> 6,
            np.left_shift(np.uint64(1), (j & 63).astype(np.uint64)),
        )
        view = (members, bits, member_words)
        self._slice_cache[speed_index] = view
        return view


def build_index(
    library: PrimitiveLibrary,
    voxel_size: float = 0.05,
    d: Optional[float] = None,
    r_inflated: float = 0.05,
    robot_radius: float = 0.2,
) -> CollisionIndex:
    """Rasterize every primitive's sample points into the voxel grid.

    A voxel lists primitive p exactly when some sample point of p lies
    within ``query_distance = d + r_inflated`` of the voxel center.  ``d``
    defaults to the robot radius plus the voxel half-diagonal, so that any
    obstacle point inside an occupied voxel is conservatively accounted for.
    """
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be positive, got {voxel_size}")
    if r_inflated < 0:
        raise ValueError(f"r_inflated must be >= 0, got {r_inflated}")
    half_diag = 0.5 * math.sqrt(3.0) * voxel_size
    if d is None:
        d = robot_radius + half_diag
    if d <= 0:
        raise ValueError(f"clearance distance must be positive, got {d}")
    query = d + r_inflated

    h = voxel_size
    origin = np.floor((library.coverage_lo - query) / h) * h
    dims = np.ceil((library.coverage_hi + query - origin) / h).astype(np.int64)
    dims = np.maximum(dims, 1)
    n_vox = int(np.prod(dims))

    keys = library.primitive_keys()
    vox_chunks = []
    id_chunks = []
    for dense, key in enumerate(keys):
        pts = library.primitives[key].position
        tree = cKDTree(pts)
        lo_idx = np.maximum(
            np.floor((pts.min(axis=0) - query - origin) / h).astype(np.int64) - 1, 0
        )
        hi_idx = np.minimum(
            np.ceil((pts.max(axis=0) + query - origin) / h).astype(np.int64) + 1,
            dims - 1,
        )
        axes = [np.arange(lo_idx[a], hi_idx[a] + 1) for a in range(3)]
        gi, gj, gk = np.meshgrid(*axes, indexing="ij")
        cand = np.column_stack([gi.ravel(), gj.ravel(), gk.ravel()])
        centers = origin + (cand + 0.5) * h
        dist, _ = tree.query(centers, k=1, distance_upper_bound=query)
        hit = np.isfinite(dist)
        if not np.any(hit):
            continue
        flat = np.ravel_multi_index(
            (cand[hit, 0], cand[hit, 1], cand[hit, 2]), tuple(dims)
        )
        vox_chunks.append(flat.astype(np.int64))
        id_chunks.append(np.full(flat.size, dense, dtype=np.int32))

    if vox_chunks:
        vox = np.concatenate(vox_chunks)
        pids = np.concatenate(id_chunks)
        order = np.lexsort((pids, vox))
        vox = vox[order]
        pids = pids[order]
        offsets = np.concatenate(
            [[0], np.cumsum(np.bincount(vox, minlength=n_vox))]
        ).astype(np.int64)
    else:
        pids = np.empty(0, dtype=np.int32)
        offsets = np.zeros(n_vox + 1, dtype=np.int64)

    index = CollisionIndex(
        origin=origin,
        dims=dims,
        voxel_size=float(h),
        offsets=offsets,
        ids=pids,
        query_distance=float(query),
        library_hash=library.content_hash(),
        library=library,
    )
    return index


def check(
    index: CollisionIndex,
    points: np.ndarray,
    active_slice: int,
    stats_out: Optional[dict] = None,
) -> np.ndarray:
    """Safety mask over all path ids for one speed slice.

    ``points`` must already be expressed in the primitive frame.  Entry p is
    True when path p has a primitive in the slice and no point lands in a
    voxel listing it.  Out-of-grid points cannot collide with any primitive
    (the grid covers the swept volume inflated by the query distance) and
    are skipped.
    """
    members, bits, member_words = index._slice_view(active_slice)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n_paths = len(index.library.paths)
    mask = np.zeros(n_paths, dtype=bool)

    if points.shape[0]:
        idx, ok = index.voxel_of(points)
        idx = idx[ok]
        flats = (idx[:, 0] * index.dims[1] + idx[:, 1]) * index.dims[2] + idx[:, 2]
        n_lookups = int(flats.size)
        if n_lookups:
            unsafe = np.bitwise_or.reduce(bits[flats], axis=0)
        else:
            unsafe = np.zeros_like(member_words)
    else:
        n_lookups = 0
        unsafe = np.zeros_like(member_words)

    safe_words = member_words & ~unsafe
    j = np.arange(len(members))
    safe_local = (
        safe_words[j >> 6] >> (j & 63).astype(np.uint64)
    ).astype(np.uint64) & np.uint64(1)
    mask[members[safe_local.astype(bool)]] = True

    if stats_out is not None:
        stats_out["points"] = int(points.shape[0])
        stats_out["in_grid_points"] = n_lookups
        stats_out["voxel_lookups"] = n_lookups
    return mask


def serialize_index(index: CollisionIndex) -> bytes:
    def fmt(x: float) -> str:
        return repr(float(x))

    lines = [_HEADER]
    lines.append(f"origin = {','.join(fmt(v) for v in index.origin)}")
    lines.append(f"dims = {','.join(str(int(v)) for v in index.dims)}")
    lines.append(f"voxel_size = {fmt(index.voxel_size)}")
    lines.append(f"query_distance = {fmt(index.query_distance)}")
    lines.append(f"library_hash = {index.library_hash}")
    lines.append(f"n_entries = {index.ids.size}")
    offsets = index.offsets
    ids = index.ids
    for v in np.nonzero(np.diff(offsets))[0]:
        chunk = ids[offsets[v] : offsets[v + 1]]
        runs = []
        start = prev = int(chunk[0])
        for value in chunk[1:].tolist():
            if value == prev + 1:
                prev = value
                continue
            runs.append(f"{start}+{prev - start + 1}")
            start = prev = value
        runs.append(f"{start}+{prev - start + 1}")
        lines.append(f"{v} " + " ".join(runs))
    lines.append("")
    return "\n".join(lines).encode()


def deserialize_index(
    data: bytes, library: Optional[PrimitiveLibrary] = None
) -> CollisionIndex:
    """Parse an index; if a library is supplied, bind and verify its hash."""
    if not data:
        raise IndexFormatError("empty byte stream", 0)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IndexFormatError("not valid UTF-8 text", exc.start) from None
    lines = text.split("\n")
    offsets_b = np.cumsum([0] + [len(line.encode()) + 1 for line in lines[:-1]])
    if lines[0] != _HEADER:
        raise IndexFormatError(
            f"unsupported header {lines[0][:30]!r}, expected {_HEADER!r}", 0
        )

    manifest = {}
    i = 1
    for expected in (
        "origin",
        "dims",
        "voxel_size",
        "query_distance",
        "library_hash",
        "n_entries",
    ):
        if i >= len(lines) or " = " not in lines[i]:
            raise IndexFormatError(
                f"missing manifest line for {expected!r}", int(offsets_b[min(i, len(lines) - 1)])
            )
        key, value = lines[i].split(" = ", 1)
        if key != expected:
            raise IndexFormatError(
                f"expected manifest key {expected!r}, got {key!r}", int(offsets_b[i])
            )
        manifest[key] = (value, int(offsets_b[i]))
        i += 1

    def parse_triple(key: str, cast):
        value, off = manifest[key]
        parts = value.split(",")
        if len(parts) != 3:
            raise IndexFormatError(f"{key} needs 3 values", off)
        try:
            return np.array([cast(p) for p in parts])
        except ValueError:
            raise IndexFormatError(f"bad value in {key}: {value!r}", off) from None

    origin = parse_triple("origin", float)
    dims = parse_triple("dims", int).astype(np.int64)
    if np.any(dims <= 0):
        raise IndexFormatError("dims must be positive", manifest["dims"][1])
    try:
        voxel_size = float(manifest["voxel_size"][0])
        query_distance = float(manifest["query_distance"][0])
        n_entries = int(manifest["n_entries"][0])
    except ValueError as exc:
        raise IndexFormatError(f"bad manifest value: {exc}", 0) from None
    library_hash = manifest["library_hash"][0]

    n_vox = int(np.prod(dims))
    counts = np.zeros(n_vox, dtype=np.int64)
    id_list = []
    prev_vox = -1
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        parts = line.split()
        try:
            v = int(parts[0])
        except ValueError:
            raise IndexFormatError(f"bad voxel line {line[:40]!r}", int(offsets_b[i])) from None
        if not 0 <= v < n_vox:
            raise IndexFormatError(f"voxel {v} out of range", int(offsets_b[i]))
        if v <= prev_vox:
            raise IndexFormatError(
                f"voxel lines must be strictly ascending, got {v} after {prev_vox}",
                int(offsets_b[i]),
            )
        prev_vox = v
        prev_end = -1
        for token in parts[1:]:
            try:
                start_s, len_s = token.split("+")
                start, run = int(start_s), int(len_s)
            except ValueError:
                raise IndexFormatError(
                    f"bad run token {token!r}", int(offsets_b[i])
                ) from None
            if run <= 0 or start <= prev_end:
                raise IndexFormatError(
                    f"runs must be positive and ascending, got {token!r}",
                    int(offsets_b[i]),
                )
            id_list.append(np.arange(start, start + run, dtype=np.int32))
            counts[v] += run
            prev_end = start + run - 1
        i += 1

    ids = np.concatenate(id_list) if id_list else np.empty(0, dtype=np.int32)
    if ids.size != n_entries:
        raise IndexFormatError(
            f"manifest claims {n_entries} entries, found {ids.size}", 0
        )
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    index = CollisionIndex(
        origin=origin,
        dims=dims,
        voxel_size=voxel_size,
        offsets=offsets,
        ids=ids,
        query_distance=query_distance,
        library_hash=library_hash,
    )
    if library is not None:
        index.bind(library)
    return index


def save_index(index: CollisionIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_index(index))


def load_index(path, library: Optional[PrimitiveLibrary] = None) -> CollisionIndex:
    with open(path, "rb") as fh:
        return deserialize_index(fh.read(), library)
