"""On-disk cache of eigendecompositions.

File layout (little endian), one entry per file ``<key>.sqc``::

    offset  size  field
    0       8     magic  b"SQCACHE1"
    8       4     format version (uint32)
    12      4     rows (uint32)           eigenvector matrix is rows x cols
    16      4     cols (uint32)           number of eigenvalues
    20      4     reserved (zero)
    24      32    sha256 of the key string
    56      32    sha256 of the payload
    88      ...   payload: cols float64 eigenvalues, then rows*cols complex128
                  eigenvectors in C order

Writers hold a per-entry advisory lock (``<key>.lock``, via ``filelock``) and
publish with an atomic rename.  Readers that keep using an entry can hold the
same lock through :meth:`SpectralCache.pinned`; garbage collection never
evicts an entry whose lock it cannot take immediately.  Entries that fail
validation are moved to ``quarantine/`` rather than deleted.
"""
import hashlib
import os
import shutil
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from .operators import SpectralData

MAGIC = b"SQCACHE1"
VERSION = 1
_HEADER = struct.Struct("<8sIIII32s32s")
ENV_VAR = "SEMIQUANT_CACHE"


class CacheCorruptError(ValueError):
    """An entry failed header or checksum validation."""


def default_cache_dir():
    """Cache directory from ``SEMIQUANT_CACHE`` or ``~/.cache/semiquant``."""
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else Path.home() / ".cache" / "semiquant"


def spectral_key(geom, f, p, mode=None, degree=None):
    """Stable key from (geometry, Hamiltonian fingerprint, p, twist lift, grid)."""
    text = "|".join([f"v{VERSION}", geom.key(), f.fingerprint(), f"p={int(p)}",
                     f"mode={mode}", f"degree={degree}"])
    return hashlib.sha256(text.encode()).hexdigest()[:40], text


def encode(key_text, spec):
    lam = np.ascontiguousarray(spec.eigenvalues, dtype="<f8")
    vec = np.ascontiguousarray(spec.vectors, dtype="<c16")
    payload = lam.tobytes() + vec.tobytes()
    header = _HEADER.pack(MAGIC, VERSION, vec.shape[0], vec.shape[1], 0,
                          hashlib.sha256(key_text.encode()).digest(),
                          hashlib.sha256(payload).digest())
    return header + payload


def decode(blob, key_text=None):
    """Parse and validate an entry; raises :class:`CacheCorruptError`."""
    if len(blob) < _HEADER.size:
        raise CacheCorruptError("truncated header")
    magic, version, rows, cols, _, khash, phash = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CacheCorruptError("bad magic")
    if version != VERSION:
        raise CacheCorruptError(f"unsupported version {version}")
    payload = blob[_HEADER.size:]
    if len(payload) != 8 * cols + 16 * rows * cols:
        raise CacheCorruptError("payload size does not match header dims")
    if hashlib.sha256(payload).digest() != phash:
        raise CacheCorruptError("payload checksum mismatch")
    if key_text is not None and hashlib.sha256(key_text.encode()).digest() != khash:
        raise CacheCorruptError("key hash mismatch")
    lam = np.frombuffer(payload[: 8 * cols], dtype="<f8").astype(float)
    vec = np.frombuffer(payload[8 * cols:], dtype="<c16").reshape(rows, cols).astype(complex)
    return SpectralData(lam, vec)


@dataclass
class GcReport:
    """Outcome of :meth:`SpectralCache.gc`."""

    bytes_before: int = 0
    bytes_after: int = 0
    evicted: list = field(default_factory=list)
    skipped_locked: list = field(default_factory=list)
    quarantined: list = field(default_factory=list)

    def csv_rows(self):
        for name in self.evicted:
            yield {"entry": name, "action": "evicted"}
        for name in self.skipped_locked:
            yield {"entry": name, "action": "in_use"}
        for name in self.quarantined:
            yield {"entry": name, "action": "quarantined"}


class SpectralCache:
    """Directory of cached :class:`SpectralData` entries."""

    suffix = ".sqc"

    def __init__(self, root=None, lock_timeout=60.0):
        self.root = Path(root) if root is not None else default_cache_dir()
        self.root.mkdir(parents=True, exist_ok=True)
        self.lock_timeout = lock_timeout
        self.hits = 0
        self.misses = 0

    def _path(self, key):
        return self.root / f"{key}{self.suffix}"

    def _lock(self, key):
        return FileLock(str(self.root / f"{key}.lock"))

    @property
    def quarantine_dir(self):
        return self.root / "quarantine"

    def _quarantine(self, path):
        self.quarantine_dir.mkdir(exist_ok=True)
        dest = self.quarantine_dir / path.name
        shutil.move(str(path), str(dest))
        return dest

    def entries(self):
        return sorted(self.root.glob(f"*{self.suffix}"))

    def size_bytes(self):
        return sum(p.stat().st_size for p in self.entries())

    @contextmanager
    def pinned(self, key):
        """Hold the entry lock so garbage collection leaves it alone."""
        with self._lock(key).acquire(timeout=self.lock_timeout):
            yield

    def get(self, key, key_text=None):
        """Cached entry or ``None``; corrupt entries are quarantined."""
        path = self._path(key)
        with self._lock(key).acquire(timeout=self.lock_timeout):
            if not path.exists():
                return None
            try:
                spec = decode(path.read_bytes(), key_text)
            except CacheCorruptError:
                self._quarantine(path)
                return None
            os.utime(path)          # access order for LRU eviction
            return spec

    def put(self, key, spec, key_text=""):
        path = self._path(key)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        with self._lock(key).acquire(timeout=self.lock_timeout):
            tmp.write_bytes(encode(key_text, spec))
            os.replace(tmp, path)

    def get_or_compute(self, key, builder, key_text=None):
        spec = self.get(key, key_text)
        if spec is not None:
            self.hits += 1
            return spec
        self.misses += 1
        spec = builder()
        self.put(key, spec, key_text or "")
        return spec

    def spectra_provider(self, geom, f, mode=None):
        """``p -> SpectralData`` of ``Q_p(f)``, memoized on disk."""
        from .operators import quantize

        def provider(p):
            key, text = spectral_key(geom, f, p, mode)
            return self.get_or_compute(key, lambda: quantize(geom, f, p, mode).spectral(), text)
        return provider

    def validate(self):
        """Quarantine every unreadable entry; returns their names."""
        bad = []
        for path in self.entries():
            key = path.stem
            try:
                with self._lock(key).acquire(timeout=0):
                    decode(path.read_bytes())
            except Timeout:
                continue
            except CacheCorruptError:
                with self._lock(key).acquire(timeout=self.lock_timeout):
                    self._quarantine(path)
                bad.append(path.name)
        return bad

    def gc(self, max_bytes):
        """Evict least-recently-used entries until the size is at most ``max_bytes``.

        Corrupt entries are quarantined first.  Entries whose lock is held by
        another process are skipped.
        """
        if max_bytes < 0:
            raise ValueError("max_bytes must be non-negative")
        report = GcReport(bytes_before=self.size_bytes())
        report.quarantined = self.validate()
        paths = sorted(self.entries(), key=lambda p: p.stat().st_mtime)
        total = self.size_bytes()
        for path in paths:
            if total <= max_bytes:
                break
            key = path.stem
            try:
                with self._lock(key).acquire(timeout=0):
                    size = path.stat().st_size
                    path.unlink()
            except Timeout:
                report.skipped_locked.append(path.name)
                continue
            total -= size
            report.evicted.append(path.name)
            lock_path = self.root / f"{key}.lock"
            if lock_path.exists():
                try:
                    lock_path.unlink()
                except OSError:
                    pass
        report.bytes_after = self.size_bytes()
        return report
