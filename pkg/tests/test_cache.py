import os
import struct
import time

import numpy as np
import pytest

from semiquant.cache import (MAGIC, VERSION, CacheCorruptError, SpectralCache, decode, encode,
                             spectral_key)
from semiquant.operators import SpectralData, quantize
from semiquant.phase_space import ModelGeometry, rotation


def spec(n, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    lam, V = np.linalg.eigh(A + A.conj().T)
    return SpectralData(lam, V)


def test_encode_decode_round_trip():
    s = spec(7)
    blob = encode("key text", s)
    magic, version, rows, cols, _ = struct.unpack_from("<8sIIII", blob)
    assert (magic, version, rows, cols) == (MAGIC, VERSION, 7, 7)
    back = decode(blob, "key text")
    assert np.array_equal(back.eigenvalues, s.eigenvalues)
    assert np.array_equal(back.vectors, s.vectors)


@pytest.mark.parametrize("mutate", [lambda b: b[:20], lambda b: b"XXXXXXXX" + b[8:],
                                    lambda b: b[:-1] + bytes([b[-1] ^ 1]), lambda b: b[:-16]])
def test_decode_rejects_damage(mutate):
    with pytest.raises(CacheCorruptError):
        decode(mutate(encode("k", spec(4))))


def test_decode_rejects_wrong_key():
    with pytest.raises(CacheCorruptError):
        decode(encode("k1", spec(3)), "k2")


def test_key_depends_on_inputs():
    g = ModelGeometry(1)
    keys = {spectral_key(g, rotation(), p)[0] for p in (3, 4)}
    keys.add(spectral_key(ModelGeometry(1, (-1,)), rotation(), 3)[0])
    keys.add(spectral_key(g, rotation(), 3, "metaplectic")[0])
    assert len(keys) == 4
    assert spectral_key(g, rotation(), 3) == spectral_key(g, rotation(), 3)


def test_provider_hits_and_matches(tmp_path):
    c = SpectralCache(tmp_path)
    geom, f = ModelGeometry(1), rotation()
    prov = c.spectra_provider(geom, f)
    a = prov(6)
    b = prov(6)
    assert (c.misses, c.hits) == (1, 1)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.allclose(a.eigenvalues, quantize(geom, f, 6).spectral().eigenvalues)


def test_corrupt_entry_quarantined(tmp_path):
    c = SpectralCache(tmp_path)
    c.put("abc", spec(3), "t")
    path = tmp_path / "abc.sqc"
    path.write_bytes(path.read_bytes()[:-3])
    assert c.get("abc", "t") is None
    assert not path.exists()
    assert (tmp_path / "quarantine" / "abc.sqc").exists()


def _fill(c, n):
    for i in range(n):
        c.put(f"e{i}", spec(5, i), str(i))
        t = time.time() - 100 + i
        os.utime(c._path(f"e{i}"), (t, t))


def test_gc_evicts_least_recently_used(tmp_path):
    c = SpectralCache(tmp_path)
    _fill(c, 5)
    size = c._path("e0").stat().st_size
    c.get("e0", "0")                           # touch: now the most recent
    rep = c.gc(2 * size)
    assert rep.bytes_after <= 2 * size
    assert rep.evicted == ["e1.sqc", "e2.sqc", "e3.sqc"]
    assert {p.name for p in c.entries()} == {"e0.sqc", "e4.sqc"}


def test_gc_skips_pinned_entries(tmp_path):
    c = SpectralCache(tmp_path, lock_timeout=1)
    _fill(c, 3)
    with c.pinned("e0"):
        rep = c.gc(0)
    assert rep.skipped_locked == ["e0.sqc"]
    assert [p.name for p in c.entries()] == ["e0.sqc"]


def test_gc_quarantines_and_handles_empty(tmp_path):
    c = SpectralCache(tmp_path)
    rep = c.gc(0)
    assert rep.bytes_before == rep.bytes_after == 0 and not rep.evicted
    (tmp_path / "bad.sqc").write_bytes(b"junk")
    rep = c.gc(10 ** 9)
    assert rep.quarantined == ["bad.sqc"]
    with pytest.raises(ValueError):
        c.gc(-1)
