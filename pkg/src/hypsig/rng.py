"""Counter-based random numbers (Philox4x64-10).

Every draw is a pure function of (seed, site, sweep, tag, block): no state
is shared between lattice sites, so a checkerboard half-sweep produces the
same numbers whether sites are visited serially or in parallel.

The bijection matches numpy's ``Philox`` bit generator, which is the
reference used in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

# stream tags
TAG_RADIAL = 0
TAG_DIRECTION = 1
TAG_METRO = 2
TAG_METRO_DIR = 3
TAG_INIT = 4
TAG_KROT = 5


@numba.njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _MASK32) + (hl & _MASK32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    lo = a * b
    return hi, lo


@numba.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x64 block: 4 counter words, 2 key words -> 4 words."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@numba.njit(cache=True, inline="always")
def to_unit(x):
    """Map a 64-bit word to a double in (0, 1]."""
    return ((x >> _S11) + np.uint64(1)) * _TWO_M53


@numba.njit(cache=True)
def uniforms4(seed, site, sweep, tag, block):
    """Four uniforms on (0, 1] for the given stream coordinates."""
    r0, r1, r2, r3 = philox4x64(
        np.uint64(block), np.uint64(site), np.uint64(sweep), np.uint64(tag),
        np.uint64(seed), np.uint64(0),
    )
    return to_unit(r0), to_unit(r1), to_unit(r2), to_unit(r3)


@numba.njit(cache=True)
def normals_into(out, seed, site, sweep, tag):
    """Fill ``out`` with standard normals (Box-Muller) from one stream."""
    n = out.shape[0]
    i = 0
    block = 0
    while i < n:
        u0, u1, u2, u3 = uniforms4(seed, site, sweep, tag, block)
        block += 1
        r = np.sqrt(-2.0 * np.log(u0))
        out[i] = r * np.cos(2.0 * np.pi * u1)
        i += 1
        if i < n:
            out[i] = r * np.sin(2.0 * np.pi * u1)
            i += 1
        if i < n:
            r = np.sqrt(-2.0 * np.log(u2))
            out[i] = r * np.cos(2.0 * np.pi * u3)
            i += 1
        if i < n:
            out[i] = r * np.sin(2.0 * np.pi * u3)
            i += 1


def _seed_word(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


@dataclass(frozen=True)
class RngState:
    """Stream coordinates (seed, site, sweep); draws are reproducible anywhere."""

    seed: int
    site: int = 0
    sweep: int = 0

    def __post_init__(self):
        _seed_word(self.seed)

    def uniforms(self, n, tag=TAG_RADIAL):
        """First ``n`` uniforms of the stream under ``tag``."""
        out = np.empty(n)
        for b in range((n + 3) // 4):
            vals = uniforms4(np.uint64(self.seed), self.site, self.sweep, tag, b)
            for j in range(4):
                if 4 * b + j < n:
                    out[4 * b + j] = vals[j]
        return out

    def normals(self, n, tag=TAG_DIRECTION):
        out = np.empty(n)
        normals_into(out, np.uint64(self.seed), self.site, self.sweep, tag)
        return out

    def at(self, site, sweep):
        return RngState(self.seed, site, sweep)


def raw_block(seed, counter):
    """Raw Philox output words for an explicit 4-word counter (key = (seed, 0))."""
    c = [np.uint64(x) for x in counter]
    return tuple(int(x) for x in philox4x64(c[0], c[1], c[2], c[3], np.uint64(seed), np.uint64(0)))
