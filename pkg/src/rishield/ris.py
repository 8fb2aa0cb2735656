"""RIS configurations: the reflection vector v, its diagonal form and 1-bit masks.

Element indexing is row-major with row 0 at the top of the panel; every module
relies on this mapping.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AMP_SLACK = 1e-9


class PatternKind(str, enum.Enum):
    FULL_REFLECT = "full-reflect"
    HALF_ALTERNATING = "half-alternating"
    CENTER_SQUARE_ABSORB = "center-square-absorb"


@dataclass(frozen=True, eq=False)
class RisConfig:
    """Reflection vector ``v = [conj(a_1 e^{j phi_1}), ..., 1]``.

    The trailing 1 selects the direct path in ``v^H H_bar``; the first N entries
    must satisfy |v_i| <= 1 (passive surface).
    """

    v: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        v = np.array(self.v, dtype=complex).ravel()
        if v.size != self.rows * self.cols + 1:
            raise ValueError(f"v has length {v.size}, expected rows*cols + 1 = {self.rows * self.cols + 1}")
        if v[-1] != 1:
            raise ValueError("last entry of v must be exactly 1")
        if np.any(np.abs(v[:-1]) > 1 + AMP_SLACK):
            raise ValueError("RIS elements cannot amplify: |v_i| <= 1 required")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n(self):
        return self.rows * self.cols

    @property
    def elements(self):
        return self.v[:-1]

    @classmethod
    def from_elements(cls, elems, rows, cols):
        return cls(np.append(np.asarray(elems, dtype=complex).ravel(), 1.0), rows, cols)


@dataclass(frozen=True, eq=False)
class BitMask:
    """rows x cols grid, True = reflect, False = absorb."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool)
        if b.ndim != 2 or 0 in b.shape:
            raise ValueError("mask must be a non-empty 2D grid")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __eq__(self, other):
        return isinstance(other, BitMask) and np.array_equal(self.bits, other.bits)

    @property
    def shape(self):
        return self.bits.shape

    @property
    def n_reflect(self):
        return int(self.bits.sum())

    @property
    def reflect_fraction(self):
        return self.n_reflect / self.bits.size

    def to_text(self):
        return "\n".join("".join("1" if b else "0" for b in row) for row in self.bits) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ValueError("empty mask")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("mask rows have different lengths")
        if any(set(r) - {"0", "1"} for r in rows):
            raise ValueError("mask may only contain '0' and '1'")
        return cls(np.array([[c == "1" for c in r] for r in rows]))

    def to_int(self):
        """Integer code with element 1 (row-major first) as the MSB."""
        out = 0
        for b in self.bits.ravel():
            out = (out << 1) | int(b)
        return out

    @classmethod
    def from_int(cls, code, rows, cols):
        n = rows * cols
        bits = [(code >> (n - 1 - i)) & 1 for i in range(n)]
        return cls(np.array(bits, dtype=bool).reshape(rows, cols))


def read_mask(path):
    return BitMask.from_text(Path(path).read_text())


def write_mask(path, mask):
    Path(path).write_text(mask.to_text())


def phi_from_v(cfg: RisConfig):
    """Diagonal N x N matrix with entries conj(v_i) = a_i e^{j phi_i}."""
    return np.diag(cfg.elements.conj())


def make_pattern(kind, rows, cols) -> BitMask:
    kind = PatternKind(kind)
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    bits = np.ones((rows, cols), dtype=bool)
    if kind is PatternKind.HALF_ALTERNATING:
        bits[:, 1::2] = False
    elif kind is PatternKind.CENTER_SQUARE_ABSORB:
        if rows < 4 or cols < 4:
            raise ValueError("center-square-absorb needs at least a 4 x 4 grid")
        r0, c0 = (rows - 4) // 2, (cols - 4) // 2
        bits[r0:r0 + 4, c0:c0 + 4] = False
    return BitMask(bits)


def v_from_bits(mask: BitMask, reflect_phase=0.0) -> RisConfig:
    rows, cols = mask.shape
    elems = np.where(mask.bits.ravel(), np.exp(-1j * reflect_phase), 0.0)
    return RisConfig.from_elements(elems, rows, cols)


def quantize_1bit(cfg: RisConfig, amp_threshold=0.5) -> BitMask:
    """Reflect where |v_i| >= amp_threshold (ties reflect)."""
    if not 0 < amp_threshold < 1:
        raise ValueError("amp_threshold must lie in (0, 1)")
    bits = np.abs(cfg.elements) >= amp_threshold
    return BitMask(bits.reshape(cfg.rows, cfg.cols))
