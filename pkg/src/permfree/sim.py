"""Monte Carlo sampling of the permuted ensembles and trace evaluation.

Each sample index draws from its own stream keyed by (seed, "ensemble",
index), so a run is reproducible and independent of the worker count.
Permutations are kept as 0-based image arrays and applied as column
gathers; only Gaussian-type factors are multiplied densely.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .monomial import (
    AlternatingForm,
    Gauss,
    HGauss,
    Monomial,
    PureUWord,
    TWord,
    UWord,
    Wishart,
    Zero,
    as_canonical,
    parse_factors,
)
from .perms import Perm
from .rng import parallel_map, stream
from .words import FreeWord

TAGS = ("U", "G", "W", "GUE", "T", "H")
_TAG_BITS = {tag: 1 << i for i, tag in enumerate(TAGS)}


def sample_uniform_permutation(n: int, rng: np.random.Generator) -> Perm:
    if n < 1:
        raise ValidationError("permutation size must be positive")
    return Perm(tuple(int(x) + 1 for x in rng.permutation(n)))


def _gaussian_entries(rng: np.random.Generator, shape) -> np.ndarray:
    # Box-Muller: |f|^2 is Exp(1), phase uniform, so Re/Im are independent N(0, 1/2)
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    return np.sqrt(-np.log1p(-u1)) * np.exp(2j * np.pi * u2)


def sample_gaussian_matrix(M: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """M x N matrix of i.i.d. complex standard Gaussians (E f = 0, E|f|^2 = 1)."""
    if M < 1 or N < 1:
        raise ValidationError("matrix dimensions must be positive")
    return _gaussian_entries(rng, (M, N))


@dataclass
class EnsembleSample:
    """One joint draw of the requested matrix families, for r = 1..s.

    ``perms`` holds 0-based image arrays of sigma_r on [N]; ``top_perms`` the
    M-block permutations of the rectangular model. ``G`` is (1/sqrt N) times a
    square Ginibre draw, ``GUE`` is (G + G*)/sqrt 2 from that same draw, ``W``
    is (1/N) X*X for an independent M x N draw X, and ``H`` is the M x N
    top-right block of the rectangular model, scaled by 1/sqrt(M+N).
    """

    N: int
    M: int
    s: int
    tags: frozenset
    perms: dict[int, np.ndarray] = field(default_factory=dict)
    top_perms: dict[int, np.ndarray] = field(default_factory=dict)
    G: dict[int, np.ndarray] = field(default_factory=dict)
    W: dict[int, np.ndarray] = field(default_factory=dict)
    GUE: dict[int, np.ndarray] = field(default_factory=dict)
    H: dict[int, np.ndarray] = field(default_factory=dict)

    def permutation_matrix(self, r: int, block: str = "square") -> np.ndarray:
        images = self.top_perms[r] if block == "top" else self.perms[r]
        n = images.size
        mat = np.zeros((n, n))
        mat[images, np.arange(n)] = 1.0
        return mat

    def embedded(self, tag: str, r: int) -> np.ndarray:
        """Full (M+N)-square block embedding of a rectangular-model factor."""
        M, N = self.M, self.N
        out = np.zeros((M + N, M + N), dtype=complex)
        if tag == "H":
            out[:M, M:] = self.H[r]
        elif tag == "T":
            out[:M, :M] = self.permutation_matrix(r, "top")
        elif tag == "U":
            out[M:, M:] = self.permutation_matrix(r)
        else:
            raise ValidationError(f"tag {tag!r} has no block embedding")
        return out


def build_ensemble(N: int, M: int | None, tags, s: int, rng: np.random.Generator) -> EnsembleSample:
    """Draw every requested family from ``rng`` in a fixed order (r outer, tag inner)."""
    tags = frozenset(tags)
    unknown = tags - set(TAGS)
    if unknown:
        raise ValidationError(f"unknown ensemble tags {sorted(unknown)}")
    if N < 1 or s < 1:
        raise ValidationError("N and s must be positive")
    M = N if M is None else M
    if M < 1:
        raise ValidationError("M must be positive")
    sample = EnsembleSample(N, M, s, tags)
    for r in range(1, s + 1):
        if "U" in tags:
            sample.perms[r] = rng.permutation(N)
        if "G" in tags or "GUE" in tags:
            g = sample_gaussian_matrix(N, N, rng) / math.sqrt(N)
            if "G" in tags:
                sample.G[r] = g
            if "GUE" in tags:
                sample.GUE[r] = (g + g.conj().T) / math.sqrt(2)
        if "W" in tags:
            x = sample_gaussian_matrix(M, N, rng)
            w = x.conj().T @ x / N
            sample.W[r] = (w + w.conj().T) / 2  # exact Hermitian symmetry, removes rounding skew
        if "T" in tags:
            sample.top_perms[r] = rng.permutation(M)
        if "H" in tags:
            sample.H[r] = sample_gaussian_matrix(M, N, rng) / math.sqrt(M + N)
    return sample


# --- trace evaluation ----------------------------------------------------------


def word_images(w: FreeWord, perms: dict[int, np.ndarray], n: int) -> np.ndarray:
    """0-based images of w(sigma_1..sigma_s); the rightmost letter acts first."""
    x = np.arange(n)
    for gen, sign in reversed(w.letters):
        images = perms[gen]
        if sign > 0:
            x = images[x]
        else:
            inv = np.empty_like(images)
            inv[images] = np.arange(n)
            x = inv[x]
    return x


def _to_monomial(m) -> Monomial | PureUWord | Zero:
    if isinstance(m, str):
        m = parse_factors(m, s=None)
    if isinstance(m, AlternatingForm):
        return m.to_monomial()
    if isinstance(m, (PureUWord, Zero)):
        return m
    if not isinstance(m, Monomial):
        raise ValidationError(f"cannot evaluate {m!r}")
    form = as_canonical(m)
    return form if isinstance(form, (PureUWord, Zero)) else m


def required_tags(m) -> frozenset:
    m = _to_monomial(m)
    if isinstance(m, Zero):
        return frozenset()
    if isinstance(m, PureUWord):
        return frozenset({"T"} if m.block == "top" else {"U"})
    tags = set()
    for f in m.factors:
        if isinstance(f, UWord):
            tags.add("U")
        elif isinstance(f, TWord):
            tags.add("T")
        elif isinstance(f, Gauss):
            tags.add("G")
        elif isinstance(f, Wishart):
            tags.add("W")
        else:
            tags.add("H")
    return frozenset(tags)


def _max_index(m) -> int:
    if isinstance(m, PureUWord):
        return max(m.word.generators, default=1)
    out = 1
    for f in m.factors:
        if isinstance(f, (UWord, TWord)):
            out = max(out, max(f.word.generators, default=1))
        else:
            out = max(out, f.r)
    return out


def evaluate_monomial_trace(m, sample: EnsembleSample) -> complex:
    """Normalized trace of the monomial evaluated on one ensemble draw."""
    m = _to_monomial(m)
    if isinstance(m, Zero):
        return 0j
    missing = required_tags(m) - sample.tags
    if missing:
        raise ValidationError(f"sample lacks {sorted(missing)} matrices")
    if _max_index(m) > sample.s:
        raise ValidationError("monomial uses an index larger than the sample's s")
    N, M = sample.N, sample.M
    if isinstance(m, PureUWord):
        perms, n = (sample.top_perms, M) if m.block == "top" else (sample.perms, N)
        fix = int(np.count_nonzero(word_images(m.word, perms, n) == np.arange(n)))
        return complex(fix / (N if m.block == "square" else M + N))
    if m.family == "square":
        return _square_trace(m.factors, sample)
    return _rect_trace(m.factors, sample)


def _rotate_to_dense(factors):
    k = next(i for i, f in enumerate(factors) if not isinstance(f, (UWord, TWord)))
    return factors[k:] + factors[:k]


def _square_trace(factors, sample: EnsembleSample) -> complex:
    N = sample.N
    x = None
    for f in _rotate_to_dense(tuple(factors)):
        if isinstance(f, UWord):
            # X Mat(pi) has column j equal to column pi(j) of X
            x = x[:, word_images(f.word, sample.perms, N)]
            continue
        if isinstance(f, Gauss):
            dense = sample.G[f.r].conj().T if f.star else sample.G[f.r]
        else:
            dense = sample.W[f.r]
        x = dense.copy() if x is None else x @ dense
    return complex(np.trace(x) / N)


def _rect_trace(factors, sample: EnsembleSample) -> complex:
    """Work with the compact blocks: H maps the bottom block into the top one."""
    M, N = sample.M, sample.N
    rotated = _rotate_to_dense(tuple(factors))
    x = None
    row_block = None
    col_block = None
    for f in rotated:
        if isinstance(f, HGauss):
            dense = sample.H[f.r].conj().T if f.star else sample.H[f.r]
            rows, cols = ("bottom", "top") if f.star else ("top", "bottom")
        else:
            block = "top" if isinstance(f, TWord) else "bottom"
            if col_block != block:
                return 0j
            perms, n = (sample.top_perms, M) if block == "top" else (sample.perms, N)
            x = x[:, word_images(f.word, perms, n)]
            continue
        if x is None:
            x, row_block = dense.copy(), rows
        else:
            if col_block != rows:
                return 0j
            x = x @ dense
        col_block = cols
    if row_block != col_block:
        return 0j
    return complex(np.trace(x) / (M + N))


# --- Monte Carlo estimation ----------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    mean: complex
    variance: float
    stderr: float
    samples: int
    seed: int


def summarize(values: np.ndarray, seed: int) -> EstimateResult:
    n = values.size
    mean = complex(np.sum(values) / n)
    if n < 2:
        return EstimateResult(mean, math.nan, math.nan, n, seed)
    variance = float(np.sum(np.abs(values - mean) ** 2) / (n - 1))
    return EstimateResult(mean, variance, math.sqrt(variance / n), n, seed)


def mc_traces(m, N: int, M: int | None, samples: int, seed: int, s: int | None = None) -> np.ndarray:
    """Per-sample normalized traces, in sample-index order."""
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    m = _to_monomial(m)
    if isinstance(m, Zero):
        return np.zeros(samples, dtype=complex)
    tags = required_tags(m)
    s = s if s is not None else _max_index(m)

    def one(i: int) -> complex:
        sample = build_ensemble(N, M, tags, s, stream(seed, "ensemble", i))
        return evaluate_monomial_trace(m, sample)

    return np.array(parallel_map(one, range(samples)), dtype=complex)


def mc_estimate(m, N: int, M: int | None, samples: int, seed: int, s: int | None = None) -> EstimateResult:
    """Sample mean, variance and standard error of the normalized trace."""
    return summarize(mc_traces(m, N, M, samples, seed, s), seed)


# --- debugging dump ------------------------------------------------------------------

_MAGIC = b"PERMFREE"
_HEADER = struct.Struct("<8sIIII8x")


def dump_ensemble(sample: EnsembleSample, path) -> None:
    """Header (magic, N, M, s, tag bits; 32 bytes) then little-endian complex64 matrices.

    Per r, each present tag in TAGS order contributes one dense matrix:
    U (N x N), G, W, GUE (N x N), T (M x M), H (M x N).
    """
    bits = sum(_TAG_BITS[t] for t in sample.tags)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, sample.N, sample.M, sample.s, bits))
        for r in range(1, sample.s + 1):
            for tag in TAGS:
                if tag in sample.tags:
                    fh.write(_dense(sample, tag, r).astype("<c8").tobytes())


def _dense(sample: EnsembleSample, tag: str, r: int) -> np.ndarray:
    if tag == "U":
        return sample.permutation_matrix(r)
    if tag == "T":
        return sample.permutation_matrix(r, "top")
    return {"G": sample.G, "W": sample.W, "GUE": sample.GUE, "H": sample.H}[tag][r]


def load_ensemble(path) -> EnsembleSample:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValidationError("file too short for an ensemble header")
    magic, N, M, s, bits = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValidationError("not an ensemble dump")
    tags = frozenset(t for t in TAGS if bits & _TAG_BITS[t])
    sample = EnsembleSample(N, M, s, tags)
    shapes = {"U": (N, N), "G": (N, N), "W": (N, N), "GUE": (N, N), "T": (M, M), "H": (M, N)}
    offset = _HEADER.size
    for r in range(1, s + 1):
        for tag in TAGS:
            if tag not in tags:
                continue
            rows, cols = shapes[tag]
            count = rows * cols
            mat = np.frombuffer(raw, dtype="<c8", count=count, offset=offset).reshape(rows, cols)
            offset += 8 * count
            if tag in ("U", "T"):
                target = sample.perms if tag == "U" else sample.top_perms
                target[r] = np.argmax(mat.real, axis=0)
            else:
                getattr(sample, tag)[r] = mat.astype(complex)
    if offset != len(raw):
        raise ValidationError("trailing bytes after ensemble payload")
    return sample
