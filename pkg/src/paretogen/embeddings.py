"""Numerically grounded initialization for the 3000 added numeric tokens.

Each token's embedding is composed from base-symbol embeddings (digits,
signs, decimal point) with significance-ordered position weights, then
nudged by a small deterministic value-keyed perturbation so that distinct
tokens never coincide while nearby values start nearby.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .codec import Vocabulary

BASE_SYMBOLS = tuple("0123456789") + ("+", "-", ".")

_INT_KIND = 0
_FRAC_KIND = 1


class EmbeddingError(ValueError):
    """Embedding-initialization inputs violate a precondition."""


@dataclass(frozen=True)
class BaseSymbolTable:
    """Pretrained embeddings of the 13 basic numeric symbols.

    ``sigma`` is the standard deviation of the pretrained embedding space,
    used to scale perturbations.
    """

    embedding: Mapping[str, np.ndarray]
    dim: int
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0 or not np.isfinite(self.sigma):
            raise EmbeddingError(f"sigma must be positive, got {self.sigma}")
        if self.dim < 1:
            raise EmbeddingError(f"dim must be at least 1, got {self.dim}")
        clean: dict[str, np.ndarray] = {}
        for symbol in BASE_SYMBOLS:
            if symbol not in self.embedding:
                raise EmbeddingError(f"base table is missing symbol {symbol!r}")
            vec = np.array(self.embedding[symbol], dtype=float)
            if vec.shape != (self.dim,) or not np.isfinite(vec).all():
                raise EmbeddingError(
                    f"embedding for {symbol!r} must be a finite vector of length {self.dim}"
                )
            vec.setflags(write=False)
            clean[symbol] = vec
        object.__setattr__(self, "embedding", clean)

    def matrix(self) -> np.ndarray:
        """Rows in BASE_SYMBOLS order."""
        return np.stack([self.embedding[s] for s in BASE_SYMBOLS])


@dataclass(frozen=True)
class WeightScheme:
    """Position weights, ordered by digit significance.

    ``int_weights`` covers (sign, tens digit, ones digit, point, first
    decimal); ``frac_weights`` covers (point, second, third, fourth
    decimal).
    """

    int_weights: tuple[float, ...] = (0.15, 0.30, 0.25, 0.05, 0.25)
    frac_weights: tuple[float, ...] = (0.10, 0.40, 0.30, 0.20)

    def __post_init__(self):
        for name, weights, size in (
            ("int_weights", self.int_weights, 5),
            ("frac_weights", self.frac_weights, 4),
        ):
            arr = np.asarray(weights, dtype=float)
            if arr.shape != (size,):
                raise EmbeddingError(f"{name} must have exactly {size} entries")
            if not np.isfinite(arr).all() or (arr < 0).any() or arr.sum() == 0:
                raise EmbeddingError(f"{name} must be nonnegative with positive sum")
            object.__setattr__(self, name, tuple(float(w) for w in arr))


@dataclass(frozen=True)
class NumericEmbeddingTable:
    """Initialized embeddings: one row per integer-prefix and fraction token."""

    int_vectors: np.ndarray
    frac_vectors: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("int_vectors", "frac_vectors"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise EmbeddingError(f"{name} must be a 2-D matrix")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.int_vectors.shape[1] != self.frac_vectors.shape[1]:
            raise EmbeddingError("both tables must share the embedding dimension")

    @property
    def dim(self) -> int:
        return self.int_vectors.shape[1]

    @property
    def count(self) -> int:
        return self.int_vectors.shape[0] + self.frac_vectors.shape[0]

    def stacked(self) -> np.ndarray:
        """All rows, integer-prefix block first."""
        return np.vstack([self.int_vectors, self.frac_vectors])


def _int_symbol_indices(count: int) -> np.ndarray:
    """(count, 5) base-symbol indices: sign, tens, ones, point, first dec."""
    j = np.arange(count)
    sign = np.where(j // 1000 == 1, BASE_SYMBOLS.index("-"), BASE_SYMBOLS.index("+"))
    rem = j % 1000
    point = np.full(count, BASE_SYMBOLS.index("."))
    return np.stack([sign, rem // 100, (rem // 10) % 10, point, rem % 10], axis=1)


def _frac_symbol_indices(count: int) -> np.ndarray:
    """(count, 4) base-symbol indices: point, then decimals two to four."""
    k = np.arange(count)
    point = np.full(count, BASE_SYMBOLS.index("."))
    return np.stack([point, k // 100, (k // 10) % 10, k % 10], axis=1)


def _perturbations(seed: int, kind: int, count: int, dim: int) -> np.ndarray:
    """Unit directions, one independent counter-based stream per token."""
    out = np.empty((count, dim))
    for index in range(count):
        rng = np.random.default_rng([seed, kind, index])
        while True:
            g = rng.standard_normal(dim)
            norm = np.linalg.norm(g)
            if norm > 1e-12:
                out[index] = g / norm
                break
    return out


def init_embeddings(
    base: BaseSymbolTable,
    vocab: Vocabulary,
    seed: int = 0,
    weights: WeightScheme = WeightScheme(),
    eps: float = 0.02,
    normalize: bool = True,
) -> NumericEmbeddingTable:
    """Compose, perturb, and optionally rescale embeddings for every token.

    Each row is the position-weighted sum of its constituent symbol
    embeddings plus ``eps * sigma`` times a unit direction keyed by (seed,
    token grid value). With ``normalize`` the rows are rescaled to the mean
    base-symbol norm; a zero-norm base table leaves rows unscaled.
    """
    if eps < 0 or not np.isfinite(eps):
        raise EmbeddingError(f"eps must be a finite nonnegative scalar, got {eps}")
    seed = int(seed)
    if seed < 0:
        raise EmbeddingError(f"seed must be nonnegative, got {seed}")
    symbols = base.matrix()
    blocks = []
    for kind, tokens, idx, pos_weights in (
        (_INT_KIND, vocab.int_tokens, _int_symbol_indices, weights.int_weights),
        (_FRAC_KIND, vocab.frac_tokens, _frac_symbol_indices, weights.frac_weights),
    ):
        count = len(tokens)
        indices = idx(count)
        composed = np.einsum("p,tpd->td", pos_weights, symbols[indices])
        if eps > 0:
            composed = composed + eps * base.sigma * _perturbations(
                seed, kind, count, base.dim
            )
        blocks.append(composed)
    if normalize:
        target = float(np.mean(np.linalg.norm(symbols, axis=1)))
        if target > 0:
            for block in blocks:
                norms = np.linalg.norm(block, axis=1)
                scale = np.where(norms > 0, target / np.where(norms > 0, norms, 1.0), 1.0)
                block *= scale[:, None]
    return NumericEmbeddingTable(int_vectors=blocks[0], frac_vectors=blocks[1], seed=seed)


def output_head_init(table: NumericEmbeddingTable) -> np.ndarray:
    """Rows for an untied output head: identical to the input table."""
    return table.stacked()


def save_table(table: NumericEmbeddingTable, path, fmt: str = "binary") -> None:
    """Write the table with a one-line ``dim count seed`` header.

    Binary form appends little-endian float64 rows; text form appends one
    whitespace-separated row per line with full-precision reprs.
    """
    path = Path(path)
    header = f"dim={table.dim} count={table.count} seed={table.seed}\n"
    data = table.stacked()
    if fmt == "binary":
        path.write_bytes(header.encode("ascii") + data.astype("<f8").tobytes())
    elif fmt == "text":
        lines = [" ".join(repr(float(v)) for v in row) for row in data]
        path.write_text(header + "\n".join(lines) + "\n")
    else:
        raise EmbeddingError(f"unknown format {fmt!r}, expected 'binary' or 'text'")


def load_table(path) -> NumericEmbeddingTable:
    """Read a table written by ``save_table``; format is sniffed from size.

    The integer-prefix block is recovered as the first two thirds of the
    rows, matching the 2000/1000 split of the shipped vocabulary.
    """
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise EmbeddingError("missing header line")
    try:
        fields = dict(
            part.split("=", 1) for part in raw[:newline].decode("ascii").split()
        )
        dim = int(fields["dim"])
        count = int(fields["count"])
        seed = int(fields["seed"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise EmbeddingError(f"malformed header: {exc}") from exc
    if dim < 1 or count < 3 or count % 3 != 0:
        raise EmbeddingError(f"header dim={dim} count={count} is not a valid table shape")
    body = raw[newline + 1 :]
    if len(body) == dim * count * 8:
        data = np.frombuffer(body, dtype="<f8").reshape(count, dim).astype(float)
    else:
        try:
            rows = [
                [float(v) for v in line.split()]
                for line in body.decode("ascii").splitlines()
                if line.strip()
            ]
            data = np.array(rows, dtype=float)
        except (UnicodeDecodeError, ValueError) as exc:
            raise EmbeddingError(f"malformed table body: {exc}") from exc
        if data.shape != (count, dim):
            raise EmbeddingError(
                f"body shape {data.shape} does not match header ({count}, {dim})"
            )
    split = 2 * count // 3
    return NumericEmbeddingTable(
        int_vectors=data[:split], frac_vectors=data[split:], seed=seed
    )
