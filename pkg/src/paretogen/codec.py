"""Fixed-point token codec for 4-decimal scalars.

Every scalar on the wire is rendered as exactly two tokens: an
integer-prefix token carrying sign, integer part, and first decimal,
followed by a fraction token carrying the remaining three decimals:

    -1.2345  ->  <s1i012><d345>
    99.9999  ->  <s0i999><d999>

The decoded value is ``(-1)**sign * (int_part + first_dec/10 + tail/10000)``.
Representable magnitudes span [0, 99.9999]; zero is always written with
sign 0, and the negative-zero pair ``<s1i000><d000>`` is rejected on read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from math import isfinite

import numpy as np

DECIMALS = 4
MAX_ABS = 99.9999
INT_VOCAB_SIZE = 2000
FRAC_VOCAB_SIZE = 1000

_SCALE = 10**DECIMALS
_MAX_UNITS = 999999
_QUANTUM = Decimal(1).scaleb(-DECIMALS)

_TOKEN = re.compile(r"<(s([01])i(\d{3})|d(\d{3}))>")
_WS = re.compile(r"\s*")


class CodecRangeError(ValueError):
    """Value is non-finite or exceeds the representable magnitude."""


class TokenParseError(ValueError):
    """Token text does not conform to the two-token scalar grammar."""


def round4(v: float) -> float:
    """Round to 4 decimals, ties away from zero (1.23455 -> 1.2346)."""
    return _units_to_float(_to_units(v))


def round4_array(values) -> np.ndarray:
    """Elementwise round4 preserving shape."""
    arr = np.asarray(values, dtype=float)
    flat = np.fromiter((round4(v) for v in arr.ravel()), dtype=float, count=arr.size)
    return flat.reshape(arr.shape)


def round_to(values, decimals: int) -> np.ndarray:
    """Elementwise half-away-from-zero rounding at ``decimals`` places.

    Same semantics as round4 but with a configurable grid; agrees with
    round4_array exactly at decimals=4.
    """
    if decimals < 0:
        raise ValueError("decimals must be non-negative")
    quantum = Decimal(1).scaleb(-decimals)
    arr = np.asarray(values, dtype=float)
    if arr.size and not np.isfinite(arr).all():
        raise CodecRangeError("cannot round non-finite values")
    flat = np.fromiter(
        (
            float(Decimal(repr(float(v))).quantize(quantum, rounding=ROUND_HALF_UP))
            for v in arr.ravel()
        ),
        dtype=float,
        count=arr.size,
    )
    return flat.reshape(arr.shape)


def _to_units(v: float) -> int:
    # Rounding works on the shortest decimal form, not the binary expansion:
    # repr(1.23455) == "1.23455" even though the double sits just below it.
    v = float(v)
    if not isfinite(v):
        raise CodecRangeError(f"cannot encode non-finite value {v!r}")
    if abs(v) <= MAX_ABS:
        # values already on the grid skip the exact-decimal machinery
        units = round(v * _SCALE)
        if units / _SCALE == v:
            return units
    quantized = Decimal(repr(v)).quantize(_QUANTUM, rounding=ROUND_HALF_UP)
    return int(quantized.scaleb(DECIMALS))


def _units_to_float(units: int) -> float:
    return units / _SCALE


def _check_units(units: int, v: float) -> int:
    if abs(units) > _MAX_UNITS:
        raise CodecRangeError(
            f"value {v!r} rounds to {units / _SCALE:+.4f}, outside |v| <= {MAX_ABS}"
        )
    return units


@dataclass(frozen=True)
class TokenizedScalar:
    """One scalar split into its two vocabulary indices."""

    sign: int
    int_index: int
    frac_index: int
    value: float

    @property
    def tokens(self) -> str:
        return f"<s{self.sign}i{self.int_index % 1000:03d}><d{self.frac_index:03d}>"


def tokenize(v: float) -> TokenizedScalar:
    """Round ``v`` to the 4-decimal grid and split it into token indices."""
    units = _check_units(_to_units(v), v)
    sign = 1 if units < 0 else 0
    head, tail = divmod(abs(units), 1000)
    return TokenizedScalar(
        sign=sign,
        int_index=sign * 1000 + head,
        frac_index=tail,
        value=_units_to_float(units),
    )


def encode(v: float) -> str:
    """Render one scalar as its two-token text form."""
    return tokenize(v).tokens


def encode_sequence(values) -> str:
    """Concatenate the token pairs of ``values`` in order, no separators."""
    return "".join(encode(v) for v in values)


def _scan(text: str):
    """Yield (kind, payload, position) for each token; reject stray text."""
    pos = 0
    end = len(text)
    while pos < end:
        pos = _WS.match(text, pos).end()
        if pos >= end:
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            snippet = text[pos : pos + 12]
            raise TokenParseError(f"malformed token at position {pos}: {snippet!r}")
        if m.group(2) is not None:
            yield "s", (int(m.group(2)), int(m.group(3))), pos
        else:
            yield "d", int(m.group(4)), pos
        pos = m.end()


def _pair_value(sign: int, head: int, tail: int, pos: int) -> float:
    if sign == 1 and head == 0 and tail == 0:
        raise TokenParseError(f"negative zero pair at position {pos} is forbidden")
    magnitude = head * 1000 + tail
    return -magnitude / _SCALE if sign else magnitude / _SCALE


def decode_sequence(text: str, count: int | None = None) -> list[float]:
    """Decode a run of token pairs; enforce ``count`` scalars when given."""
    values: list[float] = []
    pending: tuple[int, int, int] | None = None
    for kind, payload, pos in _scan(text):
        if kind == "s":
            if pending is not None:
                raise TokenParseError(
                    f"integer token at position {pos} follows an unpaired integer token"
                )
            sign, head = payload
            pending = (sign, head, pos)
        else:
            if pending is None:
                raise TokenParseError(
                    f"fraction token at position {pos} has no integer token before it"
                )
            sign, head, start = pending
            values.append(_pair_value(sign, head, payload, start))
            pending = None
    if pending is not None:
        raise TokenParseError(
            f"dangling integer token at position {pending[2]} has no fraction token"
        )
    if count is not None and len(values) != count:
        raise TokenParseError(f"expected {count} scalars, found {len(values)}")
    return values


_PAIR = re.compile(r"<s([01])i(\d{3})><d(\d{3})>")


def decode(text: str) -> float:
    """Decode exactly one two-token scalar."""
    m = _PAIR.fullmatch(text)
    if m:    # whitespace or anything unusual falls through to the scanner
        return _pair_value(int(m.group(1)), int(m.group(2)), int(m.group(3)), 0)
    return decode_sequence(text, count=1)[0]


@dataclass(frozen=True)
class Vocabulary:
    """Full token tables plus the value each token denotes.

    ``coarse_values[j]`` is the signed value of integer-prefix token ``j``
    truncated after the first decimal; ``fine_values[k]`` is the value of
    fraction token ``k``. Indices follow token order: ``j = sign*1000 +
    int_part*10 + first_dec`` and ``k = tail``.
    """

    int_tokens: tuple[str, ...]
    frac_tokens: tuple[str, ...]
    coarse_values: np.ndarray
    fine_values: np.ndarray

    def int_index(self, token: str) -> int:
        return self._int_lookup[token]

    def frac_index(self, token: str) -> int:
        return self._frac_lookup[token]

    def __post_init__(self):
        object.__setattr__(
            self, "_int_lookup", {t: j for j, t in enumerate(self.int_tokens)}
        )
        object.__setattr__(
            self, "_frac_lookup", {t: k for k, t in enumerate(self.frac_tokens)}
        )
        self.coarse_values.setflags(write=False)
        self.fine_values.setflags(write=False)


def build_vocabulary() -> Vocabulary:
    """Construct the 2000-token integer table and 1000-token fraction table."""
    int_tokens = []
    coarse = np.empty(INT_VOCAB_SIZE)
    for j in range(INT_VOCAB_SIZE):
        sign, rem = divmod(j, 1000)
        int_tokens.append(f"<s{sign}i{rem:03d}>")
        coarse[j] = -(rem / 10.0) if sign else rem / 10.0
    frac_tokens = [f"<d{k:03d}>" for k in range(FRAC_VOCAB_SIZE)]
    fine = np.arange(FRAC_VOCAB_SIZE) / _SCALE
    return Vocabulary(
        int_tokens=tuple(int_tokens),
        frac_tokens=tuple(frac_tokens),
        coarse_values=coarse,
        fine_values=fine,
    )
