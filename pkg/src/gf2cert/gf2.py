"""GF(2) linear algebra over finite index sets.

A :class:`FinVec` is a finite set of indices, read both as a vector of the
space of finite subsets (addition is symmetric difference) and as the
support of a Boolean group element.  Vectors are stored as int bitsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DependentFamily, InfeasibleConstraints


def _mask_of(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        i = int(i)
        if i < 0:
            raise ValueError(f"negative index {i}")
        mask ^= 1 << i
    return mask


def _bits(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def parity(x: int) -> int:
    return bin(x).count("1") & 1


class FinVec:
    """Finite subset of the ground index set.

    Duplicated indices cancel (``FinVec([1, 1]) == FinVec()``), which is the
    GF(2) reading of a multiset.
    """

    __slots__ = ("mask",)

    def __init__(self, indices: Iterable[int] = ()):
        object.__setattr__(self, "mask", _mask_of(indices))

    @classmethod
    def from_mask(cls, mask: int) -> "FinVec":
        if mask < 0:
            raise ValueError("mask must be non-negative")
        v = cls.__new__(cls)
        object.__setattr__(v, "mask", mask)
        return v

    @classmethod
    def parse(cls, text: str | Sequence[int]) -> "FinVec":
        """Read ``"{0,2,5}"``, ``"0,2,5"`` or a list of ints."""
        if not isinstance(text, str):
            return cls(text)
        body = text.strip()
        if body.startswith("{") and body.endswith("}"):
            body = body[1:-1]
        body = body.strip()
        if not body:
            return cls()
        parts = [p.strip() for p in body.split(",")]
        values = [int(p) for p in parts]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"indices not strictly increasing: {text!r}")
        return cls(values)

    def __setattr__(self, name, value):
        raise AttributeError("FinVec is immutable")

    @property
    def support(self) -> tuple[int, ...]:
        return _bits(self.mask)

    def __iter__(self):
        return iter(self.support)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, i: int) -> bool:
        return i >= 0 and (self.mask >> i) & 1 == 1

    def __xor__(self, other: "FinVec") -> "FinVec":
        return FinVec.from_mask(self.mask ^ other.mask)

    def __or__(self, other: "FinVec") -> "FinVec":
        return FinVec.from_mask(self.mask | other.mask)

    def __and__(self, other: "FinVec") -> "FinVec":
        return FinVec.from_mask(self.mask & other.mask)

    def __eq__(self, other) -> bool:
        return isinstance(other, FinVec) and other.mask == self.mask

    def __hash__(self) -> int:
        return hash(("FinVec", self.mask))

    def __lt__(self, other: "FinVec") -> bool:
        return self.support < other.support

    def min(self) -> int:
        if not self.mask:
            raise ValueError("empty FinVec has no minimum")
        return (self.mask & -self.mask).bit_length() - 1

    def max(self) -> int:
        if not self.mask:
            raise ValueError("empty FinVec has no maximum")
        return self.mask.bit_length() - 1

    def below(self, bound: int) -> "FinVec":
        return FinVec.from_mask(self.mask & ((1 << bound) - 1))

    def within(self, bound: int) -> bool:
        return self.mask >> bound == 0

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.support)) + "}"

    def __repr__(self) -> str:
        return f"FinVec({str(self)})"


EMPTY = FinVec()


def interval(lo: int, hi: int) -> FinVec:
    if hi <= lo:
        return EMPTY
    return FinVec.from_mask(((1 << hi) - 1) ^ ((1 << lo) - 1))


def sym_diff(a: FinVec, b: FinVec) -> FinVec:
    return a ^ b


def xor_sum(vectors: Iterable[FinVec]) -> FinVec:
    mask = 0
    for v in vectors:
        mask ^= v.mask
    return FinVec.from_mask(mask)


class EchelonState:
    """Fully reduced row echelon form, pivot at each row's minimum element.

    Each row also carries the combination (bitset over insertion positions)
    of input vectors that produced it, so dependencies come with witnesses.
    """

    def __init__(self):
        self.rows: list[int] = []
        self.combos: list[int] = []
        self.pivots: dict[int, int] = {}
        self._count = 0

    def reduce(self, mask: int) -> tuple[int, int]:
        """Return ``(residual, combo)``; residual has no pivot elements."""
        combo = 0
        for p, r in self.pivots.items():
            if (mask >> p) & 1:
                mask ^= self.rows[r]
                combo ^= self.combos[r]
        return mask, combo

    def add(self, mask: int) -> int | None:
        """Insert a vector.

        Returns ``None`` if it was independent of the rows so far, otherwise
        the bitset of insertion positions whose sum is zero.
        """
        pos = self._count
        self._count += 1
        residual, combo = self.reduce(mask)
        combo ^= 1 << pos
        if residual == 0:
            return combo
        p = (residual & -residual).bit_length() - 1
        for q, r in self.pivots.items():
            if (self.rows[r] >> p) & 1:
                self.rows[r] ^= residual
                self.combos[r] ^= combo
        self.pivots[p] = len(self.rows)
        self.rows.append(residual)
        self.combos.append(combo)
        return None

    def contains(self, mask: int) -> bool:
        return self.reduce(mask)[0] == 0

    @property
    def rank(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class Independent:
    independent = True

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Dependent:
    """Positions (into the checked family) whose symmetric difference is empty."""

    witness: tuple[int, ...]
    independent = False

    def __bool__(self) -> bool:
        return False


def is_independent(family: Sequence[FinVec]) -> Independent | Dependent:
    ech = EchelonState()
    for v in family:
        combo = ech.add(v.mask)
        if combo is not None:
            return Dependent(_bits(combo))
    return Independent()


def rank(family: Sequence[FinVec]) -> int:
    ech = EchelonState()
    for v in family:
        ech.add(v.mask)
    return ech.rank


def complete_basis(family: Sequence[FinVec], ground: int) -> list[FinVec]:
    """Singletons at the non-pivot coordinates of ``family``.

    Together with ``family`` they form a basis of the subsets of
    ``[0, ground)``.
    """
    ech = EchelonState()
    for v in family:
        if not v.within(ground):
            raise ValueError(f"{v} not inside [0,{ground})")
        combo = ech.add(v.mask)
        if combo is not None:
            raise DependentFamily(_bits(combo))
    return [FinVec.from_mask(1 << j) for j in range(ground) if j not in ech.pivots]


class Functional:
    """A homomorphism from subsets of ``[0, bound)`` to {0,1}.

    Stored by its values on singletons: bit ``j`` of ``bits`` is the value
    at ``{j}``.
    """

    __slots__ = ("bound", "bits")

    def __init__(self, bound: int, bits: int | Sequence[int] = 0):
        if not isinstance(bits, int):
            seq = list(bits)
            if len(seq) != bound:
                raise ValueError("bit sequence length must equal bound")
            bits = sum((b & 1) << j for j, b in enumerate(seq))
        if bits >> bound:
            raise ValueError("bits set beyond bound")
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "bits", bits)

    def __setattr__(self, name, value):
        raise AttributeError("Functional is immutable")

    def eval(self, F: FinVec) -> int:
        if F.mask >> self.bound:
            raise ValueError(f"{F} outside functional bound {self.bound}")
        return parity(F.mask & self.bits)

    __call__ = eval

    def bit(self, j: int) -> int:
        return (self.bits >> j) & 1

    def as_tuple(self) -> tuple[int, ...]:
        return tuple((self.bits >> j) & 1 for j in range(self.bound))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Functional)
            and other.bound == self.bound
            and other.bits == self.bits
        )

    def __hash__(self) -> int:
        return hash((self.bound, self.bits))

    def to_hex(self) -> str:
        return encode_bits(self.bits, self.bound)

    @classmethod
    def from_hex(cls, text: str, bound: int) -> "Functional":
        return cls(bound, decode_bits(text, bound))

    def __repr__(self) -> str:
        return f"Functional(bound={self.bound}, bits={self.to_hex()})"


def encode_bits(bits: int, length: int) -> str:
    """Hex with least-significant bit = index 0, zero padded to the length."""
    width = max(1, (length + 3) // 4)
    return format(bits, f"0{width}x")


def decode_bits(text: str, length: int) -> int:
    value = int(text, 16) if text else 0
    if value >> length:
        raise ValueError(f"hex value {text!r} exceeds {length} bits")
    return value


def solve_functional(constraints: Sequence[tuple[FinVec, int]], bound: int) -> Functional:
    """Functional with ``eval(F) == b`` for every ``(F, b)``; free bits zero.

    Raises :class:`InfeasibleConstraints` with a set of constraint positions
    whose vectors sum to zero while their bits sum to one.
    """
    rows: dict[int, tuple[int, int, int]] = {}
    for pos, (F, b) in enumerate(constraints):
        if F.mask >> bound:
            raise ValueError(f"constraint {F} outside bound {bound}")
        mask, target, combo = F.mask, b & 1, 1 << pos
        for p, (rm, rt, rc) in rows.items():
            if (mask >> p) & 1:
                mask ^= rm
                target ^= rt
                combo ^= rc
        if mask == 0:
            if target:
                raise InfeasibleConstraints(_bits(combo))
            continue
        p = (mask & -mask).bit_length() - 1
        for q, (rm, rt, rc) in list(rows.items()):
            if (rm >> p) & 1:
                rows[q] = (rm ^ mask, rt ^ target, rc ^ combo)
        rows[p] = (mask, target, combo)
    bits = 0
    for p, (_, t, _) in rows.items():
        if t:
            bits |= 1 << p
    return Functional(bound, bits)


def eval_interval(psis: Sequence[Functional], F: FinVec) -> tuple[int, ...]:
    return tuple(psi.eval(F) for psi in psis)
