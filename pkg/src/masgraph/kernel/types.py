"""Core type system of the kernel.

Surface-language typedefs are resolved by the elaborator into the closed set
of types below.  All scalar values are carried as Python ints at runtime:
booleans as 0/1, enumeration values as their declarator ordinal, bounded ints
as themselves.  Records and arrays exist only structurally — the elaborator
flattens every declared variable into scalar *slots* before the kernel ever
sees a state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union


@dataclass(frozen=True)
class BoolType:
    def default(self) -> int:
        return 0

    def bounds(self) -> Tuple[int, int]:
        return (0, 1)

    def values(self):
        return (0, 1)

    def __str__(self):
        return "bool"


@dataclass(frozen=True)
class IntType:
    """Bounded integer ``int[lo,hi]`` (inclusive on both ends)."""

    lo: int
    hi: int

    def default(self) -> int:
        # 0 when the range admits it, else the lower bound.
        return 0 if self.lo <= 0 <= self.hi else self.lo

    def bounds(self) -> Tuple[int, int]:
        return (self.lo, self.hi)

    def values(self):
        return range(self.lo, self.hi + 1)

    def __str__(self):
        return f"int[{self.lo},{self.hi}]"


@dataclass(frozen=True)
class EnumType:
    """Enumeration; values are declarator ordinals 0..n-1."""

    name: str
    labels: Tuple[str, ...]

    def default(self) -> int:
        return 0

    def bounds(self) -> Tuple[int, int]:
        return (0, len(self.labels) - 1)

    def values(self):
        return range(len(self.labels))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class RecordType:
    name: str
    fields: Tuple[Tuple[str, "Type"], ...]

    def field(self, fname: str) -> "Type":
        for n, t in self.fields:
            if n == fname:
                return t
        raise KeyError(fname)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ArrayType:
    elem: "Type"
    index: Union[IntType, EnumType]

    def __str__(self):
        return f"{self.elem}[{self.index}]"


Type = Union[BoolType, IntType, EnumType, RecordType, ArrayType]
ScalarType = Union[BoolType, IntType, EnumType]

BOOL = BoolType()


def is_scalar(t: Type) -> bool:
    return isinstance(t, (BoolType, IntType, EnumType))


def index_values(t: Union[IntType, EnumType]):
    """Concrete index domain of an array index type, in declaration order."""
    return list(t.values())


def flatten(name: str, t: Type) -> Iterator[Tuple[str, ScalarType]]:
    """Yield ``(path, scalar_type)`` for every scalar slot under ``name``.

    Paths use ``.field`` for record fields and ``[v]`` for array elements,
    with enum indices rendered by label so paths are stable and readable,
    e.g. ``ep.renv.benv.cell[2]``.
    """
    if is_scalar(t):
        yield name, t
        return
    if isinstance(t, RecordType):
        for fname, ftype in t.fields:
            yield from flatten(f"{name}.{fname}", ftype)
        return
    if isinstance(t, ArrayType):
        idx = t.index
        for v in idx.values():
            key = idx.labels[v] if isinstance(idx, EnumType) else v
            yield from flatten(f"{name}[{key}]", t.elem)
        return
    raise TypeError(f"cannot flatten {t!r}")


def contains_value(t: ScalarType, v: int) -> bool:
    lo, hi = t.bounds()
    return lo <= v <= hi


@dataclass(frozen=True)
class VarDecl:
    """A declared variable before flattening.

    ``owner`` is None for shared variables and the instance name for locals.
    ``init`` is the structured initializer produced by the elaborator: an int
    for scalars, or a nested tuple mirroring the record/array shape.
    """

    name: str
    type: Type
    owner: Optional[str] = None
    init: object = None


def default_init(t: Type):
    """Structured default initializer for ``t`` (ints / nested tuples)."""
    if is_scalar(t):
        return t.default()
    if isinstance(t, RecordType):
        return tuple(default_init(ft) for _, ft in t.fields)
    if isinstance(t, ArrayType):
        return tuple(default_init(t.elem) for _ in t.index.values())
    raise TypeError(f"no default for {t!r}")


def flatten_init(t: Type, init) -> Iterator[int]:
    """Yield scalar initial values in the same order as :func:`flatten`."""
    if is_scalar(t):
        yield int(init)
        return
    if isinstance(t, RecordType):
        for (_, ft), sub in zip(t.fields, init):
            yield from flatten_init(ft, sub)
        return
    if isinstance(t, ArrayType):
        for sub in init:
            yield from flatten_init(t.elem, sub)
        return
    raise TypeError(f"cannot flatten init for {t!r}")
