"""MiniC type expressions and record layouts."""

from __future__ import annotations

from dataclasses import dataclass


class TypeExpr:
    """Base class for MiniC types. Instances are immutable and hashable."""

    def size_slots(self, records: dict[str, "RecordDef"]) -> int:
        """Number of scalar slots this type occupies when flattened."""
        raise NotImplementedError


@dataclass(frozen=True)
class Int32(TypeExpr):
    def size_slots(self, records) -> int:
        return 1

    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class Bool(TypeExpr):
    def size_slots(self, records) -> int:
        return 1

    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class Record(TypeExpr):
    name: str

    def size_slots(self, records) -> int:
        rec = records[self.name]
        return sum(f_type.size_slots(records) for _, f_type in rec.fields)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Array(TypeExpr):
    elem: TypeExpr
    length: int

    def size_slots(self, records) -> int:
        return self.length * self.elem.size_slots(records)

    def __str__(self) -> str:
        return f"{self.elem}[{self.length}]"


@dataclass(frozen=True)
class Address(TypeExpr):
    elem: TypeExpr

    def size_slots(self, records) -> int:
        return 1

    def __str__(self) -> str:
        return f"{self.elem}*"


@dataclass(frozen=True)
class Void(TypeExpr):
    def size_slots(self, records) -> int:
        return 0

    def __str__(self) -> str:
        return "void"


INT32 = Int32()
BOOL = Bool()
VOID = Void()

# Type of the `null` literal before it is unified with a concrete pointer type.
NULL_ADDRESS = Address(VOID)


@dataclass(frozen=True)
class RecordDef:
    name: str
    fields: tuple[tuple[str, TypeExpr], ...]

    def field_index(self, name: str) -> int:
        for i, (fname, _) in enumerate(self.fields):
            if fname == name:
                return i
        raise KeyError(name)

    def field_type(self, name: str) -> TypeExpr:
        return self.fields[self.field_index(name)][1]


def is_scalar(t: TypeExpr) -> bool:
    return isinstance(t, (Int32, Bool, Address))


def is_aggregate(t: TypeExpr) -> bool:
    return isinstance(t, (Record, Array))


def addresses_compatible(a: TypeExpr, b: TypeExpr) -> bool:
    """True when two types may be compared/assigned as addresses (null is wild)."""
    if not isinstance(a, Address) or not isinstance(b, Address):
        return False
    return a == b or a == NULL_ADDRESS or b == NULL_ADDRESS
