"""Outcome-schema language: parsing and document validation.

A schema is a flat list of typed fields plus one level of named groups of
fields. Documents are trees of named primitive values, depth at most two.
Validation is closed-world: a document key the schema does not declare is a
violation. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import errors
from .canonical import is_primitive
from .errors import KernelError

FIELD_TYPES = ("string", "integer", "number", "boolean")


@dataclass(frozen=True)
class FieldSpec:
    """One typed field: primitive type, optional enum and numeric bounds."""

    name: str
    type: str
    required: bool = False
    enum_values: tuple | None = None
    min: float | int | None = None
    max: float | int | None = None


@dataclass(frozen=True)
class OutcomeSchema:
    name: str
    fields: tuple[FieldSpec, ...] = ()
    groups: tuple[tuple[str, tuple[FieldSpec, ...]], ...] = ()

    def to_doc(self) -> dict:
        doc = {
            "kind": "schema",
            "name": self.name,
            "fields": [_field_doc(f) for f in self.fields],
            "groups": [
                {"name": gname, "fields": [_field_doc(f) for f in gfields]}
                for gname, gfields in self.groups
            ],
        }
        return doc


@dataclass(frozen=True)
class Violation:
    """One validation failure, located by a dotted document path."""

    path: str
    code: str
    message: str

    def to_doc(self) -> dict:
        return {"path": self.path, "code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_doc(self) -> list:
        return [v.to_doc() for v in self.violations]


class SchemaParseError(KernelError):
    """Raised by parse_schema; carries every structural error found."""

    def __init__(self, schema_errors: list[dict]):
        super().__init__(
            errors.BAD_SCHEMA,
            f"schema document has {len(schema_errors)} structural error(s)",
            schema_errors,
        )
        self.schema_errors = schema_errors


def _field_doc(spec: FieldSpec) -> dict:
    doc: dict = {"name": spec.name, "type": spec.type, "required": spec.required}
    if spec.enum_values is not None:
        doc["enum_values"] = list(spec.enum_values)
    if spec.min is not None:
        doc["min"] = spec.min
    if spec.max is not None:
        doc["max"] = spec.max
    return doc


def _value_matches_type(value: object, ftype: str) -> bool:
    if ftype == "string":
        return isinstance(value, str)
    if ftype == "boolean":
        return isinstance(value, bool)
    if ftype == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if ftype == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


def _parse_field(doc: object, where: str, out: list[dict]) -> FieldSpec | None:
    def bad(code: str, message: str) -> None:
        out.append({"code": code, "path": where, "message": message})

    if not isinstance(doc, dict):
        bad(errors.BAD_SCHEMA, "field spec must be an object")
        return None
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        bad(errors.BAD_SCHEMA, "field name must be a non-empty string")
        return None
    ftype = doc.get("type")
    if ftype not in FIELD_TYPES:
        bad(errors.BAD_SCHEMA, f"field {name!r} has unknown type {ftype!r}")
        return None
    required = doc.get("required", False)
    if not isinstance(required, bool):
        bad(errors.BAD_SCHEMA, f"field {name!r}: required must be boolean")
        return None
    unknown = set(doc) - {"name", "type", "required", "enum_values", "min", "max"}
    if unknown:
        bad(errors.BAD_SCHEMA, f"field {name!r}: unknown keys {sorted(unknown)}")
        return None

    enum_values = doc.get("enum_values")
    if enum_values is not None:
        if not isinstance(enum_values, list) or not enum_values:
            bad(errors.BAD_ENUM, f"field {name!r}: enum_values must be a non-empty list")
            return None
        if any(not _value_matches_type(v, ftype) for v in enum_values):
            bad(errors.BAD_ENUM, f"field {name!r}: enum literals must all be of type {ftype}")
            return None
        enum_values = tuple(enum_values)

    lo, hi = doc.get("min"), doc.get("max")
    if lo is not None or hi is not None:
        if ftype not in ("integer", "number"):
            bad(errors.BAD_BOUND, f"field {name!r}: bounds only allowed on numeric types")
            return None
        for label, bound in (("min", lo), ("max", hi)):
            if bound is not None and not _value_matches_type(bound, "number"):
                bad(errors.BAD_BOUND, f"field {name!r}: {label} must be numeric")
                return None
        if lo is not None and hi is not None and lo > hi:
            bad(errors.BAD_BOUND, f"field {name!r}: min {lo} exceeds max {hi}")
            return None

    return FieldSpec(name=name, type=ftype, required=required,
                     enum_values=enum_values, min=lo, max=hi)


def _parse_field_list(docs: object, where: str, out: list[dict]) -> tuple[FieldSpec, ...]:
    if not isinstance(docs, list):
        out.append({"code": errors.BAD_SCHEMA, "path": where, "message": "expected a list of field specs"})
        return ()
    specs = []
    seen: set[str] = set()
    for i, fdoc in enumerate(docs):
        name = fdoc.get("name") if isinstance(fdoc, dict) else None
        if isinstance(name, str) and name:
            if name in seen:
                out.append({
                    "code": errors.DUPLICATE_FIELD,
                    "path": f"{where}[{i}]",
                    "message": f"duplicate field name {name!r}",
                })
                continue
            seen.add(name)
        spec = _parse_field(fdoc, f"{where}[{i}]", out)
        if spec is not None:
            specs.append(spec)
    return tuple(specs)


def parse_schema(document: object) -> OutcomeSchema:
    """Parse a schema document, collecting every structural error.

    Raises SchemaParseError listing all problems rather than stopping at the
    first, so an author can fix a document in one pass.
    """
    problems: list[dict] = []
    if not isinstance(document, dict):
        raise SchemaParseError([{"code": errors.BAD_SCHEMA, "path": "", "message": "schema document must be an object"}])
    if document.get("kind") not in (None, "schema"):
        problems.append({"code": errors.BAD_SCHEMA, "path": "kind", "message": "kind must be 'schema'"})
    name = document.get("name")
    if not isinstance(name, str) or not name:
        problems.append({"code": errors.BAD_SCHEMA, "path": "name", "message": "schema name must be a non-empty string"})
        name = ""
    unknown = set(document) - {"kind", "name", "fields", "groups"}
    if unknown:
        problems.append({"code": errors.BAD_SCHEMA, "path": "", "message": f"unknown keys {sorted(unknown)}"})

    fields = _parse_field_list(document.get("fields", []), "fields", problems)

    groups: list[tuple[str, tuple[FieldSpec, ...]]] = []
    gdocs = document.get("groups", [])
    if not isinstance(gdocs, list):
        problems.append({"code": errors.BAD_SCHEMA, "path": "groups", "message": "groups must be a list"})
        gdocs = []
    top_names = {f.name for f in fields}
    for i, gdoc in enumerate(gdocs):
        where = f"groups[{i}]"
        if not isinstance(gdoc, dict) or set(gdoc) - {"name", "fields"}:
            problems.append({"code": errors.BAD_SCHEMA, "path": where, "message": "group must be an object with name and fields"})
            continue
        gname = gdoc.get("name")
        if not isinstance(gname, str) or not gname:
            problems.append({"code": errors.BAD_SCHEMA, "path": where, "message": "group name must be a non-empty string"})
            continue
        if gname in top_names or any(g[0] == gname for g in groups):
            problems.append({"code": errors.DUPLICATE_FIELD, "path": where, "message": f"duplicate name {gname!r} at top level"})
            continue
        groups.append((gname, _parse_field_list(gdoc.get("fields", []), f"{where}.fields", problems)))

    if not fields and not any(gfields for _, gfields in groups):
        problems.append({"code": errors.EMPTY_SCHEMA, "path": "", "message": "schema declares no fields"})

    if problems:
        raise SchemaParseError(problems)
    return OutcomeSchema(name=name, fields=fields, groups=tuple(groups))


def _check_field(spec: FieldSpec, value: object, path: str, out: list[Violation]) -> None:
    if not _value_matches_type(value, spec.type):
        out.append(Violation(path, "type-mismatch",
                             f"expected {spec.type}, got {type(value).__name__}"))
        return
    if spec.enum_values is not None and value not in spec.enum_values:
        out.append(Violation(path, "not-in-enum", f"value {value!r} not one of {list(spec.enum_values)}"))
    if spec.min is not None and value < spec.min:
        out.append(Violation(path, "below-min", f"value {value!r} below minimum {spec.min}"))
    if spec.max is not None and value > spec.max:
        out.append(Violation(path, "above-max", f"value {value!r} above maximum {spec.max}"))


def _check_level(specs: tuple[FieldSpec, ...], doc: dict, prefix: str, out: list[Violation]) -> None:
    by_name = {s.name: s for s in specs}
    for fname, value in doc.items():
        path = f"{prefix}{fname}"
        spec = by_name.get(fname)
        if spec is None:
            out.append(Violation(path, "unknown-field", f"field {fname!r} not declared by schema"))
            continue
        if isinstance(value, (dict, list)) or value is None:
            out.append(Violation(path, "type-mismatch", "expected a primitive value"))
            continue
        _check_field(spec, value, path, out)
    for spec in specs:
        if spec.required and spec.name not in doc:
            out.append(Violation(f"{prefix}{spec.name}", "missing-required",
                                 f"required field {spec.name!r} absent"))


def validate(schema: OutcomeSchema, document: object) -> ValidationReport:
    """Check a document against a schema; every violation is reported.

    Pure and deterministic: the report is sorted by (path, code).
    """
    out: list[Violation] = []
    if not isinstance(document, dict):
        return ValidationReport([Violation("", "type-mismatch", "document must be an object")])

    group_names = {gname for gname, _ in schema.groups}
    top_docs = {k: v for k, v in document.items() if k not in group_names}
    _check_level(schema.fields, top_docs, "", out)

    for gname, gfields in schema.groups:
        gdoc = document.get(gname)
        if gdoc is None:
            for spec in gfields:
                if spec.required:
                    out.append(Violation(f"{gname}.{spec.name}", "missing-required",
                                         f"required field {spec.name!r} absent"))
            continue
        if not isinstance(gdoc, dict):
            out.append(Violation(gname, "type-mismatch", "expected an object group"))
            continue
        _check_level(gfields, gdoc, f"{gname}.", out)

    out.sort(key=lambda v: (v.path, v.code))
    return ValidationReport(out)
