"""
Column schema for tabular input.

A schema file is a JSON object mapping column name -> role, in column order:

    {"age": "numerical", "job": "categorical", "sex": "sensitive", "y": "label"}
"""

import json
import os
from dataclasses import dataclass
from enum import Enum

from utils.errors import SchemaError


class Role(str, Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    SENSITIVE = "sensitive"
    LABEL = "label"
    IGNORE = "ignore"


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, Role], ...]

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {', '.join(dupes)}")
        roles = [role for _, role in self.columns]
        if Role.NUMERICAL not in roles and Role.CATEGORICAL not in roles:
            raise SchemaError("schema needs at least one numerical or categorical column")
        if roles.count(Role.LABEL) > 1:
            raise SchemaError("schema allows at most one label column")

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "Schema":
        columns = []
        for name, role in mapping.items():
            try:
                columns.append((str(name), Role(role)))
            except ValueError:
                allowed = ", ".join(r.value for r in Role)
                raise SchemaError(f"column '{name}': unknown role '{role}' (expected one of {allowed})") from None
        return cls(tuple(columns))

    def names(self, role: Role) -> list[str]:
        return [name for name, r in self.columns if r == role]

    @property
    def label(self) -> str | None:
        labels = self.names(Role.LABEL)
        return labels[0] if labels else None

    def to_mapping(self) -> dict[str, str]:
        return {name: role.value for name, role in self.columns}


def load_schema(path: str | os.PathLike) -> Schema:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise SchemaError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"schema file is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise SchemaError("schema file must hold a JSON object of column -> role")
    return Schema.from_mapping(raw)


def save_schema(schema: Schema, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(schema.to_mapping(), f, indent=2)
        f.write("\n")
