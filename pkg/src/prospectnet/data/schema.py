"""Feature schema and its text file format.

Schema file grammar (one directive per line, ``#`` starts a comment)::

    id_column: <name>
    numeric: <name> [missing]
    categorical: <name> vocab=<tok>|<tok>|... [missing]
    categorical: <name> buckets=<n> [missing]

``missing`` allows missing cells in that column. Numeric columns that allow
missing values get a companion 0/1 indicator column; categorical columns get
a dedicated slot that also absorbs tokens outside the vocabulary.
Categorical columns with more than 64 vocabulary entries are hashed into 64
buckets instead of one-hot encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

MAX_ONEHOT = 64
DEFAULT_BUCKETS = 64


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    vocabulary: tuple[str, ...] = ()
    buckets: int = 0
    missing: bool = False

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if not self.name or any(c in self.name for c in " ,\t\n"):
            raise SchemaError(f"invalid column name {self.name!r}")
        if self.kind == "numeric" and (self.vocabulary or self.buckets):
            raise SchemaError(f"numeric column {self.name!r} cannot have a vocabulary")
        if self.kind == "categorical":
            if not self.vocabulary and self.buckets <= 0:
                raise SchemaError(f"categorical column {self.name!r} needs a vocabulary or bucket count")
            if len(set(self.vocabulary)) != len(self.vocabulary):
                raise SchemaError(f"categorical column {self.name!r} has duplicate vocabulary entries")
            if self.buckets == 0 and len(self.vocabulary) > MAX_ONEHOT:
                object.__setattr__(self, "buckets", DEFAULT_BUCKETS)

    @property
    def hashed(self) -> bool:
        return self.kind == "categorical" and self.buckets > 0

    @property
    def encoded_width(self) -> int:
        extra = int(self.missing)
        if self.kind == "numeric":
            return 1 + extra
        return (self.buckets if self.hashed else len(self.vocabulary)) + extra

    def encoded_names(self) -> list[str]:
        if self.kind == "numeric":
            return [self.name] + ([f"{self.name}__missing"] if self.missing else [])
        slots = [f"{self.name}__h{i}" for i in range(self.buckets)] if self.hashed else [
            f"{self.name}={tok}" for tok in self.vocabulary
        ]
        return slots + ([f"{self.name}__missing"] if self.missing else [])


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[Column, ...]
    id_column: str = "record_id"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        if self.id_column in names:
            raise SchemaError(f"id column {self.id_column!r} also declared as a feature")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def encoded_width(self) -> int:
        return sum(c.encoded_width for c in self.columns)

    def encoded_names(self) -> list[str]:
        return [n for c in self.columns for n in c.encoded_names()]

    def column(self, name: str) -> Column:
        return self.columns[self._index[name]]

    def with_missing(self, allow: bool = True) -> "FeatureSchema":
        return FeatureSchema(tuple(replace(c, missing=allow) for c in self.columns), self.id_column)

    # --- serialisation ---

    def to_text(self) -> str:
        lines = ["# prospectnet feature schema", f"id_column: {self.id_column}"]
        for c in self.columns:
            flag = " missing" if c.missing else ""
            if c.kind == "numeric":
                lines.append(f"numeric: {c.name}{flag}")
                continue
            opts = []
            if c.vocabulary:
                opts.append("vocab=" + "|".join(c.vocabulary))
            if c.hashed:
                opts.append(f"buckets={c.buckets}")
            lines.append(f"categorical: {c.name} {' '.join(opts)}{flag}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"text": self.to_text()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return parse_schema(d["text"])


def parse_schema(text: str) -> FeatureSchema:
    id_column = "record_id"
    columns: list[Column] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise SchemaError(f"line {lineno}: expected 'key: value'")
        key, parts = key.strip(), value.split()
        if key == "id_column":
            if len(parts) != 1:
                raise SchemaError(f"line {lineno}: id_column takes one name")
            id_column = parts[0]
        elif key in ("numeric", "categorical"):
            if not parts:
                raise SchemaError(f"line {lineno}: missing column name")
            name, opts = parts[0], parts[1:]
            vocab: tuple[str, ...] = ()
            buckets, missing = 0, False
            for opt in opts:
                if opt == "missing":
                    missing = True
                elif opt.startswith("vocab="):
                    vocab = tuple(t for t in opt[len("vocab="):].split("|") if t)
                elif opt.startswith("buckets="):
                    try:
                        buckets = int(opt[len("buckets="):])
                    except ValueError:
                        raise SchemaError(f"line {lineno}: bad bucket count {opt!r}") from None
                else:
                    raise SchemaError(f"line {lineno}: unknown option {opt!r}")
            try:
                columns.append(Column(name, key, vocab, buckets, missing))
            except SchemaError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from None
        else:
            raise SchemaError(f"line {lineno}: unknown directive {key!r}")
    return FeatureSchema(tuple(columns), id_column)


def load_schema(path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return parse_schema(fh.read())
