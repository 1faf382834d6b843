from .csvio import CsvFormatError, RawRecord, load_csv, parse_csv, write_csv
from .dataset import (
    DatasetError,
    LabeledDataset,
    build_prospecting_dataset,
    inverse_frequency_weights,
    load_snapshot,
    save_snapshot,
    split,
)
from .encoding import EncodingError, EncodingStats, SchemaMismatchError, encode, fit_stats
from .schema import Column, FeatureSchema, SchemaError, load_schema, parse_schema
from .synthetic import SyntheticPopulation, SyntheticPopulationSpec, generate_synthetic, synthetic_schema

__all__ = [
    "Column",
    "CsvFormatError",
    "DatasetError",
    "EncodingError",
    "EncodingStats",
    "FeatureSchema",
    "LabeledDataset",
    "RawRecord",
    "SchemaError",
    "SchemaMismatchError",
    "SyntheticPopulation",
    "SyntheticPopulationSpec",
    "build_prospecting_dataset",
    "encode",
    "fit_stats",
    "generate_synthetic",
    "inverse_frequency_weights",
    "load_csv",
    "load_schema",
    "load_snapshot",
    "parse_csv",
    "parse_schema",
    "save_snapshot",
    "split",
    "synthetic_schema",
    "write_csv",
]
