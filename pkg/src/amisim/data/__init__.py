from amisim.data.kmeans import kmeans
from amisim.data.labeling import (
    DEFAULT_PERIODS_THRESHOLD,
    label_days,
    load_labeled_jsonl,
    periods_score,
    save_labeled_jsonl,
)
from amisim.data.traces import (
    ConsumptionTrace,
    CsvFormat,
    DayRecord,
    LabeledDataset,
    LabeledRecord,
    PresenceLabel,
    Split,
    SyntheticConfig,
    ingest_csv,
    resample,
    slots_per_day,
    synthesize,
    traces_from_day_records,
    write_traces_csv,
)

__all__ = [
    "ConsumptionTrace",
    "CsvFormat",
    "DayRecord",
    "DEFAULT_PERIODS_THRESHOLD",
    "LabeledDataset",
    "LabeledRecord",
    "PresenceLabel",
    "Split",
    "SyntheticConfig",
    "ingest_csv",
    "kmeans",
    "label_days",
    "load_labeled_jsonl",
    "periods_score",
    "resample",
    "save_labeled_jsonl",
    "slots_per_day",
    "synthesize",
    "traces_from_day_records",
    "write_traces_csv",
]
