"""Spoofing-transmission defense: window dataset, model, and decision loop.

The defense is a next-bit predictor trained on occupied-home transmission
patterns. During an absent day it watches the last n transmission decisions
and, whenever the change rule alone would stay silent, decides whether to
send a redundant real reading so the day's pattern keeps looking occupied.
Change-triggered transmissions are never suppressed, so reading fidelity
at the utility is untouched.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from amisim.cat import CatConfig, EuView, TransmissionPattern, apply_cat, cat_decide
from amisim.data.traces import ConsumptionTrace, DayRecord, PresenceLabel, resample
from amisim.errors import ConfigError, ProtocolError
from amisim.nn import (
    Activation,
    Conv1D,
    Dense,
    GRULayer,
    MaxPool1D,
    ModelSpec,
    Params,
    TrainConfig,
    forward,
    train,
)

WINDOW_PER5MIN = 100
WINDOW_PER30MIN = 35

DEFAULT_DEFENSE_EPOCHS = 60
DEFAULT_DEFENSE_BATCH = 400
DEFAULT_DEFENSE_LR = 0.0001


def window_size(rate: str) -> int:
    if rate == "per5min":
        return WINDOW_PER5MIN
    if rate == "per30min":
        return WINDOW_PER30MIN
    raise ConfigError(f"unknown rate {rate!r}")


def build_defense(rate: str) -> ModelSpec:
    """Next-decision predictor architecture for the given reporting rate."""
    if rate == "per5min":
        return ModelSpec(
            input_length=WINDOW_PER5MIN,
            input_channels=1,
            layers=(
                Conv1D(filters=150, kernel_size=3),
                Activation("relu"),
                MaxPool1D(pool_size=4),
                GRULayer(units=200),
                Dense(units=128),
                Activation("relu"),
                Dense(units=32),
                Activation("relu"),
                Dense(units=2),
                Activation("softmax"),
            ),
            output_classes=2,
        )
    if rate == "per30min":
        return ModelSpec(
            input_length=WINDOW_PER30MIN,
            input_channels=1,
            layers=(
                Conv1D(filters=128, kernel_size=3),
                Activation("relu"),
                Conv1D(filters=64, kernel_size=3),
                Activation("relu"),
                Conv1D(filters=32, kernel_size=3),
                Activation("relu"),
                MaxPool1D(pool_size=2),
                GRULayer(units=128),
                Dense(units=128),
                Activation("relu"),
                Dense(units=32),
                Activation("relu"),
                Dense(units=2),
                Activation("softmax"),
            ),
            output_classes=2,
        )
    raise ConfigError(f"unknown rate {rate!r}")


@dataclass(frozen=True)
class WindowDataset:
    windows: np.ndarray  # (count, n) float64 bits
    labels: np.ndarray  # (count,) int 0/1
    n: int
    skipped: int  # sequences too short to yield a sample


def build_window_dataset(present_sequences, n: int) -> WindowDataset:
    """Slide an n-bit window over each occupied-period bit sequence.

    Each sequence yields len - n samples labeled with the bit right after
    the window. Pass per-day patterns for day-bounded windows, or
    concatenated runs of consecutive present days (see present_runs) to let
    windows span midnight. Sequences of n or fewer bits are skipped.
    """
    if n < 1:
        raise ConfigError("window size must be >= 1")
    windows = []
    labels = []
    skipped = 0
    for seq in present_sequences:
        bits = np.asarray(seq, dtype=np.float64).ravel()
        if len(bits) <= n:
            skipped += 1
            continue
        view = np.lib.stride_tricks.sliding_window_view(bits, n)[:-1]
        windows.append(view.copy())
        labels.append(bits[n:].astype(np.int64))
    if windows:
        x = np.concatenate(windows, axis=0)
        y = np.concatenate(labels, axis=0)
    else:
        x = np.zeros((0, n))
        y = np.zeros(0, dtype=np.int64)
    return WindowDataset(windows=x, labels=y, n=n, skipped=skipped)


def present_runs(patterns_by_day, labels_by_day):
    """Concatenate consecutive present-day patterns per consumer.

    Both arguments are keyed by (consumer_id, ISO date). Returns bit
    sequences, one per maximal run of consecutive present days.
    """
    by_consumer: dict[str, list] = {}
    for (consumer, date_iso), pattern in patterns_by_day.items():
        by_consumer.setdefault(consumer, []).append((date_iso, pattern))
    runs = []
    for consumer, entries in sorted(by_consumer.items()):
        entries.sort()
        current: list[np.ndarray] = []
        for date_iso, pattern in entries:
            bits = pattern.bits if isinstance(pattern, TransmissionPattern) else pattern
            if labels_by_day[(consumer, date_iso)] is PresenceLabel.PRESENT:
                current.append(np.asarray(bits))
            elif current:
                runs.append(np.concatenate(current))
                current = []
        if current:
            runs.append(np.concatenate(current))
    return runs


def subsample_windows(dataset: WindowDataset, max_samples: int, seed: int, balance: bool = True):
    """Deterministic subsample for desk-scale training; optionally 50/50.

    Balancing duplicates nothing: it caps the majority class at the
    minority count (or half the budget, whichever is smaller).
    """
    if len(dataset.labels) <= max_samples and not balance:
        return dataset
    rng = np.random.default_rng(seed)
    idx_one = np.flatnonzero(dataset.labels == 1)
    idx_zero = np.flatnonzero(dataset.labels == 0)
    if balance and len(idx_one) and len(idx_zero):
        per_class = min(max_samples // 2, len(idx_one), len(idx_zero))
        take_one = rng.permutation(idx_one)[:per_class]
        take_zero = rng.permutation(idx_zero)[:per_class]
        chosen = np.concatenate([take_one, take_zero])
    else:
        chosen = rng.permutation(len(dataset.labels))[:max_samples]
    chosen = np.sort(chosen)
    return WindowDataset(
        windows=dataset.windows[chosen],
        labels=dataset.labels[chosen],
        n=dataset.n,
        skipped=dataset.skipped,
    )


@dataclass(frozen=True)
class DefenseBundle:
    spec: ModelSpec
    params: Params
    n: int


def train_defense(
    dataset: WindowDataset,
    spec: ModelSpec,
    config: TrainConfig | None = None,
) -> tuple[Params, list]:
    """Train the next-decision predictor; returns (params, history)."""
    if config is None:
        config = TrainConfig(
            epochs=DEFAULT_DEFENSE_EPOCHS,
            batch_size=DEFAULT_DEFENSE_BATCH,
            learning_rate=DEFAULT_DEFENSE_LR,
        )
    if dataset.n != spec.input_length:
        raise ConfigError(
            f"window size {dataset.n} does not match model input {spec.input_length}"
        )
    if len(dataset.labels) == 0:
        raise ConfigError("empty window dataset")
    share = dataset.labels.mean()
    if share in (0.0, 1.0):
        warnings.warn("single-class window dataset; the predictor will be constant")
    x = dataset.windows[:, :, None]
    return train(spec, x, dataset.labels, config)


# ---------------------------------------------------------------------------
# Decision loop
# ---------------------------------------------------------------------------

class DefenseState:
    """Ring buffer of the last n transmission decisions."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError("memory size must be >= 1")
        self.n = n
        self._bits: deque[int] = deque(maxlen=n)

    def push(self, bit: int):
        self._bits.append(1 if bit else 0)

    def seed(self, bits):
        """Pre-fill with a history; keeps only the trailing n bits."""
        for b in np.asarray(bits).ravel()[-self.n :]:
            self.push(int(b))

    @property
    def ready(self) -> bool:
        return len(self._bits) == self.n

    def window(self) -> np.ndarray:
        if not self.ready:
            raise ProtocolError(
                f"defense memory holds {len(self._bits)}/{self.n} decisions"
            )
        return np.array(self._bits, dtype=np.float64)


def defense_decide(state: DefenseState, bundle: DefenseBundle) -> int:
    """Run the predictor on the memory window; 1 means send a redundant reading."""
    window = state.window()
    out, _ = forward(bundle.spec, bundle.params, window[None, :, None])
    return int(np.argmax(out[0]))


def simulate_day(
    day: DayRecord,
    presence: PresenceLabel,
    cat: CatConfig,
    bundle: DefenseBundle | None,
    state: DefenseState | None,
    last_reported: float | None,
):
    """One consumer-day under CAT plus (optionally) the spoofing defense.

    Per slot: a change-triggered transmission always goes out; otherwise,
    on an absent day with a defense attached, the predictor may fire a
    redundant transmission of the current actual reading. Every decision
    is pushed into the memory. Returns (pattern, eu_view, last_reported).
    """
    readings = day.readings
    bits = np.zeros(len(readings), dtype=np.uint8)
    values = np.empty(len(readings), dtype=np.float64)
    last = last_reported
    use_defense = (
        bundle is not None and state is not None and presence is PresenceLabel.ABSENT
    )
    for t, current in enumerate(readings):
        current = float(current)
        transmit = last is None or cat_decide(current, last, cat.threshold_percent)
        if not transmit and use_defense and defense_decide(state, bundle):
            transmit = True
        if transmit:
            bits[t] = 1
            last = current
        values[t] = last
        if state is not None:
            state.push(int(bits[t]))
    return TransmissionPattern(bits=bits), EuView(values=values), last


# ---------------------------------------------------------------------------
# Corpus-level simulation (lockstep across consumers for speed)
# ---------------------------------------------------------------------------

def simulate_corpus(
    traces: list[ConsumptionTrace],
    presence: dict,
    cat: CatConfig,
    bundle: DefenseBundle | None = None,
):
    """Simulate every consumer-day; returns (patterns, eu_views) keyed by
    (consumer_id, ISO date).

    Equivalent to chaining simulate_day per consumer, but batches the
    per-slot defense forward passes across consumers. All traces must share
    the simulation granularity and day count. Defense memories bootstrap
    from each consumer's first present day's pure-change pattern, then
    track the actual decision stream.
    """
    working = [resample(t, cat.granularity_minutes) for t in traces]
    day_lists = [t.days() for t in working]
    if len({len(days) for days in day_lists}) > 1:
        raise ConfigError("lockstep simulation requires equal day counts")

    states: list[DefenseState | None] = [None] * len(working)
    if bundle is not None:
        for i, days in enumerate(day_lists):
            state = DefenseState(bundle.n)
            state.seed(_bootstrap_bits(days, presence, cat, bundle.n))
            states[i] = state

    lasts: list[float | None] = [None] * len(working)
    patterns: dict = {}
    eu_views: dict = {}
    n_days = len(day_lists[0]) if day_lists else 0
    slots = len(day_lists[0][0].readings) if n_days else 0

    for d in range(n_days):
        day_bits = [np.zeros(slots, dtype=np.uint8) for _ in working]
        day_vals = [np.empty(slots, dtype=np.float64) for _ in working]
        absent_flags = [
            presence[(days[d].consumer_id, days[d].date.isoformat())]
            is PresenceLabel.ABSENT
            for days in day_lists
        ]
        for t in range(slots):
            pending = []  # consumers whose slot awaits a defense decision
            for i, days in enumerate(day_lists):
                current = float(days[d].readings[t])
                transmit = lasts[i] is None or cat_decide(
                    current, lasts[i], cat.threshold_percent
                )
                if transmit:
                    day_bits[i][t] = 1
                    lasts[i] = current
                elif bundle is not None and absent_flags[i]:
                    pending.append(i)
                day_vals[i][t] = lasts[i]
            if pending:
                windows = np.stack([states[i].window() for i in pending])
                out, _ = forward(bundle.spec, bundle.params, windows[:, :, None])
                fire = np.argmax(out, axis=1)
                for j, i in enumerate(pending):
                    if fire[j]:
                        current = float(day_lists[i][d].readings[t])
                        day_bits[i][t] = 1
                        lasts[i] = current
                        day_vals[i][t] = current
            if bundle is not None:
                for i in range(len(working)):
                    states[i].push(int(day_bits[i][t]))
        for i, days in enumerate(day_lists):
            key = (days[d].consumer_id, days[d].date.isoformat())
            patterns[key] = TransmissionPattern(bits=day_bits[i])
            eu_views[key] = EuView(values=day_vals[i])
    return patterns, eu_views


def _bootstrap_bits(days, presence, cat: CatConfig, n: int) -> np.ndarray:
    """Memory seed: the change-only pattern of the consumer's first present day."""
    for day in days:
        if presence[(day.consumer_id, day.date.isoformat())] is PresenceLabel.PRESENT:
            pattern, _, _ = apply_cat(day, cat, None)
            bits = pattern.bits
            if len(bits) >= n:
                return bits[-n:]
            reps = int(np.ceil(n / len(bits)))
            return np.tile(bits, reps)[-n:]
    return np.zeros(n, dtype=np.uint8)
