"""End-to-end encrypted reading collection over change-and-transmit.

One offline key-distribution step hands out a Paillier key pair (private
half to the utility only), pairing parameters, and per-entity signing keys.
Each slot, reporting meters send ciphertext||timestamp||signature; the
aggregator batch-verifies, reuses stored ciphertexts for silent meters,
multiplies everything into one ciphertext, and signs it onward; the utility
verifies and decrypts the total. Nobody but the utility ever holds the
Paillier private key, and the aggregate decrypts exactly because all
arithmetic is integer arithmetic modulo n.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from amisim.cat import CatConfig, apply_cat, cat_decide, efficiency, patterns_for_traces
from amisim.crypto import (
    Ciphertext,
    PaillierPrivateKey,
    PaillierPublicKey,
    batch_verify,
    canonical_payload,
    decode_reading,
    decrypt,
    encode_reading,
    encrypt,
    make_suite,
    paillier_keygen,
    sig_keygen,
    sign,
    verify_single,
)
from amisim.crypto.signatures import SigKeypair, Signature
from amisim.data.traces import ConsumptionTrace, PresenceLabel, resample, slots_per_day
from amisim.defense import DefenseBundle, DefenseState, defense_decide
from amisim.errors import (
    ConfigError,
    ProtocolError,
    StaleMessageError,
    VerificationError,
)

SIM_EPOCH_MS = 1_451_606_400_000  # 2016-01-01T00:00:00Z


@dataclass(frozen=True)
class SetupConfig:
    sm_count: int
    paillier_bits: int = 2048
    pairing_backend: str = "exp"
    seed: int | None = None

    def __post_init__(self):
        if self.sm_count < 1:
            raise ConfigError("need at least one meter")


@dataclass(frozen=True)
class SystemParams:
    """Public bundle published once at setup; never changes afterwards."""

    paillier_pk: PaillierPublicKey
    suite: object
    sm_publics: dict  # sm_id -> signing public key
    agg_public: object


@dataclass(frozen=True)
class ReadingMsg:
    sender_id: str
    ciphertext: int
    ts_ms: int
    sigma: Signature

    def payload(self) -> bytes:
        return canonical_payload(self.ciphertext, self.ts_ms)


@dataclass(frozen=True)
class AggMsg:
    ciphertext: int
    ts_ms: int
    sigma: Signature

    def payload(self) -> bytes:
        return canonical_payload(self.ciphertext, self.ts_ms)


@dataclass
class SmState:
    sm_id: str
    keypair: SigKeypair
    rng: random.Random
    last_reported: float | None = None
    last_ts_ms: int = -1
    defense: DefenseBundle | None = None
    memory: DefenseState | None = None


@dataclass
class AggregatorState:
    keypair: SigKeypair
    directory: dict
    freshness_ms: int
    store: dict = field(default_factory=dict)
    dropped_stale: int = 0
    dropped_bad_sig: int = 0
    dropped_unknown: int = 0
    batch_fallbacks: int = 0


@dataclass
class EuState:
    paillier_sk: PaillierPrivateKey
    agg_public: object
    freshness_ms: int
    rejected_stale: int = 0
    rejected_bad_sig: int = 0


def kdc_setup(config: SetupConfig):
    """One-shot system bootstrap; the KDC plays no further part.

    Returns (params, eu_private_key, sm_keypairs, aggregator_keypair).
    With a seed, the whole key material is reproducible.
    """
    rng = random.Random(config.seed) if config.seed is not None else random.SystemRandom()
    pk, sk = paillier_keygen(bits=config.paillier_bits, rng=rng)
    suite_seed = rng.randrange(2**63) if config.seed is not None else None
    suite = make_suite(config.pairing_backend, seed=suite_seed)
    sm_keys = {f"sm{i:04d}": sig_keygen(suite, rng) for i in range(config.sm_count)}
    agg_key = sig_keygen(suite, rng)
    params = SystemParams(
        paillier_pk=pk,
        suite=suite,
        sm_publics={sm_id: kp.public for sm_id, kp in sm_keys.items()},
        agg_public=agg_key.public,
    )
    return params, sk, sm_keys, agg_key


def sm_report(
    params: SystemParams,
    state: SmState,
    reading_kwh: float,
    presence: PresenceLabel,
    cat: CatConfig,
    now_ms: int,
    force: bool = False,
) -> ReadingMsg | None:
    """Per-slot meter logic; returns a signed ciphertext or None.

    A change-triggered report always goes out; on absent days an attached
    defense may additionally fire a redundant reading. force=True is the
    simulation bootstrap (first-ever slot must populate the aggregator).
    Each transmission carries a fresh encryption of the actual reading, so
    equal plaintexts still produce different bytes on the wire.
    """
    if now_ms <= state.last_ts_ms:
        raise ProtocolError(f"{state.sm_id}: clock regression at {now_ms}")
    state.last_ts_ms = now_ms
    transmit = (
        force
        or state.last_reported is None
        or cat_decide(reading_kwh, state.last_reported, cat.threshold_percent)
    )
    if (
        not transmit
        and presence is PresenceLabel.ABSENT
        and state.defense is not None
        and state.memory is not None
    ):
        transmit = bool(defense_decide(state.memory, state.defense))
    if state.memory is not None:
        state.memory.push(1 if transmit else 0)
    if not transmit:
        return None
    state.last_reported = float(reading_kwh)
    m = encode_reading(reading_kwh, pk=params.paillier_pk, meter_count=len(params.sm_publics))
    c = encrypt(params.paillier_pk, m, rng=state.rng)
    payload = canonical_payload(c.value, now_ms)
    sigma = sign(state.keypair.x, payload, params.suite)
    return ReadingMsg(
        sender_id=state.sm_id, ciphertext=c.value, ts_ms=now_ms, sigma=sigma
    )


def aggregator_collect(
    params: SystemParams,
    state: AggregatorState,
    msgs: list[ReadingMsg],
    now_ms: int,
) -> AggMsg:
    """Verify this slot's messages, fold stored ciphertexts, sign the total.

    Stale or unverifiable messages are dropped (and counted), not fatal: the
    meter's stored ciphertext keeps representing it. A failed batch check
    falls back to per-message verification to isolate offenders.
    """
    fresh = []
    for msg in msgs:
        if abs(now_ms - msg.ts_ms) > state.freshness_ms:
            state.dropped_stale += 1
            continue
        if msg.sender_id not in state.directory:
            state.dropped_unknown += 1
            continue
        fresh.append(msg)

    accepted = []
    if fresh:
        items = [
            (m.sigma, state.directory[m.sender_id], m.payload()) for m in fresh
        ]
        if batch_verify(items, params.suite):
            accepted = fresh
        else:
            state.batch_fallbacks += 1
            for msg, item in zip(fresh, items):
                if verify_single(*item, params.suite):
                    accepted.append(msg)
                else:
                    state.dropped_bad_sig += 1

    for msg in accepted:
        state.store[msg.sender_id] = Ciphertext(value=msg.ciphertext)

    missing = set(state.directory) - set(state.store)
    if missing:
        raise ProtocolError(
            f"no stored ciphertext for {len(missing)} meters (bootstrap incomplete)"
        )
    total = 1
    n_sq = params.paillier_pk.n_sq
    for sm_id in sorted(state.store):
        total = (total * state.store[sm_id].value) % n_sq
    payload = canonical_payload(total, now_ms)
    sigma = sign(state.keypair.x, payload, params.suite)
    return AggMsg(ciphertext=total, ts_ms=now_ms, sigma=sigma)


@dataclass(frozen=True)
class RecoveredTotal:
    total_kwh: float
    total_encoded: int


def eu_recover(
    params: SystemParams, state: EuState, msg: AggMsg, now_ms: int
) -> RecoveredTotal:
    """Freshness gate, signature check, then exact decryption of the total."""
    if abs(now_ms - msg.ts_ms) > state.freshness_ms:
        state.rejected_stale += 1
        raise StaleMessageError(f"aggregate timestamp {msg.ts_ms} outside window")
    if not verify_single(msg.sigma, state.agg_public, msg.payload(), params.suite):
        state.rejected_bad_sig += 1
        raise VerificationError("aggregate signature check failed")
    total = decrypt(state.paillier_sk, params.paillier_pk, Ciphertext(value=msg.ciphertext))
    return RecoveredTotal(total_kwh=decode_reading(total), total_encoded=total)


# ---------------------------------------------------------------------------
# Whole-network simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimScenario:
    traces: list[ConsumptionTrace]
    presence: dict
    cat: CatConfig
    defense: DefenseBundle | None = None
    seed: int = 0
    paillier_bits: int = 512
    pairing_backend: str = "exp"
    freshness_slots: int = 2


@dataclass
class SimulationReport:
    config: dict
    slots: int
    exact_slots: int
    recovered_encoded: list
    expected_encoded: list
    efficiency_percent: float
    efficiency_without_defense: float
    transmissions: int
    periodic_total: int
    dropped_stale: int
    dropped_bad_sig: int
    attacker_view: dict  # (sm_id, date) -> bits (presence of transmissions only)
    eu_views: dict  # (sm_id, date) -> per-slot kWh the utility holds

    @property
    def all_exact(self) -> bool:
        return self.exact_slots == self.slots

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "slots": self.slots,
            "exact_slots": self.exact_slots,
            "all_exact": self.all_exact,
            "efficiency_percent": self.efficiency_percent,
            "efficiency_without_defense": self.efficiency_without_defense,
            "transmissions": self.transmissions,
            "periodic_total": self.periodic_total,
            "dropped_stale": self.dropped_stale,
            "dropped_bad_sig": self.dropped_bad_sig,
            "recovered_encoded": self.recovered_encoded,
            "expected_encoded": self.expected_encoded,
            "attacker_view": {
                f"{sm}|{date}": [int(b) for b in bits]
                for (sm, date), bits in sorted(self.attacker_view.items())
            },
        }


def run_simulation(scenario: SimScenario) -> SimulationReport:
    """Drive every meter, the aggregator, and the utility slot by slot.

    A plaintext shadow of each meter's last transmitted (encoded) reading
    runs alongside the ciphertext path; the report counts the slots where
    the decrypted aggregate equals the shadow sum exactly. The attacker
    view contains only message-presence bits, never plaintexts, and does
    not distinguish change-triggered from defense-triggered sends.
    """
    working = [resample(t, scenario.cat.granularity_minutes) for t in scenario.traces]
    day_counts = {t.day_count for t in working}
    if len(day_counts) != 1:
        raise ConfigError("all traces must cover the same number of days")
    n_days = day_counts.pop()
    spd = slots_per_day(scenario.cat.granularity_minutes)
    slot_ms = scenario.cat.granularity_minutes * 60_000

    setup = SetupConfig(
        sm_count=len(working),
        paillier_bits=scenario.paillier_bits,
        pairing_backend=scenario.pairing_backend,
        seed=scenario.seed,
    )
    params, eu_sk, sm_keys, agg_key = kdc_setup(setup)
    freshness_ms = scenario.freshness_slots * slot_ms

    master = random.Random(scenario.seed)
    sms = []
    for trace, (key_id, keypair) in zip(working, sm_keys.items()):
        state = SmState(
            sm_id=key_id,
            keypair=keypair,
            rng=random.Random(master.randrange(2**63)),
        )
        if scenario.defense is not None:
            state.defense = scenario.defense
            state.memory = DefenseState(scenario.defense.n)
            state.memory.seed(
                _first_present_cat_bits(trace, scenario.presence, scenario.cat, scenario.defense.n)
            )
        sms.append((trace.days(), trace.consumer_id, state))

    agg = AggregatorState(
        keypair=agg_key, directory=dict(params.sm_publics), freshness_ms=freshness_ms
    )
    eu = EuState(paillier_sk=eu_sk, agg_public=params.agg_public, freshness_ms=freshness_ms)

    shadow = {state.sm_id: 0 for _, _, state in sms}
    recovered = []
    expected = []
    exact = 0
    transmissions = 0
    attacker_view = {}
    eu_view_map = {}
    day_bits = {}
    day_vals = {}

    for d in range(n_days):
        for _, _, state in sms:
            day_bits[state.sm_id] = np.zeros(spd, dtype=np.uint8)
            day_vals[state.sm_id] = np.empty(spd, dtype=np.float64)
        labels = {
            state.sm_id: scenario.presence[(cid, days[d].date.isoformat())]
            for days, cid, state in sms
        }
        for t in range(spd):
            now = SIM_EPOCH_MS + (d * spd + t) * slot_ms
            msgs = []
            for days, cid, state in sms:
                reading = float(days[d].readings[t])
                msg = sm_report(
                    params,
                    state,
                    reading,
                    labels[state.sm_id],
                    scenario.cat,
                    now,
                    force=(d == 0 and t == 0),
                )
                if msg is not None:
                    msgs.append(msg)
                    shadow[state.sm_id] = encode_reading(reading)
                    day_bits[state.sm_id][t] = 1
                    transmissions += 1
                day_vals[state.sm_id][t] = (
                    state.last_reported if state.last_reported is not None else 0.0
                )
            agg_msg = aggregator_collect(params, agg, msgs, now)
            result = eu_recover(params, eu, agg_msg, now)
            expect = sum(shadow.values()) % params.paillier_pk.n
            recovered.append(result.total_encoded)
            expected.append(expect)
            if result.total_encoded == expect:
                exact += 1
        for days, cid, state in sms:
            key = (cid, days[d].date.isoformat())
            attacker_view[key] = day_bits[state.sm_id].copy()
            eu_view_map[key] = day_vals[state.sm_id].copy()

    periodic_total = len(sms) * n_days * spd
    eff_with = efficiency(periodic_total, transmissions)
    plain_patterns, _ = patterns_for_traces(scenario.traces, scenario.cat)
    plain_sent = sum(p.count() for p in plain_patterns.values())
    eff_without = efficiency(periodic_total, plain_sent)

    return SimulationReport(
        config={
            "meters": len(sms),
            "days": n_days,
            "granularity_minutes": scenario.cat.granularity_minutes,
            "threshold_percent": scenario.cat.threshold_percent,
            "defense": scenario.defense is not None,
            "seed": scenario.seed,
            "paillier_bits": scenario.paillier_bits,
            "pairing_backend": scenario.pairing_backend,
        },
        slots=n_days * spd,
        exact_slots=exact,
        recovered_encoded=recovered,
        expected_encoded=expected,
        efficiency_percent=eff_with,
        efficiency_without_defense=eff_without,
        transmissions=transmissions,
        periodic_total=periodic_total,
        dropped_stale=agg.dropped_stale,
        dropped_bad_sig=agg.dropped_bad_sig,
        attacker_view=attacker_view,
        eu_views=eu_view_map,
    )


def _first_present_cat_bits(trace, presence, cat: CatConfig, n: int):
    working = resample(trace, cat.granularity_minutes)
    for day in working.days():
        if presence[(day.consumer_id, day.date.isoformat())] is PresenceLabel.PRESENT:
            pattern, _, _ = apply_cat(day, cat, None)
            if len(pattern.bits) >= n:
                return pattern.bits[-n:]
            reps = int(np.ceil(n / len(pattern.bits)))
            return np.tile(pattern.bits, reps)[-n:]
    return np.zeros(n, dtype=np.uint8)
