"""Synthetic CAN traffic with labeled attack injection.

Normal traffic models periodic ECU broadcasts: every id in the pool emits at
its own period with bounded uniform jitter, payload bytes drawn from the
seeded generator. Injectors overlay the four attack classes on a stream:

* dos      - floods a highest-priority id (default 0x000, zero payload)
* fuzzy    - random 11-bit ids with random payloads of random length
* spoofing - reuses legitimate target ids with an attacker payload
* replay   - re-emits a copied earlier segment, spacing preserved exactly

All generation is deterministic per seed (PCG64 streams). Output frames are
sorted by timestamp with a stable tie-break: frames already in the stream
precede newly injected ones, and injected frames keep their insertion order.
Every injected frame carries its attack kind as an inline label, so window
labels can be derived without side tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .can_log import AttackKind, CanFrame
from .kernel import make_rng

DEFAULT_FLOOD_ID = 0x000
DEFAULT_SPOOF_PAYLOAD = b"\xff" * 8
STANDARD_ID_SPACE = 0x800


class SynthError(ValueError):
    """Base class for traffic synthesis errors."""


class EmptyIdPool(SynthError):
    pass


class WindowOutsideStream(SynthError):
    pass


class TargetIdAbsent(SynthError):
    pass


class SourceAfterInjection(SynthError):
    pass


class EmptySourceSegment(SynthError):
    pass


@dataclass
class NormalTrafficSpec:
    """Periodic broadcast schedule for attack-free traffic.

    id_pool entries are (arbitration_id, period_us, jitter_fraction); each id
    emits at offsets k * period + U[0, jitter * period). Exactly one of
    message_count (total frames across all ids) or duration_us must be set.
    """

    id_pool: Sequence[tuple[int, int, float]]
    message_count: int | None = None
    duration_us: int | None = None
    seed: int = 0
    dlc: int = 8

    def __post_init__(self):
        if not self.id_pool:
            raise EmptyIdPool("id_pool must not be empty")
        for arb_id, period, jitter in self.id_pool:
            if period <= 0:
                raise SynthError(f"period {period} for id 0x{arb_id:x} must be > 0")
            if not 0.0 <= jitter < 1.0:
                raise SynthError(f"jitter {jitter} for id 0x{arb_id:x} not in [0, 1)")
        if (self.message_count is None) == (self.duration_us is None):
            raise SynthError("set exactly one of message_count or duration_us")
        if self.message_count is not None and self.message_count < 0:
            raise SynthError("message_count must be >= 0")
        if self.duration_us is not None and self.duration_us <= 0:
            raise SynthError("duration_us must be > 0")


@dataclass
class AttackSpec:
    """One attack injection: kind, time window, rate, kind-specific knobs.

    intensity is the injected-to-existing frame ratio inside [start, end); 0
    is allowed and makes the injector a no-op. Replay copies the source
    segment [src_start_us, src_end_us) once (intensity is not used) and
    requires it to end before the injection starts.
    """

    kind: AttackKind
    start_us: int
    end_us: int
    intensity: float = 1.0
    flood_id: int = DEFAULT_FLOOD_ID
    target_ids: tuple[int, ...] = ()
    src_start_us: int | None = None
    src_end_us: int | None = None
    spoof_payload: bytes = DEFAULT_SPOOF_PAYLOAD

    def __post_init__(self):
        if self.start_us >= self.end_us:
            raise SynthError(f"attack window [{self.start_us}, {self.end_us}) is empty")
        if self.intensity < 0:
            raise SynthError(f"intensity {self.intensity} must be >= 0")
        if self.kind is AttackKind.REPLAY:
            if self.src_start_us is None or self.src_end_us is None:
                raise SynthError("replay needs src_start_us and src_end_us")
            if self.src_start_us >= self.src_end_us:
                raise EmptySourceSegment("replay source segment is empty")
            if self.src_end_us > self.start_us:
                raise SourceAfterInjection(
                    "replay source segment must end before the injection starts"
                )


@dataclass
class AttackRecord:
    kind: str
    start_us: int
    end_us: int
    injected: int


@dataclass
class StreamManifest:
    """Ground truth for one synthetic stream: seed, counts, attack windows."""

    seed: int
    normal_frames: int
    total_frames: int
    attacks: list[AttackRecord] = field(default_factory=list)

    def counts_by_kind(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.attacks:
            counts[rec.kind] = counts.get(rec.kind, 0) + rec.injected
        return counts

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "normal_frames": self.normal_frames,
                "total_frames": self.total_frames,
                "attacks": [vars(rec) for rec in self.attacks],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "StreamManifest":
        raw = json.loads(text)
        return cls(
            seed=raw["seed"],
            normal_frames=raw["normal_frames"],
            total_frames=raw["total_frames"],
            attacks=[AttackRecord(**rec) for rec in raw["attacks"]],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "StreamManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class LabeledStream:
    """Time-ordered frames plus the manifest describing how they were made."""

    frames: list[CanFrame]
    manifest: StreamManifest


def default_id_pool(
    num_ids: int,
    base_period_us: int = 1000,
    jitter: float = 0.05,
    first_id: int = 0x100,
) -> list[tuple[int, int, float]]:
    """A plausible ECU schedule: harmonic periods over distinct ids."""
    multipliers = [1, 2, 3, 4, 6, 8, 12, 16]
    pool = []
    for i in range(num_ids):
        mult = multipliers[i % len(multipliers)] * (1 + i // len(multipliers))
        pool.append((first_id + 0x10 * i, base_period_us * mult, jitter))
    return pool


def _frames_from_arrays(ts, ids, payload_rows, labels=None, dlcs=None) -> list[CanFrame]:
    frames = []
    ts_list = ts.tolist()
    id_list = ids.tolist() if not isinstance(ids, list) else ids
    for i, (t, arb_id) in enumerate(zip(ts_list, id_list)):
        dlc = 8 if dlcs is None else dlcs[i]
        frames.append(
            CanFrame(
                timestamp_us=t,
                arbitration_id=arb_id,
                dlc=dlc,
                payload=bytes(payload_rows[i, :dlc]),
                label=labels,
            )
        )
    return frames


def generate_normal(spec: NormalTrafficSpec) -> LabeledStream:
    """Deterministic attack-free stream following the spec's schedules."""
    rng = make_rng(spec.seed)

    if spec.duration_us is not None:
        horizon = spec.duration_us
    else:
        total_rate = sum(1.0 / p for _, p, _ in spec.id_pool)
        # enough headroom that truncation to message_count always succeeds
        horizon = int(spec.message_count / total_rate * 1.25) + 2 * max(
            p for _, p, _ in spec.id_pool
        )

    ts_parts = []
    id_parts = []
    for arb_id, period, jitter in spec.id_pool:
        n = horizon // period + 1
        base = np.arange(n, dtype=np.int64) * period
        if jitter > 0:
            base = base + (rng.random(n) * jitter * period).astype(np.int64)
        ts_parts.append(base)
        id_parts.append(np.full(n, arb_id, dtype=np.int64))

    ts = np.concatenate(ts_parts)
    ids = np.concatenate(id_parts)
    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    ids = ids[order]

    if spec.duration_us is not None:
        keep = ts < spec.duration_us
        ts, ids = ts[keep], ids[keep]
    else:
        if len(ts) < spec.message_count:
            raise SynthError("schedule horizon too short; file a bug")
        ts, ids = ts[: spec.message_count], ids[: spec.message_count]

    payloads = rng.integers(0, 256, size=(len(ts), spec.dlc), dtype=np.uint8)
    frames = _frames_from_arrays(ts, ids, payloads)
    manifest = StreamManifest(
        seed=spec.seed, normal_frames=len(frames), total_frames=len(frames)
    )
    return LabeledStream(frames=frames, manifest=manifest)


def _window_frame_count(stream: LabeledStream, spec: AttackSpec) -> int:
    """Frames inside the attack window; validates the window touches the stream."""
    frames = stream.frames
    if not frames or spec.end_us <= frames[0].timestamp_us or spec.start_us > frames[-1].timestamp_us:
        raise WindowOutsideStream(
            f"attack window [{spec.start_us}, {spec.end_us}) does not overlap the stream"
        )
    return sum(1 for f in frames if spec.start_us <= f.timestamp_us < spec.end_us)


def _merged(stream: LabeledStream, injected: list[CanFrame], spec: AttackSpec) -> LabeledStream:
    """Stable merge: existing frames win timestamp ties against injected ones."""
    frames = sorted(stream.frames + injected, key=lambda f: f.timestamp_us)
    manifest = StreamManifest(
        seed=stream.manifest.seed,
        normal_frames=stream.manifest.normal_frames,
        total_frames=stream.manifest.total_frames + len(injected),
        attacks=stream.manifest.attacks
        + [AttackRecord(spec.kind.value, spec.start_us, spec.end_us, len(injected))],
    )
    return LabeledStream(frames=frames, manifest=manifest)


def _injection_times(rng, spec: AttackSpec, count: int) -> np.ndarray:
    return np.sort(rng.integers(spec.start_us, spec.end_us, size=count, dtype=np.int64))


def inject_dos(stream: LabeledStream, spec: AttackSpec, rng=0) -> LabeledStream:
    """Flood the window with the highest-priority id; zero payload, dlc 8."""
    if spec.kind is not AttackKind.DOS:
        raise SynthError(f"spec kind is {spec.kind}, expected dos")
    count = round(spec.intensity * _window_frame_count(stream, spec))
    rng = make_rng(rng)
    ts = _injection_times(rng, spec, count)
    payloads = np.zeros((count, 8), dtype=np.uint8)
    injected = _frames_from_arrays(
        ts, [spec.flood_id] * count, payloads, labels=AttackKind.DOS
    )
    return _merged(stream, injected, spec)


def inject_fuzzy(stream: LabeledStream, spec: AttackSpec, rng=0) -> LabeledStream:
    """Inject frames with uniform-random 11-bit ids and random payloads."""
    if spec.kind is not AttackKind.FUZZY:
        raise SynthError(f"spec kind is {spec.kind}, expected fuzzy")
    count = round(spec.intensity * _window_frame_count(stream, spec))
    rng = make_rng(rng)
    ts = _injection_times(rng, spec, count)
    ids = rng.integers(0, STANDARD_ID_SPACE, size=count, dtype=np.int64)
    dlcs = rng.integers(0, 9, size=count).tolist()
    payloads = rng.integers(0, 256, size=(count, 8), dtype=np.uint8)
    injected = _frames_from_arrays(ts, ids, payloads, labels=AttackKind.FUZZY, dlcs=dlcs)
    return _merged(stream, injected, spec)


def inject_spoofing(stream: LabeledStream, spec: AttackSpec, rng=0) -> LabeledStream:
    """Reuse legitimate target ids with an attacker-chosen payload."""
    if spec.kind is not AttackKind.SPOOFING:
        raise SynthError(f"spec kind is {spec.kind}, expected spoofing")
    if not spec.target_ids:
        raise TargetIdAbsent("spoofing needs a non-empty target_ids list")
    present = {f.arbitration_id for f in stream.frames}
    missing = [t for t in spec.target_ids if t not in present]
    if missing:
        raise TargetIdAbsent(
            f"target ids {[hex(t) for t in missing]} do not appear in the stream"
        )
    count = round(spec.intensity * _window_frame_count(stream, spec))
    rng = make_rng(rng)
    ts = _injection_times(rng, spec, count)
    ids = rng.choice(np.asarray(spec.target_ids, dtype=np.int64), size=count)
    payload_row = np.frombuffer(spec.spoof_payload, dtype=np.uint8)
    payloads = np.tile(payload_row, (count, 1))
    injected = _frames_from_arrays(
        ts, ids, payloads, labels=AttackKind.SPOOFING,
        dlcs=[len(spec.spoof_payload)] * count,
    )
    return _merged(stream, injected, spec)


def inject_replay(stream: LabeledStream, spec: AttackSpec, rng=None) -> LabeledStream:
    """Copy the source segment into the attack window, spacing preserved.

    Replayed frames land at start_us + (ts - src_start_us), so inter-frame
    gaps match the source exactly. rng is accepted for signature uniformity
    but unused; replay is a pure copy.
    """
    if spec.kind is not AttackKind.REPLAY:
        raise SynthError(f"spec kind is {spec.kind}, expected replay")
    source = [
        f for f in stream.frames
        if spec.src_start_us <= f.timestamp_us < spec.src_end_us
    ]
    if not source:
        raise EmptySourceSegment(
            f"no frames in source segment [{spec.src_start_us}, {spec.src_end_us})"
        )
    shift = spec.start_us - spec.src_start_us
    injected = [
        CanFrame(
            timestamp_us=f.timestamp_us + shift,
            arbitration_id=f.arbitration_id,
            dlc=f.dlc,
            payload=f.payload,
            label=AttackKind.REPLAY,
            extended=f.extended,
        )
        for f in source
    ]
    return _merged(stream, injected, spec)


_INJECTORS = {
    AttackKind.DOS: inject_dos,
    AttackKind.FUZZY: inject_fuzzy,
    AttackKind.SPOOFING: inject_spoofing,
    AttackKind.REPLAY: inject_replay,
}


def inject(stream: LabeledStream, spec: AttackSpec, rng=0) -> LabeledStream:
    """Dispatch to the injector for spec.kind."""
    return _INJECTORS[spec.kind](stream, spec, rng)


def mix_attacks(
    stream: LabeledStream, specs: Sequence[AttackSpec], seed: int = 0
) -> LabeledStream:
    """Apply injectors in spec order with independent per-spec PCG64 streams."""
    children = np.random.SeedSequence(seed).spawn(len(specs))
    out = stream
    for spec, child in zip(specs, children):
        out = inject(out, spec, make_rng(child))
    return out
