"""Synthesizing labeled traffic: periodic broadcasts plus attack injection.

Each id in the pool broadcasts at its own period with bounded jitter, which
is how real ECUs behave. The four injectors then overlay attacks on the
stream; every injected frame carries its kind as ground truth.
"""

from canids import (
    AttackKind,
    AttackSpec,
    NormalTrafficSpec,
    default_id_pool,
    generate_normal,
    mix_attacks,
)

# 12 ids with harmonically related periods, 5% jitter, fully seeded.
spec = NormalTrafficSpec(
    id_pool=default_id_pool(12, base_period_us=1000, jitter=0.05),
    message_count=40_000,
    seed=7,
)
stream = generate_normal(spec)
duration = stream.frames[-1].timestamp_us
print(f"normal stream: {len(stream.frames)} frames over {duration / 1e6:.2f} s")

# Lay out one window per attack kind. Intensity is the injected-to-existing
# frame ratio inside the window; replay instead copies an earlier segment.
t = duration + 1
present_ids = sorted({f.arbitration_id for f in stream.frames})
specs = [
    AttackSpec(AttackKind.DOS, int(0.10 * t), int(0.25 * t), intensity=1.0),
    AttackSpec(AttackKind.FUZZY, int(0.30 * t), int(0.45 * t), intensity=0.5),
    AttackSpec(AttackKind.SPOOFING, int(0.50 * t), int(0.65 * t), intensity=1.0,
               target_ids=(present_ids[-1],)),
    AttackSpec(AttackKind.REPLAY, int(0.75 * t), int(0.90 * t),
               src_start_us=int(0.10 * t), src_end_us=int(0.25 * t)),
]
attacked = mix_attacks(stream, specs, seed=7)

print(f"after injection: {len(attacked.frames)} frames")
for record in attacked.manifest.attacks:
    span = (record.end_us - record.start_us) / 1e6
    print(f"  {record.kind:9s} +{record.injected:6d} frames over {span:.2f} s")

# The manifest serializes to JSON so experiments can be replayed exactly.
print("\nmanifest preview:")
print("\n".join(attacked.manifest.to_json().splitlines()[:6]) + "\n  ...")

# Label soundness: a frame is labeled iff an injector created it.
injected = sum(1 for f in attacked.frames if f.label is not None)
assert injected == len(attacked.frames) - len(stream.frames)
print(f"\nconservation check: {len(stream.frames)} normal + {injected} injected")
