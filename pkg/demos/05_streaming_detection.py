"""Streaming detection: rolling-window verdicts with bounded memory.

The `canids detect` subcommand does exactly this over stdin or a file; here
the same loop runs in-process. Memory stays at one window of frames no
matter how long the stream runs.
"""

from collections import deque

from canids import (
    AttackKind,
    AttackSpec,
    NormalTrafficSpec,
    TrainConfig,
    build_graph,
    default_id_pool,
    generate_normal,
    graphs_from_frames,
    mix_attacks,
    predict,
    train,
)
from canids.can_log import format_timestamp

WINDOW = 200
STRIDE = 200

# Train a detector on a labeled fuzzing capture.
spec = NormalTrafficSpec(
    id_pool=default_id_pool(10, base_period_us=1000), message_count=60_000, seed=5
)
stream = generate_normal(spec)
t = stream.frames[-1].timestamp_us + 1
stream = mix_attacks(
    stream,
    [AttackSpec(AttackKind.FUZZY, int(0.3 * t), int(0.7 * t), intensity=0.5)],
    seed=9,
)
params, _ = train(graphs_from_frames(stream.frames), TrainConfig(seed=0))

# Now watch a "live" stream: a rolling buffer of the last WINDOW frames,
# one verdict every STRIDE frames once the buffer has filled.
buffer: deque = deque(maxlen=WINDOW)
frames_seen = 0
verdicts = []
for frame in stream.frames:
    buffer.append(frame)
    frames_seen += 1
    if frames_seen >= WINDOW and (frames_seen - WINDOW) % STRIDE == 0:
        graph = build_graph(buffer, window_index=len(verdicts))
        label, prob = predict(graph, params)
        verdicts.append((graph.window_index, buffer[0].timestamp_us,
                         buffer[-1].timestamp_us, label, prob))

print(f"{frames_seen} frames -> {len(verdicts)} verdicts "
      f"(buffer never holds more than {WINDOW} frames)")
print("\nindex  first_ts    last_ts     verdict      p(attacked)")
for index, first_ts, last_ts, label, prob in verdicts[:: len(verdicts) // 12]:
    kind = "attacked" if label else "attack_free"
    print(f"{index:5d}  {format_timestamp(first_ts):>10s}  "
          f"{format_timestamp(last_ts):>10s}  {kind:11s}  {prob:.4f}")

flagged = sum(1 for v in verdicts if v[3])
print(f"\nflagged {flagged}/{len(verdicts)} windows; attack ran from "
      f"{0.3 * t / 1e6:.1f}s to {0.7 * t / 1e6:.1f}s")
print("\nequivalent CLI: canids detect --model model.bin --log - < live.log")
