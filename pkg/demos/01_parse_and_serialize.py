"""Parsing CAN logs: the line format, error handling, and round-trips.

A log line is whitespace-separated: decimal timestamp (seconds), hex
arbitration id, decimal DLC, then DLC payload bytes. Synthetic logs append
`#label=<kind>` to frames an injector created.
"""

import io

from canids import parse_line, parse_log, serialize_frame

# A few real-looking capture lines (integer-second timestamps, 8-byte data).
lines = """\
1478198376 0316 8 05 21 68 09 21 21 00 6f
1478198376 018f 8 fe 5b 00 00 00 3c 00 00
1478198376 0260 8 19 21 22 30 08 8e 6d 3a
"""

frames, report = parse_log(io.StringIO(lines))
print(f"parsed {report.frames_ok} frames, {len(report.errors)} errors")
for frame in frames:
    print(f"  id=0x{frame.arbitration_id:03x} dlc={frame.dlc} "
          f"payload={frame.payload.hex(' ')}")

# Timestamps are stored as integer microseconds, so comparisons are exact.
first = frames[0]
print(f"\ntimestamp: {first.timestamp_us} us = {first.timestamp_seconds} s")

# serialize_frame emits the canonical form; parse_line inverts it exactly.
line = serialize_frame(first)
assert parse_line(line) == first
print(f"canonical form: {line!r}")

# Labeled frames carry their attack kind inline.
labeled = parse_line("12.5 040 2 de ad #label=fuzzy")
print(f"\nlabeled frame: kind={labeled.label.value}, ts={labeled.timestamp_us} us")
print(f"round-trips to: {serialize_frame(labeled)!r}")

# Lenient parsing skips malformed lines but records them with line numbers;
# pass strict=True to abort on the first bad line instead.
dirty = "10 100 1 aa\nnot a can frame\n11 100 1 bb\n"
frames, report = parse_log(io.StringIO(dirty))
print(f"\nlenient parse of a dirty log: {report.frames_ok} ok, "
      f"errors at lines {[line_no for line_no, _, _ in report.errors]}")
