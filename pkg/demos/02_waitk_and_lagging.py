"""Wait-k schedules and the average lagging metric.

A wait-k policy reads k segments, then alternates write/read. Its
average lagging on an equal-length pair is exactly k segment durations,
which makes it a good calibration point for the metric.
"""

from simulstream import (
    DelayProfile,
    average_lagging,
    consumed_before_write,
    encode_trace,
    wait_k_mask,
    wait_k_trace,
)


def main() -> None:
    m = n = 6
    seg_ms = 500.0
    for k in (1, 2, 4, 6):
        trace = wait_k_trace(k, m, n)
        g = consumed_before_write(trace)
        profile = DelayProfile(tuple(x * seg_ms for x in g), m * seg_ms)
        al = average_lagging(profile, n)
        print(f"k={k}: trace {encode_trace(trace)}")
        print(f"      consumed-before-write {g}, AL {al:.0f} ms (= {k} segments)")

    print("\nwait-2 attention mask (rows: outputs, cols: visible segments):")
    for row in wait_k_mask(2, m, n):
        print("      " + "".join("#" if v else "." for v in row))

    offline = DelayProfile((m * seg_ms,) * n, m * seg_ms)
    print(f"\noffline policy AL = {average_lagging(offline, n):.0f} ms = full source duration")


if __name__ == "__main__":
    main()
