"""Distilling an offline model's alignment into streaming supervision.

Probe an offline oracle with growing source prefixes and record, per
target token, the shortest prefix at which the reference token ranks
above threshold. The resulting table becomes both a schedule and a
prior over schedules; an auxiliary loss pulls attention mass into the
aligned segment.
"""

import numpy as np

from simulstream import (
    SyntheticRankOracle,
    SyntheticTaskSpec,
    aux_attention_loss,
    consumed_before_write,
    extract_offline_policy,
    generate_corpus,
    offline_label_prior,
    sample_trace_from_table,
)


def main() -> None:
    utt = generate_corpus(
        SyntheticTaskSpec(60, (8, 8), "random-monotone", noise_rate=0.5), 1, seed=6
    )[0]
    print(f"true alignment a*(j): {utt.oracle_alignment}")

    oracle = SyntheticRankOracle(utt.oracle_alignment)
    probes = [2, 4, 6, 8]
    table = extract_offline_policy(oracle, probes, r=1, tgt_len=utt.target_len)
    print(f"probes {probes} -> extracted prefixes L_j: {table.prefix_lengths}")

    prior = offline_label_prior(table, utt.source_len, utt.target_len)
    counts = np.zeros(utt.target_len)
    n = 2000
    for s in range(n):
        actions = sample_trace_from_table(prior, utt.source_len, utt.target_len, s)
        counts += consumed_before_write(actions)
    print(f"mean consumed-before-write under the prior: {np.round(counts / n, 2)}")

    row = np.array([0.05, 0.1, 0.25, 0.4, 0.15, 0.05, 0.0, 0.0])
    for lo, hi in ((2, 5), (0, 2), (5, 8)):
        loss = aux_attention_loss(row, (lo, hi))
        print(f"attention mass in segment ({lo}, {hi}]: loss {loss:+.2f}")


if __name__ == "__main__":
    main()
