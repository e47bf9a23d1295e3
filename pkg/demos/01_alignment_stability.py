"""Why the expected-alignment recurrence needs the renormalized form.

The division form evaluates each row in parallel by dividing through the
survival product of the previous column. Once that product underflows
its guard on long low-probability inputs, the division amplifies the
clipped value and the "probabilities" explode. The renormalized form
walks the same recurrence sequentially and never divides.
"""

import numpy as np

from simulstream import (
    enumerate_alignment_oracle,
    expected_alignment_div,
    expected_alignment_stable,
    spiky_low_probability_matrix,
)


def main() -> None:
    # small case first: all three evaluations agree with exact enumeration
    p = np.array([[0.5, 1.0], [0.5, 1.0]])
    exact = enumerate_alignment_oracle(p)
    print("2x2 selection matrix, exact expected alignment:")
    print(exact)
    print("stable form max error:", np.abs(expected_alignment_stable(p) - exact).max())
    print("division form max error:", np.abs(expected_alignment_div(p) - exact).max())

    # the documented witness: 200x200, tiny probabilities with rare spikes
    witness = spiky_low_probability_matrix(200, 200, seed=32)
    div = expected_alignment_div(witness)
    stable = expected_alignment_stable(witness)
    print("\n200x200 witness (seed 32):")
    print(f"  division form: max entry {np.abs(div).max():.4g}  (a probability!)")
    print(f"  stable form:   max entry {stable.max():.4g}")
    print(f"  stable row-sum error: {np.abs(stable.sum(axis=1) - 1.0).max():.2e}")
    print("\nThe division form left [0, 1]; the stable form stayed a distribution.")


if __name__ == "__main__":
    main()
