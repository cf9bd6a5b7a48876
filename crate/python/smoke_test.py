#!/usr/bin/env python3
"""Smoke test for the mrcast_py extension module.

Build the extension first:

    cargo build -p mrcast-py --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_extension():
    """Copy the built cdylib next to a temp dir under its import name."""
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libmrcast_py.so", "mrcast_py.so", "libmrcast_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "mrcast_py is not built; run `cargo build -p mrcast-py --release` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="mrcast-py-"))
    shutil.copy2(built, stage / "mrcast_py.so")
    sys.path.insert(0, str(stage))
    import mrcast_py

    return mrcast_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    m = load_extension()

    # Distribution toolkit.
    p = m.Pmf(["a", "b"], [0.6, 0.4])
    approx(m.entropy(p), 0.6730116670092565, 1e-12)
    q = m.Pmf(["a", "b"], [0.9, 0.1])
    approx(m.kl(q, m.Pmf(["a", "b"], [0.5, 0.5])), 0.3680642071684971, 1e-12)
    approx(m.tv(p, q), 0.3, 1e-12)
    approx(m.nats_to_bits(math.log(2.0)), 1.0, 1e-12)

    # Block decomposition of the two-block joint.
    joint = m.JointPmf(
        ["a", "b", "c"],
        ["d", "e", "f"],
        [[0.2, 0.2, 0.0], [0.1, 0.1, 0.0], [0.0, 0.0, 0.4]],
    )
    dec = m.gk_decompose(joint)
    assert dec.block_count == 2
    approx(dec.cgk_bits, 0.9709505944546686, 1e-12)
    assert dec.side1_labels == [0, 0, 1]
    approx(sum(dec.p_c), 1.0, 1e-12)
    approx(joint.mutual_information(), 0.6730116670092565, 1e-12)

    # Shared stream determinism.
    s1 = m.SharedStream(42, "demo")
    s2 = m.SharedStream(42, "demo")
    assert [s1.next_u64() for _ in range(5)] == [s2.next_u64() for _ in range(5)]

    # Single-stage round trip and the exact selected law.
    prior = m.Pmf(["a", "b"], [0.5, 0.5])
    target = m.Pmf(["a", "b"], [0.9, 0.1])
    idx, symbol, bits = m.mrc_round_trip(7, "rt", target, prior, 4)
    assert 1 <= idx <= 4 and symbol in ("a", "b")
    approx(bits, 2.0, 1e-12)
    law = m.exact_selected_law_mrc(target, prior, 2)
    approx(law[0], 0.7, 1e-12)
    approx(law[1], 0.3, 1e-12)

    est = m.mrc_estimate(5, "est", target, prior, [1.0, 0.0], 2048, 2000)
    assert abs(est - 0.9) < 0.05, est

    # Two-stage law on a degenerate partition equals the single-stage law.
    part = m.Partition(["a", "b"], [0, 0])
    hier = m.exact_selected_law_hier(target, prior, part, 3, [2])
    flat = m.exact_selected_law_mrc(target, prior, 2)
    for x, y in zip(hier, flat):
        approx(x, y, 1e-12)

    # Bounds.
    approx(m.epsilon(prior, prior, 4.0), math.exp(-0.5), 1e-12)
    bound, confidence, vacuous = m.bias_bound(q, prior, [1.0, 0.0], 13.0)
    assert confidence > 0.5 and not vacuous

    p_c = m.Pmf(["0", "1"], [0.6, 0.4])
    q_c = m.Pmf(["0", "1"], [0.2, 0.8])
    approx(m.avg_complexity(p_c, q_c, 4, [3, 5]), 16.266666666666666, 1e-9)

    # A full scenario run straight from the shipped file.
    report = json.loads(
        m.run_scenario_file(str(ROOT / "scenarios" / "block_example.toml"), trials=1)
    )
    naive_bits = report["body"]["comparison"]["total_bits_a"]
    hier_bits = report["body"]["comparison"]["total_bits_b"]
    assert hier_bits < naive_bits, (hier_bits, naive_bits)

    print("mrcast_py smoke test passed")
    print(f"  C_GK of the block example: {dec.cgk_bits:.4f} bits")
    print(f"  broadcast run: {hier_bits:.0f} bits vs naive {naive_bits:.0f} bits")


if __name__ == "__main__":
    main()
