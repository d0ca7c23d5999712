#!/usr/bin/env python3
"""Generates sync_tables.dat: PSS Zadoff-Chu roots, the three length-31
m-sequences behind the SSS, and the (m0, m1) index pair for every N_ID_1."""


def mseq(taps):
    x = [0, 0, 0, 0, 1]
    for i in range(26):
        x.append(sum(x[i + t] for t in taps) % 2)
    return x


def main():
    s = mseq([2, 0])
    c = mseq([3, 0])
    z = mseq([4, 2, 1, 0])
    lines = [
        "# PSS roots and SSS building blocks. Generated by gen_sync_tables.py.",
        "# pss_root <n_id_2> <root>",
        "# x_s / x_c / x_z: 31-bit m-sequences x(0..30) for s~, c~, z~ (value = 1 - 2x)",
        "# m <n_id_1> <m0> <m1>",
    ]
    for n2, root in enumerate([25, 29, 34]):
        lines.append(f"pss_root {n2} {root}")
    for name, seq in (("x_s", s), ("x_c", c), ("x_z", z)):
        lines.append(f"{name} " + "".join(map(str, seq)))
    for n1 in range(168):
        qp = n1 // 30
        q = (n1 + qp * (qp + 1) // 2) // 30
        mp = n1 + q * (q + 1) // 2
        m0 = mp % 31
        m1 = (m0 + mp // 31 + 1) % 31
        lines.append(f"m {n1} {m0} {m1}")
    with open("sync_tables.dat", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
