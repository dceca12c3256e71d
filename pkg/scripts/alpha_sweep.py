#!/usr/bin/env python3
"""Sweep the fixed-share parameter on one synthetic rotating-leader stream
and print final losses for both aggregation rules, normalized by the
averaging rule at alpha=0."""

import argparse

from crpsmix.data import default_generators, rotating_leader_schedule, synth_stream
from crpsmix.experts import triangular_cdf
from crpsmix.game import GameConfig, OnlineGame
from crpsmix.grids import GridDomain

ALPHAS = (0.0, 0.0001, 0.001, 0.005, 0.01, 0.05, 0.1, 0.2)


def final_loss(domain, cdfs, outcomes, mode, alpha):
    game = OnlineGame(GameConfig(domain, mode=mode, alpha=alpha), len(cdfs))
    for y in outcomes:
        game.step(cdfs, y)
    return float(game.log.learner_cumulative()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--segments", type=int, default=6)
    ap.add_argument("--grid", type=int, default=256)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    domain = GridDomain(0.0, 1.0, args.grid)
    gens = default_generators()
    cdfs = [triangular_cdf(g, domain) for g in gens]
    schedule = rotating_leader_schedule(args.steps, len(gens), args.segments)
    outcomes = synth_stream(gens, schedule, args.steps, args.seed)

    base = final_loss(domain, cdfs, outcomes, "wa", 0.0)
    print(f"stream: T={args.steps}, segments={args.segments}, seed={args.seed}; "
          f"normalizer (wa, alpha=0): {base:.4f}")
    header = "alpha".ljust(8) + "".join(f"{a:>10g}" for a in ALPHAS)
    print(header)
    for mode in ("aa", "wa"):
        row = mode.ljust(8)
        for alpha in ALPHAS:
            row += f"{final_loss(domain, cdfs, outcomes, mode, alpha) / base:>10.3f}"
        print(row)


if __name__ == "__main__":
    main()
