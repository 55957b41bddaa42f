"""A script that runs the composer with and without a substrate of games and
images, and compares how often it emits problems and what they look like.
"""
import tempfile
from dataclasses import replace

import numpy as np
from matplotlib import pyplot as plt
import seaborn as sns
from chessproblems import Archive, ComposerConfig, ConventionConfig, run
from chessproblems.composer import PieceSetSpec
from chessproblems.solver import SearchBudget
from chessproblems.substrate import (
    Substrate,
    compare_corpora,
    extract_from_games,
    extract_from_image,
    position_attributes,
)

# A handful of short games to draw position attributes from.
GAMES = [
    "1. f3 e5 2. g4 Qh4# 0-1",
    "1. e4 e5 2. Qh5 Nc6 3. Bc4 Nf6 4. Qxf7# 1-0",
    "1. d4 d5 2. c4 e6 3. Nc3 Nf6 4. Bg5 Be7 5. e3 O-O 6. Nf3 h6",
    "1. e4 c5 2. Nf3 d6 3. d4 cxd4 4. Nxd4 Nf6 5. Nc3 a6 6. Be2 e5",
]


def gradient_rasters(rng, n=12, size=32):
    """Return `n` grey rasters: noisy gradients of random direction and
    brightness.
    """
    rasters = []
    ii, jj = np.indices((size, size)) / (size - 1)
    for _ in range(n):
        angle = rng.uniform(0, np.pi)
        ramp = np.cos(angle) * ii + np.sin(angle) * jj
        level = rng.uniform(0.2, 0.8)
        noise = rng.normal(0, 0.05, size=(size, size))
        raster = np.clip(level + 0.5 * (ramp - 0.5) + noise, 0, 1)
        rasters.append((raster * 255).astype(np.uint8))
    return rasters


def run_arm(cfg, seeds, substrate):
    """Run the composer once per seed into a fresh archive. Returns the
    emissions per candidate of each run, and the attribute vectors of every
    emitted position.
    """
    rates = []
    emitted = []
    for seed in seeds:
        with tempfile.TemporaryDirectory() as directory:
            archive = Archive(directory)
            stats = run(replace(cfg, seed=seed), archive, substrate=substrate)
            rates.append(stats.emissions_per_candidate)
            emitted += [
                position_attributes(r.position().board())
                for r in archive.records()
            ]
        print("seed {}: {}".format(seed, stats))
    return rates, emitted


def main():
    """The main function, that runs both arms and plots the results.

    The control arm samples men uniformly, the substrate arm biases every
    candidate towards a blend of a game position and an image. Both arms use
    the same piece set, goals, conventions and seeds, so any difference in
    the emission rate or in the emitted positions comes from the bias alone.

    The emitted positions of the two arms are compared field by field with
    Welch's t-test, and the emission rates per seed are plotted side by side.
    """
    seeds = range(1, 9)
    cfg = ComposerConfig(
        piece_set=PieceSetSpec.parse("KRB", "K"),
        goals=(2, 3),
        conventions=ConventionConfig(require_no_cooks=False),
        max_candidates=400,
        per_solve=SearchBudget(max_nodes=100_000, max_seconds=10.0),
    )
    rng = np.random.default_rng(2017)
    substrate = Substrate(
        extract_from_games(GAMES),
        [extract_from_image(r) for r in gradient_rasters(rng)],
    )

    print("Control arm.")
    control_rates, control = run_arm(cfg, seeds, Substrate())
    print("Substrate arm.")
    substrate_rates, blended = run_arm(cfg, seeds, substrate)

    if len(control) >= 2 and len(blended) >= 2:
        for c in compare_corpora(control, blended):
            print(
                "{:<20} t = {:+.3f}, p = {:.3g}".format(
                    c.field, c.statistic, c.pvalue
                )
            )
    else:
        print("Too few emissions to compare the arms.")

    # The plotting. We use seaborn's default style.
    sns.set_style("darkgrid")
    sns.set_context("paper")
    plt.figure()
    x = np.arange(len(seeds))
    plt.bar(x - 0.2, control_rates, width=0.4, label="control")
    plt.bar(x + 0.2, substrate_rates, width=0.4, label="substrate")
    plt.xticks(x, list(seeds))
    plt.title("Emitted problems per candidate, with and without a substrate")
    plt.ylabel("Emissions per candidate")
    plt.xlabel("Seed")
    plt.legend()
    plt.savefig("latest_arm_comparison.pdf")


if __name__ == "__main__":
    main()
