"""A tour of the temporal prior: the soft band that encodes "actions
happen in order, roughly evenly spaced".

Entry (i, j) weights how plausible it is that frame i of B belongs to
cluster j of K, measured purely by relative position: a Gaussian in the
normalized distance |i/B - j/K|. Sigma controls how wide the band is.
Nothing here looks at features; the prior is pure schedule.

Run:  python3 demos/01_temporal_prior.py
"""

import numpy as np

from totseg.transport import temporal_prior

SHADES = " .:-=+*#%@"


def heatmap(matrix: np.ndarray) -> str:
    """Rows of shade characters, darkest where the matrix is largest."""
    scaled = matrix / matrix.max()
    rows = []
    for row in scaled:
        idx = np.minimum((row * len(SHADES)).astype(int), len(SHADES) - 1)
        rows.append("".join(SHADES[i] for i in idx))
    return "\n".join(rows)


def main() -> None:
    frames, clusters = 16, 4

    print(f"Prior over {frames} frames x {clusters} clusters, three widths.\n")
    for sigma in (0.5, 1.0, 2.5):
        prior = temporal_prior(frames, clusters, sigma)
        print(f"sigma = {sigma}   (each row is one frame, columns are clusters)")
        print(heatmap(prior))
        print()

    print("With a narrow band the assignment is nearly hard: each frame's")
    print("largest prior entry walks the staircase from cluster 0 to K-1:\n")
    prior = temporal_prior(frames, clusters, 0.5)
    staircase = np.argmax(prior, axis=1)
    print("  frame:   " + " ".join(f"{i:2d}" for i in range(frames)))
    print("  cluster: " + " ".join(f"{c:2d}" for c in staircase))

    print()
    print("A wide band barely prefers any cluster, so training with large")
    print("sigma approaches plain balanced assignment. The ratio between the")
    print("largest and smallest entry of the prior makes that concrete:")
    for sigma in (0.5, 1.0, 2.5, 10.0):
        prior = temporal_prior(frames, clusters, sigma)
        print(f"  sigma {sigma:5.1f}: max/min = {prior.max() / prior.min():9.3f}")


if __name__ == "__main__":
    main()
