"""One-step and two-step multiscale bootstrap sampling.

Replicates are drawn from the parametric normal model: Y* ~ N(y, sigma^2 I)
at each scale, and in two-step mode one second-step draw per replicate,
Y** = Y* + sqrt(tau^2 - sigma^2) Z.  Counts of region membership (C for Y*,
D for Y**, E for both) feed the binomial and four-category likelihoods.

Randomness comes from counter-based Philox streams keyed by (seed, scale
index): scales can be sampled independently or in parallel without stream
overlap, and the per-replicate position is the counter offset within the
stream, so results are bit-reproducible from the recorded seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidParameterError
from .regions import Region, label_points

__all__ = [
    "ScaleGrid",
    "MultiscaleCounts",
    "default_scale_grid",
    "sample_counts",
    "complement_counts",
    "counts_to_csv",
    "counts_from_csv",
    "TARGETS",
]

# target name -> set of partition labels counted as "in"
TARGETS = {
    "H0": (0,),
    "H0p": (0, 2),  # H0' = H0 union H2, the two-region view
    "H1": (1,),
    "H2": (2,),
}


@dataclass(frozen=True)
class ScaleGrid:
    """Scales sigma2_i (strictly increasing), optional tau2_i, replicate counts B_i."""

    sigma2: tuple[float, ...]
    tau2: tuple[float, ...] | None
    replicates: tuple[int, ...]

    def __post_init__(self):
        m = len(self.sigma2)
        if m < 2:
            raise InvalidParameterError("need at least 2 scales")
        s = np.asarray(self.sigma2, dtype=float)
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise InvalidParameterError("sigma2 values must be positive and strictly increasing")
        if self.tau2 is not None:
            t = np.asarray(self.tau2, dtype=float)
            if len(self.tau2) != m or np.any(t <= s):
                raise InvalidParameterError("two-step mode requires tau2_i > sigma2_i for all i")
        if len(self.replicates) != m or any(b < 1 for b in self.replicates):
            raise InvalidParameterError("replicates must be positive, one per scale")

    @property
    def n_scales(self) -> int:
        return len(self.sigma2)

    @property
    def two_step(self) -> bool:
        return self.tau2 is not None

    @property
    def all_sigmas(self) -> np.ndarray:
        """Every sigma the models get evaluated at (sigma_i and tau_i)."""
        s = np.sqrt(np.asarray(self.sigma2))
        if self.tau2 is None:
            return s
        return np.concatenate([s, np.sqrt(np.asarray(self.tau2))])


def default_scale_grid(
    two_step: bool = True,
    n_scales: int = 13,
    sigma_min: float = 1.0 / 3.0,
    sigma_max: float = 3.0,
    b: int = 10000,
) -> ScaleGrid:
    """13 sigmas log-spaced on [1/3, 3]; tau_i^2 = sigma_i^2 + 1 in two-step mode."""
    sigma = np.geomspace(sigma_min, sigma_max, n_scales)
    sigma2 = tuple(float(s * s) for s in sigma)
    tau2 = tuple(s2 + 1.0 for s2 in sigma2) if two_step else None
    return ScaleGrid(sigma2=sigma2, tau2=tau2, replicates=(int(b),) * n_scales)


@dataclass(frozen=True)
class MultiscaleCounts:
    """Per-scale membership counts with the seed they were drawn from.

    In one-step mode D and E are all zero and only C is meaningful.
    """

    sigma2: tuple[float, ...]
    tau2: tuple[float, ...] | None
    b: tuple[int, ...]
    c: tuple[int, ...]
    d: tuple[int, ...]
    e: tuple[int, ...]
    mode: str  # "one-step" | "two-step"
    seed: int
    target: str

    def __post_init__(self):
        if self.mode not in ("one-step", "two-step"):
            raise InvalidParameterError(f"bad mode {self.mode!r}")
        m = len(self.sigma2)
        for name in ("b", "c", "d", "e"):
            if len(getattr(self, name)) != m:
                raise InvalidParameterError(f"count array {name} has wrong length")
        for i in range(m):
            bi, ci, di, ei = self.b[i], self.c[i], self.d[i], self.e[i]
            ok = (
                0 <= ei <= min(ci, di)
                and ci <= bi
                and di <= bi
                and ci + di - ei <= bi
            )
            if not ok:
                raise InvalidParameterError(
                    f"inconsistent counts at scale {i}: B={bi} C={ci} D={di} E={ei}"
                )

    @property
    def n_scales(self) -> int:
        return len(self.sigma2)

    def arrays(self):
        """(sigma2, tau2, B, C, D, E) as float/int arrays; tau2 None in one-step."""
        tau2 = None if self.tau2 is None else np.asarray(self.tau2)
        return (
            np.asarray(self.sigma2),
            tau2,
            np.asarray(self.b),
            np.asarray(self.c),
            np.asarray(self.d),
            np.asarray(self.e),
        )

    def grid(self) -> ScaleGrid:
        return ScaleGrid(sigma2=self.sigma2, tau2=self.tau2, replicates=self.b)


def _scale_stream(seed: int, scale_index: int) -> np.random.Generator:
    key = np.array([np.uint64(seed % (1 << 64)), np.uint64(scale_index)])
    return np.random.Generator(np.random.Philox(key=key))


def sample_counts(
    region: Region,
    y,
    grid: ScaleGrid,
    seed: int,
    target: str = "H0",
) -> MultiscaleCounts:
    """Draw the multiscale bootstrap replicates and tally membership counts.

    `target` picks which part of the partition counts as a hit: "H0", "H1",
    "H2", or "H0p" for the two-region view H0' = H0 union H2.  Different
    targets with the same seed reuse identical draws, so counts over the
    three labels add up to B exactly.
    """
    if target not in TARGETS:
        raise ConfigError(f"target must be one of {sorted(TARGETS)}, got {target!r}")
    y = np.asarray(y, dtype=float)
    labels_in = TARGETS[target]
    two_step = grid.two_step
    dim = region.ambient_dim
    if y.shape != (dim,):
        raise ConfigError(f"y must have shape ({dim},) for this region, got {y.shape}")

    if labels_in == (0, 2):
        in_target = lambda lab: lab != 1
    else:
        only = labels_in[0]
        in_target = lambda lab: lab == only

    cs, ds, es = [], [], []
    for i in range(grid.n_scales):
        b_i = grid.replicates[i]
        sigma = np.sqrt(grid.sigma2[i])
        gen = _scale_stream(seed, i)
        y_star = y[None, :] + sigma * gen.standard_normal((b_i, dim))
        in1 = in_target(label_points(region, y_star))
        cs.append(int(in1.sum()))
        if two_step:
            step = np.sqrt(grid.tau2[i] - grid.sigma2[i])
            y_star2 = y_star + step * gen.standard_normal((b_i, dim))
            in2 = in_target(label_points(region, y_star2))
            ds.append(int(in2.sum()))
            es.append(int((in1 & in2).sum()))
        else:
            ds.append(0)
            es.append(0)

    return MultiscaleCounts(
        sigma2=grid.sigma2,
        tau2=grid.tau2,
        b=tuple(int(b) for b in grid.replicates),
        c=tuple(cs),
        d=tuple(ds),
        e=tuple(es),
        mode="two-step" if two_step else "one-step",
        seed=int(seed),
        target=target,
    )


def complement_counts(counts: MultiscaleCounts) -> MultiscaleCounts:
    """Counts for the complementary region from the same draws.

    A replicate pair is in the complement of the target exactly when it is
    not in the target, so C' = B - C, D' = B - D, E' = B - C - D + E.
    """
    b = np.asarray(counts.b)
    c = np.asarray(counts.c)
    d = np.asarray(counts.d)
    e = np.asarray(counts.e)
    if counts.mode == "two-step":
        d_new = b - d
        e_new = b - c - d + e
    else:
        d_new = np.zeros_like(b)
        e_new = np.zeros_like(b)
    return MultiscaleCounts(
        sigma2=counts.sigma2,
        tau2=counts.tau2,
        b=counts.b,
        c=tuple(int(v) for v in (b - c)),
        d=tuple(int(v) for v in d_new),
        e=tuple(int(v) for v in e_new),
        mode=counts.mode,
        seed=counts.seed,
        target=f"not-{counts.target}",
    )


_CSV_FIELDS = ["scale_index", "sigma2", "tau2", "B", "C", "D", "E"]


def counts_to_csv(counts: MultiscaleCounts) -> str:
    """Serialize counts to CSV text with metadata comment lines."""
    buf = io.StringIO()
    buf.write(f"# mode={counts.mode} seed={counts.seed} target={counts.target}\n")
    writer = csv.writer(buf)
    writer.writerow(_CSV_FIELDS)
    for i in range(counts.n_scales):
        tau2 = "" if counts.tau2 is None else repr(counts.tau2[i])
        writer.writerow(
            [i, repr(counts.sigma2[i]), tau2, counts.b[i], counts.c[i], counts.d[i], counts.e[i]]
        )
    return buf.getvalue()


def counts_from_csv(text: str) -> MultiscaleCounts:
    """Parse the CSV produced by counts_to_csv."""
    meta = {"mode": "two-step", "seed": "0", "target": "H0"}
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        elif line.strip():
            rows.append(line)
    reader = csv.DictReader(rows)
    sigma2, tau2, b, c, d, e = [], [], [], [], [], []
    for rec in reader:
        sigma2.append(float(rec["sigma2"]))
        tau2.append(float(rec["tau2"]) if rec["tau2"] else None)
        b.append(int(rec["B"]))
        c.append(int(rec["C"]))
        d.append(int(rec["D"]))
        e.append(int(rec["E"]))
    two_step = all(t is not None for t in tau2) and len(tau2) > 0
    return MultiscaleCounts(
        sigma2=tuple(sigma2),
        tau2=tuple(tau2) if two_step else None,
        b=tuple(b),
        c=tuple(c),
        d=tuple(d),
        e=tuple(e),
        mode=meta["mode"],
        seed=int(meta["seed"]),
        target=meta["target"],
    )
