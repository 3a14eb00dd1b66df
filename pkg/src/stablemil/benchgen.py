"""Synthetic distribution-shift benchmark with full ground truth.

Instances are drawn from four Gaussian concepts: one causal concept that
makes a bag positive, one "noisy" background concept correlated with the
label only through sampling, and two plain negative backgrounds. Each
positive bag is a few causal draws plus one background concept; each
negative bag is one background concept throughout. The biased splitter then
over-represents the noisy background among training positives and
under-represents it among training negatives (probability a vs 1-a), and the
test split reverses the bias, so background correlations learned from the
training set mislead on the test set.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bags import CAUSAL, NEGATIVE, NOISY, Bag, Instance, MILDataset
from .errors import InvalidConfig, MissingBackgroundTag

CONCEPT_NAMES = ("causal", "noisy", "negative2", "negative3")
BACKGROUND_KEY = "backgrounds"


@dataclass(frozen=True)
class ConceptSpec:
    """One Gaussian concept: its name, truth role, mean, and diagonal variance."""

    name: str
    role: str
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "variance", np.asarray(self.variance, dtype=np.float64))
        if self.mean.ndim != 1 or self.mean.shape != self.variance.shape:
            raise InvalidConfig(f"concept {self.name!r}: mean/variance shape mismatch")
        if not np.all(self.variance > 0):
            raise InvalidConfig(f"concept {self.name!r}: variance must be positive")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, np.sqrt(self.variance), size=(n, len(self.mean)))


@dataclass(frozen=True)
class ShiftConfig:
    """Full parameterization of the generator and sampling rules."""

    concepts: tuple[ConceptSpec, ...]
    bags_total: int = 400
    instances_per_bag: int = 20
    positive_fraction: float = 0.5
    a_range: tuple[float, float] = (0.65, 0.95)
    positive_causal_count: int = 1
    seed: int = 0

    def __post_init__(self):
        names = tuple(c.name for c in self.concepts)
        if names != CONCEPT_NAMES:
            raise InvalidConfig(f"concepts must be named {CONCEPT_NAMES}, got {names}")
        lo, hi = self.a_range
        if not (0.5 <= lo <= hi <= 1.0):
            raise InvalidConfig("a_range must satisfy 0.5 <= lo <= hi <= 1")
        if self.bags_total < 2:
            raise InvalidConfig("bags_total must be >= 2")
        if not 0 < self.positive_fraction < 1:
            raise InvalidConfig("positive_fraction must be in (0, 1)")
        if not 1 <= self.positive_causal_count < self.instances_per_bag:
            raise InvalidConfig("positive_causal_count must be in [1, instances_per_bag)")

    @property
    def dim(self) -> int:
        return len(self.concepts[0].mean)

    def concept(self, name: str) -> ConceptSpec:
        for c in self.concepts:
            if c.name == name:
                return c
        raise KeyError(name)


def make_concepts(dim: int, means: dict, variances: dict) -> tuple[ConceptSpec, ...]:
    roles = {"causal": CAUSAL, "noisy": NOISY, "negative2": NEGATIVE, "negative3": NEGATIVE}
    out = []
    for name in CONCEPT_NAMES:
        var = np.asarray(variances[name], dtype=np.float64)
        if var.ndim == 0:
            var = np.full(dim, float(var))
        out.append(ConceptSpec(name, roles[name], means[name], var))
    return tuple(out)


def _axis_means(dim: int, scale: float) -> dict:
    e = np.eye(dim)
    return {
        "causal": scale * e[0],
        "noisy": scale * e[1],
        "negative2": -scale * e[0],
        "negative3": -scale * e[1],
    }


def setting_config(setting: int, seed: int = 0) -> ShiftConfig:
    """The two pinned benchmark configurations.

    Setting 1: d=10, concept means at +-3 along the first two axes, variance
    0.25. Setting 2 is the harder variant: means at distance 2, variance 1.5.
    """
    if setting == 1:
        concepts = make_concepts(10, _axis_means(10, 3.0), {n: 0.25 for n in CONCEPT_NAMES})
    elif setting == 2:
        concepts = make_concepts(10, _axis_means(10, 2.0), {n: 1.5 for n in CONCEPT_NAMES})
    else:
        raise InvalidConfig(f"setting must be 1 or 2, got {setting}")
    return ShiftConfig(concepts=concepts, seed=seed)


@dataclass
class ShiftSplit:
    """A biased train/test partition of a generated population."""

    train: MILDataset
    test: MILDataset
    a_used: float
    truth_index: dict = field(default_factory=dict)


def generate_population(config: ShiftConfig) -> MILDataset:
    """Draw the full bag population; deterministic per config.seed.

    Positive bags hold positive_causal_count causal draws plus one background
    concept (noisy or negative2, equally likely); negative bags are filled
    from one of noisy/negative2/negative3. Labels satisfy the boolean-OR rule
    by construction; each bag's background concept is recorded in
    meta["backgrounds"].
    """
    rng = np.random.default_rng(config.seed)
    n_pos = round(config.bags_total * config.positive_fraction)
    n_neg = config.bags_total - n_pos
    if n_pos < 1 or n_neg < 1:
        raise InvalidConfig("bag counts leave an empty class")
    n = config.instances_per_bag
    pcc = config.positive_causal_count
    causal = config.concept("causal")

    bags = []
    backgrounds = {}
    for i in range(n_pos):
        bg = config.concepts[1 + int(rng.integers(2))]  # noisy or negative2
        rows = np.vstack([causal.sample(rng, pcc), bg.sample(rng, n - pcc)])
        roles = [CAUSAL] * pcc + [bg.role] * (n - pcc)
        bag_id = f"pos-{i:04d}"
        bags.append(Bag(bag_id, tuple(Instance(r, t) for r, t in zip(rows, roles)), 1))
        backgrounds[bag_id] = bg.name
    for i in range(n_neg):
        bg = config.concepts[1 + int(rng.integers(3))]  # noisy/negative2/negative3
        rows = bg.sample(rng, n)
        bag_id = f"neg-{i:04d}"
        bags.append(Bag(bag_id, tuple(Instance(r, bg.role) for r in rows), 0))
        backgrounds[bag_id] = bg.name

    meta = {
        "generator": "shift-bench",
        "seed": config.seed,
        BACKGROUND_KEY: backgrounds,
    }
    return MILDataset(tuple(bags), meta)


def draw_a(a_range, seed: int) -> float:
    """Uniform draw of the sampling ratio from its configured range."""
    lo, hi = a_range
    if not (0.5 <= lo <= hi <= 1.0):
        raise InvalidConfig("a_range must satisfy 0.5 <= lo <= hi <= 1")
    if lo == hi:
        return float(lo)
    return float(np.random.default_rng(seed).uniform(lo, hi))


def _train_probability(label: int, background: str, a: float) -> float:
    if label == 1:
        return a if background == "noisy" else 1.0 - a
    return 1.0 - a if background == "noisy" else a


def biased_split(population: MILDataset, a: float, seed: int) -> ShiftSplit:
    """Partition bags by seeded coin flips under the biased sampling rules.

    Positive bags with the noisy background enter training with probability
    a, with the negative2 background with probability 1-a; negative noisy
    bags with probability 1-a and other negative bags with probability a.
    """
    if not 0.5 <= a <= 1.0:
        raise InvalidConfig(f"a must be in [0.5, 1], got {a}")
    backgrounds = population.meta.get(BACKGROUND_KEY)
    if not isinstance(backgrounds, dict):
        raise MissingBackgroundTag("population meta lacks per-bag background tags")
    rng = np.random.default_rng(seed)
    train_bags, test_bags = [], []
    truth_index = {}
    for bag in population.bags:
        if bag.id not in backgrounds:
            raise MissingBackgroundTag(f"bag {bag.id!r} has no background tag")
        p = _train_probability(bag.label, backgrounds[bag.id], a)
        (train_bags if rng.uniform() < p else test_bags).append(bag)
        truth_index[bag.id] = [inst.truth for inst in bag.instances]
    base_meta = dict(population.meta)
    base_meta["a_used"] = float(a)
    base_meta["split_seed"] = seed

    def subset(bags, which):
        meta = dict(base_meta)
        meta["split"] = which
        meta[BACKGROUND_KEY] = {b.id: backgrounds[b.id] for b in bags}
        return MILDataset(tuple(bags), meta)

    if not train_bags or not test_bags:
        raise InvalidConfig("degenerate split: one side is empty")
    return ShiftSplit(
        train=subset(train_bags, "train"),
        test=subset(test_bags, "test"),
        a_used=float(a),
        truth_index=truth_index,
    )


def iid_split(population: MILDataset, seed: int) -> ShiftSplit:
    """Unbiased 50/50 partition used by the no-shift parity experiments."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(population.bags))
    half = len(population.bags) // 2
    train_idx = set(order[:half].tolist())
    train_bags = [b for i, b in enumerate(population.bags) if i in train_idx]
    test_bags = [b for i, b in enumerate(population.bags) if i not in train_idx]
    backgrounds = population.meta.get(BACKGROUND_KEY, {})
    base_meta = dict(population.meta)
    base_meta["split_seed"] = seed

    def subset(bags, which):
        meta = dict(base_meta)
        meta["split"] = which
        if backgrounds:
            meta[BACKGROUND_KEY] = {b.id: backgrounds[b.id] for b in bags}
        return MILDataset(tuple(bags), meta)

    truth_index = {b.id: [i.truth for i in b.instances] for b in population.bags}
    return ShiftSplit(subset(train_bags, "train"), subset(test_bags, "test"), float("nan"),
                      truth_index)


# -- key-value config files ---------------------------------------------------

CONFIG_KEYS = """dim bags_total instances_per_bag positive_fraction positive_causal_count
a_lo a_hi seed""".split()


def parse_config_text(text: str) -> ShiftConfig:
    """Parse the documented key-value format into a ShiftConfig.

    Lines are ``key = value``; ``#`` starts a comment. Concept means are
    whitespace-separated vectors (``causal_mean = 3 0 0``) and variances are
    either vectors or scalars broadcast across dimensions.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()

    def need(key):
        if key not in values:
            raise InvalidConfig(f"missing config key {key!r}")
        return values[key]

    def vector(key, dim):
        parts = need(key).replace(",", " ").split()
        try:
            arr = np.array([float(p) for p in parts])
        except ValueError as exc:
            raise InvalidConfig(f"{key}: {exc}") from exc
        if len(arr) == 1:
            arr = np.full(dim, arr[0])
        if len(arr) != dim:
            raise InvalidConfig(f"{key}: expected {dim} entries, got {len(arr)}")
        return arr

    try:
        dim = int(need("dim"))
        means = {n: vector(f"{n}_mean", dim) for n in CONCEPT_NAMES}
        variances = {n: vector(f"{n}_var", dim) for n in CONCEPT_NAMES}
        concepts = make_concepts(dim, means, variances)
        return ShiftConfig(
            concepts=concepts,
            bags_total=int(need("bags_total")),
            instances_per_bag=int(need("instances_per_bag")),
            positive_fraction=float(need("positive_fraction")),
            a_range=(float(need("a_lo")), float(need("a_hi"))),
            positive_causal_count=int(need("positive_causal_count")),
            seed=int(values.get("seed", "0")),
        )
    except (ValueError, KeyError) as exc:
        raise InvalidConfig(str(exc)) from exc


def config_text(config: ShiftConfig) -> str:
    """Render a ShiftConfig back to the key-value format."""
    from .dataio import format_float

    lines = [
        f"dim = {config.dim}",
        f"bags_total = {config.bags_total}",
        f"instances_per_bag = {config.instances_per_bag}",
        f"positive_fraction = {format_float(config.positive_fraction)}",
        f"positive_causal_count = {config.positive_causal_count}",
        f"a_lo = {format_float(config.a_range[0])}",
        f"a_hi = {format_float(config.a_range[1])}",
        f"seed = {config.seed}",
    ]
    for c in config.concepts:
        lines.append(f"{c.name}_mean = " + " ".join(format_float(v) for v in c.mean))
        lines.append(f"{c.name}_var = " + " ".join(format_float(v) for v in c.variance))
    return "\n".join(lines) + "\n"


def load_config(path) -> ShiftConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
