"""Multi-target tracking with MWIS-based hypothesis pruning.

Synthetic radar scenarios (constant-velocity targets, Gaussian measurement
noise, Poisson clutter uniform over the surveillance region) feed a
track-oriented hypothesis tree: each hypothesis is one track's assignment
history with a Kalman state and a cumulative log-likelihood ratio against
the clutter background.  Hypotheses conflict when they share a measurement;
pruning keeps the maximum-weight independent set of the conflict graph,
solved by the exact branch-and-bound solver or by one of the quantum
annealing backends.

Scoring (track-oriented MHT): founding a track on a measurement contributes
ln(lambda_new / lambda_c); an assignment contributes
ln(P_D N(innovation) / lambda_c); a missed detection ln(1 - P_D).  Every
term with a measurement carries -ln(lambda_c), so raising the assumed
clutter density lowers every measurement-bearing score and prunes harder.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dynamics import AnnealConfig, anneal
from .errors import CapacityError, InputError, NumericalFailure
from .graph import (WeightedGraph, drop_nonpositive, is_independent,
                    mwis_exact, total_weight)
from .ising import Schedule
from .sqa import QmcConfig, sqa_anneal

# Chi-squared (2 dof) 0.99 quantile: default measurement gate.
GATE_CHI2_99 = 9.21034037197618

LLR_EPS = 1e-6           # positive-weight shift floor
LAMBDA_FLOOR = 1e-12     # clutter density floor used when lambda_c = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """Synthetic scenario parameters (2D constant-velocity targets)."""

    n_targets: int = 2
    n_scans: int = 20
    dt: float = 1.0
    sigma_m: float = 5.0
    p_detect: float = 0.9
    lambda_c: float = 1e-5
    # 500 x 200 box: at the benchmark clutter densities (1e-5 .. 5e-5 per
    # unit area) this gives 1 to 5 false measurements per scan.
    region: tuple[float, float, float, float] = (0.0, 0.0, 500.0, 200.0)
    seed: int = 0
    initial_states: tuple | None = None   # ((x, y, vx, vy), ...) optional

    def __post_init__(self):
        if not (0.0 < self.p_detect <= 1.0):
            raise InputError("detection probability must lie in (0, 1]")
        if self.lambda_c < 0.0:
            raise InputError("clutter density must be non-negative")
        x0, y0, x1, y1 = self.region
        if x1 <= x0 or y1 <= y0:
            raise InputError("surveillance region is degenerate")
        if self.n_scans < 1 or self.n_targets < 0:
            raise InputError("need at least one scan and non-negative targets")

    @property
    def volume(self) -> float:
        x0, y0, x1, y1 = self.region
        return (x1 - x0) * (y1 - y0)

    def lambda_effective(self) -> float:
        return max(self.lambda_c, LAMBDA_FLOOR)


@dataclass(frozen=True)
class Measurement:
    scan: int
    position: tuple[float, float]
    source: int            # target id, or -1 for clutter (evaluation only)


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    truth: np.ndarray                  # (n_targets, n_scans, 4) state history
    measurements: tuple                # per scan: tuple of Measurement

    def to_json(self) -> str:
        cfg = self.config
        payload = {
            "config": {
                "n_targets": cfg.n_targets, "n_scans": cfg.n_scans, "dt": cfg.dt,
                "sigma_m": cfg.sigma_m, "p_detect": cfg.p_detect,
                "lambda_c": cfg.lambda_c, "region": list(cfg.region),
                "seed": cfg.seed,
                "initial_states": [list(s) for s in cfg.initial_states]
                if cfg.initial_states else None,
            },
            "truth": self.truth.tolist(),
            "measurements": [[{"position": list(m.position), "source": m.source}
                              for m in scan] for scan in self.measurements],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            payload = json.loads(text)
            c = payload["config"]
            cfg = ScenarioConfig(
                n_targets=int(c["n_targets"]), n_scans=int(c["n_scans"]),
                dt=float(c["dt"]), sigma_m=float(c["sigma_m"]),
                p_detect=float(c["p_detect"]), lambda_c=float(c["lambda_c"]),
                region=tuple(c["region"]), seed=int(c["seed"]),
                initial_states=tuple(tuple(s) for s in c["initial_states"])
                if c.get("initial_states") else None)
            truth = np.asarray(payload["truth"], dtype=float)
            meas = tuple(
                tuple(Measurement(scan=k, position=tuple(m["position"]),
                                  source=int(m["source"])) for m in scan)
                for k, scan in enumerate(payload["measurements"]))
            return cls(cfg, truth, meas)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid scenario JSON: {exc.msg}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed scenario JSON: {exc}") from exc


def _default_initial_states(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Deterministic target layout: start in the left part of the region and
    move right at 5-15 distance units per scan, staying inside the box."""
    x0, y0, x1, y1 = cfg.region
    states = np.empty((cfg.n_targets, 4))
    for i in range(cfg.n_targets):
        px = rng.uniform(x0 + 0.05 * (x1 - x0), x0 + 0.30 * (x1 - x0))
        py = rng.uniform(y0 + 0.25 * (y1 - y0), y0 + 0.75 * (y1 - y0))
        speed = rng.uniform(5.0, 15.0) / max(cfg.dt, 1e-12)
        ang = rng.uniform(-math.pi / 8, math.pi / 8)
        states[i] = (px, py, speed * math.cos(ang), speed * math.sin(ang))
    return states


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Truth plus measurements: detections with probability P_D and Gaussian
    noise, clutter counts Poisson(lambda_c * V) uniform over the region."""
    rng = np.random.default_rng(cfg.seed)
    init = (np.asarray(cfg.initial_states, dtype=float)
            if cfg.initial_states is not None
            else _default_initial_states(cfg, rng))
    if init.shape != (cfg.n_targets, 4):
        raise InputError(f"initial states must be ({cfg.n_targets}, 4)")
    x0, y0, x1, y1 = cfg.region
    truth = np.empty((cfg.n_targets, cfg.n_scans, 4))
    for k in range(cfg.n_scans):
        truth[:, k, 0] = init[:, 0] + init[:, 2] * k * cfg.dt
        truth[:, k, 1] = init[:, 1] + init[:, 3] * k * cfg.dt
        truth[:, k, 2:] = init[:, 2:]
    scans = []
    for k in range(cfg.n_scans):
        items = []
        for tgt in range(cfg.n_targets):
            if rng.random() <= cfg.p_detect:
                pos = truth[tgt, k, :2] + rng.normal(0.0, cfg.sigma_m, size=2)
                if x0 <= pos[0] <= x1 and y0 <= pos[1] <= y1:
                    items.append(Measurement(k, (float(pos[0]), float(pos[1])), tgt))
        n_clutter = rng.poisson(cfg.lambda_c * cfg.volume)
        for _ in range(n_clutter):
            pos = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            items.append(Measurement(k, (float(pos[0]), float(pos[1])), -1))
        order = rng.permutation(len(items))
        scans.append(tuple(items[i] for i in order))
    return Scenario(cfg, truth, tuple(scans))


# ---------------------------------------------------------------------------
# Constant-velocity Kalman filtering
# ---------------------------------------------------------------------------

_H = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])


def _f_matrix(dt: float) -> np.ndarray:
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    return f


def process_noise(dt: float, accel_var: float) -> np.ndarray:
    """Discrete white-noise acceleration model, per axis intensity accel_var."""
    q2 = np.array([[dt ** 4 / 4, dt ** 3 / 2], [dt ** 3 / 2, dt ** 2]]) * accel_var
    q = np.zeros((4, 4))
    q[np.ix_([0, 2], [0, 2])] = q2
    q[np.ix_([1, 3], [1, 3])] = q2
    return q


def default_accel_var(sigma_m: float, dt: float) -> float:
    return (0.1 * sigma_m / (dt * dt)) ** 2


def kalman_predict(x: np.ndarray, p: np.ndarray, dt: float,
                   accel_var: float) -> tuple[np.ndarray, np.ndarray]:
    """Standard constant-velocity prediction step."""
    f = _f_matrix(dt)
    x_pred = f @ x
    p_pred = f @ p @ f.T + process_noise(dt, accel_var)
    return x_pred, 0.5 * (p_pred + p_pred.T)


def kalman_update(x: np.ndarray, p: np.ndarray, z: np.ndarray,
                  sigma_m: float) -> tuple[np.ndarray, np.ndarray, dict]:
    """Measurement update; returns the posterior and innovation statistics
    (innovation, innovation covariance, Gaussian log-likelihood)."""
    r = sigma_m ** 2 * np.eye(2)
    s = _H @ p @ _H.T + r
    try:
        s_inv = np.linalg.inv(s)
        _, logdet = np.linalg.slogdet(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("innovation covariance is singular") from exc
    if np.min(np.linalg.eigvalsh(s)) <= 0:
        raise NumericalFailure("innovation covariance is not positive definite")
    nu = z - _H @ x
    k_gain = p @ _H.T @ s_inv
    x_post = x + k_gain @ nu
    p_post = (np.eye(4) - k_gain @ _H) @ p
    p_post = 0.5 * (p_post + p_post.T)
    d2 = float(nu @ s_inv @ nu)
    log_n = -0.5 * (d2 + logdet + 2.0 * math.log(2.0 * math.pi))
    return x_post, p_post, {"innovation": nu, "s": s, "d2": d2, "log_likelihood": log_n}


def gate(x: np.ndarray, p: np.ndarray, z: np.ndarray, sigma_m: float,
         threshold: float = GATE_CHI2_99) -> bool:
    """True iff the squared Mahalanobis innovation distance passes the gate."""
    s = _H @ p @ _H.T + sigma_m ** 2 * np.eye(2)
    nu = z - _H @ x
    d2 = float(nu @ np.linalg.solve(s, nu))
    return d2 <= threshold


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrackHypothesis:
    """One track's assignment history with filter state and score pieces.

    ``assignments[j]`` is the measurement index at scan start_scan + j (or
    None for a miss).  The log-likelihood ratio decomposes as
    score_core - n_meas_uses * ln(lambda_c) + n_miss * ln(1 - P_D), which
    makes re-scoring under a different clutter density exact.
    """

    start_scan: int
    assignments: tuple
    x: np.ndarray
    p: np.ndarray
    score_core: float          # sum of ln(lambda_new), ln(P_D) + ln N terms
    n_meas_uses: int
    n_miss: int
    positions: tuple           # filtered (x, y) per scan of life

    def measurement_keys(self) -> tuple:
        return tuple((self.start_scan + j, m)
                     for j, m in enumerate(self.assignments) if m is not None)

    @property
    def n_hits(self) -> int:
        return self.n_meas_uses

    def llr(self, cfg: "TrackerConfig") -> float:
        lam = max(cfg.lambda_c, LAMBDA_FLOOR)
        miss_term = (self.n_miss * math.log1p(-cfg.p_detect)
                     if cfg.p_detect < 1.0 else
                     (0.0 if self.n_miss == 0 else -math.inf))
        return self.score_core - self.n_meas_uses * math.log(lam) + miss_term


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker-side parameters (may deliberately differ from the scenario's)."""

    sigma_m: float = 5.0
    dt: float = 1.0
    p_detect: float = 0.9
    lambda_c: float = 1e-5
    lambda_new: float | None = None     # default: 2 * lambda_c
    gate_threshold: float = GATE_CHI2_99
    accel_var: float | None = None      # default from sigma_m, dt
    init_velocity_std: float = 30.0
    # 'drop' excludes non-positive-LLR hypotheses from the conflict graph;
    # 'shift' keeps everything positive by an affine shift, which also keeps
    # every clutter-born miss chain alive forever, so 'drop' is the default.
    weight_policy: str = "drop"         # 'drop' | 'shift'
    max_hypotheses: int = 200_000
    min_hits_confirm: int = 3
    confirm_llr: float = 2.0

    def __post_init__(self):
        if self.weight_policy not in ("shift", "drop"):
            raise InputError(f"unknown weight policy '{self.weight_policy}'")
        if not (0.0 < self.p_detect <= 1.0):
            raise InputError("detection probability must lie in (0, 1]")

    @classmethod
    def from_scenario(cls, scenario: Scenario, **overrides) -> "TrackerConfig":
        cfg = scenario.config
        base = dict(sigma_m=cfg.sigma_m, dt=cfg.dt, p_detect=cfg.p_detect,
                    lambda_c=cfg.lambda_c)
        base.update(overrides)
        return cls(**base)

    def effective_lambda_new(self) -> float:
        if self.lambda_new is not None:
            return self.lambda_new
        return 2.0 * max(self.lambda_c, LAMBDA_FLOOR)

    def effective_accel_var(self) -> float:
        return (self.accel_var if self.accel_var is not None
                else default_accel_var(self.sigma_m, self.dt))


def score_hypothesis(h: TrackHypothesis, cfg: TrackerConfig) -> float:
    """Cumulative log-likelihood ratio of a hypothesis against clutter."""
    return h.llr(cfg)


@dataclass
class TrackerState:
    """Live hypothesis set plus bookkeeping across scans."""

    cfg: TrackerConfig
    hypotheses: list = field(default_factory=list)
    scan_index: int = -1
    counts: list = field(default_factory=list)          # post-extension counts
    survivor_counts: list = field(default_factory=list)
    retired: list = field(default_factory=list)
    captured_graphs: list = field(default_factory=list)


def extend_hypotheses(state: TrackerState, measurements: Sequence[Measurement],
                      scan: int) -> TrackerState:
    """Branch every live hypothesis over gated measurements and a miss, and
    spawn one new-track hypothesis per measurement."""
    if scan != state.scan_index + 1:
        raise InputError(f"scan {scan} is not consecutive with {state.scan_index}")
    cfg = state.cfg
    children: list[TrackHypothesis] = []
    z = np.array([m.position for m in measurements]) if measurements else np.zeros((0, 2))
    for h in state.hypotheses:
        x_pred, p_pred = kalman_predict(h.x, h.p, cfg.dt, cfg.effective_accel_var())
        s = _H @ p_pred @ _H.T + cfg.sigma_m ** 2 * np.eye(2)
        s_inv = np.linalg.inv(s)
        _, logdet = np.linalg.slogdet(s)
        if len(measurements):
            nu = z - x_pred[:2]
            d2 = np.einsum("mi,ij,mj->m", nu, s_inv, nu)
            gated = np.flatnonzero(d2 <= cfg.gate_threshold)
        else:
            gated = []
        for mi in gated:
            log_n = -0.5 * (float(d2[mi]) + logdet + 2.0 * math.log(2.0 * math.pi))
            k_gain = p_pred @ _H.T @ s_inv
            x_post = x_pred + k_gain @ (z[mi] - x_pred[:2])
            p_post = (np.eye(4) - k_gain @ _H) @ p_pred
            children.append(TrackHypothesis(
                start_scan=h.start_scan,
                assignments=h.assignments + (int(mi),),
                x=x_post, p=0.5 * (p_post + p_post.T),
                score_core=h.score_core + math.log(cfg.p_detect) + log_n,
                n_meas_uses=h.n_meas_uses + 1, n_miss=h.n_miss,
                positions=h.positions + ((float(x_post[0]), float(x_post[1])),)))
        children.append(TrackHypothesis(
            start_scan=h.start_scan, assignments=h.assignments + (None,),
            x=x_pred, p=p_pred, score_core=h.score_core,
            n_meas_uses=h.n_meas_uses, n_miss=h.n_miss + 1,
            positions=h.positions + ((float(x_pred[0]), float(x_pred[1])),)))
    for mi, meas in enumerate(measurements):
        x = np.array([meas.position[0], meas.position[1], 0.0, 0.0])
        p0 = np.diag([cfg.sigma_m ** 2, cfg.sigma_m ** 2,
                      cfg.init_velocity_std ** 2, cfg.init_velocity_std ** 2])
        children.append(TrackHypothesis(
            start_scan=scan, assignments=(int(mi),), x=x, p=p0,
            score_core=math.log(max(cfg.effective_lambda_new(), LAMBDA_FLOOR)),
            n_meas_uses=1, n_miss=0, positions=(tuple(meas.position),)))
    if len(children) > cfg.max_hypotheses:
        raise CapacityError(
            f"{len(children)} hypotheses exceed the cap {cfg.max_hypotheses}; "
            "enable a pruning backend")
    state.hypotheses = children
    state.scan_index = scan
    state.counts.append(len(children))
    return state


def build_conflict_graph(hyps: Sequence[TrackHypothesis],
                         cfg: TrackerConfig) -> tuple[WeightedGraph, list]:
    """One vertex per hypothesis (weight per the positive-weight policy),
    edges between hypotheses sharing any (scan, measurement) pair.

    Under the ``drop`` policy, hypotheses with non-positive LLR are excluded;
    the returned index list maps graph vertices back into ``hyps``.
    """
    llrs = np.array([h.llr(cfg) for h in hyps])
    if cfg.weight_policy == "drop":
        keep = [i for i in range(len(hyps)) if llrs[i] > 0.0]
        weights = [float(llrs[i]) for i in keep]
    else:
        keep = list(range(len(hyps)))
        shift = float(llrs.min()) if len(llrs) else 0.0
        weights = [float(llrs[i] - shift + LLR_EPS) for i in keep]
    buckets: dict = {}
    for v, i in enumerate(keep):
        for key in hyps[i].measurement_keys():
            buckets.setdefault(key, []).append(v)
    edges = set()
    for group in buckets.values():
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                edges.add((group[a], group[b]))
    return WeightedGraph.from_data(weights, edges), keep


# ---------------------------------------------------------------------------
# Pruning backends
# ---------------------------------------------------------------------------

class ExactBackend:
    """Branch-and-bound MWIS pruning (the classical baseline)."""

    name = "exact"

    def __init__(self, max_n: int = 60):
        self.max_n = max_n

    def solve(self, g: WeightedGraph) -> tuple[frozenset, float, dict]:
        sub, idx_map = drop_nonpositive(g)
        if sub.n > self.max_n:
            raise CapacityError(
                f"conflict graph has {sub.n} vertices, over the exact budget "
                f"{self.max_n}; use the sqa backend")
        sel, w = mwis_exact(sub)
        return frozenset(idx_map[v] for v in sel), w, {"backend": self.name, "n": sub.n}


class DynamicsBackend:
    """Open-system annealing emulator as the pruning solver (small graphs)."""

    name = "dynamics"

    def __init__(self, t_f: float = 50e-6, shots: int = 64, noise: bool = False,
                 seed: int = 0, mode: str = "ideal"):
        self.t_f = t_f
        self.shots = shots
        self.noise = noise
        self.seed = seed
        self.mode = mode

    def solve(self, g: WeightedGraph) -> tuple[frozenset, float, dict]:
        sub, idx_map = drop_nonpositive(g)
        if sub.n == 0:
            return frozenset(), 0.0, {"backend": self.name, "n": 0}
        cfg = AnnealConfig(schedule=Schedule.smooth(self.t_f), shots=self.shots,
                           seed=self.seed, noise_enabled=self.noise)
        res = anneal(sub, cfg, mode=self.mode)
        best = frozenset(idx_map[v] for v in res.best_set)
        return best, res.best_weight, {"backend": self.name, "n": sub.n,
                                       "p_ground": res.p_ground,
                                       "t_f": self.t_f, "shots": self.shots}


class SqaBackend:
    """Path-integral Monte Carlo annealer as the pruning solver."""

    name = "sqa"

    def __init__(self, cfg: QmcConfig | None = None, seed: int = 0):
        self.cfg = cfg or QmcConfig(seed=seed)

    def solve(self, g: WeightedGraph) -> tuple[frozenset, float, dict]:
        sub, idx_map = drop_nonpositive(g)
        if sub.n == 0:
            return frozenset(), 0.0, {"backend": self.name, "n": 0}
        res = sqa_anneal(sub, self.cfg)
        best = frozenset(idx_map[v] for v in res.best_set)
        return best, res.best_weight, {"backend": self.name, "n": sub.n,
                                       "n_repaired": res.info["n_repaired"]}


def make_backend(name: str, seed: int = 0, **kwargs):
    if name == "exact":
        return ExactBackend(**kwargs)
    if name in ("anneal", "dynamics"):
        return DynamicsBackend(seed=seed, **kwargs)
    if name == "sqa":
        return SqaBackend(seed=seed, **kwargs)
    raise InputError(f"unknown backend '{name}'")


def prune(state: TrackerState, backend, capture_graph: bool = False) -> TrackerState:
    """Keep the maximum-weight independent set of the conflict graph."""
    hyps = state.hypotheses
    if not hyps:
        state.survivor_counts.append(0)
        return state
    g, keep = build_conflict_graph(hyps, state.cfg)
    if capture_graph:
        state.captured_graphs.append((state.scan_index, g))
    if g.n == 0:
        survivors = []
    else:
        chosen, _, _ = backend.solve(g)
        survivors = [hyps[keep[v]] for v in sorted(chosen)]
    chosen_ids = {id(h) for h in survivors}
    cfg = state.cfg
    for h in hyps:
        if id(h) not in chosen_ids and h.n_hits >= cfg.min_hits_confirm \
                and h.llr(cfg) >= cfg.confirm_llr:
            state.retired.append(h)
    state.hypotheses = survivors
    state.survivor_counts.append(len(survivors))
    return state


# ---------------------------------------------------------------------------
# End-to-end tracking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveredTrack:
    start_scan: int
    positions: tuple            # filtered (x, y) per scan of life
    llr: float
    n_hits: int

    def scan_range(self) -> tuple[int, int]:
        return self.start_scan, self.start_scan + len(self.positions) - 1


@dataclass(frozen=True)
class TrackReport:
    scenario_seed: int
    backend_name: str
    mode: str
    counts: tuple               # hypotheses per scan, post extension
    survivor_counts: tuple
    backend_times: tuple        # modeled hardware seconds per pruning call
    tracks: tuple               # RecoveredTrack
    quantum_scans: tuple        # scans where a quantum backend ran
    lambda_c: float
    captured_graphs: tuple = ()  # (scan, WeightedGraph), not serialized

    def to_json(self) -> str:
        payload = {
            "scenario_seed": self.scenario_seed, "backend": self.backend_name,
            "mode": self.mode, "lambda_c": self.lambda_c,
            "counts": list(self.counts), "survivor_counts": list(self.survivor_counts),
            "backend_times": list(self.backend_times),
            "quantum_scans": list(self.quantum_scans),
            "tracks": [{"start_scan": t.start_scan, "llr": t.llr,
                        "n_hits": t.n_hits,
                        "positions": [list(p) for p in t.positions]}
                       for t in self.tracks],
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrackReport":
        try:
            d = json.loads(text)
            tracks = tuple(RecoveredTrack(start_scan=int(t["start_scan"]),
                                          positions=tuple(tuple(p) for p in t["positions"]),
                                          llr=float(t["llr"]), n_hits=int(t["n_hits"]))
                           for t in d["tracks"])
            return cls(scenario_seed=int(d["scenario_seed"]), backend_name=d["backend"],
                       mode=d["mode"], counts=tuple(d["counts"]),
                       survivor_counts=tuple(d["survivor_counts"]),
                       backend_times=tuple(d["backend_times"]),
                       tracks=tracks, quantum_scans=tuple(d["quantum_scans"]),
                       lambda_c=float(d["lambda_c"]))
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid report JSON: {exc.msg}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed report JSON: {exc}") from exc


def _confirmed_tracks(state: TrackerState) -> tuple:
    """One representative per family of hypotheses sharing measurements.

    Final survivors and retired hypotheses that reuse any common measurement
    are sibling variants of the same physical track; the longest (then
    heaviest) member represents the family, with surviving members taking
    precedence over retired ones.
    """
    cfg = state.cfg
    finals = [h for h in state.hypotheses
              if h.n_hits >= cfg.min_hits_confirm and h.llr(cfg) >= cfg.confirm_llr]
    candidates = [(h, True) for h in finals] + [(h, False) for h in state.retired]
    if not candidates:
        return ()
    parent = list(range(len(candidates)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    key_owner: dict = {}
    for i, (h, _) in enumerate(candidates):
        for key in h.measurement_keys():
            if key in key_owner:
                union(key_owner[key], i)
            else:
                key_owner[key] = i
    groups: dict = {}
    for i in range(len(candidates)):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        group_finals = [i for i in members if candidates[i][1]]
        if group_finals:
            chosen = group_finals        # survivors are pairwise conflict-free
        else:
            chosen = [max(members, key=lambda i: (len(candidates[i][0].assignments),
                                                  candidates[i][0].llr(cfg)))]
        for i in chosen:
            h = candidates[i][0]
            out.append(RecoveredTrack(start_scan=h.start_scan, positions=h.positions,
                                      llr=h.llr(cfg), n_hits=h.n_hits))
    return tuple(sorted(out, key=lambda t: (t.start_scan, -t.n_hits)))


def _model_backend_time(backend, graph_size: int) -> float:
    from .timing import TimingModel, total_runtime
    if isinstance(backend, ExactBackend) or graph_size == 0:
        return 0.0
    t_anneal = getattr(backend, "t_f", 100e-6)
    model = TimingModel(reset_mode="active", parallel_readout=True,
                        n_qubits=max(graph_size, 1), t_anneal=t_anneal,
                        shots=getattr(backend, "shots", 1000))
    return total_runtime(model).total


def run_tracker(scenario: Scenario, cfg: TrackerConfig | None = None,
                backend="exact", mode: str = "sequential",
                single_step_scan: int | None = None,
                capture_graphs: bool = False) -> TrackReport:
    """Track through all scans, pruning per ``mode``.

    ``sequential`` prunes every scan with ``backend``; ``single-step``
    prunes with the exact solver everywhere except one scan (by default the
    scan with the most hypotheses in an exact dry run) where ``backend``
    runs; ``no-prune`` never prunes (growth studies; guard via the cap).
    """
    cfg = cfg or TrackerConfig.from_scenario(scenario)
    if isinstance(backend, str):
        backend = make_backend(backend)
    exact = ExactBackend()
    if mode not in ("sequential", "single-step", "no-prune"):
        raise InputError(f"unknown tracker mode '{mode}'")
    if mode == "single-step" and single_step_scan is None:
        dry = run_tracker(scenario, cfg, exact, mode="sequential")
        single_step_scan = int(np.argmax(dry.counts))

    state = TrackerState(cfg=cfg)
    backend_times = []
    quantum_scans = []
    for k, scan_meas in enumerate(scenario.measurements):
        extend_hypotheses(state, scan_meas, k)
        if mode == "no-prune":
            state.survivor_counts.append(len(state.hypotheses))
            continue
        use = backend if (mode == "sequential" or k == single_step_scan) else exact
        n_before = len(state.hypotheses)
        prune(state, use, capture_graph=capture_graphs)
        backend_times.append(_model_backend_time(use, n_before))
        if not isinstance(use, ExactBackend):
            quantum_scans.append(k)
    return TrackReport(
        scenario_seed=scenario.config.seed,
        backend_name=getattr(backend, "name", "exact"), mode=mode,
        counts=tuple(state.counts), survivor_counts=tuple(state.survivor_counts),
        backend_times=tuple(backend_times), tracks=_confirmed_tracks(state),
        quantum_scans=tuple(quantum_scans), lambda_c=cfg.lambda_c,
        captured_graphs=tuple(state.captured_graphs))


def track_error(report: TrackReport, scenario: Scenario,
                match_radius_sigmas: float = 10.0):
    """Per-truth-target RMS deviation of the best-matched recovered track and
    the number of recovered fragments covering it."""
    cfg = scenario.config
    radius = match_radius_sigmas * cfg.sigma_m
    results = []
    for tgt in range(cfg.n_targets):
        truth_xy = scenario.truth[tgt, :, :2]
        fragments = []
        for tr in report.tracks:
            k0, k1 = tr.scan_range()
            k1 = min(k1, cfg.n_scans - 1)
            if k1 < k0:
                continue
            pos = np.asarray(tr.positions[:k1 - k0 + 1])
            ref = truth_xy[k0:k1 + 1]
            dev = np.linalg.norm(pos - ref, axis=1)
            if np.mean(dev) <= radius:
                fragments.append((tr, float(np.sqrt(np.mean(dev ** 2)))))
        if fragments:
            best = min(fragments, key=lambda fr: (-len(fr[0].positions), fr[1]))
            results.append({"target": tgt, "matched": True,
                            "rms": best[1], "fragments": len(fragments)})
        else:
            results.append({"target": tgt, "matched": False,
                            "rms": math.inf, "fragments": 0})
    return results
