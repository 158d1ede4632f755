"""Benchmark of standard vs. augmented operator TDVP on the spin-1 XXZ chain.

A random complex operator of small bond dimension is zero-padded to the
maximal bond dimensions, evolved with TDVP under the commutator
superoperator for every step size of a grid, and compared with the dense
exact ``O(t)``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, TensorNetworkError
from .io import save_train
from .linalg import KrylovParams
from .mpo import (
    XxzCouplings,
    build_commutator_superoperator,
    build_xxz_spin1_hamiltonian,
    mpo_to_dense,
    mpo_to_purified_mps,
    purified_mps_to_mpo,
)
from .mps import MPS, left_normalize, pad_bond_dims, random_gaussian_mps, scale, von_neumann_entropy
from .oracle import (
    dense_evolve,
    operator_schmidt_spectrum,
    physical_energy,
    relative_energy_error,
    trace_distance,
)
from .tdvp import TdvpRunParams, evolve, make_augmented_state

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "ExperimentResult",
    "MODES",
    "CSV_COLUMNS",
    "default_max_bond_dims",
    "build_initial_operator",
    "exact_reference",
    "run_single",
    "run_experiment",
    "fit_convergence_order",
    "summarize",
    "format_summary",
    "records_to_csv",
    "records_from_csv",
    "parse_config_file",
    "convert_setting",
]

LOGGER = logging.getLogger(__name__)

MODES = ("standard", "augmented")
CSV_COLUMNS = ("tau", "mode", "rel_energy_error", "trace_distance", "norm_drift",
               "superop_energy_drift", "wall_time_seconds", "seed")
REFERENCE_ENTROPY_T0 = 0.9913
REFERENCE_ENTROPY_TFINAL = 1.287
LOCAL_DIM = 3
HAMILTONIAN_BOND_DIM = 5


def default_max_bond_dims(nsites: int, cap: int = 81) -> tuple:
    """``min(d**(2n), d**(2(N-n)), cap)`` per bond, i.e. (1, 9, 81, 81, 81, 9, 1) for N = 6."""
    d2 = LOCAL_DIM**2
    return tuple(min(d2**n, d2 ** (nsites - n), cap) for n in range(nsites + 1))


def _default_tau_grid(t_final):
    return tuple(t_final / k for k in (4, 8, 16, 32, 64))


@dataclass
class ExperimentConfig:
    nsites: int = 6
    J: float = 1.0
    Delta: float = 1.2
    seed: int = 0
    init_bond_dim: int = 2
    max_bond_dims: tuple | None = None
    gamma_site_factor: float = 1e-3
    t_final: float = 0.125
    tau_grid: tuple | None = None
    mode: str = "both"
    output_dir: str | None = None
    workers: int = 1
    krylov_max_dim: int = 30
    krylov_tol: float = 1e-12
    cache_dir: str | None = None

    def __post_init__(self):
        if self.max_bond_dims is None:
            self.max_bond_dims = default_max_bond_dims(self.nsites)
        self.max_bond_dims = tuple(int(b) for b in self.max_bond_dims)
        if self.tau_grid is None:
            self.tau_grid = _default_tau_grid(self.t_final)
        self.tau_grid = tuple(float(t) for t in self.tau_grid)

    @property
    def modes(self) -> tuple:
        return MODES if self.mode == "both" else (self.mode,)

    @property
    def couplings(self) -> XxzCouplings:
        return XxzCouplings(J=self.J, Delta=self.Delta)

    @property
    def krylov(self) -> KrylovParams:
        return KrylovParams(max_dim=self.krylov_max_dim, tol=self.krylov_tol)

    def validate(self) -> None:
        """Raise :class:`InvalidInputError` on any inconsistent setting."""
        if self.nsites < 2:
            raise InvalidInputError("need at least 2 sites")
        if LOCAL_DIM**self.nsites > 729:
            raise InvalidInputError(f"N = {self.nsites} exceeds the dense reference cap 3**6")
        dims = self.max_bond_dims
        if len(dims) != self.nsites + 1 or dims[0] != 1 or dims[-1] != 1:
            raise InvalidInputError(f"max_bond_dims must have length {self.nsites + 1} with unit ends")
        d2 = LOCAL_DIM**2
        for n in range(self.nsites):
            if dims[n + 1] > d2 * dims[n] or dims[n] > d2 * dims[n + 1]:
                raise InvalidInputError(f"max_bond_dims not reachable at site {n}: {dims}")
        if self.init_bond_dim < 1:
            raise InvalidInputError("init_bond_dim must be positive")
        interior = dims[1:-1]
        if interior and self.init_bond_dim + HAMILTONIAN_BOND_DIM > min(interior):
            raise InvalidInputError(
                f"init_bond_dim + {HAMILTONIAN_BOND_DIM} = {self.init_bond_dim + HAMILTONIAN_BOND_DIM} "
                f"exceeds the smallest interior bond {min(interior)}; no room to embed |H>")
        if not self.gamma_site_factor > 0:
            raise InvalidInputError("gamma_site_factor must be positive")
        if not self.t_final > 0:
            raise InvalidInputError("t_final must be positive")
        if not self.tau_grid:
            raise InvalidInputError("tau_grid is empty")
        for tau in self.tau_grid:
            TdvpRunParams.for_final_time(self.t_final, tau)
        if self.mode not in ("standard", "augmented", "both"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["max_bond_dims"] = list(self.max_bond_dims)
        d["tau_grid"] = list(self.tau_grid)
        return d

    def to_keyvalue(self) -> str:
        """Plain-text ``key = value`` form accepted by :func:`parse_config_file`."""
        lines = []
        for key, flag in _FLAG_KEYS.items():
            value = getattr(self, key)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{flag} = {value}")
        return "\n".join(lines) + "\n"


# config field -> flag/file key
_FLAG_KEYS = {
    "nsites": "sites",
    "J": "coupling",
    "Delta": "delta",
    "seed": "seed",
    "init_bond_dim": "init-bond-dim",
    "max_bond_dims": "max-bond-dims",
    "gamma_site_factor": "gamma-site-factor",
    "t_final": "t-final",
    "tau_grid": "tau-grid",
    "mode": "mode",
    "output_dir": "output-dir",
    "workers": "workers",
    "krylov_max_dim": "krylov-max-dim",
    "krylov_tol": "krylov-tol",
    "cache_dir": "cache-dir",
}


def _parse_number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _parse_list(text, conv):
    return tuple(conv(x) for x in str(text).replace(" ", "").split(",") if x)


_CONVERTERS = {
    "nsites": int,
    "J": _parse_number,
    "Delta": _parse_number,
    "seed": int,
    "init_bond_dim": int,
    "max_bond_dims": lambda s: _parse_list(s, int),
    "gamma_site_factor": _parse_number,
    "t_final": _parse_number,
    "tau_grid": lambda s: _parse_list(s, _parse_number),
    "mode": str,
    "output_dir": str,
    "workers": int,
    "krylov_max_dim": int,
    "krylov_tol": _parse_number,
    "cache_dir": str,
}


def convert_setting(key: str, value):
    """Convert a raw string (or already typed value) for config field ``key``."""
    if not isinstance(value, str):
        return tuple(value) if isinstance(value, list) else value
    return _CONVERTERS[key](value)


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments) or a JSON manifest into config fields.

    Keys are the CLI flag names without leading dashes; underscores and
    dashes are interchangeable.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("config", data)
        return {k: convert_setting(k, v) for k, v in data.items() if k in _CONVERTERS}
    by_flag = {flag: key for key, flag in _FLAG_KEYS.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        k = k.replace("_", "-")
        if k not in by_flag:
            raise InvalidInputError(f"{path}:{lineno}: unknown key {k!r}")
        out[by_flag[k]] = convert_setting(by_flag[k], v)
    return out


@dataclass
class RunRecord:
    tau: float
    mode: str
    rel_energy_error: float
    trace_distance: float
    norm_drift: float
    superop_energy_drift: float
    wall_time_seconds: float
    seed: int

    def row(self) -> list:
        return [_fmt(self.tau), self.mode, _fmt(self.rel_energy_error), _fmt(self.trace_distance),
                _fmt(self.norm_drift), _fmt(self.superop_energy_drift),
                _fmt(self.wall_time_seconds), str(self.seed)]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    failures: list = field(default_factory=list)
    schmidt: dict = field(default_factory=dict)
    entropies: dict = field(default_factory=dict)
    truncation_weight: float = float("nan")
    files: dict = field(default_factory=dict)

    def by_mode(self, mode: str) -> list:
        return sorted((r for r in self.records if r.mode == mode), key=lambda r: r.tau)


# --- experiment pieces -------------------------------------------------------

def build_initial_operator(cfg: ExperimentConfig) -> MPS:
    """Random purified operator of bond dimension ``init_bond_dim``, zero-padded (not normalized)."""
    d2 = LOCAL_DIM**2
    small = [1] + [min(cfg.init_bond_dim, b) for b in cfg.max_bond_dims[1:-1]] + [1]
    o = random_gaussian_mps(cfg.nsites, d2, small, cfg.seed)
    return pad_bond_dims(o, cfg.max_bond_dims)


def _cache_key(cfg: ExperimentConfig) -> str:
    key = f"{cfg.nsites}|{cfg.J!r}|{cfg.Delta!r}|{cfg.seed}|{cfg.init_bond_dim}|{cfg.t_final!r}"
    return hashlib.sha1(key.encode()).hexdigest()[:16]


def exact_reference(cfg: ExperimentConfig, h_dense, o0_dense):
    """Dense ``O(t_final)``, loaded from / stored in ``cfg.cache_dir`` when set."""
    path = None
    if cfg.cache_dir:
        path = Path(cfg.cache_dir) / f"exact_{_cache_key(cfg)}.npy"
        if path.exists():
            LOGGER.info("loading cached exact reference %s", path)
            return np.load(path)
    ot = dense_evolve(h_dense, o0_dense, cfg.t_final)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, ot)
    return ot


def _dense_operator(psi: MPS) -> np.ndarray:
    return mpo_to_dense(purified_mps_to_mpo(psi))


def run_single(cfg: ExperimentConfig, tau: float, mode: str, o_pad: MPS,
               exact_dense, save_state_to=None):
    """Evolve one (tau, mode) pair; returns the :class:`RunRecord`."""
    h = build_xxz_spin1_hamiltonian(cfg.nsites, cfg.couplings)
    w = build_commutator_superoperator(h)
    h_state = mpo_to_purified_mps(h)
    params = TdvpRunParams.for_final_time(cfg.t_final, tau, krylov=cfg.krylov)
    start = time.perf_counter()
    if mode == "standard":
        x, nrm = left_normalize(o_pad)
        x_t, trace = evolve(x, w, params, h_state=h_state)
        result = scale(x_t, nrm)
    elif mode == "augmented":
        aug = make_augmented_state(o_pad, h, cfg.gamma_site_factor)
        x_t, trace = evolve(aug.x, w, params, h_state=h_state)
        result = aug.extract(x_t)
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    elapsed = time.perf_counter() - start
    if save_state_to is not None:
        save_train(save_state_to, result)

    h_dense = mpo_to_dense(h)
    o0 = _dense_operator(o_pad)
    ot = _dense_operator(result)
    try:
        energy_err = relative_energy_error(h_dense, o0, ot)
    except DegenerateInputError:
        LOGGER.warning("tr[H O] vanishes; reporting absolute energy error for tau=%g", tau)
        energy_err = abs(physical_energy(h_dense, ot) - physical_energy(h_dense, o0))
    return RunRecord(
        tau=tau,
        mode=mode,
        rel_energy_error=energy_err,
        trace_distance=trace_distance(ot, exact_dense),
        norm_drift=trace.norm_drift(),
        superop_energy_drift=trace.superop_energy_drift(),
        wall_time_seconds=elapsed,
        seed=cfg.seed,
    )


def _run_job(args):
    cfg, tau, mode, o_pad, exact_dense, state_path = args
    try:
        return run_single(cfg, tau, mode, o_pad, exact_dense, state_path), None
    except TensorNetworkError as exc:
        return None, {"tau": tau, "mode": mode, "error": f"{type(exc).__name__}: {exc}"}


def run_experiment(cfg: ExperimentConfig, *, write: bool = True, save_states: bool = False) -> ExperimentResult:
    """Full protocol: reference, all (tau, mode) runs, Schmidt data, output files."""
    cfg.validate()
    out = Path(cfg.output_dir) if cfg.output_dir else None
    if write and out is None:
        raise InvalidInputError("output_dir is required when writing results")
    if out is not None and write:
        out.mkdir(parents=True, exist_ok=True)

    h = build_xxz_spin1_hamiltonian(cfg.nsites, cfg.couplings)
    h_dense = mpo_to_dense(h)
    o_pad = build_initial_operator(cfg)
    o0 = _dense_operator(o_pad)
    exact = exact_reference(cfg, h_dense, o0)

    cut = cfg.nsites // 2
    spec0 = operator_schmidt_spectrum(o0, cfg.nsites, cut)
    spec_t = operator_schmidt_spectrum(exact, cfg.nsites, cut)
    rank = cfg.max_bond_dims[cut]
    truncation = float(np.sum(spec_t.coefficients[rank:] ** 2))
    entropies = {
        "t0": von_neumann_entropy(spec0),
        "t_final": von_neumann_entropy(spec_t),
        "t0_bits": von_neumann_entropy(spec0) / math.log(2),
        "t_final_bits": von_neumann_entropy(spec_t) / math.log(2),
    }

    jobs = []
    for tau in cfg.tau_grid:
        for mode in cfg.modes:
            state_path = None
            if save_states and out is not None:
                state_path = out / f"state_{mode}_tau{_fmt(tau)}.tt"
            jobs.append((cfg, tau, mode, o_pad, exact, state_path))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_job, jobs))
    else:
        outcomes = []
        for job in jobs:
            LOGGER.info("running tau=%g mode=%s", job[1], job[2])
            outcomes.append(_run_job(job))
    records = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    for f in failures:
        LOGGER.error("run failed: %s", f)

    result = ExperimentResult(
        config=cfg,
        records=records,
        failures=failures,
        schmidt={"t0": spec0.coefficients, "t_final": spec_t.coefficients},
        entropies=entropies,
        truncation_weight=truncation,
    )
    if write:
        _write_outputs(result, out, o_pad)
    return result


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for row in rows:
        out.append(RunRecord(
            tau=float(row["tau"]), mode=row["mode"],
            rel_energy_error=float(row["rel_energy_error"]),
            trace_distance=float(row["trace_distance"]),
            norm_drift=float(row["norm_drift"]),
            superop_energy_drift=float(row["superop_energy_drift"]),
            wall_time_seconds=float(row["wall_time_seconds"]),
            seed=int(row["seed"]),
        ))
    return out


def _write_outputs(result: ExperimentResult, out: Path, o_pad: MPS):
    cfg = result.config
    files = {}
    files["results"] = out / "results.csv"
    files["results"].write_text(records_to_csv(result.records))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("time_label", "index", "coefficient"))
    for label in ("t0", "t_final"):
        for i, c in enumerate(result.schmidt[label]):
            writer.writerow((label, i, _fmt(c)))
    files["schmidt"] = out / "schmidt.csv"
    files["schmidt"].write_text(buf.getvalue())

    files["initial_operator"] = out / "initial_operator.tt"
    save_train(files["initial_operator"], o_pad)

    modes_present = {r.mode for r in result.records}
    summary = summarize(result.records) if modes_present == set(MODES) else None
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "entropies": result.entropies,
        "reference_entropies": {"t0": REFERENCE_ENTROPY_T0, "t_final": REFERENCE_ENTROPY_TFINAL},
        "truncation_weight_beyond_max_bond": result.truncation_weight,
        "failures": result.failures,
        "summary": summary,
    }
    files["manifest"] = out / "manifest.json"
    files["manifest"].write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    files["config"] = out / "run.cfg"
    files["config"].write_text(cfg.to_keyvalue())
    files["summary"] = out / "summary.txt"
    files["summary"].write_text(format_summary(result, summary))
    result.files = {k: str(v) for k, v in files.items()}


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# --- analysis -----------------------------------------------------------------

def fit_convergence_order(records) -> float:
    """Least-squares slope of ``log(trace_distance)`` against ``log(tau)``.

    Needs at least 3 records spanning a factor of 4 in ``tau``.
    """
    records = list(records)
    if len(records) < 3:
        raise InvalidInputError(f"need at least 3 records, got {len(records)}")
    taus = np.array([r.tau for r in records], dtype=float)
    errs = np.array([r.trace_distance for r in records], dtype=float)
    if taus.max() < 4 * taus.min():
        raise InvalidInputError("tau values must span at least a factor of 4")
    if np.any(errs <= 0) or np.any(taus <= 0):
        raise InvalidInputError("tau and trace distances must be positive")
    slope, _ = np.polyfit(np.log(taus), np.log(errs), 1)
    return float(slope)


def summarize(records) -> dict:
    """Per-tau standard/augmented ratios, fitted orders and drift maxima."""
    by_mode = {m: {r.tau: r for r in records if r.mode == m} for m in MODES}
    if not by_mode["standard"] or not by_mode["augmented"]:
        raise InvalidInputError("summary needs records of both modes")
    taus = sorted(set(by_mode["standard"]) & set(by_mode["augmented"]))
    rows = []
    for tau in taus:
        s, a = by_mode["standard"][tau], by_mode["augmented"][tau]
        rows.append({
            "tau": tau,
            "trace_distance_standard": s.trace_distance,
            "trace_distance_augmented": a.trace_distance,
            "trace_distance_ratio": _ratio(s.trace_distance, a.trace_distance),
            "energy_error_standard": s.rel_energy_error,
            "energy_error_augmented": a.rel_energy_error,
            "energy_error_ratio": _ratio(s.rel_energy_error, a.rel_energy_error),
        })
    orders = {}
    for m in MODES:
        try:
            orders[m] = fit_convergence_order(sorted(by_mode[m].values(), key=lambda r: r.tau))
        except InvalidInputError:
            orders[m] = None
    return {
        "per_tau": rows,
        "convergence_order": orders,
        "max_norm_drift": {m: max(r.norm_drift for r in by_mode[m].values()) for m in MODES},
        "max_superop_energy_drift": {m: max(r.superop_energy_drift for r in by_mode[m].values())
                                     for m in MODES},
    }


def _ratio(a, b):
    if b == 0:
        return math.inf if a > 0 else 1.0
    return a / b


def format_summary(result: ExperimentResult, summary: dict | None) -> str:
    cfg = result.config
    lines = [
        f"spin-1 XXZ, N={cfg.nsites}, J={cfg.J}, Delta={cfg.Delta}, seed={cfg.seed}, "
        f"t_final={cfg.t_final}, max bond dims={cfg.max_bond_dims}",
        f"entanglement entropy of exact O at the middle cut: t=0 {result.entropies['t0']:.4f} "
        f"({result.entropies['t0_bits']:.4f} bits), t=t_final {result.entropies['t_final']:.4f} "
        f"({result.entropies['t_final_bits']:.4f} bits); "
        f"reference magnitudes {REFERENCE_ENTROPY_T0} / {REFERENCE_ENTROPY_TFINAL}",
        f"Schmidt weight beyond bond dimension {cfg.max_bond_dims[cfg.nsites // 2]}: "
        f"{result.truncation_weight:.3e}",
        "",
    ]
    if summary is None:
        lines.append(f"{'tau':>12} {'mode':>10} {'trace dist':>12} {'rel E err':>12} {'norm drift':>11}")
        for r in sorted(result.records, key=lambda r: (r.mode, r.tau)):
            lines.append(f"{r.tau:12.6g} {r.mode:>10} {r.trace_distance:12.4e} "
                         f"{r.rel_energy_error:12.4e} {r.norm_drift:11.2e}")
    else:
        lines.append(f"{'tau':>12} {'dist std':>12} {'dist aug':>12} {'ratio':>8} "
                     f"{'E err std':>12} {'E err aug':>12} {'ratio':>10}")
        for row in summary["per_tau"]:
            lines.append(
                f"{row['tau']:12.6g} {row['trace_distance_standard']:12.4e} "
                f"{row['trace_distance_augmented']:12.4e} {row['trace_distance_ratio']:8.2f} "
                f"{row['energy_error_standard']:12.4e} {row['energy_error_augmented']:12.4e} "
                f"{row['energy_error_ratio']:10.3g}")
        lines.append("")
        for m in MODES:
            order = summary["convergence_order"][m]
            order_txt = "n/a" if order is None else f"{order:.3f}"
            lines.append(f"{m:>10}: fitted order {order_txt}, max norm drift "
                         f"{summary['max_norm_drift'][m]:.2e}, max superoperator-energy drift "
                         f"{summary['max_superop_energy_drift'][m]:.2e}")
    if result.failures:
        lines.append("")
        lines.append("failed runs:")
        for f in result.failures:
            lines.append(f"  tau={f['tau']:g} mode={f['mode']}: {f['error']}")
    return "\n".join(lines) + "\n"
