"""Ensemble orchestration: disorder realizations -> eigenstates -> indicator
records -> aggregated disorder curves, deterministically and resumably.

Every realization derives its seed as splitmix64 mixing of
(master_seed, W index, realization index), so record content is a pure
function of the run configuration regardless of worker count or scheduling.
Records are written one row per eigenstate with the frozen schema

    seed,W,L,model,method,state_id,energy,variance,c_tot,n_tot,s_g,npr,accepted

and aggregated per (L, W) into curves with schema L,indicator,W,mean,stderr,n.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .dense import mid_indices, mid_spectrum_dense
from .entanglement import (
    concurrence,
    fit_entanglement_length,
    geometric_entanglement_dense,
    geometric_entanglement_mps,
    negativity,
    npr,
    two_site_rdm_dense,
)
from .model import (
    ChainSpec,
    DEFAULT_DENSE_CAP,
    build_dense_hamiltonian,
    build_hamiltonian_mpo,
    build_shifted_mpo,
    local_dim,
    sample_disorder,
)
from .mps import two_site_rdm_mps
from .mps_io import save_mps
from .scaling import CURVES_HEADER, DisorderCurve, write_curves_csv
from .simps import SimpsConfig, choose_targets, simps_solve

RECORDS_HEADER = [
    "seed", "W", "L", "model", "method", "state_id", "energy", "variance",
    "c_tot", "n_tot", "s_g", "npr", "accepted",
]

PROFILE_HEADER = ["L", "W", "measure", "distance", "mean", "stderr", "n"]

_U64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ConfigError(ValueError):
    """A run configuration that cannot be executed."""


def _splitmix64(x: int) -> int:
    x &= _U64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _U64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _U64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable seed derivation: fold each index into the state with the
    splitmix64 finalizer (documented contract; do not change)."""
    state = _splitmix64(master_seed & _U64)
    for k in indices:
        state = _splitmix64((state + _GOLDEN * (k + 1)) & _U64)
    return state


@dataclass(frozen=True)
class RunConfig:
    lengths: tuple = (8,)
    local_spin: str = "half"
    field_distribution: str = "symmetric"
    w_list: tuple = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    n_realizations: int = 50
    n_states: int = 10
    method: str = "auto"
    dense_cap: int = DEFAULT_DENSE_CAP
    master_seed: int = 0
    workers: int = 1
    out_dir: str = "."
    # SIMPS knobs
    bond_dim: int = 30
    eps1: float = 1e-6
    eps2: float = 1e-8
    eps3: float = 1e-9
    eps4: float = 1e-7
    eps5: float = 1e-8
    delta1_floor: float = 0.8
    max_outer: int = 60
    max_sweeps: int = 24
    shift_guard: float = 1e-6
    target_band_scale: float = 0.1
    # geometric entanglement knobs
    ge_restarts: int = 24
    ge_tol: float = 1e-8
    ge_max_sweeps: int = 500
    ge_log_base: float = 0.0  # 0 = natural log
    # indicator toggles
    compute_concurrence: bool = True
    compute_negativity: bool = True
    compute_ge: bool = True
    compute_npr: bool = True
    verbose: bool = False
    resume: bool = False
    save_states: bool = False

    def validate(self) -> None:
        if not self.lengths:
            raise ConfigError("lengths must not be empty")
        if any(length < 2 for length in self.lengths):
            raise ConfigError("every length must be >= 2")
        if self.local_spin not in ("half", "one"):
            raise ConfigError(f"unknown local_spin {self.local_spin!r}")
        if self.field_distribution not in ("symmetric", "positive"):
            raise ConfigError(
                f"unknown field_distribution {self.field_distribution!r}"
            )
        if not self.w_list:
            raise ConfigError("w_list must not be empty")
        if any(w < 0 for w in self.w_list):
            raise ConfigError("disorder strengths must be nonnegative")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        if self.n_states < 1:
            raise ConfigError("n_states must be >= 1")
        if self.method not in ("ed", "simps", "auto"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for length in self.lengths:
            if self.resolve_method(length) == "ed":
                dim = local_dim(self.local_spin) ** length
                if dim > self.dense_cap:
                    raise ConfigError(
                        f"L={length} needs {dim} dense states, above the cap "
                        f"{self.dense_cap}; use method=simps"
                    )
                if self.n_states > dim:
                    raise ConfigError(
                        f"n_states={self.n_states} exceeds the spectrum at L={length}"
                    )

    def resolve_method(self, length: int) -> str:
        if self.method != "auto":
            return self.method
        dim = local_dim(self.local_spin) ** length
        return "ed" if dim <= self.dense_cap else "simps"

    def simps_config(self, seed: int) -> SimpsConfig:
        return SimpsConfig(
            bond_dim=self.bond_dim, eps1=self.eps1, eps2=self.eps2,
            eps3=self.eps3, eps4=self.eps4, eps5=self.eps5,
            delta1_floor=self.delta1_floor, max_outer=self.max_outer,
            max_sweeps=self.max_sweeps, shift_guard=self.shift_guard, seed=seed,
        )

    @property
    def log_base(self):
        return None if not self.ge_log_base else self.ge_log_base


_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "on": True,
                 "false": False, "0": False, "no": False, "off": False}


def _parse_value(name: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_STRINGS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_STRINGS[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            if name == "ge_log_base" and raw.lower() in ("e", "natural"):
                return 0.0
            return float(raw)
        if kind is str:
            return raw
        if kind is tuple:
            parts = [p for p in raw.replace(",", " ").split() if p]
            if name == "lengths":
                return tuple(int(p) for p in parts)
            return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r} ({exc})") from exc
    raise ConfigError(f"unhandled config type for {name!r}")


def config_field_types() -> dict:
    out = {}
    for f in fields(RunConfig):
        if isinstance(f.default, bool):
            out[f.name] = bool
        elif isinstance(f.default, int):
            out[f.name] = int
        elif isinstance(f.default, float):
            out[f.name] = float
        elif isinstance(f.default, tuple):
            out[f.name] = tuple
        else:
            out[f.name] = str
    return out


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse line-oriented `key = value` text into a RunConfig."""
    types = config_field_types()
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        overrides[key] = _parse_value(key, raw, types[key])
    cfg = base if base is not None else RunConfig()
    return replace(cfg, **overrides)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)


@dataclass
class EigenstateRecord:
    seed: int
    w: float
    length: int
    model: str
    method: str
    state_id: int
    energy: float
    variance: float
    c_tot: float | None
    n_tot: float | None
    s_g: float | None
    npr_value: float | None
    accepted: bool

    def as_row(self) -> list[str]:
        def num(x, fmt="{:.12g}"):
            return "" if x is None else fmt.format(x)

        return [
            str(self.seed), f"{self.w:.10g}", str(self.length), self.model,
            self.method, str(self.state_id), num(self.energy),
            num(self.variance), num(self.c_tot), num(self.n_tot),
            num(self.s_g), num(self.npr_value),
            "1" if self.accepted else "0",
        ]

    @classmethod
    def from_row(cls, row) -> "EigenstateRecord":
        def opt(x):
            return None if x == "" else float(x)

        return cls(
            seed=int(row[0]), w=float(row[1]), length=int(row[2]), model=row[3],
            method=row[4], state_id=int(row[5]), energy=float(row[6]),
            variance=float(row[7]), c_tot=opt(row[8]), n_tot=opt(row[9]),
            s_g=opt(row[10]), npr_value=opt(row[11]), accepted=row[12] == "1",
        )


def _limit_worker_threads():
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=1)
    except Exception:
        pass


def _single_thread_blas():
    """Pin BLAS to one thread while computing records.

    Threaded kernels change floating-point summation order, so the same task
    would emit slightly different numbers depending on worker topology; the
    determinism contract (records are a pure function of the config) requires
    one fixed execution width everywhere.
    """
    try:
        import threadpoolctl

        return threadpoolctl.threadpool_limits(limits=1)
    except Exception:
        import contextlib

        return contextlib.nullcontext()


def _ed_states(spec: ChainSpec, realization, cfg: RunConfig):
    ham = build_dense_hamiltonian(realization, dense_cap=cfg.dense_cap)
    sl = mid_spectrum_dense(ham, cfg.n_states)
    vectors = sl.vectors()
    energies = sl.energies()
    resid = ham.entries @ vectors - vectors * energies[None, :]
    variances = np.sum(np.abs(resid) ** 2, axis=0)
    start = mid_indices(ham.dim, cfg.n_states).start
    return [
        (start + k, energies[k], float(variances[k]), vectors[:, k])
        for k in range(len(energies))
    ]


def _adjacent_rdms_dense(vec, length, d):
    return [two_site_rdm_dense(vec, i, i + 1, local_dim=d) for i in range(length - 1)]


def _adjacent_rdms_mps(psi):
    return [two_site_rdm_mps(psi, i, i + 1) for i in range(psi.length - 1)]


def run_realization(cfg: RunConfig, length: int, iw: int, ir: int):
    """All records (plus convergence log lines) for one disorder realization."""
    with _single_thread_blas():
        return _run_realization_impl(cfg, length, iw, ir)


def _run_realization_impl(cfg: RunConfig, length: int, iw: int, ir: int):
    w = cfg.w_list[iw]
    seed = derive_seed(cfg.master_seed, iw, ir)
    spec = ChainSpec(
        length=length, local_spin=cfg.local_spin, disorder_strength=w,
        field_distribution=cfg.field_distribution, seed=seed,
    )
    realization = sample_disorder(spec)
    method = cfg.resolve_method(length)
    d = spec.local_dim
    records = []
    log_lines = []
    states_to_save = []

    if method == "ed":
        for state_id, energy, variance, vec in _ed_states(spec, realization, cfg):
            c_tot = n_tot = s_g = p = None
            if cfg.compute_concurrence or cfg.compute_negativity:
                rdms = _adjacent_rdms_dense(vec, length, d)
                if cfg.compute_concurrence and d == 2:
                    c_tot = sum(concurrence(r) for r in rdms)
                if cfg.compute_negativity:
                    n_tot = sum(negativity(r) for r in rdms)
            if cfg.compute_ge:
                _, s_g = geometric_entanglement_dense(
                    vec, restarts=cfg.ge_restarts, tol=cfg.ge_tol,
                    max_sweeps=cfg.ge_max_sweeps, local_dim=d,
                    seed=derive_seed(seed, 7, state_id), log_base=cfg.log_base,
                )
            if cfg.compute_npr:
                p = npr(vec)
            records.append(
                EigenstateRecord(
                    seed=seed, w=w, length=length, model=cfg.local_spin,
                    method="ed", state_id=state_id, energy=energy,
                    variance=variance, c_tot=c_tot, n_tot=n_tot, s_g=s_g,
                    npr_value=p, accepted=True,
                )
            )
    else:
        ham_mpo = build_hamiltonian_mpo(realization)
        targets = choose_targets(
            spec, cfg.n_states, derive_seed(seed, 1), band_scale=cfg.target_band_scale
        )
        for t_idx, lam in enumerate(targets):
            op = build_shifted_mpo(realization, float(lam))
            simps_cfg = cfg.simps_config(seed=derive_seed(seed, 2, t_idx))
            psi, report = simps_solve(op, ham_mpo, simps_cfg)
            if cfg.verbose:
                log_lines.append(report.to_json_line())
            step = report.steps[-1] if report.steps else None
            c_tot = n_tot = s_g = None
            if report.accepted:
                if cfg.compute_concurrence or cfg.compute_negativity:
                    rdms = _adjacent_rdms_mps(psi)
                    if cfg.compute_concurrence and d == 2:
                        c_tot = sum(concurrence(r) for r in rdms)
                    if cfg.compute_negativity:
                        n_tot = sum(negativity(r) for r in rdms)
                if cfg.compute_ge:
                    _, s_g = geometric_entanglement_mps(
                        psi, restarts=cfg.ge_restarts, tol=cfg.ge_tol,
                        max_sweeps=cfg.ge_max_sweeps,
                        seed=derive_seed(seed, 7, t_idx), log_base=cfg.log_base,
                    )
                if cfg.save_states:
                    states_to_save.append((t_idx, psi))
            records.append(
                EigenstateRecord(
                    seed=seed, w=w, length=length, model=cfg.local_spin,
                    method="simps", state_id=t_idx,
                    energy=step.energy if step else float("nan"),
                    variance=step.delta4 if step else float("nan"),
                    c_tot=c_tot, n_tot=n_tot, s_g=s_g, npr_value=None,
                    accepted=report.accepted,
                )
            )
    return records, log_lines, states_to_save


def _task(args):
    cfg, length, iw, ir = args
    return (length, iw, ir), run_realization(cfg, length, iw, ir)


def _manifest_path(out_dir):
    return os.path.join(out_dir, "manifest.txt")


def config_fingerprint(cfg: RunConfig) -> str:
    import hashlib

    payload = repr(tuple(getattr(cfg, f.name) for f in fields(cfg)
                         if f.name not in ("workers", "out_dir", "verbose",
                                           "resume")))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _read_manifest(out_dir, fingerprint: str) -> set:
    path = _manifest_path(out_dir)
    done = set()
    if os.path.exists(path):
        with open(path) as fh:
            first = fh.readline().split()
            if len(first) != 2 or first[0] != "config":
                raise ConfigError(f"{path}: missing config fingerprint header")
            if first[1] != fingerprint:
                raise ConfigError(
                    f"{path}: checkpoint belongs to a different configuration"
                )
            for line in fh:
                parts = line.split()
                if len(parts) == 3:
                    done.add(tuple(int(p) for p in parts))
    return done


def _partial_path(out_dir):
    return os.path.join(out_dir, "records.partial.csv")


def _load_partial(out_dir) -> dict:
    """Previously completed tasks' records, keyed by (L, iw, ir); duplicate
    (task, state) rows from an interrupted rerun keep the last occurrence."""
    path = _partial_path(out_dir)
    rows = {}
    if os.path.exists(path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and header != ["task_L", "task_iw", "task_ir"] + RECORDS_HEADER:
                raise ConfigError(f"unexpected partial-records header in {path}")
            for row in reader:
                key = (int(row[0]), int(row[1]), int(row[2]))
                rec = EigenstateRecord.from_row(row[3:])
                rows.setdefault(key, {})[rec.state_id] = rec
    return {
        key: [recs[s] for s in sorted(recs)] for key, recs in rows.items()
    }


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDS_HEADER)
        for rec in records:
            writer.writerow(rec.as_row())


def read_records_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORDS_HEADER:
            raise ConfigError(f"unexpected records header in {path}")
        return [EigenstateRecord.from_row(row) for row in reader]


def aggregate_curves(records) -> list:
    """Per-(L, W) means and standard errors of the accepted records."""
    groups = {}
    for rec in records:
        if rec.accepted:
            groups.setdefault((rec.length, rec.w), []).append(rec)

    def stats(values):
        values = np.array([v for v in values if v is not None], dtype=float)
        if values.size == 0:
            return None
        stderr = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0
        return float(values.mean()), float(stderr), int(values.size)

    per_indicator = {}
    for (length, w), recs in sorted(groups.items()):
        dim = local_dim(recs[0].model) ** length
        pulls = {
            "C_tot": [r.c_tot for r in recs],
            "N_tot": [r.n_tot for r in recs],
            "C_avg_nn": [
                None if r.c_tot is None else r.c_tot / (length - 1) for r in recs
            ],
            "N_avg_nn": [
                None if r.n_tot is None else r.n_tot / (length - 1) for r in recs
            ],
            "S_G": [r.s_g for r in recs],
            # participation ratio normalized by the Hilbert-space volume so
            # sizes can share one axis
            "NPR": [
                None if r.npr_value is None else r.npr_value / dim for r in recs
            ],
        }
        for indicator, values in pulls.items():
            s = stats(values)
            if s is not None:
                per_indicator.setdefault((length, indicator), []).append((w,) + s)

    curves = []
    for (length, indicator), pts in sorted(per_indicator.items()):
        pts.sort(key=lambda p: p[0])
        w, mean, stderr, n = map(np.array, zip(*pts))
        curves.append(
            DisorderCurve(
                length=length, indicator=indicator, w=w, mean=mean,
                stderr=stderr, n_samples=n.astype(int),
            )
        )
    return curves


def run_ensemble(cfg: RunConfig) -> dict:
    """Execute the full ensemble; returns paths of the emitted files."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    tasks = [
        (length, iw, ir)
        for length in cfg.lengths
        for iw in range(len(cfg.w_list))
        for ir in range(cfg.n_realizations)
    ]
    fingerprint = config_fingerprint(cfg)
    done = _read_manifest(cfg.out_dir, fingerprint) if cfg.resume else set()
    existing = _load_partial(cfg.out_dir) if cfg.resume else {}
    todo = [t for t in tasks if t not in done or t not in existing]

    partial = _partial_path(cfg.out_dir)
    manifest = _manifest_path(cfg.out_dir)
    if not cfg.resume or not os.path.exists(partial):
        with open(partial, "w", newline="") as fh:
            csv.writer(fh).writerow(["task_L", "task_iw", "task_ir"] + RECORDS_HEADER)
        with open(manifest, "w") as fh:
            fh.write(f"config {fingerprint}\n")
        existing = {}
        todo = tasks

    log_path = os.path.join(cfg.out_dir, "convergence.jsonl")
    results = dict(existing)
    args = [(cfg, length, iw, ir) for (length, iw, ir) in todo]
    if cfg.workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(
            max_workers=cfg.workers, initializer=_limit_worker_threads
        ) as pool:
            outputs = pool.map(_task, args, chunksize=1)
            _collect(cfg, outputs, results, partial, manifest, log_path)
    else:
        _collect(cfg, map(_task, args), results, partial, manifest, log_path)

    records = []
    for key in tasks:
        records.extend(results[key])
    records_path = os.path.join(cfg.out_dir, "records.csv")
    write_records_csv(records, records_path)
    curves = aggregate_curves(records)
    curves_path = os.path.join(cfg.out_dir, "curves.csv")
    write_curves_csv(curves, curves_path)
    return {
        "records": records_path,
        "curves": curves_path,
        "manifest": manifest,
        "n_records": len(records),
        "n_accepted": sum(1 for r in records if r.accepted),
    }


def _collect(cfg, outputs, results, partial, manifest, log_path):
    for key, (records, log_lines, states) in outputs:
        results[key] = records
        with open(partial, "a", newline="") as fh:
            writer = csv.writer(fh)
            for rec in records:
                writer.writerow([key[0], key[1], key[2]] + rec.as_row())
        with open(manifest, "a") as fh:
            fh.write(f"{key[0]} {key[1]} {key[2]}\n")
        if cfg.verbose and log_lines:
            with open(log_path, "a") as fh:
                fh.write("\n".join(log_lines) + "\n")
        if cfg.save_states and states:
            state_dir = os.path.join(cfg.out_dir, "states")
            os.makedirs(state_dir, exist_ok=True)
            for t_idx, psi in states:
                name = f"L{key[0]}_w{key[1]}_r{key[2]}_s{t_idx}.mps"
                save_mps(
                    psi, os.path.join(state_dir, name), model=cfg.local_spin,
                    seed=derive_seed(cfg.master_seed, key[1], key[2]),
                )


def _profile_states(cfg: RunConfig, length: int, iw: int, ir: int):
    """The states of one realization, as dense vectors or MPS."""
    w = cfg.w_list[iw]
    seed = derive_seed(cfg.master_seed, iw, ir)
    spec = ChainSpec(
        length=length, local_spin=cfg.local_spin, disorder_strength=w,
        field_distribution=cfg.field_distribution, seed=seed,
    )
    realization = sample_disorder(spec)
    if cfg.resolve_method(length) == "ed":
        return [vec for _, _, _, vec in _ed_states(spec, realization, cfg)]
    ham_mpo = build_hamiltonian_mpo(realization)
    targets = choose_targets(
        spec, cfg.n_states, derive_seed(seed, 1), band_scale=cfg.target_band_scale
    )
    states = []
    for t_idx, lam in enumerate(targets):
        op = build_shifted_mpo(realization, float(lam))
        psi, report = simps_solve(
            op, ham_mpo, cfg.simps_config(seed=derive_seed(seed, 2, t_idx))
        )
        if report.accepted:
            states.append(psi)
    return states


def _profile_task(args):
    cfg, length, iw, ir = args
    with _single_thread_blas():
        return _profile_task_impl(cfg, length, iw, ir)


def _profile_task_impl(cfg, length, iw, ir):
    states = _profile_states(cfg, length, iw, ir)
    if not states:
        return (length, iw), None
    measure = "both" if cfg.local_spin == "half" else "negativity"
    d = local_dim(cfg.local_spin)
    max_dist = length // 2
    sums = {"concurrence": np.zeros(max_dist), "negativity": np.zeros(max_dist)}
    sq = {"concurrence": np.zeros(max_dist), "negativity": np.zeros(max_dist)}
    counts = np.zeros(max_dist, dtype=int)
    for state in states:
        for k, dist in enumerate(range(1, max_dist + 1)):
            for i in range(length - dist):
                if isinstance(state, np.ndarray):
                    rho = two_site_rdm_dense(state, i, i + dist, local_dim=d)
                else:
                    rho = two_site_rdm_mps(state, i, i + dist)
                if measure == "both":
                    c = concurrence(rho)
                    sums["concurrence"][k] += c
                    sq["concurrence"][k] += c * c
                nval = negativity(rho)
                sums["negativity"][k] += nval
                sq["negativity"][k] += nval * nval
                counts[k] += 1
    return (length, iw), (sums, sq, counts, measure)


def emit_profiles(cfg: RunConfig, path=None) -> str:
    """Distance profiles of pair entanglement per (L, W), with decay-fit
    footer rows (distance column holds `slope`, `xi`, `r2`)."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = path or os.path.join(cfg.out_dir, "profiles.csv")

    tasks = [
        (cfg, length, iw, ir)
        for length in cfg.lengths
        for iw in range(len(cfg.w_list))
        for ir in range(cfg.n_realizations)
    ]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=cfg.workers, initializer=_limit_worker_threads
        ) as pool:
            outputs = list(pool.map(_profile_task, tasks, chunksize=1))
    else:
        outputs = [_profile_task(t) for t in tasks]

    merged = {}
    for key, payload in outputs:
        if payload is None:
            continue
        sums, sq, counts, measure = payload
        slot = merged.setdefault(
            key,
            {
                "sums": {k: np.zeros_like(v) for k, v in sums.items()},
                "sq": {k: np.zeros_like(v) for k, v in sq.items()},
                "counts": np.zeros_like(counts),
                "measure": measure,
            },
        )
        for k in sums:
            slot["sums"][k] += sums[k]
            slot["sq"][k] += sq[k]
        slot["counts"] += counts

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_HEADER)
        for (length, iw), slot in sorted(merged.items()):
            w = cfg.w_list[iw]
            counts = slot["counts"]
            measures = (
                ("concurrence", "negativity")
                if slot["measure"] == "both"
                else ("negativity",)
            )
            for measure in measures:
                mean = slot["sums"][measure] / counts
                var = slot["sq"][measure] / counts - mean**2
                stderr = np.sqrt(np.clip(var, 0, None) / counts)
                for k, dist in enumerate(range(1, length // 2 + 1)):
                    writer.writerow(
                        [length, f"{w:.10g}", measure, dist,
                         f"{mean[k]:.12g}", f"{stderr[k]:.12g}", counts[k]]
                    )
                try:
                    fit = fit_entanglement_length(
                        np.arange(1, length // 2 + 1), mean
                    )
                    for name, value in (
                        ("slope", fit.slope), ("xi", fit.xi), ("r2", fit.r_squared)
                    ):
                        writer.writerow(
                            [length, f"{w:.10g}", measure, name,
                             f"{value:.12g}", "", ""]
                        )
                except ValueError:
                    pass
    return path
