"""Experiment orchestration: seeded Monte Carlo sweeps and CSV output.

An experiment spec pins a scenario, a criterion and three sweep axes
(SNR, initial oversampling factor, reduction algorithm).  Arms are formed
by pairing every algorithm with every compatible initial rate: design
algorithms run where M exceeds the processing rate M', while the
"identity" baseline runs at M <= M' with M' set to M (uniform
oversampling and Nyquist sampling as the M = M' special cases).

Per-trial seeds derive deterministically from the root seed and the trial
index alone, so arms and SNR points share channel, delay and symbol draws
and comparisons are paired.  Rows aggregate trials in index order, which
makes reruns byte-identical.
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .config import ConfigurationError, SystemConfig
from .detection import design_lra_mmse, run_block_detection
from .flops import FlopCounter
from .metrics import (PowerModel, mean_stderr, nmse, power_consumption, ser,
                      sum_rate_lb)
from .quantization import block_stats
from .reduction import (RatioTraceProblem, ReductionMatrix, identity_reduction,
                        initial_pattern, partition_problem, ratio_trace_objective,
                        solve_exhaustive, solve_gevd, solve_slbfs, solve_slrgs,
                        solve_simplified)
from .signal_model import build_model, draw_realization

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "load_spec",
    "run_experiment",
    "emit_csv",
    "preset_figures",
    "get_preset",
    "trial_rng",
]

DESIGN_ALGORITHMS = ("gevd", "sl-bfs", "sl-rgs", "simplified-bfs",
                     "simplified-rgs", "uniform-init")
ALGORITHMS = DESIGN_ALGORITHMS + ("identity",)
CRITERIA = ("sum_rate", "mse", "convergence", "power")

CSV_COLUMNS = ["scenario", "algorithm", "m_init", "m_proc", "k_sub", "beta",
               "snr_db", "metric", "value", "stderr", "n_trials", "seed", "flops"]


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: scenario constants plus the SNR/M/algorithm axes."""

    scenario: str
    cfg: SystemConfig
    snr_db: tuple
    m_init: tuple
    algorithms: tuple
    n_realizations: int
    criterion: str = "sum_rate"
    output: str | None = None

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ConfigurationError(f"unknown criterion {self.criterion!r}")
        if self.criterion != "power" and not (self.snr_db and self.m_init and self.algorithms):
            raise ConfigurationError("sweep axes must be non-empty")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {alg!r}")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "m_init", tuple(int(m) for m in self.m_init))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    def arms(self) -> list[tuple[str, int, int]]:
        """(algorithm, M, M') combinations actually run."""
        out = []
        for alg in self.algorithms:
            for m in self.m_init:
                if alg == "identity":
                    if m <= self.cfg.m_proc:
                        out.append((alg, m, m))
                elif m > self.cfg.m_proc:
                    out.append((alg, m, self.cfg.m_proc))
        return out


@dataclass(frozen=True)
class ResultRow:
    """One aggregated metric of one grid point."""

    scenario: str
    algorithm: str
    m_init: int
    m_proc: int
    k_sub: int
    beta: int
    snr_db: float
    metric: str
    value: float
    stderr: float
    n_trials: int
    seed: int
    flops: int


def trial_rng(root_seed: int, trial: int) -> np.random.Generator:
    """The generator of one trial; shared by all arms and SNR points."""
    return np.random.default_rng(np.random.SeedSequence([root_seed, trial]))


def _validate_before_run(spec: ExperimentSpec) -> None:
    cfg = spec.cfg
    if spec.criterion == "mse" and cfg.block_len % cfg.window_len:
        raise ConfigurationError(
            f"window_len {cfg.window_len} must divide block_len {cfg.block_len}")
    n_sym = cfg.window_len if spec.criterion == "mse" else cfg.block_len
    needs_blocks = {"sl-bfs", "sl-rgs", "simplified-bfs", "simplified-rgs"}
    for alg, m, mp in spec.arms():
        if alg not in needs_blocks:
            continue
        n = m * n_sym * cfg.n_rx
        rows = mp * n_sym * cfg.n_rx
        k = cfg.n_submatrices
        if n % k or rows % k:
            raise ConfigurationError(
                f"K={k} must divide both {n} and {rows} for {alg} at M={m}")
        if (rows // k) % mp:
            raise ConfigurationError(
                f"block rows {rows // k} must be a multiple of M'={mp} so the "
                "initial pattern is block diagonal")


def design_reduction(algorithm: str, cfg: SystemConfig,
                     problem: RatioTraceProblem,
                     counter: FlopCounter | None = None) -> ReductionMatrix:
    """Run one design algorithm on a ratio-trace problem."""
    n, m = problem.dim, problem.target_rows
    if algorithm == "identity":
        return identity_reduction(n)
    if algorithm == "uniform-init":
        red = initial_pattern(cfg, n, m)
        obj = ratio_trace_objective(red, problem.c_a, problem.c_b)
        return replace(red, objective=obj)
    if algorithm == "gevd":
        return solve_gevd(problem, counter)
    part = partition_problem(problem, cfg.n_submatrices)
    if algorithm == "sl-bfs":
        return solve_slbfs(part, problem, counter)
    init = initial_pattern(cfg, n, m)
    if algorithm == "sl-rgs":
        return solve_slrgs(part, problem, init, cfg.search_range, counter)
    if algorithm == "simplified-bfs":
        return solve_simplified(part, problem, "bfs", init, counter=counter)
    if algorithm == "simplified-rgs":
        return solve_simplified(part, problem, "rgs", init, beta=cfg.search_range,
                                counter=counter)
    raise ConfigurationError(f"unknown algorithm {algorithm!r}")


def _trial_sum_rate(cfg: SystemConfig, algorithm: str, root_seed: int,
                    trial: int) -> tuple[float, FlopCounter]:
    rng = trial_rng(root_seed, trial)
    h_flat, delays, _tx, _w = draw_realization(cfg, rng)
    model = build_model(cfg, h_flat, delays)
    stats = block_stats(model)
    counter = FlopCounter()
    rows = cfg.m_proc * cfg.block_len * cfg.n_rx
    problem = RatioTraceProblem(stats.c_yq, stats.c_nprime, rows)
    delta = design_reduction(algorithm, cfg, problem, counter)
    rate = sum_rate_lb(stats, delta, cfg.block_len, counter)
    return rate, counter


def _trial_mse(cfg: SystemConfig, algorithm: str, root_seed: int, trial: int):
    rng = trial_rng(root_seed, trial)
    h_flat, delays, tx, w = draw_realization(cfg, rng)
    counter = FlopCounter()
    wmodel = build_model(cfg, h_flat, delays, n_symbols=cfg.window_len)
    wstats = block_stats(wmodel)
    rows = cfg.m_proc * cfg.window_len * cfg.n_rx
    # window criterion: maximize the signal part over the quantized total,
    # the form whose maximizer minimizes the detector MSE
    problem = RatioTraceProblem(wstats.c_yq - wstats.c_nprime, wstats.c_yq, rows)
    delta = design_reduction(algorithm, cfg, problem, counter)
    detector = design_lra_mmse(wstats, delta, counter)
    model = build_model(cfg, h_flat, delays)
    return run_block_detection(cfg, model, detector, tx, w, counter)


def _trial_convergence(cfg: SystemConfig, root_seed: int, trial: int,
                       exhaustive_ref: bool):
    """Per-row objective gaps of the greedy search on the first submatrix."""
    rng = trial_rng(root_seed, trial)
    h_flat, delays, _tx, _w = draw_realization(cfg, rng)
    model = build_model(cfg, h_flat, delays)
    stats = block_stats(model)
    rows = cfg.m_proc * cfg.block_len * cfg.n_rx
    problem = RatioTraceProblem(stats.c_yq, stats.c_nprime, rows)
    part = partition_problem(problem, cfg.n_submatrices)
    block = part.blocks[0]
    init = initial_pattern(cfg, block.dim, block.target_rows)
    from .reduction import _rgs_block  # first-block trace, package-internal
    _, trace = _rgs_block(block, init.indices, cfg.search_range, None)
    if exhaustive_ref:
        s_opt = solve_exhaustive(block).objective
    else:
        _, free_trace = _rgs_block(block, init.indices, block.dim, None)
        s_opt = free_trace[-1]
    return [s_opt - s for s in trace], s_opt


def run_experiment(spec: ExperimentSpec, seed: int | None = None,
                   trials: int | None = None, threads: int = 1) -> list[ResultRow]:
    """Run the full sweep and return aggregated rows in a stable order."""
    _validate_before_run(spec)
    cfg = spec.cfg
    root_seed = cfg.rng_seed if seed is None else int(seed)
    n_trials = spec.n_realizations if trials is None else int(trials)
    rows: list[ResultRow] = []

    def make_row(alg, m, mp, snr, metric, value, stderr, flops, n=n_trials):
        return ResultRow(scenario=spec.scenario, algorithm=alg, m_init=m,
                         m_proc=mp, k_sub=cfg.n_submatrices, beta=cfg.search_range,
                         snr_db=snr, metric=metric, value=value, stderr=stderr,
                         n_trials=n, seed=root_seed, flops=flops)

    if spec.criterion == "power":
        pm = PowerModel()
        for m in spec.m_init:
            for bits in range(1, 9):
                p = power_consumption(pm, m, cfg.n_rx, bits)
                rows.append(make_row("power-model", m, m, 0.0, f"power_b{bits}",
                                     p, 0.0, 0, n=0))
        return rows

    def run_trials(fn):
        idx = range(n_trials)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(fn, idx))
        return [fn(t) for t in idx]

    for alg, m, mp in spec.arms():
        arm_cfg = replace(cfg, m_init=m, m_proc=mp)
        for snr in spec.snr_db:
            run_cfg = arm_cfg.with_snr_db(snr)
            if spec.criterion == "sum_rate":
                out = run_trials(lambda t: _trial_sum_rate(run_cfg, alg, root_seed, t))
                rates = [r for r, _ in out]
                flops = sum(c.total() for _, c in out)
                value, stderr = mean_stderr(rates)
                rows.append(make_row(alg, m, mp, snr, "sum_rate_lb", value, stderr, flops))
            elif spec.criterion == "mse":
                recs = run_trials(lambda t: _trial_mse(run_cfg, alg, root_seed, t))
                value, stderr = nmse(recs)
                flops = sum(r.flops.total() for r in recs if r.flops is not None)
                rows.append(make_row(alg, m, mp, snr, "nmse", value, stderr, flops))
                p, _ci = ser(recs)
                n_sym = sum(r.n_symbols for r in recs)
                se = math.sqrt(max(p * (1 - p), 0.0) / n_sym) if n_sym else 0.0
                rows.append(make_row(alg, m, mp, snr, "ser", p, se, flops))
            elif spec.criterion == "convergence":
                block_dim = m * cfg.block_len * cfg.n_rx // cfg.n_submatrices
                block_rows = mp * cfg.block_len * cfg.n_rx // cfg.n_submatrices
                exhaustive_ref = block_dim <= 16 and block_rows <= 6
                out = run_trials(lambda t: _trial_convergence(run_cfg, root_seed, t,
                                                              exhaustive_ref))
                gaps = np.array([g for g, _ in out])
                opts = np.array([s for _, s in out])
                for r in range(gaps.shape[1]):
                    value, stderr = mean_stderr(gaps[:, r])
                    rows.append(make_row(alg, m, mp, snr, f"trace_gap_r{r + 1}",
                                         value, stderr, 0))
                rel = gaps[:, -1] / opts
                value, stderr = mean_stderr(rel)
                rows.append(make_row(alg, m, mp, snr, "trace_gap_final_rel",
                                     value, stderr, 0))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def rows_to_csv_text(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def parse_csv_text(text: str) -> list[ResultRow]:
    """Round-trip parser for emitted CSV."""
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(ResultRow(
            scenario=rec["scenario"], algorithm=rec["algorithm"],
            m_init=int(rec["m_init"]), m_proc=int(rec["m_proc"]),
            k_sub=int(rec["k_sub"]), beta=int(rec["beta"]),
            snr_db=float(rec["snr_db"]), metric=rec["metric"],
            value=float(rec["value"]), stderr=float(rec["stderr"]),
            n_trials=int(rec["n_trials"]), seed=int(rec["seed"]),
            flops=int(rec["flops"])))
    return out


def spec_fingerprint(spec: ExperimentSpec) -> str:
    blob = json.dumps(asdict(spec), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def emit_csv(rows: list[ResultRow], path, spec: ExperimentSpec | None = None,
             seed: int | None = None) -> str:
    """Write rows as CSV plus a sidecar metadata JSON; returns the CSV path."""
    path = str(path)
    text = rows_to_csv_text(rows)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
        meta = {
            "tool": "obmimo",
            "version": __version__,
            "n_rows": len(rows),
            "seed": seed if seed is not None else (rows[0].seed if rows else None),
            "config_hash": spec_fingerprint(spec) if spec is not None else None,
        }
        with open(path + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as err:
        raise OSError(f"cannot write results to {path!r}: {err}") from err
    return path


def load_spec(path) -> ExperimentSpec:
    """Read an experiment spec from a TOML file.

    Top-level keys: scenario, criterion, snr_db, m_init, algorithms,
    n_realizations, output (optional); the [system] table holds
    SystemConfig fields.
    """
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    try:
        cfg = SystemConfig(**data.get("system", {}))
        return ExperimentSpec(
            scenario=data["scenario"],
            cfg=cfg,
            snr_db=tuple(data.get("snr_db", ())),
            m_init=tuple(data.get("m_init", ())),
            algorithms=tuple(data.get("algorithms", ())),
            n_realizations=int(data.get("n_realizations", 100)),
            criterion=data.get("criterion", "sum_rate"),
            output=data.get("output"),
        )
    except (KeyError, TypeError) as err:
        raise ConfigurationError(f"invalid experiment spec {path!r}: {err}") from err


def _desk_or_paper(desk: bool, desk_val, paper_val):
    return desk_val if desk else paper_val


def preset_figures(scale: str = "desk") -> list[ExperimentSpec]:
    """Experiment specs reproducing the main result families.

    ``scale="desk"`` shrinks the antenna count and trial budget for
    minutes-long runs; ``scale="paper"`` uses the full experiment sizes
    (64 antennas, 1000 realizations) and can take hours.
    """
    if scale not in ("desk", "paper"):
        raise ConfigurationError(f"scale must be 'desk' or 'paper', got {scale!r}")
    desk = scale == "desk"
    n_rx = _desk_or_paper(desk, 16, 64)
    n_tr = _desk_or_paper(desk, 200, 1000)
    base = dict(n_users=4, n_rx=n_rx, m_proc=2, rolloff=0.8, window_len=4,
                n_submatrices=8, search_range=5, rng_seed=20260810)
    rate_cfg = SystemConfig(block_len=4, modulation="gaussian", **base)
    mse_cfg = SystemConfig(block_len=100, modulation="qpsk", **base)
    snrs = _desk_or_paper(desk, (0.0, 5.0, 10.0, 15.0), (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0))
    det_snrs = _desk_or_paper(desk, (0.0, 5.0, 10.0), (-10.0, -5.0, 0.0, 5.0, 10.0))

    specs = [
        ExperimentSpec("fig-sumrate", rate_cfg, snrs, (6, 3, 2, 1),
                       ("gevd", "sl-rgs", "simplified-rgs", "identity"),
                       n_tr, "sum_rate"),
        ExperimentSpec("fig-nmse", mse_cfg, det_snrs, (3, 2, 1),
                       ("gevd", "sl-rgs", "identity"),
                       _desk_or_paper(desk, 100, 1000), "mse"),
        ExperimentSpec("fig-ser", mse_cfg, det_snrs, (3, 2, 1),
                       ("sl-rgs", "simplified-rgs", "simplified-bfs", "identity"),
                       _desk_or_paper(desk, 200, 1000), "mse"),
        ExperimentSpec("fig-power", SystemConfig(n_rx=64, **{k: v for k, v in base.items()
                                                             if k != "n_rx"}),
                       (0.0,), (1, 2, 3, 4, 6, 8), ("identity",), 0, "power"),
    ]
    for k in _desk_or_paper(desk, (2, 4, 8, 16), (4, 8, 16, 32)):
        cfg_k = replace(rate_cfg, n_submatrices=k)
        specs.append(ExperimentSpec(f"fig-choiceK/K={k}", cfg_k, (10.0,), (6,),
                                    ("simplified-rgs",),
                                    _desk_or_paper(desk, 100, 1000), "sum_rate"))
    for beta in (1, 2, 5, 8, 12):
        cfg_b = replace(rate_cfg, search_range=beta)
        specs.append(ExperimentSpec(f"fig-choicebeta/beta={beta}", cfg_b, (10.0,), (6,),
                                    ("sl-rgs",),
                                    _desk_or_paper(desk, 100, 1000), "sum_rate"))
    if desk:
        conv_cfg = SystemConfig(n_users=1, n_rx=2, block_len=2, m_proc=2,
                                n_submatrices=2, search_range=5,
                                modulation="gaussian", rng_seed=20260810)
        specs.append(ExperimentSpec("fig-convergence", conv_cfg, (10.0,), (6,),
                                    ("sl-rgs",), 100, "convergence"))
    else:
        conv_cfg = SystemConfig(n_users=4, n_rx=64, block_len=4, m_proc=2,
                                n_submatrices=8, search_range=5,
                                modulation="gaussian", rng_seed=20260810)
        specs.append(ExperimentSpec("fig-convergence", conv_cfg, (10.0,), (3,),
                                    ("sl-rgs",), 100, "convergence"))
    return specs


def get_preset(name: str, scale: str = "desk") -> list[ExperimentSpec]:
    """Presets whose scenario matches ``name`` (family prefix allowed)."""
    specs = [s for s in preset_figures(scale)
             if s.scenario == name or s.scenario.startswith(name + "/")]
    if not specs:
        names = sorted({s.scenario.split("/")[0] for s in preset_figures(scale)})
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(names)}")
    return specs
