"""Learning-assisted evolutionary loop, baseline runs and comparison tables.

A SeqMO generation, on top of a host EA (NSGA-II or MOEA/D):

1. the host produces one offspring per population slot;
2. on training generations the offspring are split into poor and elite
   halves, matched by objective-space angle, the pointer network is trained
   on poor -> elite genotypes and then decodes a new solution from every
   poor one;
3. the host's environmental selection runs over parents, offspring and the
   generated solutions.

Every objective evaluation, generated solutions included, is charged to the
same budget. The loop stops at the first generation boundary where the
budget is exceeded.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .core import Individual, RngStreams, to_external
from .metrics import UpdateTrace, normalized_hv, nondominated, union_bounds
from .moea import environment_selection, make_host
from .neuralnet import PointerNet, TrainConfig, predict, train
from .pairing import build_training_set
from .problems import CountingProblem, load_instance, make_instance

CONFIG_VERSION = 1
ALGORITHMS = ("nsga2", "moead", "seqmo")
ROLES = ("poor", "elite", "population", "generated", "generated-and-accepted")


class ConfigError(ValueError):
    pass


def desk_train_config() -> TrainConfig:
    return TrainConfig(epochs=20, hidden_units=64)


@dataclass
class RunConfig:
    problem: str = "motsp"
    n: int = 15
    k: int = 2
    instance_seed: int = 0
    instance_path: str | None = None
    algorithm: str = "seqmo"
    host: str = "moead"
    n_pop: int = 100
    max_fe: int = 50_000
    pairing: str = "hungarian"
    train_every: int | None = 5  # None disables training entirely
    warm_start: bool = True
    snapshot_every: int = 11
    seed: int = 1
    neighborhood: int = 20
    max_replace: int = 2
    generated_origin: str = "poor"  # subproblem a generated solution competes in: its input's or its label's
    mutation_rate: float | None = None
    train: TrainConfig = field(default_factory=desk_train_config)

    @classmethod
    def full_profile(cls, **kw) -> "RunConfig":
        return cls(train_every=1, train=TrainConfig(), **kw)

    @property
    def label(self) -> str:
        return f"seqmo-{self.host}" if self.algorithm == "seqmo" else self.algorithm

    @property
    def host_name(self) -> str:
        return self.host if self.algorithm == "seqmo" else self.algorithm

    @property
    def instance_label(self) -> str:
        if self.instance_path:
            return Path(self.instance_path).stem
        return f"{self.problem.upper()}{self.n}"

    def validate(self) -> "RunConfig":
        if self.problem not in ("motsp", "moqap"):
            raise ConfigError(f"problem must be motsp or moqap, got {self.problem!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.host not in ("nsga2", "moead"):
            raise ConfigError(f"host must be nsga2 or moead, got {self.host!r}")
        if self.generated_origin not in ("poor", "elite"):
            raise ConfigError(f"generated_origin must be poor or elite, got {self.generated_origin!r}")
        if self.pairing not in ("greedy", "hungarian"):
            raise ConfigError(f"pairing must be greedy or hungarian, got {self.pairing!r}")
        if self.n < 3 or self.k < 2:
            raise ConfigError("need n >= 3 and k >= 2")
        if self.n_pop < 2:
            raise ConfigError("n_pop must be at least 2")
        if self.max_fe <= self.n_pop:
            raise ConfigError(f"max_fe ({self.max_fe}) must exceed n_pop ({self.n_pop})")
        if self.train_every is not None and self.train_every < 1:
            raise ConfigError("train_every must be >= 1 (or unset to disable training)")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if not 0 <= self.seed < 2**64 or not 0 <= self.instance_seed < 2**64:
            raise ConfigError("seeds must be unsigned 64-bit integers")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ConfigError("mutation_rate must be in [0, 1]")
        return self

    # -- key/value file --------------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        run = {"format_version": str(CONFIG_VERSION)}
        for f in fields(self):
            if f.name == "train":
                continue
            v = getattr(self, f.name)
            run[f.name] = "none" if v is None else str(v)
        cp["run"] = run
        cp["train"] = {k: str(v) for k, v in asdict(self.train).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable run config: {exc}") from exc
        if "run" not in cp:
            raise ConfigError("run config needs a [run] section")
        run = dict(cp["run"])
        version = run.pop("format_version", str(CONFIG_VERSION))
        if version != str(CONFIG_VERSION):
            raise ConfigError(f"unsupported run config version {version}")
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in run.items():
            if key not in types or key == "train":
                raise ConfigError(f"unknown run config key {key!r}")
            kw[key] = _coerce(key, raw, types[key])
        tkw = {}
        if "train" in cp:
            ttypes = {f.name: f.type for f in fields(TrainConfig)}
            for key, raw in cp["train"].items():
                if key not in ttypes:
                    raise ConfigError(f"unknown train config key {key!r}")
                tkw[key] = _coerce(key, raw, ttypes[key])
        try:
            base = desk_train_config()
            kw["train"] = replace(base, **tkw)
            return cls(**kw).validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read run config {path}: {exc}") from exc
        return cls.from_ini(text)


def _coerce(key: str, raw: str, typ):
    raw = raw.strip()
    typ = str(typ)
    if raw.lower() == "none":
        if "None" in typ:
            return None
        raise ConfigError(f"{key} may not be none")
    try:
        if typ.startswith("bool"):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


# -- results containers -------------------------------------------------------------

@dataclass
class Snapshot:
    iteration: int
    generation: int
    points: list[tuple[int, str, tuple[float, ...]]] = field(default_factory=list)
    lines: list[tuple[int, int]] = field(default_factory=list)

    def add(self, role: str, f) -> int:
        pid = len(self.points)
        self.points.append((pid, role, tuple(float(x) for x in f)))
        return pid

    def role(self, name: str) -> np.ndarray:
        return np.array([f for _, r, f in self.points if r == name]).reshape(-1, 2)


@dataclass
class RunResult:
    config: RunConfig
    population: object
    hv: float
    evaluations: int
    generations: int
    trace: UpdateTrace
    snapshots: list[Snapshot]
    losses: list[tuple[int, int, list[float]]]
    history: list[np.ndarray] | None = None
    wall_time: float = 0.0


def _load_problem(cfg: RunConfig):
    if cfg.instance_path:
        inst = load_instance(cfg.instance_path)
        if inst.kind != cfg.problem or inst.n != cfg.n or inst.n_obj != cfg.k:
            raise ConfigError(
                f"instance {cfg.instance_path} is {inst.kind} n={inst.n} k={inst.n_obj}, "
                f"config says {cfg.problem} n={cfg.n} k={cfg.k}"
            )
        return inst
    return make_instance(cfg.problem, cfg.n, cfg.k, cfg.instance_seed)


def _host(cfg: RunConfig, n_obj: int):
    if cfg.host_name == "moead":
        return make_host("moead", cfg.n_pop, n_obj, neighborhood=cfg.neighborhood,
                         max_replace=cfg.max_replace, mutation_rate=cfg.mutation_rate)
    return make_host("nsga2", cfg.n_pop, n_obj, mutation_rate=cfg.mutation_rate)


def default_bounds(initial_F) -> tuple[np.ndarray, np.ndarray]:
    """Per-run normalization: origin to the worst initial objective values."""
    return np.zeros(initial_F.shape[1]), initial_F.max(axis=0)


def _is_training_generation(cfg: RunConfig, gen: int) -> bool:
    return (
        cfg.algorithm == "seqmo"
        and cfg.train_every is not None
        and (gen - 1) % cfg.train_every == 0
    )


def run_seqmo(cfg: RunConfig, record_history: bool = False) -> RunResult:
    """Run the learning-assisted loop (or its host alone when training is off)."""
    cfg.validate()
    t0 = time.perf_counter()
    problem = CountingProblem(_load_problem(cfg))
    streams = RngStreams(cfg.seed)
    ea = streams["ea"]
    host = _host(cfg, problem.n_obj)
    with threadpool_limits(1):
        P = host.initialize(problem, ea)
        bounds = default_bounds(P.objectives)
        history = [P.objectives] if record_history else None
        trace = UpdateTrace()
        snapshots: list[Snapshot] = []
        losses = []
        net = None
        gen = 0
        iteration = 0
        while problem.evaluations <= cfg.max_fe:
            gen += 1
            C = host.offspring(P, problem, ea)
            generated: list[Individual] = []
            pairs = poor = elite = None
            if _is_training_generation(cfg, gen):
                iteration += 1
                pairs, poor, elite = build_training_set(C, cfg.pairing)
                if net is None or not cfg.warm_start:
                    net = PointerNet.from_config(problem.n, cfg.train, streams["neural_init"])
                net, loss_trace = train(pairs, cfg.train, net, streams["shuffle"])
                losses.append((iteration, gen, loss_trace))
                guide = zip(pairs.poor_index, pairs.elite_index, predict(pairs.data, net))
                for src, dst, g in guide:
                    parent = C[poor[src]] if cfg.generated_origin == "poor" else C[elite[dst]]
                    generated.append(Individual(g, problem.evaluate(g), origin=parent.origin))
            P, credits = environment_selection(host, P, C, generated, ea)
            if pairs is not None:
                trace.start(iteration, gen)
                trace.counts[-1] += int(sum(credits))
                if iteration == 1 or iteration % cfg.snapshot_every == 0:
                    snapshots.append(_snapshot(iteration, gen, C, poor, elite, pairs,
                                               generated, credits, P))
            if record_history:
                history.append(P.objectives)
    hv = normalized_hv(P.objectives, *bounds)
    return RunResult(cfg, P, hv, problem.evaluations, gen, trace, snapshots, losses,
                     history, time.perf_counter() - t0)


def _snapshot(iteration, gen, C, poor, elite, pairs, generated, credits, P) -> Snapshot:
    snap = Snapshot(iteration, gen)
    poor_ids = {}
    for k, i in enumerate(poor):
        poor_ids[k] = snap.add("poor", C[i].objectives)
    for i in elite:
        snap.add("elite", C[i].objectives)
    for m in P:
        snap.add("population", m.objectives)
    for src, child, credit in zip(pairs.poor_index, generated, credits):
        gid = snap.add("generated-and-accepted" if credit > 0 else "generated", child.objectives)
        snap.lines.append((poor_ids[int(src)], gid))
    return snap


def run_baseline(cfg: RunConfig, record_history: bool = False) -> RunResult:
    """Host EA alone, with the same budget accounting as :func:`run_seqmo`."""
    cfg.validate()
    t0 = time.perf_counter()
    problem = CountingProblem(_load_problem(cfg))
    ea = RngStreams(cfg.seed)["ea"]
    host = _host(cfg, problem.n_obj)
    with threadpool_limits(1):
        P = host.initialize(problem, ea)
        bounds = default_bounds(P.objectives)
        history = [P.objectives] if record_history else None
        gen = 0
        while problem.evaluations <= cfg.max_fe:
            gen += 1
            P, _ = environment_selection(host, P, host.offspring(P, problem, ea), (), ea)
            if record_history:
                history.append(P.objectives)
    hv = normalized_hv(P.objectives, *bounds)
    return RunResult(cfg, P, hv, problem.evaluations, gen, UpdateTrace(), [], [],
                     history, time.perf_counter() - t0)


def run(cfg: RunConfig, record_history: bool = False) -> RunResult:
    if cfg.algorithm == "seqmo":
        return run_seqmo(cfg, record_history)
    return run_baseline(cfg, record_history)


# -- comparisons ---------------------------------------------------------------------

def parse_algorithm(label: str) -> dict:
    if label in ("nsga2", "moead"):
        return {"algorithm": label, "host": label}
    if label.startswith("seqmo-") and label[6:] in ("nsga2", "moead"):
        return {"algorithm": "seqmo", "host": label[6:]}
    raise ConfigError(f"unknown algorithm label {label!r}")


def format_mean_std(mean: float, std: float) -> str:
    """``7.7289e-1 (1.38e-2)`` style."""
    return f"{_sci(mean, 4)} ({_sci(std, 2)})"


def _sci(x: float, digits: int) -> str:
    mant, exp = f"{x:.{digits}e}".split("e")
    return f"{mant}e{int(exp)}"


@dataclass
class ComparisonTable:
    instances: list[str]
    algorithms: list[str]
    rows: list[dict]  # one per run: instance, algorithm, seed, hv, evaluations, generations
    traces: dict = field(default_factory=dict)  # (instance, algorithm, seed) -> update counts

    def cell(self, instance: str, algorithm: str) -> tuple[float, float]:
        hv = np.array([r["hv"] for r in self.rows
                       if r["instance"] == instance and r["algorithm"] == algorithm])
        if hv.size == 0:
            return math.nan, math.nan
        return float(hv.mean()), float(hv.std(ddof=1)) if hv.size > 1 else 0.0

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "algorithm", "seed", "hv", "evaluations", "generations"])
        for r in self.rows:
            w.writerow([r["instance"], r["algorithm"], r["seed"], repr(r["hv"]),
                        r["evaluations"], r["generations"]])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", "algorithm", "mean_hv", "std_hv", "runs"])
        for inst in self.instances:
            for alg in self.algorithms:
                m, s = self.cell(inst, alg)
                n = sum(1 for r in self.rows if r["instance"] == inst and r["algorithm"] == alg)
                w.writerow([inst, alg, repr(m), repr(s), n])
        return buf.getvalue()

    def to_text(self) -> str:
        header = [""] + [a.upper() if not a.startswith("seqmo") else a for a in self.algorithms]
        body = [[inst] + [format_mean_std(*self.cell(inst, a)) for a in self.algorithms]
                for inst in self.instances]
        widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
        lines = [" | ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip()
                 for row in [header] + body]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _run_job(cfg: RunConfig):
    res = run(cfg)
    return (res.population.objectives, res.evaluations, res.generations, res.wall_time,
            list(res.trace.counts))


def compare(instances: list[RunConfig], algorithms: list[str], seeds: list[int],
            workers: int = 1) -> ComparisonTable:
    """Run every (instance, algorithm, seed) and score with shared bounds.

    ``instances`` are template configs (problem, size, instance seed, training
    profile); algorithm and run seed are filled in per job. Normalization
    bounds are the componentwise min/max over the final fronts of all
    algorithms on that instance across the seed batch, reference point
    ``(1, 1)``.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    jobs = []
    for tmpl in instances:
        for alg in algorithms:
            for seed in seeds:
                jobs.append(replace(tmpl, seed=seed, **parse_algorithm(alg)).validate())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_job, jobs))
    else:
        outputs = [_run_job(j) for j in jobs]

    labels = [t.instance_label for t in instances]
    rows = []
    traces = {}
    for label in labels:
        fronts = [nondominated(o[0]) for j, o in zip(jobs, outputs) if j.instance_label == label]
        lower, upper = union_bounds(fronts)
        upper = np.where(upper > lower, upper, lower + 1.0)
        for job, (F, fe, gens, _, counts) in zip(jobs, outputs):
            if job.instance_label != label:
                continue
            traces[(label, job.label, job.seed)] = counts
            rows.append({"instance": label, "algorithm": job.label, "seed": job.seed,
                         "hv": normalized_hv(F, lower, upper), "evaluations": fe,
                         "generations": gens})
    return ComparisonTable(labels, list(algorithms), rows, traces)


# -- files ---------------------------------------------------------------------------

def emit_snapshots(snapshots: list[Snapshot], path) -> None:
    """Line-delimited JSON: one record per point and one per pairing line."""
    path = Path(path)
    try:
        with path.open("w") as fh:
            for snap in snapshots:
                for pid, role, f in snap.points:
                    fh.write(json.dumps({"type": "point", "iteration": snap.iteration,
                                         "generation": snap.generation, "id": pid,
                                         "role": role, "f": list(f)}) + "\n")
                for poor_id, gen_id in snap.lines:
                    fh.write(json.dumps({"type": "line", "iteration": snap.iteration,
                                         "generation": snap.generation,
                                         "poor": poor_id, "generated": gen_id}) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshots to {path}: {exc}") from exc


def load_snapshots(path) -> list[Snapshot]:
    snaps: dict[int, Snapshot] = {}
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            snap = snaps.setdefault(rec["iteration"], Snapshot(rec["iteration"], rec["generation"]))
            if rec["type"] == "point":
                if rec["role"] not in ROLES:
                    raise ValueError(f"{path}:{lineno}: unknown role {rec['role']!r}")
                snap.points.append((rec["id"], rec["role"], tuple(rec["f"])))
            elif rec["type"] == "line":
                snap.lines.append((rec["poor"], rec["generated"]))
            else:
                raise ValueError(f"{path}:{lineno}: unknown record type {rec['type']!r}")
    return [snaps[k] for k in sorted(snaps)]


def write_run(result: RunResult, out_dir) -> Path:
    """Write results, traces, snapshots, final population and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    with (out / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "algorithm", "seed", "hv", "evaluations", "generations"])
        w.writerow([cfg.instance_label, cfg.label, cfg.seed, repr(result.hv),
                    result.evaluations, result.generations])
    with (out / "population.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{k + 1}" for k in range(cfg.k)] + ["genotype"])
        for m in result.population:
            w.writerow([repr(float(x)) for x in m.objectives]
                       + [" ".join(map(str, to_external(m.genotype)))])
    result.trace.to_csv(out / "update_trace.csv")
    with (out / "loss_trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "generation", "epoch", "loss"])
        for it, gen, trace in result.losses:
            for ep, loss in enumerate(trace, 1):
                w.writerow([it, gen, ep, repr(float(loss))])
    emit_snapshots(result.snapshots, out / "snapshots.jsonl")
    (out / "config.ini").write_text(cfg.to_ini())
    write_manifest(out / "manifest.json", cfg.to_ini(), {"wall_time_s": result.wall_time})
    return out


def write_manifest(path, config_text: str, extra: dict | None = None) -> None:
    manifest = {
        "seqmo_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "config": config_text,
    }
    manifest.update(extra or {})
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")


def trace_table(trace_csv) -> str:
    """Render an update-trace CSV in two-row blocks of six iterations."""
    with open(trace_csv) as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for start in range(0, len(rows), 6):
        block = rows[start:start + 6]
        out.append("Iteration     | " + " | ".join(f"{r['iteration']:>5}" for r in block))
        out.append("Updated times | " + " | ".join(f"{r['updated']:>5}" for r in block))
        out.append("")
    return "\n".join(out)
