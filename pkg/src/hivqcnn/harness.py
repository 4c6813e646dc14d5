"""Experiment matrix: configuration, condition enumeration, per-seed runs, reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import data, embed, noise, nqe, presets, qcnn
from .embed import Embedding

log = logging.getLogger(__name__)

NOISE_ARMS = ("noiseless", "noisy")
CSV_FIELDS = ("condition_id", "seed", "arm", "n_qubits", "embedding", "ansatz", "params_total", "accuracy",
              "linear_loss_final", "td_train_before", "td_train_after", "td_test_before", "td_test_after",
              "wallclock_s")
HELSTROM_SLACK = 0.02
CONTRACTIVITY_TOL = 1e-9


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _default_config() -> dict[str, object]:
    d: dict[str, object] = {
        "data.seed": 0, "data.balance_seed": 0, "data.test_ratio": 0.2, "data.val_fraction": 0.1,
        "data.synthetic_per_class": 300,
        "run.seeds": 5, "run.jobs": 1,
        "nqe.patience": 4, "nqe.validation_period": 10,
        "nqe.beta1": 0.9, "nqe.beta2": 0.999, "nqe.eps": 1e-8,
        "nqe.pretrained": True, "nqe.iteration_cap": 0,
        "qcnn.momentum": 0.9, "qcnn.pooling": True, "qcnn.iteration_cap": 0,
        "noise.file": "",
    }
    for key in noise.CONFIG_KEYS:
        d[f"noise.{key}"] = ""
    for n in (4, 8):
        for emb in presets.EMBEDDING_ORDER:
            for arm in NOISE_ARMS:
                p = presets.nqe_preset(n, emb, arm)
                base = f"nqe.{p.key}.{arm}"
                d[f"{base}.batch_size"] = p.batch_size
                d[f"{base}.learning_rate"] = p.learning_rate
                d[f"{base}.iterations"] = p.iterations
            c = presets.classical_nqe_preset(n, emb)
            d[f"cnqe.{c.key}.batch_size"] = c.batch_size
            d[f"cnqe.{c.key}.learning_rate"] = c.learning_rate
            d[f"cnqe.{c.key}.iterations"] = c.iterations
    for c in presets.CONDITIONS:
        for arm in NOISE_ARMS:
            h = c.hyper(arm)
            base = f"qcnn.{c.label}.{arm}"
            d[f"{base}.batch_size"] = h.batch_size
            d[f"{base}.learning_rate"] = h.learning_rate
            d[f"{base}.iterations"] = h.iterations
    for b in presets.BASELINES:
        if not b.skipped:
            base = f"baseline.{b.table}.{b.row}"
            d[f"{base}.batch_size"] = b.batch_size
            d[f"{base}.learning_rate"] = b.learning_rate
            d[f"{base}.iterations"] = b.iterations
    return d


DEFAULTS = _default_config()


def _coerce(key: str, raw: str):
    default = DEFAULTS[key]
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise HarnessError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise HarnessError(f"{key}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise HarnessError(f"{key}: expected a number, got {raw!r}") from None
    return raw


@dataclass
class HarnessConfig:
    values: dict[str, object] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str):
        return self.values[key]

    def set(self, key: str, value) -> "HarnessConfig":
        if key not in DEFAULTS:
            raise HarnessError(f"unknown config key {key!r}")
        self.values[key] = _coerce(key, str(value)) if isinstance(value, str) else value
        return self

    def overrides(self) -> dict[str, object]:
        return {k: v for k, v in self.values.items() if DEFAULTS[k] != v}

    def fingerprint(self, prefixes: Sequence[str]) -> str:
        items = sorted((k, v) for k, v in self.values.items() if k.startswith(tuple(prefixes)))
        return hashlib.sha256(repr(items).encode()).hexdigest()[:12]

    def noise_model(self) -> noise.NoiseModel:
        path = self["noise.file"] or None
        model = noise.load_noise_config(path)
        cfg = model.to_config()
        changed = False
        for key in noise.CONFIG_KEYS:
            v = self[f"noise.{key}"]
            if v != "":
                cfg[key] = float(v)
                changed = True
        if changed:
            model = noise.parse_noise_config("".join(f"{k}={v}\n" for k, v in cfg.items()))
        return model


def parse_config(text: str) -> HarnessConfig:
    cfg = HarnessConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HarnessError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise HarnessError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise HarnessError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        cfg.values[key] = _coerce(key, val)
    return cfg


def load_config(path=None) -> HarnessConfig:
    return HarnessConfig() if path is None else parse_config(Path(path).read_text())


def format_config(cfg: HarnessConfig, only_overrides: bool = False) -> str:
    items = cfg.overrides() if only_overrides else cfg.values
    return "".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}\n" for k, v in items.items())


# ---------------------------------------------------------------------------
# conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentCondition:
    id: str
    arm: str                 # NQE or PCA
    n_qubits: int
    embedding: str
    ansatz: str
    pooling: bool
    nqe_preset: str | None
    batch_size: int
    learning_rate: float
    iterations: int
    noise_arm: str
    seeds: tuple[int, ...]
    acc_published: float | None = None

    @property
    def params_total(self) -> int:
        return presets.QCNN_LAYERS[self.n_qubits] * presets.PARAMS_PER_BLOCK[self.ansatz]


FILTER_KEYS = ("id", "arm", "qubits", "embedding", "ansatz")
_EMB_ALIASES = {"amp": "amplitude", "ang": "angle", "zz": "zz", "amplitude": "amplitude", "angle": "angle"}


def parse_filters(items: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise HarnessError(f"filter {item!r} is not KEY=VAL")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in FILTER_KEYS:
            raise HarnessError(f"unknown filter {k!r}; expected one of {FILTER_KEYS}")
        out[k] = v
    return out


def _matches(spec: presets.ConditionSpec, filters: dict[str, str]) -> bool:
    for k, v in filters.items():
        vals = [s.strip() for s in v.split(",")]
        if k == "id" and spec.label.upper() not in [s.upper() for s in vals]:
            return False
        if k == "arm" and spec.arm not in [s.upper() for s in vals]:
            return False
        if k == "qubits" and str(spec.n_qubits) not in vals:
            return False
        if k == "embedding":
            want = [_EMB_ALIASES.get(s.lower(), s.lower()) for s in vals]
            if spec.embedding not in want:
                return False
        if k == "ansatz" and spec.ansatz not in [s.upper() for s in vals]:
            return False
    return True


def enumerate_conditions(config: HarnessConfig | None = None, noise_arm: str = "noiseless",
                         filters: dict[str, str] | None = None) -> list[ExperimentCondition]:
    config = config or HarnessConfig()
    if noise_arm not in NOISE_ARMS:
        raise HarnessError(f"noise arm must be one of {NOISE_ARMS}")
    filters = filters or {}
    bad = set(filters) - set(FILTER_KEYS)
    if bad:
        raise HarnessError(f"unknown filter(s) {sorted(bad)}")
    seeds = tuple(range(int(config["run.seeds"])))
    out = []
    for spec in presets.CONDITIONS:
        if not _matches(spec, filters):
            continue
        base = f"qcnn.{spec.label}.{noise_arm}"
        h = spec.hyper(noise_arm)
        out.append(ExperimentCondition(
            spec.label, spec.arm, spec.n_qubits, spec.embedding, spec.ansatz, bool(config["qcnn.pooling"]),
            presets.nqe_key(spec.n_qubits, spec.embedding) if spec.arm == "NQE" else None,
            int(config[f"{base}.batch_size"]), float(config[f"{base}.learning_rate"]),
            int(config[f"{base}.iterations"]), noise_arm, seeds, h.acc_published))
    return out


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class SeedResult:
    condition_id: str
    seed: int
    arm: str
    n_qubits: int
    embedding: str
    ansatz: str
    params_total: int
    accuracy: float
    linear_loss_final: float
    td_train_before: float
    td_train_after: float
    td_test_before: float
    td_test_after: float
    wallclock_s: float
    helstrom_bound: float = math.nan
    helstrom_ok: bool = True
    contractive_ok: bool | None = None
    error: str = ""

    def csv_row(self) -> list:
        return [getattr(self, f) for f in CSV_FIELDS]


@dataclass
class ResultRow:
    condition_id: str
    arm: str
    n_qubits: int
    embedding: str
    ansatz: str
    params_total: int
    seeds: list[SeedResult]
    mean: float
    std: float
    acc_published: float | None = None
    partial: bool = False

    @property
    def accuracies(self) -> list[float]:
        return [s.accuracy for s in self.seeds if not s.error]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = [asdict(s) for s in self.seeds]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        d = dict(d)
        d["seeds"] = [SeedResult(**s) for s in d["seeds"]]
        return cls(**d)


def aggregate(cond: ExperimentCondition, seeds: list[SeedResult]) -> ResultRow:
    ok = [s.accuracy for s in seeds if not s.error]
    mean = float(np.mean(ok)) if ok else math.nan
    std = float(np.std(ok)) if ok else math.nan
    return ResultRow(cond.id, cond.noise_arm, cond.n_qubits, cond.embedding, cond.ansatz, cond.params_total,
                     seeds, mean, std, cond.acc_published, partial=len(ok) != len(seeds))


# ---------------------------------------------------------------------------
# per-seed execution
# ---------------------------------------------------------------------------

def snapshot_splits(snapshot: data.DatasetSnapshot, config: HarnessConfig) -> data.Splits:
    x, y = snapshot.arrays()
    return data.split(x, y, float(config["data.test_ratio"]), float(config["data.val_fraction"]),
                      int(config["data.seed"]))


def _snapshot_id(snapshot: data.DatasetSnapshot) -> str:
    return hashlib.sha256(snapshot.to_json().encode()).hexdigest()[:12]


def _cap(n: int, cap: int) -> int:
    return min(n, cap) if cap and cap > 0 else n


def nqe_config(config: HarnessConfig, key: str, noise_arm: str, seed: int) -> nqe.NQETrainConfig:
    base = f"nqe.{key}.{noise_arm}"
    return nqe.NQETrainConfig(
        int(config[f"{base}.batch_size"]), float(config[f"{base}.learning_rate"]),
        _cap(int(config[f"{base}.iterations"]), int(config["nqe.iteration_cap"])),
        int(config["nqe.validation_period"]), int(config["nqe.patience"]), seed,
        float(config["nqe.beta1"]), float(config["nqe.beta2"]), float(config["nqe.eps"]))


@dataclass
class FrontEnd:
    net: nqe.DenseNet
    initial_net: nqe.DenseNet
    trace_distance: dict[str, float]


_NQE_MEMO: dict[tuple, FrontEnd] = {}


def train_front_end(snapshot: data.DatasetSnapshot, config: HarnessConfig, n_qubits: int, embedding: str,
                    noise_arm: str, seed: int, cache_dir: Path | None = None) -> FrontEnd:
    """Train (or fetch from cache) the NQE front-end for one preset and seed."""
    key = presets.nqe_key(n_qubits, embedding)
    tag = f"{key}-{noise_arm}-s{seed}-{_snapshot_id(snapshot)}-{config.fingerprint(['nqe.', 'noise.', 'data.'])}"
    memo_key = (tag,)
    if memo_key in _NQE_MEMO:
        return _NQE_MEMO[memo_key]
    path = None if cache_dir is None else Path(cache_dir) / f"nqe-{tag}.json"
    if path is not None and path.is_file():
        d = json.loads(path.read_text())
        fe = FrontEnd(nqe.DenseNet.from_dict(d["net"]), nqe.DenseNet.from_dict(d["initial_net"]),
                      d["trace_distance"])
        _NQE_MEMO[memo_key] = fe
        return fe
    splits = snapshot_splits(snapshot, config)
    plan = noise.bind_noise(None, config.noise_model()) if noise_arm == "noisy" else None
    preset = presets.nqe_preset(n_qubits, embedding, noise_arm)
    res = nqe.train_nqe(splits, Embedding(embedding, n_qubits), nqe_config(config, key, noise_arm, seed),
                        preset.layers, plan)
    fe = FrontEnd(res.net, res.initial_net, res.trace_distance)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"net": res.net.to_dict(), "initial_net": res.initial_net.to_dict(),
                                    "trace_distance": res.trace_distance}))
        res.write_history(path.with_suffix(".history.csv"))
    _NQE_MEMO[memo_key] = fe
    return fe


def pca_features(splits: data.Splits, embedding: Embedding) -> data.Splits:
    model = data.pca_fit(splits.x_train, embedding.arity)
    proj = splits.map(lambda x: data.pca_transform(model, x))
    rng = data.FeatureRange.fit(proj.x_train)
    return proj.map(lambda x: data.rescale_for_embedding(x, embedding.kind, rng))


def _contractive(emb: Embedding, feats, labels, plan, model: noise.NoiseModel) -> bool:
    rho, sigma = nqe.class_mean_states(emb, feats, labels, plan)
    before = embed.trace_distance(rho, sigma)
    ch = model.idle_layer()
    after = embed.trace_distance(noise.apply_channel_each_qubit(rho, ch, emb.n_qubits),
                                 noise.apply_channel_each_qubit(sigma, ch, emb.n_qubits))
    return bool(after <= before + CONTRACTIVITY_TOL)


def run_seed(cond: ExperimentCondition, seed: int, snapshot: data.DatasetSnapshot,
             config: HarnessConfig, cache_dir: Path | None = None) -> SeedResult:
    return run_seed_full(cond, seed, snapshot, config, cache_dir)[0]


def run_seed_full(cond: ExperimentCondition, seed: int, snapshot: data.DatasetSnapshot,
                  config: HarnessConfig, cache_dir: Path | None = None) -> tuple[SeedResult, qcnn.QCNNResult]:
    """One seed of one condition; also returns the trained QCNN for snapshots."""
    t0 = time.perf_counter()
    emb = Embedding(cond.embedding, cond.n_qubits)
    noisy = cond.noise_arm == "noisy"
    model = config.noise_model() if noisy else None
    plan = noise.bind_noise(None, model) if noisy else None
    splits = snapshot_splits(snapshot, config)
    if cond.arm == "NQE":
        fe = train_front_end(snapshot, config, cond.n_qubits, cond.embedding, cond.noise_arm, seed, cache_dir)
        net = fe.net if config["nqe.pretrained"] else fe.initial_net
        feats = splits.map(net.forward)
        td = dict(fe.trace_distance)
        td_used = td["train_after"] if config["nqe.pretrained"] else td["train_before"]
    else:
        feats = pca_features(splits, emb)
        d_tr = nqe.embedded_trace_distance(emb, feats.x_train, feats.y_train, plan)
        d_te = nqe.embedded_trace_distance(emb, feats.x_test, feats.y_test, plan)
        td = {"train_before": d_tr, "train_after": d_tr, "test_before": d_te, "test_after": d_te}
        td_used = d_tr
    qcfg = qcnn.QCNNTrainConfig(cond.batch_size, cond.learning_rate,
                                _cap(cond.iterations, int(config["qcnn.iteration_cap"])),
                                float(config["qcnn.momentum"]), seed)
    x_tr = nqe.regularize_features(feats.x_train, emb)
    x_te = nqe.regularize_features(feats.x_test, emb)
    res = qcnn.train_qcnn(emb, (x_tr, feats.y_train), (x_te, feats.y_test), cond.ansatz, qcfg, cond.pooling, plan)
    bound = 0.5 * (1 - td_used)
    contractive = _contractive(emb, x_tr, feats.y_train, plan, model) if noisy else None
    return SeedResult(cond.id, seed, cond.noise_arm, cond.n_qubits, cond.embedding, cond.ansatz,
                      cond.params_total, res.test_accuracy, res.train_loss_final,
                      td["train_before"], td["train_after"], td["test_before"], td["test_after"],
                      time.perf_counter() - t0, bound, bool(res.train_loss_final >= bound - HELSTROM_SLACK),
                      contractive), res


def _failed(cond: ExperimentCondition, seed: int, err: Exception) -> SeedResult:
    nan = math.nan
    return SeedResult(cond.id, seed, cond.noise_arm, cond.n_qubits, cond.embedding, cond.ansatz,
                      cond.params_total, nan, nan, nan, nan, nan, nan, 0.0, error=f"{type(err).__name__}: {err}")


def run_condition(cond: ExperimentCondition, snapshot: data.DatasetSnapshot,
                  config: HarnessConfig | None = None, cache_dir: Path | None = None) -> ResultRow:
    config = config or HarnessConfig()
    seeds = []
    for s in cond.seeds:
        try:
            seeds.append(run_seed(cond, s, snapshot, config, cache_dir))
        except (ValueError, ArithmeticError) as e:
            log.error("%s seed %d failed: %s", cond.id, s, e)
            seeds.append(_failed(cond, s, e))
    return aggregate(cond, seeds)


def _run_group(args) -> list[tuple[str, SeedResult]]:
    conds, seed, snap_json, cfg_values, cache_dir = args
    snapshot = data.DatasetSnapshot.from_json(snap_json)
    config = HarnessConfig(dict(cfg_values))
    out = []
    for cond in conds:
        try:
            out.append((cond.id, run_seed(cond, seed, snapshot, config, cache_dir)))
        except (ValueError, ArithmeticError) as e:
            out.append((cond.id, _failed(cond, seed, e)))
    return out


def run_matrix(conditions: Sequence[ExperimentCondition], snapshot: data.DatasetSnapshot,
               config: HarnessConfig | None = None, jobs: int = 1,
               cache_dir: Path | None = None) -> list[ResultRow]:
    """Run every (condition, seed); conditions sharing a front-end and seed share one job."""
    config = config or HarnessConfig()
    groups: dict[tuple, list[ExperimentCondition]] = {}
    for c in conditions:
        for s in c.seeds:
            groups.setdefault((c.arm, c.n_qubits, c.embedding, c.noise_arm, s), []).append(c)
    tasks = [(conds, key[-1], snapshot.to_json(), config.values, cache_dir) for key, conds in groups.items()]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_group, tasks))
    else:
        results = [_run_group(t) for t in tasks]
    by_cond: dict[str, dict[int, SeedResult]] = {}
    for part in results:
        for cid, sr in part:
            by_cond.setdefault(cid, {})[sr.seed] = sr
    return [aggregate(c, [by_cond[c.id][s] for s in c.seeds]) for c in conditions]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        for s in r.seeds:
            w.writerow([_fmt(v) for v in s.csv_row()])
        ok = [s for s in r.seeds if not s.error]

        def mean_of(f):
            vals = [getattr(s, f) for s in ok]
            return float(np.mean(vals)) if vals else math.nan

        agg = {f: mean_of(f) for f in CSV_FIELDS[7:]}
        agg["accuracy"] = r.mean
        w.writerow([_fmt(v) for v in (r.condition_id, "mean", r.arm, r.n_qubits, r.embedding, r.ansatz,
                                      r.params_total)] + [_fmt(agg[f]) for f in CSV_FIELDS[7:]])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=1)


def rows_from_json(text: str) -> list[ResultRow]:
    return [ResultRow.from_dict(d) for d in json.loads(text)]


def rows_to_markdown(rows: Sequence[ResultRow], config: HarnessConfig | None = None) -> str:
    config = config or HarnessConfig()
    lines = ["| Condition | Qubits | Embedding | Ansatz / params | Batch / lr / iters | Accuracy (mean ± std) "
             "| Published | TD train before→after | Checks |",
             "|---|---|---|---|---|---|---|---|---|"]
    for r in rows:
        base = f"qcnn.{r.condition_id}.{r.arm}"
        hp = f"{config[base + '.batch_size']} / {config[base + '.learning_rate']} / {config[base + '.iterations']}" \
            if base + ".batch_size" in config.values else "-"
        if hp != "-" and int(config["qcnn.iteration_cap"]) > 0:
            hp += f" (cap {config['qcnn.iteration_cap']})"
        ok = [s for s in r.seeds if not s.error]
        td = "-"
        if ok:
            td = f"{np.mean([s.td_train_before for s in ok]):.4f} → {np.mean([s.td_train_after for s in ok]):.4f}"
        checks = []
        if ok:
            checks.append("Helstrom ok" if all(s.helstrom_ok for s in ok) else "Helstrom VIOLATED")
            if any(s.contractive_ok is not None for s in ok):
                checks.append("contractive ok" if all(s.contractive_ok for s in ok) else "contractivity VIOLATED")
        if r.partial:
            checks.append(f"partial ({len(r.seeds) - len(ok)} failed)")
        published = "-" if r.acc_published is None else f"{r.acc_published:.4f}"
        lines.append(f"| {r.condition_id} | {r.n_qubits} | {r.embedding} | {r.ansatz} / {r.params_total} | {hp} "
                     f"| {r.mean:.4f} ± {r.std:.4f} | {published} | {td} | {', '.join(checks)} |")
    return "\n".join(lines) + "\n"


def write_reports(rows: Sequence[ResultRow], out_dir, config: HarnessConfig | None = None) -> dict[str, Path]:
    if not rows:
        raise HarnessError("no result rows to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "results.csv", "json": out / "results.json", "md": out / "results.md"}
        paths["csv"].write_text(rows_to_csv(rows))
        paths["json"].write_text(rows_to_json(rows))
        paths["md"].write_text(rows_to_markdown(rows, config))
    except OSError as e:
        raise HarnessError(f"cannot write reports to {out}: {e}") from None
    return paths


# ---------------------------------------------------------------------------
# baselines over the matrix
# ---------------------------------------------------------------------------

def run_baseline(spec: presets.BaselineSpec, snapshot: data.DatasetSnapshot, config: HarnessConfig,
                 seed: int = 0) -> float:
    """Test accuracy of one classical counterpart on the matching feature pipeline."""
    splits = snapshot_splits(snapshot, config)
    emb = Embedding(spec.embedding, spec.n_qubits)
    if spec.feature_source == "nqe":
        from .baseline import train_classical_nqe_counterpart
        key = presets.nqe_key(spec.n_qubits, spec.embedding)
        pre = presets.classical_nqe_preset(spec.n_qubits, spec.embedding)
        fe = train_classical_nqe_counterpart(
            pre, splits, seed,
            batch_size=int(config[f"cnqe.{key}.batch_size"]),
            learning_rate=float(config[f"cnqe.{key}.learning_rate"]),
            max_iterations=_cap(int(config[f"cnqe.{key}.iterations"]), int(config["nqe.iteration_cap"])),
            patience=int(config["nqe.patience"]), validation_period=int(config["nqe.validation_period"]))
        feats = splits.map(fe.net.forward)
    else:
        feats = pca_features(splits, emb)
    from .baseline import train_baseline
    base = f"baseline.{spec.table}.{spec.row}"
    res = train_baseline(spec, (feats.x_train, feats.y_train), (feats.x_test, feats.y_test), seed,
                         iterations=int(config[f"{base}.iterations"]),
                         learning_rate=float(config[f"{base}.learning_rate"]))
    return res.test_accuracy


@dataclass
class BaselineRow:
    table: str
    row: int
    n_qubits: int
    embedding: str
    ansatz: str
    params: int
    accuracies: list[float]
    mean: float
    std: float
    acc_published: float | None


def run_baselines(specs: Sequence[presets.BaselineSpec], snapshot: data.DatasetSnapshot,
                  config: HarnessConfig | None = None) -> list[BaselineRow]:
    config = config or HarnessConfig()
    seeds = range(int(config["run.seeds"]))
    out = []
    for spec in specs:
        if spec.skipped:
            continue
        accs = [run_baseline(spec, snapshot, config, s) for s in seeds]
        out.append(BaselineRow(spec.table, spec.row, spec.n_qubits, spec.embedding, spec.ansatz,
                               presets.count_layers(spec.layers), accs, float(np.mean(accs)), float(np.std(accs)),
                               spec.acc_published))
    return out


def baselines_to_csv(rows: Sequence[BaselineRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "row", "seed", "n_qubits", "embedding", "ansatz", "params", "accuracy"])
    for r in rows:
        for s, a in enumerate(r.accuracies):
            w.writerow([r.table, r.row, s, r.n_qubits, r.embedding, r.ansatz, r.params, repr(a)])
        w.writerow([r.table, r.row, "mean", r.n_qubits, r.embedding, r.ansatz, r.params, repr(r.mean)])
    return buf.getvalue()
