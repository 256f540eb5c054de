"""Command implementations: pretrain, embed, kernel, classify, compare, shadow-verify.

Every output is a pure function of the config, input files and root seed;
wall-clock data only goes into the ``run_info.json`` sidecar.
"""
from __future__ import annotations

import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .config import RunConfig, job_seed
from .data import PeptideDataset, filter_by_length, load_dataset, make_split, synthesize_corpus, \
    synthesize_labeled
from .encoding import EncodingConfig, hamiltonian_encode, one_hot_matrix
from .kernels import KernelMatrix, hamiltonian_kernel, psd_repair, qae_kernel, read_kernel, write_kernel
from .quantum_core import DensityMatrix, random_state
from .shadows import ShadowConfig, shadow_loss_estimate, verify_truncation_bound
from .svm import cross_validate, evaluate, predict, smo_train

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


def _dump(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def write_run_info(out: Path, command: str, started: float) -> None:
    _dump(out / "run_info.json", {
        "command": command,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "elapsed_s": round(time.time() - started, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
    })


def _map(fn, jobs, n_workers: int):
    """Run ``fn`` over ``jobs``; results come back in job order whatever the pool size."""
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


# corpora and datasets ---------------------------------------------------------------------------

def pretrain_corpus(cfg: RunConfig) -> PeptideDataset:
    entry = cfg.data.pretrain
    if "path" in entry:
        ds = load_dataset(entry["path"])
    else:
        s = entry["synthetic"]
        ds = synthesize_corpus(int(s.get("n", 2000)), tuple(s.get("length_range", (8, 12))),
                               int(s.get("seed", 0)), s.get("mode", "planted"),
                               float(s.get("bias", 0.8)))
    return filter_by_length(ds, cfg.encoding.max_len)


def load_datasets(cfg: RunConfig, paths=None) -> dict[str, PeptideDataset]:
    """Labeled datasets from the config, or from ``paths`` (named by file stem) when given."""
    out = {}
    if paths:
        for p in paths:
            ds = filter_by_length(load_dataset(p), cfg.encoding.max_len)
            out[Path(p).stem] = ds
        return out
    for entry in cfg.data.datasets:
        if "path" in entry:
            ds = load_dataset(entry["path"])
        else:
            s = entry["synthetic"]
            ds = synthesize_labeled(int(s.get("n", 500)), tuple(s.get("length_range", (8, 12))),
                                    int(s.get("seed", 0)), float(s.get("bias", 0.6)),
                                    float(s.get("label_noise", 0.0)))
        out[entry["name"]] = filter_by_length(ds, int(entry["max_len"]))
    if not out:
        raise PipelineError("no datasets configured (use [data] datasets or --dataset)")
    for name, ds in out.items():
        if ds.labels is None:
            raise PipelineError(f"dataset {name!r} has no labels")
    return out


# pretrain ----------------------------------------------------------------------------------------

def plan_pretrain(cfg: RunConfig, variant: str | None = None) -> list[dict]:
    runs = []
    for a in cfg.variants(variant):
        tc = cfg.training.train_config(a.n_qubits, job_seed(cfg.seed, f"pretrain:{a.variant_id}"))
        runs.append({"variant": a.variant_id, "n_params": a.n_params, "epochs": tc.epochs,
                     "batch_size": tc.batch_size, "seed": tc.seed,
                     "checkpoint": f"checkpoints/{a.variant_id}.json",
                     "curve": f"curves/{a.variant_id}.csv"})
    return runs


def _pretrain_job(job):
    cfg, run, features, out = job
    ansatz = ae.AnsatzConfig.from_variant(run["variant"])
    enc = cfg.encoding.for_qubits(ansatz.n_qubits)
    tc = cfg.training.train_config(ansatz.n_qubits, run["seed"])
    corpus = hamiltonian_encode(features, enc)
    ckpt = out / run["checkpoint"]
    ckpt.parent.mkdir(parents=True, exist_ok=True)

    def on_epoch_end(epoch, best, history):
        ae.save_checkpoint(ckpt, best, ansatz, enc, tc.seed,
                           {"epochs_done": epoch + 1, "best_batch_loss": min(history.loss)})

    theta, history = ae.train(corpus, ansatz, tc, on_epoch_end=on_epoch_end)
    curve = out / run["curve"]
    curve.parent.mkdir(parents=True, exist_ok=True)
    curve.write_text(history.to_csv())
    final = ae.qae_loss(corpus, theta, ansatz)
    ae.save_checkpoint(ckpt, theta, ansatz, enc, tc.seed,
                       {"epochs_done": tc.epochs, "best_batch_loss": min(history.loss),
                        "corpus_loss": final, "epoch_boundaries": history.epoch_boundaries})
    return {"variant": run["variant"], "corpus_loss": final,
            "first_batch_loss": history.loss[0], "best_batch_loss": min(history.loss)}


def cmd_pretrain(cfg: RunConfig, out: Path, variant=None, jobs: int = 1, dry_run: bool = False) -> dict:
    runs = plan_pretrain(cfg, variant)
    manifest = {"command": "pretrain", "config": cfg.to_dict(), "planned_runs": runs,
                "n_planned": len(runs), "dry_run": dry_run}
    if dry_run:
        _dump(out / "manifest.json", manifest)
        return manifest
    corpus = pretrain_corpus(cfg)
    if len(corpus) == 0:
        raise PipelineError("pre-training corpus is empty after length filtering")
    features = one_hot_matrix(corpus.sequences, cfg.encoding.for_qubits(cfg.ansatz.n_qubits[0]))
    results = _map(_pretrain_job, [(cfg, r, features, out) for r in runs], jobs)
    manifest["results"] = results
    manifest["corpus"] = {"n": len(corpus), "provenance": corpus.provenance}
    _dump(out / "manifest.json", manifest)
    return manifest


# embeddings and kernels ---------------------------------------------------------------------------

def load_checkpoints(out: Path, cfg: RunConfig, variant=None) -> dict[str, dict]:
    ckpts = {}
    for a in cfg.variants(variant):
        path = out / "checkpoints" / f"{a.variant_id}.json"
        if not path.exists():
            raise PipelineError(f"missing checkpoint {path} (run pretrain first)")
        ckpts[a.variant_id] = ae.load_checkpoint(path)
    return ckpts


def encode_dataset(ds: PeptideDataset, enc: EncodingConfig) -> np.ndarray:
    return hamiltonian_encode(one_hot_matrix(ds.sequences, enc), enc)


def embed_dataset(ds: PeptideDataset, ckpt: dict) -> list[DensityMatrix]:
    states = encode_dataset(ds, ckpt["encoding"])
    return ae.embed_states(states, ckpt["theta"], ckpt["ansatz"])


def cmd_embed(cfg: RunConfig, out: Path, datasets=None, variant=None) -> dict:
    """Store each embedding's low-rank factor ``A`` (``phi = A A^dagger``) as ``.npy``."""
    ckpts = load_checkpoints(out, cfg, variant)
    written = []
    for name, ds in load_datasets(cfg, datasets).items():
        for vid, ck in ckpts.items():
            factors = ae.embedding_factors(encode_dataset(ds, ck["encoding"]), ck["theta"], ck["ansatz"])
            path = out / "embeddings" / name / f"{vid}.npy"
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, factors)
            _dump(path.with_suffix(".ids.json"), ds.ids)
            written.append(str(path.relative_to(out)))
    manifest = {"command": "embed", "outputs": written}
    _dump(out / "embed_manifest.json", manifest)
    return manifest


def dataset_kernels(ds: PeptideDataset, ckpts: dict, cfg: RunConfig) -> tuple[dict, dict]:
    """QAE kernels per variant and Hamiltonian kernels per qubit count."""
    qae = {vid: qae_kernel(embed_dataset(ds, ck), ds.ids) for vid, ck in ckpts.items()}
    ham = {}
    for n in sorted({ck["ansatz"].n_qubits for ck in ckpts.values()}):
        enc = next(ck["encoding"] for ck in ckpts.values() if ck["ansatz"].n_qubits == n)
        ham[f"{n}q"] = hamiltonian_kernel(encode_dataset(ds, enc), ds.ids)
    return qae, ham


def cmd_kernel(cfg: RunConfig, out: Path, datasets=None, variant=None) -> dict:
    ckpts = load_checkpoints(out, cfg, variant)
    written = []
    for name, ds in load_datasets(cfg, datasets).items():
        qae, ham = dataset_kernels(ds, ckpts, cfg)
        for key, K in [*(("qae-" + k, v) for k, v in qae.items()),
                       *(("hamiltonian-" + k, v) for k, v in ham.items())]:
            path = out / "kernels" / name / f"{key}.kern"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_kernel(path, K)
            written.append(str(path.relative_to(out)))
    manifest = {"command": "kernel", "outputs": written}
    _dump(out / "kernel_manifest.json", manifest)
    return manifest


# classification ----------------------------------------------------------------------------------

def evaluate_kernel(K: KernelMatrix, labels, cfg: RunConfig, dataset: str) -> dict:
    """CV (or hold-out) accuracy with folds/splits seeded per dataset, shared across kernels."""
    seed = job_seed(cfg.seed, f"split:{dataset}")
    s = cfg.svm
    if s.protocol == "cv":
        rep = cross_validate(K, labels, k=s.folds, seed=seed, C=s.C, tol=s.tol, psd_policy=s.psd_policy)
        return {"protocol": f"{s.folds}-fold-cv", "accuracy": rep.mean, "std": rep.std,
                "fold_accuracy": rep.fold_accuracy}
    ds = PeptideDataset([str(i) for i in range(len(labels))], ["A"] * len(labels), labels)
    split = make_split(ds, "fraction", seed, test_fraction=s.test_fraction)
    block = psd_repair(KernelMatrix(K.subset(split.train), K.kind), s.psd_policy)
    model = smo_train(block.values, labels[split.train], C=s.C, tol=s.tol)
    pred = predict(model, K.subset(split.test, split.train))
    return {"protocol": "holdout", "accuracy": evaluate(pred, labels[split.test])["accuracy"], "std": 0.0,
            "fold_accuracy": []}


def _load_kernels(out: Path, name: str) -> tuple[dict, dict]:
    base = out / "kernels" / name
    if not base.is_dir():
        raise PipelineError(f"no kernels for dataset {name!r} under {base} (run kernel first)")
    qae, ham = {}, {}
    for p in sorted(base.glob("*.kern")):
        kind, key = p.stem.split("-", 1)
        (qae if kind == "qae" else ham)[key] = read_kernel(p)
    return qae, ham


def cmd_classify(cfg: RunConfig, out: Path, datasets=None) -> list[dict]:
    """One metrics record per dataset x method x variant, from kernels written by ``kernel``."""
    records = []
    for name, ds in load_datasets(cfg, datasets).items():
        qae, ham = _load_kernels(out, name)
        for method, table in (("qae", qae), ("hamiltonian", ham)):
            for key, K in table.items():
                if list(K.sample_ids) != [str(i) for i in ds.ids]:
                    raise PipelineError(f"kernel {name}/{method}-{key} does not match dataset ids")
                records.append({"dataset": name, "method": method, "variant": key,
                                **evaluate_kernel(K, ds.labels, cfg, name)})
    path = out / "metrics.jsonl"
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    return records


# comparison ---------------------------------------------------------------------------------------

def select_best(records: list[dict]) -> dict:
    """Highest accuracy; ties go to fewer parameters, then fewer trash qubits."""
    def key(r):
        a = ae.AnsatzConfig.from_variant(r["variant"])
        return (-r["accuracy"], a.n_params, a.n_trash, r["variant"])
    return min(records, key=key)


@dataclass
class ComparisonRow:
    dataset: str
    protocol: str
    best_variant: str
    qae_accuracy: float
    hamiltonian_variant: str
    hamiltonian_accuracy: float

    @property
    def delta(self) -> float:
        return self.qae_accuracy - self.hamiltonian_accuracy

    @property
    def winner(self) -> str:
        if self.qae_accuracy > self.hamiltonian_accuracy:
            return "qae"
        if self.qae_accuracy < self.hamiltonian_accuracy:
            return "hamiltonian"
        return "tie"

    def as_dict(self) -> dict:
        return {"dataset": self.dataset, "protocol": self.protocol, "best_variant": self.best_variant,
                "qae_accuracy": self.qae_accuracy, "hamiltonian_variant": self.hamiltonian_variant,
                "hamiltonian_accuracy": self.hamiltonian_accuracy, "delta": self.delta,
                "winner": self.winner}


def compare_dataset(name: str, qae_kernels: dict, ham_kernels: dict, labels, cfg: RunConfig) -> tuple[ComparisonRow, list]:
    labels = np.asarray(labels)
    q = [{"dataset": name, "method": "qae", "variant": k, **evaluate_kernel(K, labels, cfg, name)}
         for k, K in qae_kernels.items()]
    h = [{"dataset": name, "method": "hamiltonian", "variant": k, **evaluate_kernel(K, labels, cfg, name)}
         for k, K in ham_kernels.items()]
    best_q = select_best(q)
    best_h = max(h, key=lambda r: (r["accuracy"], -int(r["variant"].rstrip("q"))))
    row = ComparisonRow(name, best_q["protocol"], best_q["variant"], best_q["accuracy"],
                        best_h["variant"], best_h["accuracy"])
    return row, q + h


def format_table(rows: list[ComparisonRow]) -> str:
    head = f"{'dataset':<20} {'protocol':<10} {'best variant':<12} {'QAE':>7} {'Ham.':>7} {'delta':>7}  winner"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.dataset:<20} {r.protocol:<10} {r.best_variant:<12} {r.qae_accuracy:>7.4f} "
                     f"{r.hamiltonian_accuracy:>7.4f} {r.delta:>+7.4f}  {r.winner}")
    if rows:
        lines.append("-" * len(head))
        lines.append(f"{'mean delta':<44} {np.mean([r.delta for r in rows]):>+23.4f}")
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: RunConfig, out: Path, datasets=None, variant=None) -> dict:
    ckpts = load_checkpoints(out, cfg, variant)
    rows, records = [], []
    for name, ds in load_datasets(cfg, datasets).items():
        qae, ham = dataset_kernels(ds, ckpts, cfg)
        row, recs = compare_dataset(name, qae, ham, ds.labels, cfg)
        rows.append(row)
        records += recs
    report = {"rows": [r.as_dict() for r in rows],
              "mean_delta": float(np.mean([r.delta for r in rows])),
              "records": records}
    _dump(out / "compare.json", report)
    lines = ["dataset,protocol,best_variant,qae_accuracy,hamiltonian_variant,hamiltonian_accuracy,delta,winner"]
    lines += [f"{r.dataset},{r.protocol},{r.best_variant},{r.qae_accuracy:.17g},{r.hamiltonian_variant},"
              f"{r.hamiltonian_accuracy:.17g},{r.delta:.17g},{r.winner}" for r in rows]
    (out / "compare.csv").write_text("\n".join(lines) + "\n")
    (out / "compare.txt").write_text(format_table(rows))
    return report


# shadow verification ---------------------------------------------------------------------------

def cmd_shadow_verify(cfg: RunConfig, out: Path) -> dict:
    s = cfg.shadow
    ansatz = ae.AnsatzConfig(s.n_qubits, s.depth, s.n_trash)
    rng = np.random.default_rng(job_seed(cfg.seed, "shadow-circuits"))
    trials = []
    for t in range(s.circuits):
        states = np.stack([random_state(s.n_qubits, rng) for _ in range(s.batch)])
        params = rng.uniform(-np.pi, np.pi, ansatz.n_params)
        est, exact = shadow_loss_estimate(states, params, ansatz, ShadowConfig(
            s.n_snapshots, s.groups, job_seed(cfg.seed, f"shadow:{t}"), s.tolerance))
        trials.append({"trial": t, "estimate": est, "exact": exact, "error": abs(est - exact),
                       "within_tolerance": abs(est - exact) < s.tolerance})
    truncation = [verify_truncation_bound(s.truncation_n, s.truncation_depth, 1, k, s.truncation_trials,
                                          job_seed(cfg.seed, f"truncation:{k}")).as_dict()
                  for k in s.truncation_k]
    report = {"shadows": {"n": s.n_qubits, "d": s.depth, "m": s.n_trash, "snapshots": s.n_snapshots,
                          "groups": s.groups, "trials": trials,
                          "passed": sum(t["within_tolerance"] for t in trials)},
              "truncation": truncation}
    _dump(out / "shadow_verify.json", report)
    return report


def format_shadow_report(report: dict) -> str:
    sh = report["shadows"]
    lines = [f"shadows n={sh['n']} d={sh['d']} m={sh['m']} snapshots={sh['snapshots']} groups={sh['groups']}: "
             f"{sh['passed']}/{len(sh['trials'])} within tolerance"]
    for t in sh["trials"]:
        lines.append(f"  trial {t['trial']}: estimate={t['estimate']:.5f} exact={t['exact']:.5f} "
                     f"error={t['error']:.5f}")
    for r in report["truncation"]:
        lines.append(f"truncation n={r['n']} d={r['d']} m={r['m']} k={r['k']} trials={r['trials']} "
                     f"mean={r['empirical_mean']:.5f} bound={r['bound']:.5f} {r['status'].upper()}")
    return "\n".join(lines) + "\n"


def out_dir(cfg: RunConfig, override=None) -> Path:
    path = Path(override or cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


__all__ = ["cmd_pretrain", "cmd_embed", "cmd_kernel", "cmd_classify", "cmd_compare",
           "cmd_shadow_verify", "compare_dataset", "select_best", "plan_pretrain", "write_run_info",
           "PipelineError"]
