"""Seeded generator of study-shaped synthetic cohorts with planted structure.

Each metric set is driven by a low-dimensional latent factor model:

    raw[:, j] = col_scale_j * (gain * (t @ L.T)[:, j] + noise_sd * eps[:, j]) + col_offset_j

where ``L`` has seeded orthonormal columns (QR of a Gaussian draw) and the
latent scores ``t`` are standard normal scaled by a decaying per-latent sd
(``latent_decay ** i``). The decay breaks the rotational symmetry of an
isotropic latent block, so control-fit PCA recovers latent i as component i in
a stable order; class signal is planted by shifting case rows along chosen
latents, in units of that latent's sd. Per-column scales and offsets are
cosmetic (the normalizer removes them) but keep the z-scoring honest.

Randomness is split into named streams per (purpose, set), so adding a metric
set or symptom column never perturbs any other draw.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cohort import (
    DEFAULT_SYMPTOMS,
    GROUP_CASE,
    GROUP_CONTROL,
    CohortDataset,
    MetricTable,
    Subject,
    SymptomTable,
)


class SynthError(ValueError):
    pass


@dataclass
class SetSpec:
    width: int
    latent_dim: int = 5
    delta: tuple[float, ...] = ()  # case shift per latent, in latent-sd units
    latent_decay: float = 0.8  # latent i (0-based) has sd decay**i
    signal_to_noise: float = 4.0  # mean per-column latent variance over noise variance


@dataclass
class Coupling:
    set_name: str
    latent: int  # 1-based latent index
    symptom: str
    strength: float  # 0 = pure noise, 1 = quantized latent only


@dataclass
class SynthConfig:
    n_controls: int = 22
    n_cases: int = 8
    sets: dict[str, SetSpec] = field(
        default_factory=lambda: {"dwi": SetSpec(width=12), "t1w": SetSpec(width=1332)}
    )
    noise_sd: float = 1.0
    age_range: tuple[float, float] = (20.0, 60.0)
    couplings: list[Coupling] = field(default_factory=list)
    symptom_columns: tuple[str, ...] = DEFAULT_SYMPTOMS
    with_symptoms: bool = True
    missing_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_controls < 2:
            raise SynthError("need at least 2 controls")
        if self.n_cases < 0:
            raise SynthError("negative case count")
        for name, spec in self.sets.items():
            if spec.width < spec.latent_dim:
                raise SynthError(f"set {name!r}: width {spec.width} < latent dim {spec.latent_dim}")
            if len(spec.delta) > spec.latent_dim:
                raise SynthError(f"set {name!r}: delta has more entries than latents")
        for c in self.couplings:
            if c.set_name not in self.sets:
                raise SynthError(f"coupling references unknown set {c.set_name!r}")
            if not 1 <= c.latent <= self.sets[c.set_name].latent_dim:
                raise SynthError(f"coupling latent {c.latent} out of range for {c.set_name!r}")
            if c.symptom not in self.symptom_columns:
                raise SynthError(f"coupling references unknown symptom {c.symptom!r}")
            if not 0.0 <= c.strength <= 1.0:
                raise SynthError(f"coupling strength {c.strength} outside [0, 1]")
        if not 0.0 <= self.missing_rate < 1.0:
            raise SynthError(f"missing rate {self.missing_rate} outside [0, 1)")


@dataclass
class GroundTruth:
    subject_ids: list[str]
    latents: dict[str, np.ndarray]  # per set: subjects x latent_dim, case shift included
    signal_latents: dict[str, list[int]]  # 1-based latents carrying class signal
    couplings: list[Coupling]


def _stream(seed: int, *path) -> np.random.Generator:
    key = tuple(zlib.crc32(str(p).encode("utf-8")) for p in path)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _subject_ids(cfg: SynthConfig) -> tuple[list[str], list[str]]:
    cw = max(2, len(str(cfg.n_controls)))
    kw = max(2, len(str(max(cfg.n_cases, 1))))
    controls = [f"ctrl_{i + 1:0{cw}d}" for i in range(cfg.n_controls)]
    cases = [f"mtbi_{i + 1:0{kw}d}" for i in range(cfg.n_cases)]
    return controls, cases


def generate_cohort(cfg: SynthConfig) -> tuple[CohortDataset, GroundTruth]:
    """Deterministically generate a cohort and the ground truth behind it."""
    cfg.validate()
    control_ids, case_ids = _subject_ids(cfg)
    all_ids = sorted(control_ids + case_ids)
    n = len(all_ids)
    is_case = np.array([sid in set(case_ids) for sid in all_ids])

    ages = _stream(cfg.seed, "age").uniform(cfg.age_range[0], cfg.age_range[1], size=n)
    subjects = [
        Subject(id=sid, group=GROUP_CASE if case else GROUP_CONTROL, age=float(age))
        for sid, case, age in zip(all_ids, is_case, ages)
    ]

    metrics: dict[str, MetricTable] = {}
    latents: dict[str, np.ndarray] = {}
    signal_latents: dict[str, list[int]] = {}
    for set_name in sorted(cfg.sets):
        spec = cfg.sets[set_name]
        r, w = spec.latent_dim, spec.width
        latent_sd = spec.latent_decay ** np.arange(r)

        t = _stream(cfg.seed, "latents", set_name).standard_normal((n, r)) * latent_sd
        delta = np.zeros(r)
        delta[: len(spec.delta)] = spec.delta
        t[is_case] += delta * latent_sd
        latents[set_name] = t
        signal_latents[set_name] = [i + 1 for i in range(r) if delta[i] != 0.0]

        gauss = _stream(cfg.seed, "loadings", set_name).standard_normal((w, r))
        loadings, _ = np.linalg.qr(gauss)

        gain = math.sqrt(spec.signal_to_noise * w * cfg.noise_sd**2 / float(latent_sd @ latent_sd))
        noise = _stream(cfg.seed, "noise", set_name).standard_normal((n, w)) * cfg.noise_sd
        col_rng = _stream(cfg.seed, "columns", set_name)
        col_scale = np.exp(col_rng.uniform(np.log(0.5), np.log(2.0), size=w))
        col_offset = col_rng.normal(0.0, 5.0, size=w)
        values = (gain * (t @ loadings.T) + noise) * col_scale + col_offset

        metrics[set_name] = MetricTable(
            set_name=set_name,
            columns=[f"{set_name}_m{j + 1:04d}" for j in range(w)],
            values=values,
            subject_ids=list(all_ids),
        )

    symptoms = None
    if cfg.with_symptoms and cfg.n_cases > 0:
        coupled = {c.symptom: c for c in cfg.couplings}
        case_rows = np.flatnonzero(is_case)
        columns = list(cfg.symptom_columns)
        values = np.zeros((len(case_ids), len(columns)))
        for j, name in enumerate(columns):
            noise = _stream(cfg.seed, "symptom", name).standard_normal(len(case_ids))
            raw = 3.0 + noise
            if name in coupled:
                c = coupled[name]
                lat = latents[c.set_name][case_rows, c.latent - 1]
                sd = lat.std()
                z = (lat - lat.mean()) / (sd if sd > 0 else 1.0)
                raw = 3.0 + c.strength * z + (1.0 - c.strength) * noise
            values[:, j] = np.clip(np.round(raw), 1, 5)
            if cfg.missing_rate > 0:
                gaps = _stream(cfg.seed, "missing", name).random(len(case_ids)) < cfg.missing_rate
                values[gaps, j] = np.nan
        case_in_order = [sid for sid in all_ids if sid in set(case_ids)]
        symptoms = SymptomTable(columns=columns, subject_ids=case_in_order, values=values)

    dataset = CohortDataset(subjects=subjects, metrics=metrics, symptoms=symptoms)
    truth = GroundTruth(
        subject_ids=list(all_ids),
        latents=latents,
        signal_latents=signal_latents,
        couplings=list(cfg.couplings),
    )
    return dataset, truth


def config_from_kv(kv: dict[str, str]) -> SynthConfig:
    """Build a SynthConfig from flat key=value pairs.

    Set fields use ``set.<name>.<field>`` keys (width, latent_dim, delta,
    latent_decay, snr); couplings are ``couple.<n> = set,latent,symptom,strength``.
    """
    cfg = SynthConfig(sets={})
    set_fields: dict[str, dict[str, str]] = {}
    for key, value in kv.items():
        if key.startswith("info.") or key.startswith("#"):
            continue
        if key.startswith("set."):
            parts = key.split(".")
            if len(parts) != 3:
                raise SynthError(f"bad set key {key!r}, expected set.<name>.<field>")
            set_fields.setdefault(parts[1], {})[parts[2]] = value
        elif key.startswith("couple."):
            pieces = [p.strip() for p in value.split(",")]
            if len(pieces) != 4:
                raise SynthError(f"{key}: expected 'set,latent,symptom,strength', got {value!r}")
            cfg.couplings.append(
                Coupling(set_name=pieces[0], latent=int(pieces[1]), symptom=pieces[2], strength=float(pieces[3]))
            )
        elif key == "n_controls":
            cfg.n_controls = int(value)
        elif key == "n_cases":
            cfg.n_cases = int(value)
        elif key == "noise_sd":
            cfg.noise_sd = float(value)
        elif key == "age_min":
            cfg.age_range = (float(value), cfg.age_range[1])
        elif key == "age_max":
            cfg.age_range = (cfg.age_range[0], float(value))
        elif key == "missing_rate":
            cfg.missing_rate = float(value)
        elif key == "seed":
            cfg.seed = int(value)
        elif key == "with_symptoms":
            cfg.with_symptoms = value.lower() in ("true", "yes", "1")
        else:
            raise SynthError(f"unknown synth config key {key!r}")
    for name, fields in set_fields.items():
        if "width" not in fields:
            raise SynthError(f"set {name!r} is missing the width field")
        spec = SetSpec(width=int(fields.pop("width")))
        if "latent_dim" in fields:
            spec.latent_dim = int(fields.pop("latent_dim"))
        if "delta" in fields:
            spec.delta = tuple(float(v) for v in fields.pop("delta").split(",") if v.strip())
        if "latent_decay" in fields:
            spec.latent_decay = float(fields.pop("latent_decay"))
        if "snr" in fields:
            spec.signal_to_noise = float(fields.pop("snr"))
        if fields:
            raise SynthError(f"unknown fields for set {name!r}: {sorted(fields)}")
        cfg.sets[name] = spec
    if not cfg.sets:
        raise SynthError("synth config defines no metric sets")
    return cfg


def config_to_kv(cfg: SynthConfig) -> dict[str, str]:
    pairs: dict[str, str] = {
        "n_controls": str(cfg.n_controls),
        "n_cases": str(cfg.n_cases),
        "noise_sd": repr(cfg.noise_sd),
        "age_min": repr(cfg.age_range[0]),
        "age_max": repr(cfg.age_range[1]),
        "missing_rate": repr(cfg.missing_rate),
        "seed": str(cfg.seed),
        "with_symptoms": str(cfg.with_symptoms).lower(),
    }
    for name in sorted(cfg.sets):
        spec = cfg.sets[name]
        pairs[f"set.{name}.width"] = str(spec.width)
        pairs[f"set.{name}.latent_dim"] = str(spec.latent_dim)
        if spec.delta:
            pairs[f"set.{name}.delta"] = ",".join(repr(v) for v in spec.delta)
        pairs[f"set.{name}.latent_decay"] = repr(spec.latent_decay)
        pairs[f"set.{name}.snr"] = repr(spec.signal_to_noise)
    for i, c in enumerate(cfg.couplings):
        pairs[f"couple.{i}"] = f"{c.set_name},{c.latent},{c.symptom},{repr(c.strength)}"
    return pairs


def write_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    """Latent scores per subject, one column per (set, latent), for test oracles."""
    header = ["subject_id"]
    for set_name in sorted(truth.latents):
        header += [f"{set_name}_latent{i + 1}" for i in range(truth.latents[set_name].shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row_idx, sid in enumerate(truth.subject_ids):
            row: list[str] = [sid]
            for set_name in sorted(truth.latents):
                row += [repr(float(v)) for v in truth.latents[set_name][row_idx]]
            writer.writerow(row)
