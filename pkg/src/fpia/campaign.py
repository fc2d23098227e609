"""Batch experiments driven by a TOML/JSON campaign file.

Each section of the file produces one CSV named after the figure it mirrors:

========================  ======================================================
section                   output
========================  ======================================================
``utilization``           ``fig3_utilization.csv``   packing gain vs problem size
``landscape``             ``fig5_landscape.csv``     area over an (I, O) grid
``fi_fo``                 ``fig7_fi_fo.csv``         routing area over (F_I, F_O)
``shared_vs_custom``      ``fig8_shared_vs_custom.csv``
``occupancy``             ``fig9_occupancy.csv``     area vs output-pin occupancy
``adc_cell``              ``fig_adc_cell_sweep.csv`` TA over (A_ADC, A_cell)
========================  ======================================================

Every row carries the seed and the hash of the campaign config; the manifest
records both plus a digest of every output file. Nothing time-dependent is
written, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fpia import __version__
from fpia.cluster import ClusterParams, PackingError, ffd_pack, utilization
from fpia.corpus import Problem, random_3sat_problem, resolve
from fpia.cost import (
    SWEEP_HEADER,
    Embedded,
    TechParams,
    preset,
    rows_to_csv,
    sweep,
)
from fpia.fabric import load_config
from fpia.pipeline import ArchPoint, InfeasibleError, embed
from fpia.search import LANDSCAPE_HEADER, SHARED_HEADER, Evaluator, SearchSpace, grid_search, shared_vs_custom

OUTPUTS = {
    "utilization": "fig3_utilization.csv",
    "landscape": "fig5_landscape.csv",
    "fi_fo": "fig7_fi_fo.csv",
    "shared_vs_custom": "fig8_shared_vs_custom.csv",
    "occupancy": "fig9_occupancy.csv",
    "adc_cell": "fig_adc_cell_sweep.csv",
}
TAGS = ["seed", "config_hash"]
UTIL_HEADER = ["problem", "N", "I", "O", "clusters", "improvement", "improvement_external"]


@dataclass
class Campaign:
    name: str
    config: dict
    seeds: list[int]
    tech: TechParams
    base: ArchPoint
    sections: dict[str, dict] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_campaign(doc: dict) -> Campaign:
    if "name" not in doc:
        raise ValueError("campaign needs a name")
    seeds = doc.get("seeds", [0])
    if not seeds:
        raise ValueError("campaign needs at least one seed")
    tech = doc.get("tech", "eflash_optimistic")
    tech = preset(tech) if isinstance(tech, str) else TechParams.from_dict(tech)
    fab = doc.get("fabric", {})
    base = ArchPoint(**{k: fab[k] for k in ("I", "O", "F_I", "F_O", "occupancy") if k in fab}) \
        if fab else ArchPoint(140, 40)
    sections = {k: doc[k] for k in OUTPUTS if k in doc}
    unknown = set(doc) - set(OUTPUTS) - {"name", "seeds", "tech", "fabric", "output", "jobs"}
    if unknown:
        raise ValueError(f"unknown campaign keys {sorted(unknown)}")
    return Campaign(doc["name"], doc, list(seeds), tech, base, sections)


def load_campaign(path: str | Path) -> Campaign:
    return parse_campaign(load_config(path))


# ---------------------------------------------------------------- sections


def _problems(specs, seed: int) -> list[Problem]:
    return [resolve(s, seed) for s in specs]


def _utilization(c: Campaign, sec: dict, seed: int) -> list[dict]:
    rows = []
    I = sec.get("I", 256)
    for O in sec.get("O", [16, 64, 256]):
        for size in sec.get("sizes", [200, 500, 1000, 2000]):
            p = random_3sat_problem(size, seed)
            try:
                cl = ffd_pack(p.qubo, ClusterParams(I, O))
            except PackingError:
                rows.append({"problem": p.name, "N": p.qubo.n, "I": I, "O": O, "clusters": "",
                             "improvement": "", "improvement_external": ""})
                continue
            u = utilization(cl, p.qubo.n)
            rows.append({"problem": p.name, "N": p.qubo.n, "I": I, "O": O, "clusters": len(cl),
                         "improvement": u.improvement, "improvement_external": u.improvement_external})
    return rows


def _grid(c: Campaign, sec: dict, seed: int, axes_names) -> list[dict]:
    ev = Evaluator(c.tech, seed)
    rows = []
    for p in _problems(sec.get("problems", [sec.get("problem", "uf20")]), seed):
        axes = {a: sec[a] for a in axes_names if a in sec}
        rows += grid_search(p, axes, c.tech, seed, base=c.base, evaluator=ev).rows()
    return rows


def _shared(c: Campaign, sec: dict, seed: int) -> list[dict]:
    space = SearchSpace(**{k: tuple(v) for k, v in sec.get("space", {}).items()})
    rep = shared_vs_custom(_problems(sec["problems"], seed), space, sec.get("budget", 20), seed, c.tech)
    return rep.rows


def _adc_cell(c: Campaign, sec: dict, seed: int) -> list[dict]:
    embedded = []
    for p in _problems(sec["problems"], seed):
        try:
            emb = embed(p, c.base, c.tech, seed)
            embedded.append(Embedded(p.name, p.qubo.n, emb.fabric))
        except InfeasibleError:
            embedded.append(Embedded(p.name, p.qubo.n, None))
    return sweep(c.tech, sec.get("A_ADC", [10**5, 10**6, 10**7]), sec.get("A_cell", [60, 180, 600]), embedded)


def run_section(c: Campaign, name: str, seed: int) -> list[dict]:
    sec = c.sections[name]
    if name == "utilization":
        return _utilization(c, sec, seed)
    if name == "landscape":
        return _grid(c, sec, seed, ("I", "O"))
    if name == "fi_fo":
        return _grid(c, sec, seed, ("F_I", "F_O"))
    if name == "occupancy":
        return _grid(c, sec, seed, ("occupancy",))
    if name == "shared_vs_custom":
        return _shared(c, sec, seed)
    if name == "adc_cell":
        return _adc_cell(c, sec, seed)
    raise ValueError(f"unknown section {name}")


HEADERS = {
    "utilization": UTIL_HEADER,
    "landscape": LANDSCAPE_HEADER,
    "fi_fo": LANDSCAPE_HEADER,
    "occupancy": LANDSCAPE_HEADER,
    "shared_vs_custom": SHARED_HEADER,
    "adc_cell": SWEEP_HEADER,
}


def _job(args):
    c, name, seed = args
    try:
        return name, seed, run_section(c, name, seed), None
    except Exception:  # recorded in the manifest, the rest of the campaign continues
        return name, seed, [], traceback.format_exc(limit=3)


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def run_campaign(c: Campaign, out_dir: str | Path, jobs: int = 1) -> dict:
    """Run every section for every seed; returns the manifest (also written)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(c, name, seed) for name in c.sections for seed in c.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    h = c.config_hash
    rows: dict[str, list[dict]] = {name: [] for name in c.sections}
    failures = []
    for name, seed, section_rows, err in results:
        if err is not None:
            failures.append({"section": name, "seed": seed, "error": err.strip().splitlines()[-1]})
        rows[name] += [{**r, "seed": seed, "config_hash": h} for r in section_rows]
    digests = {}
    for name, section_rows in rows.items():
        text = rows_to_csv(section_rows, HEADERS[name] + [t for t in TAGS if t not in HEADERS[name]])
        _write_atomic(out / OUTPUTS[name], text)
        digests[OUTPUTS[name]] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"name": c.name, "config_hash": h, "config": c.config, "seeds": c.seeds,
                "version": __version__, "outputs": digests, "failures": failures}
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
