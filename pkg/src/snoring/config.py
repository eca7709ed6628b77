"""Experiment configuration: one TOML file drives a whole run.

Sections mirror the pipeline: [experiment] for seeds/classifiers/drop
counts, then either [synth] for a generated batch or one [[project]] table
per mined project.  Command-line --seed/--out override the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import InputError
from .learners import LearnerKind
from .synth import SynthConfig

DEFAULT_CLASSIFIERS = tuple(kind.value for kind in LearnerKind)
DEFAULT_DROP_KS = (0, 1, 2, 3, 4)
DEFAULT_ITERATIONS = 5000


@dataclass(frozen=True)
class ProjectSource:
    """One mined project: a history cache (or repo to ingest) plus issues."""

    name: str
    issues: Path
    history: Path | None = None
    repo: Path | None = None
    tag_pattern: str = r"v.*"

    def __post_init__(self) -> None:
        if (self.history is None) == (self.repo is None):
            raise InputError(
                f"project {self.name}: exactly one of 'history' or 'repo' required"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    classifiers: tuple[str, ...] = DEFAULT_CLASSIFIERS
    drop_ks: tuple[int, ...] = DEFAULT_DROP_KS
    iterations: int = DEFAULT_ITERATIONS
    synth: SynthConfig | None = None
    synth_projects: int = 0
    projects: tuple[ProjectSource, ...] = ()
    out_dir: Path = field(default=Path("out"))
    offline: bool = False

    def __post_init__(self) -> None:
        for name in self.classifiers:
            try:
                LearnerKind(name)
            except ValueError:
                raise InputError(f"unknown classifier {name!r}") from None
        if not self.projects and self.synth is None:
            raise InputError("configuration names no projects and no synth batch")
        if any(k < 0 for k in self.drop_ks):
            raise InputError("drop_k values must be nonnegative")

    def kinds(self) -> tuple[LearnerKind, ...]:
        return tuple(LearnerKind(name) for name in self.classifiers)

    def resolved(self) -> dict:
        """All settings with defaults materialized, for the output echo."""
        doc = {
            "seed": self.seed,
            "classifiers": list(self.classifiers),
            "drop_k": list(self.drop_ks),
            "permutation_iterations": self.iterations,
            "offline": self.offline,
            "out_dir": str(self.out_dir),
        }
        if self.synth is not None:
            doc["synth"] = {
                "projects": self.synth_projects,
                "releases": self.synth.releases,
                "classes": self.synth.classes,
                "commits_per_release": self.synth.commits_per_release,
                "defect_rate": self.synth.defect_rate,
                "dormancy": self.synth.dormancy,
                "av_availability": self.synth.av_availability,
            }
        if self.projects:
            doc["projects"] = [
                {
                    "name": p.name,
                    "issues": str(p.issues),
                    "history": str(p.history) if p.history else None,
                    "repo": str(p.repo) if p.repo else None,
                    "tag_pattern": p.tag_pattern,
                }
                for p in self.projects
            ]
        return doc


def load_config(
    path: str | Path,
    *,
    seed: int | None = None,
    out_dir: str | Path | None = None,
    offline: bool = False,
) -> ExperimentConfig:
    """Parse a TOML experiment file; CLI overrides win over file values."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"config {path}: {exc}") from exc

    exp = doc.get("experiment", {})
    synth_doc = doc.get("synth")
    synth = None
    synth_projects = 0
    base_seed = seed if seed is not None else int(exp.get("seed", 0))
    if synth_doc is not None:
        synth_projects = int(synth_doc.get("projects", 1))
        synth = SynthConfig(
            releases=int(synth_doc.get("releases", 20)),
            classes=int(synth_doc.get("classes", 40)),
            commits_per_release=float(synth_doc.get("commits_per_release", 25.0)),
            defect_rate=float(synth_doc.get("defect_rate", 4.0)),
            dormancy=float(synth_doc.get("dormancy", 0.2)),
            av_availability=float(synth_doc.get("av_availability", 1.0)),
            seed=base_seed,
        )
    projects = []
    for entry in doc.get("project", []):
        try:
            projects.append(
                ProjectSource(
                    name=entry["name"],
                    issues=_resolve(path, entry["issues"]),
                    history=_resolve(path, entry["history"]) if "history" in entry else None,
                    repo=_resolve(path, entry["repo"]) if "repo" in entry else None,
                    tag_pattern=entry.get("tag_pattern", r"v.*"),
                )
            )
        except KeyError as exc:
            raise InputError(f"config {path}: project entry missing {exc}") from None
    return ExperimentConfig(
        seed=base_seed,
        classifiers=tuple(exp.get("classifiers", DEFAULT_CLASSIFIERS)),
        drop_ks=tuple(int(k) for k in exp.get("drop_k", DEFAULT_DROP_KS)),
        iterations=int(exp.get("permutation_iterations", DEFAULT_ITERATIONS)),
        synth=synth,
        synth_projects=synth_projects,
        projects=tuple(projects),
        out_dir=Path(out_dir) if out_dir is not None else Path(exp.get("out", "out")),
        offline=offline,
    )


def _resolve(config_path: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else config_path.parent / candidate


def write_resolved(config: ExperimentConfig, path: Path) -> None:
    path.write_text(
        json.dumps(config.resolved(), indent=1, sort_keys=True), encoding="utf-8"
    )
