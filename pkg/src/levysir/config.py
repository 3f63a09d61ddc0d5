"""Line-oriented run configuration: `section.key = value` per line.

Atoms of the jump measure are given as indexed rows, e.g.

    noise.atom.0.weight = 1.0
    noise.atom.0.eta1 = 0.05

Unknown keys are rejected with the offending line number, and a parsed
configuration serializes back to an equivalent text form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .engine import SimConfig
from .levy import FiniteLevyMeasure, LevyAtom, NoiseSpec
from .model import ModelParams, StateTriple, validate_params


class ConfigError(ValueError):
    pass


_MODEL_KEYS = {"A", "mu1", "alpha", "beta", "gamma"}
_NOISE_KEYS = {"sigma1", "sigma2", "sigma3"}
_ATOM_KEYS = {"label", "weight", "eta1", "eta2", "eta3"}
_SCHEME_KEYS = {
    "dt",
    "t_end",
    "seed",
    "record_stride",
    "couple_aux",
    "initial_s",
    "initial_i",
    "initial_r",
}
_ENSEMBLE_KEYS = {"n_paths", "workers", "checkpoint_dt", "histogram_bins", "p"}
_OUTPUT_KEYS = {"dir", "svg"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs: model, noise, scheme, ensemble, output."""

    params: ModelParams
    noise: NoiseSpec
    initial: StateTriple
    dt: float = 0.01
    t_end: float = 700.0
    seed: int = 0
    record_stride: int = 1
    couple_aux: bool = False
    n_paths: int = 1
    workers: int = 1
    checkpoint_dt: float | None = None
    histogram_bins: int = 50
    p: float = 1.0
    output_dir: str = "."
    svg: bool = False

    def sim_config(self) -> SimConfig:
        return SimConfig(
            params=self.params,
            noise=self.noise,
            initial=self.initial,
            t_end=self.t_end,
            dt=self.dt,
            seed=self.seed,
            record_stride=self.record_stride,
            couple_aux=self.couple_aux,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


def _parse_bool(raw: str, lineno: int) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"line {lineno}: expected a boolean, got {raw!r}")


def _parse_float(raw: str, lineno: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: expected a number, got {raw!r}") from None


def _parse_int(raw: str, lineno: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: expected an integer, got {raw!r}") from None


@dataclass
class _Partial:
    model: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    atoms: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises ConfigError with line numbers."""
    partial = _Partial()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key_part, value = (part.strip() for part in line.split("=", 1))
        parts = key_part.split(".")
        section = parts[0]
        if section == "model" and len(parts) == 2 and parts[1] in _MODEL_KEYS:
            partial.model[parts[1]] = _parse_float(value, lineno)
        elif section == "noise" and len(parts) == 2 and parts[1] in _NOISE_KEYS:
            partial.noise[parts[1]] = _parse_float(value, lineno)
        elif (
            section == "noise"
            and len(parts) == 4
            and parts[1] == "atom"
            and parts[3] in _ATOM_KEYS
        ):
            index = _parse_int(parts[2], lineno)
            entry = partial.atoms.setdefault(index, {})
            if parts[3] == "label":
                entry["label"] = value
            else:
                entry[parts[3]] = _parse_float(value, lineno)
        elif section == "scheme" and len(parts) == 2 and parts[1] in _SCHEME_KEYS:
            key = parts[1]
            if key == "couple_aux":
                partial.scheme[key] = _parse_bool(value, lineno)
            elif key in ("seed", "record_stride"):
                partial.scheme[key] = _parse_int(value, lineno)
            else:
                partial.scheme[key] = _parse_float(value, lineno)
        elif section == "ensemble" and len(parts) == 2 and parts[1] in _ENSEMBLE_KEYS:
            key = parts[1]
            if key in ("n_paths", "workers", "histogram_bins"):
                partial.ensemble[key] = _parse_int(value, lineno)
            else:
                partial.ensemble[key] = _parse_float(value, lineno)
        elif section == "output" and len(parts) == 2 and parts[1] in _OUTPUT_KEYS:
            if parts[1] == "svg":
                partial.output["svg"] = _parse_bool(value, lineno)
            else:
                partial.output["dir"] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key_part!r}")
    return _assemble(partial)


def _assemble(partial: _Partial) -> RunConfig:
    missing = _MODEL_KEYS - partial.model.keys()
    if missing:
        raise ConfigError(f"model section incomplete: missing {sorted(missing)}")
    params = ModelParams(**partial.model)
    result = validate_params(params)
    if not result.ok:
        raise ConfigError("invalid model parameters: " + "; ".join(result.violations))

    atoms = []
    for index in sorted(partial.atoms):
        entry = partial.atoms[index]
        missing = {"weight", "eta1", "eta2", "eta3"} - entry.keys()
        if missing:
            raise ConfigError(
                f"noise.atom.{index} incomplete: missing {sorted(missing)}"
            )
        atoms.append(
            LevyAtom(
                weight=entry["weight"],
                eta1=entry["eta1"],
                eta2=entry["eta2"],
                eta3=entry["eta3"],
                label=entry.get("label", ""),
            )
        )
    try:
        measure = FiniteLevyMeasure(atoms)
        noise = NoiseSpec(
            sigma1=partial.noise.get("sigma1", 0.0),
            sigma2=partial.noise.get("sigma2", 0.0),
            sigma3=partial.noise.get("sigma3", 0.0),
            measure=measure,
        )
    except ValueError as err:
        raise ConfigError(f"invalid noise section: {err}") from None

    scheme = partial.scheme
    try:
        initial = StateTriple(
            scheme.get("initial_s", 0.4),
            scheme.get("initial_i", 0.3),
            scheme.get("initial_r", 0.1),
        )
        initial.require_positive()
    except ValueError as err:
        raise ConfigError(str(err)) from None

    ensemble = partial.ensemble
    config = RunConfig(
        params=params,
        noise=noise,
        initial=initial,
        dt=scheme.get("dt", 0.01),
        t_end=scheme.get("t_end", 700.0),
        seed=scheme.get("seed", 0),
        record_stride=scheme.get("record_stride", 1),
        couple_aux=scheme.get("couple_aux", False),
        n_paths=ensemble.get("n_paths", 1),
        workers=ensemble.get("workers", 1),
        checkpoint_dt=ensemble.get("checkpoint_dt"),
        histogram_bins=ensemble.get("histogram_bins", 50),
        p=ensemble.get("p", 1.0),
        output_dir=partial.output.get("dir", "."),
        svg=partial.output.get("svg", False),
    )
    try:
        config.sim_config()
    except ValueError as err:
        raise ConfigError(f"invalid scheme section: {err}") from None
    if config.n_paths < 1 or config.workers < 1:
        raise ConfigError("ensemble counts must be >= 1")
    if config.p < 0.5:
        raise ConfigError("ensemble.p must be >= 1/2")
    return config


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(config: RunConfig) -> str:
    """Serialize to the line format; parsing it back reproduces the config."""
    lines = []
    for key in sorted(_MODEL_KEYS):
        lines.append(f"model.{key} = {getattr(config.params, key)!r}")
    for key in sorted(_NOISE_KEYS):
        lines.append(f"noise.{key} = {getattr(config.noise, key)!r}")
    for k, atom in enumerate(config.noise.measure.atoms):
        if atom.label:
            lines.append(f"noise.atom.{k}.label = {atom.label}")
        lines.append(f"noise.atom.{k}.weight = {atom.weight!r}")
        lines.append(f"noise.atom.{k}.eta1 = {atom.eta1!r}")
        lines.append(f"noise.atom.{k}.eta2 = {atom.eta2!r}")
        lines.append(f"noise.atom.{k}.eta3 = {atom.eta3!r}")
    lines.append(f"scheme.dt = {config.dt!r}")
    lines.append(f"scheme.t_end = {config.t_end!r}")
    lines.append(f"scheme.seed = {config.seed}")
    lines.append(f"scheme.record_stride = {config.record_stride}")
    lines.append(f"scheme.couple_aux = {str(config.couple_aux).lower()}")
    lines.append(f"scheme.initial_s = {config.initial.S!r}")
    lines.append(f"scheme.initial_i = {config.initial.I!r}")
    lines.append(f"scheme.initial_r = {config.initial.R!r}")
    lines.append(f"ensemble.n_paths = {config.n_paths}")
    lines.append(f"ensemble.workers = {config.workers}")
    if config.checkpoint_dt is not None:
        lines.append(f"ensemble.checkpoint_dt = {config.checkpoint_dt!r}")
    lines.append(f"ensemble.histogram_bins = {config.histogram_bins}")
    lines.append(f"ensemble.p = {config.p!r}")
    lines.append(f"output.dir = {config.output_dir}")
    lines.append(f"output.svg = {str(config.svg).lower()}")
    return "\n".join(lines) + "\n"
