"""Device bundles: coupling map + noise model + calibration error map."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .baseline import ErrorMap
from .errors import ConfigError
from .layout import CouplingMap
from .noise import NoiseModel, parse_edge_key

BUILTIN = ("nairobi", "montreal")


@dataclass(frozen=True)
class Device:
    name: str
    coupling: CouplingMap
    noise: NoiseModel
    error_map: Optional[ErrorMap] = None

    @property
    def width(self) -> int:
        return self.coupling.n_qubits

    def __post_init__(self):
        if self.noise.n_qubits != self.coupling.n_qubits:
            raise ConfigError("noise model and coupling map disagree on the qubit count")
        missing = [e for e in self.coupling.edges if f"{e[0]}-{e[1]}" not in self.noise.p2]
        if missing:
            raise ConfigError(f"noise model does not price coupling edges {sorted(missing)}")

    def calibration(self) -> ErrorMap:
        """The shipped error map, or a snapshot of the noise model when none was given."""
        return self.error_map or ErrorMap.from_noise_model(self.noise)

    def scaled(self, factor: float) -> "Device":
        return replace(self, noise=self.noise.scaled(factor), error_map=None)

    def with_noisy_edge(self, edge, factor: float) -> "Device":
        p2 = dict(self.noise.p2)
        key = "-".join(str(q) for q in sorted(edge))
        p2[key] = min(1.0, p2[key] * factor)
        return replace(self, noise=replace(self.noise, p2=p2), error_map=None)


def _read(name: str, kind: str):
    try:
        return json.loads(resources.files("circfid.data").joinpath(f"{name}_{kind}.json").read_text())
    except FileNotFoundError:
        return None


def load_device(spec) -> Device:
    """Built-in name (``nairobi``, ``montreal``) or a JSON file.

    A device file holds ``{"name", "coupling_map", "noise_model", "error_map"?}``
    where each entry is either an inline object or a path relative to the file.
    """
    if isinstance(spec, Device):
        return spec
    if spec in BUILTIN:
        cm = CouplingMap.from_dict(_read(spec, "map"))
        nm = NoiseModel.from_dict(_read(spec, "noise"))
        em_data = _read(spec, "errors")
        return Device(spec, cm, nm, ErrorMap.from_dict(em_data) if em_data else None)
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"device {spec!r} is neither built in nor an existing file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"device file {path} is not JSON: {exc}") from None

    def part(key):
        value = data.get(key)
        if isinstance(value, str):
            return json.loads((path.parent / value).read_text())
        return value

    if part("coupling_map") is None or part("noise_model") is None:
        raise ConfigError("device file needs coupling_map and noise_model")
    em = part("error_map")
    return Device(
        data.get("name", path.stem),
        CouplingMap.from_dict(part("coupling_map")),
        NoiseModel.from_dict(part("noise_model")),
        ErrorMap.from_dict(em) if em else None,
    )


def noisiest_edge(device: Device) -> tuple[int, int]:
    key = max(device.noise.p2, key=lambda k: (device.noise.p2[k], k))
    return parse_edge_key(key)
