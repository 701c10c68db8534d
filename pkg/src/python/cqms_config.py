"""
cqms - Configuration

The JSON experiment document: one ExperimentConfig per run, with presets for
the Lip-normed spaces and bridges the suites work on. Raw documents are
checked against the schema generated from these models before parsing.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import jsonschema
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from cqms_lipnorms import FunctionalLip, LipNorm, ScaledLip
from cqms_logger import get_logger
from cqms_metrics import (
    Bridge,
    diameter_upper_bound,
    make_norm_bridge,
    make_point_bridge,
    make_quotient_bridge,
    make_scaling_bridge,
    two_point_lipnorm,
    zero_lipnorm,
)
from cqms_nctorus import (
    LengthFn,
    TorusActionLip,
    TorusSpec,
    cesaro_quotient,
    clock_shift_algebra,
    torus_lipnorm,
)
from cqms_opsys import OperatorSystem, trace_state
from cqms_types import CMatrix, ConfigError, OperatorSystemModel

logger = get_logger("config")

SUITES = ("validate", "distance", "berezin", "nctorus", "report")
HALF_INTEGER_SPINS = [0.5 * m for m in range(1, 17)]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# Spaces


class TwoPointSpace(_Section):
    """C^2 with L(x) = scale * |x_1 - x_2| / distance."""
    kind: Literal["two_point"] = "two_point"
    distance: float = Field(default=1.0, gt=0.0, description="Distance between the two points")
    scale: float = Field(default=1.0, gt=0.0, description="Factor multiplying the Lip-norm")

    def build(self, base_dir: Path) -> LipNorm:
        lip = two_point_lipnorm(self.distance)
        return lip if self.scale == 1.0 else ScaledLip(lip, self.scale)


class OnePointSpace(_Section):
    """The scalars with the zero seminorm."""
    kind: Literal["one_point"] = "one_point"

    def build(self, base_dir: Path) -> LipNorm:
        return zero_lipnorm(OperatorSystem.one_point())


class TorusSpace(_Section):
    """Clock-shift model of a rational noncommutative torus with its lattice gauge Lip-norm."""
    kind: Literal["torus"] = "torus"
    d: int = Field(default=2, ge=1, le=3)
    q: int = Field(default=3, ge=2, le=16)
    p: Union[int, List[List[int]]] = Field(default=1, description="Phase numerator (d = 2) or antisymmetric matrix")
    length: Literal["euclidean", "sup"] = Field(default="euclidean", description="Length function on T^d")
    model: Literal["auto", "minimal", "full"] = "auto"

    def spec(self) -> TorusSpec:
        return clock_shift_algebra(self.d, self.q, self.p, model=self.model)

    def build(self, base_dir: Path) -> TorusActionLip:
        return torus_lipnorm(self.spec(), LengthFn.by_name(self.length, self.d))


class FullMatrixSpace(_Section):
    """M_k with L(x) = max_i ||[A_i, x]|| for random Hermitian A_i."""
    kind: Literal["full_matrix"] = "full_matrix"
    k: int = Field(default=2, ge=2, le=4)
    maps: int = Field(default=2, ge=1, le=8, description="Number of commutator maps")
    seed: int = Field(default=0, ge=0, description="Seed of the random Hermitian matrices")

    def build(self, base_dir: Path) -> LipNorm:
        rng = np.random.default_rng(self.seed)
        system = OperatorSystem.full_matrix(self.k)
        generators = []
        for _ in range(self.maps):
            g = rng.standard_normal((self.k, self.k)) + 1j * rng.standard_normal((self.k, self.k))
            generators.append((g + g.conj().T) / 2)
        return FunctionalLip.from_functions(system, [lambda b, a=a: a @ b - b @ a for a in generators])


class ExplicitSpace(_Section):
    """
    An operator system given by its basis, inline or in a JSON file, with a
    functional Lip-norm given by the images of the basis under each map.
    """
    kind: Literal["explicit"] = "explicit"
    file: Optional[str] = Field(default=None, description="Path of an operator-system document")
    system: Optional[OperatorSystemModel] = None
    lip_maps: List[List[CMatrix]] = Field(..., min_length=1, description="Images of the basis, one list per map")
    scale: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def _one_source(self) -> "ExplicitSpace":
        if (self.file is None) == (self.system is None):
            raise ValueError("give exactly one of 'file' and 'system'")
        return self

    def load_system(self, base_dir: Path) -> OperatorSystem:
        if self.system is not None:
            return OperatorSystem.from_model(self.system, name="explicit")
        path = resolve_path(base_dir, self.file)
        try:
            model = OperatorSystemModel.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise ConfigError(f"{path}: not an operator-system document: {exc}") from exc
        return OperatorSystem.from_model(model, name=path.stem)

    def build(self, base_dir: Path) -> LipNorm:
        system = self.load_system(base_dir)
        lip = FunctionalLip(system, [np.stack([m.to_array() for m in images]) for images in self.lip_maps])
        return lip if self.scale == 1.0 else ScaledLip(lip, self.scale)


SpaceConfig = Annotated[
    Union[TwoPointSpace, OnePointSpace, TorusSpace, FullMatrixSpace, ExplicitSpace],
    Field(discriminator="kind"),
]


@dataclass(frozen=True)
class BridgeSetup:
    """A Lip-normed pair joined by a bridge, ready for validation."""
    label: str
    lx: LipNorm
    ly: LipNorm
    bridge: Bridge
    parameter: float


# Bridges


class NormBridgeConfig(_Section):
    kind: Literal["norm"] = "norm"
    epsilon: float = Field(..., gt=0.0)


class PointBridgeConfig(_Section):
    kind: Literal["point"] = "point"
    gammas: List[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1], min_length=2,
                                description="Bridge constants; bounds are extrapolated to gamma = 0")


class QuotientBridgeConfig(_Section):
    """Compression of a torus onto the range of its Cesàro mean of the given degree."""
    kind: Literal["quotient"] = "quotient"
    eta: float = Field(..., gt=0.0)
    degree: int = Field(default=1, ge=0)


class ScalingBridgeConfig(_Section):
    """(X, lambda L) against the one-point space; constant defaults to the certified diameter."""
    kind: Literal["scaling"] = "scaling"
    lambdas: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0], min_length=1)
    constant: Optional[float] = Field(default=None, gt=0.0)


BridgeConfig = Annotated[
    Union[NormBridgeConfig, PointBridgeConfig, QuotientBridgeConfig, ScalingBridgeConfig],
    Field(discriminator="kind"),
]


class DistanceCase(_Section):
    name: str = Field(..., min_length=1)
    x: SpaceConfig
    y: Optional[SpaceConfig] = Field(default=None, description="Second space; fixed by quotient and scaling bridges")
    bridge: BridgeConfig

    @model_validator(mode="after")
    def _check_spaces(self) -> "DistanceCase":
        kind = self.bridge.kind
        if kind in ("norm", "point") and self.y is None:
            raise ValueError(f"a {kind} bridge needs a second space 'y'")
        if kind == "quotient":
            if self.x.kind != "torus":
                raise ValueError("quotient bridges compress a torus space")
            if self.y is not None:
                raise ValueError("the quotient target is the range of the compression; drop 'y'")
        if kind == "scaling" and self.y is not None and self.y.kind != "one_point":
            raise ValueError("scaling bridges connect to the one-point space")
        return self

    def build(self, base_dir: Path) -> List[BridgeSetup]:
        """
        The Lip-normed pairs and bridges this case describes, one entry per
        bridge parameter.
        """
        bridge = self.bridge
        lx = self.x.build(base_dir)
        if isinstance(bridge, NormBridgeConfig):
            return [BridgeSetup(self.name, lx, self.y.build(base_dir), make_norm_bridge(bridge.epsilon),
                                bridge.epsilon)]
        if isinstance(bridge, PointBridgeConfig):
            ly = self.y.build(base_dir)
            dx, dy = diameter_upper_bound(lx), diameter_upper_bound(ly)
            diameters = None if dx is None or dy is None else (dx, dy)
            return [BridgeSetup(f"{self.name}[gamma={g}]", lx, ly,
                                make_point_bridge(g, trace_state(lx.system), trace_state(ly.system), diameters), g)
                    for g in bridge.gammas]
        if isinstance(bridge, QuotientBridgeConfig):
            phi, ly = cesaro_quotient(lx, bridge.degree)
            epsilon = lx.fejer_defect(bridge.degree)
            return [BridgeSetup(self.name, lx, ly, make_quotient_bridge(bridge.eta, phi, epsilon), bridge.eta)]
        constant = bridge.constant if bridge.constant is not None else diameter_upper_bound(lx)
        if constant is None or not constant > 0:
            raise ConfigError(f"case {self.name}: no certified diameter for the scaling constant; set 'constant'")
        ly = zero_lipnorm(OperatorSystem.one_point())
        return [BridgeSetup(f"{self.name}[lambda={lam}]", ScaledLip(lx, lam), ly, make_scaling_bridge(lam, constant),
                            lam)
                for lam in bridge.lambdas]


def _default_cases() -> List[DistanceCase]:
    return [
        DistanceCase(name="scaling", x=TwoPointSpace(distance=1.0), bridge=ScalingBridgeConfig(constant=1.0)),
        DistanceCase(name="norm", x=TwoPointSpace(distance=1.0), y=TwoPointSpace(distance=1.1),
                     bridge=NormBridgeConfig(epsilon=0.1)),
        DistanceCase(name="quotient", x=TorusSpace(q=5, p=1), bridge=QuotientBridgeConfig(eta=0.01, degree=1)),
        DistanceCase(name="point", x=TwoPointSpace(distance=1.0), y=TwoPointSpace(distance=2.0),
                     bridge=PointBridgeConfig()),
    ]


class TriangleAudit(_Section):
    """Norm bridges X -> Y -> Z and their composition X -> Z."""
    x: TwoPointSpace = Field(default_factory=lambda: TwoPointSpace(distance=1.0))
    y: TwoPointSpace = Field(default_factory=lambda: TwoPointSpace(distance=1.1))
    z: TwoPointSpace = Field(default_factory=lambda: TwoPointSpace(distance=1.2))
    eps_xy: float = Field(default=0.1, gt=0.0)
    eps_yz: float = Field(default=0.1, gt=0.0)


# Suite sections


class ValidateSection(_Section):
    spaces: List[SpaceConfig] = Field(
        default_factory=lambda: [TwoPointSpace(distance=2.0), TorusSpace(q=3, p=1)], min_length=1)
    samples: int = Field(default=32, ge=1, description="Samples for the seminorm-axiom checks")
    levels: List[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)
    choi_maps: int = Field(default=100, ge=1, description="Random UCP maps for the Choi round trip")
    choi_tol: float = Field(default=1e-12, gt=0.0)
    closed_form_pairs: int = Field(default=50, ge=1, description="Random pairs for the two-point oracle")
    closed_form_tol: float = Field(default=1e-6, gt=0.0)
    net_size: int = Field(default=8, ge=2)
    diameter_tol: float = Field(default=0.05, gt=0.0)
    norm_bound_samples: int = Field(default=1000, ge=1)
    norm_bound_slack: float = Field(default=0.05, ge=0.0)
    leibniz_samples: int = Field(default=1000, ge=1)
    leibniz_slack: float = Field(default=1e-8, ge=0.0)
    extension_maps: int = Field(default=4, ge=0)
    diambound_cases: List[DistanceCase] = Field(default_factory=lambda: [
        DistanceCase(name="near_pair", x=TwoPointSpace(distance=1.0), y=TwoPointSpace(distance=1.1),
                     bridge=NormBridgeConfig(epsilon=0.1)),
        DistanceCase(name="equal_pair", x=TwoPointSpace(distance=1.0), y=TwoPointSpace(distance=1.0),
                     bridge=NormBridgeConfig(epsilon=0.05)),
    ])
    diambound_levels: List[int] = Field(default_factory=lambda: [1, 2])
    diambound_lambda: float = Field(default=3.0, gt=2.0, description="Must exceed twice the anchor's Lip value (1)")
    diambound_samples: int = Field(default=4, ge=1)


class DistanceSection(_Section):
    cases: List[DistanceCase] = Field(default_factory=_default_cases)
    triangle: Optional[TriangleAudit] = Field(default_factory=TriangleAudit)
    samples: int = Field(default=8, ge=1, description="Random Lip-1 samples per side in bridge validation")
    deltas: List[float] = Field(default_factory=lambda: [0.1, 0.01, 1e-6], min_length=1)
    hausdorff_level: int = Field(default=1, ge=0, description="Heuristic Hausdorff level for norm cases (0: off)")
    net_size: int = Field(default=4, ge=1)
    extrapolation_tol: float = Field(default=0.05, gt=0.0)


class BerezinSection(_Section):
    spins: List[float] = Field(default_factory=lambda: list(HALF_INTEGER_SPINS), min_length=1)
    grid_theta: int = Field(default=24, ge=4)
    grid_phi: int = Field(default=48, ge=4)
    rotations: int = Field(default=12, ge=1)
    samples: int = Field(default=6, ge=1)
    property_samples: int = Field(default=8, ge=1)
    levels: List[int] = Field(default_factory=lambda: [1, 2])
    level_maps: int = Field(default=6, ge=0, description="Maps per level in the matrix-level bound check (0: off)")

    @model_validator(mode="after")
    def _half_integers(self) -> "BerezinSection":
        for j in self.spins:
            if j <= 0 or abs(2 * j - round(2 * j)) > 1e-12:
                raise ValueError(f"spin {j} is not a positive half-integer")
        return self


class FejerCheckSection(_Section):
    q: int = Field(default=8, ge=2)
    p: int = Field(default=1)
    degrees: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    samples: int = Field(default=100, ge=1)
    poly_degree: int = Field(default=3, ge=1)
    slack: float = Field(default=1e-6, ge=0.0)
    grid: int = Field(default=8, ge=1)
    kernel_points: int = Field(default=10000, ge=10)


class RcpSection(_Section):
    space: TorusSpace = Field(default_factory=lambda: TorusSpace(q=5, p=1))
    degree: int = Field(default=2, ge=1, description="eps is the Fejér bound at this degree plus the margin")
    margin: float = Field(default=0.05, gt=0.0)
    net_size: int = Field(default=8, ge=1)


class NctorusSection(_Section):
    qs: List[int] = Field(default_factory=lambda: [3, 4, 5, 6, 7, 8], min_length=1)
    degrees: List[int] = Field(default_factory=lambda: [1, 2, 3])
    length: Literal["euclidean", "sup"] = "euclidean"
    fejer: FejerCheckSection = Field(default_factory=FejerCheckSection)
    rcp: RcpSection = Field(default_factory=RcpSection)
    uniformity_q_max: int = Field(default=8, ge=3)
    uniformity_degree: int = Field(default=2, ge=1)
    uniformity_net_size: int = Field(default=4, ge=1)
    uniformity_tol: float = Field(default=0.1, gt=0.0)
    boundedness_qs: List[int] = Field(default_factory=lambda: [3, 4, 5])
    eps_grid: List[float] = Field(default_factory=lambda: [0.6, 0.4, 0.25])


class ReportSection(_Section):
    inputs: List[str] = Field(..., min_length=1, description="result.json files to merge")


class ExperimentConfig(BaseModel):
    """
    One experiment run. Paths inside the document are relative to the
    document's directory.
    """
    suite: Literal["validate", "distance", "berezin", "nctorus", "report"]
    seed: int = Field(..., ge=0, description="Master seed; every random choice derives from it")
    workers: int = Field(default=1, ge=1, le=64, description="Threads for sweeps")
    output_dir: str = Field(default="results")
    validation: Optional[ValidateSection] = Field(default=None, alias="validate")
    distance: Optional[DistanceSection] = None
    berezin: Optional[BerezinSection] = None
    nctorus: Optional[NctorusSection] = None
    report: Optional[ReportSection] = None

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _check_section(self) -> "ExperimentConfig":
        if self.suite == "report" and self.report is None:
            raise ValueError("the report suite needs a 'report' section listing its inputs")
        return self

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def section(self) -> BaseModel:
        """The settings of the configured suite, defaults filled in."""
        defaults = {"validate": ValidateSection, "distance": DistanceSection, "berezin": BerezinSection,
                    "nctorus": NctorusSection}
        current = getattr(self, "validation" if self.suite == "validate" else self.suite)
        return current if current is not None else defaults[self.suite]()

    def canonical_json(self) -> str:
        """Sorted, whitespace-free JSON of everything that influences results."""
        data = self.model_dump(mode="json", by_alias=True, exclude={"output_dir", "workers"})
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def config_schema() -> Dict[str, Any]:
    """JSON schema of the experiment document."""
    return ExperimentConfig.model_json_schema(by_alias=True)


def resolve_path(base_dir: Path, path: str) -> Path:
    """
    Resolve a path from a configuration document.

    Raises:
        ConfigError: if the file does not exist
    """
    resolved = Path(path) if Path(path).is_absolute() else base_dir / path
    if not resolved.is_file():
        raise ConfigError(f"referenced file does not exist: {resolved}")
    return resolved


def _referenced_files(config: ExperimentConfig) -> List[str]:
    files: List[str] = []
    section = config.section() if config.suite != "report" else None
    if isinstance(section, ValidateSection):
        spaces = list(section.spaces) + [s for case in section.diambound_cases for s in (case.x, case.y) if s]
    elif isinstance(section, DistanceSection):
        spaces = [s for case in section.cases for s in (case.x, case.y) if s]
    else:
        spaces = []
    files += [s.file for s in spaces if isinstance(s, ExplicitSpace) and s.file is not None]
    if config.report is not None:
        files += config.report.inputs
    return files


def parse_config(raw: Dict[str, Any], base_dir: Optional[Path] = None,
                 seed_override: Optional[int] = None, suite: Optional[str] = None) -> ExperimentConfig:
    """
    Validate a raw document against the schema, then parse it.

    Args:
        raw: The decoded JSON document
        base_dir: Directory relative paths are resolved against
        seed_override: Replaces the document's seed
        suite: The suite the caller is about to run; fills in a missing
            'suite' and must agree with a present one

    Raises:
        ConfigError: on schema violations, a missing seed, a suite mismatch or missing files
    """
    document = dict(raw)
    if suite is not None:
        if document.setdefault("suite", suite) != suite:
            raise ConfigError(f"configuration is for suite {document['suite']!r}, not {suite!r}")
    if seed_override is not None:
        document["seed"] = seed_override
    if "seed" not in document:
        raise ConfigError("the configuration has no seed; set 'seed' or pass --seed")

    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {first.message}"
                          + (f" (and {len(errors) - 1} more)" if len(errors) > 1 else ""))
    try:
        config = ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    config._base_dir = (base_dir or Path.cwd()).resolve()
    for path in _referenced_files(config):
        resolve_path(config.base_dir, path)
    logger.debug(f"configuration {config.config_hash[:12]} for suite {config.suite}")
    return config


def load_config(path: Union[str, Path], seed_override: Optional[int] = None,
                suite: Optional[str] = None) -> ExperimentConfig:
    """
    Read and validate an experiment document from disk.

    Raises:
        ConfigError: if the file is missing, is not JSON or is not a valid document
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"configuration file does not exist: {config_path}")
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{config_path} must hold a JSON object")
    return parse_config(raw, base_dir=config_path.parent, seed_override=seed_override, suite=suite)
