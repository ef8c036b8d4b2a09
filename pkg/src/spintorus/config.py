"""Run configuration: flat key = value files plus CLI flag overrides.

The file format is one `key = value` pair per line; blank lines and lines
starting with # are ignored.  Flags win over file values.  Recognized keys:

    n        spatial dimension (default 2)
    N        grid points per axis; a comma list runs a refinement study
    scheme   spectral | fd2 | fd4
    delta    comma twists, e.g. 0.5,0
    metric   metric descriptor (see geometry.parse_metric)
    diffeo   diffeo descriptor (see diffeo.parse_diffeo)
    seed     probe-spinor RNG seed
    probes   number of probe spinors
    probe_band  max |m_a| of probe modes (default min(N)//4 - 1, at least 1)
    out      output directory
    figures  true | false (render figures next to CSV/JSON)
    spectrum_window  eigenvalue count for spectrum comparisons
    tol_*    tolerance overrides (see DEFAULT_TOLERANCES)
"""

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fields import SpinStructureLabel

DEFAULT_TOLERANCES = {
    "tol_unitarity": 1e-12,
    "tol_residual": 1e-10,
    "tol_spectra": 1e-10,
    "tol_zero": 1e-12,
    "order_margin": 0.5,
}

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_bool(text, key):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"field {key!r}: expected true/false, got {text!r}") from None


@dataclass
class RunConfig:
    n: int = 2
    N: tuple = (16,)
    scheme: str = "spectral"
    delta: tuple = None  # defaults to the untwisted label of length n
    metric: str = "flat"
    diffeo: str = None
    seed: int = 1234
    probes: int = 3
    probe_band: int = None
    out: Path = Path("runs")
    figures: bool = True
    spectrum_window: int = 12
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def validate(self):
        from .diffeo import parse_diffeo
        from .geometry import parse_metric

        if self.n < 1:
            raise ConfigError(f"field 'n': must be >= 1, got {self.n}")
        for N in self.N:
            if N < 4 or N % 2:
                raise ConfigError(f"field 'N': entries must be even and >= 4, got {N}")
        if self.scheme not in ("spectral", "fd2", "fd4"):
            raise ConfigError(f"field 'scheme': unknown scheme {self.scheme!r}")
        if self.delta is None:
            self.delta = (0.0,) * self.n
        if len(self.delta) != self.n:
            raise ConfigError(
                f"field 'delta': {len(self.delta)} twists for dimension n={self.n}"
            )
        try:
            SpinStructureLabel(self.delta)
        except Exception as exc:
            raise ConfigError(f"field 'delta': {exc}") from None
        parse_metric(self.metric, self.n)
        if self.diffeo is not None:
            parse_diffeo(self.diffeo, self.n)
        return self

    @property
    def label(self):
        return SpinStructureLabel(self.delta)

    def default_probe_band(self):
        if self.probe_band is not None:
            return self.probe_band
        return max(1, min(self.N) // 4 - 1)


def parse_delta_text(text):
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"field 'delta': cannot parse {text!r}") from None


def parse_N_text(text):
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ConfigError(f"field 'N': cannot parse {text!r}") from None


def read_config_file(path):
    """Parse a key = value file, reporting the offending line on error."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(file_values=None, overrides=None):
    """Merge file values and flag overrides (flags win) into a RunConfig."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = RunConfig()
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in merged.items():
        try:
            if key == "n":
                cfg.n = int(value)
            elif key == "N":
                cfg.N = parse_N_text(str(value))
            elif key == "scheme":
                cfg.scheme = str(value).lower()
            elif key == "delta":
                cfg.delta = parse_delta_text(str(value))
            elif key == "metric":
                cfg.metric = str(value)
            elif key == "diffeo":
                cfg.diffeo = str(value)
            elif key == "seed":
                cfg.seed = int(value)
            elif key == "probes":
                cfg.probes = int(value)
            elif key == "probe_band":
                cfg.probe_band = int(value)
            elif key == "out":
                cfg.out = Path(value)
            elif key == "figures":
                cfg.figures = value if isinstance(value, bool) else _parse_bool(value, key)
            elif key == "spectrum_window":
                cfg.spectrum_window = int(value)
            elif key in tolerances:
                tolerances[key] = float(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r}: cannot parse value {value!r}") from None
    cfg.tolerances = tolerances
    return cfg.validate()
